//! Box-constrained minimisation of the squared-hinge energy.
//!
//! Each grounded constraint contributes `w * max(0, r)^2` with
//! `r = Σ body − (m − 1) − head`, an affine function of the scores, so the
//! energy is convex and continuously differentiable on `[0,1]^n`. Clamped
//! scores are folded into the constant part of `r`.
//!
//! Free variables split into connected blocks (two free scores are linked when
//! they share a constraint). Blocks never interact, so each is minimised on its
//! own, always starting from the neutral score 0.5. The decomposition depends
//! only on the evidence, which makes a block's solution identical whether it is
//! computed inside a full solve or re-solved alone after new evidence.

use crate::ground::Ecg;
use crate::kg::BetId;
use crate::scalar::Scalar;

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;
const STEP_MIN: f64 = 1e-12;
const STEP_MAX: f64 = 1e12;

const NO_HEAD: u32 = u32::MAX;

/// The energy restricted to one block of free variables. Terms are stored
/// flat: term `j` has body indices `body[start[j]..start[j + 1]]`.
#[derive(Debug, Clone)]
pub struct SubProblem<S> {
    vars: Vec<BetId>,
    weight: Vec<S>,
    /// Clamped body mass minus (m − 1) minus a clamped head.
    offset: Vec<S>,
    start: Vec<u32>,
    body: Vec<u32>,
    head: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats<S> {
    pub iterations: usize,
    /// Infinity norm of the projected-gradient step `P(x − ∇E) − x`.
    pub residual: S,
    pub converged: bool,
    pub energy: S,
}

impl<S: Scalar> SubProblem<S> {
    /// `vars` must be sorted and unclamped; every constraint touching them may
    /// only reach other members of `vars` or clamped scores.
    pub fn new(ecg: &Ecg, clamp: &[Option<bool>], vars: Vec<BetId>) -> Self {
        let mut cids: Vec<usize> = vars.iter().flat_map(|&v| ecg.incident(v).iter().copied()).collect();
        cids.sort_unstable();
        cids.dedup();
        let local = |h: BetId| vars.binary_search(&h).ok().map(|i| i as u32);
        let clamped = |h: BetId| match clamp[h] {
            Some(true) => S::one(),
            Some(false) => S::zero(),
            None => panic!("BET {h} is neither free in this block nor clamped"),
        };
        let mut p = SubProblem {
            weight: Vec::with_capacity(cids.len()),
            offset: Vec::with_capacity(cids.len()),
            start: Vec::with_capacity(cids.len() + 1),
            body: Vec::new(),
            head: Vec::with_capacity(cids.len()),
            vars: Vec::new(),
        };
        p.start.push(0);
        for j in cids {
            let c = &ecg.constraints()[j];
            let mut offset = -S::of(c.body.len() as f64 - 1.0);
            for &b in &c.body {
                match local(b) {
                    Some(i) => p.body.push(i),
                    None => offset += clamped(b),
                }
            }
            let head = local(c.head);
            if head.is_none() {
                offset -= clamped(c.head);
            }
            p.weight.push(S::of(c.weight));
            p.offset.push(offset);
            p.start.push(p.body.len() as u32);
            p.head.push(head.unwrap_or(NO_HEAD));
        }
        p.vars = vars;
        p
    }

    pub fn vars(&self) -> &[BetId] {
        &self.vars
    }

    #[inline]
    fn hinge(&self, j: usize, x: &[S]) -> S {
        let mut r = self.offset[j];
        for &i in &self.body[self.start[j] as usize..self.start[j + 1] as usize] {
            r += x[i as usize];
        }
        let h = self.head[j];
        if h != NO_HEAD {
            r -= x[h as usize];
        }
        r.max(S::zero())
    }

    pub fn energy(&self, x: &[S]) -> S {
        (0..self.weight.len())
            .map(|j| {
                let r = self.hinge(j, x);
                self.weight[j] * r * r
            })
            .sum()
    }

    pub fn gradient(&self, x: &[S], grad: &mut [S]) {
        self.energy_gradient(x, grad);
    }

    /// Energy and gradient in one pass.
    pub fn energy_gradient(&self, x: &[S], grad: &mut [S]) -> S {
        grad.iter_mut().for_each(|g| *g = S::zero());
        let two = S::of(2.0);
        let mut f = S::zero();
        for j in 0..self.weight.len() {
            let r = self.hinge(j, x);
            if r > S::zero() {
                let w = self.weight[j];
                f += w * r * r;
                let d = two * w * r;
                for &i in &self.body[self.start[j] as usize..self.start[j + 1] as usize] {
                    grad[i as usize] += d;
                }
                let h = self.head[j];
                if h != NO_HEAD {
                    grad[h as usize] -= d;
                }
            }
        }
        f
    }

    /// Projected gradient with Barzilai–Borwein trial steps and Armijo
    /// backtracking along the projection arc. Every accepted step lowers the
    /// energy, so the recorded trace is non-increasing.
    pub fn minimize(&self, x: &mut [S], tol: S, max_iters: usize, mut trace: Option<&mut Vec<S>>) -> SolveStats<S> {
        let n = x.len();
        let mut grad = vec![S::zero(); n];
        let mut trial = vec![S::zero(); n];
        let mut trial_grad = vec![S::zero(); n];
        let mut f = self.energy_gradient(x, &mut grad);
        if let Some(t) = trace.as_deref_mut() {
            t.push(f);
        }
        let sigma = S::of(ARMIJO);
        let mut step = S::one() / norm_inf(&grad).max(S::one());
        let mut iterations = 0;
        loop {
            let residual = projected_residual(x, &grad);
            if residual <= tol {
                return SolveStats { iterations, residual, converged: true, energy: f };
            }
            if iterations >= max_iters {
                return SolveStats { iterations, residual, converged: false, energy: f };
            }
            let mut accepted = false;
            for _ in 0..MAX_BACKTRACKS {
                let mut slope = S::zero();
                for i in 0..n {
                    trial[i] = clamp01(x[i] - step * grad[i]);
                    slope += grad[i] * (trial[i] - x[i]);
                }
                let f_trial = self.energy_gradient(&trial, &mut trial_grad);
                if f_trial <= f + sigma * slope {
                    accepted = f_trial <= f;
                    f = f_trial;
                    break;
                }
                step = step * S::half();
            }
            if !accepted {
                // No representable decrease left along the projected arc.
                return SolveStats { iterations, residual, converged: false, energy: f };
            }
            let (mut ss, mut sy) = (S::zero(), S::zero());
            for i in 0..n {
                let s = trial[i] - x[i];
                let y = trial_grad[i] - grad[i];
                ss += s * s;
                sy += s * y;
            }
            step = if sy > S::zero() {
                (ss / sy).max(S::of(STEP_MIN)).min(S::of(STEP_MAX))
            } else {
                (step * S::of(2.0)).min(S::of(STEP_MAX))
            };
            x.copy_from_slice(&trial);
            std::mem::swap(&mut grad, &mut trial_grad);
            iterations += 1;
            if let Some(t) = trace.as_deref_mut() {
                t.push(f);
            }
        }
    }
}

#[inline]
fn clamp01<S: Scalar>(v: S) -> S {
    v.max(S::zero()).min(S::one())
}

fn norm_inf<S: Scalar>(v: &[S]) -> S {
    v.iter().fold(S::zero(), |m, x| m.max(x.abs()))
}

fn projected_residual<S: Scalar>(x: &[S], grad: &[S]) -> S {
    x.iter()
        .zip(grad)
        .fold(S::zero(), |m, (&xi, &gi)| m.max((clamp01(xi - gi) - xi).abs()))
}

/// Connected blocks of the free variables in `within`, each sorted, ordered
/// by smallest member.
pub fn free_blocks(ecg: &Ecg, clamp: &[Option<bool>], within: &[BetId]) -> Vec<Vec<BetId>> {
    let n = ecg.num_bets();
    let mut member = vec![false; n];
    for &h in within {
        if clamp[h].is_none() {
            member[h] = true;
        }
    }
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut a: usize) -> usize {
        while parent[a] != a {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        a
    }
    let mut seen_constraint = vec![false; ecg.constraints().len()];
    for &h in within {
        if !member[h] {
            continue;
        }
        for &j in ecg.incident(h) {
            if std::mem::replace(&mut seen_constraint[j], true) {
                continue;
            }
            let mut first: Option<usize> = None;
            for v in ecg.constraints()[j].domain() {
                if !member[v] {
                    continue;
                }
                match first {
                    None => first = Some(v),
                    Some(f) => {
                        let (ra, rb) = (find(&mut parent, f), find(&mut parent, v));
                        if ra != rb {
                            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
                            parent[hi] = lo;
                        }
                    }
                }
            }
        }
    }
    let mut sorted: Vec<BetId> = within.iter().copied().filter(|&h| member[h]).collect();
    sorted.sort_unstable();
    sorted.dedup();
    let mut block_of_root: std::collections::HashMap<usize, usize> = std::collections::HashMap::new();
    let mut blocks: Vec<Vec<BetId>> = Vec::new();
    for h in sorted {
        let root = find(&mut parent, h);
        let idx = *block_of_root.entry(root).or_insert_with(|| {
            blocks.push(Vec::new());
            blocks.len() - 1
        });
        blocks[idx].push(h);
    }
    blocks
}

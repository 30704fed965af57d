//! Soft-logic MAP inference over the Evaluation Coupling Graph.
//!
//! Every grounded constraint is relaxed with the Lukasiewicz t-norm and scored
//! by the squared hinge `ψ = max(0, body − head)²`. MAP inference minimises
//! `Σ θ ψ` over `[0,1]^n` with crowd evidence clamped, then thresholds the
//! scores at `τ` to obtain labels and the inferable set.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Mutex;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ground::{Ecg, GroundedConstraint};
use crate::kg::BetId;
use crate::scalar::Scalar;
use crate::solver::{free_blocks, SolveStats, SubProblem};

/// Crowd labels keyed by BET.
pub type Evidence = BTreeMap<BetId, bool>;

/// Soft truth values for every BET plus the clamped evidence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assignment<S> {
    pub scores: Vec<S>,
    pub clamp: Vec<Option<bool>>,
}

impl<S: Scalar> Assignment<S> {
    /// Every score at 0.5, nothing clamped.
    pub fn neutral(n: usize) -> Self {
        Assignment { scores: vec![S::half(); n], clamp: vec![None; n] }
    }

    /// Neutral scores with `evidence` clamped to 0 or 1.
    pub fn with_evidence(n: usize, evidence: &Evidence) -> Result<Self> {
        let mut a = Self::neutral(n);
        for (&h, &label) in evidence {
            if h >= n {
                return Err(Error::InvalidBet(h));
            }
            a.clamp[h] = Some(label);
            a.scores[h] = if label { S::one() } else { S::zero() };
        }
        Ok(a)
    }

    /// Unclamped scores, each checked to lie in `[0,1]`.
    pub fn from_scores(scores: Vec<S>) -> Result<Self> {
        let a = Assignment { clamp: vec![None; scores.len()], scores };
        a.validate()?;
        Ok(a)
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.clamp.len() != self.scores.len() {
            return Err(Error::InvalidValue("clamp mask and scores differ in length".into()));
        }
        for (h, (&s, c)) in self.scores.iter().zip(&self.clamp).enumerate() {
            if !(s >= S::zero() && s <= S::one()) {
                return Err(Error::InvalidValue(format!("score {s} of BET {h} outside [0,1]")));
            }
            if let Some(label) = *c {
                if s != if label { S::one() } else { S::zero() } {
                    return Err(Error::InvalidValue(format!("clamped BET {h} has score {s}")));
                }
            }
        }
        Ok(())
    }
}

/// Converts numeric evidence into binary labels, rejecting anything but 0 and 1.
pub fn evidence_from_values(values: &[(BetId, f64)]) -> Result<Evidence> {
    values
        .iter()
        .map(|&(h, v)| match v {
            1.0 => Ok((h, true)),
            0.0 => Ok((h, false)),
            v => Err(Error::InvalidValue(format!("evidence for BET {h} is {v}, not binary"))),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InferenceConfig<S> {
    /// Confidence threshold in (0.5, 1].
    pub tau: S,
    /// Tolerance on the infinity norm of the projected-gradient step.
    pub solver_tol: S,
    pub max_iters: usize,
}

impl<S: Scalar> Default for InferenceConfig<S> {
    fn default() -> Self {
        InferenceConfig { tau: S::of(0.8), solver_tol: S::of(1e-6), max_iters: 10_000 }
    }
}

impl<S: Scalar> InferenceConfig<S> {
    pub fn with_tau(tau: S) -> Self {
        InferenceConfig { tau, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        check_tau(self.tau)?;
        if !(self.solver_tol > S::zero()) {
            return Err(Error::InvalidValue(format!("solver tolerance {} must be positive", self.solver_tol)));
        }
        Ok(())
    }
}

fn check_tau<S: Scalar>(tau: S) -> Result<()> {
    if tau > S::half() && tau <= S::one() {
        Ok(())
    } else {
        Err(Error::InvalidValue(format!("tau {tau} must lie in (0.5, 1]")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InferenceResult<S> {
    pub assignment: Assignment<S>,
    /// `Some(label)` for inferable BETs, `None` when undecided.
    pub labels: Vec<Option<bool>>,
    /// Ascending ids of BETs with a label.
    pub inferable: Vec<BetId>,
    /// Energy of the solver optimum, before any class-mass calibration.
    pub energy: S,
    /// Largest iteration count over the independently solved blocks.
    pub iterations: usize,
    pub residual: S,
    pub converged: bool,
}

#[derive(Serialize)]
struct BetRow<S> {
    id: BetId,
    score: S,
    label: Option<u8>,
    inferable: bool,
}

#[derive(Serialize)]
struct ResultJson<S> {
    bets: Vec<BetRow<S>>,
    energy: S,
    iterations: usize,
    residual: S,
    converged: bool,
}

impl<S: Scalar + Serialize> InferenceResult<S> {
    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        let bets = (0..self.labels.len())
            .map(|h| BetRow {
                id: h,
                score: self.assignment.scores[h],
                label: self.labels[h].map(u8::from),
                inferable: self.labels[h].is_some(),
            })
            .collect();
        let json = ResultJson {
            bets,
            energy: self.energy,
            iterations: self.iterations,
            residual: self.residual,
            converged: self.converged,
        };
        serde_json::to_writer_pretty(out, &json)?;
        Ok(())
    }
}

impl<S> InferenceResult<S> {
    pub fn inferable_count(&self) -> usize {
        self.inferable.len()
    }
}

/// Lukasiewicz conjunction folded over the body: `max(0, Σ v − (m − 1))`.
/// The empty conjunction is 1.
pub fn lukasiewicz_body<S: Scalar>(values: &[S]) -> Result<S> {
    let mut acc = S::one();
    for &v in values {
        if !(v >= S::zero() && v <= S::one()) {
            return Err(Error::InvalidValue(format!("truth value {v} outside [0,1]")));
        }
        acc = (acc + v - S::one()).max(S::zero());
    }
    Ok(acc)
}

/// Distance to satisfaction of one constraint, squared.
pub fn potential<S: Scalar>(gc: &GroundedConstraint, a: &Assignment<S>) -> S {
    let m = S::of(gc.body.len() as f64);
    let sum: S = gc.body.iter().map(|&h| a.scores[h]).sum();
    let body = (sum - (m - S::one())).max(S::zero());
    let d = (body - a.scores[gc.head]).max(S::zero());
    d * d
}

/// `Σ θ ψ` over all grounded constraints.
pub fn energy<S: Scalar>(ecg: &Ecg, a: &Assignment<S>) -> S {
    ecg.constraints().iter().map(|c| S::of(c.weight) * potential(c, a)).sum()
}

/// Gradient of [`energy`] with respect to every score, clamped ones included.
pub fn energy_gradient<S: Scalar>(ecg: &Ecg, a: &Assignment<S>) -> Vec<S> {
    let mut grad = vec![S::zero(); a.len()];
    let two = S::of(2.0);
    for c in ecg.constraints() {
        let m = S::of(c.body.len() as f64);
        let sum: S = c.body.iter().map(|&h| a.scores[h]).sum();
        let r = sum - (m - S::one()) - a.scores[c.head];
        if r > S::zero() {
            let d = two * S::of(c.weight) * r;
            for &h in &c.body {
                grad[h] += d;
            }
            grad[c.head] -= d;
        }
    }
    grad
}

/// Labels every BET: 1 when `score ≥ τ`, 0 when `1 − score ≥ τ`, undecided
/// otherwise. Clamped BETs always carry their evidence.
pub fn threshold_labels<S: Scalar>(a: &Assignment<S>, tau: S) -> Result<(Vec<Option<bool>>, Vec<BetId>)> {
    check_tau(tau)?;
    let labels: Vec<Option<bool>> = a
        .scores
        .iter()
        .zip(&a.clamp)
        .map(|(&s, &c)| c.or_else(|| label_of(s, tau)))
        .collect();
    let inferable = labels.iter().enumerate().filter(|(_, l)| l.is_some()).map(|(h, _)| h).collect();
    Ok((labels, inferable))
}

#[inline]
fn label_of<S: Scalar>(score: S, tau: S) -> Option<bool> {
    if score >= tau {
        Some(true)
    } else if S::one() - score >= tau {
        Some(false)
    } else {
        None
    }
}

/// Fixed class-mass reweighting `p̂ = (q₁/p₁)s / ((q₁/p₁)s + (q₀/p₀)(1 − s))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Calibration<S> {
    pub positive: S,
    pub negative: S,
}

impl<S: Scalar> Calibration<S> {
    /// Fits the class ratios so that the mean class mass of `scores[h]` over
    /// the eligible BETs is moved towards the target positive fraction `q1`.
    pub fn fit(scores: &[S], eligible: impl Iterator<Item = BetId>, q1: S) -> Result<Self> {
        if !(q1 >= S::zero() && q1 <= S::one()) {
            return Err(Error::InvalidValue(format!("class fraction {q1} outside [0,1]")));
        }
        let (mut sum, mut n) = (S::zero(), 0usize);
        for h in eligible {
            sum += scores[h];
            n += 1;
        }
        if n == 0 {
            return Ok(Calibration { positive: S::one(), negative: S::one() });
        }
        let p1 = sum / S::of(n as f64);
        let (q0, p0) = (S::one() - q1, S::one() - p1);
        let ratio = |q: S, p: S, class: u8| {
            if p > S::zero() {
                Ok(q / p)
            } else if q > S::zero() {
                Err(Error::DegenerateClassMass { class })
            } else {
                Ok(S::zero())
            }
        };
        Ok(Calibration { positive: ratio(q1, p1, 1)?, negative: ratio(q0, p0, 0)? })
    }

    pub fn apply(&self, s: S) -> S {
        let a = self.positive * s;
        let b = self.negative * (S::one() - s);
        let z = a + b;
        if z > S::zero() {
            (a / z).max(S::zero()).min(S::one())
        } else {
            s
        }
    }
}

/// Rescales every unclamped score by the class-mass ratios measured over the
/// unclamped scores themselves.
pub fn class_mass_normalize<S: Scalar>(a: &Assignment<S>, q1: S) -> Result<Assignment<S>> {
    let eligible: Vec<bool> = a.clamp.iter().map(Option::is_none).collect();
    class_mass_normalize_where(a, q1, &eligible)
}

/// As [`class_mass_normalize`] but restricted to BETs with `eligible[h]`;
/// clamped BETs are never touched.
pub fn class_mass_normalize_where<S: Scalar>(a: &Assignment<S>, q1: S, eligible: &[bool]) -> Result<Assignment<S>> {
    let pick = |h: &BetId| eligible[*h] && a.clamp[*h].is_none();
    let cal = Calibration::fit(&a.scores, (0..a.len()).filter(pick), q1)?;
    let mut out = a.clone();
    for h in (0..a.len()).filter(pick) {
        out.scores[h] = cal.apply(a.scores[h]);
    }
    Ok(out)
}

/// MAP inference with `evidence` clamped.
pub fn map_solve<S: Scalar>(ecg: &Ecg, evidence: &Evidence, cfg: &InferenceConfig<S>) -> Result<InferenceResult<S>> {
    Ok(InferenceSession::new(ecg, evidence, *cfg)?.result())
}

/// As [`map_solve`], also returning the total energy after every solver
/// iteration (blocks that finished early hold their final energy).
pub fn map_solve_traced<S: Scalar>(
    ecg: &Ecg,
    evidence: &Evidence,
    cfg: &InferenceConfig<S>,
) -> Result<(InferenceResult<S>, Vec<S>)> {
    cfg.validate()?;
    let a = Assignment::<S>::with_evidence(ecg.num_bets(), evidence)?;
    let all: Vec<BetId> = (0..ecg.num_bets()).collect();
    let mut scores = a.scores.clone();
    let mut traces = Vec::new();
    for vars in free_blocks(ecg, &a.clamp, &all) {
        let p = SubProblem::new(ecg, &a.clamp, vars);
        let mut x = vec![S::half(); p.vars().len()];
        let mut trace = Vec::new();
        p.minimize(&mut x, cfg.solver_tol, cfg.max_iters, Some(&mut trace));
        for (&h, &v) in p.vars().iter().zip(&x) {
            scores[h] = v;
        }
        traces.push(trace);
    }
    let fixed: S = ecg
        .constraints()
        .iter()
        .filter(|c| c.domain().all(|h| a.clamp[h].is_some()))
        .map(|c| S::of(c.weight) * potential(c, &a))
        .sum();
    let len = traces.iter().map(Vec::len).max().unwrap_or(1);
    let total = (0..len)
        .map(|t| fixed + traces.iter().map(|tr| tr[t.min(tr.len() - 1)]).sum::<S>())
        .collect();
    Ok((InferenceSession::new(ecg, evidence, *cfg)?.result(), total))
}

#[derive(Debug, Clone)]
struct Block<S> {
    vars: Vec<BetId>,
    stats: SolveStats<S>,
    live: bool,
}

const NO_BLOCK: usize = usize::MAX;

type Solved<S> = Vec<(Vec<BetId>, Vec<S>, SolveStats<S>)>;

/// The most recent lookahead, kept so that committing the same BET and label
/// does not solve the same blocks again. Clones start empty.
struct Memo<S>(Mutex<Option<MemoEntry<S>>>);

/// Epoch, BET, hypothetical label and the blocks solved under it.
type MemoEntry<S> = (usize, BetId, bool, Solved<S>);

impl<S> Clone for Memo<S> {
    fn clone(&self) -> Self {
        Memo(Mutex::new(None))
    }
}

impl<S> std::fmt::Debug for Memo<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("Memo")
    }
}

/// MAP state that can be extended one piece of evidence at a time.
///
/// New evidence only re-solves the block containing the newly clamped BET,
/// warm-started from the current scores, and [`InferenceSession::lookahead`]
/// evaluates a hypothetical label the same way without mutating the session.
/// The result is a minimiser of the same energy a fresh [`map_solve`] with the
/// extended evidence reaches; where the energy is flat the two may sit at
/// different minimisers.
#[derive(Debug, Clone)]
pub struct InferenceSession<'a, S> {
    ecg: &'a Ecg,
    cfg: InferenceConfig<S>,
    clamp: Vec<Option<bool>>,
    raw: Vec<S>,
    block_of: Vec<usize>,
    blocks: Vec<Block<S>>,
    calibration: Option<Calibration<S>>,
    /// Blocks with a lower index were solved before calibration and use it.
    calibrated_blocks: usize,
    labels: Vec<Option<bool>>,
    inferable: usize,
    /// Number of commits so far; identifies the state a memo was computed in.
    epoch: usize,
    memo: Memo<S>,
}

impl<'a, S: Scalar> InferenceSession<'a, S> {
    pub fn new(ecg: &'a Ecg, evidence: &Evidence, cfg: InferenceConfig<S>) -> Result<Self> {
        cfg.validate()?;
        let a = Assignment::<S>::with_evidence(ecg.num_bets(), evidence)?;
        let n = ecg.num_bets();
        let mut session = InferenceSession {
            ecg,
            cfg,
            clamp: a.clamp,
            raw: a.scores,
            block_of: vec![NO_BLOCK; n],
            blocks: Vec::new(),
            calibration: None,
            calibrated_blocks: 0,
            labels: vec![None; n],
            inferable: 0,
            epoch: 0,
            memo: Memo(Mutex::new(None)),
        };
        let all: Vec<BetId> = (0..n).collect();
        session.solve_region(&all, false);
        session.relabel_all();
        Ok(session)
    }

    pub fn config(&self) -> &InferenceConfig<S> {
        &self.cfg
    }

    pub fn ecg(&self) -> &'a Ecg {
        self.ecg
    }

    pub fn clamp(&self) -> &[Option<bool>] {
        &self.clamp
    }

    pub fn is_clamped(&self, h: BetId) -> bool {
        self.clamp[h].is_some()
    }

    pub fn evidence(&self) -> Evidence {
        self.clamp.iter().enumerate().filter_map(|(h, c)| c.map(|l| (h, l))).collect()
    }

    /// Score after calibration, as used for labelling.
    pub fn score(&self, h: BetId) -> S {
        self.calibrated(h, self.raw[h])
    }

    pub fn raw_score(&self, h: BetId) -> S {
        self.raw[h]
    }

    pub fn label(&self, h: BetId) -> Option<bool> {
        self.labels[h]
    }

    pub fn labels(&self) -> &[Option<bool>] {
        &self.labels
    }

    pub fn inferable_count(&self) -> usize {
        self.inferable
    }

    /// Whether every block currently in use reached the solver tolerance.
    pub fn converged(&self) -> bool {
        self.blocks.iter().filter(|b| b.live).all(|b| b.stats.converged)
    }

    pub fn calibration(&self) -> Option<Calibration<S>> {
        self.calibration
    }

    /// Fits class-mass ratios towards the positive fraction `q1` from the
    /// unclamped scores that inference moved off the neutral value and applies
    /// them to those scores. The normalization is one-time: a block re-solved
    /// after new evidence is labelled from its raw scores. Scores still at 0.5
    /// carry no inferred mass and are left alone.
    pub fn calibrate(&mut self, q1: S) -> Result<Calibration<S>> {
        let eligible: Vec<BetId> = (0..self.raw.len()).filter(|&h| self.eligible(h)).collect();
        let cal = Calibration::fit(&self.raw, eligible.into_iter(), q1)?;
        self.set_calibration(Some(cal));
        Ok(cal)
    }

    pub fn set_calibration(&mut self, calibration: Option<Calibration<S>>) {
        self.calibration = calibration;
        self.calibrated_blocks = self.blocks.len();
        self.relabel_all();
    }

    /// `|I(G, E ∪ {h = label})|` without changing the session.
    pub fn lookahead(&self, h: BetId, label: bool) -> Result<usize> {
        if h >= self.raw.len() {
            return Err(Error::InvalidBet(h));
        }
        match self.clamp[h] {
            Some(l) if l == label => return Ok(self.inferable),
            Some(_) => return Err(Error::InvalidValue(format!("BET {h} is already clamped to the other label"))),
            None => {}
        }
        let block = &self.blocks[self.block_of[h]];
        let mut clamp = self.clamp.clone();
        clamp[h] = Some(label);
        let within: Vec<BetId> = block.vars.iter().copied().filter(|&v| v != h).collect();
        let before = block.vars.iter().filter(|&&v| self.labels[v].is_some()).count();
        let mut count = self.inferable - before + 1;
        let mut solved = Vec::new();
        for vars in free_blocks(self.ecg, &clamp, &within) {
            let (x, stats) = self.solve_vars(&clamp, &vars, true);
            count += vars
                .iter()
                .zip(&x)
                .filter(|&(_, &s)| label_of(s, self.cfg.tau).is_some())
                .count();
            solved.push((vars, x, stats));
        }
        *self.memo.0.lock().expect("memo lock") = Some((self.epoch, h, label, solved));
        Ok(count)
    }

    /// Clamps `h` to `label` and re-solves its block.
    pub fn commit(&mut self, h: BetId, label: bool) -> Result<()> {
        if h >= self.raw.len() {
            return Err(Error::InvalidBet(h));
        }
        match self.clamp[h] {
            Some(l) if l == label => return Ok(()),
            Some(_) => return Err(Error::InvalidValue(format!("BET {h} is already clamped to the other label"))),
            None => {}
        }
        let b = self.block_of[h];
        self.blocks[b].live = false;
        let vars = std::mem::take(&mut self.blocks[b].vars);
        self.clamp[h] = Some(label);
        self.raw[h] = if label { S::one() } else { S::zero() };
        self.block_of[h] = NO_BLOCK;
        let memo = self.memo.0.get_mut().expect("memo lock").take();
        match memo {
            Some((epoch, mh, ml, solved)) if epoch == self.epoch && mh == h && ml == label => {
                for (vars, x, stats) in solved {
                    self.install(vars, x, stats);
                }
            }
            _ => {
                let within: Vec<BetId> = vars.iter().copied().filter(|&v| v != h).collect();
                self.solve_region(&within, true);
            }
        }
        self.epoch += 1;
        for &v in &vars {
            self.relabel(v);
        }
        Ok(())
    }

    pub fn result(&self) -> InferenceResult<S> {
        let scores: Vec<S> = (0..self.raw.len()).map(|h| self.score(h)).collect();
        let raw = Assignment { scores: self.raw.clone(), clamp: self.clamp.clone() };
        let live = self.blocks.iter().filter(|b| b.live);
        let (mut iterations, mut residual, mut converged) = (0, S::zero(), true);
        for b in live {
            iterations = iterations.max(b.stats.iterations);
            residual = residual.max(b.stats.residual);
            converged &= b.stats.converged;
        }
        InferenceResult {
            energy: energy(self.ecg, &raw),
            assignment: Assignment { scores, clamp: self.clamp.clone() },
            labels: self.labels.clone(),
            inferable: (0..self.raw.len()).filter(|&h| self.labels[h].is_some()).collect(),
            iterations,
            residual,
            converged,
        }
    }

    fn solve_vars(&self, clamp: &[Option<bool>], vars: &[BetId], warm: bool) -> (Vec<S>, SolveStats<S>) {
        let p = SubProblem::new(self.ecg, clamp, vars.to_vec());
        let mut x: Vec<S> = if warm { vars.iter().map(|&v| self.raw[v]).collect() } else { vec![S::half(); vars.len()] };
        let stats = p.minimize(&mut x, self.cfg.solver_tol, self.cfg.max_iters, None);
        (x, stats)
    }

    fn solve_region(&mut self, within: &[BetId], warm: bool) {
        for vars in free_blocks(self.ecg, &self.clamp, within) {
            let (x, stats) = self.solve_vars(&self.clamp, &vars, warm);
            self.install(vars, x, stats);
        }
    }

    fn install(&mut self, vars: Vec<BetId>, x: Vec<S>, stats: SolveStats<S>) {
        let idx = self.blocks.len();
        for (&h, &v) in vars.iter().zip(&x) {
            self.raw[h] = v;
            self.block_of[h] = idx;
        }
        if !stats.converged {
            log::warn!("solver stopped after {} iterations with residual {:e}", stats.iterations, stats.residual);
        }
        self.blocks.push(Block { vars, stats, live: true });
    }

    fn eligible(&self, h: BetId) -> bool {
        self.clamp[h].is_none() && self.raw[h] != S::half()
    }

    fn calibrated(&self, h: BetId, s: S) -> S {
        match self.calibration {
            Some(cal) if self.clamp[h].is_none() && s != S::half() && self.block_of[h] < self.calibrated_blocks => {
                cal.apply(s)
            }
            _ => s,
        }
    }

    fn relabel(&mut self, h: BetId) {
        let new = self.clamp[h].or_else(|| label_of(self.score(h), self.cfg.tau));
        match (self.labels[h].is_some(), new.is_some()) {
            (false, true) => self.inferable += 1,
            (true, false) => self.inferable -= 1,
            _ => {}
        }
        self.labels[h] = new;
    }

    fn relabel_all(&mut self) {
        for h in 0..self.raw.len() {
            self.relabel(h);
        }
    }
}

//! Query selection: the greedy largest-inferable-set rule with candidate
//! pooling, the baseline strategies, and exhaustive oracles for small graphs.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ground::{Ecg, GroundedConstraint};
use crate::inference::{potential, Assignment, Evidence, InferenceConfig, InferenceSession};
use crate::kg::BetId;
use crate::scalar::Scalar;

/// Candidate pool size used when none is given.
pub const DEFAULT_POOL_SIZE: usize = 5;

/// Largest graph the exhaustive oracles accept.
pub const ORACLE_LIMIT: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyKind {
    Greedy,
    Random,
    MaxDegree,
    IndependentCascade,
    #[serde(rename = "random+inference")]
    RandomPlusInference,
    #[serde(rename = "max-degree+inference")]
    MaxDegreePlusInference,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 6] = [
        StrategyKind::Greedy,
        StrategyKind::Random,
        StrategyKind::MaxDegree,
        StrategyKind::IndependentCascade,
        StrategyKind::RandomPlusInference,
        StrategyKind::MaxDegreePlusInference,
    ];

    /// Whether labels propagate through MAP inference after each answer.
    pub fn uses_inference(self) -> bool {
        matches!(self, StrategyKind::Greedy | StrategyKind::RandomPlusInference | StrategyKind::MaxDegreePlusInference)
    }

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Greedy => "greedy",
            StrategyKind::Random => "random",
            StrategyKind::MaxDegree => "max-degree",
            StrategyKind::IndependentCascade => "independent-cascade",
            StrategyKind::RandomPlusInference => "random+inference",
            StrategyKind::MaxDegreePlusInference => "max-degree+inference",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s.chars().filter(|c| !matches!(c, '-' | '_' | ' ')).collect::<String>().to_lowercase();
        Ok(match key.as_str() {
            "greedy" | "kgeval" => StrategyKind::Greedy,
            "random" => StrategyKind::Random,
            "maxdegree" => StrategyKind::MaxDegree,
            "independentcascade" | "ic" => StrategyKind::IndependentCascade,
            "random+inference" | "randomplusinference" => StrategyKind::RandomPlusInference,
            "maxdegree+inference" | "maxdegreeplusinference" => StrategyKind::MaxDegreePlusInference,
            _ => return Err(Error::InvalidValue(format!("unknown strategy `{s}`"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Strategy {
    pub kind: StrategyKind,
    pub rng_seed: u64,
    /// `None` scores every candidate.
    pub pool_size: Option<usize>,
    /// With an unbounded pool, keep last step's marginal gains as upper
    /// bounds and re-score only candidates that could still win. Exact when
    /// gains diminish as evidence grows.
    #[serde(default)]
    pub lazy: bool,
}

impl Strategy {
    pub fn new(kind: StrategyKind, rng_seed: u64) -> Self {
        Strategy { kind, rng_seed, pool_size: Some(DEFAULT_POOL_SIZE), lazy: false }
    }

    /// Unbounded pool scored lazily.
    pub fn lazy(kind: StrategyKind, rng_seed: u64) -> Self {
        Strategy { kind, rng_seed, pool_size: None, lazy: true }
    }

    pub fn with_pool(mut self, pool_size: Option<usize>) -> Self {
        self.pool_size = pool_size;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.pool_size == Some(0) {
            return Err(Error::InvalidValue("candidate pool size must be at least 1".into()));
        }
        if self.lazy && self.pool_size.is_some() {
            return Err(Error::InvalidValue("lazy scoring needs an unbounded candidate pool".into()));
        }
        Ok(())
    }
}

/// One selection decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Selection {
    pub bet: BetId,
    pub pool_size: usize,
    /// Hypothetical inferable-set size that won, for greedy.
    pub gain: Option<usize>,
}

/// What a strategy may inspect when choosing.
pub struct SelectionContext<'a, 's, S> {
    pub ecg: &'a Ecg,
    /// BETs already evaluated or labelled (`Q`); never candidates.
    pub covered: &'a [bool],
    /// Current MAP state, required by greedy.
    pub session: Option<&'a InferenceSession<'s, S>>,
    /// Label the crowd is expected to give, used for greedy lookahead.
    pub hypothetical: &'a (dyn Fn(BetId) -> bool + Sync),
}

/// Stateful chooser owning the strategy's random stream.
#[derive(Debug, Clone)]
pub struct Selector {
    strategy: Strategy,
    rng: ChaCha8Rng,
    lazy: LazyGains,
}

impl Selector {
    pub fn new(strategy: Strategy) -> Result<Self> {
        strategy.validate()?;
        Ok(Selector { strategy, rng: ChaCha8Rng::seed_from_u64(strategy.rng_seed), lazy: LazyGains::default() })
    }

    pub fn strategy(&self) -> &Strategy {
        &self.strategy
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn select<S: Scalar>(&mut self, ctx: &SelectionContext<'_, '_, S>) -> Result<Selection> {
        match self.strategy.kind {
            StrategyKind::Greedy => {
                let session = ctx
                    .session
                    .ok_or_else(|| Error::InvalidValue("greedy selection needs an inference session".into()))?;
                if self.strategy.lazy {
                    self.lazy.select(session, ctx.covered, ctx.hypothetical)
                } else {
                    greedy_select(session, ctx.covered, ctx.hypothetical, self.strategy.pool_size)
                }
            }
            kind => {
                let bet = baseline_select(kind, ctx.ecg, ctx.covered, &mut self.rng)?;
                let open = ctx.covered.iter().filter(|c| !**c).count();
                Ok(Selection { bet, pool_size: open, gain: None })
            }
        }
    }
}

/// Number of constraints at `h` with at least one member outside `covered`.
pub fn unfulfilled_degree(ecg: &Ecg, covered: &[bool], h: BetId) -> usize {
    ecg.incident(h)
        .iter()
        .filter(|&&j| ecg.constraints()[j].domain().any(|v| !covered[v]))
        .count()
}

/// The `pool_size` uncovered BETs touching the most unfulfilled constraints,
/// ties to the lowest id. `None` keeps every uncovered BET.
pub fn approx_candidates(ecg: &Ecg, covered: &[bool], pool_size: Option<usize>) -> Result<Vec<BetId>> {
    if pool_size == Some(0) {
        return Err(Error::InvalidValue("candidate pool size must be at least 1".into()));
    }
    let open: Vec<BetId> = (0..ecg.num_bets()).filter(|&h| !covered[h]).collect();
    let Some(k) = pool_size.filter(|&k| k < open.len()) else {
        return Ok(open);
    };
    let mut scored: Vec<(usize, BetId)> = open.into_iter().map(|h| (unfulfilled_degree(ecg, covered, h), h)).collect();
    scored.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut pool: Vec<BetId> = scored.into_iter().take(k).map(|(_, h)| h).collect();
    pool.sort_unstable();
    Ok(pool)
}

/// `argmax |I(G, E ∪ {h})|` over the candidate pool, each candidate clamped to
/// its hypothetical label. Candidates are scored in parallel; ties go to the
/// lowest id.
pub fn greedy_select<S: Scalar>(
    session: &InferenceSession<'_, S>,
    covered: &[bool],
    hypothetical: &(dyn Fn(BetId) -> bool + Sync),
    pool_size: Option<usize>,
) -> Result<Selection> {
    let pool = approx_candidates(session.ecg(), covered, pool_size)?;
    if pool.is_empty() {
        return Err(Error::Exhausted);
    }
    let gains: Vec<usize> =
        pool.par_iter().map(|&h| session.lookahead(h, hypothetical(h))).collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for i in 1..pool.len() {
        if gains[i] > gains[best] {
            best = i;
        }
    }
    Ok(Selection { bet: pool[best], pool_size: pool.len(), gain: Some(gains[best]) })
}

/// Marginal gains from earlier steps, best first. Ordering is by gain, then
/// lowest id, so ties resolve as in [`greedy_select`].
#[derive(Debug, Clone, Default)]
struct LazyGains {
    heap: BinaryHeap<(usize, Reverse<BetId>, usize)>,
    step: usize,
    started: bool,
}

impl LazyGains {
    fn select<S: Scalar>(
        &mut self,
        session: &InferenceSession<'_, S>,
        covered: &[bool],
        hypothetical: &(dyn Fn(BetId) -> bool + Sync),
    ) -> Result<Selection> {
        self.step += 1;
        let base = session.inferable_count();
        let marginal = |h: BetId| session.lookahead(h, hypothetical(h)).map(|g| g.saturating_sub(base));
        let mut scored = 0;
        if !self.started {
            self.started = true;
            let open: Vec<BetId> = (0..covered.len()).filter(|&h| !covered[h]).collect();
            let gains = open.par_iter().map(|&h| marginal(h)).collect::<Result<Vec<_>>>()?;
            scored = open.len();
            self.heap.extend(open.into_iter().zip(gains).map(|(h, g)| (g, Reverse(h), self.step)));
        }
        while let Some((gain, Reverse(h), stamp)) = self.heap.pop() {
            if covered[h] {
                continue;
            }
            if stamp == self.step {
                return Ok(Selection { bet: h, pool_size: scored, gain: Some(base + gain) });
            }
            scored += 1;
            self.heap.push((marginal(h)?, Reverse(h), self.step));
        }
        Err(Error::Exhausted)
    }
}

/// Baseline choice among uncovered BETs. Random and independent cascade draw
/// uniformly; max-degree takes the highest ECG degree, ties to the lowest id.
pub fn baseline_select<R: Rng + ?Sized>(kind: StrategyKind, ecg: &Ecg, covered: &[bool], rng: &mut R) -> Result<BetId> {
    let open: Vec<BetId> = (0..ecg.num_bets()).filter(|&h| !covered[h]).collect();
    if open.is_empty() {
        return Err(Error::Exhausted);
    }
    match kind {
        StrategyKind::Random | StrategyKind::RandomPlusInference | StrategyKind::IndependentCascade => {
            Ok(*open.choose(rng).expect("non-empty"))
        }
        StrategyKind::MaxDegree | StrategyKind::MaxDegreePlusInference => {
            let mut best = open[0];
            for &h in &open[1..] {
                if ecg.incident(h).len() > ecg.incident(best).len() {
                    best = h;
                }
            }
            Ok(best)
        }
        StrategyKind::Greedy => Err(Error::InvalidValue("greedy is not a baseline".into())),
    }
}

/// Single-hop contagion after `h` is labelled: every constraint with `h` in
/// its body whose other body members are all labelled true labels its
/// unlabelled head true. Returns the newly labelled heads.
pub fn cascade_fire(ecg: &Ecg, labels: &mut [Option<bool>], h: BetId) -> Vec<BetId> {
    if labels[h] != Some(true) {
        return Vec::new();
    }
    let mut fired = Vec::new();
    for &j in ecg.incident(h) {
        let c = &ecg.constraints()[j];
        if !c.body.contains(&h) || labels[c.head].is_some() {
            continue;
        }
        if c.body.iter().all(|&b| labels[b] == Some(true)) {
            labels[c.head] = Some(true);
            fired.push(c.head);
        }
    }
    fired
}

/// Per-step record of a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SelectionTrace {
    pub rows: Vec<TraceRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub step: usize,
    pub chosen_bet: BetId,
    pub pool_size: usize,
    pub inferable_size: usize,
    pub crowd_label: u8,
}

impl SelectionTrace {
    pub fn push(&mut self, chosen_bet: BetId, pool_size: usize, inferable_size: usize, crowd_label: bool) {
        let step = self.rows.len() + 1;
        self.rows.push(TraceRow { step, chosen_bet, pool_size, inferable_size, crowd_label: u8::from(crowd_label) });
    }

    pub fn chosen(&self) -> Vec<BetId> {
        self.rows.iter().map(|r| r.chosen_bet).collect()
    }

    pub fn gains(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.inferable_size).collect()
    }

    pub fn pool_sizes(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.pool_size).collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "step,chosen_bet,pool_size,inferable_size,crowd_label")?;
        for r in &self.rows {
            writeln!(out, "{},{},{},{},{}", r.step, r.chosen_bet, r.pool_size, r.inferable_size, r.crowd_label)?;
        }
        Ok(())
    }
}

fn gold_evidence(gold: &[bool], set: &[BetId]) -> Evidence {
    set.iter().map(|&h| (h, gold[h])).collect()
}

/// `|I(G, Q)|` with every member of `set` clamped to its gold label.
pub fn inferable_size<S: Scalar>(ecg: &Ecg, gold: &[bool], set: &[BetId], cfg: &InferenceConfig<S>) -> Result<usize> {
    Ok(InferenceSession::new(ecg, &gold_evidence(gold, set), *cfg)?.inferable_count())
}

fn check_oracle(ecg: &Ecg, gold: &[bool]) -> Result<()> {
    let n = ecg.num_bets();
    if n > ORACLE_LIMIT {
        return Err(Error::OracleLimit { n, limit: ORACLE_LIMIT });
    }
    if gold.len() != n {
        return Err(Error::InvalidValue(format!("{} gold labels for {n} BETs", gold.len())));
    }
    Ok(())
}

/// Exhaustive search over all size-`k` evidence sets for the largest
/// inferable set under gold clamping. Returns the lexicographically first
/// maximiser.
pub fn brute_force_best_set<S: Scalar>(
    ecg: &Ecg,
    gold: &[bool],
    k: usize,
    cfg: &InferenceConfig<S>,
) -> Result<(Vec<BetId>, usize)> {
    check_oracle(ecg, gold)?;
    let n = ecg.num_bets();
    if k > n {
        return Err(Error::InvalidValue(format!("cannot choose {k} of {n} BETs")));
    }
    let mut best: Option<(Vec<BetId>, usize)> = None;
    let mut set: Vec<BetId> = (0..k).collect();
    loop {
        let size = inferable_size(ecg, gold, &set, cfg)?;
        if best.as_ref().is_none_or(|(_, b)| size > *b) {
            best = Some((set.clone(), size));
        }
        // Next combination in lexicographic order.
        let Some(i) = (0..k).rev().find(|&i| set[i] < n - k + i) else {
            break;
        };
        set[i] += 1;
        for j in i + 1..k {
            set[j] = set[j - 1] + 1;
        }
    }
    Ok(best.expect("at least one subset"))
}

/// `k` greedy steps from empty evidence with gold labels, scoring every
/// uncovered BET. Returns `(chosen, |I| after the step)` per step; stops early
/// once everything is covered.
pub fn greedy_sequence<S: Scalar>(ecg: &Ecg, gold: &[bool], k: usize, cfg: &InferenceConfig<S>) -> Result<Vec<(BetId, usize)>> {
    let mut session = InferenceSession::new(ecg, &Evidence::new(), *cfg)?;
    let mut covered: Vec<bool> = session.labels().iter().map(Option::is_some).collect();
    let hyp = |h: BetId| gold[h];
    let mut out = Vec::new();
    for _ in 0..k {
        let pick = match greedy_select(&session, &covered, &hyp, None) {
            Ok(s) => s,
            Err(Error::Exhausted) => break,
            Err(e) => return Err(e),
        };
        session.commit(pick.bet, gold[pick.bet])?;
        for (c, l) in covered.iter_mut().zip(session.labels()) {
            *c |= l.is_some();
        }
        out.push((pick.bet, session.inferable_count()));
    }
    Ok(out)
}

/// Whether a pairwise constraint satisfies `ψ(0,1) + ψ(1,0) ≥ ψ(0,0) + ψ(1,1)`
/// on its (body, head) corners. Longer bodies are reported as `None`.
pub fn pairwise_regular(gc: &GroundedConstraint) -> Option<bool> {
    if gc.body.len() != 1 {
        return None;
    }
    let local = GroundedConstraint { id: 0, rule: gc.rule, body: vec![0], head: 1, weight: gc.weight };
    let psi = |x: f64, y: f64| gc.weight * potential(&local, &Assignment { scores: vec![x, y], clamp: vec![None; 2] });
    Some(psi(0.0, 1.0) + psi(1.0, 0.0) >= psi(0.0, 0.0) + psi(1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SubmodularityWitness {
    pub a: Vec<BetId>,
    pub b: Vec<BetId>,
    pub h: BetId,
    pub gain_a: i64,
    pub gain_b: i64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SubmodularityReport {
    pub trials: usize,
    pub violations: Vec<SubmodularityWitness>,
    pub pairwise_checked: usize,
    pub regularity_violations: Vec<usize>,
}

/// Samples nested evidence sets `A ⊆ B` and `h ∉ B` under gold clamping and
/// records every diminishing-returns violation, plus the corner regularity
/// check on every pairwise constraint.
pub fn submodularity_probe<S: Scalar>(
    ecg: &Ecg,
    gold: &[bool],
    trials: usize,
    rng_seed: u64,
    cfg: &InferenceConfig<S>,
) -> Result<SubmodularityReport> {
    check_oracle(ecg, gold)?;
    let n = ecg.num_bets();
    let mut report = SubmodularityReport { trials, ..Default::default() };
    for c in ecg.constraints() {
        if let Some(ok) = pairwise_regular(c) {
            report.pairwise_checked += 1;
            if !ok {
                report.regularity_violations.push(c.id);
            }
        }
    }
    if n == 0 {
        return Ok(report);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    for _ in 0..trials {
        let mut order: Vec<BetId> = (0..n).collect();
        order.shuffle(&mut rng);
        let h = order[0];
        let b_len = rng.gen_range(0..n);
        let a_len = rng.gen_range(0..=b_len);
        let mut b: Vec<BetId> = order[1..=b_len].to_vec();
        let mut a: Vec<BetId> = b[..a_len].to_vec();
        a.sort_unstable();
        b.sort_unstable();
        let size = |set: &[BetId]| inferable_size(ecg, gold, set, cfg).map(|s| s as i64);
        let with = |set: &[BetId]| {
            let mut s = set.to_vec();
            s.push(h);
            s
        };
        let gain_a = size(&with(&a))? - size(&a)?;
        let gain_b = size(&with(&b))? - size(&b)?;
        if gain_a < gain_b {
            log::info!("diminishing returns violated: A={a:?} B={b:?} h={h} gains {gain_a} < {gain_b}");
            report.violations.push(SubmodularityWitness { a, b, h, gain_a, gain_b });
        }
    }
    Ok(report)
}

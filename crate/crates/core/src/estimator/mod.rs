//! The evaluation loop: a random seed set, then repeated selection, crowd
//! evaluation and re-inference until the estimate stabilises, every belief is
//! labelled, or the budget runs out.

pub mod metrics;
pub mod noise;
pub mod sweep;
pub mod synthetic;

use std::collections::BTreeMap;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::control::{cascade_fire, SelectionContext, SelectionTrace, Selector, Strategy, StrategyKind};
use crate::crowd::{BudgetPlan, Source, SourceKind};
use crate::error::{Error, Result};
use crate::ground::Ecg;
use crate::inference::Evidence;
use crate::{InferenceConfig, InferenceSession};
use crate::kg::{BetId, KnowledgeGraph};

pub use crate::rules::ablate_rules;
pub use metrics::{
    converged, covered_accuracy, delta_overall, delta_overall_q, delta_predicate, delta_predicate_q,
    estimated_accuracy, per_predicate, queries_to_target, PredicateRow,
};
pub use noise::inject_noise;
pub use sweep::{mean_of, run_sweep, write_sweep_csv, Ablation, SweepRow, SweepSpec};
pub use synthetic::{generate_synthetic, SyntheticData, SyntheticSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Number of uniformly random evaluations before the loop.
    pub seed_size: usize,
    pub tau: f64,
    /// Convergence window is the last `window_k + 1` estimates.
    pub window_k: usize,
    pub alpha: f64,
    /// `None` is unlimited.
    pub budget: Option<f64>,
    pub strategy: Strategy,
    /// Seeds the seed-set sample.
    pub rng_seed: u64,
    /// Cap on crowd queries after the seed set.
    pub max_queries: Option<usize>,
    pub stop_on_convergence: bool,
    /// Feed the convergence test estimates in percent rather than fractions.
    pub percent_units: bool,
    /// Apply class-mass calibration after the first inference on the seed set.
    pub normalize: bool,
    pub solver_tol: f64,
    pub max_iters: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed_size: 50,
            tau: 0.8,
            window_k: 9,
            alpha: 0.002,
            budget: None,
            strategy: Strategy::new(StrategyKind::Greedy, 0),
            rng_seed: 0,
            max_queries: None,
            stop_on_convergence: true,
            percent_units: true,
            normalize: true,
            solver_tol: 1e-6,
            max_iters: 10_000,
        }
    }
}

impl RunConfig {
    /// Defaults with `kind`, seeding both the seed set and the strategy from `seed`.
    pub fn new(kind: StrategyKind, seed: u64) -> Self {
        RunConfig { strategy: Strategy::new(kind, seed), rng_seed: seed, ..Self::default() }
    }

    pub fn inference(&self) -> InferenceConfig {
        InferenceConfig { tau: self.tau, solver_tol: self.solver_tol, max_iters: self.max_iters }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(Error::InvalidValue(format!("alpha {} must be positive", self.alpha)));
        }
        if self.window_k == 0 {
            return Err(Error::InvalidValue("window k must be at least 1".into()));
        }
        if let Some(b) = self.budget {
            if !(b >= 0.0) {
                return Err(Error::InvalidValue(format!("budget {b} must be non-negative")));
            }
        }
        self.strategy.validate()?;
        self.inference().validate()
    }
}

/// Evidence gathered so far.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EvaluationState {
    /// Crowd labels, keyed by BET.
    pub evaluated: BTreeMap<BetId, bool>,
    /// BETs in the order they were asked.
    pub order: Vec<BetId>,
    /// Latest decided label of every BET in `Q` (evaluated or inferred).
    pub covered: Vec<Option<bool>>,
    /// `Acc_t` after each step, as fractions.
    pub acc_history: Vec<f64>,
    pub spend: f64,
    pub step: usize,
}

impl EvaluationState {
    pub fn new(n: usize) -> Self {
        EvaluationState { covered: vec![None; n], ..Default::default() }
    }

    pub fn covered_count(&self) -> usize {
        self.covered.iter().filter(|l| l.is_some()).count()
    }

    /// `Acc_t = (1/|Q|) Σ l(h)` over `Q`.
    pub fn accuracy(&self) -> Option<f64> {
        covered_accuracy(&self.covered)
    }

    fn record(&mut self, h: BetId, label: bool, spend: f64) {
        self.evaluated.insert(h, label);
        self.order.push(h);
        self.spend += spend;
    }

    fn absorb(&mut self, labels: &[Option<bool>]) {
        for (c, l) in self.covered.iter_mut().zip(labels) {
            if l.is_some() {
                *c = *l;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    Coverage,
    BudgetExhausted,
    MaxQueries,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoveragePoint {
    pub queries: usize,
    pub fraction_inferred: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub queries: usize,
    pub estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub strategy: StrategyKind,
    pub source: SourceKind,
    pub rng_seed: u64,
    pub stop: StopReason,
    /// `Acc` over the evaluated-plus-inferred set at the end.
    pub final_estimate: f64,
    pub gold_accuracy: Option<f64>,
    /// Over all of `H`, undecided BETs counted as 0.5.
    pub delta_overall: Option<f64>,
    pub delta_predicate: Option<f64>,
    /// Over the evaluated-plus-inferred set only.
    pub delta_overall_q: Option<f64>,
    pub delta_predicate_q: Option<f64>,
    pub undecided: usize,
    /// Crowd queries including the seed set.
    pub queries_used: usize,
    pub seed_queries: usize,
    /// Crowd queries after the seed set.
    pub loop_queries: usize,
    pub spend: f64,
    pub solver_converged: bool,
    pub coverage_curve: Vec<CoveragePoint>,
    pub trajectory: Vec<TrajectoryPoint>,
    pub per_predicate: BTreeMap<String, PredicateRow>,
    pub evaluated: Vec<(BetId, bool)>,
    pub trace: SelectionTrace,
}

impl RunReport {
    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }

    pub fn write_coverage_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "queries,fraction_inferred")?;
        for p in &self.coverage_curve {
            writeln!(out, "{},{}", p.queries, p.fraction_inferred)?;
        }
        Ok(())
    }

    pub fn write_predicate_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "predicate,gold,estimated,gap")?;
        for (name, r) in &self.per_predicate {
            writeln!(out, "{name},{},{},{}", r.gold, r.estimated, r.gap)?;
        }
        Ok(())
    }

    /// `(queries, estimate)` pairs.
    pub fn trajectory_pairs(&self) -> Vec<(usize, f64)> {
        self.trajectory.iter().map(|p| (p.queries, p.estimate)).collect()
    }
}

/// Label propagation engine matching the strategy.
enum Engine<'a> {
    Inference(InferenceSession<'a>),
    Cascade(Vec<Option<bool>>),
    Plain(Vec<Option<bool>>),
}

impl Engine<'_> {
    fn labels(&self) -> &[Option<bool>] {
        match self {
            Engine::Inference(s) => s.labels(),
            Engine::Cascade(l) | Engine::Plain(l) => l,
        }
    }

    fn inferable(&self) -> usize {
        match self {
            Engine::Inference(s) => s.inferable_count(),
            Engine::Cascade(l) | Engine::Plain(l) => l.iter().filter(|x| x.is_some()).count(),
        }
    }

    fn apply(&mut self, ecg: &Ecg, h: BetId, label: bool) -> Result<()> {
        match self {
            Engine::Inference(s) => s.commit(h, label),
            Engine::Cascade(l) => {
                l[h] = Some(label);
                cascade_fire(ecg, l, h);
                Ok(())
            }
            Engine::Plain(l) => {
                l[h] = Some(label);
                Ok(())
            }
        }
    }
}

fn push_progress(state: &mut EvaluationState, n: usize, curve: &mut Vec<CoveragePoint>, traj: &mut Vec<TrajectoryPoint>) {
    let queries = state.order.len();
    curve.push(CoveragePoint { queries, fraction_inferred: state.covered_count() as f64 / n as f64 });
    if let Some(acc) = state.accuracy() {
        state.acc_history.push(acc);
        traj.push(TrajectoryPoint { queries, estimate: acc });
    }
}

/// Runs the estimation loop with `source` answering crowd queries.
pub fn run(kg: &KnowledgeGraph, ecg: &Ecg, cfg: &RunConfig, source: &mut Source) -> Result<RunReport> {
    cfg.validate()?;
    let n = kg.len();
    if ecg.num_bets() != n {
        return Err(Error::InvalidValue(format!("graph has {} BETs but the KG has {n}", ecg.num_bets())));
    }
    if n == 0 {
        return Err(Error::InvalidValue("nothing to evaluate".into()));
    }
    let mut budget = BudgetPlan::new(cfg.budget.unwrap_or(f64::INFINITY), 1.0, 0.0, 1)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let seed: Vec<BetId> = rand::seq::index::sample(&mut rng, n, cfg.seed_size.min(n)).into_vec();
    let seed_cost: f64 = seed.iter().map(|&h| kg.bets()[h].cost).sum();
    if seed_cost > budget.residual + 1e-12 {
        return Err(Error::BudgetExhausted { residual: budget.residual, needed: seed_cost });
    }

    let mut state = EvaluationState::new(n);
    for &h in &seed {
        let r = source.answer(kg, h, Some(&mut budget), None)?;
        state.record(h, r.aggregate, r.spend);
    }
    let evidence: Evidence = state.evaluated.clone();
    let kind = cfg.strategy.kind;
    let mut engine = if kind.uses_inference() {
        let mut session = InferenceSession::new(ecg, &evidence, cfg.inference())?;
        if cfg.normalize && !seed.is_empty() {
            let q1 = seed.iter().filter(|h| state.evaluated[h]).count() as f64 / seed.len() as f64;
            if q1 > 0.0 && q1 < 1.0 {
                match session.calibrate(q1) {
                    Ok(cal) => log::debug!("class-mass calibration {cal:?}"),
                    Err(Error::DegenerateClassMass { class }) => {
                        log::warn!("skipping class-mass calibration: no mass for class {class}")
                    }
                    Err(e) => return Err(e),
                }
            }
        }
        Engine::Inference(session)
    } else {
        let mut labels = vec![None; n];
        for (&h, &l) in &evidence {
            labels[h] = Some(l);
        }
        if kind == StrategyKind::IndependentCascade {
            for &h in &seed {
                cascade_fire(ecg, &mut labels, h);
            }
            Engine::Cascade(labels)
        } else {
            Engine::Plain(labels)
        }
    };
    state.absorb(engine.labels());
    let mut curve = Vec::new();
    let mut traj = Vec::new();
    push_progress(&mut state, n, &mut curve, &mut traj);

    let mut selector = Selector::new(cfg.strategy)?;
    let mut trace = SelectionTrace::default();
    let mut solver_ok = match &engine {
        Engine::Inference(s) => s.converged(),
        _ => true,
    };
    let interactive = source.kind() == SourceKind::Interactive;
    let scale = if cfg.percent_units { 100.0 } else { 1.0 };
    let stop = loop {
        if state.covered_count() == n {
            break StopReason::Coverage;
        }
        if cfg.max_queries.is_some_and(|m| state.step >= m) {
            break StopReason::MaxQueries;
        }
        if cfg.stop_on_convergence {
            let scaled: Vec<f64> = state.acc_history.iter().map(|a| a * scale).collect();
            if converged(&scaled, cfg.window_k, cfg.alpha) {
                break StopReason::Converged;
            }
        }
        let covered: Vec<bool> = state.covered.iter().map(Option::is_some).collect();
        let selection = {
            let session = match &engine {
                Engine::Inference(s) => Some(s),
                _ => None,
            };
            let hypothetical = |h: BetId| {
                let score = session.map_or(0.5, |s| s.score(h));
                if interactive {
                    score >= 0.5
                } else {
                    kg.bets()[h].gold.unwrap_or(score >= 0.5)
                }
            };
            let ctx = SelectionContext { ecg, covered: &covered, session, hypothetical: &hypothetical };
            match selector.select(&ctx) {
                Ok(s) => s,
                Err(Error::Exhausted) => break StopReason::Coverage,
                Err(e) => return Err(e),
            }
        };
        let h = selection.bet;
        let response = match source.answer(kg, h, Some(&mut budget), None) {
            Ok(r) => r,
            Err(Error::BudgetExhausted { .. }) => break StopReason::BudgetExhausted,
            Err(e) => return Err(e),
        };
        state.record(h, response.aggregate, response.spend);
        state.step += 1;
        engine.apply(ecg, h, response.aggregate)?;
        if let Engine::Inference(s) = &engine {
            solver_ok &= s.converged();
        }
        state.absorb(engine.labels());
        trace.push(h, selection.pool_size, engine.inferable(), response.aggregate);
        push_progress(&mut state, n, &mut curve, &mut traj);
    };

    let Some(final_estimate) = state.accuracy() else {
        return Err(Error::BudgetExhausted { residual: budget.residual, needed: 0.0 });
    };
    let has_gold = kg.has_complete_gold();
    let gold_accuracy = has_gold.then(|| kg.overall_gold_accuracy()).transpose()?;
    let optional = |f: fn(&KnowledgeGraph, &[Option<bool>]) -> Result<f64>| -> Result<Option<f64>> {
        has_gold.then(|| f(kg, &state.covered)).transpose()
    };
    Ok(RunReport {
        strategy: kind,
        source: source.kind(),
        rng_seed: cfg.rng_seed,
        stop,
        final_estimate,
        gold_accuracy,
        delta_overall: optional(delta_overall)?,
        delta_predicate: optional(delta_predicate)?,
        delta_overall_q: optional(delta_overall_q)?,
        delta_predicate_q: optional(delta_predicate_q)?,
        undecided: n - state.covered_count(),
        queries_used: state.order.len(),
        seed_queries: seed.len(),
        loop_queries: state.step,
        spend: state.spend,
        solver_converged: solver_ok,
        coverage_curve: curve,
        trajectory: traj,
        per_predicate: if has_gold { per_predicate(kg, &state.covered, false)? } else { BTreeMap::new() },
        evaluated: state.order.iter().map(|&h| (h, state.evaluated[&h])).collect(),
        trace,
    })
}

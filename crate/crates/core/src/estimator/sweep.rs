//! Grids of runs over strategies, seeds, noise levels and rule ablations.

use std::collections::BTreeSet;
use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{inject_noise, run, CoveragePoint, RunConfig, StopReason};
use crate::control::{Strategy, StrategyKind};
use crate::crowd::{Source, WorkerModel};
use crate::error::{Error, Result};
use crate::ground::ground;
use crate::kg::KnowledgeGraph;
use crate::rules::{ablate_rules, Rule};

/// Rule subset used by a sweep cell: rules whose body length is listed are dropped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ablation {
    pub name: String,
    pub drop_body_lengths: BTreeSet<usize>,
}

impl Ablation {
    pub fn full() -> Self {
        Ablation { name: "full".into(), drop_body_lengths: BTreeSet::new() }
    }

    fn dropping(name: &str, lens: &[usize]) -> Self {
        Ablation { name: name.into(), drop_body_lengths: lens.iter().copied().collect() }
    }

    /// Longest rules dropped first: full, without length-3 bodies, without
    /// length 2 and 3.
    pub fn ladder() -> Vec<Self> {
        vec![Self::full(), Self::dropping("no-len3", &[3]), Self::dropping("len1-only", &[2, 3])]
    }

    /// `full`, `no-len3`, `len1-only`, `no-rules`, or `drop:2+3` for an
    /// explicit set of body lengths.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        match text {
            "full" => return Ok(Self::full()),
            "no-len3" => return Ok(Self::dropping(text, &[3])),
            "len1-only" => return Ok(Self::dropping(text, &[2, 3])),
            "no-rules" => return Ok(Self::dropping(text, &[1, 2, 3])),
            _ => {}
        }
        let bad = || Error::InvalidValue(format!("unknown ablation `{text}`"));
        let lens = text.strip_prefix("drop:").ok_or_else(bad)?;
        let lens: Vec<usize> = lens.split('+').map(|l| l.trim().parse().map_err(|_| bad())).collect::<Result<_>>()?;
        Ok(Self::dropping(text, &lens))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub strategies: Vec<StrategyKind>,
    pub seeds: Vec<u64>,
    /// Fraction of gold labels flipped; 0 leaves the graph untouched.
    pub flip_fractions: Vec<f64>,
    pub ablations: Vec<Ablation>,
    /// `None` answers from gold; otherwise simulated workers of this accuracy.
    pub worker_accuracy: Option<f64>,
    pub workers: usize,
    pub base: RunConfig,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            strategies: StrategyKind::ALL.to_vec(),
            seeds: (0..5).collect(),
            flip_fractions: vec![0.0],
            ablations: vec![Ablation::full()],
            worker_accuracy: None,
            workers: 5,
            base: RunConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub strategy: StrategyKind,
    pub seed: u64,
    pub flip: f64,
    pub ablation: String,
    pub rules: usize,
    pub gold_accuracy: Option<f64>,
    pub stop: Option<StopReason>,
    pub queries_used: usize,
    pub loop_queries: usize,
    /// Queries used when the run stopped on convergence.
    pub queries_to_convergence: Option<usize>,
    pub final_estimate: Option<f64>,
    pub delta_overall: Option<f64>,
    pub delta_predicate: Option<f64>,
    pub delta_overall_q: Option<f64>,
    pub delta_predicate_q: Option<f64>,
    pub solver_converged: bool,
    /// Wall-clock time; kept out of the CSV so reruns compare byte for byte.
    #[serde(skip)]
    pub elapsed_ms: u128,
    pub error: Option<String>,
    #[serde(skip)]
    pub coverage: Vec<CoveragePoint>,
}

impl SweepRow {
    pub fn ok(&self) -> bool {
        self.error.is_none()
    }
}

struct Cell<'a> {
    strategy: StrategyKind,
    seed: u64,
    flip: f64,
    ablation: &'a Ablation,
}

fn run_cell(kg: &KnowledgeGraph, rules: &[Rule], spec: &SweepSpec, cell: &Cell) -> SweepRow {
    let start = Instant::now();
    let kept = ablate_rules(rules, &cell.ablation.drop_body_lengths);
    let mut row = SweepRow {
        strategy: cell.strategy,
        seed: cell.seed,
        flip: cell.flip,
        ablation: cell.ablation.name.clone(),
        rules: kept.len(),
        gold_accuracy: None,
        stop: None,
        queries_used: 0,
        loop_queries: 0,
        queries_to_convergence: None,
        final_estimate: None,
        delta_overall: None,
        delta_predicate: None,
        delta_overall_q: None,
        delta_predicate_q: None,
        solver_converged: false,
        elapsed_ms: 0,
        error: None,
        coverage: Vec::new(),
    };
    let outcome = (|| -> Result<_> {
        let noisy;
        let kg = if cell.flip > 0.0 {
            noisy = inject_noise(kg, cell.flip, cell.seed)?.0;
            &noisy
        } else {
            kg
        };
        let ecg = ground(kg, &kept)?;
        let cfg = RunConfig {
            strategy: Strategy { kind: cell.strategy, rng_seed: cell.seed, ..spec.base.strategy },
            rng_seed: cell.seed,
            ..spec.base
        };
        let mut source = match spec.worker_accuracy {
            None => Source::Oracle,
            Some(acc) => Source::Simulated { model: WorkerModel::new(acc, cell.seed)?, workers: spec.workers },
        };
        run(kg, &ecg, &cfg, &mut source)
    })();
    match outcome {
        Ok(report) => {
            row.gold_accuracy = report.gold_accuracy;
            row.stop = Some(report.stop);
            row.queries_used = report.queries_used;
            row.loop_queries = report.loop_queries;
            row.queries_to_convergence = (report.stop == StopReason::Converged).then_some(report.queries_used);
            row.final_estimate = Some(report.final_estimate);
            row.delta_overall = report.delta_overall;
            row.delta_predicate = report.delta_predicate;
            row.delta_overall_q = report.delta_overall_q;
            row.delta_predicate_q = report.delta_predicate_q;
            row.solver_converged = report.solver_converged;
            row.coverage = report.coverage_curve;
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row.elapsed_ms = start.elapsed().as_millis();
    row
}

/// Runs every cell of the grid in parallel. A failing cell is reported in its
/// row rather than aborting the sweep. Rows come back in grid order.
pub fn run_sweep(kg: &KnowledgeGraph, rules: &[Rule], spec: &SweepSpec) -> Vec<SweepRow> {
    let mut cells = Vec::new();
    for &flip in &spec.flip_fractions {
        for ablation in &spec.ablations {
            for &strategy in &spec.strategies {
                for &seed in &spec.seeds {
                    cells.push(Cell { strategy, seed, flip, ablation });
                }
            }
        }
    }
    cells.par_iter().map(|c| run_cell(kg, rules, spec, c)).collect()
}

/// Mean of `f` over the successful rows matching `keep`.
pub fn mean_of(rows: &[SweepRow], keep: impl Fn(&SweepRow) -> bool, f: impl Fn(&SweepRow) -> Option<f64>) -> Option<f64> {
    let values: Vec<f64> = rows.iter().filter(|r| r.ok() && keep(r)).filter_map(f).collect();
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

fn cell<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut out: W) -> Result<()> {
    writeln!(
        out,
        "strategy,seed,flip,ablation,rules,gold_accuracy,stop,queries_used,loop_queries,queries_to_convergence,\
         final_estimate,delta_overall,delta_predicate,delta_overall_q,delta_predicate_q,solver_converged,error"
    )?;
    for r in rows {
        let stop = r.stop.map(|s| serde_json::to_value(s).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default());
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.strategy.name(),
            r.seed,
            r.flip,
            r.ablation,
            r.rules,
            cell(r.gold_accuracy),
            cell(stop),
            r.queries_used,
            r.loop_queries,
            cell(r.queries_to_convergence),
            cell(r.final_estimate),
            cell(r.delta_overall),
            cell(r.delta_predicate),
            cell(r.delta_overall_q),
            cell(r.delta_predicate_q),
            r.solver_converged,
            r.error.as_deref().unwrap_or("").replace(',', ";"),
        )?;
    }
    Ok(())
}

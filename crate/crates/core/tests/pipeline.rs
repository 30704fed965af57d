use std::path::Path;

use kgeval::control::{Strategy, StrategyKind};
use kgeval::crowd::Source;
use kgeval::estimator::{
    generate_synthetic, inject_noise, run, run_sweep, write_sweep_csv, Ablation, RunConfig, StopReason, SweepSpec,
    SyntheticSpec,
};
use kgeval::{ground, parse_rule_file, parse_triples_str, KnowledgeGraph, Rule};

fn example() -> (KnowledgeGraph, Vec<Rule>) {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/worked-example");
    let mut kg = parse_triples_str(&std::fs::read_to_string(dir.join("triples.tsv")).unwrap(), 0.01).unwrap();
    let text = std::fs::read_to_string(dir.join("rules.txt")).unwrap();
    let file = parse_rule_file(text.as_bytes(), &kg).unwrap();
    file.apply_ontology(&mut kg).unwrap();
    (kg, file.rules)
}

#[test]
fn worked_example_grounds_and_converges() {
    let (kg, rules) = example();
    assert_eq!(kg.len(), 8);
    let ecg = ground(&kg, &rules).unwrap();
    assert_eq!(ecg.constraints().len(), 8);

    let cfg = RunConfig { seed_size: 0, ..RunConfig::new(StrategyKind::Greedy, 0) };
    let report = run(&kg, &ecg, &cfg, &mut Source::Oracle).unwrap();
    assert_eq!(report.queries_used, 3);
    assert_eq!(report.final_estimate, 0.75);
    assert_eq!(report.undecided, 0);
    assert_eq!(report.stop, StopReason::Coverage);
    // Three questions settle eight beliefs.
    assert_eq!(report.evaluated.len(), 3);
}

#[test]
fn reports_are_reproducible() {
    let data = generate_synthetic(&SyntheticSpec::small(1)).unwrap();
    let ecg = ground(&data.kg, &data.rules.rules).unwrap();
    let cfg = RunConfig { seed_size: 10, ..RunConfig::new(StrategyKind::Greedy, 9) };
    let json = || {
        let mut out = Vec::new();
        run(&data.kg, &ecg, &cfg, &mut Source::Oracle).unwrap().write_json(&mut out).unwrap();
        out
    };
    assert_eq!(json(), json());
}

#[test]
fn lazy_and_plain_greedy_agree_on_small_worlds() {
    let data = generate_synthetic(&SyntheticSpec::small(2)).unwrap();
    let ecg = ground(&data.kg, &data.rules.rules).unwrap();
    let base = RunConfig { seed_size: 5, stop_on_convergence: false, ..RunConfig::new(StrategyKind::Greedy, 3) };
    let plain = run(&data.kg, &ecg, &base, &mut Source::Oracle).unwrap();
    let lazy_cfg = RunConfig { strategy: Strategy::lazy(StrategyKind::Greedy, 3), ..base };
    let lazy = run(&data.kg, &ecg, &lazy_cfg, &mut Source::Oracle).unwrap();
    assert_eq!(plain.final_estimate, lazy.final_estimate);
    assert_eq!(plain.final_estimate, data.kg.overall_gold_accuracy().unwrap());
}

#[test]
fn noisy_worlds_are_estimated_at_full_coverage() {
    let data = generate_synthetic(&SyntheticSpec::small(3)).unwrap();
    let (noisy, noise) = inject_noise(&data.kg, 0.05, 11).unwrap();
    assert!(noise.gold_after < noise.gold_before);
    assert_eq!(noisy.len(), data.kg.len());
    let ecg = ground(&noisy, &data.rules.rules).unwrap();
    let cfg = RunConfig { stop_on_convergence: false, seed_size: 5, ..RunConfig::new(StrategyKind::Random, 1) };
    let report = run(&noisy, &ecg, &cfg, &mut Source::Oracle).unwrap();
    assert_eq!(report.final_estimate, noise.gold_after);
    assert_eq!(report.delta_overall, Some(0.0));
}

#[test]
fn sweep_rows_cover_the_grid() {
    let data = generate_synthetic(&SyntheticSpec::small(4)).unwrap();
    let spec = SweepSpec {
        strategies: vec![StrategyKind::Greedy, StrategyKind::MaxDegree],
        seeds: vec![0, 1],
        ablations: vec![Ablation::full(), Ablation::parse("no-rules").unwrap()],
        base: RunConfig { seed_size: 5, ..RunConfig::default() },
        ..SweepSpec::default()
    };
    let rows = run_sweep(&data.kg, &data.rules.rules, &spec);
    assert_eq!(rows.len(), 8);
    assert!(rows.iter().all(|r| r.ok()));
    let mut csv = Vec::new();
    write_sweep_csv(&rows, &mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 9);
}

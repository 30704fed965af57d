//! `kgeval`: ground rule sets, run accuracy estimation, sweep strategies and
//! simulate crowd budgets from the command line.

mod config;

use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use kgeval::control::{Strategy, StrategyKind};
use kgeval::crowd::{budget_simulation, write_budget_csv, Console, Source, SourceKind, WorkerModel};
use kgeval::estimator::{
    generate_synthetic, inject_noise, mean_of, run, run_sweep, write_sweep_csv, Ablation, RunConfig, StopReason,
    SweepRow, SweepSpec, SyntheticSpec,
};
use kgeval::rules::type_rules_from_signatures;
use kgeval::{ground, parse_rule_file, parse_triples, Ecg, KnowledgeGraph, Rule, DEFAULT_COST};

use config::{parse_list, parse_seeds, Config, UsageError};

const EXIT_INPUT: u8 = 1;
const EXIT_BUDGET: u8 = 2;
const EXIT_NONCONVERGED: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "kgeval", version, about = "Knowledge-graph accuracy estimation with coupled crowd evaluation")]
struct Cli {
    /// key=value file supplying defaults for any flag; flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Ground rules over a triple file and summarise the constraint graph.
    Ground {
        #[command(flatten)]
        input: Input,
        /// Directory for ecg.json and degrees.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one estimation loop and write its report.
    Run {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        loop_args: LoopArgs,
        /// greedy, random, max-degree, independent-cascade, random+inference
        /// or max-degree+inference.
        #[arg(long)]
        strategy: Option<String>,
        /// oracle, simulated or interactive.
        #[arg(long)]
        source: Option<String>,
        /// RNG seed for the seed set, selection and simulated workers.
        #[arg(long)]
        seed: Option<u64>,
        /// JSONL log of interactive answers.
        #[arg(long)]
        audit: Option<PathBuf>,
        /// Report directory (default kgeval-out).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the cross product of strategies, seeds, noise levels and rule ablations.
    Sweep {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        loop_args: LoopArgs,
        /// Comma-separated strategy names.
        #[arg(long)]
        strategies: Option<String>,
        /// Comma-separated seeds or a range `a..b`.
        #[arg(long)]
        seeds: Option<String>,
        /// Comma-separated flip fractions.
        #[arg(long)]
        flips: Option<String>,
        /// Comma-separated ablations (full, no-len3, len1-only, no-rules,
        /// drop:2+3) or `ladder`.
        #[arg(long)]
        ablations: Option<String>,
        /// oracle or simulated.
        #[arg(long)]
        source: Option<String>,
        /// Output directory (default kgeval-sweep).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte-Carlo majority-vote error against the Hoeffding bound along a
    /// geometric sequence of inferable-set sizes.
    BudgetSim {
        /// Worker accuracy, above 0.5.
        #[arg(long)]
        accuracy: Option<f64>,
        /// Total budget B.
        #[arg(long)]
        budget: Option<f64>,
        /// Cost of one worker answer.
        #[arg(long)]
        cost: Option<f64>,
        /// Geometric decay of inferable-set sizes, in [0, 1).
        #[arg(long)]
        gamma: Option<f64>,
        /// Size of the first inferable set.
        #[arg(long)]
        i_max: Option<usize>,
        /// Monte-Carlo trials per task.
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// CSV file to write; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic typed knowledge graph with rules and gold labels.
    GenSynthetic {
        /// nell (1860 BETs) or small.
        #[arg(long)]
        profile: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// Fraction of generated beliefs that are true.
        #[arg(long)]
        target_acc: Option<f64>,
        /// Directory for triples.tsv and rules.txt.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Corrupt gold-true functional beliefs by replacing their objects.
    InjectNoise {
        #[command(flatten)]
        input: Input,
        /// Fraction of all BETs to corrupt.
        #[arg(long)]
        flip: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for triples.tsv and noise.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct Input {
    /// Tab-separated `subject predicate object [gold [cost]]` file.
    #[arg(long)]
    triples: Option<PathBuf>,
    /// Rule file with weighted Horn clauses and `@functional` / `@signature` lines.
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Add type rules generated from `@signature` declarations.
    #[arg(long)]
    type_rules: bool,
}

#[derive(Args, Debug)]
struct LoopArgs {
    /// Score threshold for labelling a belief (default 0.8).
    #[arg(long)]
    tau: Option<f64>,
    /// Beliefs evaluated up front before the loop starts (default 50).
    #[arg(long)]
    seed_size: Option<usize>,
    /// Total crowd spend allowed.
    #[arg(long)]
    budget: Option<f64>,
    /// Stop after this many loop queries.
    #[arg(long)]
    max_queries: Option<usize>,
    /// Keep querying after the estimate converges.
    #[arg(long)]
    no_convergence: bool,
    /// Greedy candidate pool size, or `all`.
    #[arg(long)]
    pool: Option<String>,
    /// Score an unbounded pool lazily.
    #[arg(long)]
    lazy: bool,
    /// Worker accuracy for the simulated source.
    #[arg(long)]
    accuracy: Option<f64>,
    /// Votes per task for the simulated source.
    #[arg(long)]
    workers: Option<usize>,
}

/// How a successful command ended.
enum Status {
    Done,
    Budget,
    NotConverged,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(cli) {
        Ok(Status::Done) => ExitCode::SUCCESS,
        Ok(Status::Budget) => ExitCode::from(EXIT_BUDGET),
        Ok(Status::NotConverged) => ExitCode::from(EXIT_NONCONVERGED),
        Err(e) => {
            eprintln!("error: {e:#}");
            let budget = e.chain().any(|c| matches!(c.downcast_ref(), Some(kgeval::Error::BudgetExhausted { .. })));
            ExitCode::from(if budget { EXIT_BUDGET } else { EXIT_INPUT })
        }
    }
}

fn execute(cli: Cli) -> Result<Status> {
    if let Ok(threads) = std::env::var("KGEVAL_THREADS") {
        let n: usize = threads.trim().parse().with_context(|| format!("KGEVAL_THREADS=`{threads}` is not a count"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
    }
    let cfg = Config::load(cli.config.as_deref())?;
    match cli.command {
        Command::Ground { input, out } => cmd_ground(&cfg, &input, out),
        Command::Run { input, loop_args, strategy, source, seed, audit, out } => {
            cmd_run(&cfg, &input, &loop_args, strategy, source, seed, audit, out)
        }
        Command::Sweep { input, loop_args, strategies, seeds, flips, ablations, source, out } => {
            cmd_sweep(&cfg, &input, &loop_args, strategies, seeds, flips, ablations, source, out)
        }
        Command::BudgetSim { accuracy, budget, cost, gamma, i_max, trials, seed, out } => {
            cmd_budget_sim(&cfg, accuracy, budget, cost, gamma, i_max, trials, seed, out)
        }
        Command::GenSynthetic { profile, seed, target_acc, out } => cmd_gen_synthetic(&cfg, profile, seed, target_acc, out),
        Command::InjectNoise { input, flip, seed, out } => cmd_inject_noise(&cfg, &input, flip, seed, out),
    }
}

fn required<T>(value: Option<T>, key: &str) -> Result<T> {
    value.ok_or_else(|| UsageError(format!("--{key} is required (flag or config key)")).into())
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("cannot open {}", path.display()))?))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("cannot create {}", path.display()))?))
}

/// Graph and rules named by the input flags, ontology applied.
fn load_inputs(cfg: &Config, input: &Input, need_rules: bool) -> Result<(KnowledgeGraph, Vec<Rule>)> {
    let triples: PathBuf = required(cfg.pick("triples", input.triples.clone())?, "triples")?;
    let cost: f64 = cfg.pick("cost", None)?.unwrap_or(DEFAULT_COST);
    let mut kg = parse_triples(open(&triples)?, cost).with_context(|| format!("in {}", triples.display()))?;
    let rules_path: Option<PathBuf> = cfg.pick("rules", input.rules.clone())?;
    let mut rules = match rules_path {
        Some(path) => {
            let file = parse_rule_file(open(&path)?, &kg).with_context(|| format!("in {}", path.display()))?;
            file.apply_ontology(&mut kg).with_context(|| format!("in {}", path.display()))?;
            file.rules
        }
        None if need_rules => bail!(UsageError("--rules is required (flag or config key)".into())),
        None => Vec::new(),
    };
    if cfg.flag("type-rules", input.type_rules)? {
        let generated = type_rules_from_signatures(&kg, 1.0, rules.len())?;
        rules.extend(generated);
    }
    Ok((kg, rules))
}

fn print_summary(kg: &KnowledgeGraph, ecg: &Ecg, rules: usize) {
    println!("{} BETs, {} constraints", kg.len(), ecg.constraints().len());
    println!("{rules} rules, {} predicates", kg.predicates().len());
    for (degree, count) in ecg.degree_histogram() {
        println!("degree {degree}: {count}");
    }
}

fn cmd_ground(cfg: &Config, input: &Input, out: Option<PathBuf>) -> Result<Status> {
    let (kg, rules) = load_inputs(cfg, input, true)?;
    let ecg = ground(&kg, &rules)?;
    print_summary(&kg, &ecg, rules.len());
    if let Some(dir) = cfg.pick::<PathBuf>("out", out)? {
        let mut json = create(&dir.join("ecg.json"))?;
        ecg.write_json(&kg, &mut json)?;
        json.flush()?;
        let mut csv = create(&dir.join("degrees.csv"))?;
        writeln!(csv, "degree,count")?;
        for (degree, count) in ecg.degree_histogram() {
            writeln!(csv, "{degree},{count}")?;
        }
        csv.flush()?;
    }
    Ok(Status::Done)
}

/// Loop settings shared by `run` and `sweep`.
fn run_config(cfg: &Config, args: &LoopArgs, kind: StrategyKind, seed: u64) -> Result<RunConfig> {
    let mut rc = RunConfig::new(kind, seed);
    if let Some(tau) = cfg.pick("tau", args.tau)? {
        rc.tau = tau;
    }
    if let Some(n) = cfg.pick("seed-size", args.seed_size)? {
        rc.seed_size = n;
    }
    rc.budget = cfg.pick("budget", args.budget)?;
    rc.max_queries = cfg.pick("max-queries", args.max_queries)?;
    rc.stop_on_convergence = !cfg.flag("no-convergence", args.no_convergence)?;
    let lazy = cfg.flag("lazy", args.lazy)?;
    let pool = match cfg.pick::<String>("pool", args.pool.clone())? {
        None => rc.strategy.pool_size,
        Some(p) if p == "all" => None,
        Some(p) => Some(p.parse().map_err(|_| UsageError(format!("--pool `{p}` is neither a count nor `all`")))?),
    };
    rc.strategy = if lazy {
        if pool.is_some() && cfg.pick::<String>("pool", args.pool.clone())?.is_some() {
            bail!(UsageError("--lazy scores every candidate; drop --pool or pass --pool all".into()));
        }
        Strategy::lazy(kind, seed)
    } else {
        Strategy::new(kind, seed).with_pool(pool)
    };
    rc.validate()?;
    Ok(rc)
}

fn parse_kind<T: std::str::FromStr<Err = kgeval::Error>>(text: &str) -> Result<T> {
    text.parse().map_err(|e: kgeval::Error| UsageError(e.to_string()).into())
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    cfg: &Config,
    input: &Input,
    args: &LoopArgs,
    strategy: Option<String>,
    source: Option<String>,
    seed: Option<u64>,
    audit: Option<PathBuf>,
    out: Option<PathBuf>,
) -> Result<Status> {
    let (kg, rules) = load_inputs(cfg, input, true)?;
    let ecg = ground(&kg, &rules)?;
    let kind: StrategyKind = parse_kind(&cfg.pick("strategy", strategy)?.unwrap_or_else(|| "greedy".into()))?;
    let source_kind: SourceKind = parse_kind(&cfg.pick("source", source)?.unwrap_or_else(|| "oracle".into()))?;
    let seed = cfg.pick("seed", seed)?.unwrap_or(0);
    let rc = run_config(cfg, args, kind, seed)?;
    let out: PathBuf = cfg.pick("out", out)?.unwrap_or_else(|| PathBuf::from("kgeval-out"));
    let mut source = match source_kind {
        SourceKind::Oracle => Source::Oracle,
        SourceKind::Simulated => simulated(cfg, args, seed)?,
        SourceKind::Interactive => {
            let audit: Option<PathBuf> = cfg.pick("audit", audit)?;
            let log: Option<Box<dyn Write + Send>> = match audit {
                Some(path) => Some(Box::new(create(&path)?)),
                None => None,
            };
            let stdin: Box<dyn BufRead + Send> = Box::new(BufReader::new(io::stdin()));
            let expected = rc.max_queries.map_or(kg.len(), |m| m + rc.seed_size).min(kg.len());
            Source::Interactive(Console::new(stdin, Box::new(io::stdout()), log, expected))
        }
    };
    let report = run(&kg, &ecg, &rc, &mut source)?;

    let mut json = create(&out.join("report.json"))?;
    report.write_json(&mut json)?;
    json.flush()?;
    let mut coverage = create(&out.join("coverage.csv"))?;
    report.write_coverage_csv(&mut coverage)?;
    coverage.flush()?;
    let mut predicates = create(&out.join("predicates.csv"))?;
    report.write_predicate_csv(&mut predicates)?;
    predicates.flush()?;
    let mut trace = create(&out.join("trace.csv"))?;
    report.trace.write_csv(&mut trace)?;
    trace.flush()?;

    let fmt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"));
    println!("stop: {}", serde_json::to_value(report.stop)?.as_str().unwrap_or_default());
    println!("queries: {} ({} seed, {} loop)", report.queries_used, report.seed_queries, report.loop_queries);
    println!("estimate: {:.4}", report.final_estimate);
    println!("gold: {}", fmt(report.gold_accuracy));
    println!("delta_overall: {}", fmt(report.delta_overall));
    println!("delta_predicate: {}", fmt(report.delta_predicate));
    println!("undecided: {}", report.undecided);
    Ok(if report.stop == StopReason::BudgetExhausted {
        Status::Budget
    } else if !report.solver_converged {
        Status::NotConverged
    } else {
        Status::Done
    })
}

fn simulated(cfg: &Config, args: &LoopArgs, seed: u64) -> Result<Source> {
    let accuracy = required(cfg.pick("accuracy", args.accuracy)?, "accuracy")?;
    let workers = cfg.pick("workers", args.workers)?.unwrap_or(5);
    if workers == 0 {
        bail!(UsageError("--workers must be at least 1".into()));
    }
    Ok(Source::Simulated { model: WorkerModel::new(accuracy, seed)?, workers })
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    cfg: &Config,
    input: &Input,
    args: &LoopArgs,
    strategies: Option<String>,
    seeds: Option<String>,
    flips: Option<String>,
    ablations: Option<String>,
    source: Option<String>,
    out: Option<PathBuf>,
) -> Result<Status> {
    let (kg, rules) = load_inputs(cfg, input, true)?;
    let strategies: String = required(cfg.pick("strategies", strategies)?, "strategies")?;
    let strategies: Vec<StrategyKind> = parse_list(&strategies).iter().map(|s| parse_kind(s)).collect::<Result<_>>()?;
    if strategies.is_empty() {
        bail!(UsageError("--strategies lists no strategy".into()));
    }
    let seeds = parse_seeds(&cfg.pick("seeds", seeds)?.unwrap_or_else(|| "0..5".into()))?;
    let flips: Vec<f64> = parse_list(&cfg.pick("flips", flips)?.unwrap_or_else(|| "0".into()))
        .iter()
        .map(|f| f.parse().map_err(|_| UsageError(format!("flip fraction `{f}` is not a number"))))
        .collect::<std::result::Result<_, _>>()?;
    let ablations: Vec<Ablation> = match cfg.pick::<String>("ablations", ablations)? {
        None => vec![Ablation::full()],
        Some(a) if a.trim() == "ladder" => Ablation::ladder(),
        Some(a) => parse_list(&a).iter().map(|x| Ablation::parse(x).map_err(|e| UsageError(e.to_string()).into())).collect::<Result<_>>()?,
    };
    if seeds.is_empty() || flips.is_empty() || ablations.is_empty() {
        bail!(UsageError("sweep lists must be non-empty".into()));
    }
    let worker_accuracy = match parse_kind::<SourceKind>(&cfg.pick("source", source)?.unwrap_or_else(|| "oracle".into()))? {
        SourceKind::Oracle => None,
        SourceKind::Simulated => Some(required(cfg.pick("accuracy", args.accuracy)?, "accuracy")?),
        SourceKind::Interactive => bail!(UsageError("sweeps cannot use the interactive source".into())),
    };
    let spec = SweepSpec {
        strategies,
        seeds,
        flip_fractions: flips,
        ablations,
        worker_accuracy,
        workers: cfg.pick("workers", args.workers)?.unwrap_or(5),
        base: run_config(cfg, args, StrategyKind::Greedy, 0)?,
    };
    let rows = run_sweep(&kg, &rules, &spec);
    let out: PathBuf = cfg.pick("out", out)?.unwrap_or_else(|| PathBuf::from("kgeval-sweep"));
    let mut csv = create(&out.join("sweep.csv"))?;
    write_sweep_csv(&rows, &mut csv)?;
    csv.flush()?;
    for r in rows.iter().filter(|r| r.ok()) {
        let name = format!("{}_{}_{}_{}.csv", r.strategy.name().replace('+', "-plus-"), r.ablation, r.flip, r.seed);
        let mut f = create(&out.join("coverage").join(name))?;
        writeln!(f, "queries,fraction_inferred")?;
        for p in &r.coverage {
            writeln!(f, "{},{}", p.queries, p.fraction_inferred)?;
        }
        f.flush()?;
    }
    print_sweep_table(&spec, &rows);
    Ok(Status::Done)
}

fn print_sweep_table(spec: &SweepSpec, rows: &[SweepRow]) {
    println!("{:<22} {:<10} {:>6} {:>12} {:>12} {:>9} {:>7}", "strategy", "ablation", "flip", "d_predicate", "d_overall", "queries", "failed");
    let fmt = |v: Option<f64>, digits: usize| v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.digits$}"));
    for &flip in &spec.flip_fractions {
        for ab in &spec.ablations {
            for &kind in &spec.strategies {
                let keep = |r: &SweepRow| r.strategy == kind && r.ablation == ab.name && r.flip == flip;
                let failed = rows.iter().filter(|r| keep(r) && !r.ok()).count();
                println!(
                    "{:<22} {:<10} {:>6} {:>12} {:>12} {:>9} {:>7}",
                    kind.name(),
                    ab.name,
                    flip,
                    fmt(mean_of(rows, keep, |r| r.delta_predicate), 4),
                    fmt(mean_of(rows, keep, |r| r.delta_overall), 4),
                    fmt(mean_of(rows, keep, |r| Some(r.queries_used as f64)), 1),
                    failed
                );
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_budget_sim(
    cfg: &Config,
    accuracy: Option<f64>,
    budget: Option<f64>,
    cost: Option<f64>,
    gamma: Option<f64>,
    i_max: Option<usize>,
    trials: Option<usize>,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<Status> {
    let accuracy: f64 = required(cfg.pick("accuracy", accuracy)?, "accuracy")?;
    if accuracy <= 0.5 {
        bail!(UsageError(format!("worker accuracy {accuracy} is not above 0.5; majority voting needs non-adversarial workers")));
    }
    let budget = cfg.pick("budget", budget)?.unwrap_or(1000.0);
    let cost = cfg.pick("cost", cost)?.unwrap_or(1.0);
    let gamma = cfg.pick("gamma", gamma)?.unwrap_or(0.5);
    let i_max = cfg.pick("i-max", i_max)?.unwrap_or(100);
    let trials = cfg.pick("trials", trials)?.unwrap_or(1000);
    if trials == 0 {
        bail!(UsageError("--trials must be at least 1".into()));
    }
    let seed = cfg.pick("seed", seed)?.unwrap_or(0);
    let rows = budget_simulation(accuracy, budget, cost, gamma, i_max, trials, seed)?;
    let violations = rows.iter().filter(|r| r.empirical_err > r.bound + 3.0 * r.std_err).count();
    match cfg.pick::<PathBuf>("out", out)? {
        Some(path) => {
            let mut f = create(&path)?;
            write_budget_csv(&rows, &mut f)?;
            f.flush()?;
            println!("{} rows, {} above bound + 3 SE", rows.len(), violations);
        }
        None => write_budget_csv(&rows, io::stdout().lock())?,
    }
    Ok(Status::Done)
}

fn cmd_gen_synthetic(cfg: &Config, profile: Option<String>, seed: Option<u64>, target: Option<f64>, out: Option<PathBuf>) -> Result<Status> {
    let seed = cfg.pick("seed", seed)?.unwrap_or(0);
    let mut spec = match cfg.pick::<String>("profile", profile)?.as_deref().unwrap_or("nell") {
        "nell" => SyntheticSpec::nell(seed),
        "small" => SyntheticSpec::small(seed),
        other => bail!(UsageError(format!("unknown profile `{other}` (expected nell or small)"))),
    };
    if let Some(acc) = cfg.pick("target-acc", target)? {
        spec.target_gold_acc = acc;
    }
    let data = generate_synthetic(&spec)?;
    let out: PathBuf = required(cfg.pick("out", out)?, "out")?;
    let mut triples = create(&out.join("triples.tsv"))?;
    data.kg.write_triples(&mut triples)?;
    triples.flush()?;
    let mut rules = create(&out.join("rules.txt"))?;
    data.rules.write(&data.kg, &mut rules)?;
    rules.flush()?;
    println!("{} BETs, {} rules, gold accuracy {:.4}", data.kg.len(), data.rules.rules.len(), data.kg.overall_gold_accuracy()?);
    Ok(Status::Done)
}

fn cmd_inject_noise(cfg: &Config, input: &Input, flip: Option<f64>, seed: Option<u64>, out: Option<PathBuf>) -> Result<Status> {
    let (kg, _) = load_inputs(cfg, input, false)?;
    let flip = required(cfg.pick("flip", flip)?, "flip")?;
    let seed = cfg.pick("seed", seed)?.unwrap_or(0);
    let (noisy, report) = inject_noise(&kg, flip, seed)?;
    let out: PathBuf = required(cfg.pick("out", out)?, "out")?;
    let mut triples = create(&out.join("triples.tsv"))?;
    noisy.write_triples(&mut triples)?;
    triples.flush()?;
    let mut json = create(&out.join("noise.json"))?;
    serde_json::to_writer_pretty(&mut json, &report)?;
    json.flush()?;
    println!("flipped {} BETs, gold accuracy {:.4} -> {:.4}", report.flipped.len(), report.gold_before, report.gold_after);
    Ok(Status::Done)
}

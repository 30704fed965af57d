//! Crowd answer sources, majority-vote aggregation and budget-driven worker
//! allocation.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{BetId, KnowledgeGraph, CATEGORY_PREDICATE};

/// Independent workers, each reporting the gold label with probability
/// `accuracy`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkerModel {
    pub accuracy: f64,
    pub rng_seed: u64,
}

impl WorkerModel {
    pub fn new(accuracy: f64, rng_seed: u64) -> Result<Self> {
        if !(accuracy > 0.5 && accuracy <= 1.0) {
            return Err(Error::InvalidValue(format!("worker accuracy {accuracy} must lie in (0.5, 1]")));
        }
        Ok(WorkerModel { accuracy, rng_seed })
    }

    /// Vote stream for one BET, independent of the order BETs are asked in.
    fn rng_for(&self, bet: BetId) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.rng_seed);
        rng.set_stream(bet as u64 + 1);
        rng
    }
}

/// Budget state for proportional worker allocation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetPlan {
    pub total: f64,
    pub residual: f64,
    pub unit_cost: f64,
    pub gamma: f64,
    pub i_max: usize,
    pub per_task: BTreeMap<BetId, usize>,
}

impl BudgetPlan {
    pub fn new(total: f64, unit_cost: f64, gamma: f64, i_max: usize) -> Result<Self> {
        if !(total >= 0.0) {
            return Err(Error::InvalidValue(format!("budget {total} must be non-negative")));
        }
        if !(unit_cost > 0.0 && unit_cost.is_finite()) {
            return Err(Error::InvalidValue(format!("unit cost {unit_cost} must be positive")));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::InvalidValue(format!("gamma {gamma} must lie in [0, 1)")));
        }
        if i_max == 0 {
            return Err(Error::InvalidValue("i_max must be at least 1".into()));
        }
        Ok(BudgetPlan { total, residual: total, unit_cost, gamma, i_max, per_task: BTreeMap::new() })
    }

    pub fn spent(&self) -> f64 {
        self.total - self.residual
    }

    /// Pays `amount` if the residual covers it.
    pub fn charge(&mut self, amount: f64) -> Result<()> {
        if amount > self.residual + 1e-12 {
            return Err(Error::BudgetExhausted { residual: self.residual, needed: amount });
        }
        self.residual = (self.residual - amount).max(0.0);
        Ok(())
    }
}

/// `w = ⌊B · i_t · (1 − γ) / (c · i_max)⌋`, at least 1 and at most what the
/// residual affords. Deducts `w · c` from the residual.
pub fn allocate_workers(plan: &mut BudgetPlan, i_t: usize) -> Result<usize> {
    if i_t == 0 || i_t > plan.i_max {
        return Err(Error::InvalidValue(format!("inferable-set size {i_t} outside [1, {}]", plan.i_max)));
    }
    let c = plan.unit_cost;
    if plan.residual + 1e-12 < c {
        return Err(Error::BudgetExhausted { residual: plan.residual, needed: c });
    }
    let raw = (plan.total * i_t as f64 * (1.0 - plan.gamma) / (c * plan.i_max as f64)).floor();
    let affordable = ((plan.residual + 1e-12) / c).floor();
    let w = raw.max(1.0).min(affordable) as usize;
    plan.charge(w as f64 * c)?;
    Ok(w)
}

/// As [`allocate_workers`], also recording the allocation for `bet`.
pub fn allocate_for(plan: &mut BudgetPlan, bet: BetId, i_t: usize) -> Result<usize> {
    let w = allocate_workers(plan, i_t)?;
    *plan.per_task.entry(bet).or_insert(0) += w;
    Ok(w)
}

/// `1 − i_max / avg(i_t)`, clamped into `[0, 1)`. Since `avg(i_t) ≤ i_max`
/// the raw value is never positive, so sequences without growth yield 0.
pub fn estimate_gamma(history: &[usize], i_max: usize) -> Result<f64> {
    if history.is_empty() || i_max == 0 {
        return Err(Error::InvalidValue("gamma estimate needs a non-empty history and i_max ≥ 1".into()));
    }
    let avg = history.iter().sum::<usize>() as f64 / history.len() as f64;
    if avg == 0.0 {
        return Ok(0.0);
    }
    let raw = 1.0 - i_max as f64 / avg;
    Ok(raw.clamp(0.0, 1.0 - f64::EPSILON))
}

/// `1` iff at least half of the votes are `1`.
pub fn majority_vote(votes: &[bool]) -> Result<bool> {
    if votes.is_empty() {
        return Err(Error::InvalidValue("majority vote over no votes".into()));
    }
    let ones = votes.iter().filter(|v| **v).count();
    Ok(2 * ones >= votes.len())
}

/// Upper bound `2 exp(−2 w ε²)` on the majority-vote error, `ε = accuracy − 0.5`.
pub fn hoeffding_bound(w: usize, accuracy: f64) -> f64 {
    let eps = accuracy - 0.5;
    2.0 * (-2.0 * w as f64 * eps * eps).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrowdResponse {
    pub bet: BetId,
    pub votes: Vec<bool>,
    pub aggregate: bool,
    pub spend: f64,
}

fn gold_of(kg: &KnowledgeGraph, bet: BetId) -> Result<bool> {
    kg.bet(bet)?.gold.ok_or(Error::GoldIncomplete(bet))
}

/// `w` simulated votes on `bet`, aggregated by majority, each vote costing `unit_cost`.
pub fn simulate_responses(
    model: &WorkerModel,
    kg: &KnowledgeGraph,
    bet: BetId,
    w: usize,
    unit_cost: f64,
) -> Result<CrowdResponse> {
    let gold = gold_of(kg, bet)?;
    if w == 0 {
        return Err(Error::InvalidValue("at least one worker is required".into()));
    }
    let mut rng = model.rng_for(bet);
    let votes: Vec<bool> = (0..w).map(|_| if rng.gen_bool(model.accuracy) { gold } else { !gold }).collect();
    let aggregate = majority_vote(&votes)?;
    Ok(CrowdResponse { bet, votes, aggregate, spend: w as f64 * unit_cost })
}

/// Empirical majority-vote error over `trials` independent tasks with `w`
/// workers each, with its standard error.
pub fn monte_carlo_error(accuracy: f64, w: usize, trials: usize, rng_seed: u64) -> Result<(f64, f64)> {
    WorkerModel::new(accuracy, rng_seed)?;
    if w == 0 || trials == 0 {
        return Err(Error::InvalidValue("workers and trials must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut errors = 0usize;
    for _ in 0..trials {
        let correct = (0..w).filter(|_| rng.gen_bool(accuracy)).count();
        // Gold is true; the tie rule maps exactly half to true as well.
        if 2 * correct < w {
            errors += 1;
        }
    }
    let p = errors as f64 / trials as f64;
    Ok((p, (p * (1.0 - p) / trials as f64).sqrt()))
}

/// One row of a budget simulation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetRow {
    pub i_t: usize,
    pub w: usize,
    pub empirical_err: f64,
    pub std_err: f64,
    pub bound: f64,
}

/// Geometric inferable-set sizes `i_t = ⌊i_max γ^(t−1)⌋` while they stay ≥ 1.
pub fn geometric_sizes(i_max: usize, gamma: f64) -> Vec<usize> {
    let mut out = Vec::new();
    let mut x = i_max as f64;
    while x >= 1.0 {
        out.push(x.floor() as usize);
        if gamma <= 0.0 {
            break;
        }
        x *= gamma;
    }
    out
}

/// Allocates workers along a geometric `i_t` sequence until the budget or the
/// sequence runs out, measuring the empirical error of each allocation.
pub fn budget_simulation(
    accuracy: f64,
    total: f64,
    unit_cost: f64,
    gamma: f64,
    i_max: usize,
    trials: usize,
    rng_seed: u64,
) -> Result<Vec<BudgetRow>> {
    WorkerModel::new(accuracy, rng_seed)?;
    if trials == 0 {
        return Err(Error::InvalidValue("trials must be positive".into()));
    }
    let mut plan = BudgetPlan::new(total, unit_cost, gamma, i_max)?;
    let mut rows = Vec::new();
    for (t, i_t) in geometric_sizes(i_max, gamma).into_iter().enumerate() {
        let w = match allocate_workers(&mut plan, i_t) {
            Ok(w) => w,
            Err(Error::BudgetExhausted { .. }) => break,
            Err(e) => return Err(e),
        };
        let (empirical_err, std_err) = monte_carlo_error(accuracy, w, trials, rng_seed.wrapping_add(t as u64))?;
        rows.push(BudgetRow { i_t, w, empirical_err, std_err, bound: hoeffding_bound(w, accuracy) });
    }
    Ok(rows)
}

pub fn write_budget_csv<W: Write>(rows: &[BudgetRow], mut out: W) -> Result<()> {
    writeln!(out, "i_t,w,empirical_err,bound")?;
    for r in rows {
        writeln!(out, "{},{},{},{}", r.i_t, r.w, r.empirical_err, r.bound)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Oracle,
    Simulated,
    Interactive,
}

impl fmt::Display for SourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SourceKind::Oracle => "oracle",
            SourceKind::Simulated => "simulated",
            SourceKind::Interactive => "interactive",
        })
    }
}

impl FromStr for SourceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "oracle" | "gold" => Ok(SourceKind::Oracle),
            "simulated" | "sim" => Ok(SourceKind::Simulated),
            "interactive" | "console" => Ok(SourceKind::Interactive),
            _ => Err(Error::InvalidValue(format!("unknown source `{s}`"))),
        }
    }
}

/// Console state for human annotation.
pub struct Console {
    input: Box<dyn BufRead + Send>,
    output: Box<dyn Write + Send>,
    audit: Option<Box<dyn Write + Send>>,
    asked: usize,
    expected: usize,
}

impl Console {
    /// `expected` is the `n` shown in `[k/n]` prompts.
    pub fn new(
        input: Box<dyn BufRead + Send>,
        output: Box<dyn Write + Send>,
        audit: Option<Box<dyn Write + Send>>,
        expected: usize,
    ) -> Self {
        Console { input, output, audit, asked: 0, expected }
    }

    fn ask(&mut self, kg: &KnowledgeGraph, bet: BetId) -> Result<bool> {
        self.asked += 1;
        let sentence = render_sentence(kg, bet)?;
        loop {
            write!(self.output, "[{}/{}] {} | true(1)/false(0)/ambiguous(a)? ", self.asked, self.expected, sentence)?;
            self.output.flush()?;
            let mut line = String::new();
            if self.input.read_line(&mut line)? == 0 {
                return Err(Error::EndOfInput);
            }
            let answer = match line.trim().to_ascii_lowercase().as_str() {
                "1" | "t" | "true" | "y" | "yes" => Some(true),
                "0" | "f" | "false" | "n" | "no" => Some(false),
                "a" | "ambiguous" | "?" => None,
                other => {
                    writeln!(self.output, "unrecognised answer `{other}`")?;
                    continue;
                }
            };
            self.log(bet, answer)?;
            if let Some(label) = answer {
                return Ok(label);
            }
        }
    }

    fn log(&mut self, bet: BetId, answer: Option<bool>) -> Result<()> {
        let Some(audit) = self.audit.as_mut() else {
            return Ok(());
        };
        let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
        let answer = match answer {
            Some(true) => "true",
            Some(false) => "false",
            None => "ambiguous",
        };
        serde_json::to_writer(&mut *audit, &serde_json::json!({ "bet": bet, "answer": answer, "timestamp": timestamp }))?;
        writeln!(audit)?;
        audit.flush()?;
        Ok(())
    }
}

impl fmt::Debug for Console {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Console").field("asked", &self.asked).field("expected", &self.expected).finish()
    }
}

/// Where crowd labels come from.
#[derive(Debug)]
pub enum Source {
    /// Gold labels at each BET's cost.
    Oracle,
    /// Simulated workers; `workers` votes per task when no plan allocates them.
    Simulated { model: WorkerModel, workers: usize },
    Interactive(Console),
}

impl Source {
    pub fn kind(&self) -> SourceKind {
        match self {
            Source::Oracle => SourceKind::Oracle,
            Source::Simulated { .. } => SourceKind::Simulated,
            Source::Interactive(_) => SourceKind::Interactive,
        }
    }

    /// Label the source is expected to return, used for greedy lookahead:
    /// gold where known, otherwise the current score rounded.
    pub fn expected_label(&self, kg: &KnowledgeGraph, bet: BetId, score: f64) -> bool {
        match self {
            Source::Interactive(_) => score >= 0.5,
            _ => kg.bets()[bet].gold.unwrap_or(score >= 0.5),
        }
    }

    /// Asks for one label. With a plan, simulated sources get an allocated
    /// number of workers for inferable-set size `i_t` and every other source
    /// pays the BET's cost out of the plan.
    pub fn answer(
        &mut self,
        kg: &KnowledgeGraph,
        bet: BetId,
        plan: Option<&mut BudgetPlan>,
        i_t: Option<usize>,
    ) -> Result<CrowdResponse> {
        let cost = kg.bet(bet)?.cost;
        match self {
            Source::Oracle => {
                let gold = gold_of(kg, bet)?;
                if let Some(plan) = plan {
                    plan.charge(cost)?;
                }
                Ok(CrowdResponse { bet, votes: vec![gold], aggregate: gold, spend: cost })
            }
            Source::Simulated { model, workers } => match (plan, i_t) {
                (Some(plan), Some(i_t)) => {
                    gold_of(kg, bet)?;
                    let w = allocate_for(plan, bet, i_t.min(plan.i_max).max(1))?;
                    simulate_responses(model, kg, bet, w, plan.unit_cost)
                }
                (plan, _) => {
                    let r = simulate_responses(model, kg, bet, *workers, cost)?;
                    if let Some(plan) = plan {
                        plan.charge(r.spend)?;
                    }
                    Ok(r)
                }
            },
            Source::Interactive(console) => {
                if let Some(plan) = plan.as_deref() {
                    if cost > plan.residual + 1e-12 {
                        return Err(Error::BudgetExhausted { residual: plan.residual, needed: cost });
                    }
                }
                let label = console.ask(kg, bet)?;
                if let Some(plan) = plan {
                    plan.charge(cost)?;
                }
                Ok(CrowdResponse { bet, votes: vec![label], aggregate: label, spend: cost })
            }
        }
    }
}

const PREPOSITIONS: [&str; 7] = ["of", "in", "at", "for", "by", "to", "with"];

/// `homeStadiumOf` → `["home", "stadium", "of"]`.
pub fn split_camel(name: &str) -> Vec<String> {
    let mut words: Vec<String> = Vec::new();
    let mut current = String::new();
    let chars: Vec<char> = name.chars().collect();
    for (i, &c) in chars.iter().enumerate() {
        if c == '_' || c == ' ' || c == '-' {
            if !current.is_empty() {
                words.push(std::mem::take(&mut current));
            }
            continue;
        }
        let boundary = c.is_uppercase()
            && !current.is_empty()
            && (chars[i - 1].is_lowercase() || chars.get(i + 1).is_some_and(|n| n.is_lowercase()));
        if boundary {
            words.push(std::mem::take(&mut current));
        }
        current.extend(c.to_lowercase());
    }
    if !current.is_empty() {
        words.push(current);
    }
    words
}

fn phrase(kg: &KnowledgeGraph, entity: crate::kg::EntityId) -> String {
    let surface = kg.entity(entity).surface.replace('_', " ");
    match kg.categories_of(entity).first() {
        Some(cat) => format!("{} {}", split_camel(cat).join(" "), surface),
        None => surface,
    }
}

/// Human-readable form of a belief, e.g.
/// `Stadium Joe Louis Arena is home stadium of sports team Red Wings`.
pub fn render_sentence(kg: &KnowledgeGraph, bet: BetId) -> Result<String> {
    let b = kg.bet(bet)?;
    let predicate = &kg.predicate(b.predicate).name;
    let subject = phrase(kg, b.subject);
    let text = if predicate == CATEGORY_PREDICATE {
        let object = kg.entity(b.object).surface.replace('_', " ");
        format!("{} is a {}", kg.entity(b.subject).surface.replace('_', " "), split_camel(&object).join(" "))
    } else {
        let words = split_camel(predicate);
        let verb = if words.iter().any(|w| PREPOSITIONS.contains(&w.as_str())) { "is" } else { "has" };
        format!("{subject} {verb} {} {}", words.join(" "), phrase(kg, b.object))
    };
    let mut chars = text.chars();
    Ok(match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => text,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::parse_triples_str;

    const EXAMPLE: &str = include_str!("../../../data/worked-example/triples.tsv");

    #[test]
    fn majority_examples() {
        assert!(majority_vote(&[true, true, false]).unwrap());
        assert!(!majority_vote(&[false, false, false]).unwrap());
        assert!(majority_vote(&[true, false]).unwrap());
        assert!(majority_vote(&[]).is_err());
    }

    #[test]
    fn majority_matches_floor_formula() {
        // r̂ = ⌊mean − 1/2⌋ + 1 over every vote vector up to length 8.
        for w in 1..=8usize {
            for mask in 0u32..(1 << w) {
                let votes: Vec<bool> = (0..w).map(|i| mask >> i & 1 == 1).collect();
                let mean = votes.iter().filter(|v| **v).count() as f64 / w as f64;
                let formula = (mean - 0.5).floor() + 1.0;
                assert_eq!(majority_vote(&votes).unwrap(), formula == 1.0);
            }
        }
    }

    #[test]
    fn allocation_examples() {
        let mut plan = BudgetPlan::new(100.0, 1.0, 0.5, 10).unwrap();
        assert_eq!(allocate_workers(&mut plan, 10).unwrap(), 50);
        assert_eq!(plan.residual, 50.0);
        // γ → 0 with i_t = i_max spends everything on one task.
        let mut plan = BudgetPlan::new(100.0, 1.0, 0.0, 10).unwrap();
        assert_eq!(allocate_workers(&mut plan, 10).unwrap(), 100);
        assert!(matches!(allocate_workers(&mut plan, 1), Err(Error::BudgetExhausted { .. })));
        // Small i_t floors to 0 and is lifted to 1.
        let mut plan = BudgetPlan::new(10.0, 1.0, 0.9, 100).unwrap();
        assert_eq!(allocate_workers(&mut plan, 1).unwrap(), 1);
        assert!(allocate_workers(&mut plan, 0).is_err());
        assert!(BudgetPlan::new(10.0, 1.0, 1.0, 1).is_err());
    }

    #[test]
    fn budget_sim_allocations() {
        let rows = budget_simulation(0.75, 1000.0, 1.0, 0.5, 100, 10, 0).unwrap();
        let ws: Vec<usize> = rows.iter().map(|r| r.w).collect();
        assert_eq!(ws, vec![500, 250, 125, 60, 30, 15, 5]);
        assert!(budget_simulation(0.5, 1000.0, 1.0, 0.5, 100, 10, 0).is_err());
        assert!(budget_simulation(0.75, 1000.0, 1.0, 0.5, 100, 0, 0).is_err());
    }

    #[test]
    fn gamma_estimate() {
        assert_eq!(estimate_gamma(&[10, 10, 10], 10).unwrap(), 0.0);
        assert_eq!(estimate_gamma(&[10, 5], 10).unwrap(), 0.0);
        assert!(estimate_gamma(&[], 10).is_err());
    }

    #[test]
    fn simulated_votes() {
        let kg = parse_triples_str(EXAMPLE, 0.01).unwrap();
        let perfect = WorkerModel::new(1.0, 3).unwrap();
        for h in 0..kg.len() {
            for w in [1, 2, 7] {
                let r = simulate_responses(&perfect, &kg, h, w, 0.01).unwrap();
                assert_eq!(r.aggregate, kg.bets()[h].gold.unwrap());
                assert!((r.spend - w as f64 * 0.01).abs() < 1e-12);
            }
        }
        let noisy = WorkerModel::new(0.6, 3).unwrap();
        let one = simulate_responses(&noisy, &kg, 2, 1, 1.0).unwrap();
        assert_eq!(one.aggregate, one.votes[0]);
        assert_eq!(one, simulate_responses(&noisy, &kg, 2, 1, 1.0).unwrap());
        assert!(WorkerModel::new(0.5, 0).is_err());
    }

    #[test]
    fn hoeffding_holds_at_w101() {
        let (err, se) = monte_carlo_error(0.75, 101, 1000, 5).unwrap();
        assert!(err <= hoeffding_bound(101, 0.75) + 3.0 * se + 1e-3);
        assert!((hoeffding_bound(101, 0.75) - 6.6e-6).abs() < 1e-6);
    }

    #[test]
    fn oracle_answers_at_cost() {
        let kg = parse_triples_str(EXAMPLE, 0.01).unwrap();
        let mut src = Source::Oracle;
        let r = src.answer(&kg, 0, None, None).unwrap();
        assert!(r.aggregate);
        assert_eq!(r.spend, 0.01);
        let mut plan = BudgetPlan::new(0.015, 0.01, 0.0, 1).unwrap();
        src.answer(&kg, 0, Some(&mut plan), None).unwrap();
        assert!(matches!(src.answer(&kg, 1, Some(&mut plan), None), Err(Error::BudgetExhausted { .. })));
    }

    #[test]
    fn sentences() {
        let kg = parse_triples_str(EXAMPLE, 0.01).unwrap();
        assert_eq!(render_sentence(&kg, 0).unwrap(), "Stadium Joe Louis Arena is home stadium of sports team Red Wings");
        assert_eq!(render_sentence(&kg, 1).unwrap(), "Sports team Red Wings has home city city Detroit");
        assert_eq!(render_sentence(&kg, 3).unwrap(), "Joe Louis Arena is a stadium");
        let plain = parse_triples_str("ducks\thomeCity\tanaheim\n", 0.01).unwrap();
        assert_eq!(render_sentence(&plain, 0).unwrap(), "Ducks has home city anaheim");
        assert_eq!(split_camel("stadiumLocatedInCity"), ["stadium", "located", "in", "city"]);
        assert_eq!(split_camel("NBATeam"), ["nba", "team"]);
    }

    #[test]
    fn interactive_reasks_and_audits() {
        use std::sync::{Arc, Mutex};

        #[derive(Clone, Default)]
        struct Shared(Arc<Mutex<Vec<u8>>>);
        impl Write for Shared {
            fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
                self.0.lock().unwrap().extend_from_slice(buf);
                Ok(buf.len())
            }
            fn flush(&mut self) -> std::io::Result<()> {
                Ok(())
            }
        }

        let kg = parse_triples_str(EXAMPLE, 0.01).unwrap();
        let (out, audit) = (Shared::default(), Shared::default());
        let input = std::io::Cursor::new(b"a\nmaybe\n1\n".to_vec());
        let console = Console::new(Box::new(input), Box::new(out.clone()), Some(Box::new(audit.clone()) as Box<dyn Write + Send>), 3);
        let mut src = Source::Interactive(console);
        let r = src.answer(&kg, 0, None, None).unwrap();
        assert!(r.aggregate);
        let shown = String::from_utf8(out.0.lock().unwrap().clone()).unwrap();
        assert!(shown.starts_with(
            "[1/3] Stadium Joe Louis Arena is home stadium of sports team Red Wings | true(1)/false(0)/ambiguous(a)? "
        ));
        let log = String::from_utf8(audit.0.lock().unwrap().clone()).unwrap();
        let lines: Vec<serde_json::Value> = log.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0]["answer"], "ambiguous");
        assert_eq!(lines[1]["answer"], "true");
        assert_eq!(lines[1]["bet"], 0);
        assert!(matches!(src.answer(&kg, 1, None, None), Err(Error::EndOfInput)));
    }
}

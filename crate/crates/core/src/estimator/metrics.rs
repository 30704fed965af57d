//! Accuracy metrics and the convergence rule.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kg::KnowledgeGraph;

/// True iff the last `k + 1` estimates have population variance below `alpha`.
pub fn converged(history: &[f64], k: usize, alpha: f64) -> bool {
    if history.len() < k + 1 {
        return false;
    }
    let tail = &history[history.len() - (k + 1)..];
    let mean = tail.iter().sum::<f64>() / tail.len() as f64;
    let var = tail.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / tail.len() as f64;
    var < alpha
}

fn check_labels(kg: &KnowledgeGraph, labels: &[Option<bool>]) -> Result<Vec<bool>> {
    if labels.len() != kg.len() {
        return Err(Error::InvalidValue(format!("{} labels for {} BETs", labels.len(), kg.len())));
    }
    if kg.is_empty() {
        return Err(Error::InvalidValue("empty knowledge graph".into()));
    }
    kg.gold_labels()
}

fn score(label: Option<bool>) -> f64 {
    match label {
        Some(true) => 1.0,
        Some(false) => 0.0,
        None => 0.5,
    }
}

/// Mean label over all of `H`, undecided BETs contributing 0.5.
pub fn estimated_accuracy(labels: &[Option<bool>]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    labels.iter().map(|&l| score(l)).sum::<f64>() / labels.len() as f64
}

/// Mean label over the decided BETs only; `None` when nothing is decided.
pub fn covered_accuracy(labels: &[Option<bool>]) -> Option<f64> {
    let decided: Vec<bool> = labels.iter().flatten().copied().collect();
    (!decided.is_empty()).then(|| decided.iter().filter(|l| **l).count() as f64 / decided.len() as f64)
}

/// `|Φ(H) − (1/|H|) Σ l(h)|` with undecided labels scored 0.5.
pub fn delta_overall(kg: &KnowledgeGraph, labels: &[Option<bool>]) -> Result<f64> {
    let gold = check_labels(kg, labels)?;
    let phi = gold.iter().filter(|g| **g).count() as f64 / gold.len() as f64;
    Ok((phi - estimated_accuracy(labels)).abs())
}

/// `|Φ(H) − Acc(Q)|`: gold accuracy of the whole graph against the mean label
/// of the decided BETs.
pub fn delta_overall_q(kg: &KnowledgeGraph, labels: &[Option<bool>]) -> Result<f64> {
    let gold = check_labels(kg, labels)?;
    let phi = gold.iter().filter(|g| **g).count() as f64 / gold.len() as f64;
    Ok((phi - covered_accuracy(labels).unwrap_or(0.5)).abs())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredicateRow {
    pub gold: f64,
    pub estimated: f64,
    pub gap: f64,
    pub bets: usize,
    pub decided: usize,
}

/// Per-predicate gold and estimated accuracy. `over_q` estimates from decided
/// BETs only (0.5 for a predicate with none); otherwise undecided BETs count 0.5.
pub fn per_predicate(kg: &KnowledgeGraph, labels: &[Option<bool>], over_q: bool) -> Result<BTreeMap<String, PredicateRow>> {
    let gold = check_labels(kg, labels)?;
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for b in kg.bets() {
        groups.entry(kg.predicate(b.predicate).name.clone()).or_default().push(b.id);
    }
    if groups.is_empty() {
        return Err(Error::InvalidValue("no predicates to average over".into()));
    }
    Ok(groups
        .into_iter()
        .map(|(name, ids)| {
            let g = ids.iter().filter(|&&h| gold[h]).count() as f64 / ids.len() as f64;
            let sub: Vec<Option<bool>> = ids.iter().map(|&h| labels[h]).collect();
            let decided = sub.iter().filter(|l| l.is_some()).count();
            let e = if over_q { covered_accuracy(&sub).unwrap_or(0.5) } else { estimated_accuracy(&sub) };
            (name, PredicateRow { gold: g, estimated: e, gap: (g - e).abs(), bets: ids.len(), decided })
        })
        .collect())
}

/// Mean over predicates of `|gold − estimated|`, undecided labels scored 0.5.
pub fn delta_predicate(kg: &KnowledgeGraph, labels: &[Option<bool>]) -> Result<f64> {
    mean_gap(&per_predicate(kg, labels, false)?)
}

/// As [`delta_predicate`] with estimates taken over decided BETs only.
pub fn delta_predicate_q(kg: &KnowledgeGraph, labels: &[Option<bool>]) -> Result<f64> {
    mean_gap(&per_predicate(kg, labels, true)?)
}

fn mean_gap(rows: &BTreeMap<String, PredicateRow>) -> Result<f64> {
    if rows.is_empty() {
        return Err(Error::InvalidValue("no predicates to average over".into()));
    }
    Ok(rows.values().map(|r| r.gap).sum::<f64>() / rows.len() as f64)
}

/// Smallest query count from which every later estimate stays within
/// `target` of `gold`.
pub fn queries_to_target(trajectory: &[(usize, f64)], gold: f64, target: f64) -> Option<usize> {
    let mut first = None;
    for &(q, acc) in trajectory {
        if (acc - gold).abs() <= target {
            first.get_or_insert(q);
        } else {
            first = None;
        }
    }
    first
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::parse_triples_str;

    fn graph(rows: &[(&str, &str, bool)]) -> KnowledgeGraph {
        let text: String = rows
            .iter()
            .enumerate()
            .map(|(i, (p, o, g))| format!("e{i}\t{p}\t{o}\t{}\n", u8::from(*g)))
            .collect();
        parse_triples_str(&text, 0.01).unwrap()
    }

    #[test]
    fn convergence_examples() {
        assert!(converged(&[0.8; 10], 9, 0.002));
        assert!(!converged(&[0.8; 9], 9, 0.002));
        let alternating: Vec<f64> = (0..10).map(|i| if i % 2 == 0 { 0.5 } else { 0.9 }).collect();
        assert!(!converged(&alternating, 9, 0.002));
        // Population variance of the alternating tail is exactly 0.04.
        let mean = 0.7;
        let var = alternating.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 10.0;
        assert!((var - 0.04).abs() < 1e-12);
        // Only the last k + 1 values matter.
        let mut h = alternating.clone();
        h.extend([0.7; 10]);
        assert!(converged(&h, 9, 0.002));
    }

    #[test]
    fn delta_examples() {
        let kg = graph(&[("p", "a", true), ("p", "b", false), ("q", "c", true), ("q", "d", false)]);
        let gold: Vec<Option<bool>> = kg.gold_labels().unwrap().into_iter().map(Some).collect();
        assert_eq!(delta_overall(&kg, &gold).unwrap(), 0.0);
        assert_eq!(delta_predicate(&kg, &gold).unwrap(), 0.0);
        let flipped: Vec<Option<bool>> = gold.iter().map(|l| l.map(|b| !b)).collect();
        assert_eq!(delta_overall(&kg, &flipped).unwrap(), 0.0);
        // Undecided labels count one half.
        assert!((delta_overall(&kg, &[Some(true), None, Some(true), Some(true)]).unwrap() - 0.375).abs() < 1e-12);
        assert!((delta_overall_q(&kg, &[Some(true), None, None, Some(false)]).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn predicate_gaps_average() {
        // p: gold 0.5, estimate 0.6 over 10; q: gold 1.0, estimate 0.7 over 10.
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..10 {
            rows.push(("p", format!("x{i}"), i < 5));
            labels.push(Some(i < 6));
        }
        for i in 0..10 {
            rows.push(("q", format!("y{i}"), true));
            labels.push(Some(i < 7));
        }
        let borrowed: Vec<(&str, &str, bool)> = rows.iter().map(|(p, o, g)| (*p, o.as_str(), *g)).collect();
        let kg = graph(&borrowed);
        assert!((delta_predicate(&kg, &labels).unwrap() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn missing_gold_is_an_error() {
        let kg = parse_triples_str("a\tp\tb\n", 0.01).unwrap();
        assert!(delta_overall(&kg, &[Some(true)]).is_err());
        assert!(delta_predicate(&kg, &[Some(true)]).is_err());
    }

    #[test]
    fn target_must_hold_to_the_end() {
        let t = [(1, 0.5), (2, 0.9), (3, 0.7), (4, 0.908), (5, 0.905)];
        assert_eq!(queries_to_target(&t, 0.9, 0.01), Some(4));
        assert_eq!(queries_to_target(&t, 0.2, 0.01), None);
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    fn label() -> impl Strategy<Value = Option<bool>> {
        prop_oneof![Just(None), Just(Some(true)), Just(Some(false))]
    }

    proptest! {
        #[test]
        fn accuracy_is_bounded(labels in prop::collection::vec(label(), 1..60)) {
            let acc = estimated_accuracy(&labels);
            prop_assert!((0.0..=1.0).contains(&acc));
            if let Some(c) = covered_accuracy(&labels) {
                prop_assert!((0.0..=1.0).contains(&c));
            }
        }

        #[test]
        fn flat_histories_converge(level in 0.0f64..1.0, extra in 0usize..20, k in 1usize..12) {
            prop_assert!(converged(&vec![level; k + 1 + extra], k, 1e-9));
        }

        #[test]
        fn target_holds_to_the_end(accs in prop::collection::vec(0.0f64..1.0, 1..50), gold in 0.0f64..1.0) {
            let traj: Vec<(usize, f64)> = accs.iter().copied().enumerate().collect();
            match queries_to_target(&traj, gold, 0.05) {
                Some(q) => prop_assert!(traj.iter().filter(|p| p.0 >= q).all(|p| (p.1 - gold).abs() <= 0.05)),
                None => prop_assert!((traj.last().unwrap().1 - gold).abs() > 0.05),
            }
        }
    }
}

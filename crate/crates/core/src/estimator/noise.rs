//! Controlled corruption of a gold-labelled graph.

use std::collections::{BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kg::{BetId, EntityId, KnowledgeGraph};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseReport {
    pub flipped: Vec<BetId>,
    pub gold_before: f64,
    pub gold_after: f64,
}

/// Turns `round(flip_fraction · |H|)` gold-true beliefs of functional
/// predicates into false ones by replacing the object with another entity
/// already seen as an object of the same predicate. BET ids, costs and all
/// other beliefs are kept.
pub fn inject_noise(kg: &KnowledgeGraph, flip_fraction: f64, rng_seed: u64) -> Result<(KnowledgeGraph, NoiseReport)> {
    if !(0.0..=1.0).contains(&flip_fraction) {
        return Err(Error::InvalidValue(format!("flip fraction {flip_fraction} outside [0,1]")));
    }
    let gold_before = kg.overall_gold_accuracy()?;
    let n = kg.len();
    let needed = (flip_fraction * n as f64).round() as usize;
    let mut eligible: Vec<BetId> = kg
        .bets()
        .iter()
        .filter(|b| b.gold == Some(true) && kg.predicate(b.predicate).functional)
        .map(|b| b.id)
        .collect();
    if eligible.len() < needed {
        return Err(Error::InsufficientEligible { needed, available: eligible.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    eligible.shuffle(&mut rng);

    let mut objects: Vec<BTreeSet<EntityId>> = vec![BTreeSet::new(); kg.predicates().len()];
    let mut triples: HashSet<(EntityId, u32, EntityId)> = HashSet::new();
    for b in kg.bets() {
        objects[b.predicate.0 as usize].insert(b.object);
        triples.insert((b.subject, b.predicate.0, b.object));
    }
    let mut new_object: Vec<Option<EntityId>> = vec![None; n];
    let mut flipped = Vec::with_capacity(needed);
    for &h in &eligible {
        if flipped.len() == needed {
            break;
        }
        let b = &kg.bets()[h];
        let options: Vec<EntityId> = objects[b.predicate.0 as usize]
            .iter()
            .copied()
            .filter(|&o| o != b.object && !triples.contains(&(b.subject, b.predicate.0, o)))
            .collect();
        let Some(&o) = options.choose(&mut rng) else {
            continue;
        };
        triples.insert((b.subject, b.predicate.0, o));
        new_object[h] = Some(o);
        flipped.push(h);
    }
    if flipped.len() < needed {
        return Err(Error::InsufficientEligible { needed, available: flipped.len() });
    }

    let mut out = KnowledgeGraph::new();
    for e in kg.entities() {
        out.intern_entity(&e.surface);
    }
    for p in kg.predicates() {
        out.intern_predicate(&p.name);
    }
    for b in kg.bets() {
        let object = new_object[b.id].unwrap_or(b.object);
        let gold = if new_object[b.id].is_some() { Some(false) } else { b.gold };
        out.add_bet(
            &kg.entity(b.subject).surface,
            &kg.predicate(b.predicate).name,
            &kg.entity(object).surface,
            b.cost,
            gold,
            0,
        )?;
    }
    for p in kg.predicates() {
        out.set_functional(&p.name, p.functional)?;
        if let (Some(d), Some(r)) = (&p.domain, &p.range) {
            out.set_signature(&p.name, d, r)?;
        }
    }
    flipped.sort_unstable();
    let gold_after = out.overall_gold_accuracy()?;
    Ok((out, NoiseReport { flipped, gold_before, gold_after }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::parse_triples_str;

    fn functional_graph() -> KnowledgeGraph {
        let mut text = String::new();
        for i in 0..10 {
            text.push_str(&format!("team{i}\thomeCity\tcity{}\t1\n", i % 4));
        }
        let mut kg = parse_triples_str(&text, 0.01).unwrap();
        kg.set_functional("homeCity", true).unwrap();
        kg
    }

    #[test]
    fn zero_fraction_is_identity() {
        let kg = functional_graph();
        let (out, r) = inject_noise(&kg, 0.0, 1).unwrap();
        assert!(r.flipped.is_empty());
        assert_eq!(out.bets(), kg.bets());
    }

    #[test]
    fn accuracy_drops_by_flipped_share() {
        let kg = functional_graph();
        let (out, r) = inject_noise(&kg, 0.3, 7).unwrap();
        assert_eq!(r.flipped.len(), 3);
        assert!((r.gold_before - r.gold_after - 0.3).abs() < 1e-12);
        for &h in &r.flipped {
            let (a, b) = (&kg.bets()[h], &out.bets()[h]);
            assert_eq!(a.subject, b.subject);
            assert_ne!(a.object, b.object);
            assert_eq!(b.gold, Some(false));
        }
        assert!(out.predicates()[0].functional);
        assert_eq!(inject_noise(&kg, 0.3, 7).unwrap().0.bets(), out.bets());
    }

    #[test]
    fn full_corruption() {
        let kg = functional_graph();
        let (out, _) = inject_noise(&kg, 1.0, 2).unwrap();
        assert_eq!(out.overall_gold_accuracy().unwrap(), 0.0);
    }

    #[test]
    fn shortfall_is_reported() {
        let mut kg = functional_graph();
        kg.set_functional("homeCity", false).unwrap();
        assert!(matches!(
            inject_noise(&kg, 0.2, 0),
            Err(Error::InsufficientEligible { needed: 2, available: 0 })
        ));
        assert!(inject_noise(&kg, 1.5, 0).is_err());
    }
}

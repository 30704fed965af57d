//! Rule grounding and the Evaluation Coupling Graph: a bipartite factor graph
//! with one variable node per BET and one factor node per grounded constraint.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kg::{BetId, EntityId, KnowledgeGraph, PredicateId};
use crate::rules::{Atom, Rule, Term};

/// One instantiation of a rule over concrete beliefs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundedConstraint {
    pub id: usize,
    pub rule: usize,
    /// Body beliefs in body-atom order.
    pub body: Vec<BetId>,
    pub head: BetId,
    pub weight: f64,
}

impl GroundedConstraint {
    /// dom(C): body beliefs followed by the head.
    pub fn domain(&self) -> impl Iterator<Item = BetId> + '_ {
        self.body.iter().copied().chain(std::iter::once(self.head))
    }
}

#[derive(Debug, Clone)]
pub struct Ecg {
    num_bets: usize,
    constraints: Vec<GroundedConstraint>,
    incidence: Vec<Vec<usize>>,
}

impl Ecg {
    /// Builds the graph, checking every constraint references valid, distinct
    /// head and body beliefs. Constraint ids are reassigned to list positions.
    pub fn new(num_bets: usize, mut constraints: Vec<GroundedConstraint>) -> Result<Self> {
        let mut incidence = vec![Vec::new(); num_bets];
        for (j, c) in constraints.iter_mut().enumerate() {
            c.id = j;
            if c.body.is_empty() {
                return Err(Error::InvalidValue(format!("constraint {j} has an empty body")));
            }
            if let Some(bad) = c.domain().find(|&h| h >= num_bets) {
                return Err(Error::InvalidBet(bad));
            }
            if c.body.contains(&c.head) {
                return Err(Error::InvalidValue(format!("constraint {j} uses its head in the body")));
            }
            if !(c.weight >= 0.0 && c.weight.is_finite()) {
                return Err(Error::InvalidValue(format!("constraint {j} has weight {}", c.weight)));
            }
            for h in c.domain() {
                let list: &mut Vec<usize> = &mut incidence[h];
                if list.last() != Some(&j) {
                    list.push(j);
                }
            }
        }
        Ok(Ecg { num_bets, constraints, incidence })
    }

    pub fn num_bets(&self) -> usize {
        self.num_bets
    }

    pub fn constraints(&self) -> &[GroundedConstraint] {
        &self.constraints
    }

    /// Constraint ids incident on `h`, ascending.
    pub fn incident(&self, h: BetId) -> &[usize] {
        &self.incidence[h]
    }

    pub fn degree(&self, h: BetId) -> Result<usize> {
        self.incidence.get(h).map(Vec::len).ok_or(Error::InvalidBet(h))
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.incidence.iter().map(Vec::len).collect()
    }

    /// Edge list `(constraint, bet)`; each pair appears once.
    pub fn edges(&self) -> Vec<(usize, BetId)> {
        let mut edges: Vec<(usize, BetId)> = self
            .incidence
            .iter()
            .enumerate()
            .flat_map(|(h, cs)| cs.iter().map(move |&c| (c, h)))
            .collect();
        edges.sort_unstable();
        edges
    }

    /// degree → number of BETs with that degree.
    pub fn degree_histogram(&self) -> BTreeMap<usize, usize> {
        let mut hist = BTreeMap::new();
        for d in self.degrees() {
            *hist.entry(d).or_insert(0) += 1;
        }
        hist
    }

    pub fn write_json<W: Write>(&self, kg: &KnowledgeGraph, out: W) -> Result<()> {
        #[derive(Serialize)]
        struct BetNode<'a> {
            id: BetId,
            subject: &'a str,
            predicate: &'a str,
            object: &'a str,
            degree: usize,
        }
        #[derive(Serialize)]
        struct Doc<'a> {
            bets: Vec<BetNode<'a>>,
            constraints: &'a [GroundedConstraint],
        }
        let bets = kg
            .bets()
            .iter()
            .map(|b| BetNode {
                id: b.id,
                subject: &kg.entity(b.subject).surface,
                predicate: &kg.predicate(b.predicate).name,
                object: &kg.entity(b.object).surface,
                degree: self.incidence.get(b.id).map_or(0, Vec::len),
            })
            .collect();
        serde_json::to_writer_pretty(out, &Doc { bets, constraints: &self.constraints })?;
        Ok(())
    }
}

/// Lookup tables over the KG used by the body join.
struct TripleIndex {
    by_predicate: HashMap<PredicateId, Vec<BetId>>,
    by_subject: HashMap<(PredicateId, EntityId), Vec<BetId>>,
    by_object: HashMap<(PredicateId, EntityId), Vec<BetId>>,
}

impl TripleIndex {
    fn new(kg: &KnowledgeGraph) -> Self {
        let mut idx = TripleIndex {
            by_predicate: HashMap::new(),
            by_subject: HashMap::new(),
            by_object: HashMap::new(),
        };
        for b in kg.bets() {
            idx.by_predicate.entry(b.predicate).or_default().push(b.id);
            idx.by_subject.entry((b.predicate, b.subject)).or_default().push(b.id);
            idx.by_object.entry((b.predicate, b.object)).or_default().push(b.id);
        }
        idx
    }
}

/// A term with variables numbered and constants resolved to entities.
#[derive(Clone, Copy)]
enum Slot {
    Var(usize),
    Const(EntityId),
}

struct CompiledAtom {
    predicate: PredicateId,
    subject: Slot,
    object: Slot,
}

type Binding = Vec<Option<EntityId>>;

fn compile(rule: &Rule, kg: &KnowledgeGraph) -> Option<(Vec<CompiledAtom>, CompiledAtom, usize)> {
    let mut vars: Vec<String> = Vec::new();
    let mut slot = |t: &Term| -> Option<Slot> {
        match t {
            Term::Const(c) => kg.entity_id(c).map(Slot::Const),
            Term::Var(v) => {
                let i = vars.iter().position(|x| x == v).unwrap_or_else(|| {
                    vars.push(v.clone());
                    vars.len() - 1
                });
                Some(Slot::Var(i))
            }
        }
    };
    let mut atom = |a: &Atom| -> Option<CompiledAtom> {
        Some(CompiledAtom { predicate: a.predicate, subject: slot(&a.subject)?, object: slot(&a.object)? })
    };
    // A constant naming no entity can never match, so the rule has no groundings.
    let body = rule.body.iter().map(&mut atom).collect::<Option<Vec<_>>>()?;
    let head = atom(&rule.head)?;
    Some((body, head, vars.len()))
}

fn resolve(slot: Slot, binding: &Binding) -> Option<EntityId> {
    match slot {
        Slot::Const(e) => Some(e),
        Slot::Var(i) => binding[i],
    }
}

fn unify(slot: Slot, value: EntityId, binding: &mut Binding) -> bool {
    match slot {
        Slot::Const(e) => e == value,
        Slot::Var(i) => match binding[i] {
            Some(bound) => bound == value,
            None => {
                binding[i] = Some(value);
                true
            }
        },
    }
}

/// Every (body, head) instantiation of one rule, sorted and deduplicated on
/// (sorted body, head).
fn ground_rule(kg: &KnowledgeGraph, index: &TripleIndex, rule: &Rule) -> Vec<(Vec<BetId>, BetId)> {
    let Some((body, head, num_vars)) = compile(rule, kg) else {
        return Vec::new();
    };
    let empty: Vec<BetId> = Vec::new();
    let mut partial: Vec<(Binding, Vec<BetId>)> = vec![(vec![None; num_vars], Vec::new())];
    for atom in &body {
        let mut next = Vec::new();
        for (binding, bets) in &partial {
            let candidates = match (resolve(atom.subject, binding), resolve(atom.object, binding)) {
                (Some(s), _) => index.by_subject.get(&(atom.predicate, s)),
                (None, Some(o)) => index.by_object.get(&(atom.predicate, o)),
                (None, None) => index.by_predicate.get(&atom.predicate),
            }
            .unwrap_or(&empty);
            for &h in candidates {
                let bet = &kg.bets()[h];
                let mut b = binding.clone();
                if unify(atom.subject, bet.subject, &mut b) && unify(atom.object, bet.object, &mut b) {
                    let mut used = bets.clone();
                    used.push(h);
                    next.push((b, used));
                }
            }
        }
        partial = next;
        if partial.is_empty() {
            return Vec::new();
        }
    }
    let mut out: Vec<(Vec<BetId>, Vec<BetId>, BetId)> = Vec::new();
    for (binding, bets) in partial {
        let (Some(s), Some(o)) = (resolve(head.subject, &binding), resolve(head.object, &binding)) else {
            continue;
        };
        // Closed world: heads that are not beliefs of the KG are dropped.
        let Some(h) = kg.find(s, head.predicate, o) else {
            continue;
        };
        if bets.contains(&h) {
            continue;
        }
        let mut key = bets.clone();
        key.sort_unstable();
        out.push((key, bets, h));
    }
    out.sort_by(|a, b| (&a.0, a.2).cmp(&(&b.0, b.2)));
    out.dedup_by(|a, b| a.0 == b.0 && a.2 == b.2);
    out.into_iter().map(|(_, body, head)| (body, head)).collect()
}

/// Rule id, weight and each grounding as (body, head).
type RuleGroundings = (usize, f64, Vec<(Vec<BetId>, BetId)>);

/// Instantiates every rule over the KG. Output order is by rule id, then by
/// sorted body ids, then head id, whatever the scheduling.
pub fn ground(kg: &KnowledgeGraph, rules: &[Rule]) -> Result<Ecg> {
    let index = TripleIndex::new(kg);
    let mut per_rule: Vec<RuleGroundings> = rules
        .par_iter()
        .map(|r| (r.id, r.weight, ground_rule(kg, &index, r)))
        .collect();
    per_rule.sort_by_key(|(id, _, _)| *id);
    let constraints = per_rule
        .into_iter()
        .flat_map(|(rule, weight, groundings)| {
            groundings
                .into_iter()
                .map(move |(body, head)| GroundedConstraint { id: 0, rule, body, head, weight })
        })
        .collect();
    Ecg::new(kg.len(), constraints)
}

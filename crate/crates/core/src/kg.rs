//! Knowledge-graph data model: entities, predicates and the beliefs (BETs) to
//! be evaluated, plus the tab-separated triples format.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Predicate used for category membership beliefs, e.g. `Detroit isA City`.
pub const CATEGORY_PREDICATE: &str = "isA";

/// Price of one crowd judgement when a line does not carry its own cost.
pub const DEFAULT_COST: f64 = 0.01;

/// Dense index of a belief evaluation task, assigned in file order.
pub type BetId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EntityId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PredicateId(pub u32);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entity {
    pub id: EntityId,
    pub surface: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Predicate {
    pub id: PredicateId,
    pub name: String,
    pub domain: Option<String>,
    pub range: Option<String>,
    /// At most one true object per subject. Declared in the rules file.
    pub functional: bool,
}

/// A single belief `(subject, predicate, object)` together with its crowd cost
/// and, when known, its gold label.
#[derive(Debug, Clone, PartialEq)]
pub struct Bet {
    pub id: BetId,
    pub subject: EntityId,
    pub predicate: PredicateId,
    pub object: EntityId,
    pub cost: f64,
    pub gold: Option<bool>,
}

#[derive(Debug, Clone, Default)]
pub struct KnowledgeGraph {
    bets: Vec<Bet>,
    entities: Vec<Entity>,
    predicates: Vec<Predicate>,
    categories: BTreeSet<String>,
    entity_index: HashMap<String, EntityId>,
    predicate_index: HashMap<String, PredicateId>,
    triple_index: HashMap<(EntityId, PredicateId, EntityId), BetId>,
}

impl KnowledgeGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.bets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bets.is_empty()
    }

    pub fn bets(&self) -> &[Bet] {
        &self.bets
    }

    pub fn bet(&self, id: BetId) -> Result<&Bet> {
        self.bets.get(id).ok_or(Error::InvalidBet(id))
    }

    pub fn entities(&self) -> &[Entity] {
        &self.entities
    }

    pub fn predicates(&self) -> &[Predicate] {
        &self.predicates
    }

    pub fn categories(&self) -> &BTreeSet<String> {
        &self.categories
    }

    pub fn entity(&self, id: EntityId) -> &Entity {
        &self.entities[id.0 as usize]
    }

    pub fn predicate(&self, id: PredicateId) -> &Predicate {
        &self.predicates[id.0 as usize]
    }

    pub fn entity_id(&self, surface: &str) -> Option<EntityId> {
        self.entity_index.get(surface).copied()
    }

    pub fn predicate_id(&self, name: &str) -> Option<PredicateId> {
        self.predicate_index.get(name).copied()
    }

    pub fn find(&self, subject: EntityId, predicate: PredicateId, object: EntityId) -> Option<BetId> {
        self.triple_index.get(&(subject, predicate, object)).copied()
    }

    pub fn find_by_name(&self, subject: &str, predicate: &str, object: &str) -> Option<BetId> {
        self.find(
            self.entity_id(subject)?,
            self.predicate_id(predicate)?,
            self.entity_id(object)?,
        )
    }

    pub fn intern_entity(&mut self, surface: &str) -> EntityId {
        if let Some(id) = self.entity_index.get(surface) {
            return *id;
        }
        let id = EntityId(self.entities.len() as u32);
        self.entities.push(Entity { id, surface: surface.to_owned() });
        self.entity_index.insert(surface.to_owned(), id);
        id
    }

    pub fn intern_predicate(&mut self, name: &str) -> PredicateId {
        if let Some(id) = self.predicate_index.get(name) {
            return *id;
        }
        let id = PredicateId(self.predicates.len() as u32);
        self.predicates.push(Predicate {
            id,
            name: name.to_owned(),
            domain: None,
            range: None,
            functional: false,
        });
        self.predicate_index.insert(name.to_owned(), id);
        id
    }

    /// Appends a belief and returns its id. Duplicated triples are rejected
    /// with `Error::DuplicateTriple` carrying `line` (0 when not file-backed).
    pub fn add_bet(
        &mut self,
        subject: &str,
        predicate: &str,
        object: &str,
        cost: f64,
        gold: Option<bool>,
        line: usize,
    ) -> Result<BetId> {
        if subject.is_empty() || predicate.is_empty() || object.is_empty() {
            return Err(Error::Parse { line, message: "empty field".into() });
        }
        if !(cost >= 0.0 && cost.is_finite()) {
            return Err(Error::Parse { line, message: format!("invalid cost {cost}") });
        }
        let s = self.intern_entity(subject);
        let p = self.intern_predicate(predicate);
        let o = self.intern_entity(object);
        if self.triple_index.contains_key(&(s, p, o)) {
            return Err(Error::DuplicateTriple {
                line,
                triple: format!("{subject} {predicate} {object}"),
            });
        }
        if predicate == CATEGORY_PREDICATE {
            self.categories.insert(object.to_owned());
        }
        let id = self.bets.len();
        self.bets.push(Bet { id, subject: s, predicate: p, object: o, cost, gold });
        self.triple_index.insert((s, p, o), id);
        Ok(id)
    }

    pub fn set_gold(&mut self, id: BetId, gold: Option<bool>) -> Result<()> {
        self.bets.get_mut(id).ok_or(Error::InvalidBet(id))?.gold = gold;
        Ok(())
    }

    pub fn set_functional(&mut self, name: &str, functional: bool) -> Result<()> {
        let id = self
            .predicate_id(name)
            .ok_or_else(|| Error::UnknownPredicate(name.to_owned()))?;
        self.predicates[id.0 as usize].functional = functional;
        Ok(())
    }

    pub fn set_signature(&mut self, name: &str, domain: &str, range: &str) -> Result<()> {
        let id = self
            .predicate_id(name)
            .ok_or_else(|| Error::UnknownPredicate(name.to_owned()))?;
        let pred = &mut self.predicates[id.0 as usize];
        pred.domain = Some(domain.to_owned());
        pred.range = Some(range.to_owned());
        self.categories.insert(domain.to_owned());
        self.categories.insert(range.to_owned());
        Ok(())
    }

    /// Categories asserted for an entity through `isA` beliefs, in BET order.
    pub fn categories_of(&self, entity: EntityId) -> Vec<&str> {
        let Some(is_a) = self.predicate_id(CATEGORY_PREDICATE) else {
            return Vec::new();
        };
        self.bets
            .iter()
            .filter(|b| b.predicate == is_a && b.subject == entity)
            .map(|b| self.entity(b.object).surface.as_str())
            .collect()
    }

    pub fn gold_labels(&self) -> Result<Vec<bool>> {
        self.bets
            .iter()
            .map(|b| b.gold.ok_or(Error::GoldIncomplete(b.id)))
            .collect()
    }

    pub fn has_complete_gold(&self) -> bool {
        self.bets.iter().all(|b| b.gold.is_some())
    }

    /// Φ(H): the mean gold label over every belief.
    pub fn overall_gold_accuracy(&self) -> Result<f64> {
        let gold = self.gold_labels()?;
        if gold.is_empty() {
            return Err(Error::InvalidValue("accuracy of an empty graph".into()));
        }
        Ok(gold.iter().filter(|&&g| g).count() as f64 / gold.len() as f64)
    }

    /// Writes the graph back in the triples format; the output reparses to an
    /// identical graph.
    pub fn write_triples<W: Write>(&self, mut out: W) -> Result<()> {
        for bet in &self.bets {
            let gold = match bet.gold {
                Some(true) => "1",
                Some(false) => "0",
                None => "-",
            };
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                self.entity(bet.subject).surface,
                self.predicate(bet.predicate).name,
                self.entity(bet.object).surface,
                gold,
                bet.cost
            )?;
        }
        Ok(())
    }

    pub fn triple_string(&self, id: BetId) -> String {
        let b = &self.bets[id];
        format!(
            "({}, {}, {})",
            self.entity(b.subject).surface,
            self.predicate(b.predicate).name,
            self.entity(b.object).surface
        )
    }
}

impl fmt::Display for KnowledgeGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} BETs, {} entities, {} predicates",
            self.bets.len(),
            self.entities.len(),
            self.predicates.len()
        )
    }
}

/// Parses tab-separated `subject predicate object [gold] [cost]` lines.
///
/// Blank lines and lines starting with `#` are skipped. A gold column of `-`
/// (or an empty column) leaves the label absent so a cost can still follow.
pub fn parse_triples<R: BufRead>(reader: R, default_cost: f64) -> Result<KnowledgeGraph> {
    let mut kg = KnowledgeGraph::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if !(3..=5).contains(&fields.len()) {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 3 to 5 tab-separated columns, found {}", fields.len()),
            });
        }
        let gold = match fields.get(3).map(|s| s.trim()) {
            None | Some("") | Some("-") => None,
            Some("1") => Some(true),
            Some("0") => Some(false),
            Some(other) => {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("gold label must be 0 or 1, found `{other}`"),
                })
            }
        };
        let cost = match fields.get(4).map(|s| s.trim()) {
            None | Some("") => default_cost,
            Some(raw) => {
                let cost: f64 = raw.parse().map_err(|_| Error::Parse {
                    line: line_no,
                    message: format!("cost `{raw}` is not a number"),
                })?;
                if !(cost >= 0.0 && cost.is_finite()) {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("cost must be non-negative, found {raw}"),
                    });
                }
                cost
            }
        };
        kg.add_bet(fields[0].trim(), fields[1].trim(), fields[2].trim(), cost, gold, line_no)?;
    }
    Ok(kg)
}

pub fn parse_triples_str(text: &str, default_cost: f64) -> Result<KnowledgeGraph> {
    parse_triples(text.as_bytes(), default_cost)
}

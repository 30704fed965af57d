//! Synthetic sports knowledge graphs with sound coupling rules and clustered
//! extraction errors.
//!
//! The world has athletes, teams, stadiums, cities, states and leagues. Five
//! functional base relations each come with an inverse, six derived
//! relations are compositions of base relations, teams in the same league
//! play against each other, and every team owns exactly one stadium. Rules are type constraints, inverse pairs and multi-hop paths,
//! all sound on the true world. False beliefs are injected in clusters that
//! mimic extraction errors: a wrong object together with its inverse twin and
//! the derived beliefs the rules tie to it, or a wrongly typed entity together
//! with the beliefs that use it in the wrong role.

use std::collections::{BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ground::ground;
use crate::kg::{KnowledgeGraph, CATEGORY_PREDICATE, DEFAULT_COST};
use crate::rules::{type_rules_from_signatures, Atom, Rule, RuleFile, Term};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub teams: usize,
    pub athletes_per_team: usize,
    pub cities: usize,
    pub states: usize,
    pub leagues: usize,
    /// Total BET count; true beliefs are subsampled to fit. `None` keeps them all.
    pub target_bets: Option<usize>,
    pub target_gold_acc: f64,
    pub rng_seed: u64,
}

impl SyntheticSpec {
    /// 1860 BETs, 18 predicates, 130 rules, gold accuracy 0.9134.
    pub fn nell(rng_seed: u64) -> Self {
        SyntheticSpec {
            teams: 42,
            athletes_per_team: 3,
            cities: 20,
            states: 8,
            leagues: 4,
            target_bets: Some(1860),
            target_gold_acc: 0.9134,
            rng_seed,
        }
    }

    /// A few hundred BETs, same rule profile.
    pub fn small(rng_seed: u64) -> Self {
        SyntheticSpec {
            teams: 8,
            athletes_per_team: 2,
            cities: 5,
            states: 3,
            leagues: 2,
            target_bets: None,
            target_gold_acc: 0.9,
            rng_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.target_gold_acc > 0.0 && self.target_gold_acc <= 1.0) {
            return Err(Error::InvalidValue(format!("target gold accuracy {} outside (0,1]", self.target_gold_acc)));
        }
        if self.teams < 2 || self.athletes_per_team == 0 || self.cities < 2 || self.states < 2 || self.leagues < 2 {
            return Err(Error::Infeasible(
                "need at least 2 teams, cities, states and leagues and 1 athlete per team".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub kg: KnowledgeGraph,
    pub rules: RuleFile,
}

// Base relations: name, inverse name, domain, range.
const BASE: [(&str, &str, &str, &str); 5] = [
    ("athletePlaysForTeam", "teamHasPlayer", "Athlete", "SportsTeam"),
    ("teamHomeStadium", "stadiumHomeOfTeam", "SportsTeam", "Stadium"),
    ("stadiumLocatedInCity", "cityHasStadium", "Stadium", "City"),
    ("teamPlaysInLeague", "leagueHasTeam", "SportsTeam", "League"),
    ("cityLocatedInState", "stateHasCity", "City", "State"),
];

const DERIVED: [(&str, &str, &str); 7] = [
    ("teamHomeCity", "SportsTeam", "City"),
    ("athletePlaysInStadium", "Athlete", "Stadium"),
    ("athletePlaysInCity", "Athlete", "City"),
    ("teamHomeState", "SportsTeam", "State"),
    ("athletePlaysInLeague", "Athlete", "League"),
    ("athletePlaysInState", "Athlete", "State"),
    ("teamPlaysAgainstTeam", "SportsTeam", "SportsTeam"),
];

const PF: usize = 0;
const HS: usize = 1;
const LI: usize = 2;
const PL: usize = 3;
const CS: usize = 4;
const TC: usize = 5;
const AS: usize = 6;
const AC: usize = 7;
const TS: usize = 8;
const AL: usize = 9;
const AZ: usize = 10;
/// Symmetric, its own inverse.
const PAT: usize = 11;
/// Head written with the inverse of `athletePlaysForTeam`.
const PF_INV: usize = 12;

fn relation_name(code: usize) -> &'static str {
    match code {
        0..=4 => BASE[code].0,
        5..=11 => DERIVED[code - 5].0,
        PF_INV => BASE[PF].1,
        _ => unreachable!("unknown relation code"),
    }
}

type Term3 = (usize, char, char);
type PathRule = (Term3, &'static [Term3]);

/// Path rules as (head, body); every base body atom may also be written with
/// its inverse, giving one rule per combination.
const PATHS: [PathRule; 28] = [
    ((TC, 't', 'c'), &[(HS, 't', 's'), (LI, 's', 'c')]),
    ((AS, 'x', 's'), &[(PF, 'x', 't'), (HS, 't', 's')]),
    ((AL, 'x', 'l'), &[(PF, 'x', 't'), (PL, 't', 'l')]),
    ((AC, 'x', 'c'), &[(PF, 'x', 't'), (HS, 't', 's'), (LI, 's', 'c')]),
    ((AC, 'x', 'c'), &[(AS, 'x', 's'), (LI, 's', 'c')]),
    ((AC, 'x', 'c'), &[(PF, 'x', 't'), (TC, 't', 'c')]),
    ((TS, 't', 'z'), &[(HS, 't', 's'), (LI, 's', 'c'), (CS, 'c', 'z')]),
    ((TS, 't', 'z'), &[(TC, 't', 'c'), (CS, 'c', 'z')]),
    ((PF, 'x', 't'), &[(AS, 'x', 's'), (HS, 't', 's')]),
    ((LI, 's', 'c'), &[(HS, 't', 's'), (TC, 't', 'c')]),
    ((TC, 't', 'c'), &[(PF, 'x', 't'), (AC, 'x', 'c')]),
    ((HS, 't', 's'), &[(PF, 'x', 't'), (AS, 'x', 's')]),
    ((CS, 'c', 'z'), &[(HS, 't', 's'), (LI, 's', 'c'), (TS, 't', 'z')]),
    ((AC, 'x', 'c'), &[(AS, 'x', 's'), (HS, 't', 's'), (TC, 't', 'c')]),
    ((TS, 't', 'z'), &[(PF, 'x', 't'), (AC, 'x', 'c'), (CS, 'c', 'z')]),
    ((AL, 'x', 'l'), &[(AS, 'x', 's'), (HS, 't', 's'), (PL, 't', 'l')]),
    ((PL, 't', 'l'), &[(PF, 'x', 't'), (AL, 'x', 'l')]),
    ((LI, 's', 'c'), &[(AS, 'x', 's'), (AC, 'x', 'c')]),
    ((CS, 'c', 'z'), &[(PF, 'x', 't'), (AC, 'x', 'c'), (TS, 't', 'z')]),
    ((TC, 't', 'c'), &[(HS, 't', 's'), (AS, 'x', 's'), (AC, 'x', 'c')]),
    ((PF_INV, 't', 'x'), &[(AS, 'x', 's'), (HS, 't', 's')]),
    ((PAT, 't', 'u'), &[(PL, 't', 'l'), (PL, 'u', 'l')]),
    ((AZ, 'x', 'z'), &[(PF, 'x', 't'), (TS, 't', 'z')]),
    ((AZ, 'x', 'z'), &[(AC, 'x', 'c'), (CS, 'c', 'z')]),
    ((AZ, 'x', 'z'), &[(PF, 'x', 't'), (TC, 't', 'c'), (CS, 'c', 'z')]),
    ((PL, 'u', 'l'), &[(PAT, 't', 'u'), (PL, 't', 'l')]),
    ((AL, 'x', 'l'), &[(PF, 'x', 't'), (PAT, 't', 'u'), (PL, 'u', 'l')]),
    ((TS, 't', 'z'), &[(PF, 'x', 't'), (AZ, 'x', 'z')]),
];

const WEIGHT_TYPE: f64 = 1.0;
const WEIGHT_INVERSE: f64 = 1.0;
const WEIGHT_PATH2: f64 = 0.9;
const WEIGHT_PATH3: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Fact {
    s: String,
    p: &'static str,
    o: String,
}

fn fact(s: &str, p: &'static str, o: &str) -> Fact {
    Fact { s: s.to_owned(), p, o: o.to_owned() }
}

struct World {
    athletes: Vec<String>,
    teams: Vec<String>,
    stadiums: Vec<String>,
    cities: Vec<String>,
    states: Vec<String>,
    leagues: Vec<String>,
    team_of: Vec<usize>,
    team_city: Vec<usize>,
    team_league: Vec<usize>,
    city_state: Vec<usize>,
}

impl World {
    fn new(spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> Self {
        let names = |prefix: &str, n: usize| -> Vec<String> { (0..n).map(|i| format!("{prefix}_{i:03}")).collect() };
        let athletes = names("athlete", spec.teams * spec.athletes_per_team);
        let team_of = (0..athletes.len()).map(|i| i / spec.athletes_per_team).collect();
        // Every state and league gets used before repeats.
        let spread = |n: usize, k: usize, rng: &mut ChaCha8Rng| -> Vec<usize> {
            let mut v: Vec<usize> = (0..n).map(|i| i % k).collect();
            v.shuffle(rng);
            v
        };
        World {
            athletes,
            teams: names("team", spec.teams),
            stadiums: names("stadium", spec.teams),
            cities: names("city", spec.cities),
            states: names("state", spec.states),
            leagues: names("league", spec.leagues),
            team_of,
            team_city: spread(spec.teams, spec.cities, rng),
            team_league: spread(spec.teams, spec.leagues, rng),
            city_state: spread(spec.cities, spec.states, rng),
        }
    }

    fn city_of(&self, team: usize) -> &str {
        &self.cities[self.team_city[team]]
    }

    fn state_of(&self, team: usize) -> &str {
        &self.states[self.city_state[self.team_city[team]]]
    }

    fn true_facts(&self) -> Vec<Fact> {
        let mut out = Vec::new();
        let mut both = |base: usize, s: &str, o: &str| {
            out.push(fact(s, BASE[base].0, o));
            out.push(fact(o, BASE[base].1, s));
        };
        for (t, team) in self.teams.iter().enumerate() {
            both(HS, team, &self.stadiums[t]);
            both(PL, team, &self.leagues[self.team_league[t]]);
            both(LI, &self.stadiums[t], &self.cities[self.team_city[t]]);
        }
        for (c, city) in self.cities.iter().enumerate() {
            both(CS, city, &self.states[self.city_state[c]]);
        }
        for (x, athlete) in self.athletes.iter().enumerate() {
            both(PF, athlete, &self.teams[self.team_of[x]]);
        }
        for (t, team) in self.teams.iter().enumerate() {
            out.push(fact(team, relation_name(TC), self.city_of(t)));
            out.push(fact(team, relation_name(TS), self.state_of(t)));
            for u in (0..self.teams.len()).filter(|&u| u != t && self.team_league[u] == self.team_league[t]) {
                out.push(fact(team, relation_name(PAT), &self.teams[u]));
            }
        }
        for (x, athlete) in self.athletes.iter().enumerate() {
            let t = self.team_of[x];
            out.push(fact(athlete, relation_name(AS), &self.stadiums[t]));
            out.push(fact(athlete, relation_name(AC), self.city_of(t)));
            out.push(fact(athlete, relation_name(AL), &self.leagues[self.team_league[t]]));
            out.push(fact(athlete, relation_name(AZ), self.state_of(t)));
        }
        for (names, cat) in [
            (&self.athletes, "Athlete"),
            (&self.teams, "SportsTeam"),
            (&self.stadiums, "Stadium"),
            (&self.cities, "City"),
            (&self.states, "State"),
            (&self.leagues, "League"),
        ] {
            for e in names {
                out.push(fact(e, CATEGORY_PREDICATE, cat));
            }
        }
        out
    }

    /// One cluster of related false beliefs.
    fn error_cluster(&self, rng: &mut ChaCha8Rng) -> Vec<Fact> {
        let mut out = Vec::new();
        let pick_other = |n: usize, not: usize, rng: &mut ChaCha8Rng| loop {
            let v = rng.gen_range(0..n);
            if v != not {
                break v;
            }
        };
        match rng.gen_range(0..6) {
            // Athlete credited to the wrong team.
            0 | 1 => {
                let x = rng.gen_range(0..self.athletes.len());
                let t2 = pick_other(self.teams.len(), self.team_of[x], rng);
                let a = &self.athletes[x];
                out.push(fact(a, BASE[PF].0, &self.teams[t2]));
                out.push(fact(&self.teams[t2], BASE[PF].1, a));
                out.push(fact(a, relation_name(AS), &self.stadiums[t2]));
            }
            // Stadium placed in the wrong city.
            2 => {
                let t = rng.gen_range(0..self.teams.len());
                let city = &self.cities[pick_other(self.cities.len(), self.team_city[t], rng)];
                out.push(fact(&self.stadiums[t], BASE[LI].0, city));
                out.push(fact(city, BASE[LI].1, &self.stadiums[t]));
                out.push(fact(&self.teams[t], relation_name(TC), city));
                for x in (0..self.athletes.len()).filter(|&x| self.team_of[x] == t) {
                    out.push(fact(&self.athletes[x], relation_name(AC), city));
                }
            }
            // Two teams from different leagues said to play each other.
            3 => {
                let t = rng.gen_range(0..self.teams.len());
                let others: Vec<usize> =
                    (0..self.teams.len()).filter(|&u| self.team_league[u] != self.team_league[t]).collect();
                if let Some(&u) = others.choose(rng) {
                    out.push(fact(&self.teams[t], relation_name(PAT), &self.teams[u]));
                    out.push(fact(&self.teams[u], relation_name(PAT), &self.teams[t]));
                }
            }
            // A city mistaken for a stadium and used as one.
            4 => {
                let city = &self.cities[rng.gen_range(0..self.cities.len())];
                out.push(fact(city, CATEGORY_PREDICATE, "Stadium"));
                let t = rng.gen_range(0..self.teams.len());
                out.push(fact(&self.teams[t], BASE[HS].0, city));
                out.push(fact(city, BASE[HS].1, &self.teams[t]));
                for x in (0..self.athletes.len()).filter(|&x| self.team_of[x] == t).take(2) {
                    out.push(fact(&self.athletes[x], relation_name(AS), city));
                }
            }
            // An athlete mistaken for a team and given team-mates.
            _ => {
                let x = rng.gen_range(0..self.athletes.len());
                let a = &self.athletes[x];
                out.push(fact(a, CATEGORY_PREDICATE, "SportsTeam"));
                for y in (0..self.athletes.len()).filter(|&y| y != x && self.team_of[y] == self.team_of[x]) {
                    out.push(fact(&self.athletes[y], BASE[PF].0, a));
                    out.push(fact(a, BASE[PF].1, &self.athletes[y]));
                }
            }
        }
        out
    }
}

fn atom(kg: &KnowledgeGraph, name: &str, s: char, o: char) -> Result<Atom> {
    let predicate = kg.predicate_id(name).ok_or_else(|| Error::UnknownPredicate(name.to_owned()))?;
    Ok(Atom { predicate, subject: Term::Var(s.to_string()), object: Term::Var(o.to_string()) })
}

fn build_rules(kg: &KnowledgeGraph) -> Result<Vec<Rule>> {
    let mut rules = type_rules_from_signatures(kg, WEIGHT_TYPE, 0)?;
    for (name, inverse, _, _) in BASE {
        let id = rules.len();
        rules.push(Rule::new(id, vec![atom(kg, name, 'x', 'y')?], atom(kg, inverse, 'y', 'x')?, WEIGHT_INVERSE, kg)?);
        let id = rules.len();
        rules.push(Rule::new(id, vec![atom(kg, inverse, 'y', 'x')?], atom(kg, name, 'x', 'y')?, WEIGHT_INVERSE, kg)?);
    }
    let symmetric = relation_name(PAT);
    let id = rules.len();
    rules.push(Rule::new(id, vec![atom(kg, symmetric, 'x', 'y')?], atom(kg, symmetric, 'y', 'x')?, WEIGHT_INVERSE, kg)?);
    for ((hp, hs, ho), body) in PATHS {
        let head = atom(kg, relation_name(hp), hs, ho)?;
        let base_atoms: Vec<usize> = (0..body.len()).filter(|&i| body[i].0 <= CS).collect();
        let weight = if body.len() == 2 { WEIGHT_PATH2 } else { WEIGHT_PATH3 };
        for mask in 0..(1usize << base_atoms.len()) {
            let atoms = body
                .iter()
                .enumerate()
                .map(|(i, &(p, s, o))| match base_atoms.iter().position(|&b| b == i) {
                    Some(bit) if mask >> bit & 1 == 1 => atom(kg, BASE[p].1, o, s),
                    _ => atom(kg, relation_name(p), s, o),
                })
                .collect::<Result<Vec<_>>>()?;
            let id = rules.len();
            rules.push(Rule::new(id, atoms, head.clone(), weight, kg)?);
        }
    }
    Ok(rules)
}

/// Generates a graph, its rules file and gold labels, deterministically per seed.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let world = World::new(spec, &mut rng);
    let mut truths = world.true_facts();
    let (n_true, n_false) = match spec.target_bets {
        Some(total) => {
            let n_false = ((1.0 - spec.target_gold_acc) * total as f64).round() as usize;
            (total - n_false, n_false)
        }
        None => {
            let n_true = truths.len();
            (n_true, ((1.0 - spec.target_gold_acc) * n_true as f64 / spec.target_gold_acc).round() as usize)
        }
    };
    if n_true > truths.len() {
        return Err(Error::Infeasible(format!("{n_true} true beliefs requested but the world has {}", truths.len())));
    }
    truths.shuffle(&mut rng);
    truths.truncate(n_true);
    let mut seen: HashSet<Fact> = world.true_facts().into_iter().collect();
    let mut falsehoods: Vec<Fact> = Vec::with_capacity(n_false);
    let mut attempts = 0;
    while falsehoods.len() < n_false {
        attempts += 1;
        if attempts > 100 * (n_false + 10) {
            return Err(Error::Infeasible(format!("could not place {n_false} distinct false beliefs")));
        }
        for f in world.error_cluster(&mut rng) {
            if falsehoods.len() < n_false && seen.insert(f.clone()) {
                falsehoods.push(f);
            }
        }
    }

    let mut rows: Vec<(Fact, bool)> =
        truths.into_iter().map(|f| (f, true)).chain(falsehoods.into_iter().map(|f| (f, false))).collect();
    rows.shuffle(&mut rng);
    let mut kg = KnowledgeGraph::new();
    for (f, gold) in &rows {
        kg.add_bet(&f.s, f.p, &f.o, DEFAULT_COST, Some(*gold), 0)?;
    }
    let mut file = RuleFile::default();
    for (name, inverse, domain, range) in BASE {
        file.functional.insert(name.to_owned());
        file.signatures.insert(name.to_owned(), (domain.to_owned(), range.to_owned()));
        file.signatures.insert(inverse.to_owned(), (range.to_owned(), domain.to_owned()));
    }
    for (name, domain, range) in DERIVED {
        file.signatures.insert(name.to_owned(), (domain.to_owned(), range.to_owned()));
    }
    let present: BTreeSet<String> = kg.bets().iter().map(|b| kg.predicate(b.predicate).name.clone()).collect();
    file.functional.retain(|p| present.contains(p));
    file.signatures.retain(|p, _| present.contains(p));
    // Rules may only mention predicates the graph knows about.
    for name in BASE.iter().flat_map(|b| [b.0, b.1]).chain(DERIVED.iter().map(|d| d.0)).chain([CATEGORY_PREDICATE]) {
        kg.intern_predicate(name);
    }
    file.apply_ontology(&mut kg)?;
    let rules = build_rules(&kg)?;
    let mentioned_ok = |r: &Rule| {
        r.body.iter().chain([&r.head]).all(|a| present.contains(&kg.predicate(a.predicate).name))
    };
    file.rules = rules.into_iter().filter(mentioned_ok).enumerate().map(|(i, r)| Rule { id: i, ..r }).collect();

    check_soundness(&kg, &file.rules)?;
    Ok(SyntheticData { kg, rules: file })
}

/// Every grounding whose body is gold-true must have a gold-true head.
fn check_soundness(kg: &KnowledgeGraph, rules: &[Rule]) -> Result<()> {
    let ecg = ground(kg, rules)?;
    let gold = kg.gold_labels()?;
    for c in ecg.constraints() {
        if c.body.iter().all(|&b| gold[b]) && !gold[c.head] {
            return Err(Error::Infeasible(format!(
                "rule {} derives false belief {} from true beliefs",
                c.rule,
                kg.triple_string(c.head)
            )));
        }
    }
    Ok(())
}

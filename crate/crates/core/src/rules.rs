//! Weighted coupling rules (Horn clauses and type constraints) and the rules
//! file format.
//!
//! ```text
//! # comment
//! 0.9: homeStadiumOf(x,y) -> isA(y,"sportsTeam")
//! 0.8: homeStadiumOf(x,y) & homeCity(y,z) -> stadiumLocatedInCity(x,z)
//! @functional homeCity
//! @signature homeStadiumOf Stadium SportsTeam
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{KnowledgeGraph, PredicateId, CATEGORY_PREDICATE};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(String),
    Const(String),
}

impl Term {
    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Atom {
    pub predicate: PredicateId,
    pub subject: Term,
    pub object: Term,
}

impl Atom {
    pub fn vars(&self) -> impl Iterator<Item = &str> {
        [&self.subject, &self.object].into_iter().filter_map(|t| match t {
            Term::Var(v) => Some(v.as_str()),
            Term::Const(_) => None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    TypeConstraint,
    HornClause,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub id: usize,
    pub body: Vec<Atom>,
    pub head: Atom,
    pub weight: f64,
    pub kind: RuleKind,
}

impl Rule {
    /// Validates the rule and derives its kind.
    pub fn new(id: usize, body: Vec<Atom>, head: Atom, weight: f64, kg: &KnowledgeGraph) -> Result<Self> {
        if !(weight >= 0.0 && weight.is_finite()) {
            return Err(Error::InvalidValue(format!("rule weight must be non-negative, found {weight}")));
        }
        if body.is_empty() {
            return Err(Error::InvalidValue("rule body must contain at least one atom".into()));
        }
        let body_vars: BTreeSet<&str> = body.iter().flat_map(Atom::vars).collect();
        if let Some(v) = head.vars().find(|v| !body_vars.contains(v)) {
            return Err(Error::InvalidValue(format!("head variable `{v}` does not appear in the body")));
        }
        let is_category = kg.predicate(head.predicate).name == CATEGORY_PREDICATE;
        let kind = if body.len() == 1 && is_category {
            RuleKind::TypeConstraint
        } else {
            RuleKind::HornClause
        };
        Ok(Rule { id, body, head, weight, kind })
    }

    pub fn body_len(&self) -> usize {
        self.body.len()
    }

    /// Renders the rule in the file syntax.
    pub fn render(&self, kg: &KnowledgeGraph) -> String {
        let mut out = String::new();
        let _ = write!(out, "{}: ", self.weight);
        for (i, atom) in self.body.iter().enumerate() {
            if i > 0 {
                out.push_str(" & ");
            }
            out.push_str(&render_atom(atom, kg));
        }
        out.push_str(" -> ");
        out.push_str(&render_atom(&self.head, kg));
        out
    }
}

fn render_term(t: &Term) -> String {
    match t {
        Term::Var(v) => v.clone(),
        Term::Const(c) => format!("\"{c}\""),
    }
}

fn render_atom(atom: &Atom, kg: &KnowledgeGraph) -> String {
    format!(
        "{}({},{})",
        kg.predicate(atom.predicate).name,
        render_term(&atom.subject),
        render_term(&atom.object)
    )
}

/// Everything a rules file may declare.
#[derive(Debug, Clone, Default)]
pub struct RuleFile {
    pub rules: Vec<Rule>,
    pub functional: BTreeSet<String>,
    pub signatures: BTreeMap<String, (String, String)>,
}

impl RuleFile {
    /// Copies functional flags and signatures onto the graph's predicates.
    pub fn apply_ontology(&self, kg: &mut KnowledgeGraph) -> Result<()> {
        for name in &self.functional {
            kg.set_functional(name, true)?;
        }
        for (name, (domain, range)) in &self.signatures {
            kg.set_signature(name, domain, range)?;
        }
        Ok(())
    }

    pub fn write<W: Write>(&self, kg: &KnowledgeGraph, mut out: W) -> Result<()> {
        for rule in &self.rules {
            writeln!(out, "{}", rule.render(kg))?;
        }
        for name in &self.functional {
            writeln!(out, "@functional {name}")?;
        }
        for (name, (domain, range)) in &self.signatures {
            writeln!(out, "@signature {name} {domain} {range}")?;
        }
        Ok(())
    }
}

/// Parses the rules of a rules file, resolving predicates against `kg`.
pub fn parse_rules<R: BufRead>(reader: R, kg: &KnowledgeGraph) -> Result<Vec<Rule>> {
    parse_rule_file(reader, kg).map(|f| f.rules)
}

pub fn parse_rule_file<R: BufRead>(reader: R, kg: &KnowledgeGraph) -> Result<RuleFile> {
    let mut file = RuleFile::default();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let at = |e: Error| match e {
            Error::Parse { .. } => e,
            other => Error::Parse { line: line_no, message: other.to_string() },
        };
        if let Some(directive) = line.strip_prefix('@') {
            parse_directive(directive, kg, &mut file).map_err(at)?;
            continue;
        }
        let rule = parse_rule_line(line, file.rules.len(), kg).map_err(at)?;
        file.rules.push(rule);
    }
    Ok(file)
}

pub fn parse_rules_str(text: &str, kg: &KnowledgeGraph) -> Result<Vec<Rule>> {
    parse_rules(text.as_bytes(), kg)
}

fn parse_directive(text: &str, kg: &KnowledgeGraph, file: &mut RuleFile) -> Result<()> {
    let words: Vec<&str> = text.split_whitespace().collect();
    let known = |name: &str| {
        kg.predicate_id(name)
            .map(|_| ())
            .ok_or_else(|| Error::UnknownPredicate(name.to_owned()))
    };
    match words.as_slice() {
        ["functional", name] => {
            known(name)?;
            file.functional.insert((*name).to_owned());
        }
        ["signature", name, domain, range] => {
            known(name)?;
            file.signatures
                .insert((*name).to_owned(), ((*domain).to_owned(), (*range).to_owned()));
        }
        _ => return Err(Error::InvalidValue(format!("unrecognised directive `@{text}`"))),
    }
    Ok(())
}

fn parse_rule_line(line: &str, id: usize, kg: &KnowledgeGraph) -> Result<Rule> {
    let (weight, clause) = line
        .split_once(':')
        .ok_or_else(|| Error::InvalidValue("expected `weight: body -> head`".into()))?;
    let weight: f64 = weight
        .trim()
        .parse()
        .map_err(|_| Error::InvalidValue(format!("weight `{}` is not a number", weight.trim())))?;
    let (body, head) = clause
        .split_once("->")
        .ok_or_else(|| Error::InvalidValue("missing `->`".into()))?;
    let body = body
        .split('&')
        .map(|a| parse_atom(a.trim(), kg))
        .collect::<Result<Vec<_>>>()?;
    let head = parse_atom(head.trim(), kg)?;
    Rule::new(id, body, head, weight, kg)
}

fn parse_atom(text: &str, kg: &KnowledgeGraph) -> Result<Atom> {
    let open = text
        .find('(')
        .ok_or_else(|| Error::InvalidValue(format!("atom `{text}` lacks `(`")))?;
    let inner = text[open + 1..]
        .strip_suffix(')')
        .ok_or_else(|| Error::InvalidValue(format!("atom `{text}` lacks `)`")))?;
    let name = text[..open].trim();
    if !is_identifier(name) {
        return Err(Error::InvalidValue(format!("bad predicate name `{name}`")));
    }
    let predicate = kg
        .predicate_id(name)
        .ok_or_else(|| Error::UnknownPredicate(name.to_owned()))?;
    let args = split_args(inner)?;
    if args.len() != 2 {
        return Err(Error::InvalidValue(format!("atom `{text}` must have exactly two arguments")));
    }
    Ok(Atom {
        predicate,
        subject: parse_term(args[0])?,
        object: parse_term(args[1])?,
    })
}

fn split_args(inner: &str) -> Result<Vec<&str>> {
    let mut args = Vec::new();
    let mut start = 0;
    let mut quoted = false;
    for (i, c) in inner.char_indices() {
        match c {
            '"' => quoted = !quoted,
            ',' if !quoted => {
                args.push(inner[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    if quoted {
        return Err(Error::InvalidValue(format!("unterminated quote in `{inner}`")));
    }
    args.push(inner[start..].trim());
    Ok(args)
}

fn parse_term(text: &str) -> Result<Term> {
    if let Some(c) = text.strip_prefix('"').and_then(|t| t.strip_suffix('"')) {
        if c.is_empty() {
            return Err(Error::InvalidValue("empty constant".into()));
        }
        return Ok(Term::Const(c.to_owned()));
    }
    let lower_start = text.chars().next().is_some_and(|c| c.is_ascii_lowercase());
    if lower_start && is_identifier(text) {
        Ok(Term::Var(text.to_owned()))
    } else {
        Err(Error::InvalidValue(format!(
            "`{text}` is neither a lowercase variable nor a quoted constant"
        )))
    }
}

fn is_identifier(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Builds `p(x,y) -> isA(x,"D")` and `p(x,y) -> isA(y,"R")` for every
/// predicate carrying a signature. Rule ids continue from `first_id`.
pub fn type_rules_from_signatures(kg: &KnowledgeGraph, weight: f64, first_id: usize) -> Result<Vec<Rule>> {
    let Some(is_a) = kg.predicate_id(CATEGORY_PREDICATE) else {
        return Ok(Vec::new());
    };
    let mut rules = Vec::new();
    for pred in kg.predicates() {
        let (Some(domain), Some(range)) = (&pred.domain, &pred.range) else {
            continue;
        };
        let body = Atom {
            predicate: pred.id,
            subject: Term::Var("x".into()),
            object: Term::Var("y".into()),
        };
        for (var, cat) in [("x", domain), ("y", range)] {
            let head = Atom {
                predicate: is_a,
                subject: Term::Var(var.into()),
                object: Term::Const(cat.clone()),
            };
            rules.push(Rule::new(first_id + rules.len(), vec![body.clone()], head, weight, kg)?);
        }
    }
    Ok(rules)
}

/// Removes rules whose body length is listed, then renumbers the survivors.
pub fn ablate_rules(rules: &[Rule], drop_body_lengths: &BTreeSet<usize>) -> Vec<Rule> {
    rules
        .iter()
        .filter(|r| !drop_body_lengths.contains(&r.body_len()))
        .enumerate()
        .map(|(i, r)| Rule { id: i, ..r.clone() })
        .collect()
}

//! Accuracy estimation for knowledge graphs by crowd evaluation of a few
//! beliefs, propagated to the rest through weighted Horn-clause coupling
//! constraints and soft-logic MAP inference.

pub mod control;
pub mod crowd;
pub mod error;
pub mod estimator;
pub mod inference;
pub mod ground;
pub mod kg;
pub mod rules;
pub mod scalar;
pub mod solver;

pub use error::{Error, Result};
pub use ground::{ground, Ecg, GroundedConstraint};
pub use kg::{parse_triples, parse_triples_str, Bet, BetId, KnowledgeGraph, CATEGORY_PREDICATE, DEFAULT_COST};
pub use rules::{ablate_rules, parse_rule_file, parse_rules, parse_rules_str, Rule, RuleFile, RuleKind};
pub use scalar::Scalar;
pub use inference::{
    class_mass_normalize, energy, energy_gradient, lukasiewicz_body, map_solve, potential, threshold_labels, Evidence,
};

/// Concrete double-precision aliases.
pub type Assignment = inference::Assignment<f64>;
pub type InferenceConfig = inference::InferenceConfig<f64>;
pub type InferenceResult = inference::InferenceResult<f64>;
pub type InferenceSession<'a> = inference::InferenceSession<'a, f64>;

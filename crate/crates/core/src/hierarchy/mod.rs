//! Arithmetical-hierarchy experiments: bounded evaluation of quantified
//! predicates, the accelerated and ω-stage deciders, iterated jumps and a
//! capability battery.

pub mod formula;
pub mod jumps;
pub mod omega;
pub mod predicate;
pub mod suite;

pub use formula::{parse_formula, prenex, Formula, FormulaError, QuantKind, Quantifier, Term, Tri};
pub use jumps::{iterate_jump_codes, iterate_jump_experiment, JumpExperiment, JumpLevel};
pub use omega::{
    exact_small_set, omega_simulates_oracle_machine, BoundedHalters, BranchReport, BranchStatus, Evidence, HaltingSet,
    Kill, OmegaRun, QueryProcess, SemiDecider,
};
pub use predicate::{
    accelerated_decides_sigma1, eval_bounded, pack, sentence_to_predicate, HierError, Kernel, Predicate, ThreeValued,
};
pub use suite::{capability_suite, CapabilityReport, Instance, Section, SuiteConfig};

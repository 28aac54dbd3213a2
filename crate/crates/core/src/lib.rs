//! Budgeted simulators for Turing machines and for machine models that
//! exceed them: oracle machines, inscribed and coupled tapes, asynchronous
//! networks, error-prone and probabilistic machines, infinite-state tables,
//! ordinal-time machines and fair nondeterminism.
//!
//! Every infinite resource is replaced by a finite, explicit budget. Runs end
//! in one of three ways: a halt, a replayable proof of non-halting, or an
//! honest "budget exceeded" with the frontier configuration.

pub mod acceptance;
pub mod ait;
pub mod detect;
pub mod dovetail;
pub mod godel;
pub mod hierarchy;
pub mod lang;
pub mod machine;
pub mod nondet;
pub mod ordinal;
pub mod par;
pub mod relativized;

#[cfg(test)]
pub(crate) mod testutil;

pub use detect::{Certificate, LoopDetector};
pub use lang::{parse, serialize, ParseDiagnostic, ParseError};
pub use machine::{
    decode_unary, encode_unary, run, step, Configuration, Direction, Instruction, Machine, MachineError, RunError,
    RunOutcome, Symbol, Tape,
};

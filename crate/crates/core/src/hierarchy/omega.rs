//! Deciding a Δ₂ question in ω steps: simulate an oracle machine without
//! its oracle by branching on every call, and let side simulations of the
//! queries prune the branches whose guesses were wrong.
//!
//! Branches are ordered by their guesses, a "nonmember" guess to the left
//! of a "member" one. A query that is really a member is eventually seen
//! to be one and the branch that guessed otherwise dies; a nonmember is
//! never confirmed, but its branch sits further left. In the limit the
//! leftmost survivor is the true computation, and whatever it outputs is
//! what gets published.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::detect::{Certificate, LoopDetector};
use crate::godel;
use crate::machine::{decode_unary, encode_unary, step_in_place, Configuration, Machine, Step, Tape};
use crate::relativized::{
    oracle_step, run_oracle_program, FiniteSet, OStep, OracleAnswer, OracleProgram, OracleSource, RelError,
};

use super::predicate::HierError;

/// Why a query's membership is settled.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "evidence", rename_all = "snake_case")]
pub enum Evidence {
    /// The queried computation halted after `steps` steps.
    Halted { steps: u64 },
    /// It provably never halts.
    Certificate { certificate: Certificate },
    /// It fell off the left edge of the tape at step `steps`.
    LeftEdge { steps: u64 },
    /// It ran past the step bound that defines the set.
    OverBound { steps: u64 },
    /// It turned up as the `position`-th element of an enumeration.
    Listed { position: u64 },
}

impl Evidence {
    pub fn member(&self) -> bool {
        matches!(self, Evidence::Halted { .. } | Evidence::Listed { .. })
    }
}

/// A running membership check for one query.
pub trait QueryProcess: Send {
    /// One step; `Some` once membership is settled.
    fn step(&mut self) -> Option<Evidence>;
}

/// The set being queried, as something that spawns membership checks.
pub trait SemiDecider: Send + Sync {
    fn spawn(&self, query: u64) -> Box<dyn QueryProcess>;
}

/// The halting set over 64-bit codes: runs the coded pair with loop
/// detection.
#[derive(Clone, Copy, Debug, Default)]
pub struct HaltingSet;

/// Codes whose pair halts within `steps` steps. Decidable, so both sides
/// get settled.
#[derive(Clone, Copy, Debug)]
pub struct BoundedHalters {
    pub steps: u64,
}

struct Simulation {
    machine: Machine,
    config: Configuration,
    detector: LoopDetector,
    bound: Option<u64>,
}

impl Simulation {
    fn new(query: u64, bound: Option<u64>) -> Self {
        let (machine, input) = godel::decode_code(query);
        let config = Configuration::initial(encode_unary(input));
        let mut detector = LoopDetector::new();
        detector.observe(&config);
        Simulation {
            machine,
            config,
            detector,
            bound,
        }
    }
}

impl QueryProcess for Simulation {
    fn step(&mut self) -> Option<Evidence> {
        let steps = self.config.steps;
        match step_in_place(&mut self.config, &self.machine) {
            Ok(Step::Halted) => return Some(Evidence::Halted { steps }),
            Err(_) => return Some(Evidence::LeftEdge { steps }),
            Ok(Step::Moved) => {}
        }
        if let Some(b) = self.bound {
            if self.config.steps > b {
                return Some(Evidence::OverBound {
                    steps: self.config.steps,
                });
            }
        }
        self.detector
            .observe(&self.config)
            .map(|certificate| Evidence::Certificate { certificate })
    }
}

impl SemiDecider for HaltingSet {
    fn spawn(&self, query: u64) -> Box<dyn QueryProcess> {
        Box::new(Simulation::new(query, None))
    }
}

impl SemiDecider for BoundedHalters {
    fn spawn(&self, query: u64) -> Box<dyn QueryProcess> {
        Box::new(Simulation::new(query, Some(self.steps)))
    }
}

/// Walks through the members one per step. Nonmembers are never
/// confirmed, as with any set that is only listed.
struct Listing {
    members: Vec<u64>,
    query: u64,
    at: usize,
}

impl QueryProcess for Listing {
    fn step(&mut self) -> Option<Evidence> {
        let m = *self.members.get(self.at)?;
        self.at += 1;
        (m == self.query).then_some(Evidence::Listed {
            position: self.at as u64 - 1,
        })
    }
}

impl SemiDecider for FiniteSet {
    fn spawn(&self, query: u64) -> Box<dyn QueryProcess> {
        Box::new(Listing {
            members: self.iter().filter_map(|n| u64::try_from(n).ok()).collect(),
            query,
            at: 0,
        })
    }
}

/// The exact finite set `{q < limit : q ∈ set}`, by running each check to
/// the end (at most `budget` steps each).
pub fn exact_small_set(set: &dyn SemiDecider, limit: u64, budget: u64) -> Option<FiniteSet> {
    let mut out = FiniteSet::empty();
    for q in 0..limit {
        let mut p = set.spawn(q);
        let evidence = (0..budget).find_map(|_| p.step())?;
        if evidence.member() {
            out.insert(q);
        }
    }
    Some(out)
}

/// The guesses a branch has made, answering in their place.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
struct Guesses(Vec<(u64, bool)>);

impl OracleSource for Guesses {
    fn query_big(&self, n: &BigUint) -> OracleAnswer {
        match u64::try_from(n) {
            Ok(v) => self.query(v),
            Err(_) => OracleAnswer::Unknown,
        }
    }
    fn query(&self, n: u64) -> OracleAnswer {
        self.0
            .iter()
            .find(|(q, _)| *q == n)
            .map_or(OracleAnswer::Unknown, |(_, b)| OracleAnswer::from_bool(*b))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum BranchStatus {
    Running,
    /// Halted; `output` is the unary reading of the tape, if it is one.
    Halted {
        output: Option<u64>,
        tape: String,
    },
    Crashed {
        reason: String,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchReport {
    /// Guesses in the order the queries were made.
    pub guesses: Vec<(u64, bool)>,
    pub status: BranchStatus,
    pub steps: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Kill {
    pub round: u64,
    pub guesses: Vec<(u64, bool)>,
    pub query: u64,
    /// The guess that was refuted.
    pub guessed: bool,
    pub evidence: Evidence,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OmegaRun {
    /// Output of the leftmost surviving branch, if it has halted.
    pub published: Option<u64>,
    /// The leftmost survivor has halted and every one of its guesses is
    /// confirmed, so no later stage can change `published`.
    pub resolved: bool,
    pub rounds: u64,
    /// Surviving branches, left to right.
    pub branches: Vec<BranchReport>,
    pub audit: Vec<Kill>,
    /// Output of the direct run against the exact oracle.
    pub expected: Option<u64>,
}

struct Branch {
    guesses: Guesses,
    config: Configuration,
    status: BranchStatus,
}

impl Branch {
    fn key(&self) -> Vec<bool> {
        self.guesses.0.iter().map(|g| g.1).collect()
    }
}

/// Runs the branching simulation for at most `rounds` rounds. A round
/// gives every live branch and every pending membership check one step.
///
/// `exact_oracle` must make `prog` halt within `rounds` steps; the direct
/// run supplies `expected`.
pub fn omega_simulates_oracle_machine<P: OracleProgram + ?Sized>(
    prog: &P,
    input: Tape,
    set: &dyn SemiDecider,
    exact_oracle: &FiniteSet,
    rounds: u64,
) -> Result<OmegaRun, HierError> {
    let direct = run_oracle_program(prog, exact_oracle, input.clone(), rounds, false)
        .map_err(|e| HierError::Precondition(e.to_string()))?;
    if !direct.outcome.is_halted() {
        return Err(HierError::Precondition(format!(
            "the machine does not halt against the exact oracle within {rounds} steps"
        )));
    }
    let expected = direct.output();

    let mut branches = vec![Branch {
        guesses: Guesses::default(),
        config: Configuration::initial(input),
        status: BranchStatus::Running,
    }];
    let mut processes: BTreeMap<u64, Box<dyn QueryProcess>> = BTreeMap::new();
    let mut settled: BTreeMap<u64, Evidence> = BTreeMap::new();
    let mut audit = Vec::new();
    let mut round = 0;
    let resolved = |branches: &[Branch], settled: &BTreeMap<u64, Evidence>| {
        branches.first().is_some_and(|b| {
            !matches!(b.status, BranchStatus::Running)
                && b.guesses
                    .0
                    .iter()
                    .all(|(q, g)| settled.get(q).is_some_and(|e| e.member() == *g))
        })
    };
    while round < rounds && !resolved(&branches, &settled) {
        round += 1;
        let mut next = Vec::with_capacity(branches.len());
        for mut b in branches {
            if b.status != BranchStatus::Running {
                next.push(b);
                continue;
            }
            match oracle_step(prog, &b.guesses, &mut b.config) {
                Ok(OStep::Moved) | Ok(OStep::Answered { .. }) => next.push(b),
                Ok(OStep::Halted) => {
                    b.status = BranchStatus::Halted {
                        output: decode_unary(&b.config.tape).ok(),
                        tape: b.config.tape.render_explicit(),
                    };
                    next.push(b);
                }
                Ok(OStep::Pending { query }) => {
                    processes.entry(query).or_insert_with(|| set.spawn(query));
                    for guess in [false, true] {
                        let mut g = b.guesses.clone();
                        g.0.push((query, guess));
                        next.push(Branch {
                            guesses: g,
                            config: b.config.clone(),
                            status: BranchStatus::Running,
                        });
                    }
                }
                Err(e) => {
                    b.status = BranchStatus::Crashed {
                        reason: match e {
                            RelError::Run(r) => r.to_string(),
                            other => other.to_string(),
                        },
                    };
                    next.push(b);
                }
            }
        }
        let mut fresh = Vec::new();
        processes.retain(|&q, p| match p.step() {
            Some(ev) => {
                fresh.push((q, ev));
                false
            }
            None => true,
        });
        for (q, ev) in fresh {
            let refuted = !ev.member();
            next.retain(|b| {
                let dead = b.guesses.0.iter().any(|&(bq, g)| bq == q && g == refuted);
                if dead {
                    audit.push(Kill {
                        round,
                        guesses: b.guesses.0.clone(),
                        query: q,
                        guessed: refuted,
                        evidence: ev.clone(),
                    });
                }
                !dead
            });
            settled.insert(q, ev);
        }
        next.sort_by_key(Branch::key);
        branches = next;
    }
    let done = resolved(&branches, &settled);
    let published = match branches.first().map(|b| &b.status) {
        Some(BranchStatus::Halted { output, .. }) => *output,
        _ => None,
    };
    Ok(OmegaRun {
        published,
        resolved: done,
        rounds: round,
        branches: branches
            .iter()
            .map(|b| BranchReport {
                guesses: b.guesses.0.clone(),
                status: b.status.clone(),
                steps: b.config.steps,
            })
            .collect(),
        audit,
        expected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse;
    use crate::relativized::characteristic_machine;

    #[test]
    fn bounded_halters_characteristic_function() {
        let set = BoundedHalters { steps: 3 };
        let exact = exact_small_set(&set, 16, 10).unwrap();
        let m = characteristic_machine();
        for n in 0..16 {
            let r = omega_simulates_oracle_machine(&m, encode_unary(n), &set, &exact, 10_000).unwrap();
            assert!(r.resolved, "n = {n}");
            assert_eq!(r.published, r.expected, "n = {n}");
            assert_eq!(r.published, Some(u64::from(exact.contains(&BigUint::from(n)))));
        }
    }

    #[test]
    fn halting_set_kills_are_witnessed() {
        let set = HaltingSet;
        let exact = exact_small_set(&set, 40, 10_000).unwrap();
        let m = characteristic_machine();
        for n in 0..40 {
            let r = omega_simulates_oracle_machine(&m, encode_unary(n), &set, &exact, 10_000).unwrap();
            assert_eq!(r.published, r.expected, "n = {n}");
            for k in &r.audit {
                if !k.guessed {
                    let Evidence::Halted { steps } = k.evidence else {
                        panic!()
                    };
                    let (pm, input) = godel::decode_code(k.query);
                    let out = crate::machine::run(&pm, encode_unary(input), steps, false).unwrap();
                    assert!(out.is_halted());
                }
            }
        }
    }

    #[test]
    fn no_calls_single_branch() {
        let m = parse(include_str!("../../../../figures/parity.tm")).unwrap();
        for n in 0..6 {
            let r =
                omega_simulates_oracle_machine(&m, encode_unary(n), &HaltingSet, &FiniteSet::empty(), 10_000).unwrap();
            assert_eq!(r.branches.len(), 1);
            assert!(r.audit.is_empty());
            assert!(r.resolved);
            let direct = crate::machine::run(&m, encode_unary(n), 10_000, false).unwrap();
            assert_eq!(r.published, decode_unary(&direct.halted_config().unwrap().tape).ok());
        }
    }

    #[test]
    fn precondition_is_checked() {
        let walker = parse("state 0: (0, 0, right, 0)").unwrap();
        let r = omega_simulates_oracle_machine(&walker, Tape::blank(), &HaltingSet, &FiniteSet::empty(), 100);
        assert!(matches!(r, Err(HierError::Precondition(_))));
    }
}

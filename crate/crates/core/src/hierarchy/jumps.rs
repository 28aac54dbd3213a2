//! Staged approximations of `∅⁽ⁿ⁾`: level 1 dovetails the family against
//! the empty oracle; level `k + 1` dovetails it again against the level-`k`
//! table.

use serde::Serialize;

use crate::dovetail::{dovetail_with, Family, StageTable};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct JumpLevel {
    pub level: usize,
    pub budget: u64,
    /// The set this table approximates, e.g. `0^(2)`.
    pub set: String,
    /// The class decidable with that set as oracle, e.g. `Delta_3`.
    pub decides: String,
    pub table: StageTable,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct JumpExperiment {
    pub levels: Vec<JumpLevel>,
}

/// Chains `budgets.len()` jump stages over `family`, the budget for level
/// `k` being `budgets[k - 1]`.
pub fn iterate_jump_experiment(family: &Family, budgets: &[u64]) -> JumpExperiment {
    let mut levels: Vec<JumpLevel> = Vec::with_capacity(budgets.len());
    for (i, &budget) in budgets.iter().enumerate() {
        let base = levels.last().map_or_else(StageTable::empty_set, |l| l.table.clone());
        let level = i + 1;
        levels.push(JumpLevel {
            level,
            budget,
            set: format!("0^({level})"),
            decides: format!("Delta_{}", level + 1),
            table: dovetail_with(family, &base, budget),
        });
    }
    JumpExperiment { levels }
}

/// The same over codes read as oracle machines.
pub fn iterate_jump_codes(codes: &[u64], budgets: &[u64]) -> JumpExperiment {
    iterate_jump_experiment(&Family::decoded(codes.iter().copied()), budgets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dovetail::{dovetail, Member};
    use crate::lang::parse;
    use crate::machine::encode_unary;
    use crate::relativized::characteristic_machine;
    use std::sync::Arc;

    /// Codes 0 and 1 are a halter and a looper; 5 and 6 ask about them.
    fn two_level_family() -> Family {
        let looper = parse("state 0: (0, 1, right, 0)").unwrap();
        let chi = Arc::new(characteristic_machine());
        Family {
            members: vec![
                Member {
                    code: 0,
                    program: Arc::new(crate::machine::Machine::trivially_halting()),
                    input: encode_unary(0),
                },
                Member {
                    code: 1,
                    program: Arc::new(looper),
                    input: encode_unary(0),
                },
                Member {
                    code: 5,
                    program: chi.clone(),
                    input: encode_unary(0),
                },
                Member {
                    code: 6,
                    program: chi,
                    input: encode_unary(1),
                },
            ],
        }
    }

    #[test]
    fn first_level_is_dovetail() {
        let codes: Vec<u64> = (0..60).collect();
        for budget in [0, 50, 500, 5_000] {
            let e = iterate_jump_codes(&codes, &[budget]);
            assert_eq!(e.levels.len(), 1);
            assert_eq!(
                e.levels[0].table,
                dovetail(&Family::decoded(codes.iter().copied()), budget)
            );
        }
    }

    #[test]
    fn second_level_membership() {
        let f = two_level_family();
        let e = iterate_jump_experiment(&f, &[10_000, 10_000]);
        let one = &e.levels[0].table;
        assert!(one.halted.contains(&0));
        assert!(one.proven.contains_key(&1));
        let two = &e.levels[1].table;
        assert!(two.halted.contains(&5));
        assert!(two.halted.contains(&6));
        assert_eq!(e.levels[1].decides, "Delta_3");
    }

    #[test]
    fn unanswered_queries_suspend() {
        // Level 1 starved: nothing known, so the askers cannot finish.
        let e = iterate_jump_experiment(&two_level_family(), &[0, 10_000]);
        assert!(!e.levels[1].table.halted.contains(&5));
        assert!(!e.levels[1].table.halted.contains(&6));
    }

    #[test]
    fn monotone_in_budgets() {
        let f = two_level_family();
        let codes: Vec<u64> = (0..40).collect();
        let d = Family::decoded(codes.iter().copied());
        for family in [&f, &d] {
            let mut prev: Option<JumpExperiment> = None;
            for b in [0, 10, 100, 1_000, 10_000] {
                let e = iterate_jump_experiment(family, &[b, b, b]);
                if let Some(p) = &prev {
                    for (a, c) in p.levels.iter().zip(&e.levels) {
                        assert!(a.table.halted.is_subset(&c.table.halted));
                        assert!(a.table.proven.keys().all(|k| c.table.proven.contains_key(k)));
                    }
                }
                prev = Some(e);
            }
        }
    }
}

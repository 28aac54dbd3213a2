//! Shared generators for property tests.

use proptest::prelude::*;

use crate::machine::{Direction, Instruction, Machine};

pub fn arb_machine() -> impl Strategy<Value = Machine> {
    (1usize..=4, 2u8..=4).prop_flat_map(|(n, k)| {
        let entry = proptest::option::of((0..k, any::<bool>(), 0..n));
        proptest::collection::vec(entry, n * k as usize).prop_map(move |entries| {
            let states = (0..n)
                .map(|s| {
                    (0..k)
                        .filter_map(|r| {
                            entries[s * k as usize + r as usize].map(|(w, right, next)| {
                                let d = if right { Direction::Right } else { Direction::Left };
                                Instruction::new(r, w, d, next)
                            })
                        })
                        .collect()
                })
                .collect();
            Machine::new(k, states).unwrap()
        })
    })
}

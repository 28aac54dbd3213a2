//! Standard adapters that answer "is `g(n) = 1`?" from one bit source `g`
//! delivered three ways: inscribed on the tape, sent down an input channel,
//! or asked of an oracle.

use std::sync::Arc;

use crate::machine::{decode_unary, encode_unary, Symbol};

use super::channels::{coupled_input, coupled_reader, inscription_reader, run_coupled, run_inscribed, Channel};
use super::oracle::{characteristic_machine, run_o_machine, BitOracle, RelError};

pub type BitSource = Arc<dyn Fn(u64) -> bool + Send + Sync>;

/// `None` when the reader did not halt within `budget`.
pub fn decide_inscribed(g: &BitSource, n: u64, budget: u64) -> Result<Option<bool>, RelError> {
    let g = g.clone();
    let inscription = Arc::new(move |k: usize| Symbol(u8::from(g(k as u64))));
    let out = run_inscribed(&inscription_reader(), inscription, &encode_unary(n), budget)?;
    Ok(out.halted_config().map(|c| c.tape.get(0) == Symbol::ONE))
}

/// Gap between channel arrivals that leaves the reader time to walk over
/// unary `n` and back.
pub fn channel_spacing(n: u64) -> u64 {
    4 * (n + 4)
}

pub fn decide_coupled(g: &BitSource, n: u64, budget: u64) -> Result<Option<bool>, RelError> {
    let channel = Channel::serial_bits((0..=n).map(|k| g(k)), channel_spacing(n));
    let out = run_coupled(&coupled_reader(), &channel, coupled_input(n), budget)?;
    Ok(out.halted_config().map(|c| c.tape.get(1) == Symbol::ONE))
}

pub fn decide_by_oracle(g: &BitSource, n: u64, budget: u64) -> Result<Option<bool>, RelError> {
    let oracle = BitOracle(g.clone());
    let run = run_o_machine(&characteristic_machine(), &oracle, encode_unary(n), budget)?;
    Ok(run
        .outcome
        .halted_config()
        .and_then(|c| decode_unary(&c.tape).ok())
        .map(|v| v == 1))
}

/// All three answers, in the order inscription, channel, oracle.
pub fn decide_three_ways(g: &BitSource, n: u64, budget: u64) -> Result<[Option<bool>; 3], RelError> {
    Ok([
        decide_inscribed(g, n, budget)?,
        decide_coupled(g, n, budget)?,
        decide_by_oracle(g, n, budget)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_sources_agree() {
        let word = 0x9E37_79B9_7F4A_7C15u64;
        let g: BitSource = Arc::new(move |n| n < 64 && (word >> n) & 1 == 1);
        for n in 0..64 {
            let answers = decide_three_ways(&g, n, 1_000_000).unwrap();
            assert_eq!(answers, [Some(g(n)); 3], "n = {n}");
        }
    }
}

//! Machines whose steps are perturbed from outside: a fixed error function
//! that corrupts some writes, or fair coin flips choosing between two
//! instructions.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::detect::LoopDetector;
use crate::machine::{apply, Configuration, Direction, Instruction, Machine, RunError, RunOutcome, Symbol, Tape};
use crate::nondet::NDMachine;
use crate::par;

use super::oracle::RelError;

/// `e(n) = true` makes write `n` (counted from 0) come out wrong.
#[derive(Clone)]
pub enum ErrorFunction {
    /// Listed writes are wrong when mapped to `true`; unlisted writes are
    /// correct.
    Table(BTreeMap<u64, bool>),
    Generator(Arc<dyn Fn(u64) -> bool + Send + Sync>),
}

impl fmt::Debug for ErrorFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ErrorFunction::Table(t) => f.debug_tuple("Table").field(t).finish(),
            ErrorFunction::Generator(_) => f.write_str("Generator(..)"),
        }
    }
}

impl ErrorFunction {
    pub fn none() -> Self {
        ErrorFunction::Table(BTreeMap::new())
    }

    pub fn at(&self, n: u64) -> bool {
        match self {
            ErrorFunction::Table(t) => t.get(&n).copied().unwrap_or(false),
            ErrorFunction::Generator(g) => g(n),
        }
    }

    /// First write after which no error can occur, if known.
    fn quiet_after(&self) -> Option<u64> {
        match self {
            ErrorFunction::Table(t) => Some(t.iter().rev().find(|(_, v)| **v).map_or(0, |(k, _)| k + 1)),
            ErrorFunction::Generator(_) => None,
        }
    }
}

/// Swaps blank and 1; other symbols are left alone.
pub fn flip(s: Symbol) -> Symbol {
    match s.0 {
        0 => Symbol::ONE,
        1 => Symbol::BLANK,
        _ => s,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ErrorRun {
    pub outcome: RunOutcome,
    /// Squares that received a corrupted write, in write order.
    pub flipped: Vec<usize>,
}

/// Every step writes exactly once, so write `n` is step `n`. Errors change
/// the symbol stored, never the move or the next state. Loop detection
/// starts once the error function is known to have gone quiet.
pub fn run_error_prone(
    m: &Machine,
    e: &ErrorFunction,
    input: Tape,
    budget: u64,
    detect_loops: bool,
) -> Result<ErrorRun, RunError> {
    let mut config = Configuration::initial(input);
    let quiet = if detect_loops { e.quiet_after() } else { None };
    let mut detector: Option<LoopDetector> = None;
    let mut flipped = Vec::new();
    loop {
        if detector.is_none() && quiet.is_some_and(|q| config.steps >= q) {
            let mut d = LoopDetector::new();
            d.observe(&config);
            detector = Some(d);
        }
        let Some(mut ins) = m.lookup(config.state, config.scanned()).copied() else {
            return Ok(ErrorRun {
                outcome: RunOutcome::Halted { config },
                flipped,
            });
        };
        if config.steps >= budget {
            return Ok(ErrorRun {
                outcome: RunOutcome::BudgetExceeded { frontier: config },
                flipped,
            });
        }
        if e.at(config.steps) {
            ins.write = flip(ins.write);
            flipped.push(config.head);
        }
        apply(&mut config, &ins)?;
        if let Some(certificate) = detector.as_mut().and_then(|d| d.observe(&config)) {
            return Ok(ErrorRun {
                outcome: RunOutcome::NonHaltingProven { certificate },
                flipped,
            });
        }
    }
}

/// Uniform random bits, consumed one at a time from a ChaCha8 stream.
/// Trial `t` of seed `s` always sees the same bits.
pub struct CoinStream {
    rng: ChaCha8Rng,
    word: u64,
    left: u32,
    pub used: u64,
}

impl CoinStream {
    pub fn new(seed: u64, trial: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial);
        CoinStream {
            rng,
            word: 0,
            left: 0,
            used: 0,
        }
    }

    pub fn bit(&mut self) -> bool {
        if self.left == 0 {
            self.word = self.rng.next_u64();
            self.left = 64;
        }
        let b = self.word & 1 == 1;
        self.word >>= 1;
        self.left -= 1;
        self.used += 1;
        b
    }
}

/// Checks that no `(state, symbol)` offers more than two instructions.
pub fn check_coin_machine(m: &NDMachine) -> Result<(), RelError> {
    for s in 0..m.state_count() {
        let reads: BTreeSet<Symbol> = m.instructions(s).iter().map(|i| i.read).collect();
        for r in reads {
            if m.choices(s, r).count() > 2 {
                return Err(RelError::TooManyChoices { state: s, symbol: r });
            }
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CoinRun {
    pub outcome: RunOutcome,
    pub coins_used: u64,
}

/// One run where each two-way choice takes the first listed instruction on
/// a 0 bit and the second on a 1 bit. Loop detection only sees stretches
/// without coin flips, so a certificate covers a cycle that no longer
/// depends on chance.
pub fn run_probabilistic(
    m: &NDMachine,
    input: Tape,
    coins: &mut CoinStream,
    budget: u64,
    detect_loops: bool,
) -> Result<CoinRun, RelError> {
    check_coin_machine(m)?;
    let start_used = coins.used;
    let mut config = Configuration::initial(input);
    let mut detector = detect_loops.then(LoopDetector::new);
    if let Some(d) = detector.as_mut() {
        d.observe(&config);
    }
    let done = |outcome, coins: &CoinStream| CoinRun {
        outcome,
        coins_used: coins.used - start_used,
    };
    loop {
        let options: Vec<&Instruction> = m.choices(config.state, config.scanned()).collect();
        if options.is_empty() {
            return Ok(done(RunOutcome::Halted { config }, coins));
        }
        if config.steps >= budget {
            return Ok(done(RunOutcome::BudgetExceeded { frontier: config }, coins));
        }
        let ins = if options.len() == 2 {
            if let Some(d) = detector.as_mut() {
                d.reset();
            }
            options[usize::from(coins.bit())]
        } else {
            options[0]
        };
        apply(&mut config, ins)?;
        if let Some(certificate) = detector.as_mut().and_then(|d| d.observe(&config)) {
            return Ok(done(RunOutcome::NonHaltingProven { certificate }, coins));
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Estimate<K: Ord> {
    pub trials: u64,
    pub counts: BTreeMap<K, u64>,
    /// The output seen in more than half of the trials.
    pub majority: Option<K>,
}

impl<K: Ord> Estimate<K> {
    pub fn frequency(&self, k: &K) -> f64 {
        self.counts.get(k).copied().unwrap_or(0) as f64 / self.trials as f64
    }
}

/// Runs `trials` independent trials (in parallel; trial `t` uses stream `t`
/// of `seed`) and tallies `extract` of each outcome.
pub fn estimate_by<K, F>(
    m: &NDMachine,
    input: &Tape,
    trials: u64,
    seed: u64,
    budget: u64,
    extract: F,
) -> Result<Estimate<K>, RelError>
where
    K: Ord + Clone + Send,
    F: Fn(&RunOutcome) -> K + Sync + Send,
{
    check_coin_machine(m)?;
    let results = par::map_range(0..trials, |t| {
        let mut coins = CoinStream::new(seed, t);
        run_probabilistic(m, input.clone(), &mut coins, budget, false).map(|r| extract(&r.outcome))
    });
    let mut counts = BTreeMap::new();
    for r in results {
        *counts.entry(r?).or_insert(0u64) += 1;
    }
    let majority = counts.iter().find(|(_, c)| 2 * **c > trials).map(|(k, _)| k.clone());
    Ok(Estimate {
        trials,
        counts,
        majority,
    })
}

/// Output of a trial: the bit on square 0 if the machine halted.
pub fn first_square_output(out: &RunOutcome) -> Option<u8> {
    out.halted_config().map(|c| u8::from(c.tape.get(0) == Symbol::ONE))
}

pub fn estimate(
    m: &NDMachine,
    input: &Tape,
    trials: u64,
    seed: u64,
    budget: u64,
) -> Result<Estimate<Option<u8>>, RelError> {
    estimate_by(m, input, trials, seed, budget, first_square_output)
}

/// Prints `cells` fair coin flips on squares `0..cells` and halts.
pub fn coin_printer(cells: usize) -> NDMachine {
    let mut states: Vec<Vec<Instruction>> = (0..cells)
        .map(|s| {
            vec![
                Instruction::new(0, 0, Direction::Right, s + 1),
                Instruction::new(0, 1, Direction::Right, s + 1),
            ]
        })
        .collect();
    states.push(Vec::new());
    NDMachine::new(2, states).unwrap()
}

/// Leaves 1 on square 0 with probability 3/4: a first coin decides 1
/// outright, otherwise a second coin decides.
pub fn three_quarters_machine() -> NDMachine {
    NDMachine::parse(
        "state 0: (0, 1, right, 4) (0, 0, right, 1)
         state 1: (0, 0, left, 2) (0, 0, left, 3)
         state 2: (0, 1, right, 4)
         state 3: (0, 0, right, 4)
         state 4:",
    )
    .unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{enumerate_machines, parse};
    use crate::machine::{encode_unary, run};
    use proptest::prelude::*;

    #[test]
    fn no_errors_is_plain() {
        for m in enumerate_machines(2, 2).step_by(37) {
            for n in 0..3 {
                let plain = run(&m, encode_unary(n), 200, true);
                let noisy = run_error_prone(&m, &ErrorFunction::none(), encode_unary(n), 200, true);
                match (plain, noisy) {
                    (Ok(a), Ok(b)) => {
                        assert_eq!(a, b.outcome);
                        assert!(b.flipped.is_empty());
                    }
                    (a, b) => assert_eq!(a.err(), b.err()),
                }
            }
        }
    }

    #[test]
    fn parity_errors_alternate_a_writer() {
        let writer = parse("state 0: (0, 1, right, 0)").unwrap();
        let e = ErrorFunction::Generator(Arc::new(|n| n % 2 == 1));
        let out = run_error_prone(&writer, &e, Tape::blank(), 8, true).unwrap();
        let RunOutcome::BudgetExceeded { frontier } = out.outcome else {
            panic!("writer runs on")
        };
        assert_eq!(frontier.tape.render(8), "10101010");
        assert_eq!(out.flipped, vec![1, 3, 5, 7]);
    }

    #[test]
    fn detection_waits_for_the_last_error() {
        let writer = parse("state 0: (0, 1, right, 0)").unwrap();
        let e = ErrorFunction::Table([(50, true)].into());
        let out = run_error_prone(&writer, &e, Tape::blank(), 1000, true).unwrap();
        let cert = out.outcome.certificate().expect("proven after the error");
        assert!(cert.start().steps > 50);
        assert_eq!(out.flipped, vec![50]);
    }

    fn write_once_machine() -> impl Strategy<Value = Machine> {
        (1usize..=4).prop_flat_map(|n| {
            proptest::collection::vec((0u8..2, 0..n), n).prop_map(move |entries| {
                let states = entries
                    .into_iter()
                    .map(|(w, next)| vec![Instruction::new(0, w, Direction::Right, next)])
                    .collect();
                Machine::new(2, states).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn flipping_back_restores_the_plain_tape(
            m in write_once_machine(),
            errs in proptest::collection::btree_map(0u64..30, any::<bool>(), 0..10),
        ) {
            let plain = run(&m, Tape::blank(), 30, false).unwrap();
            let noisy = run_error_prone(&m, &ErrorFunction::Table(errs), Tape::blank(), 30, false).unwrap();
            let RunOutcome::BudgetExceeded { frontier: a } = plain else { unreachable!() };
            let RunOutcome::BudgetExceeded { frontier: mut b } = noisy.outcome else { unreachable!() };
            for p in noisy.flipped {
                b.tape.set(p, flip(b.tape.get(p)));
            }
            prop_assert_eq!(a.tape.prefix(31), b.tape.prefix(31));
            prop_assert_eq!((a.state, a.head), (b.state, b.head));
        }
    }

    #[test]
    fn deterministic_machines_ignore_the_coins() {
        let m = parse(include_str!("../../../../figures/parity.tm")).unwrap();
        let nd = NDMachine::from(&m);
        for seed in 0..5 {
            for n in 0..6 {
                let mut coins = CoinStream::new(seed, n);
                let r = run_probabilistic(&nd, encode_unary(n), &mut coins, 1000, true).unwrap();
                assert_eq!(r.outcome, run(&m, encode_unary(n), 1000, true).unwrap());
                assert_eq!(r.coins_used, 0);
            }
        }
    }

    #[test]
    fn coin_printer_is_uniform() {
        let trials = 100_000u64;
        let est = estimate_by(&coin_printer(8), &Tape::blank(), trials, 7, 100, |o| {
            o.halted_config().unwrap().tape.render(8)
        })
        .unwrap();
        assert_eq!(est.counts.len(), 256);
        let p = 1.0 / 256.0;
        let mean = trials as f64 * p;
        let sigma = (trials as f64 * p * (1.0 - p)).sqrt();
        for c in est.counts.values() {
            assert!((*c as f64 - mean).abs() < 5.0 * sigma, "{c}");
        }
        assert_eq!(est.majority, None);
    }

    #[test]
    fn three_quarters_has_a_majority() {
        let est = estimate(&three_quarters_machine(), &Tape::blank(), 10_000, 1, 100).unwrap();
        assert_eq!(est.majority, Some(Some(1)));
        assert!((est.frequency(&Some(1)) - 0.75).abs() < 0.02);
        // Same seed, same tallies.
        assert_eq!(
            est,
            estimate(&three_quarters_machine(), &Tape::blank(), 10_000, 1, 100).unwrap()
        );
    }

    #[test]
    fn three_way_choices_are_rejected() {
        let m = NDMachine::parse("state 0: (0,0,R,0) (0,1,R,0) (0,0,L,0)").unwrap();
        assert!(matches!(
            estimate(&m, &Tape::blank(), 1, 0, 10),
            Err(RelError::TooManyChoices { state: 0, .. })
        ));
    }
}

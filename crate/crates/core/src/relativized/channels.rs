//! Information arriving through the tape itself: an inscription on the odd
//! squares, or symbols delivered to square 0 over time.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::detect::LoopDetector;
use crate::machine::{
    apply, run, Configuration, Direction, Inscription, Instruction, Machine, RunOutcome, Symbol, Tape, TransitionTable,
};

use super::oracle::RelError;

/// Input on the even squares, `inscription(k)` on square `2k + 1`.
pub fn inscribed_tape(input: &Tape, inscription: Inscription) -> Tape {
    let input = input.clone();
    let bg: Inscription = Arc::new(move |p| {
        if p % 2 == 1 {
            inscription(p / 2)
        } else {
            input.get(p / 2)
        }
    });
    Tape::blank().with_background(bg)
}

pub fn run_inscribed(m: &Machine, inscription: Inscription, input: &Tape, budget: u64) -> Result<RunOutcome, RelError> {
    Ok(run(m, inscribed_tape(input, inscription), budget, true)?)
}

fn ins(read: u8, write: u8, dir: Direction, next: usize) -> Instruction {
    Instruction::new(read, write, dir, next)
}

/// Reads inscribed bit `n` for unary input `n` and leaves it on square 0.
pub fn inscription_reader() -> Machine {
    use Direction::{Left as L, Right as R};
    let (skip, even, read, z, zo, o, oo, h) = (1, 2, 3, 4, 5, 6, 7, 8);
    Machine::new(
        2,
        vec![
            // Mark square 0 so the way back can find it.
            vec![ins(0, 1, R, skip)],
            vec![ins(0, 0, R, even), ins(1, 1, R, even)],
            // Erase the input ones on the way out.
            vec![ins(0, 0, L, read), ins(1, 0, R, skip)],
            vec![ins(0, 0, L, z), ins(1, 1, L, o)],
            vec![ins(0, 0, L, zo), ins(1, 0, R, h)],
            vec![ins(0, 0, L, z), ins(1, 1, L, z)],
            vec![ins(0, 0, L, oo), ins(1, 1, R, h)],
            vec![ins(0, 0, L, o), ins(1, 1, L, o)],
            vec![],
        ],
    )
    .unwrap()
}

/// Symbols delivered to square 0, each overwriting it just before the
/// machine's step with that index.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Channel {
    pub arrivals: Vec<(u64, Symbol)>,
}

impl Channel {
    pub fn new(arrivals: Vec<(u64, Symbol)>) -> Option<Self> {
        arrivals
            .windows(2)
            .all(|w| w[0].0 < w[1].0)
            .then_some(Channel { arrivals })
    }

    /// Bits `g(0), g(1), ...` sent as `μ` (one) or `#` (zero) at steps
    /// `spacing·(2j + 1)`, each cleared to blank at `spacing·(2j + 2)`.
    pub fn serial_bits(bits: impl IntoIterator<Item = bool>, spacing: u64) -> Self {
        let mut arrivals = Vec::new();
        for (j, b) in bits.into_iter().enumerate() {
            let j = j as u64;
            let s = if b { Symbol::MARKER } else { Symbol::SEPARATOR };
            arrivals.push((spacing * (2 * j + 1), s));
            arrivals.push((spacing * (2 * j + 2), Symbol::BLANK));
        }
        Channel { arrivals }
    }
}

/// Runs `m` with square 0 fed by `channel`. The machine may scan square 0
/// and rewrite the symbol it found there, but changing it is an error.
/// Loop detection only starts after the last arrival.
pub fn run_coupled(m: &Machine, channel: &Channel, input: Tape, budget: u64) -> Result<RunOutcome, RelError> {
    let mut config = Configuration::initial(input);
    let mut next = 0;
    let last = channel.arrivals.last().map(|a| a.0);
    let mut detector: Option<LoopDetector> = None;
    loop {
        while let Some(&(at, sym)) = channel.arrivals.get(next) {
            if at > config.steps {
                break;
            }
            config.tape.set(0, sym);
            next += 1;
        }
        if detector.is_none() && last.is_none_or(|l| config.steps >= l) {
            let mut d = LoopDetector::new();
            d.observe(&config);
            detector = Some(d);
        }
        let Some(i) = m.instruction(config.state, config.scanned()) else {
            return Ok(RunOutcome::Halted { config });
        };
        if config.steps >= budget {
            return Ok(RunOutcome::BudgetExceeded { frontier: config });
        }
        if config.head == 0 && i.write != config.scanned() {
            return Err(RelError::ReservedSquareWrite {
                state: config.state,
                steps: config.steps,
            });
        }
        apply(&mut config, &i)?;
        if let Some(d) = detector.as_mut() {
            if let Some(certificate) = d.observe(&config) {
                return Ok(RunOutcome::NonHaltingProven { certificate });
            }
        }
    }
}

/// Consumes serially delivered bits (see [`Channel::serial_bits`]) and
/// leaves bit `n` on square 1, where unary `n` is written on squares
/// `1..=n`.
pub fn coupled_reader() -> Machine {
    use Direction::{Left as L, Right as R};
    const MU: u8 = 3;
    const SEP: u8 = 2;
    let (wait, wait1, sep, mu, right, erase, back, back1, h) = (0, 1, 2, 3, 4, 5, 6, 7, 8);
    Machine::new(
        4,
        vec![
            vec![ins(0, 0, R, wait1), ins(SEP, SEP, R, sep), ins(MU, MU, R, mu)],
            vec![ins(0, 0, L, wait), ins(1, 1, L, wait)],
            vec![ins(0, 0, L, h), ins(1, 1, R, right)],
            vec![ins(0, 1, L, h), ins(1, 1, R, right)],
            vec![ins(0, 0, L, erase), ins(1, 1, R, right)],
            vec![ins(1, 0, L, back)],
            // Back at square 0, wait for the clear before the next bit.
            vec![
                ins(0, 0, R, wait1),
                ins(1, 1, L, back),
                ins(SEP, SEP, R, back1),
                ins(MU, MU, R, back1),
            ],
            vec![ins(0, 0, L, back), ins(1, 1, L, back)],
            vec![],
        ],
    )
    .unwrap()
}

/// Tape with square 0 free for the channel and unary `n` on `1..=n`.
pub fn coupled_input(n: u64) -> Tape {
    let mut t = Tape::blank();
    for p in 1..=n as usize {
        t.set(p, Symbol::ONE);
    }
    t
}

//! Machines with infinitely many states, given by a generator that lists
//! the instructions of state `s` on demand.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use serde::Serialize;

use crate::machine::{run, Direction, Instruction, RunError, RunOutcome, Symbol, Tape, TransitionTable};

pub type StateGenerator = Arc<dyn Fn(usize) -> Vec<Instruction> + Send + Sync>;

/// Materialises states as the run reaches them.
pub struct LazyTable {
    generator: StateGenerator,
    cache: RefCell<HashMap<usize, Vec<Instruction>>>,
}

impl LazyTable {
    pub fn new(generator: StateGenerator) -> Self {
        LazyTable {
            generator,
            cache: RefCell::new(HashMap::new()),
        }
    }

    pub fn touched(&self) -> usize {
        self.cache.borrow().len()
    }
}

impl TransitionTable for LazyTable {
    fn instruction(&self, state: usize, read: Symbol) -> Option<Instruction> {
        let mut cache = self.cache.borrow_mut();
        let list = cache.entry(state).or_insert_with(|| (self.generator)(state));
        list.iter().find(|i| i.read == read).copied()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct InfiniteRun {
    pub outcome: RunOutcome,
    /// Distinct states whose instructions were generated.
    pub touched_states: usize,
}

pub fn run_infinite_state(
    generator: StateGenerator,
    input: Tape,
    budget: u64,
    detect_loops: bool,
) -> Result<InfiniteRun, RunError> {
    let table = LazyTable::new(generator);
    let outcome = run(&table, input, budget, detect_loops)?;
    Ok(InfiniteRun {
        outcome,
        touched_states: table.touched(),
    })
}

/// Lookup-table machine for any `f: N → {0, 1}`. State `5 + n` is entered
/// on square `n + 1` after reading `n` ones; seeing the blank after the
/// input there, it turns back into the eraser for `f(n) = 0` or the one
/// that leaves a single 1 for `f(n) = 1`. Output is unary.
pub fn lookup_family(f: Arc<dyn Fn(u64) -> bool + Send + Sync>) -> StateGenerator {
    use Direction::{Left as L, Right as R};
    let ins = Instruction::new;
    Arc::new(move |s| match s {
        0 => vec![ins(0, 0, R, 5)],
        // Erase and halt on square 0.
        1 => vec![ins(1, 0, L, 1)],
        // Erase, then write a single 1.
        2 => vec![ins(1, 0, L, 2), ins(0, 0, R, 3)],
        3 => vec![ins(0, 1, L, 4)],
        4 => vec![],
        _ => {
            let n = (s - 5) as u64;
            vec![ins(1, 1, R, s + 1), ins(0, 0, L, if f(n) { 2 } else { 1 })]
        }
    })
}

pub fn is_prime(n: u64) -> bool {
    n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| !n.is_multiple_of(d))
}

pub fn prime_machine() -> StateGenerator {
    lookup_family(Arc::new(is_prime))
}

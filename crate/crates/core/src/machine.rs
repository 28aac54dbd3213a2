//! Machines, tapes, configurations and the deterministic step relation.
//!
//! The tape is bounded on the left at square 0 and unbounded to the right.
//! Every instruction is a quadruple `(read, write, direction, next_state)`
//! attached to a state; a state with no instruction for the scanned symbol
//! halts the machine.

use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::detect::{Certificate, LoopDetector};

/// A tape symbol. Code 0 is always the blank.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Symbol(pub u8);

impl Symbol {
    pub const BLANK: Symbol = Symbol(0);
    pub const ONE: Symbol = Symbol(1);
    /// `#`, the digit separator.
    pub const SEPARATOR: Symbol = Symbol(2);
    /// `μ`, the oracle query marker.
    pub const MARKER: Symbol = Symbol(3);

    pub fn is_blank(self) -> bool {
        self.0 == 0
    }

    /// Textual form used by listings and tape renderings.
    pub fn glyph(self) -> String {
        match self.0 {
            0 => "0".into(),
            1 => "1".into(),
            2 => "#".into(),
            3 => "μ".into(),
            n => format!("sym{n}"),
        }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.glyph())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Left,
    Right,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Instruction {
    pub read: Symbol,
    pub write: Symbol,
    pub direction: Direction,
    pub next_state: usize,
}

impl Instruction {
    pub fn new(read: u8, write: u8, direction: Direction, next_state: usize) -> Self {
        Instruction {
            read: Symbol(read),
            write: Symbol(write),
            direction,
            next_state,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MachineError {
    #[error("a machine needs at least one state")]
    NoStates,
    #[error("alphabet size {0} is below the minimum of 2")]
    AlphabetTooSmall(u8),
    #[error("state {state}: symbol {symbol} is outside the alphabet")]
    SymbolOutOfRange { state: usize, symbol: Symbol },
    #[error("state {state}: reference to undefined state {target}")]
    DanglingState { state: usize, target: usize },
    #[error("state {state}: nondeterministic entry for symbol {symbol}")]
    Nondeterministic { state: usize, symbol: Symbol },
    #[error("tape is not a unary numeral")]
    MalformedUnary,
}

/// Run-time faults of the step relation.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RunError {
    #[error("left move at square 0 in state {state} after {steps} steps")]
    LeftEdge { state: usize, steps: u64 },
}

/// Anything that maps `(state, scanned symbol)` to at most one instruction.
pub trait TransitionTable {
    fn instruction(&self, state: usize, read: Symbol) -> Option<Instruction>;
}

/// A deterministic machine. Instructions are kept sorted by read symbol so
/// that equal tables compare equal.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "MachineRecord", into = "MachineRecord")]
pub struct Machine {
    alphabet_size: u8,
    states: Vec<Vec<Instruction>>,
}

#[derive(Serialize, Deserialize)]
struct MachineRecord {
    alphabet_size: u8,
    states: Vec<Vec<Instruction>>,
}

impl TryFrom<MachineRecord> for Machine {
    type Error = MachineError;
    fn try_from(r: MachineRecord) -> Result<Self, Self::Error> {
        Machine::new(r.alphabet_size, r.states)
    }
}

impl From<Machine> for MachineRecord {
    fn from(m: Machine) -> Self {
        MachineRecord {
            alphabet_size: m.alphabet_size,
            states: m.states,
        }
    }
}

impl Machine {
    pub fn new(alphabet_size: u8, mut states: Vec<Vec<Instruction>>) -> Result<Self, MachineError> {
        if states.is_empty() {
            return Err(MachineError::NoStates);
        }
        if alphabet_size < 2 {
            return Err(MachineError::AlphabetTooSmall(alphabet_size));
        }
        let count = states.len();
        for (state, list) in states.iter_mut().enumerate() {
            list.sort_by_key(|i| i.read);
            for ins in list.iter() {
                for symbol in [ins.read, ins.write] {
                    if symbol.0 >= alphabet_size {
                        return Err(MachineError::SymbolOutOfRange { state, symbol });
                    }
                }
                if ins.next_state >= count {
                    return Err(MachineError::DanglingState {
                        state,
                        target: ins.next_state,
                    });
                }
            }
            for pair in list.windows(2) {
                if pair[0].read == pair[1].read {
                    return Err(MachineError::Nondeterministic {
                        state,
                        symbol: pair[0].read,
                    });
                }
            }
        }
        Ok(Machine { alphabet_size, states })
    }

    /// The one-state machine with no instructions; it halts at step 0.
    pub fn trivially_halting() -> Self {
        Machine {
            alphabet_size: 2,
            states: vec![Vec::new()],
        }
    }

    pub fn alphabet_size(&self) -> u8 {
        self.alphabet_size
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[Vec<Instruction>] {
        &self.states
    }

    pub fn instructions(&self, state: usize) -> &[Instruction] {
        &self.states[state]
    }

    pub fn lookup(&self, state: usize, read: Symbol) -> Option<&Instruction> {
        self.states.get(state)?.iter().find(|i| i.read == read)
    }

    pub fn instruction_count(&self) -> usize {
        self.states.iter().map(Vec::len).sum()
    }
}

impl TransitionTable for Machine {
    fn instruction(&self, state: usize, read: Symbol) -> Option<Instruction> {
        self.lookup(state, read).copied()
    }
}

impl<T: TransitionTable + ?Sized> TransitionTable for &T {
    fn instruction(&self, state: usize, read: Symbol) -> Option<Instruction> {
        (**self).instruction(state, read)
    }
}

/// Background inscription: the symbol of every square not explicitly stored.
pub type Inscription = Arc<dyn Fn(usize) -> Symbol + Send + Sync>;

/// One-way-infinite tape.
///
/// `cells` holds an explicit prefix of the tape; every square at or beyond
/// `cells.len()` reads as the background (blank when there is none). The
/// prefix is kept trimmed so that its last cell differs from the background,
/// which makes the representation canonical.
#[derive(Clone, Default)]
pub struct Tape {
    cells: Vec<Symbol>,
    background: Option<Inscription>,
}

impl Tape {
    pub fn blank() -> Self {
        Tape::default()
    }

    pub fn from_symbols(symbols: impl IntoIterator<Item = Symbol>) -> Self {
        let mut tape = Tape {
            cells: symbols.into_iter().collect(),
            background: None,
        };
        tape.trim();
        tape
    }

    /// Parses a compact glyph string such as `0#1#` or `01μ1`.
    pub fn from_glyphs(text: &str) -> Option<Self> {
        let mut out = Vec::new();
        for ch in text.chars() {
            out.push(match ch {
                '0' => Symbol::BLANK,
                '1' => Symbol::ONE,
                '#' => Symbol::SEPARATOR,
                'μ' | 'm' => Symbol::MARKER,
                _ => return None,
            });
        }
        Some(Tape::from_symbols(out))
    }

    pub fn with_background(mut self, background: Inscription) -> Self {
        self.background = Some(background);
        self.trim();
        self
    }

    pub fn background(&self) -> Option<&Inscription> {
        self.background.as_ref()
    }

    fn background_at(&self, pos: usize) -> Symbol {
        match &self.background {
            Some(bg) => bg(pos),
            None => Symbol::BLANK,
        }
    }

    pub fn get(&self, pos: usize) -> Symbol {
        match self.cells.get(pos) {
            Some(&s) => s,
            None => self.background_at(pos),
        }
    }

    pub fn set(&mut self, pos: usize, symbol: Symbol) {
        if pos < self.cells.len() {
            self.cells[pos] = symbol;
            if pos + 1 == self.cells.len() {
                self.trim();
            }
            return;
        }
        if symbol == self.background_at(pos) {
            return;
        }
        let start = self.cells.len();
        for p in start..pos {
            let s = self.background_at(p);
            self.cells.push(s);
        }
        self.cells.push(symbol);
    }

    fn trim(&mut self) {
        while let Some(&last) = self.cells.last() {
            if last == self.background_at(self.cells.len() - 1) {
                self.cells.pop();
            } else {
                break;
            }
        }
    }

    /// Length of the explicit prefix.
    pub fn explicit_len(&self) -> usize {
        self.cells.len()
    }

    pub fn cells(&self) -> &[Symbol] {
        &self.cells
    }

    /// Symbols of squares `0..len`.
    pub fn prefix(&self, len: usize) -> Vec<Symbol> {
        (0..len).map(|p| self.get(p)).collect()
    }

    /// Glyph rendering of squares `0..len`.
    pub fn render(&self, len: usize) -> String {
        self.prefix(len).iter().map(|s| s.glyph()).collect()
    }

    /// Glyph rendering of the explicit prefix (at least one square).
    pub fn render_explicit(&self) -> String {
        self.render(self.cells.len().max(1))
    }

    pub fn same_background(&self, other: &Tape) -> bool {
        match (&self.background, &other.background) {
            (None, None) => true,
            (Some(a), Some(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

impl PartialEq for Tape {
    fn eq(&self, other: &Self) -> bool {
        self.cells == other.cells && self.same_background(other)
    }
}

impl Eq for Tape {}

impl Hash for Tape {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.cells.hash(state);
    }
}

impl fmt::Debug for Tape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tape({}", self.render_explicit())?;
        if self.background.is_some() {
            f.write_str(" + background")?;
        }
        f.write_str(")")
    }
}

impl Serialize for Tape {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let codes: Vec<u8> = self.cells.iter().map(|s| s.0).collect();
        codes.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Tape {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let codes = Vec::<u8>::deserialize(deserializer)?;
        Ok(Tape::from_symbols(codes.into_iter().map(Symbol)))
    }
}

/// Instantaneous description of a run.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Configuration {
    pub state: usize,
    pub head: usize,
    pub tape: Tape,
    pub steps: u64,
}

impl Configuration {
    pub fn initial(tape: Tape) -> Self {
        Configuration {
            state: 0,
            head: 0,
            tape,
            steps: 0,
        }
    }

    pub fn scanned(&self) -> Symbol {
        self.tape.get(self.head)
    }

    /// Equal as machine configurations, ignoring the step counter.
    pub fn same_instant(&self, other: &Configuration) -> bool {
        self.state == other.state && self.head == other.head && self.tape == other.tape
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Step {
    Moved,
    Halted,
}

/// Applies one instruction, checking the left edge first so a faulting
/// configuration is left untouched.
pub fn apply(config: &mut Configuration, ins: &Instruction) -> Result<(), RunError> {
    if ins.direction == Direction::Left && config.head == 0 {
        return Err(RunError::LeftEdge {
            state: config.state,
            steps: config.steps,
        });
    }
    config.tape.set(config.head, ins.write);
    match ins.direction {
        Direction::Left => config.head -= 1,
        Direction::Right => config.head += 1,
    }
    config.state = ins.next_state;
    config.steps += 1;
    Ok(())
}

pub fn step_in_place<T: TransitionTable + ?Sized>(config: &mut Configuration, table: &T) -> Result<Step, RunError> {
    match table.instruction(config.state, config.scanned()) {
        None => Ok(Step::Halted),
        Some(ins) => {
            apply(config, &ins)?;
            Ok(Step::Moved)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StepResult {
    Next(Configuration),
    Halted,
}

/// Pure single step.
pub fn step(config: &Configuration, machine: &Machine) -> Result<StepResult, RunError> {
    let mut next = config.clone();
    match step_in_place(&mut next, machine)? {
        Step::Halted => Ok(StepResult::Halted),
        Step::Moved => Ok(StepResult::Next(next)),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum RunOutcome {
    Halted { config: Configuration },
    NonHaltingProven { certificate: Certificate },
    BudgetExceeded { frontier: Configuration },
}

impl RunOutcome {
    pub fn is_halted(&self) -> bool {
        matches!(self, RunOutcome::Halted { .. })
    }

    pub fn halted_config(&self) -> Option<&Configuration> {
        match self {
            RunOutcome::Halted { config } => Some(config),
            _ => None,
        }
    }

    pub fn certificate(&self) -> Option<&Certificate> {
        match self {
            RunOutcome::NonHaltingProven { certificate } => Some(certificate),
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            RunOutcome::Halted { .. } => "halted",
            RunOutcome::NonHaltingProven { .. } => "non_halting_proven",
            RunOutcome::BudgetExceeded { .. } => "budget_exceeded",
        }
    }
}

pub fn run<T: TransitionTable + ?Sized>(
    table: &T,
    input: Tape,
    budget: u64,
    detect_loops: bool,
) -> Result<RunOutcome, RunError> {
    run_from(table, Configuration::initial(input), budget, detect_loops)
}

/// Runs at most `budget` further steps from `config`.
pub fn run_from<T: TransitionTable + ?Sized>(
    table: &T,
    config: Configuration,
    budget: u64,
    detect_loops: bool,
) -> Result<RunOutcome, RunError> {
    run_observed(table, config, budget, detect_loops, |_| {})
}

/// As [`run_from`], calling `observe` on every configuration reached
/// (including the starting one).
pub fn run_observed<T: TransitionTable + ?Sized>(
    table: &T,
    mut config: Configuration,
    budget: u64,
    detect_loops: bool,
    mut observe: impl FnMut(&Configuration),
) -> Result<RunOutcome, RunError> {
    let mut detector = detect_loops.then(LoopDetector::new);
    if let Some(d) = detector.as_mut() {
        d.observe(&config);
    }
    observe(&config);
    let mut used = 0u64;
    loop {
        let Some(ins) = table.instruction(config.state, config.scanned()) else {
            return Ok(RunOutcome::Halted { config });
        };
        if used == budget {
            return Ok(RunOutcome::BudgetExceeded { frontier: config });
        }
        apply(&mut config, &ins)?;
        used += 1;
        observe(&config);
        if let Some(d) = detector.as_mut() {
            if let Some(certificate) = d.observe(&config) {
                return Ok(RunOutcome::NonHaltingProven { certificate });
            }
        }
    }
}

/// `0` followed by `n` ones.
pub fn encode_unary(n: u64) -> Tape {
    let mut cells = vec![Symbol::BLANK];
    cells.extend(std::iter::repeat_n(Symbol::ONE, n as usize));
    Tape::from_symbols(cells)
}

pub fn decode_unary(tape: &Tape) -> Result<u64, MachineError> {
    if tape.background().is_some() {
        return Err(MachineError::MalformedUnary);
    }
    let cells = tape.cells();
    match cells.first() {
        None => Ok(0),
        Some(&Symbol::BLANK) if cells[1..].iter().all(|&s| s == Symbol::ONE) => Ok(cells.len() as u64 - 1),
        _ => Err(MachineError::MalformedUnary),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse;

    fn parity() -> Machine {
        parse(include_str!("../../../figures/parity.tm")).unwrap()
    }

    fn one_third() -> Machine {
        parse(include_str!("../../../figures/one-third.tm")).unwrap()
    }

    #[test]
    fn parity_first_step() {
        let m = parity();
        let c = Configuration::initial(encode_unary(2));
        let StepResult::Next(n) = step(&c, &m).unwrap() else {
            panic!("expected a move")
        };
        assert_eq!((n.state, n.head, n.tape.get(0), n.steps), (1, 1, Symbol::BLANK, 1));
    }

    #[test]
    fn empty_state_halts() {
        let c = Configuration::initial(Tape::blank());
        assert_eq!(step(&c, &Machine::trivially_halting()).unwrap(), StepResult::Halted);
    }

    #[test]
    fn one_third_four_steps() {
        let m = one_third();
        let mut c = Configuration::initial(Tape::blank());
        for _ in 0..4 {
            assert_eq!(step_in_place(&mut c, &m).unwrap(), Step::Moved);
        }
        assert_eq!(c.tape.render(4), "0#1#");
        assert_eq!(c.state, 0);
    }

    #[test]
    fn parity_outputs() {
        let m = parity();
        for (n, want) in [(4, 1), (3, 0), (0, 1), (1, 0)] {
            let out = run(&m, encode_unary(n), 1_000, false).unwrap();
            let cfg = out.halted_config().expect("parity halts");
            assert_eq!(decode_unary(&cfg.tape).unwrap(), want, "n = {n}");
        }
    }

    #[test]
    fn right_runner_is_proven() {
        let m = Machine::new(2, vec![vec![Instruction::new(0, 0, Direction::Right, 0)]]).unwrap();
        let out = run(&m, Tape::blank(), 1_000, true).unwrap();
        let cert = out.certificate().expect("lasso");
        assert!(matches!(cert, Certificate::Translated { .. }));
        assert!(cert.verify(&m));
    }

    #[test]
    fn left_edge_is_an_error() {
        let m = Machine::new(2, vec![vec![Instruction::new(0, 1, Direction::Left, 0)]]).unwrap();
        let err = run(&m, Tape::blank(), 10, false).unwrap_err();
        assert_eq!(err, RunError::LeftEdge { state: 0, steps: 0 });
    }

    #[test]
    fn nondeterministic_table_rejected() {
        let err = Machine::new(
            2,
            vec![vec![
                Instruction::new(0, 0, Direction::Right, 0),
                Instruction::new(0, 1, Direction::Right, 0),
            ]],
        )
        .unwrap_err();
        assert!(matches!(err, MachineError::Nondeterministic { state: 0, .. }));
    }

    #[test]
    fn unary_shapes() {
        assert_eq!(encode_unary(0).render(1), "0");
        assert_eq!(encode_unary(3).render(4), "0111");
        for n in 0..=1000 {
            assert_eq!(decode_unary(&encode_unary(n)).unwrap(), n);
        }
        assert_eq!(
            decode_unary(&Tape::from_glyphs("0101").unwrap()),
            Err(MachineError::MalformedUnary)
        );
        assert_eq!(
            decode_unary(&Tape::from_glyphs("1").unwrap()),
            Err(MachineError::MalformedUnary)
        );
    }

    #[test]
    fn tape_stays_canonical() {
        let mut t = Tape::blank();
        t.set(5, Symbol::ONE);
        assert_eq!(t.explicit_len(), 6);
        t.set(5, Symbol::BLANK);
        assert_eq!(t.explicit_len(), 0);
        assert_eq!(t, Tape::blank());

        let bg: Inscription = Arc::new(|p| if p % 2 == 1 { Symbol::ONE } else { Symbol::BLANK });
        let mut t = Tape::blank().with_background(bg.clone());
        t.set(3, Symbol::ONE);
        assert_eq!(t.explicit_len(), 0);
        t.set(3, Symbol::BLANK);
        assert_eq!(t.explicit_len(), 4);
        assert_eq!(t.get(1), Symbol::ONE);
        assert_eq!(t.get(7), Symbol::ONE);
    }
}

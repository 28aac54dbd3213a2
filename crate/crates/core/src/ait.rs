//! Algorithmic information at desk scale: a prefix-free machine code,
//! bounded program-size complexity, lower bounds on the halting
//! probability, halting-count advice and the shift function.
//!
//! # The code
//!
//! A machine with `n` states over `k` symbols is written as
//!
//! 1. `n` in Elias gamma: `⌊log₂ n⌋` zeros, then `n` in binary;
//! 2. `k − 2` zeros and a one;
//! 3. for each state `s = 0..n`, for each read symbol `r = 0..k`, one
//!    presence bit; a present instruction follows at once as the written
//!    symbol (`⌈log₂ k⌉` bits), the direction (0 left, 1 right) and the next
//!    state (`⌈log₂ n⌉` bits). Numbers are most significant bit first.
//!
//! Field values out of range make the string a non-code. The header fixes
//! how many presence bits follow and each presence bit fixes the width of
//! what follows it, so no code is a prefix of another.
//!
//! A program *produces* `s` when, run on a blank tape, its finalized digits
//! (see [`DigitWatcher`]) begin with `s` within the step budget. Stream
//! printers are thus measured by the prefixes they have committed, and
//! whatever produces `s` also produces every prefix of `s`.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dovetail::{DigitWatcher, Family};
use crate::lang::enumerate_machines;
use crate::machine::{run, Configuration, Direction, Instruction, Machine, RunError, RunOutcome, Symbol, Tape};
use crate::par;
use crate::relativized::{oracle_step, DecodedOMachine, FiniteSet, OStep, OracleProgram, OracleSource};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum CodeError {
    #[error("code ends early")]
    Truncated,
    #[error("field out of range at bit {0}")]
    OutOfRange(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum AitError {
    #[error("advice says {count} of {members} halt, but {seen} did")]
    BadCount { count: usize, members: usize, seen: usize },
    #[error("missing HYPSAIT1 header")]
    BadMagic,
    #[error("code table ends early")]
    Truncated,
    #[error(transparent)]
    Code(#[from] CodeError),
}

fn width(n: u64) -> usize {
    // Bits needed for values 0..n.
    (64 - n.saturating_sub(1).leading_zeros()) as usize
}

fn gamma_len(n: u64) -> usize {
    2 * (63 - n.leading_zeros() as usize) + 1
}

fn push_number(out: &mut Vec<bool>, v: u64, bits: usize) {
    for i in (0..bits).rev() {
        out.push((v >> i) & 1 == 1);
    }
}

pub fn encode(m: &Machine) -> Vec<bool> {
    let n = m.state_count() as u64;
    let k = m.alphabet_size();
    let mut out = Vec::new();
    let g = 63 - n.leading_zeros() as usize;
    out.extend(std::iter::repeat_n(false, g));
    push_number(&mut out, n, g + 1);
    out.extend(std::iter::repeat_n(false, usize::from(k) - 2));
    out.push(true);
    let (wb, nb) = (width(u64::from(k)), width(n));
    for s in 0..m.state_count() {
        for r in 0..k {
            match m.lookup(s, Symbol(r)) {
                None => out.push(false),
                Some(i) => {
                    out.push(true);
                    push_number(&mut out, u64::from(i.write.0), wb);
                    out.push(i.direction == Direction::Right);
                    push_number(&mut out, i.next_state as u64, nb);
                }
            }
        }
    }
    out
}

struct Reader<'a> {
    bits: &'a [bool],
    pos: usize,
}

impl Reader<'_> {
    fn bit(&mut self) -> Result<bool, CodeError> {
        let b = *self.bits.get(self.pos).ok_or(CodeError::Truncated)?;
        self.pos += 1;
        Ok(b)
    }

    fn number(&mut self, bits: usize) -> Result<u64, CodeError> {
        let mut v = 0u64;
        for _ in 0..bits {
            v = (v << 1) | u64::from(self.bit()?);
        }
        Ok(v)
    }
}

/// Decodes the code at the front of `bits`; returns the machine and the
/// number of bits it used.
pub fn decode(bits: &[bool]) -> Result<(Machine, usize), CodeError> {
    let mut r = Reader { bits, pos: 0 };
    let mut zeros = 0;
    while !r.bit()? {
        zeros += 1;
        if zeros > 32 {
            return Err(CodeError::OutOfRange(r.pos));
        }
    }
    let n = (1u64 << zeros) | r.number(zeros)?;
    let mut k = 2u64;
    while !r.bit()? {
        k += 1;
        if k > 255 {
            return Err(CodeError::OutOfRange(r.pos));
        }
    }
    let (wb, nb) = (width(k), width(n));
    let mut states = Vec::with_capacity(n as usize);
    for _ in 0..n {
        let mut list = Vec::new();
        for read in 0..k as u8 {
            if !r.bit()? {
                continue;
            }
            let at = r.pos;
            let write = r.number(wb)?;
            let dir = if r.bit()? { Direction::Right } else { Direction::Left };
            let next = r.number(nb)?;
            if write >= k || next >= n {
                return Err(CodeError::OutOfRange(at));
            }
            list.push(Instruction::new(read, write as u8, dir, next as usize));
        }
        states.push(list);
    }
    let m = Machine::new(k as u8, states).map_err(|_| CodeError::OutOfRange(r.pos))?;
    Ok((m, r.pos))
}

pub fn bits_to_string(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

pub fn bits_from_string(s: &str) -> Option<Vec<bool>> {
    s.chars()
        .map(|c| match c {
            '0' => Some(false),
            '1' => Some(true),
            _ => None,
        })
        .collect()
}

/// All codes of a given header and presence pattern.
#[derive(Clone, Debug)]
struct Shape {
    states: usize,
    alphabet: u8,
    /// Present slots, `state * alphabet + read`.
    slots: Vec<usize>,
    length: usize,
    right_only: bool,
}

impl Shape {
    fn options(&self) -> u64 {
        let dirs = if self.right_only { 1 } else { 2 };
        u64::from(self.alphabet) * dirs * self.states as u64
    }

    fn count(&self) -> u64 {
        self.options().pow(self.slots.len() as u32)
    }

    fn machine(&self, mut index: u64) -> Machine {
        let k = u64::from(self.alphabet);
        let dirs = if self.right_only { 1 } else { 2 };
        let radix = self.options();
        let mut states = vec![Vec::new(); self.states];
        for &slot in &self.slots {
            let v = index % radix;
            index /= radix;
            let write = (v % k) as u8;
            let rest = v / k;
            let dir = if self.right_only || rest % dirs == 1 {
                Direction::Right
            } else {
                Direction::Left
            };
            let next = (rest / dirs) as usize;
            states[slot / self.alphabet as usize].push(Instruction::new(
                (slot % self.alphabet as usize) as u8,
                write,
                dir,
                next,
            ));
        }
        Machine::new(self.alphabet, states).expect("shape yields valid machines")
    }
}

fn subsets(n: usize, size: usize, out: &mut Vec<Vec<usize>>) {
    fn go(start: usize, n: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left == 0 {
            out.push(cur.clone());
            return;
        }
        for i in start..=n - left {
            cur.push(i);
            go(i + 1, n, left - 1, cur, out);
            cur.pop();
        }
    }
    go(0, n, size, &mut Vec::new(), out);
}

/// Every shape with codes of length at most `max_len`, in a fixed order.
fn shapes(max_len: usize, min_alphabet: u8, right_only: bool) -> Vec<Shape> {
    let mut out = Vec::new();
    for n in 1usize.. {
        if gamma_len(n as u64) + 1 + 2 * n > max_len {
            break;
        }
        for k in 2u8..=255 {
            let base = gamma_len(n as u64) + usize::from(k) - 1 + n * usize::from(k);
            if base > max_len {
                break;
            }
            if k < min_alphabet {
                continue;
            }
            let entry = width(u64::from(k)) + 1 + width(n as u64);
            let max_entries = ((max_len - base) / entry).min(n * usize::from(k));
            for e in 0..=max_entries {
                let mut masks = Vec::new();
                subsets(n * usize::from(k), e, &mut masks);
                for slots in masks {
                    out.push(Shape {
                        states: n,
                        alphabet: k,
                        slots,
                        length: base + e * entry,
                        right_only,
                    });
                }
            }
        }
    }
    out
}

const CHUNK: u64 = 2048;

/// Applies `f` to every machine with a code of at most `max_len` bits,
/// in parallel; results come back in enumeration order.
fn scan<R, F>(max_len: usize, min_alphabet: u8, right_only: bool, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(&Machine, usize) -> Option<R> + Sync + Send,
{
    let shapes = shapes(max_len, min_alphabet, right_only);
    let mut work = Vec::new();
    for (i, s) in shapes.iter().enumerate() {
        let count = s.count();
        let mut start = 0;
        while start < count {
            work.push((i, start, (start + CHUNK).min(count)));
            start += CHUNK;
        }
    }
    par::map(&work, |&(i, a, b)| {
        let s = &shapes[i];
        (a..b)
            .filter_map(|idx| f(&s.machine(idx), s.length))
            .collect::<Vec<R>>()
    })
    .into_iter()
    .flatten()
    .collect()
}

/// Every code of at most `max_len` bits.
pub fn enumerate_codes(max_len: usize) -> Vec<Vec<bool>> {
    scan(max_len, 2, false, |m, _| Some(encode(m)))
}

/// `Σ 2^{−ℓ(p)}` over every code of at most `max_len` bits, counted per
/// shape.
pub fn kraft_sum(max_len: usize) -> BigRational {
    let mut sum = BigRational::zero();
    for s in shapes(max_len, 2, false) {
        sum += BigRational::new(BigUint::from(s.count()).into(), (BigUint::one() << s.length).into());
    }
    sum
}

fn two_to_minus(len: usize) -> BigRational {
    BigRational::new(1.into(), (BigUint::one() << len).into())
}

mod ratio_text {
    use num_rational::BigRational;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &BigRational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&r.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigRational, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(D::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contribution {
    pub code: String,
    pub length: usize,
    pub steps: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OmegaBound {
    pub max_len: usize,
    pub budget: u64,
    #[serde(with = "ratio_text")]
    pub lower: BigRational,
    #[serde(with = "ratio_text")]
    pub kraft: BigRational,
    pub codes: u64,
    pub contributions: Vec<Contribution>,
}

impl OmegaBound {
    /// Re-runs every contributing code.
    pub fn replays(&self) -> bool {
        self.contributions.iter().all(|c| {
            let Some(bits) = bits_from_string(&c.code) else { return false };
            let Ok((m, used)) = decode(&bits) else { return false };
            used == bits.len()
                && matches!(run(&m, Tape::blank(), self.budget, false), Ok(RunOutcome::Halted { config }) if config.steps == c.steps)
        })
    }
}

/// Sum of `2^{−ℓ(p)}` over codes `p` of at most `max_len` bits whose machine
/// halts from a blank tape within `budget` steps.
pub fn omega_lower(max_len: usize, budget: u64) -> OmegaBound {
    let contributions = scan(max_len, 2, false, |m, len| match run(m, Tape::blank(), budget, true) {
        Ok(RunOutcome::Halted { config }) => Some(Contribution {
            code: bits_to_string(&encode(m)),
            length: len,
            steps: config.steps,
        }),
        _ => None,
    });
    let mut lower = BigRational::zero();
    for c in &contributions {
        lower += two_to_minus(c.length);
    }
    let codes = shapes(max_len, 2, false).iter().map(Shape::count).sum();
    OmegaBound {
        max_len,
        budget,
        lower,
        kraft: kraft_sum(max_len),
        codes,
        contributions,
    }
}

/// Finalized digits of a program's run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DigitTrace {
    pub digits: String,
    pub halted: bool,
    /// Set when the run stopped on an oracle query it could not answer.
    pub pending: Option<u64>,
}

/// Runs `prog` from a blank tape for at most `budget` steps, stopping
/// early once `max_digits` digits are finalized.
pub fn digit_trace<P, O>(prog: &P, oracle: &O, budget: u64, max_digits: usize) -> DigitTrace
where
    P: OracleProgram + ?Sized,
    O: OracleSource + ?Sized,
{
    let mut config = Configuration::initial(Tape::blank());
    let mut watcher = DigitWatcher::new(&config.tape);
    let mut trace = DigitTrace {
        digits: String::new(),
        halted: false,
        pending: None,
    };
    while config.steps < budget && watcher.digits().len() < max_digits {
        let pos = config.head;
        let old = config.scanned();
        match oracle_step(prog, oracle, &mut config) {
            Ok(OStep::Moved) => {
                watcher.on_write(pos, old, config.tape.get(pos), &config.tape, config.steps);
                if watcher.violation().is_some() {
                    break;
                }
            }
            Ok(OStep::Answered { .. }) => {}
            Ok(OStep::Halted) => {
                trace.halted = true;
                break;
            }
            Ok(OStep::Pending { query }) => {
                trace.pending = Some(query);
                break;
            }
            Err(_) => break,
        }
    }
    trace.digits = watcher.digit_string();
    trace
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KEntry {
    pub length: usize,
    pub code: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KSearch {
    /// Shortest producer found for each target.
    pub found: BTreeMap<String, KEntry>,
    /// Codes whose run stopped on an unanswered oracle query.
    pub skipped: Vec<String>,
}

impl KSearch {
    pub fn length(&self, s: &str) -> Option<usize> {
        self.found.get(s).map(|e| e.length)
    }
}

#[derive(Clone, Copy)]
pub enum Decoder<'a> {
    Plain,
    /// Only machines whose every instruction moves right.
    RightOnly,
    /// Codes read as oracle machines asking `oracle`.
    Relative(&'a dyn OracleSource),
}

/// Shortest producers of each target among codes of at most `max_len`
/// bits, each run for at most `budget` steps. Ties go to the code that is
/// smaller as a bit string.
pub fn k_search(targets: &[String], max_len: usize, budget: u64, decoder: Decoder<'_>) -> KSearch {
    let max_digits = targets.iter().map(String::len).max().unwrap_or(0);
    // Nonempty output needs a `#` to finalize it.
    let min_alphabet = if targets.iter().all(|t| !t.is_empty()) { 3 } else { 2 };
    let empty = FiniteSet::empty();
    let hits = scan(
        max_len,
        min_alphabet,
        matches!(decoder, Decoder::RightOnly),
        |m, len| {
            let trace = match decoder {
                Decoder::Plain | Decoder::RightOnly => digit_trace(m, &empty, budget, max_digits),
                Decoder::Relative(o) => digit_trace(&DecodedOMachine(m.clone()), o, budget, max_digits),
            };
            let produced: Vec<String> = targets
                .iter()
                .filter(|t| trace.digits.starts_with(t.as_str()))
                .cloned()
                .collect();
            // A run stuck on an unanswerable query might still have produced
            // the longer targets; it is flagged rather than judged.
            let stuck = trace.pending.is_some() && produced.len() < targets.len();
            (stuck || !produced.is_empty()).then(|| (bits_to_string(&encode(m)), len, produced, stuck))
        },
    );
    let mut out = KSearch::default();
    for (code, length, produced, stuck) in hits {
        if stuck {
            out.skipped.push(code.clone());
        }
        for t in produced {
            let better = out
                .found
                .get(&t)
                .is_none_or(|e| (length, code.as_str()) < (e.length, e.code.as_str()));
            if better {
                out.found.insert(
                    t,
                    KEntry {
                        length,
                        code: code.clone(),
                    },
                );
            }
        }
    }
    out
}

/// Length of the shortest code of at most `max_len` bits producing `s`
/// within `budget` steps.
pub fn k_bounded(s: &str, max_len: usize, budget: u64) -> Option<usize> {
    k_search(&[s.to_string()], max_len, budget, Decoder::Plain).length(s)
}

/// As [`k_bounded`], decoding each code as an oracle machine.
pub fn k_relativized(s: &str, oracle: &dyn OracleSource, max_len: usize, budget: u64) -> KSearch {
    k_search(&[s.to_string()], max_len, budget, Decoder::Relative(oracle))
}

/// As [`k_bounded`], for a decoder that can only move right.
pub fn k_right_only(s: &str, max_len: usize, budget: u64) -> Option<usize> {
    k_search(&[s.to_string()], max_len, budget, Decoder::RightOnly).length(s)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HaltCount {
    /// Halting bit per member; `None` if the budget ran out first.
    pub bits: Option<Vec<bool>>,
    /// Steps simulated across the family.
    pub steps: u64,
}

/// Recovers every halting bit of `family` from the number that halt:
/// run them side by side until `count` have halted; the rest never will.
pub fn bits_from_halt_count(family: &Family, count: usize, budget: u64) -> Result<HaltCount, AitError> {
    let n = family.len();
    let bad = |seen| AitError::BadCount {
        count,
        members: n,
        seen,
    };
    if count > n {
        return Err(bad(n));
    }
    let mut halted = vec![false; n];
    if count == 0 {
        return Ok(HaltCount {
            bits: Some(halted),
            steps: 0,
        });
    }
    let mut configs: Vec<Configuration> = family
        .members
        .iter()
        .map(|m| Configuration::initial(m.input.clone()))
        .collect();
    let mut done = vec![false; n];
    let empty = FiniteSet::empty();
    let mut steps = 0u64;
    loop {
        for (i, member) in family.members.iter().enumerate() {
            if done[i] {
                continue;
            }
            if steps == budget {
                return Ok(HaltCount { bits: None, steps });
            }
            steps += 1;
            match oracle_step(&*member.program, &empty, &mut configs[i]) {
                Ok(OStep::Moved) | Ok(OStep::Answered { .. }) => {}
                Ok(OStep::Halted) => {
                    halted[i] = true;
                    done[i] = true;
                }
                Ok(OStep::Pending { .. }) | Err(_) => done[i] = true,
            }
        }
        let seen = halted.iter().filter(|&&h| h).count();
        if seen > count {
            return Err(bad(seen));
        }
        if seen == count {
            return Ok(HaltCount {
                bits: Some(halted),
                steps,
            });
        }
        if done.iter().all(|&d| d) {
            return Err(bad(seen));
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShiftRecord {
    pub n: usize,
    pub step_cap: u64,
    /// Longest halting run among `n`-state binary machines on a blank tape.
    pub max_steps: u64,
    pub witness: Option<Machine>,
    pub halted: usize,
    /// Machines proved never to halt: a lasso, a left-edge fault, or an
    /// instruction for every state and symbol.
    pub certified: usize,
    /// How many of `certified` were settled by the last reason alone.
    pub total_tables: usize,
    /// Machines neither halted nor certified within the cap.
    pub residue: Vec<Machine>,
    pub exact: bool,
}

enum Verdict {
    Halts(u64),
    Never,
    Total,
    Open,
}

/// No state/symbol pair lacks an instruction, so no configuration halts.
pub fn is_total(m: &Machine) -> bool {
    (0..m.state_count()).all(|s| m.instructions(s).len() == usize::from(m.alphabet_size()))
}

/// `S(n)` by exhaustive search over every `n`-state, 2-symbol machine.
pub fn shift_function(n: usize, step_cap: u64) -> ShiftRecord {
    let machines: Vec<Machine> = enumerate_machines(n, 2).collect();
    let verdicts = par::map(&machines, |m| match run(m, Tape::blank(), step_cap, true) {
        Ok(RunOutcome::Halted { config }) => Verdict::Halts(config.steps),
        Ok(RunOutcome::NonHaltingProven { .. }) | Err(RunError::LeftEdge { .. }) => Verdict::Never,
        Ok(RunOutcome::BudgetExceeded { .. }) if is_total(m) => Verdict::Total,
        Ok(RunOutcome::BudgetExceeded { .. }) => Verdict::Open,
    });
    let mut record = ShiftRecord {
        n,
        step_cap,
        max_steps: 0,
        witness: None,
        halted: 0,
        certified: 0,
        total_tables: 0,
        residue: Vec::new(),
        exact: false,
    };
    for (m, v) in machines.into_iter().zip(verdicts) {
        match v {
            Verdict::Halts(t) => {
                record.halted += 1;
                if record.witness.is_none() || t > record.max_steps {
                    record.max_steps = t;
                    record.witness = Some(m);
                }
            }
            Verdict::Never => record.certified += 1,
            Verdict::Total => {
                record.certified += 1;
                record.total_tables += 1;
            }
            Verdict::Open => record.residue.push(m),
        }
    }
    record.exact = record.residue.is_empty();
    record
}

/// A second, deliberately plain simulator: a growable vector tape and a
/// linear instruction search. Returns the halting step, `None` on a
/// left-edge fault or when `cap` steps pass without a halt.
pub fn reference_halt_time(m: &Machine, cap: u64) -> Option<u64> {
    let mut tape: Vec<u8> = Vec::new();
    let (mut state, mut head, mut t) = (0usize, 0usize, 0u64);
    loop {
        if head >= tape.len() {
            tape.resize(head + 1, 0);
        }
        let read = tape[head];
        let found = m.states()[state].iter().find(|i| i.read.0 == read);
        let Some(ins) = found else { return Some(t) };
        if t == cap {
            return None;
        }
        tape[head] = ins.write.0;
        match ins.direction {
            Direction::Right => head += 1,
            Direction::Left if head == 0 => return None,
            Direction::Left => head -= 1,
        }
        state = ins.next_state;
        t += 1;
    }
}

pub const MAGIC: &[u8; 8] = b"HYPSAIT1";

/// Binary code table: the magic, a little-endian `u32` count, then per code
/// a little-endian `u16` bit length and the bits packed most significant
/// first.
pub fn write_code_table(codes: &[Vec<bool>]) -> Vec<u8> {
    let mut out = MAGIC.to_vec();
    out.extend((codes.len() as u32).to_le_bytes());
    for c in codes {
        out.extend((c.len() as u16).to_le_bytes());
        for chunk in c.chunks(8) {
            let mut byte = 0u8;
            for (i, &b) in chunk.iter().enumerate() {
                byte |= u8::from(b) << (7 - i);
            }
            out.push(byte);
        }
    }
    out
}

pub fn read_code_table(bytes: &[u8]) -> Result<Vec<Vec<bool>>, AitError> {
    let rest = bytes.strip_prefix(MAGIC.as_slice()).ok_or(AitError::BadMagic)?;
    let (count, mut rest) = rest.split_first_chunk::<4>().ok_or(AitError::Truncated)?;
    let mut codes = Vec::new();
    for _ in 0..u32::from_le_bytes(*count) {
        let (len, tail) = rest.split_first_chunk::<2>().ok_or(AitError::Truncated)?;
        let len = usize::from(u16::from_le_bytes(*len));
        let nbytes = len.div_ceil(8);
        if tail.len() < nbytes {
            return Err(AitError::Truncated);
        }
        let bits = (0..len).map(|i| (tail[i / 8] >> (7 - i % 8)) & 1 == 1).collect();
        codes.push(bits);
        rest = &tail[nbytes..];
    }
    Ok(codes)
}

//! Gödel numbering of machines and machine/input pairs.
//!
//! Machines are grouped into classes by shape `(n states, k symbols)`. Class
//! `c` has shape `unpair(c) = (k - 2, n - 1)` and contains `(2kn + 1)^(kn)`
//! machines. Within a class a machine is the little-endian base-`(2kn + 1)`
//! number `T` whose digit `e = s·k + σ` describes the entry for state `s`
//! reading symbol `σ`: digit 0 means no instruction, otherwise
//! `digit - 1 = (write·2 + dir)·n + next` with `dir` 0 for left and 1 for
//! right. The machine index is the sum of the sizes of all earlier classes
//! plus `T`, and the code of a pair is `pair(machine index, input)`.
//!
//! Every natural number decodes, so code 0 is the one-state machine with no
//! instructions on input 0.

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};

use crate::machine::{Direction, Instruction, Machine};

/// Cantor pairing.
pub fn pair(a: &BigUint, b: &BigUint) -> BigUint {
    let s = a + b;
    (&s * (&s + 1u32)) / 2u32 + b
}

pub fn unpair(z: &BigUint) -> (BigUint, BigUint) {
    // w = floor((sqrt(8z + 1) - 1) / 2)
    let w = ((z * 8u32 + 1u32).sqrt() - 1u32) / 2u32;
    let t = (&w * (&w + 1u32)) / 2u32;
    let b = z - t;
    let a = &w - &b;
    (a, b)
}

pub fn pair_u64(a: u64, b: u64) -> Option<u64> {
    let s = a.checked_add(b)?;
    let tri = if s % 2 == 0 {
        (s / 2).checked_mul(s.checked_add(1)?)?
    } else {
        s.checked_mul(s.div_ceil(2))?
    };
    tri.checked_add(b)
}

pub fn unpair_u64(z: u64) -> (u64, u64) {
    let (a, b) = unpair(&BigUint::from(z));
    (a.to_u64().unwrap(), b.to_u64().unwrap())
}

/// `(states, alphabet)` of class `c`, or `None` if the alphabet would not
/// fit a byte.
fn class_shape(c: &BigUint) -> Option<(usize, u8)> {
    let (a, b) = unpair(c);
    let k = a.to_u64()?.checked_add(2)?;
    let n = b.to_u64()?.checked_add(1)?;
    Some((usize::try_from(n).ok()?, u8::try_from(k).ok()?))
}

fn class_of(states: usize, alphabet: u8) -> BigUint {
    pair(&BigUint::from(alphabet as u64 - 2), &BigUint::from(states as u64 - 1))
}

fn digit_base(states: usize, alphabet: u8) -> u64 {
    2 * alphabet as u64 * states as u64 + 1
}

pub fn class_size(states: usize, alphabet: u8) -> BigUint {
    BigUint::from(digit_base(states, alphabet)).pow((states * alphabet as usize) as u32)
}

pub fn class_size_u64(states: usize, alphabet: u8) -> Option<u64> {
    class_size(states, alphabet).to_u64()
}

/// Index of the first machine of shape `(states, alphabet)`.
pub fn class_offset(states: usize, alphabet: u8) -> BigUint {
    let c = class_of(states, alphabet);
    let mut total = BigUint::zero();
    let mut i = BigUint::zero();
    while i < c {
        if let Some((n, k)) = class_shape(&i) {
            total += class_size(n, k);
        }
        i += 1u32;
    }
    total
}

fn entry_digit(ins: Option<&Instruction>, states: usize) -> u64 {
    match ins {
        None => 0,
        Some(i) => {
            let dir = match i.direction {
                Direction::Left => 0,
                Direction::Right => 1,
            };
            (i.write.0 as u64 * 2 + dir) * states as u64 + i.next_state as u64 + 1
        }
    }
}

fn entry_from_digit(digit: u64, read: u8, states: usize) -> Option<Instruction> {
    if digit == 0 {
        return None;
    }
    let v = digit - 1;
    let next = (v % states as u64) as usize;
    let wd = v / states as u64;
    let dir = if wd % 2 == 1 { Direction::Right } else { Direction::Left };
    Some(Instruction::new(read, (wd / 2) as u8, dir, next))
}

/// Position of `m` inside its shape class.
pub fn table_index(m: &Machine) -> BigUint {
    let n = m.state_count();
    let k = m.alphabet_size();
    let base = BigUint::from(digit_base(n, k));
    let mut t = BigUint::zero();
    for s in (0..n).rev() {
        for r in (0..k).rev() {
            t = t * &base + entry_digit(m.lookup(s, crate::machine::Symbol(r)), n);
        }
    }
    t
}

pub fn machine_from_table_big(states: usize, alphabet: u8, t: &BigUint) -> Machine {
    let base = BigUint::from(digit_base(states, alphabet));
    let mut rest = t.clone();
    let mut table = vec![Vec::new(); states];
    for list in table.iter_mut() {
        for r in 0..alphabet {
            let (q, d) = rest.div_rem(&base);
            rest = q;
            if let Some(ins) = entry_from_digit(d.to_u64().unwrap(), r, states) {
                list.push(ins);
            }
        }
    }
    Machine::new(alphabet, table).expect("every table index decodes to a valid machine")
}

pub fn machine_from_table_index(states: usize, alphabet: u8, t: u64) -> Machine {
    let base = digit_base(states, alphabet);
    let mut rest = t;
    let table = (0..states)
        .map(|_| {
            (0..alphabet)
                .filter_map(|r| {
                    let d = rest % base;
                    rest /= base;
                    entry_from_digit(d, r, states)
                })
                .collect()
        })
        .collect();
    Machine::new(alphabet, table).expect("every table index decodes to a valid machine")
}

pub fn machine_index(m: &Machine) -> BigUint {
    class_offset(m.state_count(), m.alphabet_size()) + table_index(m)
}

pub fn machine_from_index(index: &BigUint) -> Machine {
    let mut rest = index.clone();
    let mut c = BigUint::zero();
    loop {
        match class_shape(&c) {
            Some((n, k)) => {
                let size = class_size(n, k);
                if rest < size {
                    return machine_from_table_big(n, k, &rest);
                }
                rest -= size;
            }
            // Shapes beyond a byte-sized alphabet are never reached by a
            // representable index, but keep decoding total anyway.
            None => return Machine::trivially_halting(),
        }
        c += 1u32;
    }
}

pub fn godel_encode(m: &Machine, input: &BigUint) -> BigUint {
    pair(&machine_index(m), input)
}

pub fn godel_decode(code: &BigUint) -> (Machine, BigUint) {
    let (mi, input) = unpair(code);
    (machine_from_index(&mi), input)
}

/// Code of `(m, input)` if it fits in a `u64`.
pub fn encode_code(m: &Machine, input: u64) -> Option<u64> {
    godel_encode(m, &BigUint::from(input)).to_u64()
}

pub fn decode_code(code: u64) -> (Machine, u64) {
    let (mi, input) = unpair_u64(code);
    (machine_from_index(&BigUint::from(mi)), input)
}

/// Smallest code with a given machine index and input 0 is `pair(i, 0)`.
pub fn first_code_of(index: u64) -> Option<u64> {
    pair_u64(index, 0)
}

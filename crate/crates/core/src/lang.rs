//! Text format for machines (`.tm` files).
//!
//! ```text
//! ; comment to end of line
//! alphabet 3                  ; optional, inferred from the symbols used
//! state 0: (0, 0, right, 1)
//! state 1:
//!   (0, #, R, 2)
//!   - (1, 1, left, 1)         ; a leading dash is allowed
//! state 2:                    ; no instructions: halts
//! ```
//!
//! State headers must appear in order `0, 1, 2, ...`. Symbols are `0`, `1`,
//! `#`, `μ` (or `mu`), `sym<N>`, or decimal codes. Directions are `right`,
//! `left`, `R` or `L` (any case). Whitespace is insignificant.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::godel;
use crate::machine::{Direction, Instruction, Machine, MachineError, Symbol};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseDiagnostic {
    /// 1-based.
    pub line: usize,
    /// 1-based, in characters.
    pub column: usize,
    pub message: String,
    pub severity: Severity,
}

impl fmt::Display for ParseDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{}:{}: {sev}: {}", self.line, self.column, self.message)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub struct ParseError {
    pub diagnostics: Vec<ParseDiagnostic>,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.diagnostics.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Word(String),
    Num(u64),
    Glyph(char),
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    col: usize,
}

fn lex(line: &str, lineno: usize, diags: &mut Vec<ParseDiagnostic>) -> Vec<Token> {
    let chars: Vec<char> = line.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c == ';' {
            break;
        }
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            match text.parse() {
                Ok(n) => out.push(Token { tok: Tok::Num(n), col }),
                Err(_) => diags.push(error(lineno, col, format!("number `{text}` is too large"))),
            }
            continue;
        }
        if c.is_alphabetic() && c != 'μ' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') && chars[i] != 'μ' {
                i += 1;
            }
            out.push(Token {
                tok: Tok::Word(chars[start..i].iter().collect()),
                col,
            });
            continue;
        }
        if matches!(c, '(' | ')' | ',' | ':' | '#' | 'μ' | '-') {
            out.push(Token {
                tok: Tok::Glyph(c),
                col,
            });
            i += 1;
            continue;
        }
        diags.push(error(lineno, col, format!("unexpected character `{c}`")));
        i += 1;
    }
    out
}

fn error(line: usize, column: usize, message: impl Into<String>) -> ParseDiagnostic {
    ParseDiagnostic {
        line,
        column,
        message: message.into(),
        severity: Severity::Error,
    }
}

struct Cursor<'a> {
    toks: &'a [Token],
    pos: usize,
    line: usize,
    end_col: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<&'a Token> {
        self.toks.get(self.pos)
    }

    fn col(&self) -> usize {
        self.peek().map(|t| t.col).unwrap_or(self.end_col)
    }

    fn next(&mut self) -> Option<&'a Token> {
        let t = self.toks.get(self.pos);
        self.pos += 1;
        t
    }

    fn expect_glyph(&mut self, g: char) -> Result<(), ParseDiagnostic> {
        let col = self.col();
        match self.next() {
            Some(Token { tok: Tok::Glyph(c), .. }) if *c == g => Ok(()),
            Some(t) => Err(error(
                self.line,
                t.col,
                format!("expected `{g}`, found {}", describe(&t.tok)),
            )),
            None => Err(error(self.line, col, format!("expected `{g}` before end of line"))),
        }
    }

    fn number(&mut self, what: &str) -> Result<(u64, usize), ParseDiagnostic> {
        let col = self.col();
        match self.next() {
            Some(Token { tok: Tok::Num(n), col }) => Ok((*n, *col)),
            Some(t) => Err(error(
                self.line,
                t.col,
                format!("expected {what}, found {}", describe(&t.tok)),
            )),
            None => Err(error(self.line, col, format!("expected {what} before end of line"))),
        }
    }

    fn symbol(&mut self) -> Result<(u64, usize), ParseDiagnostic> {
        let col = self.col();
        let Some(t) = self.next() else {
            return Err(error(self.line, col, "expected a symbol before end of line"));
        };
        let code = match &t.tok {
            Tok::Num(n) => Some(*n),
            Tok::Glyph('#') => Some(2),
            Tok::Glyph('μ') => Some(3),
            Tok::Word(w) if w.eq_ignore_ascii_case("mu") => Some(3),
            Tok::Word(w) if w.starts_with("sym") => w[3..].parse().ok(),
            _ => None,
        };
        match code {
            Some(c) => Ok((c, t.col)),
            None => Err(error(
                self.line,
                t.col,
                format!("expected a symbol, found {}", describe(&t.tok)),
            )),
        }
    }

    fn direction(&mut self) -> Result<Direction, ParseDiagnostic> {
        let col = self.col();
        match self.next() {
            Some(Token { tok: Tok::Word(w), col }) => match w.to_ascii_lowercase().as_str() {
                "right" | "r" => Ok(Direction::Right),
                "left" | "l" => Ok(Direction::Left),
                _ => Err(error(self.line, *col, format!("expected a direction, found `{w}`"))),
            },
            Some(t) => Err(error(
                self.line,
                t.col,
                format!("expected a direction, found {}", describe(&t.tok)),
            )),
            None => Err(error(self.line, col, "expected a direction before end of line")),
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Word(w) => format!("`{w}`"),
        Tok::Num(n) => format!("`{n}`"),
        Tok::Glyph(c) => format!("`{c}`"),
    }
}

struct Raw {
    read: u64,
    write: u64,
    dir: Direction,
    next: u64,
    line: usize,
    col: usize,
    read_col: usize,
    write_col: usize,
    next_col: usize,
}

fn tuple(cur: &mut Cursor) -> Result<Raw, ParseDiagnostic> {
    let col = cur.col();
    cur.expect_glyph('(')?;
    let (read, read_col) = cur.symbol()?;
    cur.expect_glyph(',')?;
    let (write, write_col) = cur.symbol()?;
    cur.expect_glyph(',')?;
    let dir = cur.direction()?;
    cur.expect_glyph(',')?;
    let (next, next_col) = cur.number("a state number")?;
    cur.expect_glyph(')')?;
    Ok(Raw {
        read,
        write,
        dir,
        next,
        line: cur.line,
        col,
        read_col,
        write_col,
        next_col,
    })
}

/// Parses a machine listing, reporting every problem found.
pub fn parse(text: &str) -> Result<Machine, ParseError> {
    let (alphabet_size, table) = parse_table(text, true)?;
    Machine::new(alphabet_size, table).map_err(|e: MachineError| ParseError {
        diagnostics: vec![error(1, 1, e.to_string())],
    })
}

/// Alphabet size and per-state instruction lists in listing order.
pub(crate) fn parse_table(text: &str, deterministic: bool) -> Result<(u8, Vec<Vec<Instruction>>), ParseError> {
    let mut diags = Vec::new();
    let mut alphabet: Option<(u64, usize, usize)> = None;
    let mut states: Vec<Vec<Raw>> = Vec::new();

    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let toks = lex(line, lineno, &mut diags);
        let mut cur = Cursor {
            toks: &toks,
            pos: 0,
            line: lineno,
            end_col: line.chars().count() + 1,
        };
        while let Some(t) = cur.peek() {
            let res: Result<(), ParseDiagnostic> = match &t.tok {
                Tok::Word(w) if w == "alphabet" => {
                    cur.next();
                    cur.number("an alphabet size").map(|(n, col)| {
                        if alphabet.is_some() {
                            diags.push(error(lineno, t.col, "alphabet declared twice"));
                        }
                        alphabet = Some((n, lineno, col));
                    })
                }
                Tok::Word(w) if w == "state" => {
                    cur.next();
                    cur.number("a state number").and_then(|(n, col)| {
                        if n != states.len() as u64 {
                            diags.push(error(
                                lineno,
                                col,
                                format!("expected header for state {}, found state {n}", states.len()),
                            ));
                        }
                        states.push(Vec::new());
                        cur.expect_glyph(':')
                    })
                }
                Tok::Glyph('-') => {
                    cur.next();
                    Ok(())
                }
                Tok::Glyph('(') => {
                    if states.is_empty() {
                        Err(error(lineno, t.col, "instruction before the first state header"))
                    } else {
                        tuple(&mut cur).map(|raw| states.last_mut().unwrap().push(raw))
                    }
                }
                other => Err(error(lineno, t.col, format!("unexpected {}", describe(other)))),
            };
            if let Err(d) = res {
                diags.push(d);
                break;
            }
        }
    }

    if states.is_empty() && diags.is_empty() {
        diags.push(error(1, 1, "no state headers found"));
    }

    let used_max = states.iter().flatten().map(|r| r.read.max(r.write)).max().unwrap_or(0);
    let alphabet_size = match alphabet {
        Some((n, line, col)) => {
            if !(2..=255).contains(&n) {
                diags.push(error(line, col, format!("alphabet size {n} is outside 2..=255")));
            }
            n
        }
        None => (used_max + 1).max(2),
    };

    let count = states.len() as u64;
    let mut table = Vec::with_capacity(states.len());
    for (s, raws) in states.iter().enumerate() {
        let mut list: Vec<Instruction> = Vec::new();
        for r in raws {
            for (v, col) in [(r.read, r.read_col), (r.write, r.write_col)] {
                if v >= alphabet_size {
                    diags.push(error(
                        r.line,
                        col,
                        format!("symbol code {v} is outside an alphabet of size {alphabet_size}"),
                    ));
                }
            }
            if r.next >= count {
                diags.push(error(
                    r.line,
                    r.next_col,
                    format!("reference to undefined state {}", r.next),
                ));
            }
            if let Some(prev) = raws
                .iter()
                .filter(|_| deterministic)
                .take_while(|o| !std::ptr::eq(*o, r))
                .find(|o| o.read == r.read)
            {
                diags.push(error(
                    r.line,
                    r.col,
                    format!(
                        "nondeterministic entry: state {s} already has an instruction for symbol {} (line {})",
                        Symbol(r.read.min(255) as u8),
                        prev.line
                    ),
                ));
            }
            list.push(Instruction::new(
                r.read.min(255) as u8,
                r.write.min(255) as u8,
                r.dir,
                r.next as usize,
            ));
        }
        table.push(list);
    }

    if !diags.is_empty() {
        diags.sort_by_key(|d| (d.line, d.column));
        return Err(ParseError { diagnostics: diags });
    }
    Ok((alphabet_size as u8, table))
}

fn inferred_alphabet(states: &[Vec<Instruction>]) -> u8 {
    let used = states
        .iter()
        .flatten()
        .map(|i| i.read.0.max(i.write.0))
        .max()
        .unwrap_or(0);
    (used + 1).max(2)
}

/// Canonical listing: one instruction per line, sorted by read symbol.
pub fn serialize(m: &Machine) -> String {
    serialize_table(m.alphabet_size(), m.states())
}

pub(crate) fn serialize_table(alphabet: u8, states: &[Vec<Instruction>]) -> String {
    let mut out = String::new();
    if alphabet != inferred_alphabet(states) {
        out.push_str(&format!("alphabet {alphabet}\n"));
    }
    for (s, list) in states.iter().enumerate() {
        out.push_str(&format!("state {s}:\n"));
        for ins in list {
            let dir = match ins.direction {
                Direction::Left => "left",
                Direction::Right => "right",
            };
            out.push_str(&format!("  ({}, {}, {dir}, {})\n", ins.read, ins.write, ins.next_state));
        }
    }
    out
}

/// Every deterministic machine with exactly `states` states over an
/// alphabet of `alphabet` symbols, in increasing Gödel-number order.
pub fn enumerate_machines(states: usize, alphabet: u8) -> impl Iterator<Item = Machine> + Clone {
    assert!(states >= 1 && alphabet >= 2);
    let count = godel::class_size_u64(states, alphabet).expect("class too large to enumerate");
    (0..count).map(move |t| godel::machine_from_table_index(states, alphabet, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const ONE_THIRD: &str = include_str!("../../../figures/one-third.tm");

    #[test]
    fn one_third_listing() {
        let m = parse(ONE_THIRD).unwrap();
        assert_eq!(m.state_count(), 4);
        assert_eq!(m.alphabet_size(), 3);
        let text = serialize(&m);
        assert!(text.contains("state 1:\n  (0, #, right, 2)"));
        assert!(text.contains("state 3:\n  (0, #, right, 0)"));
        assert_eq!(text.matches('(').count(), 4);
    }

    #[test]
    fn trivially_halting_listing() {
        assert_eq!(serialize(&Machine::trivially_halting()), "state 0:\n");
        assert_eq!(parse("state 0:").unwrap(), Machine::trivially_halting());
    }

    #[test]
    fn duplicate_entry_reported() {
        let err = parse("state 0: (0,0,R,1)\nstate 1:\n (0, 1, R, 0)\n (0, 0, L, 1)\n").unwrap_err();
        assert_eq!(err.diagnostics.len(), 1);
        let d = &err.diagnostics[0];
        assert!(d.message.contains("nondeterministic entry"), "{d}");
        assert_eq!((d.line, d.column), (4, 2));
    }

    #[test]
    fn diagnostics_have_positions() {
        for (text, line) in [
            ("state 0: (0, 0, up, 0)", 1),
            ("state 0:\nstate 2:", 2),
            ("state 0: (0, 0, R, 3)", 1),
            ("(0,0,R,0)", 1),
            ("state 0: (0, 0, R, 0", 1),
            ("state 0: (0, 7, R, 0)\nalphabet 3", 1),
            ("state 0: (0, 0, R, 0) %", 1),
            ("", 1),
        ] {
            let err = parse(text).unwrap_err();
            assert!(!err.diagnostics.is_empty());
            assert_eq!(err.diagnostics[0].line, line, "{text:?}: {err}");
            assert!(err.diagnostics[0].column >= 1);
        }
    }

    #[test]
    fn symbol_spellings() {
        let m = parse("alphabet 5\nstate 0: - (mu, μ, L, 0)\n (#, 2, r, 0)\n (sym4, 4, Left, 0)").unwrap();
        assert_eq!(m.lookup(0, Symbol::MARKER).unwrap().write, Symbol::MARKER);
        assert_eq!(m.lookup(0, Symbol::SEPARATOR).unwrap().write, Symbol::SEPARATOR);
        assert_eq!(m.lookup(0, Symbol(4)).unwrap().direction, Direction::Left);
        assert!(serialize(&m).contains("(sym4, sym4, left, 0)"));
    }

    #[test]
    fn enumeration_counts_match_formula() {
        // Each (state, symbol) entry is absent or one of k writes × 2
        // directions × n targets.
        for (n, k) in [(1usize, 2u8), (1, 3), (2, 2)] {
            let per_entry = 2 * k as u64 * n as u64 + 1;
            let expected = per_entry.pow((n * k as usize) as u32);
            assert_eq!(enumerate_machines(n, k).count() as u64, expected);
        }
    }

    #[test]
    fn enumeration_order_and_uniqueness() {
        let first = enumerate_machines(1, 2).next().unwrap();
        assert_eq!(first, Machine::trivially_halting());
        let all: Vec<Machine> = enumerate_machines(2, 2).collect();
        let codes: Vec<_> = all.iter().map(godel::machine_index).collect();
        assert!(codes.windows(2).all(|w| w[0] < w[1]));
        let set: std::collections::HashSet<_> = all.iter().collect();
        assert_eq!(set.len(), all.len());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]

        #[test]
        fn parse_inverts_serialize(m in crate::testutil::arb_machine()) {
            let text = serialize(&m);
            let back = parse(&text).unwrap();
            prop_assert_eq!(&back, &m);
            prop_assert_eq!(serialize(&back), text);
        }
    }
}

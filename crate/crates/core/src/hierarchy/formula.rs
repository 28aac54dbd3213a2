//! First-order arithmetic over the naturals with `+`, `·` and `=`.
//!
//! ```text
//! formula := disj
//! disj    := conj (("∨" | "|" | "or") conj)*
//! conj    := unary (("∧" | "&" | "and") unary)*
//! unary   := ("¬" | "~" | "not") unary
//!          | ("∃" | "exists" | "∀" | "forall") var [("<" | "<=" | "≤") num] ["."] unary
//!          | term ("=" | "!=" | "≠") term
//!          | "(" formula ")"
//! term    := prod ("+" prod)*
//! prod    := atom (("·" | "*") atom)*
//! atom    := num | var | "(" term ")"
//! ```
//!
//! A bound turns a quantifier into a finite search: `∃x<9` ranges over
//! `0..9`. Bounds must leave the range non-empty.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Term {
    Num(u64),
    Var(String),
    Add(Box<Term>, Box<Term>),
    Mul(Box<Term>, Box<Term>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantKind {
    Exists,
    Forall,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Formula {
    Eq(Term, Term),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    /// `bound` is an exclusive upper limit on the variable.
    Quant {
        kind: QuantKind,
        var: String,
        bound: Option<u64>,
        body: Box<Formula>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{message} at character {position}")]
pub struct FormulaError {
    pub position: usize,
    pub message: String,
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Num(n) => write!(f, "{n}"),
            Term::Var(v) => f.write_str(v),
            Term::Add(a, b) => write!(f, "({a} + {b})"),
            Term::Mul(a, b) => write!(f, "({a} * {b})"),
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Eq(a, b) => write!(f, "{a} = {b}"),
            Formula::Not(x) => write!(f, "not ({x})"),
            Formula::And(a, b) => write!(f, "({a}) and ({b})"),
            Formula::Or(a, b) => write!(f, "({a}) or ({b})"),
            Formula::Quant { kind, var, bound, body } => {
                let q = match kind {
                    QuantKind::Exists => "exists",
                    QuantKind::Forall => "forall",
                };
                match bound {
                    Some(b) => write!(f, "{q} {var} < {b}. ({body})"),
                    None => write!(f, "{q} {var}. ({body})"),
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Num(u64),
    Word(String),
    Sym(&'static str),
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, FormulaError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let start = i;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_digit() {
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            let n = s.parse().map_err(|_| FormulaError {
                position: start,
                message: format!("number {s} is too large"),
            })?;
            out.push((start, Tok::Num(n)));
            continue;
        }
        if c.is_alphabetic() && !"∃∀¬∧∨".contains(c) {
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '\'') {
                i += 1;
            }
            out.push((start, Tok::Word(chars[start..i].iter().collect())));
            continue;
        }
        let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        let sym = match two.as_str() {
            "<=" => Some("<="),
            "!=" => Some("!="),
            _ => None,
        };
        if let Some(s) = sym {
            out.push((start, Tok::Sym(s)));
            i += 2;
            continue;
        }
        let sym = match c {
            '∃' => "exists",
            '∀' => "forall",
            '¬' | '~' => "not",
            '∧' | '&' => "and",
            '∨' | '|' => "or",
            '≤' => "<=",
            '≠' => "!=",
            '·' | '*' => "*",
            '+' => "+",
            '=' => "=",
            '<' => "<",
            '(' => "(",
            ')' => ")",
            '.' => ".",
            _ => {
                return Err(FormulaError {
                    position: start,
                    message: format!("unexpected character {c:?}"),
                })
            }
        };
        out.push((start, Tok::Sym(sym)));
        i += 1;
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.1)
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |t| t.0)
    }

    fn fail<T>(&self, message: impl Into<String>) -> Result<T, FormulaError> {
        Err(FormulaError {
            position: self.here(),
            message: message.into(),
        })
    }

    /// Keywords and symbols share one namespace.
    fn is(&self, s: &str) -> bool {
        match self.peek() {
            Some(Tok::Sym(x)) => *x == s,
            Some(Tok::Word(w)) => w == s,
            _ => false,
        }
    }

    fn eat(&mut self, s: &str) -> bool {
        if self.is(s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, s: &str) -> Result<(), FormulaError> {
        if self.eat(s) {
            Ok(())
        } else {
            self.fail(format!("expected {s:?}"))
        }
    }

    fn disj(&mut self) -> Result<Formula, FormulaError> {
        let mut f = self.conj()?;
        while self.eat("or") {
            f = Formula::Or(Box::new(f), Box::new(self.conj()?));
        }
        Ok(f)
    }

    fn conj(&mut self) -> Result<Formula, FormulaError> {
        let mut f = self.unary()?;
        while self.eat("and") {
            f = Formula::And(Box::new(f), Box::new(self.unary()?));
        }
        Ok(f)
    }

    fn unary(&mut self) -> Result<Formula, FormulaError> {
        if self.eat("not") {
            return Ok(Formula::Not(Box::new(self.unary()?)));
        }
        for (word, kind) in [("exists", QuantKind::Exists), ("forall", QuantKind::Forall)] {
            if self.eat(word) {
                let var = match self.peek() {
                    Some(Tok::Word(w)) if !is_keyword(w) => w.clone(),
                    _ => return self.fail("expected a variable"),
                };
                self.pos += 1;
                let bound = if self.eat("<") {
                    Some(self.number()?)
                } else if self.eat("<=") {
                    Some(self.number()?.checked_add(1).ok_or(FormulaError {
                        position: self.here(),
                        message: "bound too large".into(),
                    })?)
                } else {
                    None
                };
                if bound == Some(0) {
                    return self.fail("empty quantifier range");
                }
                self.eat(".");
                let body = self.unary()?;
                return Ok(Formula::Quant {
                    kind,
                    var,
                    bound,
                    body: Box::new(body),
                });
            }
        }
        // An equation, or a parenthesised formula.
        let save = self.pos;
        if let Ok(lhs) = self.term() {
            if self.eat("=") {
                return Ok(Formula::Eq(lhs, self.term()?));
            }
            if self.eat("!=") {
                return Ok(Formula::Not(Box::new(Formula::Eq(lhs, self.term()?))));
            }
        }
        self.pos = save;
        if self.eat("(") {
            let f = self.disj()?;
            self.expect(")")?;
            return Ok(f);
        }
        self.fail("expected a formula")
    }

    fn number(&mut self) -> Result<u64, FormulaError> {
        match self.peek() {
            Some(Tok::Num(n)) => {
                let n = *n;
                self.pos += 1;
                Ok(n)
            }
            _ => self.fail("expected a number"),
        }
    }

    fn term(&mut self) -> Result<Term, FormulaError> {
        let mut t = self.prod()?;
        while self.eat("+") {
            t = Term::Add(Box::new(t), Box::new(self.prod()?));
        }
        Ok(t)
    }

    fn prod(&mut self) -> Result<Term, FormulaError> {
        let mut t = self.atom()?;
        while self.eat("*") {
            t = Term::Mul(Box::new(t), Box::new(self.atom()?));
        }
        Ok(t)
    }

    fn atom(&mut self) -> Result<Term, FormulaError> {
        match self.peek().cloned() {
            Some(Tok::Num(n)) => {
                self.pos += 1;
                Ok(Term::Num(n))
            }
            Some(Tok::Word(w)) if !is_keyword(&w) => {
                self.pos += 1;
                Ok(Term::Var(w))
            }
            Some(Tok::Sym("(")) => {
                self.pos += 1;
                let t = self.term()?;
                self.expect(")")?;
                Ok(t)
            }
            _ => self.fail("expected a term"),
        }
    }
}

fn is_keyword(w: &str) -> bool {
    matches!(w, "exists" | "forall" | "not" | "and" | "or")
}

pub fn parse_formula(text: &str) -> Result<Formula, FormulaError> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        end: text.chars().count(),
    };
    let f = p.disj()?;
    if p.pos != p.toks.len() {
        return p.fail("unexpected trailing input");
    }
    Ok(f)
}

impl Term {
    pub fn eval(&self, env: &BTreeMap<String, u64>) -> Option<BigUint> {
        Some(match self {
            Term::Num(n) => BigUint::from(*n),
            Term::Var(v) => BigUint::from(*env.get(v)?),
            Term::Add(a, b) => a.eval(env)? + b.eval(env)?,
            Term::Mul(a, b) => a.eval(env)? * b.eval(env)?,
        })
    }

    fn vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Term::Num(_) => {}
            Term::Var(v) => {
                out.insert(v.clone());
            }
            Term::Add(a, b) | Term::Mul(a, b) => {
                a.vars(out);
                b.vars(out);
            }
        }
    }

    fn rename(&self, from: &str, to: &str) -> Term {
        match self {
            Term::Var(v) if v == from => Term::Var(to.to_string()),
            Term::Num(_) | Term::Var(_) => self.clone(),
            Term::Add(a, b) => Term::Add(Box::new(a.rename(from, to)), Box::new(b.rename(from, to))),
            Term::Mul(a, b) => Term::Mul(Box::new(a.rename(from, to)), Box::new(b.rename(from, to))),
        }
    }
}

/// Kleene three-valued truth.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tri {
    True,
    False,
    Unknown,
}

impl std::ops::Not for Tri {
    type Output = Tri;

    fn not(self) -> Tri {
        match self {
            Tri::True => Tri::False,
            Tri::False => Tri::True,
            Tri::Unknown => Tri::Unknown,
        }
    }
}

impl Tri {
    fn from_bool(b: bool) -> Tri {
        if b {
            Tri::True
        } else {
            Tri::False
        }
    }
}

impl Formula {
    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut BTreeSet::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut BTreeSet<String>, out: &mut BTreeSet<String>) {
        match self {
            Formula::Eq(a, b) => {
                let mut vs = BTreeSet::new();
                a.vars(&mut vs);
                b.vars(&mut vs);
                out.extend(vs.into_iter().filter(|v| !bound.contains(v)));
            }
            Formula::Not(x) => x.collect_free(bound, out),
            Formula::And(a, b) | Formula::Or(a, b) => {
                a.collect_free(bound, out);
                b.collect_free(bound, out);
            }
            Formula::Quant { var, body, .. } => {
                let fresh = bound.insert(var.clone());
                body.collect_free(bound, out);
                if fresh {
                    bound.remove(var);
                }
            }
        }
    }

    /// Every variable name used anywhere, bound or free.
    pub fn all_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.walk_vars(&mut out);
        out
    }

    fn walk_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Formula::Eq(a, b) => {
                a.vars(out);
                b.vars(out);
            }
            Formula::Not(x) => x.walk_vars(out),
            Formula::And(a, b) | Formula::Or(a, b) => {
                a.walk_vars(out);
                b.walk_vars(out);
            }
            Formula::Quant { var, body, .. } => {
                out.insert(var.clone());
                body.walk_vars(out);
            }
        }
    }

    pub fn is_quantifier_free(&self) -> bool {
        match self {
            Formula::Eq(..) => true,
            Formula::Not(x) => x.is_quantifier_free(),
            Formula::And(a, b) | Formula::Or(a, b) => a.is_quantifier_free() && b.is_quantifier_free(),
            Formula::Quant { .. } => false,
        }
    }

    /// Evaluation with unbounded quantifiers searched over `0..=search`.
    /// A search that finds nothing is inconclusive; a bounded quantifier
    /// whose whole range fits in the search is decided.
    pub fn eval(&self, env: &mut BTreeMap<String, u64>, search: u64) -> Tri {
        match self {
            Formula::Eq(a, b) => match (a.eval(env), b.eval(env)) {
                (Some(x), Some(y)) => Tri::from_bool(x == y),
                _ => Tri::Unknown,
            },
            Formula::Not(x) => !x.eval(env, search),
            Formula::And(a, b) => match (a.eval(env, search), b.eval(env, search)) {
                (Tri::False, _) | (_, Tri::False) => Tri::False,
                (Tri::True, Tri::True) => Tri::True,
                _ => Tri::Unknown,
            },
            Formula::Or(a, b) => match (a.eval(env, search), b.eval(env, search)) {
                (Tri::True, _) | (_, Tri::True) => Tri::True,
                (Tri::False, Tri::False) => Tri::False,
                _ => Tri::Unknown,
            },
            Formula::Quant { kind, var, bound, body } => {
                let limit = match bound {
                    Some(b) => (*b).min(search.saturating_add(1)),
                    None => search.saturating_add(1),
                };
                let complete = bound.is_some_and(|b| b <= search.saturating_add(1));
                let (hit, miss) = match kind {
                    QuantKind::Exists => (Tri::True, Tri::False),
                    QuantKind::Forall => (Tri::False, Tri::True),
                };
                let saved = env.get(var).copied();
                let mut unknown = false;
                let mut result = None;
                for v in 0..limit {
                    env.insert(var.clone(), v);
                    match body.eval(env, search) {
                        t if t == hit => {
                            result = Some(hit);
                            break;
                        }
                        Tri::Unknown => unknown = true,
                        _ => {}
                    }
                }
                match saved {
                    Some(s) => env.insert(var.clone(), s),
                    None => env.remove(var),
                };
                match result {
                    Some(r) => r,
                    None if complete && !unknown => miss,
                    None => Tri::Unknown,
                }
            }
        }
    }

    pub fn eval_closed(&self, search: u64) -> Tri {
        self.eval(&mut BTreeMap::new(), search)
    }

    fn rename_free(&self, from: &str, to: &str) -> Formula {
        match self {
            Formula::Eq(a, b) => Formula::Eq(a.rename(from, to), b.rename(from, to)),
            Formula::Not(x) => Formula::Not(Box::new(x.rename_free(from, to))),
            Formula::And(a, b) => Formula::And(Box::new(a.rename_free(from, to)), Box::new(b.rename_free(from, to))),
            Formula::Or(a, b) => Formula::Or(Box::new(a.rename_free(from, to)), Box::new(b.rename_free(from, to))),
            Formula::Quant { var, .. } if var == from => self.clone(),
            Formula::Quant { kind, var, bound, body } => Formula::Quant {
                kind: *kind,
                var: var.clone(),
                bound: *bound,
                body: Box::new(body.rename_free(from, to)),
            },
        }
    }

    /// Pushes negations down to the equations.
    fn nnf(&self, negate: bool) -> Formula {
        match (self, negate) {
            (Formula::Eq(..), false) => self.clone(),
            (Formula::Eq(..), true) => Formula::Not(Box::new(self.clone())),
            (Formula::Not(x), n) => x.nnf(!n),
            (Formula::And(a, b), false) => Formula::And(Box::new(a.nnf(false)), Box::new(b.nnf(false))),
            (Formula::And(a, b), true) => Formula::Or(Box::new(a.nnf(true)), Box::new(b.nnf(true))),
            (Formula::Or(a, b), false) => Formula::Or(Box::new(a.nnf(false)), Box::new(b.nnf(false))),
            (Formula::Or(a, b), true) => Formula::And(Box::new(a.nnf(true)), Box::new(b.nnf(true))),
            (Formula::Quant { kind, var, bound, body }, n) => Formula::Quant {
                kind: match (kind, n) {
                    (k, false) => *k,
                    (QuantKind::Exists, true) => QuantKind::Forall,
                    (QuantKind::Forall, true) => QuantKind::Exists,
                },
                var: var.clone(),
                bound: *bound,
                body: Box::new(body.nnf(n)),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quantifier {
    pub kind: QuantKind,
    pub var: String,
    pub bound: Option<u64>,
}

/// Prenex normal form: quantifiers renamed to `y1, y2, ...` (skipping names
/// already in use) and pulled to the front, left to right.
pub fn prenex(f: &Formula) -> (Vec<Quantifier>, Formula) {
    let taken = f.all_vars();
    let mut counter = 0;
    let mut fresh = || loop {
        counter += 1;
        let name = format!("y{counter}");
        if !taken.contains(&name) {
            return name;
        }
    };
    fn pull(f: &Formula, fresh: &mut dyn FnMut() -> String) -> (Vec<Quantifier>, Formula) {
        match f {
            Formula::Eq(..) | Formula::Not(_) => (Vec::new(), f.clone()),
            Formula::And(a, b) | Formula::Or(a, b) => {
                let (mut pa, ma) = pull(a, fresh);
                let (pb, mb) = pull(b, fresh);
                pa.extend(pb);
                let m = match f {
                    Formula::And(..) => Formula::And(Box::new(ma), Box::new(mb)),
                    _ => Formula::Or(Box::new(ma), Box::new(mb)),
                };
                (pa, m)
            }
            Formula::Quant { kind, var, bound, body } => {
                let name = fresh();
                let renamed = body.rename_free(var, &name);
                let (rest, m) = pull(&renamed, fresh);
                let mut prefix = vec![Quantifier {
                    kind: *kind,
                    var: name,
                    bound: *bound,
                }];
                prefix.extend(rest);
                (prefix, m)
            }
        }
    }
    pull(&f.nnf(false), &mut fresh)
}

/// Replaces the left side `L` of the first equation with `L + x`.
pub fn inject_variable(f: &Formula, x: &str) -> Option<Formula> {
    fn go(f: &Formula, x: &str, done: &mut bool) -> Formula {
        if *done {
            return f.clone();
        }
        match f {
            Formula::Eq(a, b) => {
                *done = true;
                Formula::Eq(
                    Term::Add(Box::new(a.clone()), Box::new(Term::Var(x.to_string()))),
                    b.clone(),
                )
            }
            Formula::Not(y) => Formula::Not(Box::new(go(y, x, done))),
            Formula::And(a, b) => {
                let a = go(a, x, done);
                Formula::And(Box::new(a), Box::new(go(b, x, done)))
            }
            Formula::Or(a, b) => {
                let a = go(a, x, done);
                Formula::Or(Box::new(a), Box::new(go(b, x, done)))
            }
            Formula::Quant { kind, var, bound, body } => Formula::Quant {
                kind: *kind,
                var: var.clone(),
                bound: *bound,
                body: Box::new(go(body, x, done)),
            },
        }
    }
    let mut done = false;
    let out = go(f, x, &mut done);
    done.then_some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(s: &str) -> Formula {
        parse_formula(s).unwrap()
    }

    #[test]
    fn parses_both_notations() {
        assert_eq!(f("¬∃x≤8 (8 = 3·x)"), f("not exists x <= 8. (8 = 3 * x)"));
        assert_eq!(f("∀y<5 (x + y = y + x)"), f("forall y < 5 x + y = y + x"));
        assert_eq!(
            f("(x + 1) * 2 = 4"),
            Formula::Eq(
                Term::Mul(
                    Box::new(Term::Add(Box::new(Term::Var("x".into())), Box::new(Term::Num(1)))),
                    Box::new(Term::Num(2))
                ),
                Term::Num(4)
            )
        );
        assert_eq!(f("1 != 2"), Formula::Not(Box::new(f("1 = 2"))));
        assert!(parse_formula("∃x<0 (x = x)").is_err());
        assert!(parse_formula("x = ").is_err());
        assert!(parse_formula("x + 1").is_err());
    }

    #[test]
    fn display_round_trips() {
        for s in [
            "¬∃x≤8 (8 = 3·x)",
            "∀a ∃b<4 (a = b ∨ ¬(a + 1 = b · 2)) ∧ 0 = 0",
            "(x = 1 or x = 2) and not (y = 3)",
        ] {
            let g = f(s);
            assert_eq!(parse_formula(&g.to_string()).unwrap(), g, "{g}");
        }
    }

    #[test]
    fn evaluation_is_honest() {
        assert_eq!(f("¬∃x≤8 (8 = 3·x)").eval_closed(100), Tri::True);
        assert_eq!(f("∃x≤8 (9 = 3·x)").eval_closed(100), Tri::True);
        // Unbounded: a miss proves nothing.
        assert_eq!(f("¬∃x (8 = 3·x)").eval_closed(100), Tri::Unknown);
        assert_eq!(f("∀y (y + 1 = 1 + y)").eval_closed(100), Tri::Unknown);
        assert_eq!(f("∀y (y = 3)").eval_closed(100), Tri::False);
        // A bounded range larger than the search cannot be finished.
        assert_eq!(f("∀y<500 (y + 0 = y)").eval_closed(100), Tri::Unknown);
        assert_eq!(f("0 = 0").eval_closed(0), Tri::True);
    }

    #[test]
    fn prenex_preserves_bounded_truth() {
        for s in [
            "¬∃x<9 (8 = 3·x)",
            "∀a<4 ∃b<4 (a = b) ∧ ¬∀c<3 (c = 1)",
            "(∃a<3 (a = 2)) ∨ (∀b<2 (b = 5))",
            "¬(∃a<3 (a · a = 4) ∧ ∀a<3 (a + a = a))",
        ] {
            let g = f(s);
            let (prefix, matrix) = prenex(&g);
            assert!(matrix.is_quantifier_free());
            let mut rebuilt = matrix;
            for q in prefix.iter().rev() {
                rebuilt = Formula::Quant {
                    kind: q.kind,
                    var: q.var.clone(),
                    bound: q.bound,
                    body: Box::new(rebuilt),
                };
            }
            assert_eq!(rebuilt.eval_closed(20), g.eval_closed(20), "{s}");
        }
    }

    #[test]
    fn free_variables() {
        assert_eq!(
            f("∃y (x = y + z)").free_vars(),
            ["x".to_string(), "z".to_string()].into()
        );
        assert!(f("∀x (x = x)").free_vars().is_empty());
        let g = inject_variable(&f("∃y (3 = y)"), "x").unwrap();
        assert_eq!(g.free_vars(), ["x".to_string()].into());
    }
}

//! Predicates `Q₁y₁ … Q_qy_q R(x, y₁, …, y_q)` with a decidable kernel `R`,
//! evaluated over bounded search ranges.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dovetail::halts_by;
use crate::godel;
use crate::machine::{decode_unary, encode_unary, run, Machine, RunError, RunOutcome};
use crate::ordinal::{
    detector_input, halting_detector, run_accelerated, AcceleratedOutput, LimitMode, LimitPolicy, OrdinalError,
};
use crate::par;

use super::formula::{inject_variable, parse_formula, prenex, Formula, FormulaError, QuantKind, Quantifier, Tri};

/// The recursive relation at the bottom of a predicate.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Kernel {
    /// A quantifier-free formula over `vars` (the first is `x`).
    Formula { matrix: Formula, vars: Vec<String> },
    /// A machine run on unary `⟨x, y₁, …, y_q⟩` (nested pairing) that halts
    /// leaving unary 1 (true) or 0 (false).
    Machine { machine: Machine },
    /// `R(x, t)`: the pair coded by `x` halts within `t` steps.
    HaltsBy,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Predicate {
    pub prefix: Vec<Quantifier>,
    pub kernel: Kernel,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum ThreeValued {
    /// Values picked for the quantified variables along the deciding path.
    True {
        witness: Vec<u64>,
    },
    False {
        counterexample: Vec<u64>,
    },
    Unknown {
        reason: String,
    },
}

impl ThreeValued {
    pub fn tri(&self) -> Tri {
        match self {
            ThreeValued::True { .. } => Tri::True,
            ThreeValued::False { .. } => Tri::False,
            ThreeValued::Unknown { .. } => Tri::Unknown,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum HierError {
    #[error("kernel did not halt within its budget at x = {x}, y = {ys:?}")]
    KernelBudget { x: u64, ys: Vec<u64> },
    #[error("kernel machine left no 0/1 answer at x = {x}, y = {ys:?}")]
    MalformedOutput { x: u64, ys: Vec<u64> },
    #[error("packed arguments do not fit in 64 bits")]
    PackOverflow,
    #[error("kernel expects {expected} arguments, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("the sentence has no equation")]
    NoEquality,
    #[error("free variables {0:?}")]
    NotClosed(Vec<String>),
    #[error("expected a single existential quantifier")]
    NotSigma1,
    #[error(transparent)]
    Formula(#[from] FormulaError),
    #[error(transparent)]
    Ordinal(#[from] OrdinalError),
    #[error("precondition failed: {0}")]
    Precondition(String),
}

/// `⟨x, y₁, …, y_q⟩ = π(x, π(y₁, … π(y_{q-1}, y_q)))`, or `x` when `q = 0`.
pub fn pack(x: u64, ys: &[u64]) -> Option<u64> {
    let mut all: VecDeque<u64> = ys.iter().copied().collect();
    all.push_front(x);
    let mut acc = all.pop_back()?;
    while let Some(v) = all.pop_back() {
        acc = godel::pair_u64(v, acc)?;
    }
    Some(acc)
}

impl Kernel {
    /// Decides `R(x, ys)`. Returns the verdict and the steps spent.
    pub fn decide(&self, x: u64, ys: &[u64], budget: u64) -> Result<(bool, u64), HierError> {
        match self {
            Kernel::Formula { matrix, vars } => {
                if vars.len() != ys.len() + 1 {
                    return Err(HierError::Arity {
                        expected: vars.len() - 1,
                        got: ys.len(),
                    });
                }
                let mut env: BTreeMap<String, u64> = vars
                    .iter()
                    .cloned()
                    .zip(std::iter::once(x).chain(ys.iter().copied()))
                    .collect();
                match matrix.eval(&mut env, 0) {
                    Tri::True => Ok((true, 1)),
                    Tri::False => Ok((false, 1)),
                    Tri::Unknown => Err(HierError::MalformedOutput { x, ys: ys.to_vec() }),
                }
            }
            Kernel::Machine { machine } => {
                let n = pack(x, ys).ok_or(HierError::PackOverflow)?;
                let over = || HierError::KernelBudget { x, ys: ys.to_vec() };
                match run(machine, encode_unary(n), budget, false) {
                    Ok(RunOutcome::Halted { config }) => match decode_unary(&config.tape) {
                        Ok(0) => Ok((false, config.steps)),
                        Ok(1) => Ok((true, config.steps)),
                        _ => Err(HierError::MalformedOutput { x, ys: ys.to_vec() }),
                    },
                    Ok(_) => Err(over()),
                    Err(RunError::LeftEdge { .. }) => Err(HierError::MalformedOutput { x, ys: ys.to_vec() }),
                }
            }
            Kernel::HaltsBy => match ys {
                [t] => Ok((halts_by(x, *t), t + 1)),
                _ => Err(HierError::Arity {
                    expected: 1,
                    got: ys.len(),
                }),
            },
        }
    }
}

impl Predicate {
    /// `P(x)` from a formula whose only free variable is `x`.
    pub fn from_formula(f: &Formula, x: &str) -> Result<Predicate, HierError> {
        let extra: Vec<String> = f.free_vars().into_iter().filter(|v| v != x).collect();
        if !extra.is_empty() {
            return Err(HierError::NotClosed(extra));
        }
        let (prefix, matrix) = prenex(f);
        let mut vars = vec![x.to_string()];
        vars.extend(prefix.iter().map(|q| q.var.clone()));
        Ok(Predicate {
            prefix,
            kernel: Kernel::Formula { matrix, vars },
        })
    }

    pub fn parse(text: &str, x: &str) -> Result<Predicate, HierError> {
        Predicate::from_formula(&parse_formula(text)?, x)
    }

    /// `∃t HaltsBy(x, t)`.
    pub fn halting() -> Predicate {
        Predicate {
            prefix: vec![Quantifier {
                kind: QuantKind::Exists,
                var: "t".into(),
                bound: None,
            }],
            kernel: Kernel::HaltsBy,
        }
    }

    pub fn is_sigma1(&self) -> bool {
        matches!(self.prefix.as_slice(), [q] if q.kind == QuantKind::Exists)
    }

    /// The complement: quantifiers flipped and the kernel negated.
    pub fn negation(&self) -> Option<Predicate> {
        let Kernel::Formula { matrix, vars } = &self.kernel else {
            return None;
        };
        Some(Predicate {
            prefix: self
                .prefix
                .iter()
                .map(|q| Quantifier {
                    kind: match q.kind {
                        QuantKind::Exists => QuantKind::Forall,
                        QuantKind::Forall => QuantKind::Exists,
                    },
                    ..q.clone()
                })
                .collect(),
            kernel: Kernel::Formula {
                matrix: Formula::Not(Box::new(matrix.clone())),
                vars: vars.clone(),
            },
        })
    }
}

/// Turns a closed sentence `s` into `P(x)` with `P(0) ⇔ s` by adding `+ x`
/// to the left side of its first equation.
pub fn sentence_to_predicate(s: &Formula) -> Result<Predicate, HierError> {
    let free: Vec<String> = s.free_vars().into_iter().collect();
    if !free.is_empty() {
        return Err(HierError::NotClosed(free));
    }
    let used = s.all_vars();
    let x = std::iter::once("x".to_string())
        .chain((0..).map(|i| format!("x{i}")))
        .find(|v| !used.contains(v))
        .expect("some name is free");
    let injected = inject_variable(s, &x).ok_or(HierError::NoEquality)?;
    Predicate::from_formula(&injected, &x)
}

/// Values searched for a quantifier, and whether they cover its domain.
fn range_of(q: &Quantifier, var_bound: u64) -> (u64, bool) {
    let search = var_bound.saturating_add(1);
    match q.bound {
        Some(b) if b <= search => (b, true),
        _ => (search, false),
    }
}

/// Top-level values are tried in parallel chunks of this size.
const CHUNK: u64 = 64;

fn eval_level(p: &Predicate, x: u64, ys: &mut Vec<u64>, var_bound: u64, budget: u64) -> Result<ThreeValued, HierError> {
    let i = ys.len();
    let Some(q) = p.prefix.get(i) else {
        let (v, _) = p.kernel.decide(x, ys, budget)?;
        return Ok(if v {
            ThreeValued::True { witness: Vec::new() }
        } else {
            ThreeValued::False {
                counterexample: Vec::new(),
            }
        });
    };
    let (limit, complete) = range_of(q, var_bound);
    let exists = q.kind == QuantKind::Exists;
    let mut unknown: Option<String> = None;
    let mut take = |y: u64, r: ThreeValued| -> Option<ThreeValued> {
        match (r, exists) {
            (ThreeValued::True { witness }, true) => Some(ThreeValued::True {
                witness: std::iter::once(y).chain(witness).collect(),
            }),
            (ThreeValued::False { counterexample }, false) => Some(ThreeValued::False {
                counterexample: std::iter::once(y).chain(counterexample).collect(),
            }),
            (ThreeValued::Unknown { reason }, _) => {
                unknown.get_or_insert(reason);
                None
            }
            _ => None,
        }
    };
    if i == 0 {
        let mut start = 0;
        while start < limit {
            let end = (start + CHUNK).min(limit);
            let results = par::map_range(start..end, |y| eval_level(p, x, &mut vec![y], var_bound, budget));
            for (y, r) in (start..end).zip(results) {
                if let Some(done) = take(y, r?) {
                    return Ok(done);
                }
            }
            start = end;
        }
    } else {
        for y in 0..limit {
            ys.push(y);
            let r = eval_level(p, x, ys, var_bound, budget);
            ys.pop();
            if let Some(done) = take(y, r?) {
                return Ok(done);
            }
        }
    }
    let var = &q.var;
    Ok(match (unknown, complete) {
        (Some(reason), _) => ThreeValued::Unknown { reason },
        (None, true) if exists => ThreeValued::False {
            counterexample: Vec::new(),
        },
        (None, true) => ThreeValued::True { witness: Vec::new() },
        (None, false) if exists => ThreeValued::Unknown {
            reason: format!("no witness for {var} in 0..={var_bound}; the domain is unbounded"),
        },
        (None, false) => ThreeValued::Unknown {
            reason: format!("no counterexample for {var} in 0..={var_bound}; the domain is unbounded"),
        },
    })
}

/// Evaluates `p(x)` with every quantifier searched over `0..=var_bound`
/// (or its declared bound, if smaller). Universal claims are never made
/// true by exhausting an unbounded range, nor existential ones false.
pub fn eval_bounded(p: &Predicate, x: u64, var_bound: u64, kernel_budget: u64) -> Result<ThreeValued, HierError> {
    eval_level(p, x, &mut Vec::new(), var_bound, kernel_budget)
}

/// Decides a Σ₁ predicate by an accelerated run read at stage ω.
///
/// For a halting kernel this is the halting detector wrapper under
/// [`run_accelerated`]. Otherwise the run is the witness search itself,
/// `R(x, 0), R(x, 1), …`, each kernel evaluation charged its step count
/// against the policy's block budget: a witness marks square 0; an
/// exhausted declared domain leaves it blank for good; an unbounded search
/// that outlasts the budget settles to 0 only under the approximating
/// policy.
pub fn accelerated_decides_sigma1(p: &Predicate, x: u64, policy: &LimitPolicy) -> Result<AcceleratedOutput, HierError> {
    if !p.is_sigma1() {
        return Err(HierError::NotSigma1);
    }
    if p.kernel == Kernel::HaltsBy {
        let (m, input) = godel::decode_code(x);
        return Ok(run_accelerated(
            &halting_detector(&m),
            detector_input(&encode_unary(input)),
            policy,
        )?);
    }
    let mut spent = 0u64;
    let mut y = 0u64;
    loop {
        if p.prefix[0].bound == Some(y) {
            return Ok(AcceleratedOutput::Zero);
        }
        let left = policy.block_budget.saturating_sub(spent);
        if left == 0 {
            break;
        }
        match p.kernel.decide(x, &[y], left) {
            Ok((true, _)) => return Ok(AcceleratedOutput::One),
            Ok((false, cost)) => spent = spent.saturating_add(cost),
            Err(HierError::KernelBudget { .. }) => break,
            Err(e) => return Err(e),
        }
        y += 1;
    }
    Ok(match policy.mode {
        LimitMode::CycleExact => AcceleratedOutput::Unresolved,
        LimitMode::BudgetApprox => AcceleratedOutput::Zero,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse;
    use proptest::prelude::*;

    fn pred(s: &str) -> Predicate {
        Predicate::parse(s, "x").unwrap()
    }

    #[test]
    fn evenness() {
        let even = pred("∃y (x = y + y)");
        assert_eq!(
            eval_bounded(&even, 4, 100, 10).unwrap(),
            ThreeValued::True { witness: vec![2] }
        );
        assert!(matches!(
            eval_bounded(&even, 5, 100, 10).unwrap(),
            ThreeValued::Unknown { .. }
        ));
        let bounded = pred("∃y<10 (x = y + y)");
        assert_eq!(
            eval_bounded(&bounded, 5, 100, 10).unwrap(),
            ThreeValued::False { counterexample: vec![] }
        );
    }

    #[test]
    fn commutativity_is_not_proved_by_search() {
        let p = pred("∀y (x + y = y + x)");
        for x in [0, 3, 17] {
            assert!(matches!(
                eval_bounded(&p, x, 100, 10).unwrap(),
                ThreeValued::Unknown { .. }
            ));
        }
        let finite = pred("∀y<101 (x + y = y + x)");
        assert_eq!(
            eval_bounded(&finite, 3, 100, 10).unwrap(),
            ThreeValued::True { witness: vec![] }
        );
    }

    #[test]
    fn halting_predicate() {
        let h = Predicate::halting();
        let halter = godel::encode_code(&Machine::trivially_halting(), 3).unwrap();
        assert_eq!(
            eval_bounded(&h, halter, 10, 10).unwrap(),
            ThreeValued::True { witness: vec![0] }
        );
        let walker = parse("state 0: (0, 0, right, 0) (1, 1, right, 0)").unwrap();
        let looper = godel::encode_code(&walker, 0).unwrap();
        assert!(matches!(
            eval_bounded(&h, looper, 50, 10).unwrap(),
            ThreeValued::Unknown { .. }
        ));
        let p = LimitPolicy::exact(10_000);
        assert_eq!(
            accelerated_decides_sigma1(&h, halter, &p).unwrap(),
            AcceleratedOutput::One
        );
        assert_eq!(
            accelerated_decides_sigma1(&h, looper, &p).unwrap(),
            AcceleratedOutput::Zero
        );
    }

    #[test]
    fn sentences() {
        let s = parse_formula("¬∃x≤8 (8 = 3·x)").unwrap();
        let p = sentence_to_predicate(&s).unwrap();
        assert!(matches!(eval_bounded(&p, 0, 20, 10).unwrap(), ThreeValued::True { .. }));
        assert!(matches!(
            eval_bounded(&p, 1, 20, 10).unwrap(),
            ThreeValued::False { .. }
        ));
        let z = sentence_to_predicate(&parse_formula("0 = 0").unwrap()).unwrap();
        assert!(matches!(eval_bounded(&z, 0, 5, 10).unwrap(), ThreeValued::True { .. }));
        assert_eq!(
            sentence_to_predicate(&parse_formula("∀a (¬(a = a))").unwrap())
                .map(|p| p.prefix.len())
                .unwrap(),
            1
        );
        assert!(matches!(
            sentence_to_predicate(&parse_formula("y = 1").unwrap()),
            Err(HierError::NotClosed(_))
        ));
    }

    #[test]
    fn machine_kernel() {
        // R(n) = "n is odd" on the packed argument.
        let parity = parse(include_str!("../../../../figures/parity.tm")).unwrap();
        let p = Predicate {
            prefix: vec![Quantifier {
                kind: QuantKind::Exists,
                var: "y".into(),
                bound: None,
            }],
            kernel: Kernel::Machine {
                machine: parity.clone(),
            },
        };
        let r = eval_bounded(&p, 0, 5, 10_000).unwrap();
        let ThreeValued::True { witness } = r else {
            panic!("{r:?}")
        };
        let y = witness[0];
        for smaller in 0..y {
            assert!(!p.kernel.decide(0, &[smaller], 10_000).unwrap().0);
        }
        let walker = parse("state 0: (0, 0, right, 0) (1, 1, right, 0)").unwrap();
        let stuck = Predicate {
            kernel: Kernel::Machine { machine: walker },
            ..p
        };
        assert!(matches!(
            eval_bounded(&stuck, 0, 5, 100),
            Err(HierError::KernelBudget { .. })
        ));
    }

    #[test]
    fn accelerated_search() {
        let even = pred("∃y (x = y + y)");
        let exact = LimitPolicy::exact(1_000);
        assert_eq!(
            accelerated_decides_sigma1(&even, 6, &exact).unwrap(),
            AcceleratedOutput::One
        );
        assert_eq!(
            accelerated_decides_sigma1(&even, 7, &exact).unwrap(),
            AcceleratedOutput::Unresolved
        );
        let approx = LimitPolicy::approx(1_000, 10);
        assert_eq!(
            accelerated_decides_sigma1(&even, 7, &approx).unwrap(),
            AcceleratedOutput::Zero
        );
        let bounded = pred("∃y<5 (x = y + y)");
        assert_eq!(
            accelerated_decides_sigma1(&bounded, 7, &exact).unwrap(),
            AcceleratedOutput::Zero
        );
        assert!(matches!(
            accelerated_decides_sigma1(&pred("∀y (x = y)"), 0, &exact),
            Err(HierError::NotSigma1)
        ));
    }

    fn brute(p: &Predicate, x: u64, ys: &mut Vec<u64>, n: u64) -> bool {
        match p.prefix.get(ys.len()) {
            None => p.kernel.decide(x, ys, 1000).unwrap().0,
            Some(q) => {
                let limit = q.bound.unwrap_or(n + 1).min(n + 1);
                let mut vals = (0..limit).map(|y| {
                    ys.push(y);
                    let v = brute(p, x, ys, n);
                    ys.pop();
                    v
                });
                match q.kind {
                    QuantKind::Exists => vals.any(|v| v),
                    QuantKind::Forall => vals.all(|v| v),
                }
            }
        }
    }

    const SHAPES: [&str; 6] = [
        "∃y (x = y + y)",
        "∀y (¬(x = y · y + 1))",
        "∃a ∀b<4 (¬(a · b = x + 1))",
        "∀a<3 ∃b (x + a = b · 2 ∨ x = a)",
        "∃a<7 (x = a · a)",
        "∀a (x · a = a · x)",
    ];

    proptest! {
        #[test]
        fn sound_against_brute_force(shape in 0..SHAPES.len(), x in 0u64..12, n in 0u64..8) {
            let p = pred(SHAPES[shape]);
            let truth = brute(&p, x, &mut Vec::new(), n);
            match eval_bounded(&p, x, n, 1000).unwrap() {
                ThreeValued::True { .. } => prop_assert!(truth),
                ThreeValued::False { .. } => prop_assert!(!truth),
                ThreeValued::Unknown { .. } => {}
            }
        }

        #[test]
        fn least_witness(x in 0u64..60, n in 0u64..40) {
            let p = pred("∃y (x = y · y + y)");
            if let ThreeValued::True { witness } = eval_bounded(&p, x, n, 10).unwrap() {
                let y = witness[0];
                prop_assert_eq!(y * y + y, x);
                prop_assert!((0..y).all(|z| z * z + z != x));
            }
        }

        #[test]
        fn duality(shape in 0..SHAPES.len(), x in 0u64..12, n in 0u64..8) {
            let p = pred(SHAPES[shape]);
            let a = !eval_bounded(&p, x, n, 1000).unwrap().tri();
            let b = eval_bounded(&p.negation().unwrap(), x, n, 1000).unwrap().tri();
            prop_assert_eq!(a, b);
        }
    }
}

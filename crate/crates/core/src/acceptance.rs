//! The acceptance battery: nine checks against independent ground truth,
//! each small enough to run in seconds. Reports carry no timings so that a
//! report depends only on the code, never on the machine running it.

use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::One;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ait::{kraft_sum, omega_lower, reference_halt_time, shift_function};
use crate::detect::Certificate;
use crate::dovetail::{digits_with_separator, halting_stage};
use crate::godel;
use crate::hierarchy::{capability_suite, omega_simulates_oracle_machine, BranchStatus, CapabilityReport, SuiteConfig};
use crate::lang::{enumerate_machines, parse};
use crate::machine::{
    apply, decode_unary, encode_unary, run, run_observed, Configuration, Direction, Instruction, Machine, RunOutcome,
    Symbol, Tape,
};
use crate::nondet::{machine_F, FPolicy, FVerdict};
use crate::ordinal::{limit_config, LimitPolicy, LimitResult};
use crate::par;
use crate::relativized::{
    decide_three_ways, run_o_machine, run_oracle_program, BitSource, FiniteSet, OMachine, OracleAnswer, OracleRun,
    OracleSource,
};

/// Seed behind every sampled instance in the battery.
pub const SEED: u64 = 0x5eed_0001;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub id: u8,
    pub name: String,
    pub passed: bool,
    /// Instances examined.
    pub checked: u64,
    pub detail: String,
}

impl CriterionReport {
    fn new(id: u8, name: &str, passed: bool, checked: u64, detail: String) -> Self {
        CriterionReport {
            id,
            name: name.into(),
            passed,
            checked,
            detail,
        }
    }

    /// One line: `PASS  3 dovetail-soundness: ...`.
    pub fn line(&self) -> String {
        format!(
            "{} {:>2} {}: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail
        )
    }
}

pub fn figure(name: &str) -> Machine {
    let text = match name {
        "one-third" => include_str!("../../../figures/one-third.tm"),
        "parity" => include_str!("../../../figures/parity.tm"),
        "lamp" => include_str!("../../../figures/lamp.tm"),
        "looper" => include_str!("../../../figures/looper.tm"),
        "even-semi" => include_str!("../../../figures/even-semi.tm"),
        other => panic!("no figure named {other}"),
    };
    parse(text).expect("bundled figures parse")
}

pub fn one_third_digits() -> CriterionReport {
    let out = digits_with_separator(&figure("one-third"), 1_000);
    let (ok, detail) = match out {
        Ok(p) => {
            let ten: String = p.digits.chars().take(10).collect();
            (ten == "0101010101", format!("first ten digits {ten}"))
        }
        Err(v) => (false, format!("protocol violation at square {}", v.position)),
    };
    CriterionReport::new(1, "one-third-digits", ok, 1, detail)
}

pub fn parity_fidelity() -> CriterionReport {
    let m = figure("parity");
    let wrong: Vec<u64> = (0..=50)
        .filter(|&n| {
            let out = run(&m, encode_unary(n), 100_000, false).ok();
            let v = out
                .as_ref()
                .and_then(|o| o.halted_config())
                .and_then(|c| decode_unary(&c.tape).ok());
            v != Some(u64::from(n % 2 == 0))
        })
        .collect();
    CriterionReport::new(
        2,
        "parity",
        wrong.is_empty(),
        51,
        format!("{} of 51 inputs wrong {wrong:?}", wrong.len()),
    )
}

pub fn dovetail_soundness() -> CriterionReport {
    const CODES: u64 = 64;
    const BUDGET: u64 = 100_000;
    let table = halting_stage(CODES, BUDGET);
    let verdicts = par::map_range(0..CODES, |code| {
        let (m, input) = godel::decode_code(code);
        let alone = reference_halt_time_on(&m, input, BUDGET);
        if table.halted.contains(&code) {
            alone.is_some()
        } else if let Some(cert) = table.proven.get(&code) {
            alone.is_none() && cert.verify(&m)
        } else {
            true
        }
    });
    let bad: Vec<u64> = (0..CODES).filter(|&c| !verdicts[c as usize]).collect();
    CriterionReport::new(
        3,
        "dovetail-soundness",
        bad.is_empty(),
        CODES,
        format!(
            "{} halted, {} proven, {} open, {} disagreements",
            table.halted.len(),
            table.proven.len(),
            CODES as usize - table.halted.len() - table.proven.len(),
            bad.len()
        ),
    )
}

/// Halting time of `m` on unary `input` by the plain reference simulator.
fn reference_halt_time_on(m: &Machine, input: u64, cap: u64) -> Option<u64> {
    // The reference simulator starts from a blank tape, so prepend a writer
    // for the input: walk right writing `input` ones, return to square 0.
    if input == 0 {
        return reference_halt_time(m, cap);
    }
    let (prefixed, setup) = with_input_writer(m, input);
    reference_halt_time(&prefixed, cap + setup).map(|t| t - setup)
}

/// `m` preceded by states that write unary `input` and rewind; returns the
/// number of setup steps.
fn with_input_writer(m: &Machine, input: u64) -> (Machine, u64) {
    use Direction::{Left as L, Right as R};
    let n = input as usize;
    let k = m.alphabet_size();
    // States 0..=n write, n+1..2n rewind; the original machine follows.
    let off = 2 * n;
    let mut states: Vec<Vec<Instruction>> = vec![vec![Instruction::new(0, 0, R, 1)]];
    for i in 1..=n {
        let ins = if i < n {
            Instruction::new(0, 1, R, i + 1)
        } else {
            Instruction::new(0, 1, L, if n == 1 { off } else { n + 1 })
        };
        states.push(vec![ins]);
    }
    for s in n + 1..off {
        let next = if s + 1 == off { off } else { s + 1 };
        states.push((0..k).map(|r| Instruction::new(r, r, L, next)).collect());
    }
    // The last rewind lands on square 0 in state `off`, the original start.
    for s in m.states() {
        states.push(
            s.iter()
                .map(|i| Instruction::new(i.read.0, i.write.0, i.direction, i.next_state + off))
                .collect(),
        );
    }
    let setup = 2 * n as u64;
    (Machine::new(k, states).expect("writer is well formed"), setup)
}

/// Random O-machine: a prefix that brackets the input with marks and asks
/// about it, then three random states that may tidy up, ask again, or
/// wander.
fn random_o_machine(rng: &mut ChaCha8Rng) -> OMachine {
    use Direction::{Left as L, Right as R};
    const MU: u8 = 3;
    let (call, yes, no) = (2, 3, 4);
    let mut states = vec![
        vec![Instruction::new(0, MU, R, 1)],
        vec![Instruction::new(1, 1, R, 1), Instruction::new(0, MU, L, call)],
        vec![],
    ];
    for s in 3..6 {
        let mut list = Vec::new();
        for r in 0..4u8 {
            // Answer states must act on something.
            if rng.gen_bool(0.6) || (s != 5 && r == 3 && list.is_empty()) {
                let write = [0, 1, MU, r][rng.gen_range(0..4)];
                let dir = if rng.gen_bool(0.5) { L } else { R };
                list.push(Instruction::new(r, write, dir, rng.gen_range(0..6)));
            }
        }
        states.push(list);
    }
    let base = Machine::new(4, states).expect("generated tables are well formed");
    OMachine::new(base, call, yes, no).expect("answer states have instructions")
}

/// Answers fixed so far; anything else is unknown.
struct Partial(Vec<(u64, bool)>);

impl OracleSource for Partial {
    fn query_big(&self, n: &BigUint) -> OracleAnswer {
        u64::try_from(n).map_or(OracleAnswer::Unknown, |v| self.query(v))
    }
    fn query(&self, n: u64) -> OracleAnswer {
        self.0
            .iter()
            .find(|a| a.0 == n)
            .map_or(OracleAnswer::Unknown, |a| OracleAnswer::from_bool(a.1))
    }
}

/// Halts within `steps` on `input` whatever the oracle says, asking at
/// most `depth` distinct questions on any path.
fn halts_for_every_oracle(m: &OMachine, input: u64, steps: u64, depth: usize) -> bool {
    let mut stack = vec![Partial(Vec::new())];
    while let Some(p) = stack.pop() {
        match run_oracle_program(m, &p, encode_unary(input), steps, false) {
            Ok(r) if r.outcome.is_halted() => {}
            Ok(OracleRun {
                pending_query: Some(q), ..
            }) if p.0.len() < depth => {
                for a in [false, true] {
                    let mut next = p.0.clone();
                    next.push((q, a));
                    stack.push(Partial(next));
                }
            }
            _ => return false,
        }
    }
    true
}

/// Generated O-machines of six states with finite oracles. Each halts on
/// every input in `0..16` against every oracle, so every branch of the
/// simulation ends.
pub fn generated_o_machines(count: usize, seed: u64) -> Vec<(OMachine, FiniteSet)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < count {
        let m = random_o_machine(&mut rng);
        let oracle: FiniteSet = (0..24u32).filter(|_| rng.gen_bool(0.5)).collect();
        if (0..16).all(|n| halts_for_every_oracle(&m, n, 300, 8)) {
            out.push((m, oracle));
        }
    }
    out
}

pub fn omega_equivalence() -> CriterionReport {
    let cases = generated_o_machines(20, SEED);
    let pairs: Vec<(usize, u64)> = (0..cases.len()).flat_map(|i| (0..16).map(move |n| (i, n))).collect();
    let results = par::map(&pairs, |&(i, n)| {
        let (m, oracle) = &cases[i];
        let direct = run_o_machine(m, oracle, encode_unary(n), 2_000).expect("generated machines halt");
        let end = direct.outcome.halted_config().expect("generated machines halt");
        // A branch guesses once per distinct query.
        let mut asked = direct.queries.clone();
        let mut seen = std::collections::BTreeSet::new();
        asked.retain(|q| seen.insert(q.0));
        let same = match omega_simulates_oracle_machine(m, encode_unary(n), oracle, oracle, 2_000) {
            Ok(r) => {
                let left = r.branches.first();
                r.published == direct.output() && left.is_some_and(|b| {
                    b.guesses == asked
                        && b.steps == end.steps
                        && matches!(&b.status, BranchStatus::Halted { tape, .. } if *tape == end.tape.render_explicit())
                })
            }
            Err(_) => false,
        };
        (same, direct.queries.len(), direct.output().is_some())
    });
    let bad = results.iter().filter(|r| !r.0).count();
    let queries: usize = results.iter().map(|r| r.1).sum();
    let unary = results.iter().filter(|r| r.2).count();
    CriterionReport::new(
        4,
        "omega-simulation",
        bad == 0,
        pairs.len() as u64,
        format!("20 machines x 16 inputs, {queries} oracle calls, {unary} unary outputs, {bad} disagreements"),
    )
}

/// Limsup by brute force: replay three periods from the lasso start and
/// take, per square, the value if it never changed in the last two and the
/// largest value seen otherwise. Only squares the head has left behind for
/// good are returned for a drifting cycle.
fn brute_limit(m: &Machine, cert: &Certificate) -> Vec<Symbol> {
    let mut c = cert.start().clone();
    let p = cert.period();
    let mut seen: Vec<Vec<Symbol>> = Vec::new();
    for i in 0..3 * p {
        let ins = *m.lookup(c.state, c.scanned()).expect("cycles never halt");
        apply(&mut c, &ins).expect("cycles stay on the tape");
        if i >= p {
            seen.push(c.tape.prefix(c.tape.explicit_len() + 1));
        }
    }
    let width = seen.iter().map(Vec::len).max().unwrap_or(0);
    let trusted = match cert {
        Certificate::Translated {
            start, shift, margin, ..
        } => (start.head - margin + shift).min(width),
        _ => width,
    };
    (0..trusted)
        .map(|q| {
            let vals: Vec<Symbol> = seen
                .iter()
                .map(|s| s.get(q).copied().unwrap_or(Symbol::BLANK))
                .collect();
            if vals.iter().all(|v| *v == vals[0]) {
                vals[0]
            } else {
                *vals.iter().max().unwrap()
            }
        })
        .collect()
}

pub fn limit_rule() -> CriterionReport {
    let machines: Vec<Machine> = enumerate_machines(2, 2)
        .chain(enumerate_machines(3, 2))
        .filter(|m| {
            matches!(
                run(m, Tape::blank(), 500, true),
                Ok(RunOutcome::NonHaltingProven { .. })
            )
        })
        .take(200)
        .collect();
    let wrong = par::map(&machines, |m| {
        let mut history = Vec::new();
        let out = run_observed(m, Configuration::initial(Tape::blank()), 500, true, |c| {
            history.push(c.clone())
        });
        let Ok(RunOutcome::NonHaltingProven { certificate }) = out else {
            return true;
        };
        let Ok(LimitResult::Exact(limit)) = limit_config(&history, &LimitPolicy::default(), 0) else {
            return true;
        };
        let brute = brute_limit(m, &certificate);
        brute.iter().enumerate().any(|(q, s)| limit.tape.get(q) != *s)
    })
    .into_iter()
    .filter(|w| *w)
    .count();
    let lamp = figure("lamp");
    let mut h = Vec::new();
    let _ = run_observed(&lamp, Configuration::initial(Tape::blank()), 50, false, |c| {
        h.push(c.clone())
    });
    let lamp_value = match limit_config(&h, &LimitPolicy::default(), 0) {
        Ok(LimitResult::Exact(c)) => Some(c.tape.get(0)),
        _ => None,
    };
    let ok = machines.len() == 200 && wrong == 0 && lamp_value == Some(Symbol::ONE);
    CriterionReport::new(
        5,
        "limit-rule",
        ok,
        machines.len() as u64 + 1,
        format!(
            "{} lassos, {wrong} mismatches, lamp limit {}",
            machines.len(),
            lamp_value.map_or("unresolved".into(), |s| s.glyph())
        ),
    )
}

pub fn f_soundness() -> CriterionReport {
    // No 2-state machine halts later than S(2), so a longer run settles
    // every instance outright.
    let bound = shift_function(2, 10_000).max_steps + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let two: Vec<Machine> = enumerate_machines(2, 2).collect();
    let mut sample: Vec<Machine> = enumerate_machines(1, 2).collect();
    sample.extend(two.choose_multiple(&mut rng, 500).cloned());
    let policy = FPolicy {
        detect_loops: true,
        proof_budget: 1_000,
    };
    let results = par::map(&sample, |m| {
        let code = godel::godel_encode(m, &BigUint::from(0u8));
        let truth = reference_halt_time(m, bound);
        match machine_F(&code, 100, policy) {
            FVerdict::Halts { witness } => (truth == Some(witness), false),
            FVerdict::Loops { .. } => (truth.is_none(), false),
            FVerdict::Unknown => (true, true),
        }
    });
    let wrong = results.iter().filter(|r| !r.0).count();
    let unknown = results.iter().filter(|r| r.1).count();
    CriterionReport::new(
        6,
        "f-soundness",
        wrong == 0,
        sample.len() as u64,
        format!("{} pairs, {wrong} wrong, {unknown} unknown", sample.len()),
    )
}

pub fn shift_exactness() -> CriterionReport {
    let mut notes = Vec::new();
    let mut ok = true;
    for (n, cap) in [(1, 1_000), (2, 10_000)] {
        let r = shift_function(n, cap);
        let replay = r.witness.as_ref().is_some_and(|w| {
            matches!(run(w, Tape::blank(), r.max_steps, false), Ok(RunOutcome::Halted { config }) if config.steps == r.max_steps)
        });
        let reference = par::map(&enumerate_machines(n, 2).collect::<Vec<_>>(), |m| {
            reference_halt_time(m, cap)
        })
        .into_iter()
        .flatten()
        .max();
        ok &= r.exact && replay && reference == Some(r.max_steps);
        notes.push(format!("S({n}) = {} (residue {})", r.max_steps, r.residue.len()));
    }
    CriterionReport::new(7, "shift-function", ok, 2, notes.join(", "))
}

pub fn kraft_and_omega() -> CriterionReport {
    let kraft_ok = (0..=16).all(|l| kraft_sum(l) <= num_rational::BigRational::one());
    let bounds: Vec<_> = [100, 1_000, 10_000].iter().map(|&t| omega_lower(14, t)).collect();
    let monotone = bounds.windows(2).all(|w| w[0].lower <= w[1].lower);
    let replays = bounds.iter().all(|b| b.replays());
    CriterionReport::new(
        8,
        "kraft-omega",
        kraft_ok && monotone && replays,
        17 + 3,
        format!(
            "kraft <= 1 up to 16: {kraft_ok}; lower bounds {}; replays {replays}",
            bounds
                .iter()
                .map(|b| b.lower.to_string())
                .collect::<Vec<_>>()
                .join(" <= ")
        ),
    )
}

pub fn oracle_web() -> CriterionReport {
    let word = ChaCha8Rng::seed_from_u64(SEED).gen::<u64>();
    let g: BitSource = Arc::new(move |n| n < 64 && (word >> n) & 1 == 1);
    let answers = par::map_range(0..64, |n| decide_three_ways(&g, n, 100_000).ok());
    let wrong = answers
        .iter()
        .enumerate()
        .filter(|(n, a)| {
            let want = Some((word >> n) & 1 == 1);
            !matches!(a, Some([x, y, z]) if *x == want && *y == want && *z == want)
        })
        .count();
    CriterionReport::new(
        9,
        "oracle-web",
        wrong == 0,
        64,
        format!("generator word {word:016x}, {wrong} of 64 queries disagree"),
    )
}

/// Criteria 1 to 9, in order.
pub fn run_criteria() -> Vec<CriterionReport> {
    vec![
        one_third_digits(),
        parity_fidelity(),
        dovetail_soundness(),
        omega_equivalence(),
        limit_rule(),
        f_soundness(),
        shift_exactness(),
        kraft_and_omega(),
        oracle_web(),
    ]
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub criteria: Vec<CriterionReport>,
    pub capability: CapabilityReport,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed) && self.capability.disagreements() == 0
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

/// The whole battery plus the capability report.
pub fn suite() -> SuiteReport {
    SuiteReport {
        seed: SEED,
        criteria: run_criteria(),
        capability: capability_suite(&SuiteConfig::default()),
    }
}

use hypersim::hierarchy::*;
use hypersim::ordinal::{AcceleratedOutput, LimitPolicy};
use hypersim::relativized::{compute_re_via_halting_oracle, HaltingOracle};
use hypersim::{parse, Machine};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SENTENCES: [&str; 20] = [
    "0 = 0",
    "1 = 0",
    "¬∃x≤8 (8 = 3·x)",
    "∃x≤8 (9 = 3·x)",
    "∀a<5 (a + 0 = a)",
    "∀a<5 ∃b<6 (b = a + 1)",
    "∃a<4 ∀b<4 (a · b = 0)",
    "∃a<4 ∀b<4 (a · b = b)",
    "¬(2 + 2 = 5)",
    "2 + 2 = 4 ∧ 3 · 3 = 9",
    "1 = 2 ∨ ∃c<3 (c · c = 4)",
    "∀a<6 (a = 0 ∨ ∃b<6 (a = b + 1))",
    "∃p<10 (p · p = 49)",
    "∀a<4 ∀b<4 (a + b = b + a)",
    "∀a<4 ∀b<4 (a · b = a + b)",
    "¬∀a<3 (a · a = a)",
    "∃a<5 (a + a = 7)",
    "∀a<3 ¬(a + 1 = 0)",
    "∃a<3 ∃b<3 (a · 2 + b = 5)",
    "(∃a<2 (a = 1)) ∧ ¬(∃b<2 (b = 2))",
];

#[test]
fn sentences_round_trip() {
    for s in SENTENCES {
        let f = parse_formula(s).unwrap();
        let direct = f.eval_closed(20);
        assert_ne!(direct, Tri::Unknown, "{s}");
        let p = sentence_to_predicate(&f).unwrap();
        let via = eval_bounded(&p, 0, 20, 10).unwrap().tri();
        assert_eq!(via, direct, "{s}");
    }
}

#[test]
fn three_does_not_divide_eight() {
    let p = sentence_to_predicate(&parse_formula("¬∃x≤8 (8 = 3·x)").unwrap()).unwrap();
    assert!(matches!(eval_bounded(&p, 0, 20, 10).unwrap(), ThreeValued::True { .. }));
}

#[test]
fn accelerated_agrees_with_bounded_search() {
    let shapes = [
        "∃y (x = y + y)",
        "∃y (x = y · y)",
        "∃y (x + 3 = y · 2)",
        "∃y<6 (x = y · 3)",
        "∃y (y · y = x + 1)",
        "∃y<40 (x = y + 7)",
        "∃y<30 (y · y = x)",
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let policy = LimitPolicy::exact(500);
    let mut compared = 0;
    for _ in 0..100 {
        let p = Predicate::parse(shapes[rng.gen_range(0..shapes.len())], "x").unwrap();
        let x = rng.gen_range(0..60);
        let a = accelerated_decides_sigma1(&p, x, &policy).unwrap();
        let b = eval_bounded(&p, x, 200, 10).unwrap();
        match (a, &b) {
            (AcceleratedOutput::One, ThreeValued::False { .. })
            | (AcceleratedOutput::Zero, ThreeValued::True { .. }) => {
                panic!("x = {x}: {a:?} vs {b:?}")
            }
            (AcceleratedOutput::Unresolved, _) | (_, ThreeValued::Unknown { .. }) => {}
            _ => compared += 1,
        }
    }
    assert!(compared >= 40, "only {compared} resolved on both sides");
}

#[test]
fn halting_oracle_matches_sigma1_evaluator() {
    let f = parse(include_str!("../../../figures/even-semi.tm")).unwrap();
    let even = Predicate::parse("∃y (x = y + y)", "x").unwrap();
    let oracle = HaltingOracle { budget: 10_000 };
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..50 {
        let n = rng.gen_range(0..80);
        let via_oracle = compute_re_via_halting_oracle(&f, n, &oracle, 10_000).unwrap();
        let evaluated = match eval_bounded(&even, n, 100, 10).unwrap() {
            ThreeValued::True { .. } => 1,
            _ => 0,
        };
        assert_eq!(via_oracle, evaluated, "n = {n}");
    }
}

#[test]
fn halting_predicate_on_dovetail_halter() {
    let table = hypersim::dovetail::halting_stage(64, 100_000);
    let h = Predicate::halting();
    let policy = LimitPolicy::exact(100_000);
    for &code in table.halted.iter().take(10) {
        assert!(matches!(
            eval_bounded(&h, code, 100_000, 10).unwrap(),
            ThreeValued::True { .. }
        ));
        assert_eq!(
            accelerated_decides_sigma1(&h, code, &policy).unwrap(),
            AcceleratedOutput::One
        );
    }
    for &code in table.proven.keys().take(10) {
        let (m, input): (Machine, u64) = hypersim::godel::decode_code(code);
        let proven = hypersim::run(&m, hypersim::encode_unary(input), 100_000, true);
        if proven.is_ok_and(|o| o.certificate().is_some()) {
            assert_eq!(
                accelerated_decides_sigma1(&h, code, &policy).unwrap(),
                AcceleratedOutput::Zero,
                "code {code}"
            );
        }
    }
}

#[test]
fn capability_report_is_stable() {
    let cfg = SuiteConfig::default();
    let a = capability_suite(&cfg);
    assert_eq!(a.disagreements(), 0);
    assert_eq!(a.sections.len(), 3);
    assert_eq!(a.to_json(), capability_suite(&cfg).to_json());
    let json: SuiteConfig = serde_json::from_str("{}").unwrap();
    assert_eq!(json, SuiteConfig::default());
}

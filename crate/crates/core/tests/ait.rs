use hypersim::ait::*;
use hypersim::godel;
use hypersim::lang::enumerate_machines;
use hypersim::machine::Machine;
use hypersim::relativized::{FiniteSet, OracleSource};
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn all_bits(len: usize) -> Vec<String> {
    (0..1u32 << len).map(|i| format!("{i:0len$b}")).collect()
}

#[test]
fn shift_function_two_states() {
    let r = shift_function(2, 10_000);
    assert!(r.exact, "residue {}", r.residue.len());
    let w = r.witness.clone().unwrap();
    assert_eq!(reference_halt_time(&w, r.max_steps), Some(r.max_steps));
    // The plain simulator, over every machine, sees the same halters.
    let times: Vec<u64> = enumerate_machines(2, 2)
        .filter_map(|m| reference_halt_time(&m, 10_000))
        .collect();
    assert_eq!(times.len(), r.halted);
    assert_eq!(times.iter().max().copied(), Some(r.max_steps));
    let one = shift_function(1, 10_000);
    assert!(one.exact);
    assert!(one.max_steps <= r.max_steps);
}

#[test]
fn omega_matches_independent_sum() {
    let b = omega_lower(14, 10_000);
    let mut sum = BigRational::zero();
    for code in enumerate_codes(14) {
        let (m, used) = decode(&code).unwrap();
        assert_eq!(used, code.len());
        if reference_halt_time(&m, 10_000).is_some() {
            sum += BigRational::new(1.into(), num_bigint::BigInt::one() << code.len());
        }
    }
    assert_eq!(b.lower, sum);
    assert!(b.replays());
    assert!(b.lower <= b.kraft && b.kraft <= BigRational::one());
}

#[test]
fn omega_monotone_in_budget() {
    let lows: Vec<BigRational> = [100, 1_000, 10_000, 100_000]
        .iter()
        .map(|&t| omega_lower(14, t).lower)
        .collect();
    assert!(lows.windows(2).all(|w| w[0] <= w[1]));
    for len in 0..=16 {
        assert!(kraft_sum(len) <= BigRational::one(), "max_len {len}");
    }
}

#[test]
fn monotone_in_budget_and_extension() {
    let targets: Vec<String> = (0..=3).flat_map(all_bits).collect();
    let runs: Vec<KSearch> = [5, 10, 20, 40]
        .iter()
        .map(|&t| k_search(&targets, 26, t, Decoder::Plain))
        .collect();
    for s in &targets {
        let lens: Vec<usize> = runs.iter().map(|r| r.length(s).unwrap_or(usize::MAX)).collect();
        assert!(lens.windows(2).all(|w| w[0] >= w[1]), "{s}: {lens:?}");
    }
    let last = runs.last().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let s = &targets[rng.gen_range(0..targets.len())];
        if s.len() == 3 {
            continue;
        }
        let ext = format!("{s}{}", if rng.gen::<bool>() { '1' } else { '0' });
        let a = last.length(s).unwrap_or(usize::MAX);
        let b = last.length(&ext).unwrap_or(usize::MAX);
        assert!(a <= b, "{s} -> {ext}");
    }
}

#[test]
fn ordered_string_is_cheaper_than_coin_flips() {
    let targets = all_bits(4);
    let k = k_search(&targets, 30, 40, Decoder::Plain);
    let ordered = k.length("0101").expect("0101 has a short producer");
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let wins = (0..100)
        .filter(|_| {
            let s: String = (0..4).map(|_| if rng.gen::<bool>() { '1' } else { '0' }).collect();
            ordered <= k.length(&s).unwrap_or(usize::MAX)
        })
        .count();
    println!("k(0101) = {ordered}; no longer than the sample in {wins}/100");
    assert!(wins >= 90);
}

#[test]
fn right_moving_decoder() {
    // A head that only moves right never reads what it wrote, so its
    // output is eventually periodic.
    assert!(k_right_only("0000", 30, 40).is_some());
    assert!(k_right_only("0101", 30, 40).is_some());
    assert_eq!(k_right_only("0110", 30, 40), None);
}

#[test]
fn empty_oracle_changes_nothing() {
    let targets: Vec<String> = (0..=4).flat_map(all_bits).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let plain = k_search(&targets, 22, 30, Decoder::Plain);
    let empty = FiniteSet::empty();
    let rel = k_search(&targets, 22, 30, Decoder::Relative(&empty));
    assert!(rel.skipped.is_empty());
    for _ in 0..50 {
        let s = &targets[rng.gen_range(0..targets.len())];
        assert_eq!(plain.length(s), rel.length(s), "{s}");
    }
}

#[test]
fn oracle_access_never_hurts() {
    // The characteristic prefix of a small exact halting set.
    let members: Vec<u64> = (0..8u64)
        .filter(|&c| {
            let (m, input): (Machine, u64) = godel::decode_code(c);
            matches!(
                hypersim::run(&m, hypersim::encode_unary(input), 10_000, true),
                Ok(o) if o.is_halted()
            )
        })
        .collect();
    let oracle: FiniteSet = members.iter().copied().collect();
    let s: String = (0..4u64)
        .map(|c| {
            if oracle.query(c).known() == Some(true) {
                '1'
            } else {
                '0'
            }
        })
        .collect();
    let targets: Vec<String> = vec![s.clone(), "01".into(), "11".into(), "000".into()];
    let plain = k_search(&targets, 26, 40, Decoder::Plain);
    let rel = k_search(&targets, 26, 40, Decoder::Relative(&oracle));
    for t in &targets {
        let a = plain.length(t).unwrap_or(usize::MAX);
        let b = rel.length(t).unwrap_or(usize::MAX);
        assert!(b <= a, "{t}: relative {b} > plain {a}");
    }
}

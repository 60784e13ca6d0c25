mod common;

use common::rng;
use dessert::theory::{gamma_upper, lower_tail_bound, query_cost_estimate, recommended_tables, BoundInputs};
use proptest::prelude::*;
use rand::Rng;

/// Fraction of trials in which the max of `m` Binomial(L, s)/L estimates
/// reaches `tau` and, separately, falls to `s - gap`.
fn simulate_max_tails(s: f64, m: usize, l: usize, tau: f64, gap: f64, trials: usize, seed: u64) -> (f64, f64) {
    let mut r = rng(seed);
    let (mut upper, mut lower) = (0usize, 0usize);
    for _ in 0..trials {
        let best = (0..m)
            .map(|_| (0..l).filter(|_| r.random::<f64>() < s).count() as f64 / l as f64)
            .fold(0.0, f64::max);
        upper += (best >= tau) as usize;
        lower += (best <= s - gap) as usize;
    }
    (upper as f64 / trials as f64, lower as f64 / trials as f64)
}

#[test]
fn simulated_tails_respect_bounds() {
    for (i, l) in [8usize, 32, 128].into_iter().enumerate() {
        for (s, tau, m) in [(0.5, 0.75, 4), (0.3, 0.5, 8), (0.7, 0.85, 2)] {
            let gamma = gamma_upper(s, tau, 1.0).unwrap();
            let gap = 0.1;
            let (upper, lower) = simulate_max_tails(s, m, l, tau, gap, 10_000, i as u64);
            let upper_bound = (m as f64 * gamma.powi(l as i32)).min(1.0);
            assert!(upper <= upper_bound, "L={l} s={s}: {upper} > {upper_bound}");
            let lower_bound = lower_tail_bound(l, gap, 1.0).unwrap();
            assert!(lower <= lower_bound, "L={l} s={s}: {lower} > {lower_bound}");
        }
    }
}

#[test]
fn reference_prescription() {
    let inputs = BoundInputs {
        num_sets: 1000,
        query_size: 32,
        set_size: 128,
        delta: 0.05,
        gap: 0.1,
        gamma_max: 0.9,
        beta: 1.0,
    };
    let l = recommended_tables(&inputs).unwrap();
    assert_eq!(l, 393);
    assert_eq!(query_cost_estimate(32, 1000, 128, l, 4).unwrap(), 51_913_728);
}

proptest! {
    #[test]
    fn gamma_lies_between_s_and_one(s in 0.01f64..0.99, frac in 0.001f64..0.999, alpha in 1.0f64..3.0) {
        let tau = alpha * s + frac * (alpha - alpha * s);
        let g = gamma_upper(s, tau, alpha).unwrap();
        prop_assert!(g > s && g < 1.0, "g={}", g);
    }

    #[test]
    fn gamma_monotone(s in 0.05f64..0.9, frac in 0.05f64..0.9, ds in 0.001f64..0.05, dt in 0.001f64..0.05) {
        let tau = s + frac * (1.0 - s);
        let g = gamma_upper(s, tau, 1.0).unwrap();
        if tau + dt < 1.0 {
            prop_assert!(gamma_upper(s, tau + dt, 1.0).unwrap() < g);
        }
        if s + ds < tau {
            prop_assert!(gamma_upper(s + ds, tau, 1.0).unwrap() > g);
        }
    }

    #[test]
    fn fewer_failures_need_more_tables(delta in 0.001f64..0.5, shrink in 0.1f64..0.9) {
        let base = BoundInputs {
            num_sets: 500,
            query_size: 8,
            set_size: 16,
            delta,
            gap: 0.05,
            gamma_max: 0.8,
            beta: 1.0,
        };
        let tighter = BoundInputs { delta: delta * shrink, ..base };
        let a = base.table_terms().unwrap();
        let b = tighter.table_terms().unwrap();
        prop_assert!(b.upper_tail > a.upper_tail && b.lower_tail > a.lower_tail);
    }

    #[test]
    fn cost_linear_in_sets(mq in 1usize..64, n in 1usize..10_000, d in 1usize..256, l in 1usize..512, t in 0usize..16) {
        let one = query_cost_estimate(mq, n, d, l, t).unwrap();
        let two = query_cost_estimate(mq, 2 * n, d, l, t).unwrap();
        prop_assert_eq!(two - one, (mq * n * l * t) as u128);
    }
}

use num::BigInt;
use proptest::prelude::*;
use zurn::analysis::{empirical_cf, fit_values, ks_statistic, sorted};
use zurn::fixedpoint::{iterate_pool, SamplePool};
use zurn::oracle::LimitFamily;
use zurn::rng::ForcedDraws;
use zurn::{Label, RngStream, UrnState};

fn labels_strategy() -> impl Strategy<Value = (usize, Vec<Vec<i64>>)> {
    (1usize..=3).prop_flat_map(|d| {
        (
            Just(d),
            prop::collection::vec(prop::collection::vec(-20i64..=20, d), 1..6),
        )
    })
}

fn build(d: usize, raw: &[Vec<i64>]) -> UrnState {
    let init: Vec<Label> = raw.iter().cloned().map(Label).collect();
    UrnState::new(&init, d).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn running_sums_match_rescan((d, raw) in labels_strategy(), steps in 0usize..60, seed: u64, k in 2usize..5) {
        let mut urn = build(d, &raw);
        let mut rng = RngStream::new(seed, 0);
        for _ in 0..steps {
            urn.step(&mut rng, k).unwrap();
        }
        let (s, q) = urn.rescan_sums().unwrap();
        prop_assert_eq!(urn.sum_s(), &s[..]);
        prop_assert_eq!(urn.sum_q(), &q[..]);
        prop_assert_eq!(urn.n(), raw.len() + steps);
    }

    #[test]
    fn added_label_bounded_by_k_times_max((d, raw) in labels_strategy(), steps in 1usize..40, seed: u64, k in 2usize..5) {
        let mut urn = build(d, &raw);
        let mut rng = RngStream::new(seed, 1);
        for _ in 0..steps {
            let before = urn.max_magnitude();
            let added: Vec<i64> = urn.step(&mut rng, k).unwrap().to_vec();
            for x in added {
                prop_assert!((x.abs() as f64) <= k as f64 * before);
            }
        }
    }

    #[test]
    fn one_step_martingale_by_enumeration((d, raw) in labels_strategy(), pre in 0usize..4, seed: u64) {
        let mut urn = build(d, &raw);
        let mut rng = RngStream::new(seed, 2);
        for _ in 0..pre {
            urn.step(&mut rng, 2).unwrap();
        }
        let m = urn.n();
        // n(n+1) A_n summed over all m² equally likely pairs, in exact integers
        let mut total = vec![0i128; d];
        for i in 0..m {
            for j in 0..m {
                let mut next = urn.clone();
                next.step(&mut ForcedDraws::new(vec![i, j]), 2).unwrap();
                for (t, s) in total.iter_mut().zip(next.sum_s()) {
                    *t += *s as i128;
                }
            }
        }
        // E[S_{m+1}] / ((m+1)(m+2)) == S_m / (m(m+1))  ⇔  total·m == S_m·m²(m+2)
        for (t, s) in total.iter().zip(urn.sum_s()) {
            let m = m as i128;
            prop_assert_eq!(t * m, *s as i128 * m * m * (m + 2));
        }
    }

    #[test]
    fn same_seed_same_urn((d, raw) in labels_strategy(), seed: u64, index in 0u64..1000) {
        let run = || {
            let mut urn = build(d, &raw);
            let mut rng = RngStream::new(seed, index);
            urn.run(50, &mut rng, 2, &[], |_| {}).unwrap();
            urn.flat_coords().to_vec()
        };
        prop_assert_eq!(run(), run());
    }

    #[test]
    fn bigint_replay_agrees((d, raw) in labels_strategy(), seed: u64) {
        let mut small = build(d, &raw);
        let mut big: UrnState<BigInt> = small.to_bigint();
        let (mut r1, mut r2) = (RngStream::new(seed, 3), RngStream::new(seed, 3));
        small.run(40, &mut r1, 2, &[], |_| {}).unwrap();
        big.run(40, &mut r2, 2, &[], |_| {}).unwrap();
        let expect: Vec<BigInt> = small.flat_coords().iter().map(|&x| BigInt::from(x)).collect();
        prop_assert_eq!(big.flat_coords(), &expect[..]);
    }

    #[test]
    fn empirical_cf_is_a_cf(pts in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 1..20), t in -5.0f64..5.0) {
        let xs: Vec<f64> = pts.iter().flat_map(|&(a, b)| [a, b]).collect();
        let z = empirical_cf(&xs, 2, &[t, -0.5 * t]);
        prop_assert!(z.norm() <= 1.0 + 1e-12);
        let zero = empirical_cf(&xs, 2, &[0.0, 0.0]);
        prop_assert!((zero.re - 1.0).abs() < 1e-12 && zero.im.abs() < 1e-12);
    }

    #[test]
    fn ks_is_invariant_under_monotone_maps(xs in prop::collection::vec(0.001f64..20.0, 1..200)) {
        let s = sorted(&xs);
        let exp_cdf = |x: f64| 1.0 - (-x).exp();
        let d1 = ks_statistic(&s, exp_cdf).unwrap();
        // push sample and CDF through y = ln x
        let logs: Vec<f64> = s.iter().map(|x| x.ln()).collect();
        let d2 = ks_statistic(&logs, |y: f64| exp_cdf(y.exp())).unwrap();
        prop_assert!((d1 - d2).abs() < 1e-12);
        prop_assert!(d1 >= 0.5 / xs.len() as f64 - 1e-15 && d1 <= 1.0);
    }

    #[test]
    fn iterate_pool_preserves_mean(seed: u64, shift in 0.5f64..5.0) {
        let m = 20_000;
        let mut rng = RngStream::new(seed, 4);
        let pool = SamplePool::from_sampler(m, &mut rng, |r| shift + r.uniform()).unwrap();
        let sd = pool.std_dev()[0];
        let before = pool.mean()[0];
        let after = iterate_pool(&pool, 2, &mut rng).unwrap().mean()[0];
        // one step: Var(new mean) = Var(U X)·2/m, and Var(U X) <= E[X²]/3
        let bound = 6.0 * ((before * before + sd * sd) * 2.0 / (3.0 * m as f64)).sqrt();
        prop_assert!((after - before).abs() < bound, "{before} -> {after}");
    }

    #[test]
    fn fit_recovers_scale(seed: u64, a in prop_oneof![-5.0f64..-0.1, 0.1f64..5.0]) {
        let m = 20_000;
        let mut rng = RngStream::new(seed, 5);
        let xs: Vec<f64> = (0..m).map(|_| LimitFamily::ExpSigned(a).sample(&mut rng)).collect();
        let fit = fit_values(&xs, 0).unwrap();
        prop_assert!((fit.exp_scale - a).abs() < 5.0 * a.abs() / (m as f64).sqrt());
        prop_assert_eq!(fit.sign, if a > 0.0 { 1 } else { -1 });
        prop_assert!((fit.gamma_scale - fit.exp_scale / 2.0).abs() < 1e-15);
    }
}

use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ula::bounds::{descent_constants, eta_terms, select_eta, Variant};
use ula::cli::{read_samples, write_samples};
use ula::diagnostics::{kl_gaussian_exact, propagate_gaussian_chain, w2_empirical};
use ula::pgauss::sample_np;
use ula::potential::{builtin, lower_envelope, BUILTIN_NAMES};
use ula::sampler::{ula_step_with_noise, ChainState, SampleSet};

fn spec(name: &str, d: usize) -> ula::potential::PotentialSpec {
    builtin(name, d, &BTreeMap::new()).unwrap()
}

fn point(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-20.0..20.0f64, d)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn envelope_below_potential(name in prop::sample::select(BUILTIN_NAMES), x in point(3)) {
        let s = spec(name, 3);
        prop_assert!(lower_envelope(&s, &x) <= s.value(&x) + 1e-9 * (1.0 + s.value(&x).abs()));
    }

    #[test]
    fn descent_upper_bound(name in prop::sample::select(BUILTIN_NAMES), x in point(2), y in point(2)) {
        let s = spec(name, 2);
        let g = s.grad(&x);
        let r: f64 = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let lin: f64 = g.iter().zip(x.iter().zip(&y)).map(|(gi, (a, b))| gi * (b - a)).sum();
        let slack: f64 = s.smooth_terms.iter().map(|t| t.l / (1.0 + t.alpha) * r.powf(1.0 + t.alpha)).sum();
        let rhs = s.value(&x) + lin + slack;
        prop_assert!(s.value(&y) <= rhs + 1e-9 * (1.0 + rhs.abs()));
    }

    #[test]
    fn gaussian_kl_nonnegative_and_zero_only_at_target(
        m in -3.0..3.0f64,
        c in 0.05..5.0f64,
        q in 0.2..5.0f64,
    ) {
        let kl = kl_gaussian_exact(&[m], &[c], &[q]).unwrap();
        prop_assert!(kl >= 0.0);
        prop_assert!(kl_gaussian_exact(&[0.0], &[1.0 / q], &[q]).unwrap() < 1e-24);
    }

    #[test]
    fn propagation_composes(k1 in 0u64..200, k2 in 0u64..200, eta in 0.001..0.5f64, c0 in 0.1..4.0f64) {
        let q = [1.0, 3.0];
        let (m1, c1) = propagate_gaussian_chain(&q, eta, k1, &[1.0, -1.0], &[c0, c0]).unwrap();
        let (m12, c12) = propagate_gaussian_chain(&q, eta, k2, &m1, &c1).unwrap();
        let (m, c) = propagate_gaussian_chain(&q, eta, k1 + k2, &[1.0, -1.0], &[c0, c0]).unwrap();
        for j in 0..2 {
            prop_assert!((m12[j] - m[j]).abs() <= 1e-12 * (1.0 + m[j].abs()));
            prop_assert!((c12[j] - c[j]).abs() <= 1e-12 * (1.0 + c[j].abs()));
        }
    }

    #[test]
    fn w2_triangle(seed in 0u64..10_000, n in 2usize..24) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cloud = |rng: &mut ChaCha8Rng, shift: f64| -> Vec<f64> {
            (0..2 * n).map(|_| shift + sample_np(1, 2.0, rng).unwrap()[0]).collect()
        };
        let xs = cloud(&mut rng, 0.0);
        let ys = cloud(&mut rng, 0.5);
        let zs = cloud(&mut rng, -1.0);
        let xz = w2_empirical(&xs, &zs, 2).unwrap();
        let xy = w2_empirical(&xs, &ys, 2).unwrap();
        let yz = w2_empirical(&ys, &zs, 2).unwrap();
        prop_assert!(xz <= xy + yz + 1e-12);
        prop_assert!(w2_empirical(&xs, &xs, 2).unwrap() == 0.0);
    }

    #[test]
    fn np_draws_are_seed_deterministic(seed in any::<u64>(), p in 1.05..4.0f64, d in 1usize..6) {
        let a = sample_np(d, p, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let b = sample_np(d, p, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn elapsed_time_is_k_eta(eta in 1e-4..0.1f64, k in 1usize..3000) {
        let s = spec("gaussian", 1);
        let mut st = ChainState::new(vec![0.3]);
        for _ in 0..k {
            st = ula_step_with_noise(&st, &s, eta, &[0.0]).unwrap();
        }
        prop_assert_eq!(st.k, k as u64);
        prop_assert!((st.t() - k as f64 * eta).abs() <= 2.0 * f64::EPSILON * k as f64 * eta);
    }

    #[test]
    fn selected_eta_is_admissible(h0 in 0.01..10.0f64, eps in 0.001..0.5f64, t in 0.1..100.0f64, d in 1usize..5) {
        let s = spec("gauss_plus_power", d);
        let dc = descent_constants(&s, 2.0, h0, None, Variant::Statement).unwrap();
        let terms = eta_terms(&dc, h0, 1.0, eps, t, s.alpha());
        let eta = select_eta(&terms);
        prop_assert!(terms.iter().all(|v| eta <= *v));
        prop_assert!(terms.contains(&eta));
    }

    #[test]
    fn samples_csv_round_trip(
        rows in prop::collection::vec((0u32..8, 0u64..1000, -1e6..1e6f64, -1e-6..1e-6f64), 1..40)
    ) {
        let dir = tempfile::tempdir().unwrap();
        let mut set = SampleSet::new(2);
        for (c, k, a, b) in &rows {
            set.push(*c, *k, &[*a, *b]);
        }
        let path = dir.path().join("samples.csv");
        write_samples(&path, &set).unwrap();
        prop_assert_eq!(read_samples(&path).unwrap(), set);
    }
}

use num_complex::Complex64;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fracvort_core::steiner::{lambda_mu, min_perfect_matching, steiner_tree, validate_forest, LambdaOptions};

fn points(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
    (0..n).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lambda_for_two_is_the_matching(seed in 0u64..10_000, d in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = points(&mut rng, 2 * d);
        let res = lambda_mu(&pts, 2, LambdaOptions::default()).unwrap();
        prop_assert!((res.value - min_perfect_matching(&pts)).abs() < 1e-9);
    }

    #[test]
    fn lambda_is_below_random_admissible_forests(seed in 0u64..10_000, m in 2u32..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 2 * m as usize;
        let pts = points(&mut rng, n);
        let res = lambda_mu(&pts, m, LambdaOptions::default()).unwrap();
        let report = validate_forest(&res.forest, &pts, m);
        prop_assert!(report.is_ok(), "{:?}", report.failures);
        prop_assert!((res.forest.total_length() - res.value).abs() < 1e-9);

        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let split: f64 = order
            .chunks(m as usize)
            .map(|b| steiner_tree(&b.iter().map(|&k| pts[k]).collect::<Vec<_>>()).unwrap().total_length())
            .sum();
        let joined = steiner_tree(&pts).unwrap().total_length();
        prop_assert!(res.value <= split + 1e-9);
        prop_assert!(res.value <= joined + 1e-9);
    }

    #[test]
    fn lambda_scales_linearly(seed in 0u64..10_000, s in 0.1f64..5.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = points(&mut rng, 6);
        let scaled: Vec<Complex64> = pts.iter().map(|p| p * s).collect();
        let a = lambda_mu(&pts, 3, LambdaOptions::default()).unwrap().value;
        let b = lambda_mu(&scaled, 3, LambdaOptions::default()).unwrap().value;
        prop_assert!((b - s * a).abs() < 1e-9 * s.max(1.0));
    }
}

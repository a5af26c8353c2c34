use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fracvort_core::domain::DomainSpec;
use fracvort_core::limit::{neumann_solve, VortexConfig};
use fracvort_core::sim::{energy_diffuse, energy_sharp, truncate, FieldState, Lattice, SimParams};
use fracvort_core::steiner::{construct_competitor_field, lambda_mu, LambdaOptions};

fn images(points: &[Complex64], x: Complex64) -> f64 {
    points.iter().map(|&a| (x - a).norm().ln() + (a.norm() * (x - a / a.norm_sqr()).norm()).ln()).sum()
}

#[test]
fn neumann_potential_matches_images_on_coarse_grid() {
    let spec = DomainSpec::disk(0.02, 1);
    let pts = vec![Complex64::new(0.21, 0.13), Complex64::new(-0.35, -0.1)];
    let pot = neumann_solve(&VortexConfig::new(pts.clone(), 2, 1), &spec).unwrap();
    let mut err: f64 = 0.0;
    for k in 0..pot.grid().len() {
        let x = pot.grid().pos[k];
        if pot.is_node_valid(k) && spec.signed_distance(x) > 0.0 && pts.iter().all(|p| (x - p).norm() > 0.1) {
            err = err.max((pot.phi_at(x) - images(&pts, x)).abs());
        }
    }
    assert!(err < 5e-3, "max error {err}");
}

#[test]
fn competitor_jump_length_tracks_the_forest() {
    let (m, d, eps) = (2u32, 1u32, 0.1);
    let spec = DomainSpec::disk(eps / 4.0, d);
    let h = spec.h;
    let pts: Vec<Complex64> = [Complex64::new(-0.3, 0.01), Complex64::new(0.3, 0.01)]
        .iter()
        .map(|p| Complex64::new(((p.re / h).floor() + 0.5) * h, ((p.im / h).floor() + 0.5) * h))
        .collect();
    let forest = lambda_mu(&pts, m, LambdaOptions::default()).unwrap().forest;
    let comp = construct_competitor_field(&forest, &VortexConfig::new(pts, m, d), &spec).unwrap();
    let lat = Lattice::new(&spec).unwrap();
    let state = FieldState::from_competitor(&lat, &comp);
    state.check(&lat, m).unwrap();
    let e = energy_sharp(&state, &lat, &SimParams::new(m, eps));
    assert!(e.total.is_finite());
    // The lattice jump length is the l1 length of a staircase along the segment.
    assert!(e.jump_length >= forest.total_length() - 2.0 * h, "{e:?}");
    assert!(e.jump_length <= std::f64::consts::SQRT_2 * forest.total_length() + 4.0 * h, "{e:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn truncation_never_raises_either_energy(seed in 0u64..1000, m in 2u32..4) {
        let lat = Lattice::new(&DomainSpec::disk(0.1, 1)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = FieldState::random(&lat, seed);
        for k in 0..lat.len() {
            if lat.free[k] {
                s.u[k] *= 1.8 * rng.gen::<f64>();
                s.psi[k] = rng.gen();
            }
        }
        let params = SimParams { eta: 0.5, ..SimParams::new(m, 0.25) };
        let mut t = s.clone();
        truncate(&mut t);
        prop_assert!(energy_sharp(&t, &lat, &params).total <= energy_sharp(&s, &lat, &params).total + 1e-12);
        prop_assert!(energy_diffuse(&t, &lat, &params).total <= energy_diffuse(&s, &lat, &params).total + 1e-12);
    }
}

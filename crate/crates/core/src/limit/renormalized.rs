use std::f64::consts::PI;

use num_complex::Complex64;

use super::{canonical_map, CanonicalMap, LimitError, NeumannPotential, NeumannSolver, VortexConfig};
use crate::domain::DomainSpec;
use crate::linalg::det_sum;

/// `W(mu) = -pi sum_{k != l} log|x_k - x_l| + (1/2) int (g^m wedge d_tau g^m) Phi - pi sum_k R(x_k)`.
pub fn renormalized_energy(mu: &VortexConfig, spec: &DomainSpec) -> Result<f64, LimitError> {
    mu.validate(spec)?;
    let pot = NeumannSolver::new(spec)?.solve(&mu.points, mu.m)?;
    Ok(energy_from_potential(&pot))
}

pub(crate) fn energy_from_potential(pot: &NeumannPotential) -> f64 {
    let pts = &pot.points;
    let mut pair = 0.0;
    for (k, p) in pts.iter().enumerate() {
        for (l, q) in pts.iter().enumerate() {
            if k != l {
                pair += (p - q).norm().ln();
            }
        }
    }
    let self_term: f64 = pts.iter().map(|&p| pot.r_at(p)).sum();
    -PI * pair + pot.boundary_term - PI * self_term
}

/// Finite part `(1/2) int_{Omega \ B_r(mu)} |grad v_mu|^2 - pi m d |log r|`,
/// by direct quadrature of the canonical map.
///
/// Discs of radius `rho` around the vortices are integrated in polar
/// coordinates (Gauss-Legendre in `log rho`, trapezoid in angle); the rest of
/// the domain on lattice cells, subsampled where a cell meets a disc boundary
/// or the domain boundary.
pub fn renormalized_energy_oracle(mu: &VortexConfig, spec: &DomainSpec, r: f64) -> Result<f64, LimitError> {
    Ok(renormalized_energy_oracles(mu, spec, &[r])?[0])
}

/// [`renormalized_energy_oracle`] at several radii, sharing one solve of the
/// canonical map.
pub fn renormalized_energy_oracles(mu: &VortexConfig, spec: &DomainSpec, radii: &[f64]) -> Result<Vec<f64>, LimitError> {
    let sep = mu.min_separation();
    for &r in radii {
        if r <= 3.0 * spec.h {
            return Err(LimitError::RadiusTooSmall { r, min: 3.0 * spec.h });
        }
        if 2.0 * r >= sep {
            return Err(LimitError::InvalidConfig(format!(
                "radius {r} is not below half the vortex separation {sep}"
            )));
        }
    }
    let map = canonical_map(mu, spec)?;
    Ok(radii.iter().map(|&r| oracle_from_map(&map, mu, spec, r)).collect())
}

fn oracle_from_map(map: &CanonicalMap, mu: &VortexConfig, spec: &DomainSpec, r: f64) -> f64 {
    let pts = &mu.points;
    let sep = mu.min_separation();
    let wall = pts.iter().map(|&p| spec.signed_distance(p)).fold(f64::INFINITY, f64::min);
    let rho = (0.45 * sep).min(0.9 * wall).min(0.25).max(r);

    let mut polar = 0.0;
    if rho > r {
        let (gx, gw) = gauss_legendre_16();
        let na = 256;
        let (s0, s1) = (r.ln(), rho.ln());
        let panels = ((s1 - s0) / 0.5).ceil().max(1.0) as usize;
        let ps = (s1 - s0) / panels as f64;
        for &c in pts {
            for panel in 0..panels {
                for (x, w) in gx.iter().zip(&gw) {
                    let s = s0 + ps * (panel as f64 + 0.5 * (x + 1.0));
                    let rad = s.exp();
                    let mut ring = 0.0;
                    for a in 0..na {
                        let ang = (a as f64 + 0.5) * std::f64::consts::TAU / na as f64;
                        ring += map.energy_density(c + Complex64::from_polar(rad, ang));
                    }
                    polar += ring * std::f64::consts::TAU / na as f64 * rad * rad * 0.5 * ps * w;
                }
            }
        }
    }

    let grid = &map.grid;
    let h = grid.h;
    let sub = 8usize;
    let in_region = |p: Complex64| spec.contains(p, 0.0) && pts.iter().all(|&c| (p - c).norm() >= rho);
    let cartesian = det_sum(grid.len(), |k| {
            if k % grid.nx + 1 >= grid.nx || k / grid.nx + 1 >= grid.ny {
                return 0.0;
            }
            let lo = grid.pos[k];
            let center = lo + Complex64::new(0.5 * h, 0.5 * h);
            let half_diag = std::f64::consts::FRAC_1_SQRT_2 * h;
            let sd = spec.signed_distance(center);
            if sd < -half_diag {
                return 0.0;
            }
            let disc_dist = pts.iter().map(|&c| (center - c).norm() - rho).fold(f64::INFINITY, f64::min);
            if disc_dist < -half_diag {
                return 0.0;
            }
            if sd > half_diag && disc_dist > half_diag {
                return map.energy_density(center) * h * h;
            }
            let hs = h / sub as f64;
            let mut acc = 0.0;
            for j in 0..sub {
                for i in 0..sub {
                    let p = lo + Complex64::new((i as f64 + 0.5) * hs, (j as f64 + 0.5) * hs);
                    if in_region(p) {
                        acc += map.energy_density(p);
                    }
                }
            }
            acc * hs * hs
    });

    let md = pts.len() as f64;
    polar + cartesian - PI * md * r.ln().abs()
}

/// 16-point Gauss-Legendre nodes and weights on `[-1, 1]`.
fn gauss_legendre_16() -> ([f64; 16], [f64; 16]) {
    let half = [
        (0.0950125098376374, 0.1894506104550685),
        (0.2816035507792589, 0.1826034150449236),
        (0.4580167776572274, 0.1691565193950025),
        (0.6178762444026438, 0.1495959888165767),
        (0.755_404_408_355_003, 0.1246289712555339),
        (0.8656312023878318, 0.0951585116824928),
        (0.9445750230732326, 0.0622535239386479),
        (0.9894009349916499, 0.0271524594117541),
    ];
    let mut x = [0.0; 16];
    let mut w = [0.0; 16];
    for (i, &(xi, wi)) in half.iter().enumerate() {
        x[2 * i] = -xi;
        w[2 * i] = wi;
        x[2 * i + 1] = xi;
        w[2 * i + 1] = wi;
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_weights_integrate_polynomials() {
        let (x, w) = gauss_legendre_16();
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        let quartic: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(4)).sum();
        assert!((quartic - 0.4).abs() < 1e-14);
    }

    #[test]
    fn collision_blows_up() {
        let spec = DomainSpec::disk(0.02, 1);
        let w = |t: f64| {
            let mu = VortexConfig::new(vec![Complex64::new(-t / 2.0, 0.0), Complex64::new(t / 2.0, 0.0)], 2, 1);
            renormalized_energy(&mu, &spec).unwrap()
        };
        assert!(w(0.1) > w(0.2));
        assert!(w(0.05) > w(0.1));
    }

    #[test]
    fn rotation_invariance_on_disk() {
        let spec = DomainSpec::disk(0.02, 1);
        let pts = vec![Complex64::new(-0.3, 0.1), Complex64::new(0.25, -0.2)];
        let rot = Complex64::from_polar(1.0, 1.1);
        let a = renormalized_energy(&VortexConfig::new(pts.clone(), 2, 1), &spec).unwrap();
        let b = renormalized_energy(&VortexConfig::new(pts.iter().map(|p| p * rot).collect(), 2, 1), &spec).unwrap();
        assert!((a - b).abs() < 1e-2, "{a} vs {b}");
    }

    #[test]
    fn oracle_rejects_small_radius() {
        let spec = DomainSpec::disk(0.02, 1);
        let mu = VortexConfig::new(vec![Complex64::new(-0.3, 0.0), Complex64::new(0.3, 0.0)], 2, 1);
        assert!(matches!(
            renormalized_energy_oracle(&mu, &spec, 0.05),
            Err(LimitError::RadiusTooSmall { .. })
        ));
    }
}

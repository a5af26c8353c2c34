use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use super::{nodal_gradient, sample_field, sample_gradient, LimitError, VortexConfig};
use crate::domain::{build_grid, lattice_links, DomainSpec, Grid, Link};
use crate::linalg::{pcg, CsrBuilder};

/// `v = e^{i phi} prod_k (x - x_k)/|x - x_k|` with `phi` discretely harmonic
/// and `v = g^power` on the boundary.
#[derive(Debug, Clone)]
pub struct CanonicalMap {
    pub grid: Grid,
    pub points: Vec<Complex64>,
    pub power: u32,
    pub phi: Vec<f64>,
    pub grad_phi: Vec<Complex64>,
    pub valid: Vec<bool>,
    /// Largest row residual of the discrete Laplace system after the solve.
    pub residual: f64,
}

fn unit_product(points: &[Complex64], x: Complex64) -> Complex64 {
    points.iter().fold(Complex64::new(1.0, 0.0), |acc, &p| {
        let z = x - p;
        acc * z / z.norm()
    })
}

/// Continuous branch of `arg(g^power conj(prod))` along the boundary.
struct BoundaryPhase {
    ds: f64,
    unwrapped: Vec<f64>,
}

impl BoundaryPhase {
    fn new(spec: &DomainSpec, points: &[Complex64], power: u32) -> Result<Self, LimitError> {
        let per = spec.perimeter();
        let n = ((per / (spec.h / 4.0)).ceil() as usize).max(256);
        let ds = per / n as f64;
        let principal = |p: Complex64| {
            let w = spec.g_at(p).powu(power) * unit_product(points, p).conj();
            w.im.atan2(w.re)
        };
        let mut unwrapped = Vec::with_capacity(n + 1);
        let mut prev = principal(spec.boundary_point(0.0).0);
        unwrapped.push(prev);
        for k in 1..=n {
            let cur = principal(spec.boundary_point(k as f64 * ds).0);
            let mut step = cur - prev;
            step -= TAU * (step / TAU).round();
            if step.abs() > 0.9 * PI {
                return Err(LimitError::UnwrapFailure(format!(
                    "phase jump {step:.3} at arclength {:.4}",
                    k as f64 * ds
                )));
            }
            unwrapped.push(unwrapped[k - 1] + step);
            prev = cur;
        }
        let closure = unwrapped[n] - unwrapped[0];
        if closure.abs() > 0.5 {
            return Err(LimitError::UnwrapFailure(format!(
                "boundary phase winds by {:.3} turns; degrees of g^{power} and the vortex product differ",
                closure / TAU
            )));
        }
        Ok(Self { ds, unwrapped })
    }

    fn at(&self, spec: &DomainSpec, points: &[Complex64], power: u32, p: Complex64) -> f64 {
        let s = spec.arclength_of(p);
        let j = ((s / self.ds).round() as usize).min(self.unwrapped.len() - 1);
        let reference = self.unwrapped[j];
        let w = spec.g_at(p).powu(power) * unit_product(points, p).conj();
        let principal = w.im.atan2(w.re);
        principal + TAU * ((reference - principal) / TAU).round()
    }
}

/// Canonical harmonic map of a validated configuration, with `v = g^m` on
/// the boundary.
pub fn canonical_map(mu: &VortexConfig, spec: &DomainSpec) -> Result<CanonicalMap, LimitError> {
    mu.validate(spec)?;
    canonical_map_raw(&mu.points, spec, mu.m)
}

/// Canonical map for arbitrary interior points and boundary data `g^power`;
/// the number of points must equal `power * d`.
pub fn canonical_map_raw(
    points: &[Complex64],
    spec: &DomainSpec,
    power: u32,
) -> Result<CanonicalMap, LimitError> {
    let grid = build_grid(spec)?;
    let links = lattice_links(spec, &grid);
    let phase = BoundaryPhase::new(spec, points, power)?;
    let n = grid.len();
    let valid: Vec<bool> = (0..n).map(|k| grid.is_active(k)).collect();

    let mut cut_values = vec![[f64::NAN; 4]; n];
    let mut fixed: Vec<Option<f64>> = vec![None; n];
    for k in 0..n {
        if !valid[k] {
            continue;
        }
        let mut min_frac = f64::INFINITY;
        for dir in 0..4 {
            if let Link::Cut { frac, point } = links[k][dir] {
                let val = phase.at(spec, points, power, point);
                cut_values[k][dir] = val;
                if frac < min_frac {
                    min_frac = frac;
                    if frac < 1e-2 {
                        fixed[k] = Some(val);
                    }
                }
            }
        }
    }

    let mut index = vec![usize::MAX; n];
    let mut unknowns = Vec::new();
    for k in 0..n {
        if valid[k] && fixed[k].is_none() {
            index[k] = unknowns.len();
            unknowns.push(k);
        }
    }
    let mut builder = CsrBuilder::new(unknowns.len());
    let mut rhs = vec![0.0; unknowns.len()];
    for (row, &k) in unknowns.iter().enumerate() {
        let mut diag = 0.0;
        for dir in 0..4 {
            match links[k][dir] {
                Link::Node(j) => {
                    diag += 1.0;
                    match fixed[j] {
                        Some(v) => rhs[row] += v,
                        None => builder.add(row, index[j], -1.0),
                    }
                }
                Link::Cut { frac, .. } => {
                    diag += 1.0 / frac;
                    rhs[row] += cut_values[k][dir] / frac;
                }
                Link::Absent => {}
            }
        }
        builder.add(row, row, diag);
    }
    let a = builder.build();
    let mut x = vec![0.0; unknowns.len()];
    pcg(&a, &rhs, &mut x, 1e-12, 50_000, false)?;
    let mut ax = vec![0.0; x.len()];
    a.mul(&x, &mut ax);
    let residual = ax.iter().zip(&rhs).map(|(l, r)| (l - r).abs()).fold(0.0, f64::max);

    let mut phi = vec![0.0; n];
    for k in 0..n {
        if let Some(v) = fixed[k] {
            phi[k] = v;
        }
    }
    for (row, &k) in unknowns.iter().enumerate() {
        phi[k] = x[row];
    }
    let grad_phi = nodal_gradient(&grid, &phi, &valid, |k, dir| match links[k][dir] {
        Link::Node(j) => Some((1.0, phi[j])),
        Link::Cut { frac, .. } if frac >= 1e-3 => Some((frac, cut_values[k][dir])),
        _ => None,
    });
    Ok(CanonicalMap { grid, points: points.to_vec(), power, phi, grad_phi, valid, residual })
}

impl CanonicalMap {
    pub fn phi_at(&self, x: Complex64) -> f64 {
        sample_field(&self.grid, &self.phi, &self.grad_phi, &self.valid, x)
    }

    pub fn grad_phi_at(&self, x: Complex64) -> Complex64 {
        sample_gradient(&self.grid, &self.grad_phi, &self.valid, x)
    }

    pub fn value_at(&self, x: Complex64) -> Complex64 {
        Complex64::from_polar(1.0, self.phi_at(x)) * unit_product(&self.points, x)
    }

    /// Nodal value at an active node.
    pub fn node_value(&self, k: usize) -> Complex64 {
        Complex64::from_polar(1.0, self.phi[k]) * unit_product(&self.points, self.grid.pos[k])
    }

    /// `|grad v|^2 / 2` with the vortex part evaluated analytically.
    pub fn energy_density(&self, x: Complex64) -> f64 {
        let mut grad = self.grad_phi_at(x);
        for &p in &self.points {
            let z = x - p;
            grad += Complex64::new(-z.im, z.re) / z.norm_sqr();
        }
        0.5 * grad.norm_sqr()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quotient::plaquette_winding;

    #[test]
    fn single_centered_vortex_has_zero_phase() {
        let spec = DomainSpec::disk(0.05, 1);
        let map = canonical_map_raw(&[Complex64::new(0.0, 0.0)], &spec, 1).unwrap();
        for k in 0..map.grid.len() {
            if map.valid[k] {
                assert!(map.phi[k].abs() < 1e-9);
            }
        }
        let x = Complex64::new(0.3, -0.4);
        assert!((map.value_at(x) - x / x.norm()).norm() < 1e-9);
    }

    #[test]
    fn windings_around_vortices() {
        let spec = DomainSpec::disk(0.02, 1);
        let mu = VortexConfig::new(vec![Complex64::new(-0.31, 0.05), Complex64::new(0.29, -0.07)], 2, 1);
        let map = canonical_map(&mu, &spec).unwrap();
        assert!(map.residual < 1e-6);
        let mut total = 0;
        for cell in &map.grid.cells {
            let v = cell.corners.map(|k| map.node_value(k));
            let w = plaquette_winding(v, 1e-12).unwrap();
            if w != 0 {
                let near = mu.points.iter().any(|&p| (p - cell.center).norm() < map.grid.h);
                assert!(near && w == 1, "winding {w} at {}", cell.center);
            }
            total += w;
        }
        assert_eq!(total, 2);
        assert_eq!(map.grid.boundary_winding_of(&(0..map.grid.len()).map(|k| if map.valid[k] { map.node_value(k) } else { Complex64::new(1.0, 0.0) }).collect::<Vec<_>>()), Some(2));
    }

    #[test]
    fn boundary_values_match_g_power() {
        let spec = DomainSpec::disk(0.02, 1);
        let mu = VortexConfig::new(vec![Complex64::new(0.1, 0.2), Complex64::new(-0.2, -0.3)], 2, 1);
        let map = canonical_map(&mu, &spec).unwrap();
        for t in 0..50 {
            let p = Complex64::from_polar(1.0, t as f64 * 0.125);
            let g2 = spec.g_at(p).powu(2);
            assert!((map.value_at(p) - g2).norm() < 1e-3);
        }
    }

    #[test]
    fn rotation_keeps_modulus_and_windings() {
        let spec = DomainSpec::disk(0.025, 1);
        let pts = vec![Complex64::new(-0.25, 0.1), Complex64::new(0.35, 0.0)];
        let rot = Complex64::from_polar(1.0, 0.7);
        let a = canonical_map(&VortexConfig::new(pts.clone(), 2, 1), &spec).unwrap();
        let b = canonical_map(&VortexConfig::new(pts.iter().map(|p| p * rot).collect(), 2, 1), &spec).unwrap();
        // v_{R mu}(R x) = e^{2 i rho} v_mu(x) for g = e^{i theta}
        for t in 0..20 {
            let x = Complex64::from_polar(0.15 + 0.03 * t as f64, 0.9 * t as f64);
            let lhs = b.value_at(x * rot);
            let rhs = a.value_at(x) * rot.powu(2);
            assert!((lhs.norm() - 1.0).abs() < 1e-12);
            assert!((lhs - rhs).norm() < 5e-3);
        }
    }

    #[test]
    fn degree_mismatch_fails_to_unwrap() {
        let spec = DomainSpec::disk(0.05, 1);
        let err = canonical_map_raw(&[Complex64::new(0.0, 0.0)], &spec, 2).unwrap_err();
        assert!(matches!(err, LimitError::UnwrapFailure(_)));
    }
}

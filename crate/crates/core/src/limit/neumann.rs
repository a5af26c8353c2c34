use std::sync::Arc;

use num_complex::Complex64;

use super::{nodal_gradient, sample_field, LimitError, VortexConfig};
use crate::domain::{build_grid, DomainSpec, Grid};
use crate::linalg::{pcg, Csr, CsrBuilder};

#[derive(Debug, Clone, Copy)]
struct BoundarySample {
    point: Complex64,
    normal: Complex64,
    ds: f64,
    g_wedge_dg: f64,
    owner: usize,
}

#[derive(Debug)]
struct Assembly {
    spec: DomainSpec,
    grid: Grid,
    unknowns: Vec<usize>,
    valid: Vec<bool>,
    matrix: Csr,
    samples: Vec<BoundarySample>,
    owned_length: Vec<f64>,
    perimeter: f64,
}

/// Finite-volume Neumann solver on the dual cells of the lattice, clipped to
/// the domain. The matrix and boundary quadrature depend only on the domain,
/// so one solver serves any number of vortex configurations.
#[derive(Debug, Clone)]
pub struct NeumannSolver {
    inner: Arc<Assembly>,
}

/// `Phi_mu = R_mu + sum_k log|x - x_k|`, normalized to zero boundary mean.
#[derive(Debug, Clone)]
pub struct NeumannPotential {
    inner: Arc<Assembly>,
    pub points: Vec<Complex64>,
    pub power: u32,
    /// Nodal values of the smooth part `R_mu` (zero off the unknown set).
    pub r: Vec<f64>,
    pub grad_r: Vec<Complex64>,
    /// Boundary mean of `Phi` removed by the normalization.
    pub removed_mean: f64,
    /// `(1/2) int_{dOmega} (g^m wedge d_tau g^m) Phi`.
    pub boundary_term: f64,
    /// Largest row residual of the linear system after the solve.
    pub residual: f64,
}

fn dual_face(spec: &DomainSpec, a: Complex64, b: Complex64) -> f64 {
    spec.clip_segment(a, b).map_or(0.0, |(t0, t1)| (t1 - t0) * (b - a).norm())
}

impl NeumannSolver {
    pub fn new(spec: &DomainSpec) -> Result<Self, LimitError> {
        let grid = build_grid(spec)?;
        let h = grid.h;
        let n = grid.len();
        let half = 0.5 * h;
        let mut faces: Vec<(usize, usize, f64)> = Vec::new();
        for k in 0..n {
            let p = grid.pos[k];
            if k % grid.nx + 1 < grid.nx {
                let x = p.re + half;
                let l = dual_face(spec, Complex64::new(x, p.im - half), Complex64::new(x, p.im + half));
                if l > 1e-6 * h {
                    faces.push((k, k + 1, l));
                }
            }
            if k / grid.nx + 1 < grid.ny {
                let y = p.im + half;
                let l = dual_face(spec, Complex64::new(p.re - half, y), Complex64::new(p.re + half, y));
                if l > 1e-6 * h {
                    faces.push((k, k + grid.nx, l));
                }
            }
        }
        let mut index = vec![usize::MAX; n];
        let mut unknowns = Vec::new();
        let mut mark = vec![false; n];
        for &(a, b, _) in &faces {
            mark[a] = true;
            mark[b] = true;
        }
        for k in 0..n {
            if mark[k] {
                index[k] = unknowns.len();
                unknowns.push(k);
            }
        }
        let valid = mark;
        let mut builder = CsrBuilder::new(unknowns.len());
        for &(a, b, l) in &faces {
            let w = l / h;
            let (ia, ib) = (index[a], index[b]);
            builder.add(ia, ia, w);
            builder.add(ib, ib, w);
            builder.add(ia, ib, -w);
            builder.add(ib, ia, -w);
        }
        let matrix = builder.build();

        let perimeter = spec.perimeter();
        let count = (perimeter / (h / 16.0)).ceil() as usize;
        let ds = perimeter / count as f64;
        let mut owned_length = vec![0.0; unknowns.len()];
        let mut samples = Vec::with_capacity(count);
        for j in 0..count {
            let s = (j as f64 + 0.5) * ds;
            let (point, _) = spec.boundary_point(s);
            let owner = owner_of(&grid, &index, point);
            owned_length[owner] += ds;
            samples.push(BoundarySample {
                point,
                normal: spec.normal(s),
                ds,
                g_wedge_dg: spec.g_wedge_dg(s),
                owner,
            });
        }
        Ok(Self {
            inner: Arc::new(Assembly {
                spec: spec.clone(),
                grid,
                unknowns,
                valid,
                matrix,
                samples,
                owned_length,
                perimeter,
            }),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.inner.grid
    }

    pub fn spec(&self) -> &DomainSpec {
        &self.inner.spec
    }

    /// Solves for `R` with Neumann data `power * (g wedge d_tau g) - sum_k d_nu log|x - x_k|`.
    pub fn solve(&self, points: &[Complex64], power: u32) -> Result<NeumannPotential, LimitError> {
        let a = &*self.inner;
        let pw = power as f64;
        let mut rhs = vec![0.0; a.unknowns.len()];
        for s in &a.samples {
            let mut flux = pw * s.g_wedge_dg;
            for &x in points {
                let z = s.point - x;
                flux -= (z.re * s.normal.re + z.im * s.normal.im) / z.norm_sqr();
            }
            rhs[s.owner] += flux * s.ds;
        }
        let total: f64 = rhs.iter().sum();
        for (b, l) in rhs.iter_mut().zip(&a.owned_length) {
            *b -= total * l / a.perimeter;
        }
        let mut x = vec![0.0; a.unknowns.len()];
        pcg(&a.matrix, &rhs, &mut x, 1e-12, 50_000, true)?;
        let mut ax = vec![0.0; x.len()];
        a.matrix.mul(&x, &mut ax);
        let residual = ax.iter().zip(&rhs).map(|(l, r)| (l - r).abs()).fold(0.0, f64::max);

        let grid = &a.grid;
        let mut r = vec![0.0; grid.len()];
        for (row, &k) in a.unknowns.iter().enumerate() {
            r[k] = x[row];
        }
        let nx = grid.nx as i64;
        let offsets = [1i64, -1, nx, -nx];
        let grad_r = nodal_gradient(grid, &r, &a.valid, |k, dir| {
            let q = k as i64 + offsets[dir];
            let same_row = dir >= 2 || (q / nx == k as i64 / nx);
            (q >= 0 && (q as usize) < grid.len() && same_row && a.valid[q as usize]).then(|| (1.0, r[q as usize]))
        });
        let mut pot = NeumannPotential {
            inner: self.inner.clone(),
            points: points.to_vec(),
            power,
            r,
            grad_r,
            removed_mean: 0.0,
            boundary_term: 0.0,
            residual,
        };
        let mean = a.samples.iter().map(|s| pot.phi_at(s.point) * s.ds).sum::<f64>() / a.perimeter;
        for &k in &a.unknowns {
            pot.r[k] -= mean;
        }
        pot.removed_mean = mean;
        pot.boundary_term =
            0.5 * a.samples.iter().map(|s| pw * s.g_wedge_dg * pot.phi_at(s.point) * s.ds).sum::<f64>();
        Ok(pot)
    }
}

fn owner_of(grid: &Grid, index: &[usize], p: Complex64) -> usize {
    let q = (p - grid.origin) / grid.h;
    let (ci, cj) = (q.re.round() as i64, q.im.round() as i64);
    let mut best = (f64::INFINITY, usize::MAX);
    for dj in -1..=1 {
        for di in -1..=1 {
            let (i, j) = (ci + di, cj + dj);
            if i < 0 || j < 0 || i as usize >= grid.nx || j as usize >= grid.ny {
                continue;
            }
            let k = grid.index(i as usize, j as usize);
            if index[k] == usize::MAX {
                continue;
            }
            // Chebyshev distance picks the node whose dual cell holds p.
            let z = grid.pos[k] - p;
            let dist = z.re.abs().max(z.im.abs());
            if dist < best.0 {
                best = (dist, index[k]);
            }
        }
    }
    best.1
}

/// Neumann potential of a validated configuration with data `g^m`.
pub fn neumann_solve(mu: &VortexConfig, spec: &DomainSpec) -> Result<NeumannPotential, LimitError> {
    mu.validate(spec)?;
    NeumannSolver::new(spec)?.solve(&mu.points, mu.m)
}

impl NeumannPotential {
    pub fn grid(&self) -> &Grid {
        &self.inner.grid
    }

    pub fn is_node_valid(&self, k: usize) -> bool {
        self.inner.valid[k]
    }

    pub fn r_at(&self, x: Complex64) -> f64 {
        sample_field(&self.inner.grid, &self.r, &self.grad_r, &self.inner.valid, x)
    }

    pub fn phi_at(&self, x: Complex64) -> f64 {
        self.r_at(x) + self.points.iter().map(|&p| (x - p).norm().ln()).sum::<f64>()
    }

    /// `int_{dOmega} Phi`, by the boundary quadrature (zero after normalization).
    pub fn boundary_integral(&self) -> f64 {
        self.inner.samples.iter().map(|s| self.phi_at(s.point) * s.ds).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centered_source_has_zero_smooth_part() {
        let spec = DomainSpec::disk(0.02, 1);
        let pot = NeumannSolver::new(&spec).unwrap().solve(&[Complex64::new(0.0, 0.0)], 1).unwrap();
        for k in 0..pot.grid().len() {
            if pot.is_node_valid(k) && spec.signed_distance(pot.grid().pos[k]) > 0.0 {
                assert!(pot.r[k].abs() < 1e-4, "R = {} at {}", pot.r[k], pot.grid().pos[k]);
            }
        }
        assert!(pot.boundary_integral().abs() < 1e-8);
        assert!(pot.residual < 1e-8);
    }

    #[test]
    fn translation_equivariance() {
        let shift = Complex64::new(0.37, -0.21);
        let verts = vec![
            Complex64::new(-1.0, -0.8),
            Complex64::new(1.1, -0.9),
            Complex64::new(0.9, 1.0),
            Complex64::new(-0.8, 0.9),
        ];
        let h = 0.025;
        let spec = DomainSpec::polygon(verts.clone(), h, 1);
        // shift by whole lattice steps so both grids coincide
        let shift = Complex64::new((shift.re / h).round() * h, (shift.im / h).round() * h);
        let moved = DomainSpec::polygon(verts.iter().map(|v| v + shift).collect(), h, 1);
        let pts = [Complex64::new(-0.2, 0.1), Complex64::new(0.3, -0.25)];
        let a = NeumannSolver::new(&spec).unwrap().solve(&pts, 2).unwrap();
        let b = NeumannSolver::new(&moved).unwrap().solve(&pts.map(|p| p + shift), 2).unwrap();
        for t in 0..30 {
            let x = Complex64::new(-0.6 + 0.04 * t as f64, 0.5 - 0.03 * t as f64);
            assert!((a.phi_at(x) - b.phi_at(x + shift)).abs() < 1e-6);
        }
    }
}

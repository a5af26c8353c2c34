//! The limiting problem: canonical harmonic maps, Neumann potentials, the
//! renormalized energy `W`, the core energy `gamma_m` and the
//! finite-dimensional minimization over vortex positions.

mod canonical;
mod core_energy;
mod neumann;
mod renormalized;
mod search;

pub use canonical::{canonical_map, canonical_map_raw, CanonicalMap};
pub use core_energy::{core_energy, core_energy_table, CoreEnergy, CoreEnergyOptions, CoreEnergyTable};
pub use neumann::{neumann_solve, NeumannPotential, NeumannSolver};
pub use renormalized::{renormalized_energy, renormalized_energy_oracle, renormalized_energy_oracles};
pub use search::{limit_energy, optimize_vortices, SearchOptions, SearchResult};

use num_complex::Complex64;
use thiserror::Error;

use crate::domain::{DomainError, DomainSpec, Grid};
use crate::linalg::SolveError;
use crate::steiner::SteinerError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LimitError {
    #[error("invalid vortex configuration: {0}")]
    InvalidConfig(String),
    #[error("boundary phase cannot be unwrapped: {0}")]
    UnwrapFailure(String),
    #[error("linear solver diverged: {0}")]
    SolverDiverged(#[from] SolveError),
    #[error("radius {r} must exceed 3h = {min}")]
    RadiusTooSmall { r: f64, min: f64 },
    #[error("descent stalled with gradient norm {grad:e}")]
    NonConvergence { grad: f64 },
    #[error("forest is not admissible: {0}")]
    InadmissibleForest(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Steiner(#[from] SteinerError),
}

/// Vortex positions `x_1..x_{md}` of `mu = 2 pi sum delta_{x_k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct VortexConfig {
    pub points: Vec<Complex64>,
    pub m: u32,
    pub d: u32,
}

impl VortexConfig {
    pub fn new(points: Vec<Complex64>, m: u32, d: u32) -> Self {
        Self { points, m, d }
    }

    pub fn validate(&self, spec: &DomainSpec) -> Result<(), LimitError> {
        let expected = (self.m * self.d) as usize;
        if self.points.len() != expected {
            return Err(LimitError::InvalidConfig(format!(
                "{} points, expected m*d = {expected}",
                self.points.len()
            )));
        }
        if spec.d != self.d {
            return Err(LimitError::InvalidConfig(format!(
                "domain degree {} differs from configuration degree {}",
                spec.d, self.d
            )));
        }
        for (k, &p) in self.points.iter().enumerate() {
            if spec.signed_distance(p) <= 0.0 {
                return Err(LimitError::InvalidConfig(format!("point {k} is not interior")));
            }
            for &q in &self.points[..k] {
                if (p - q).norm() <= 1e-12 {
                    return Err(LimitError::InvalidConfig(format!("point {k} coincides with another")));
                }
            }
        }
        Ok(())
    }

    pub fn min_separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (k, p) in self.points.iter().enumerate() {
            for q in &self.points[..k] {
                best = best.min((p - q).norm());
            }
        }
        best
    }
}

/// Nodal gradient of a field with Dirichlet cut links, by the three-point
/// formula on nonuniform stencils. Nodes with `valid[k] == false` get zero.
fn nodal_gradient(
    grid: &Grid,
    values: &[f64],
    valid: &[bool],
    side: impl Fn(usize, usize) -> Option<(f64, f64)>,
) -> Vec<Complex64> {
    let h = grid.h;
    let mut out = vec![Complex64::new(0.0, 0.0); grid.len()];
    for k in 0..grid.len() {
        if !valid[k] {
            continue;
        }
        let mut comp = [0.0; 2];
        for axis in 0..2 {
            let plus = side(k, 2 * axis);
            let minus = side(k, 2 * axis + 1);
            let f0 = values[k];
            comp[axis] = match (minus, plus) {
                (Some((a, fa)), Some((b, fb))) => {
                    let (a, b) = (a * h, b * h);
                    -b / (a * (a + b)) * fa + (b - a) / (a * b) * f0 + a / (b * (a + b)) * fb
                }
                (None, Some((b, fb))) => (fb - f0) / (b * h),
                (Some((a, fa)), None) => (f0 - fa) / (a * h),
                (None, None) => 0.0,
            };
        }
        out[k] = Complex64::new(comp[0], comp[1]);
    }
    out
}

/// Evaluates a nodal field at `p`: bilinear if the surrounding cell has four
/// valid corners, otherwise first-order extrapolation from the nearest valid
/// node.
fn sample_field(grid: &Grid, values: &[f64], grads: &[Complex64], valid: &[bool], p: Complex64) -> f64 {
    if let Some((k, fx, fy)) = grid.locate(p) {
        let c = [k, k + 1, k + 1 + grid.nx, k + grid.nx];
        if c.iter().all(|&q| valid[q]) {
            return values[c[0]] * (1.0 - fx) * (1.0 - fy)
                + values[c[1]] * fx * (1.0 - fy)
                + values[c[2]] * fx * fy
                + values[c[3]] * (1.0 - fx) * fy;
        }
    }
    let k = nearest_valid(grid, valid, p).expect("point far from the lattice");
    let dx = p - grid.pos[k];
    values[k] + grads[k].re * dx.re + grads[k].im * dx.im
}

/// Same as [`sample_field`] for the gradient itself.
fn sample_gradient(grid: &Grid, grads: &[Complex64], valid: &[bool], p: Complex64) -> Complex64 {
    if let Some((k, fx, fy)) = grid.locate(p) {
        let c = [k, k + 1, k + 1 + grid.nx, k + grid.nx];
        if c.iter().all(|&q| valid[q]) {
            return grads[c[0]] * ((1.0 - fx) * (1.0 - fy))
                + grads[c[1]] * (fx * (1.0 - fy))
                + grads[c[2]] * (fx * fy)
                + grads[c[3]] * ((1.0 - fx) * fy);
        }
    }
    let k = nearest_valid(grid, valid, p).expect("point far from the lattice");
    grads[k]
}

fn nearest_valid(grid: &Grid, valid: &[bool], p: Complex64) -> Option<usize> {
    let q = (p - grid.origin) / grid.h;
    let (ci, cj) = (q.re.round() as i64, q.im.round() as i64);
    let mut best: Option<(f64, usize)> = None;
    for r in 0..4i64 {
        for dj in -r..=r {
            for di in -r..=r {
                if di.abs().max(dj.abs()) != r {
                    continue;
                }
                let (i, j) = (ci + di, cj + dj);
                if i < 0 || j < 0 || i as usize >= grid.nx || j as usize >= grid.ny {
                    continue;
                }
                let k = grid.index(i as usize, j as usize);
                if valid[k] {
                    let dist = (grid.pos[k] - p).norm();
                    if best.is_none_or(|(b, _)| dist < b) {
                        best = Some((dist, k));
                    }
                }
            }
        }
        if best.is_some() {
            break;
        }
    }
    best.map(|(_, k)| k)
}

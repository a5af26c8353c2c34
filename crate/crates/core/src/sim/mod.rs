//! Lattice minimization of the sharp functional (edge labels in `Z_m` as the
//! jump set) and of the diffuse functional (phase field `psi`), with vortex
//! and jump-set extraction on the results.

mod analysis;
mod diagnostic;
mod energy;
mod io;
mod minimize;

pub use analysis::{detect_vortices, energy_expansion_fit, extract_jump_set, ExpansionFit, JumpComponent, JumpSet, Vortex, VortexSet};
pub use diagnostic::{lm_split_diagnostic, wall_profile_1d, LmReport, WallProfile};
pub use energy::{
    diffuse_gradient, energy_diffuse, energy_sharp, sharp_gradient, truncate, update_labels, EnergyBreakdown,
};
pub use io::{read_snapshot, trace_csv, write_snapshot, SnapshotHeader};
pub use minimize::{minimize_diffuse, minimize_sharp, SimOutcome};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::domain::{build_grid, DomainError, DomainSpec, Grid, NodeKind};
use crate::limit::LimitError;
use crate::steiner::{CompetitorError, CompetitorField, SteinerForest};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("resolution: {0}")]
    Resolution(String),
    #[error("fit is ill conditioned: {0}")]
    IllConditioned(String),
    #[error("boundary trace of p(u) on the ball winds {winding} times")]
    WindingObstruction { winding: i32 },
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("malformed snapshot at line {line}: {reason}")]
    Snapshot { line: usize, reason: String },
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Limit(#[from] LimitError),
    #[error(transparent)]
    Competitor(#[from] CompetitorError),
}

/// Model and descent parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SimParams {
    pub m: u32,
    pub eps: f64,
    /// Wall width of the diffuse model.
    pub eta: f64,
    pub max_sweeps: usize,
    /// Gradient steps on `u` per sweep.
    pub inner: usize,
    /// Stop when the energy drops by less than `tol * max(1, E)` over
    /// `window` sweeps.
    pub tol: f64,
    pub window: usize,
    pub seed: u64,
}

impl SimParams {
    pub fn new(m: u32, eps: f64) -> Self {
        Self { m, eps, eta: 4.0 * eps, max_sweeps: 4000, inner: 10, tol: 1e-9, window: 50, seed: 0 }
    }

    pub fn validate(&self, h: f64, diffuse: bool) -> Result<(), SimError> {
        if self.m < 2 {
            return Err(SimError::Resolution(format!("m = {} must be at least 2", self.m)));
        }
        if self.eps < 2.0 * h {
            return Err(SimError::Resolution(format!("eps = {} is below 2h = {}", self.eps, 2.0 * h)));
        }
        if diffuse && self.eta < 4.0 * h {
            return Err(SimError::Resolution(format!("eta = {} is below 4h = {}", self.eta, 4.0 * h)));
        }
        if !(self.tol > 0.0) || self.window == 0 {
            return Err(SimError::Resolution("tolerance and window must be positive".into()));
        }
        Ok(())
    }
}

/// Edge incident to a node, with the node's role on the oriented edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Incidence {
    pub edge: usize,
    pub other: usize,
    pub tail: bool,
}

/// A lattice ready for minimization: the grid, quadrature weights and the
/// boundary conditions.
#[derive(Debug, Clone)]
pub struct Lattice {
    pub spec: DomainSpec,
    pub grid: Grid,
    /// Half the number of lattice cells sharing the edge.
    pub edge_weight: Vec<f64>,
    /// Nodes free to move (interior nodes).
    pub free: Vec<bool>,
    /// Edges whose label is pinned to zero (those touching the boundary).
    pub locked: Vec<bool>,
    pub incident: Vec<Vec<Incidence>>,
}

impl Lattice {
    pub fn new(spec: &DomainSpec) -> Result<Self, SimError> {
        Ok(Self::from_grid(spec, build_grid(spec)?))
    }

    pub fn from_grid(spec: &DomainSpec, grid: Grid) -> Self {
        let mut edge_weight = vec![0.0; grid.edges.len()];
        for cell in &grid.cells {
            for &e in &cell.edges {
                edge_weight[e] += 0.5;
            }
        }
        let free: Vec<bool> = grid.kind.iter().map(|&k| k == NodeKind::Interior).collect();
        let locked: Vec<bool> = grid.edges.iter().map(|&[a, b]| !free[a] || !free[b]).collect();
        let mut incident = vec![Vec::new(); grid.len()];
        for (e, &[a, b]) in grid.edges.iter().enumerate() {
            incident[a].push(Incidence { edge: e, other: b, tail: true });
            incident[b].push(Incidence { edge: e, other: a, tail: false });
        }
        Self { spec: spec.clone(), grid, edge_weight, free, locked, incident }
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn h(&self) -> f64 {
        self.grid.h
    }
}

/// Complex field, phase field and edge labels on a lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub u: Vec<Complex64>,
    pub psi: Vec<f64>,
    pub labels: Vec<u32>,
}

impl FieldState {
    /// `u = g` on the boundary and `g(x) tanh(|x - c| / 0.2)` inside (plain
    /// `g` when `d = 0`); `psi = 1`, labels 0.
    pub fn smooth_start(lat: &Lattice) -> Self {
        let c = lat.spec.center();
        let u = (0..lat.len())
            .map(|k| {
                if !lat.grid.is_active(k) {
                    return Complex64::new(0.0, 0.0);
                }
                if !lat.free[k] {
                    return lat.grid.g[k];
                }
                let p = lat.grid.pos[k];
                let r = if lat.spec.d == 0 { 1.0 } else { ((p - c).norm() / 0.2).tanh() };
                lat.spec.g_at(p) * r
            })
            .collect();
        Self::with_u(lat, u)
    }

    /// Unit-modulus field with independent uniform phases inside.
    pub fn random(lat: &Lattice, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = (0..lat.len())
            .map(|k| {
                if !lat.grid.is_active(k) {
                    Complex64::new(0.0, 0.0)
                } else if !lat.free[k] {
                    lat.grid.g[k]
                } else {
                    Complex64::from_polar(1.0, rng.gen_range(0.0..std::f64::consts::TAU))
                }
            })
            .collect();
        Self::with_u(lat, u)
    }

    /// The competitor field and its labels, truncated to `|u| <= 1`.
    pub fn from_competitor(lat: &Lattice, comp: &CompetitorField) -> Self {
        let mut s = Self { u: comp.u.clone(), psi: vec![1.0; lat.len()], labels: comp.labels.clone() };
        for (e, l) in s.labels.iter_mut().enumerate() {
            if lat.locked[e] {
                *l = 0;
            }
        }
        truncate(&mut s);
        s
    }

    /// Competitor field with `psi = 1 - exp(-dist(x, forest)/eta)`.
    pub fn from_competitor_diffuse(lat: &Lattice, comp: &CompetitorField, forest: &SteinerForest<f64>, eta: f64) -> Self {
        let mut s = Self::from_competitor(lat, comp);
        for k in 0..lat.len() {
            if !lat.free[k] {
                continue;
            }
            let p = lat.grid.pos[k];
            let dist = forest
                .edges
                .iter()
                .map(|&(a, b)| segment_distance(p, forest.points[a], forest.points[b]))
                .fold(f64::INFINITY, f64::min);
            s.psi[k] = if dist.is_finite() { 1.0 - (-dist / eta).exp() } else { 1.0 };
        }
        s.labels.iter_mut().for_each(|l| *l = 0);
        s
    }

    fn with_u(lat: &Lattice, u: Vec<Complex64>) -> Self {
        Self { u, psi: vec![1.0; lat.len()], labels: vec![0; lat.grid.edges.len()] }
    }

    /// Checks `|u| <= 1`, boundary values, `psi` range and locked labels.
    pub fn check(&self, lat: &Lattice, m: u32) -> Result<(), SimError> {
        if self.u.len() != lat.len() || self.psi.len() != lat.len() || self.labels.len() != lat.grid.edges.len() {
            return Err(SimError::InvalidState("array sizes do not match the lattice".into()));
        }
        for k in 0..lat.len() {
            if !lat.grid.is_active(k) {
                continue;
            }
            if self.u[k].norm() > 1.0 + 1e-12 {
                return Err(SimError::InvalidState(format!("|u| > 1 at node {k}")));
            }
            if !(0.0..=1.0).contains(&self.psi[k]) {
                return Err(SimError::InvalidState(format!("psi outside [0, 1] at node {k}")));
            }
            if !lat.free[k] && ((self.u[k] - lat.grid.g[k]).norm() > 1e-12 || self.psi[k] != 1.0) {
                return Err(SimError::InvalidState(format!("boundary condition violated at node {k}")));
            }
        }
        for (e, &l) in self.labels.iter().enumerate() {
            if l >= m || (lat.locked[e] && l != 0) {
                return Err(SimError::InvalidState(format!("bad label {l} on edge {e}")));
            }
        }
        Ok(())
    }
}

fn segment_distance(p: Complex64, a: Complex64, b: Complex64) -> f64 {
    let e = b - a;
    let len2 = e.norm_sqr();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = (((p - a) * e.conj()).re / len2).clamp(0.0, 1.0);
    (p - (a + e * t)).norm()
}

//! Building blocks shared by the subcommands and the acceptance checks.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use fracvort_core::domain::{DomainError, DomainSpec};
use fracvort_core::limit::{LimitError, VortexConfig};
use fracvort_core::sim::{
    detect_vortices, energy_diffuse, energy_sharp, extract_jump_set, minimize_diffuse, minimize_sharp, EnergyBreakdown,
    FieldState, JumpSet, Lattice, SimError, SimOutcome, SimParams, VortexSet,
};
use fracvort_core::steiner::{
    construct_competitor_field, lambda_mu, CompetitorError, CompetitorField, LambdaOptions, SteinerError, SteinerForest,
};

use crate::config::{InitKind, RunKind};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Limit(#[from] LimitError),
    #[error(transparent)]
    Steiner(#[from] SteinerError),
    #[error(transparent)]
    Competitor(#[from] CompetitorError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}, line {line}: {reason}")]
    Points { path: String, line: usize, reason: String },
}

/// Moves each point to the center of the lattice cell containing it, so that
/// no vortex sits close to a node.
pub fn snap_to_cells(points: &[Complex64], h: f64) -> Vec<Complex64> {
    points
        .iter()
        .map(|p| Complex64::new(((p.re / h).floor() + 0.5) * h, ((p.im / h).floor() + 0.5) * h))
        .collect()
}

/// `n` points evenly spread on the circle of the given radius, slightly
/// rotated off the axes and snapped to cell centers.
pub fn ring_points(n: usize, radius: f64, h: f64) -> Vec<Complex64> {
    let pts: Vec<Complex64> =
        (0..n).map(|k| Complex64::from_polar(radius, 0.0123 + TAU * k as f64 / n as f64)).collect();
    snap_to_cells(&pts, h)
}

/// `n` points drawn uniformly in the disc of radius `r_max` with pairwise
/// distances at least `min_gap`.
pub fn random_points(n: usize, r_max: f64, min_gap: f64, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    let mut pts: Vec<Complex64> = Vec::with_capacity(n);
    while pts.len() < n {
        let p = Complex64::from_polar(r_max * rng.gen::<f64>().sqrt(), rng.gen_range(0.0..TAU));
        if pts.iter().all(|q| (p - q).norm() >= min_gap) {
            pts.push(p);
        }
    }
    pts
}

/// Parses whitespace- or comma-separated `x y` pairs, one per line; `#`
/// starts a comment.
pub fn parse_points(text: &str, path: &str) -> Result<Vec<Complex64>, HarnessError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let nums: Vec<&str> = body.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
        let err = |reason: &str| HarnessError::Points { path: path.into(), line: i + 1, reason: reason.into() };
        if nums.len() != 2 {
            return Err(err("expected two coordinates"));
        }
        let x: f64 = nums[0].parse().map_err(|_| err("bad x coordinate"))?;
        let y: f64 = nums[1].parse().map_err(|_| err("bad y coordinate"))?;
        out.push(Complex64::new(x, y));
    }
    Ok(out)
}

pub fn read_points(path: &std::path::Path) -> Result<Vec<Complex64>, HarnessError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| HarnessError::Io { path: path.display().to_string(), source })?;
    parse_points(&text, &path.display().to_string())
}

/// Competitor field for `md` vortices on a ring, joined by a Lambda-minimal
/// forest.
pub fn ring_competitor(
    spec: &DomainSpec,
    m: u32,
    radius: f64,
    large: bool,
) -> Result<(CompetitorField, SteinerForest<f64>), HarnessError> {
    let pts = ring_points((m * spec.d) as usize, radius, spec.h);
    let forest = lambda_mu(&pts, m, LambdaOptions { large })?.forest;
    let comp = construct_competitor_field(&forest, &VortexConfig::new(pts, m, spec.d), spec)?;
    Ok((comp, forest))
}

/// One minimization with its post-processing.
#[derive(Debug, Clone)]
pub struct SimRun {
    pub kind: RunKind,
    pub eps: f64,
    pub seed: u64,
    pub lattice: Lattice,
    pub params: SimParams,
    pub outcome: SimOutcome,
    pub energy: EnergyBreakdown,
    pub vortices: VortexSet,
    pub jumps: JumpSet,
}

#[derive(Debug, Clone)]
pub struct RunRequest {
    pub kind: RunKind,
    pub init: InitKind,
    pub m: u32,
    pub eps: f64,
    pub eta: f64,
    pub radius: f64,
    pub seed: u64,
    pub max_sweeps: usize,
    pub large_steiner: bool,
}

impl RunRequest {
    pub fn sharp(m: u32, eps: f64) -> Self {
        Self {
            kind: RunKind::Sharp,
            init: InitKind::Competitor,
            m,
            eps,
            eta: 4.0 * eps,
            radius: 0.5,
            seed: 0,
            max_sweeps: 4000,
            large_steiner: false,
        }
    }
}

pub fn run_simulation(spec: &DomainSpec, req: &RunRequest) -> Result<SimRun, HarnessError> {
    let lat = Lattice::new(spec)?;
    let params = SimParams { eta: req.eta, max_sweeps: req.max_sweeps, seed: req.seed, ..SimParams::new(req.m, req.eps) };
    let init = match req.init {
        InitKind::Competitor => {
            let (comp, forest) = ring_competitor(spec, req.m, req.radius, req.large_steiner)?;
            match req.kind {
                RunKind::Sharp => FieldState::from_competitor(&lat, &comp),
                RunKind::Diffuse => FieldState::from_competitor_diffuse(&lat, &comp, &forest, req.eta),
            }
        }
        InitKind::Smooth => FieldState::smooth_start(&lat),
        InitKind::Random => FieldState::random(&lat, req.seed),
    };
    let outcome = match req.kind {
        RunKind::Sharp => minimize_sharp(&lat, &params, init)?,
        RunKind::Diffuse => minimize_diffuse(&lat, &params, init)?,
    };
    let energy = match req.kind {
        RunKind::Sharp => energy_sharp(&outcome.state, &lat, &params),
        RunKind::Diffuse => energy_diffuse(&outcome.state, &lat, &params),
    };
    let vortices = detect_vortices(&outcome.state, &lat, req.m);
    let jumps = extract_jump_set(&outcome.state, &lat, &vortices, 5.0 * req.eps);
    Ok(SimRun { kind: req.kind, eps: req.eps, seed: req.seed, lattice: lat, params, outcome, energy, vortices, jumps })
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

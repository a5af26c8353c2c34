use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::renormalized::energy_from_potential;
use super::{renormalized_energy, LimitError, NeumannSolver, VortexConfig};
use crate::domain::DomainSpec;
use crate::steiner::{lambda_mu, validate_forest, LambdaOptions, SteinerForest};

/// `W(mu)/m^2 + m d gamma + length(forest)` for a Lambda-admissible forest.
pub fn limit_energy(
    mu: &VortexConfig,
    spec: &DomainSpec,
    gamma: f64,
    forest: &SteinerForest<f64>,
) -> Result<f64, LimitError> {
    mu.validate(spec)?;
    let report = validate_forest(forest, &mu.points, mu.m);
    if !(report.covers_terminals && report.block_counts_ok && report.acyclic) {
        return Err(LimitError::InadmissibleForest(report.failures.join("; ")));
    }
    let w = renormalized_energy(mu, spec)?;
    let m2 = (mu.m * mu.m) as f64;
    let md = mu.points.len() as f64;
    Ok(w / m2 + md * gamma + forest.total_length())
}

#[derive(Debug, Clone)]
pub struct SearchOptions {
    pub seed: u64,
    pub starts: usize,
    /// Lattice spacing of the potential solves used during the search.
    pub h: f64,
    pub gamma: f64,
    pub initial_step: f64,
    pub min_step: f64,
    /// Vortices stay at least this far from the boundary and from each other.
    pub margin: f64,
    pub max_evaluations: usize,
    pub large: bool,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            starts: 4,
            h: 0.025,
            gamma: 0.0,
            initial_step: 0.1,
            min_step: 1e-3,
            margin: 0.05,
            max_evaluations: 4000,
            large: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub points: Vec<Complex64>,
    pub value: f64,
    pub forest: SteinerForest<f64>,
    /// Best value after every accepted move, over all starts.
    pub history: Vec<f64>,
    /// Objective at each random starting configuration.
    pub initial_values: Vec<f64>,
    pub evaluations: usize,
}

struct Objective<'a> {
    solver: NeumannSolver,
    spec: &'a DomainSpec,
    m: u32,
    opts: &'a SearchOptions,
    evaluations: usize,
}

impl Objective<'_> {
    fn admissible(&self, pts: &[Complex64]) -> bool {
        pts.iter().enumerate().all(|(k, &p)| {
            self.spec.signed_distance(p) >= self.opts.margin
                && pts[..k].iter().all(|&q| (p - q).norm() >= self.opts.margin)
        })
    }

    fn eval(&mut self, pts: &[Complex64]) -> Result<f64, LimitError> {
        if !self.admissible(pts) {
            return Ok(f64::INFINITY);
        }
        self.evaluations += 1;
        let pot = self.solver.solve(pts, self.m)?;
        let w = energy_from_potential(&pot);
        let lambda = lambda_mu(pts, self.m, LambdaOptions { large: self.opts.large })?.value;
        let m2 = (self.m * self.m) as f64;
        Ok(w / m2 + pts.len() as f64 * self.opts.gamma + lambda)
    }
}

/// Minimizes `W/m^2 + m d gamma + Lambda` over `m d` interior vortices by
/// compass search (step halved when no coordinate move improves) from
/// several random starts. Deterministic for a given seed.
pub fn optimize_vortices(spec: &DomainSpec, m: u32, d: u32, opts: &SearchOptions) -> Result<SearchResult, LimitError> {
    if d == 0 {
        return Err(LimitError::InvalidConfig("degree must be at least 1".into()));
    }
    let coarse = DomainSpec { h: opts.h, ..spec.clone() };
    let mut obj = Objective { solver: NeumannSolver::new(&coarse)?, spec, m, opts, evaluations: 0 };
    let n = (m * d) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let (lo, hi) = spec.bounding_box();

    let mut best: Option<(Vec<Complex64>, f64)> = None;
    let mut history = Vec::new();
    let mut initial_values = Vec::with_capacity(opts.starts);
    for _ in 0..opts.starts {
        let mut pts = Vec::with_capacity(n);
        let mut attempts = 0;
        while pts.len() < n {
            attempts += 1;
            if attempts > 100_000 {
                return Err(LimitError::InvalidConfig("cannot place vortices with the requested margin".into()));
            }
            let p = Complex64::new(rng.gen_range(lo.re..hi.re), rng.gen_range(lo.im..hi.im));
            let mut trial = pts.clone();
            trial.push(p);
            if obj.admissible(&trial) {
                pts = trial;
            }
        }
        let mut value = obj.eval(&pts)?;
        initial_values.push(value);
        let mut step = opts.initial_step;
        while step >= opts.min_step && obj.evaluations < opts.max_evaluations {
            let mut improved = false;
            for k in 0..n {
                for dir in [Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0), Complex64::new(0.0, 1.0), Complex64::new(0.0, -1.0)] {
                    let mut trial = pts.clone();
                    trial[k] += dir * step;
                    let v = obj.eval(&trial)?;
                    if v < value {
                        pts = trial;
                        value = v;
                        improved = true;
                        let overall = best.as_ref().map_or(value, |b| b.1.min(value));
                        history.push(overall);
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        if best.as_ref().is_none_or(|b| value < b.1) {
            best = Some((pts, value));
        }
    }
    let (points, value) = best.expect("at least one start");
    let forest = lambda_mu(&points, m, LambdaOptions { large: opts.large })?.forest;
    Ok(SearchResult { points, value, forest, history, initial_values, evaluations: obj.evaluations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_enters_affinely() {
        let spec = DomainSpec::disk(0.05, 1);
        let pts = vec![Complex64::new(-0.2, 0.1), Complex64::new(0.3, 0.0)];
        let mu = VortexConfig::new(pts.clone(), 2, 1);
        let forest = lambda_mu(&pts, 2, LambdaOptions::default()).unwrap().forest;
        let a = limit_energy(&mu, &spec, 0.4, &forest).unwrap();
        let b = limit_energy(&mu, &spec, 0.8, &forest).unwrap();
        assert!((b - a - 2.0 * 0.4).abs() < 1e-12);
    }

    #[test]
    fn inadmissible_forest_is_rejected() {
        let spec = DomainSpec::disk(0.05, 1);
        let pts = vec![Complex64::new(-0.2, 0.1), Complex64::new(0.3, 0.0)];
        let mu = VortexConfig::new(pts, 2, 1);
        let empty = SteinerForest::default();
        assert!(matches!(
            limit_energy(&mu, &spec, 0.0, &empty),
            Err(LimitError::InadmissibleForest(_))
        ));
    }

    #[test]
    fn search_never_ends_above_its_starts() {
        let spec = DomainSpec::disk(0.05, 1);
        let opts = SearchOptions { starts: 2, h: 0.05, min_step: 1e-2, ..Default::default() };
        let r = optimize_vortices(&spec, 2, 1, &opts).unwrap();
        for v in &r.initial_values {
            assert!(r.value <= *v);
        }
        assert!((r.points[0] - r.points[1]).norm() > 0.1);
    }
}

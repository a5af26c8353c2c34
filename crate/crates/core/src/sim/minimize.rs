use num_complex::Complex64;

use super::energy::{diffuse_dirichlet, potential, sharp_dirichlet, wall};
use super::{
    diffuse_gradient, energy_diffuse, energy_sharp, sharp_gradient, truncate, update_labels, EnergyBreakdown,
    FieldState, Lattice, SimError, SimParams,
};
use crate::linalg::{pcg, CsrBuilder};
use crate::optim::{projected_bb, DescentOptions};
use crate::quotient::ModulusParams;

/// Result of a minimization. When the sweep cap is hit before the energy
/// stalls, `converged` is false and `state` is the last (lowest) iterate.
#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub state: FieldState,
    /// Energy after the initial projection and after every sweep.
    pub trace: Vec<EnergyBreakdown>,
    pub sweeps: usize,
    pub converged: bool,
}

impl SimOutcome {
    pub fn energy(&self) -> f64 {
        self.trace.last().map_or(f64::NAN, |b| b.total)
    }

    /// True if no sweep raised the energy.
    pub fn is_monotone(&self) -> bool {
        self.trace.windows(2).all(|w| w[1].total <= w[0].total + 1e-12 * w[0].total.abs().max(1.0))
    }
}

fn enforce_boundary(state: &mut FieldState, lat: &Lattice) {
    for k in 0..lat.len() {
        if lat.grid.is_active(k) && !lat.free[k] {
            state.u[k] = lat.grid.g[k];
            state.psi[k] = 1.0;
        }
    }
    for (e, l) in state.labels.iter_mut().enumerate() {
        if lat.locked[e] {
            *l = 0;
        }
    }
    for p in state.psi.iter_mut() {
        *p = p.clamp(0.0, 1.0);
    }
    truncate(state);
}

fn dot(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x * y.conj()).re).sum()
}

/// Projected gradient steps on `u` with Barzilai-Borwein lengths and
/// monotone backtracking; the projection is the truncation `|u| <= 1`.
struct UStepper {
    step: f64,
    prev: Option<(Vec<Complex64>, Vec<Complex64>)>,
    grad: Vec<Complex64>,
}

impl UStepper {
    fn new(n: usize) -> Self {
        Self { step: 0.05, prev: None, grad: vec![Complex64::new(0.0, 0.0); n] }
    }

    /// Runs up to `iters` steps; `energy(u)` is the smooth energy with the
    /// other variables frozen, `gradient` fills `self.grad`.
    fn run(
        &mut self,
        state: &mut FieldState,
        lat: &Lattice,
        iters: usize,
        energy: impl Fn(&[Complex64]) -> f64,
        gradient: impl Fn(&FieldState, &mut [Complex64]),
    ) {
        let mut e = energy(&state.u);
        let mut trial = state.u.clone();
        for _ in 0..iters {
            gradient(state, &mut self.grad);
            if let Some((pu, pg)) = &self.prev {
                let s: Vec<Complex64> = state.u.iter().zip(pu).map(|(a, b)| a - b).collect();
                let y: Vec<Complex64> = self.grad.iter().zip(pg).map(|(a, b)| a - b).collect();
                let sy = dot(&s, &y);
                if sy > 0.0 {
                    self.step = (dot(&s, &s) / sy).clamp(1e-6, 10.0);
                }
            }
            let mut t = self.step;
            let mut accepted = false;
            for _ in 0..40 {
                let mut moved = 0.0;
                for k in 0..lat.len() {
                    if lat.free[k] {
                        let mut z = state.u[k] - self.grad[k] * t;
                        let r = z.norm();
                        if r > 1.0 {
                            z /= r;
                        }
                        moved += (z - state.u[k]).norm_sqr();
                        trial[k] = z;
                    } else {
                        trial[k] = state.u[k];
                    }
                }
                if moved == 0.0 {
                    break;
                }
                let en = energy(&trial);
                if en <= e - 1e-4 * moved / t {
                    self.prev = Some((state.u.clone(), self.grad.clone()));
                    std::mem::swap(&mut state.u, &mut trial);
                    e = en;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                self.prev = None;
                break;
            }
        }
    }
}

fn stalled(trace: &[EnergyBreakdown], params: &SimParams) -> bool {
    let n = trace.len();
    if n <= params.window {
        return false;
    }
    let last = trace[n - 1].total;
    trace[n - 1 - params.window].total - last < params.tol * last.abs().max(1.0)
}

/// Alternating minimization of the sharp functional: exact label update,
/// then projected Barzilai-Borwein steps on `u` with labels frozen.
pub fn minimize_sharp(lat: &Lattice, params: &SimParams, init: FieldState) -> Result<SimOutcome, SimError> {
    params.validate(lat.h(), false)?;
    let mut state = init;
    state.check_sizes(lat)?;
    enforce_boundary(&mut state, lat);
    let roots = ModulusParams::<f64>::new(params.m).map_err(|e| SimError::InvalidState(e.to_string()))?.roots().to_vec();
    let mut trace = vec![energy_sharp(&state, lat, params)];
    let mut stepper = UStepper::new(lat.len());
    for sweep in 1..=params.max_sweeps {
        update_labels(&mut state, lat, params);
        let labels = state.labels.clone();
        stepper.run(
            &mut state,
            lat,
            params.inner,
            |u| sharp_dirichlet(u, &labels, lat, &roots) + potential(u, lat, params.eps),
            |s, g| sharp_gradient(s, lat, params, g),
        );
        trace.push(energy_sharp(&state, lat, params));
        if stalled(&trace, params) {
            return Ok(SimOutcome { state, trace, sweeps: sweep, converged: true });
        }
    }
    Ok(SimOutcome { state, trace, sweeps: params.max_sweeps, converged: false })
}

/// Minimizes the `psi`-dependent part for frozen `u`: a quadratic problem
/// solved by conjugate gradients and clamped to `[0, 1]`, with a projected
/// descent fallback if the clamped solution is not an improvement.
fn psi_step(state: &mut FieldState, lat: &Lattice, params: &SimParams, roots: &[Complex64]) {
    let n = lat.len();
    let eta = params.eta;
    let mut index = vec![usize::MAX; n];
    let mut unknowns = Vec::new();
    for k in 0..n {
        if lat.free[k] {
            index[k] = unknowns.len();
            unknowns.push(k);
        }
    }
    let mut builder = CsrBuilder::new(unknowns.len());
    let mut rhs = vec![0.0; unknowns.len()];
    for (row, &k) in unknowns.iter().enumerate() {
        builder.add(row, row, lat.grid.weight[k] / eta);
        rhs[row] += lat.grid.weight[k] / eta;
    }
    let u = &state.u;
    for (e, &[a, b]) in lat.grid.edges.iter().enumerate() {
        let w = lat.edge_weight[e];
        if w == 0.0 {
            continue;
        }
        let full = (u[a] - u[b]).norm_sqr();
        let quot = roots.iter().map(|r| (u[a] - r * u[b]).norm_sqr()).fold(f64::INFINITY, f64::min);
        let c = 0.25 * w * (full - quot).max(0.0);
        // Local 2x2 block: eta w [[1, -1], [-1, 1]] + c [[1, 1], [1, 1]].
        let (d, off) = (eta * w + c, -eta * w + c);
        for (p, q) in [(a, b), (b, a)] {
            if index[p] == usize::MAX {
                continue;
            }
            let row = index[p];
            builder.add(row, row, d);
            if index[q] == usize::MAX {
                rhs[row] -= off * state.psi[q];
            } else {
                builder.add(row, index[q], off);
            }
        }
    }
    let a = builder.build();
    let mut x: Vec<f64> = unknowns.iter().map(|&k| state.psi[k]).collect();
    let quad = |psi: &[f64]| wall(psi, lat, eta) + diffuse_dirichlet(u, psi, lat, roots);
    let before = quad(&state.psi);
    let mut candidate = state.psi.clone();
    if pcg(&a, &rhs, &mut x, 1e-10, 20_000, false).is_ok() {
        for (row, &k) in unknowns.iter().enumerate() {
            candidate[k] = x[row].clamp(0.0, 1.0);
        }
        if quad(&candidate) <= before {
            state.psi = candidate;
            return;
        }
    }
    let free = lat.free.clone();
    let mut psi = state.psi.clone();
    let opts = DescentOptions { max_iter: 200, ..Default::default() };
    let snapshot = state.clone();
    projected_bb(
        &mut psi,
        &free,
        |p, g| {
            let mut s = snapshot.clone();
            s.psi.copy_from_slice(p);
            let mut gu = vec![Complex64::new(0.0, 0.0); p.len()];
            diffuse_gradient(&s, lat, params, &mut gu, g);
            quad(p)
        },
        |p| p.iter_mut().for_each(|x| *x = x.clamp(0.0, 1.0)),
        &opts,
    );
    if quad(&psi) <= before {
        state.psi = psi;
    }
}

/// Alternating minimization of the diffuse functional: projected
/// Barzilai-Borwein steps on `u` with `psi` frozen, then the quadratic
/// `psi` subproblem.
pub fn minimize_diffuse(lat: &Lattice, params: &SimParams, init: FieldState) -> Result<SimOutcome, SimError> {
    params.validate(lat.h(), true)?;
    let mut state = init;
    state.check_sizes(lat)?;
    state.labels.iter_mut().for_each(|l| *l = 0);
    enforce_boundary(&mut state, lat);
    let roots = ModulusParams::<f64>::new(params.m).map_err(|e| SimError::InvalidState(e.to_string()))?.roots().to_vec();
    let mut trace = vec![energy_diffuse(&state, lat, params)];
    let mut stepper = UStepper::new(lat.len());
    for sweep in 1..=params.max_sweeps {
        let psi = state.psi.clone();
        stepper.run(
            &mut state,
            lat,
            params.inner,
            |u| diffuse_dirichlet(u, &psi, lat, &roots) + potential(u, lat, params.eps),
            |s, g| diffuse_gradient(s, lat, params, g, &mut vec![0.0; g.len()]),
        );
        psi_step(&mut state, lat, params, &roots);
        trace.push(energy_diffuse(&state, lat, params));
        if stalled(&trace, params) {
            return Ok(SimOutcome { state, trace, sweeps: sweep, converged: true });
        }
    }
    Ok(SimOutcome { state, trace, sweeps: params.max_sweeps, converged: false })
}

impl FieldState {
    pub(crate) fn check_sizes(&self, lat: &Lattice) -> Result<(), SimError> {
        if self.u.len() != lat.len() || self.psi.len() != lat.len() || self.labels.len() != lat.grid.edges.len() {
            return Err(SimError::InvalidState("array sizes do not match the lattice".into()));
        }
        Ok(())
    }
}

use num_complex::Complex64;
use rayon::prelude::*;

use super::{FieldState, Lattice, SimParams};
use crate::linalg::det_sum;
use crate::quotient::ModulusParams;

/// Parts of a lattice energy; `total` is their sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EnergyBreakdown {
    pub quotient_dirichlet: f64,
    pub potential: f64,
    pub at_wall: f64,
    pub jump_length: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    fn finish(mut self) -> Self {
        self.total = self.quotient_dirichlet + self.potential + self.at_wall + self.jump_length;
        self
    }
}

fn roots(m: u32) -> Vec<Complex64> {
    ModulusParams::<f64>::new(m).expect("validated modulus").roots().to_vec()
}

fn nearest(roots: &[Complex64], a: Complex64, b: Complex64) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (k, w) in roots.iter().enumerate() {
        let d = (a - w * b).norm_sqr();
        if d < best.0 {
            best = (d, k);
        }
    }
    best.1
}

pub(crate) fn potential(u: &[Complex64], lat: &Lattice, eps: f64) -> f64 {
    let c = 1.0 / (4.0 * eps * eps);
    det_sum(u.len(), |k| {
        let w = lat.grid.weight[k];
        if w == 0.0 {
            return 0.0;
        }
        let t = 1.0 - u[k].norm_sqr();
        w * c * t * t
    })
}

pub(crate) fn sharp_dirichlet(u: &[Complex64], labels: &[u32], lat: &Lattice, roots: &[Complex64]) -> f64 {
    det_sum(lat.grid.edges.len(), |e| {
        let [a, b] = lat.grid.edges[e];
        let w = lat.edge_weight[e];
        0.5 * w * (u[a] - roots[labels[e] as usize] * u[b]).norm_sqr()
    })
}

/// Sharp energy: `sum_e w_e |u_i - a^{k_e} u_j|^2 / 2 + sum_i c_i (1 - |u_i|^2)^2 / (4 eps^2) + h #{k_e != 0}`.
pub fn energy_sharp(state: &FieldState, lat: &Lattice, params: &SimParams) -> EnergyBreakdown {
    let roots = roots(params.m);
    let h = lat.h();
    EnergyBreakdown {
        quotient_dirichlet: sharp_dirichlet(&state.u, &state.labels, lat, &roots),
        potential: potential(&state.u, lat, params.eps),
        at_wall: 0.0,
        jump_length: state.labels.iter().filter(|&&k| k != 0).count() as f64 * h,
        total: 0.0,
    }
    .finish()
}

pub(crate) fn diffuse_dirichlet(u: &[Complex64], psi: &[f64], lat: &Lattice, roots: &[Complex64]) -> f64 {
    det_sum(lat.grid.edges.len(), |e| {
        let [a, b] = lat.grid.edges[e];
        let w = lat.edge_weight[e];
        let full = (u[a] - u[b]).norm_sqr();
        let k = nearest(roots, u[a], u[b]);
        let quot = (u[a] - roots[k] * u[b]).norm_sqr();
        let pb = 0.5 * (psi[a] + psi[b]);
        0.5 * w * (quot + pb * pb * (full - quot))
    })
}

pub(crate) fn wall(psi: &[f64], lat: &Lattice, eta: f64) -> f64 {
    let grad = det_sum(lat.grid.edges.len(), |e| {
        let [a, b] = lat.grid.edges[e];
        let d = psi[a] - psi[b];
        lat.edge_weight[e] * d * d
    });
    let mass = det_sum(psi.len(), |k| {
        let t = 1.0 - psi[k];
        lat.grid.weight[k] * t * t
    });
    0.5 * eta * grad + mass / (2.0 * eta)
}

/// Diffuse energy: edge cost `w_e [d_m^2 + psi_e^2 (|u_i - u_j|^2 - d_m^2)] / 2`
/// with `psi_e` the edge mean, the same potential, and
/// `eta/2 |grad psi|^2 + (1 - psi)^2 / (2 eta)` integrated on the lattice.
pub fn energy_diffuse(state: &FieldState, lat: &Lattice, params: &SimParams) -> EnergyBreakdown {
    let roots = roots(params.m);
    EnergyBreakdown {
        quotient_dirichlet: diffuse_dirichlet(&state.u, &state.psi, lat, &roots),
        potential: potential(&state.u, lat, params.eps),
        at_wall: wall(&state.psi, lat, params.eta),
        jump_length: 0.0,
        total: 0.0,
    }
    .finish()
}

/// Gradient of the smooth part of [`energy_sharp`] with respect to the real
/// and imaginary parts of `u`; zero at fixed nodes.
pub fn sharp_gradient(state: &FieldState, lat: &Lattice, params: &SimParams, out: &mut [Complex64]) {
    let roots = roots(params.m);
    let u = &state.u;
    let inv_eps2 = 1.0 / (params.eps * params.eps);
    out.par_iter_mut().enumerate().for_each(|(k, g)| {
        *g = Complex64::new(0.0, 0.0);
        if !lat.free[k] {
            return;
        }
        for inc in &lat.incident[k] {
            let w = lat.edge_weight[inc.edge];
            let r = roots[state.labels[inc.edge] as usize];
            *g += if inc.tail { (u[k] - r * u[inc.other]) * w } else { (u[k] - r.conj() * u[inc.other]) * w };
        }
        *g -= u[k] * (lat.grid.weight[k] * (1.0 - u[k].norm_sqr()) * inv_eps2);
    });
}

/// Gradients of [`energy_diffuse`] with respect to `u` and `psi`; zero at
/// fixed nodes.
pub fn diffuse_gradient(
    state: &FieldState,
    lat: &Lattice,
    params: &SimParams,
    gu: &mut [Complex64],
    gpsi: &mut [f64],
) {
    let roots = roots(params.m);
    let (u, psi) = (&state.u, &state.psi);
    let inv_eps2 = 1.0 / (params.eps * params.eps);
    let eta = params.eta;
    gu.par_iter_mut().zip(gpsi.par_iter_mut()).enumerate().for_each(|(k, (g, gp))| {
        *g = Complex64::new(0.0, 0.0);
        *gp = 0.0;
        if !lat.free[k] {
            return;
        }
        for inc in &lat.incident[k] {
            let w = lat.edge_weight[inc.edge];
            let o = inc.other;
            let pb = 0.5 * (psi[k] + psi[o]);
            let p2 = pb * pb;
            // Nearest root seen from the tail, as in the energy.
            let (a, b) = if inc.tail { (k, o) } else { (o, k) };
            let r = roots[nearest(&roots, u[a], u[b])];
            let full = u[k] - u[o];
            let quot = if inc.tail { u[k] - r * u[o] } else { u[k] - r.conj() * u[o] };
            *g += (quot * (1.0 - p2) + full * p2) * w;
            *gp += 0.5 * w * pb * (full.norm_sqr() - quot.norm_sqr()) + eta * w * (psi[k] - psi[o]);
        }
        *g -= u[k] * (lat.grid.weight[k] * (1.0 - u[k].norm_sqr()) * inv_eps2);
        *gp -= lat.grid.weight[k] * (1.0 - psi[k]) / eta;
    });
}

/// `u <- u / max(1, |u|)` at every node.
pub fn truncate(state: &mut FieldState) {
    for z in state.u.iter_mut() {
        let r = z.norm();
        if r > 1.0 {
            *z /= r;
        }
    }
}

/// Exact label minimization edge by edge:
/// `k_e = argmin_k w_e |u_i - a^k u_j|^2 / 2 + h [k != 0]`, ties to the
/// smallest `k`. Returns the number of labels that changed.
pub fn update_labels(state: &mut FieldState, lat: &Lattice, params: &SimParams) -> usize {
    let roots = roots(params.m);
    let h = lat.h();
    let u = &state.u;
    let new: Vec<u32> = (0..lat.grid.edges.len())
        .into_par_iter()
        .map(|e| {
            if lat.locked[e] {
                return 0;
            }
            let [a, b] = lat.grid.edges[e];
            let w = lat.edge_weight[e];
            let mut best = (0.5 * w * (u[a] - u[b]).norm_sqr(), 0u32);
            for (k, r) in roots.iter().enumerate().skip(1) {
                let c = 0.5 * w * (u[a] - r * u[b]).norm_sqr() + h;
                if c < best.0 {
                    best = (c, k as u32);
                }
            }
            best.1
        })
        .collect();
    let changed = new.iter().zip(&state.labels).filter(|(a, b)| a != b).count();
    state.labels = new;
    changed
}

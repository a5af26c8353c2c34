//! Core energy `gamma_m(R) = min G_1(v, B_R) - (pi/m^2) log R` with
//! `v = z/|z|` on the boundary circle.
//!
//! The disc is discretized on a polar lattice with uniform radial step. The
//! weights make the discrete functional telescope under radial extension of a
//! minimizer by its boundary values, so the discrete `gamma_m(R)` is exactly
//! non-increasing along `R, 2R, 4R, ...` as long as `R` is a multiple of the
//! radial step.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use super::LimitError;
use crate::optim::{lbfgs, DescentOptions};

#[derive(Debug, Clone, Copy)]
pub struct CoreEnergyOptions {
    pub dr: f64,
    pub n_theta: usize,
    /// Relax the equivariant profile on the full polar lattice.
    pub relax_2d: bool,
    pub max_iter: usize,
}

impl Default for CoreEnergyOptions {
    fn default() -> Self {
        Self { dr: 0.1, n_theta: 64, relax_2d: true, max_iter: 20_000 }
    }
}

#[derive(Debug, Clone)]
pub struct CoreEnergy {
    pub radius: f64,
    pub m: u32,
    /// `gamma` from the equivariant ansatz `v = f(r) e^{i theta}`.
    pub gamma_1d: f64,
    /// `gamma` after free relaxation (equal to `gamma_1d` if disabled).
    pub gamma_2d: f64,
    /// `|gamma_1d - gamma_2d| > 1e-3`.
    pub flagged: bool,
    /// Minimal raw energy `min G_1(v, B_R)`.
    pub raw_energy: f64,
    /// Radial profile `f(r_i)`, `r_i = i dr`.
    pub profile: Vec<f64>,
}

impl CoreEnergy {
    pub fn gamma(&self) -> f64 {
        self.gamma_1d.min(self.gamma_2d)
    }
}

#[derive(Debug, Clone)]
pub struct CoreEnergyTable {
    pub entries: Vec<CoreEnergy>,
    /// Fitted `gamma_inf` in `gamma(R) ~ gamma_inf + c / R`.
    pub limit: f64,
    pub slope_c: f64,
    /// Spread of the last two table values.
    pub error_bar: f64,
}

struct Polar {
    n: usize,
    nt: usize,
    dr: f64,
    m2: f64,
    dtheta: f64,
}

impl Polar {
    fn r(&self, i: f64) -> f64 {
        i * self.dr
    }

    /// Weight of the radial edge between rings `i` and `i + 1` (`i >= 1`).
    fn radial_weight(&self, i: usize) -> f64 {
        self.r(i as f64 + 0.5) * self.dtheta / self.dr
    }

    /// Weight of an angular edge on ring `i`.
    fn angular_weight(&self, i: usize) -> f64 {
        let outer = if i == self.n { self.r(i as f64) } else { self.r(i as f64 + 0.5) };
        (outer / self.r(i as f64 - 0.5)).ln() / self.dtheta
    }

    fn area(&self, i: usize) -> f64 {
        self.r(i as f64) * self.dr * self.dtheta
    }

    fn center_area(&self) -> f64 {
        PI * (0.5 * self.dr).powi(2)
    }

    fn edge(&self, w: f64, a: Complex64, b: Complex64) -> f64 {
        let dm = a.norm() - b.norm();
        0.5 / self.m2 * w * ((a - b).norm_sqr() + (self.m2 - 1.0) * dm * dm)
    }

    /// Gradient of [`Polar::edge`] with respect to `a` (as a real 2-vector).
    fn edge_grad(&self, w: f64, a: Complex64, b: Complex64) -> Complex64 {
        let na = a.norm();
        let radial = if na > 0.0 { a * ((na - b.norm()) / na) } else { Complex64::new(0.0, 0.0) };
        (a - b + radial * (self.m2 - 1.0)) * (w / self.m2)
    }
}

fn energy_1d(p: &Polar, f: &[f64], grad: &mut [f64]) -> f64 {
    // f[i-1] is the profile on ring i, i = 1..n-1; f_0 = 0, f_n = 1.
    let n = p.n;
    let fv = |i: usize| -> f64 {
        if i == 0 {
            0.0
        } else if i == n {
            1.0
        } else {
            f[i - 1]
        }
    };
    grad.iter_mut().for_each(|g| *g = 0.0);
    let nt = p.nt as f64;
    let angular = 4.0 * (0.5 * p.dtheta).sin().powi(2) * nt / (2.0 * p.m2);
    let mut e = 0.5 * PI * fv(1).powi(2) + 0.25 * p.center_area();
    if n > 1 {
        grad[0] += PI * fv(1);
    }
    for i in 1..n {
        let w = nt * p.radial_weight(i) * 0.5;
        let df = fv(i + 1) - fv(i);
        e += w * df * df;
        grad[i - 1] -= 2.0 * w * df;
        if i + 1 < n {
            grad[i] += 2.0 * w * df;
        }
    }
    for i in 1..=n {
        let a = angular * p.angular_weight(i);
        e += a * fv(i).powi(2);
        if i < n {
            grad[i - 1] += 2.0 * a * fv(i);
            let area = 0.25 * nt * p.area(i);
            let s = 1.0 - fv(i).powi(2);
            e += area * s * s;
            grad[i - 1] -= 4.0 * area * s * fv(i);
        }
    }
    e
}

fn energy_2d(p: &Polar, x: &[f64], grad: &mut [f64]) -> f64 {
    let (n, nt) = (p.n, p.nt);
    let at = |i: usize, j: usize| -> Complex64 {
        if i == 0 {
            Complex64::new(0.0, 0.0)
        } else if i == n {
            Complex64::from_polar(1.0, j as f64 * p.dtheta)
        } else {
            let k = 2 * ((i - 1) * nt + j);
            Complex64::new(x[k], x[k + 1])
        }
    };
    grad.iter_mut().for_each(|g| *g = 0.0);
    let mut add = |i: usize, j: usize, g: Complex64| {
        if i >= 1 && i < n {
            let k = 2 * ((i - 1) * nt + j);
            grad[k] += g.re;
            grad[k + 1] += g.im;
        }
    };
    let mut e = 0.25 * p.center_area();
    let wc = 0.5 * p.dtheta;
    for j in 0..nt {
        let a = at(1, j);
        let zero = Complex64::new(0.0, 0.0);
        e += p.edge(wc, a, zero);
        add(1, j, p.edge_grad(wc, a, zero));
    }
    for i in 1..n {
        let w = p.radial_weight(i);
        for j in 0..nt {
            let (a, b) = (at(i, j), at(i + 1, j));
            e += p.edge(w, a, b);
            add(i, j, p.edge_grad(w, a, b));
            add(i + 1, j, p.edge_grad(w, b, a));
        }
    }
    for i in 1..=n {
        let w = p.angular_weight(i);
        for j in 0..nt {
            let jn = (j + 1) % nt;
            let (a, b) = (at(i, j), at(i, jn));
            e += p.edge(w, a, b);
            add(i, j, p.edge_grad(w, a, b));
            add(i, jn, p.edge_grad(w, b, a));
        }
        if i < n {
            let area = p.area(i);
            for j in 0..nt {
                let a = at(i, j);
                let s = 1.0 - a.norm_sqr();
                e += 0.25 * area * s * s;
                add(i, j, a * (-area * s));
            }
        }
    }
    e
}

/// Computes `gamma_m(R)` for `R >= 2`.
pub fn core_energy(radius: f64, m: u32, opts: &CoreEnergyOptions) -> Result<CoreEnergy, LimitError> {
    if radius < 2.0 {
        return Err(LimitError::InvalidConfig(format!("core radius {radius} below 2")));
    }
    let n = (radius / opts.dr).round() as usize;
    let dr = radius / n as f64;
    let m2 = (m as f64).powi(2);
    let p = Polar { n, nt: opts.n_theta, dr, m2, dtheta: TAU / opts.n_theta as f64 };
    let subtract = PI / m2 * radius.ln();

    let mut f: Vec<f64> = (1..n).map(|i| (i as f64 * dr).min(1.0)).collect();
    let free = vec![true; f.len()];
    let tight = DescentOptions { max_iter: opts.max_iter, grad_tol: 1e-10, stall_tol: 1e-15, window: 200, memory: 12 };
    let report = lbfgs(&mut f, &free, |x, g| energy_1d(&p, x, g), &tight);
    if report.grad_norm > 1e-6 {
        return Err(LimitError::NonConvergence { grad: report.grad_norm });
    }
    f.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    let mut scratch = vec![0.0; f.len()];
    let e1 = energy_1d(&p, &f, &mut scratch);

    let mut e2 = e1;
    if opts.relax_2d {
        let mut x = Vec::with_capacity(2 * (n - 1) * p.nt);
        for fi in &f {
            for j in 0..p.nt {
                let z = Complex64::from_polar(*fi, j as f64 * p.dtheta);
                x.push(z.re);
                x.push(z.im);
            }
        }
        let free = vec![true; x.len()];
        let relax = DescentOptions { max_iter: opts.max_iter, grad_tol: 1e-9, stall_tol: 1e-15, window: 200, memory: 12 };
        let report = lbfgs(&mut x, &free, |x, g| energy_2d(&p, x, g), &relax);
        if report.grad_norm > 1e-5 {
            return Err(LimitError::NonConvergence { grad: report.grad_norm });
        }
        for c in x.chunks_mut(2) {
            let z = Complex64::new(c[0], c[1]);
            let s = z.norm().max(1.0);
            c[0] = z.re / s;
            c[1] = z.im / s;
        }
        let mut scratch = vec![0.0; x.len()];
        e2 = energy_2d(&p, &x, &mut scratch);
    }
    let mut profile = Vec::with_capacity(n + 1);
    profile.push(0.0);
    profile.extend_from_slice(&f);
    profile.push(1.0);
    Ok(CoreEnergy {
        radius,
        m,
        gamma_1d: e1 - subtract,
        gamma_2d: e2 - subtract,
        flagged: (e1 - e2).abs() > 1e-3,
        raw_energy: e1.min(e2),
        profile,
    })
}

/// Table of `gamma_m(R)` with the extrapolated limit `gamma_m`.
pub fn core_energy_table(radii: &[f64], m: u32, opts: &CoreEnergyOptions) -> Result<CoreEnergyTable, LimitError> {
    let entries = radii
        .iter()
        .map(|&r| core_energy(r, m, opts))
        .collect::<Result<Vec<_>, _>>()?;
    let (limit, slope_c) = fit_inverse_radius(&entries);
    let error_bar = match entries.len() {
        0 | 1 => f64::NAN,
        k => (entries[k - 1].gamma() - entries[k - 2].gamma()).abs(),
    };
    Ok(CoreEnergyTable { entries, limit, slope_c, error_bar })
}

fn fit_inverse_radius(entries: &[CoreEnergy]) -> (f64, f64) {
    match entries.len() {
        0 => (f64::NAN, f64::NAN),
        1 => (entries[0].gamma(), 0.0),
        n => {
            let xs: Vec<f64> = entries.iter().map(|e| 1.0 / e.radius).collect();
            let ys: Vec<f64> = entries.iter().map(|e| e.gamma()).collect();
            let mx = xs.iter().sum::<f64>() / n as f64;
            let my = ys.iter().sum::<f64>() / n as f64;
            let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
            let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
            let c = sxy / sxx;
            (my - c * mx, c)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_gradient(p: &Polar, x: &[f64], f: fn(&Polar, &[f64], &mut [f64]) -> f64) {
        let mut g = vec![0.0; x.len()];
        f(p, x, &mut g);
        let mut scratch = vec![0.0; x.len()];
        for k in (0..x.len()).step_by(7) {
            let step = 1e-6;
            let mut xp = x.to_vec();
            xp[k] += step;
            let mut xm = x.to_vec();
            xm[k] -= step;
            let fd = (f(p, &xp, &mut scratch) - f(p, &xm, &mut scratch)) / (2.0 * step);
            assert!((fd - g[k]).abs() <= 1e-6 * (1.0 + g[k].abs()), "{k}: {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let p = Polar { n: 6, nt: 8, dr: 0.5, m2: 9.0, dtheta: TAU / 8.0 };
        let f: Vec<f64> = (1..6).map(|i| 0.15 * i as f64 + 0.01 * (i * i) as f64).collect();
        check_gradient(&p, &f, energy_1d);
        let x: Vec<f64> = (0..2 * 5 * 8).map(|k| 0.3 * ((k as f64) * 0.77).sin() + 0.1).collect();
        check_gradient(&p, &x, energy_2d);
    }

    #[test]
    fn equivariant_fields_have_equal_energies() {
        let p = Polar { n: 10, nt: 16, dr: 0.3, m2: 4.0, dtheta: TAU / 16.0 };
        let f: Vec<f64> = (1..10).map(|i| (i as f64 / 10.0).sqrt()).collect();
        let mut x = Vec::new();
        for fi in &f {
            for j in 0..16 {
                let z = Complex64::from_polar(*fi, j as f64 * p.dtheta);
                x.push(z.re);
                x.push(z.im);
            }
        }
        let mut g1 = vec![0.0; f.len()];
        let mut g2 = vec![0.0; x.len()];
        assert!((energy_1d(&p, &f, &mut g1) - energy_2d(&p, &x, &mut g2)).abs() < 1e-10);
    }

    #[test]
    fn larger_m_gives_smaller_gamma() {
        let opts = CoreEnergyOptions { relax_2d: false, ..Default::default() };
        let g2 = core_energy(4.0, 2, &opts).unwrap();
        let g4 = core_energy(4.0, 4, &opts).unwrap();
        assert!(g4.gamma() < g2.gamma());
        assert!(core_energy(1.0, 2, &opts).is_err());
    }
}

//! First-order minimizers on flat real vectors: limited-memory BFGS and a
//! projected Barzilai-Borwein descent, both with monotone Armijo backtracking.
//!
//! Coordinates with `free[i] == false` are never moved.

use std::collections::VecDeque;

#[derive(Debug, Clone, Copy)]
pub struct DescentOptions {
    pub max_iter: usize,
    /// Stop once the free gradient's max-norm falls below this.
    pub grad_tol: f64,
    /// Stop once the energy decrease over `window` iterations is below
    /// `stall_tol * max(1, |E|)`.
    pub stall_tol: f64,
    pub window: usize,
    pub memory: usize,
}

impl Default for DescentOptions {
    fn default() -> Self {
        Self { max_iter: 5000, grad_tol: 1e-8, stall_tol: 1e-12, window: 50, memory: 8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentReport {
    pub iterations: usize,
    pub energy: f64,
    pub grad_norm: f64,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn masked_max(g: &[f64], free: &[bool]) -> f64 {
    g.iter().zip(free).filter(|(_, &f)| f).map(|(g, _)| g.abs()).fold(0.0, f64::max)
}

struct Stall {
    history: VecDeque<f64>,
    window: usize,
    tol: f64,
}

impl Stall {
    fn push(&mut self, e: f64) -> bool {
        self.history.push_back(e);
        if self.history.len() > self.window + 1 {
            self.history.pop_front();
        }
        if self.history.len() <= self.window {
            return false;
        }
        let first = *self.history.front().unwrap();
        first - e < self.tol * e.abs().max(1.0)
    }
}

/// L-BFGS with backtracking on the Armijo condition.
///
/// `f(x, grad)` returns the energy and writes the gradient.
pub fn lbfgs<F>(x: &mut [f64], free: &[bool], mut f: F, opts: &DescentOptions) -> DescentReport
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x.len();
    let mut g = vec![0.0; n];
    let mut e = f(x, &mut g);
    mask(&mut g, free);
    let mut s_hist: VecDeque<Vec<f64>> = VecDeque::new();
    let mut y_hist: VecDeque<Vec<f64>> = VecDeque::new();
    let mut rho_hist: VecDeque<f64> = VecDeque::new();
    let mut stall = Stall { history: VecDeque::new(), window: opts.window, tol: opts.stall_tol };
    let mut xn = vec![0.0; n];
    let mut gn = vec![0.0; n];
    let mut dir = vec![0.0; n];
    let mut alpha_buf = Vec::new();

    for it in 0..opts.max_iter {
        let gmax = masked_max(&g, free);
        if gmax <= opts.grad_tol {
            return DescentReport { iterations: it, energy: e, grad_norm: gmax, converged: true };
        }
        // Two-loop recursion.
        dir.copy_from_slice(&g);
        alpha_buf.clear();
        for i in (0..s_hist.len()).rev() {
            let a = rho_hist[i] * dot(&s_hist[i], &dir);
            alpha_buf.push(a);
            for (d, y) in dir.iter_mut().zip(&y_hist[i]) {
                *d -= a * y;
            }
        }
        let gamma = if let (Some(s), Some(y)) = (s_hist.back(), y_hist.back()) {
            dot(s, y) / dot(y, y)
        } else {
            1.0 / dot(&g, &g).sqrt().max(1e-300)
        };
        dir.iter_mut().for_each(|d| *d *= gamma);
        for (j, i) in (0..s_hist.len()).enumerate() {
            let a = alpha_buf[s_hist.len() - 1 - j];
            let b = rho_hist[i] * dot(&y_hist[i], &dir);
            for (d, s) in dir.iter_mut().zip(&s_hist[i]) {
                *d += (a - b) * s;
            }
        }
        mask(&mut dir, free);
        let mut slope = -dot(&g, &dir);
        if slope >= 0.0 {
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
            let scale = 1.0 / dot(&g, &g).sqrt().max(1e-300);
            for (d, gi) in dir.iter_mut().zip(&g) {
                *d = gi * scale;
            }
            slope = -dot(&g, &dir);
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            for i in 0..n {
                xn[i] = x[i] - t * dir[i];
            }
            let en = f(&xn, &mut gn);
            if en.is_finite() && en <= e + 1e-4 * t * slope {
                mask(&mut gn, free);
                let s: Vec<f64> = (0..n).map(|i| xn[i] - x[i]).collect();
                let y: Vec<f64> = (0..n).map(|i| gn[i] - g[i]).collect();
                let sy = dot(&s, &y);
                if sy > 1e-16 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
                    if s_hist.len() == opts.memory {
                        s_hist.pop_front();
                        y_hist.pop_front();
                        rho_hist.pop_front();
                    }
                    s_hist.push_back(s);
                    y_hist.push_back(y);
                    rho_hist.push_back(1.0 / sy);
                }
                x.copy_from_slice(&xn);
                g.copy_from_slice(&gn);
                e = en;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            let gmax = masked_max(&g, free);
            return DescentReport { iterations: it, energy: e, grad_norm: gmax, converged: gmax <= opts.grad_tol };
        }
        if stall.push(e) {
            let gmax = masked_max(&g, free);
            return DescentReport { iterations: it + 1, energy: e, grad_norm: gmax, converged: true };
        }
    }
    let gmax = masked_max(&g, free);
    DescentReport { iterations: opts.max_iter, energy: e, grad_norm: gmax, converged: gmax <= opts.grad_tol }
}

fn mask(v: &mut [f64], free: &[bool]) {
    for (x, &f) in v.iter_mut().zip(free) {
        if !f {
            *x = 0.0;
        }
    }
}

/// Projected Barzilai-Borwein descent: `x <- proj(x - t g)` with BB step
/// lengths and monotone backtracking.
pub fn projected_bb<F, P>(
    x: &mut [f64],
    free: &[bool],
    mut f: F,
    project: P,
    opts: &DescentOptions,
) -> DescentReport
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
    P: Fn(&mut [f64]),
{
    let n = x.len();
    project(x);
    let mut g = vec![0.0; n];
    let mut e = f(x, &mut g);
    mask(&mut g, free);
    let mut step = 1.0 / masked_max(&g, free).max(1e-300) * 1e-2;
    let mut xn = vec![0.0; n];
    let mut gn = vec![0.0; n];
    let mut stall = Stall { history: VecDeque::new(), window: opts.window, tol: opts.stall_tol };
    let proj_grad = |x: &[f64], g: &[f64], xn: &mut [f64]| -> f64 {
        // max-norm of the projected gradient step with unit length
        let mut m = 0.0f64;
        for i in 0..x.len() {
            xn[i] = x[i] - g[i];
        }
        project(xn);
        for i in 0..x.len() {
            if free[i] {
                m = m.max((x[i] - xn[i]).abs());
            }
        }
        m
    };
    for it in 0..opts.max_iter {
        let pg = proj_grad(x, &g, &mut xn);
        if pg <= opts.grad_tol {
            return DescentReport { iterations: it, energy: e, grad_norm: pg, converged: true };
        }
        let mut t = step;
        let mut accepted = false;
        for _ in 0..60 {
            for i in 0..n {
                xn[i] = if free[i] { x[i] - t * g[i] } else { x[i] };
            }
            project(&mut xn);
            let decrease: f64 = (0..n).map(|i| g[i] * (xn[i] - x[i])).sum();
            let en = f(&xn, &mut gn);
            if en.is_finite() && en <= e + 1e-4 * decrease.min(0.0) {
                mask(&mut gn, free);
                let s: Vec<f64> = (0..n).map(|i| xn[i] - x[i]).collect();
                let sy: f64 = (0..n).map(|i| s[i] * (gn[i] - g[i])).sum();
                let ss = dot(&s, &s);
                step = if sy > 0.0 { (ss / sy).clamp(1e-12, 1e12) } else { t * 2.0 };
                x.copy_from_slice(&xn);
                g.copy_from_slice(&gn);
                e = en;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            let pg = proj_grad(x, &g, &mut xn);
            return DescentReport { iterations: it, energy: e, grad_norm: pg, converged: pg <= opts.grad_tol };
        }
        if stall.push(e) {
            let pg = proj_grad(x, &g, &mut xn);
            return DescentReport { iterations: it + 1, energy: e, grad_norm: pg, converged: true };
        }
    }
    let pg = proj_grad(x, &g, &mut xn);
    DescentReport { iterations: opts.max_iter, energy: e, grad_norm: pg, converged: pg <= opts.grad_tol }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64], g: &mut [f64]) -> f64 {
        let (a, b) = (x[0], x[1]);
        g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
        g[1] = 200.0 * (b - a * a);
        (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
    }

    #[test]
    fn lbfgs_solves_rosenbrock() {
        let mut x = vec![-1.2, 1.0];
        let opts = DescentOptions { grad_tol: 1e-10, ..Default::default() };
        let r = lbfgs(&mut x, &[true, true], rosenbrock, &opts);
        assert!(r.converged);
        assert!((x[0] - 1.0).abs() < 1e-7 && (x[1] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn lbfgs_respects_frozen_coordinates() {
        let mut x = vec![0.5, 3.0];
        let r = lbfgs(&mut x, &[true, false], rosenbrock, &DescentOptions::default());
        assert_eq!(x[1], 3.0);
        assert!(r.grad_norm < 1e-6);
    }

    #[test]
    fn projected_bb_hits_the_bound() {
        // minimize (x - 2)^2 + (y + 1)^2 on [0, 1]^2
        let f = |x: &[f64], g: &mut [f64]| {
            g[0] = 2.0 * (x[0] - 2.0);
            g[1] = 2.0 * (x[1] + 1.0);
            (x[0] - 2.0).powi(2) + (x[1] + 1.0).powi(2)
        };
        let clamp = |x: &mut [f64]| x.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
        let mut x = vec![0.3, 0.6];
        let r = projected_bb(&mut x, &[true, true], f, clamp, &DescentOptions::default());
        assert!(r.converged);
        assert!((x[0] - 1.0).abs() < 1e-12 && x[1].abs() < 1e-12);
    }
}

//! Sparse symmetric matrices and a Jacobi-preconditioned conjugate gradient.

use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("conjugate gradient stopped at relative residual {residual:e} after {iterations} iterations")]
    Diverged { residual: f64, iterations: usize },
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone, Default)]
pub struct Csr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col: Vec<usize>,
    pub val: Vec<f64>,
}

/// Row-by-row builder; duplicate entries in a row are summed.
#[derive(Debug, Clone, Default)]
pub struct CsrBuilder {
    rows: Vec<Vec<(usize, f64)>>,
}

impl CsrBuilder {
    pub fn new(n: usize) -> Self {
        Self { rows: vec![Vec::new(); n] }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.rows[i].push((j, v));
    }

    pub fn build(self) -> Csr {
        let n = self.rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col = Vec::new();
        let mut val = Vec::new();
        row_ptr.push(0);
        for mut row in self.rows {
            row.sort_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for (j, v) in row {
                if last == Some(j) {
                    *val.last_mut().unwrap() += v;
                } else {
                    col.push(j);
                    val.push(v);
                    last = Some(j);
                }
            }
            row_ptr.push(col.len());
        }
        Csr { n, row_ptr, col, val }
    }
}

impl Csr {
    /// `y = A x`. Rows are computed independently, so the result does not
    /// depend on the thread count.
    pub fn mul(&self, x: &[f64], y: &mut [f64]) {
        y.par_iter_mut().with_min_len(4096).enumerate().for_each(|(i, yi)| {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.val[k] * x[self.col[k]];
            }
            *yi = s;
        });
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                (self.row_ptr[i]..self.row_ptr[i + 1])
                    .find(|&k| self.col[k] == i)
                    .map_or(0.0, |k| self.val[k])
            })
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Result of a conjugate gradient solve.
#[derive(Debug, Clone, Copy)]
pub struct CgStats {
    pub iterations: usize,
    pub residual: f64,
}

/// Solves `A x = b` for symmetric positive (semi)definite `A`, starting from
/// the given `x`. With `project_constants`, iterates are kept orthogonal to
/// the constant vector (singular Neumann systems; `b` must then have zero sum).
pub fn pcg(
    a: &Csr,
    b: &[f64],
    x: &mut [f64],
    rel_tol: f64,
    max_iter: usize,
    project_constants: bool,
) -> Result<CgStats, SolveError> {
    let n = a.n;
    let diag = a.diagonal();
    let inv: Vec<f64> = diag.iter().map(|&d| if d.abs() > 0.0 { 1.0 / d } else { 1.0 }).collect();
    let project = |v: &mut [f64]| {
        if project_constants {
            let mean = v.iter().sum::<f64>() / n as f64;
            v.iter_mut().for_each(|x| *x -= mean);
        }
    };
    let bnorm = dot(b, b).sqrt().max(1e-300);
    let mut r = vec![0.0; n];
    a.mul(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    project(&mut r);
    let mut z: Vec<f64> = r.iter().zip(&inv).map(|(r, d)| r * d).collect();
    project(&mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut res = dot(&r, &r).sqrt() / bnorm;
    if res <= rel_tol {
        return Ok(CgStats { iterations: 0, residual: res });
    }
    for it in 1..=max_iter {
        a.mul(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        project(&mut r);
        res = dot(&r, &r).sqrt() / bnorm;
        if res <= rel_tol {
            project(x);
            return Ok(CgStats { iterations: it, residual: res });
        }
        for i in 0..n {
            z[i] = r[i] * inv[i];
        }
        project(&mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(SolveError::Diverged { residual: res, iterations: max_iter })
}

/// Thomas algorithm for a tridiagonal system; `lower[0]` and
/// `upper[n-1]` are ignored.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - lower[i] * c[i - 1];
        c[i] = if i + 1 < n { upper[i] / m } else { 0.0 };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

const CHUNK: usize = 2048;

/// Sum of `f(0..n)` in fixed chunks, so the result does not depend on the
/// number of threads.
pub fn det_sum(n: usize, f: impl Fn(usize) -> f64 + Sync) -> f64 {
    let parts: Vec<f64> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| (c * CHUNK..((c + 1) * CHUNK).min(n)).map(&f).sum())
        .collect();
    parts.iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> Csr {
        let mut b = CsrBuilder::new(n);
        for i in 0..n {
            b.add(i, i, 2.0);
            if i > 0 {
                b.add(i, i - 1, -1.0);
            }
            if i + 1 < n {
                b.add(i, i + 1, -1.0);
            }
        }
        b.build()
    }

    #[test]
    fn pcg_matches_tridiagonal_solve() {
        let n = 50;
        let a = laplacian_1d(n);
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let mut x = vec![0.0; n];
        pcg(&a, &rhs, &mut x, 1e-13, 500, false).unwrap();
        let lower = vec![-1.0; n];
        let upper = vec![-1.0; n];
        let diag = vec![2.0; n];
        let y = solve_tridiagonal(&lower, &diag, &upper, &rhs);
        for i in 0..n {
            assert!((x[i] - y[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn singular_neumann_system() {
        // Path graph Laplacian with free ends; rhs of zero sum.
        let n = 30;
        let mut b = CsrBuilder::new(n);
        for i in 0..n - 1 {
            b.add(i, i, 1.0);
            b.add(i + 1, i + 1, 1.0);
            b.add(i, i + 1, -1.0);
            b.add(i + 1, i, -1.0);
        }
        let a = b.build();
        let mut rhs = vec![0.0; n];
        rhs[3] = 1.0;
        rhs[20] = -1.0;
        let mut x = vec![0.0; n];
        pcg(&a, &rhs, &mut x, 1e-12, 1000, true).unwrap();
        let mut ax = vec![0.0; n];
        a.mul(&x, &mut ax);
        for i in 0..n {
            assert!((ax[i] - rhs[i]).abs() < 1e-10);
        }
        assert!(x.iter().sum::<f64>().abs() < 1e-10);
    }

    #[test]
    fn builder_sums_duplicates() {
        let mut b = CsrBuilder::new(2);
        b.add(0, 1, 1.0);
        b.add(0, 1, 2.0);
        b.add(1, 1, 4.0);
        let a = b.build();
        assert_eq!(a.col, vec![1, 1]);
        assert_eq!(a.val, vec![3.0, 4.0]);
        assert_eq!(a.diagonal(), vec![0.0, 4.0]);
    }
}

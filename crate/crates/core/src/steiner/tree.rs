//! Exact Euclidean Steiner minimal trees for a handful of terminals.
//!
//! Full topologies are generated by inserting terminals one at a time into
//! an edge of the current topology; every full topology on `n` terminals
//! arises exactly once. For a fixed topology the length is convex in the
//! Steiner point positions and is minimized by Smith's iteration (a joint
//! Weiszfeld step solving a small linear system). Degenerate trees appear as
//! limits with collapsed Steiner points. Because deleting an inserted
//! terminal never lengthens the optimum, partial topologies give lower bounds
//! and the search is pruned against the minimum spanning tree.

use num_complex::Complex;

use super::{SteinerError, SteinerForest};
use crate::scalar::Real;

/// Terminal limit of the default solver.
pub const MAX_TERMINALS: usize = 6;
/// Terminal limit of the large-instance mode.
pub const MAX_TERMINALS_LARGE: usize = 9;

/// Length of the Euclidean minimum spanning tree (Prim).
pub fn mst_length<T: Real>(points: &[Complex<T>]) -> T {
    let n = points.len();
    if n < 2 {
        return T::zero();
    }
    let mut in_tree = vec![false; n];
    let mut best = vec![T::infinity(); n];
    best[0] = T::zero();
    let mut total = T::zero();
    for _ in 0..n {
        let mut u = usize::MAX;
        for v in 0..n {
            if !in_tree[v] && (u == usize::MAX || best[v] < best[u]) {
                u = v;
            }
        }
        in_tree[u] = true;
        total = total + best[u];
        for v in 0..n {
            if !in_tree[v] {
                let d = (points[u] - points[v]).norm();
                if d < best[v] {
                    best[v] = d;
                }
            }
        }
    }
    total
}

struct Search<'a, T: Real> {
    terminals: &'a [Complex<T>],
    order: Vec<usize>,
    scale: T,
    best_len: T,
    best: Option<(Vec<(usize, usize)>, Vec<Complex<T>>)>,
    evaluated: usize,
}

/// Solves `A X = B` for a small symmetric positive definite `A` (row-major).
fn cholesky_solve<T: Real>(a: &mut [T], b: &mut [Complex<T>], n: usize) -> bool {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d = d - a[j * n + k] * a[j * n + k];
        }
        if d <= T::zero() {
            return false;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s = s - a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s = s - b[k] * a[i * n + k];
        }
        b[i] = s / a[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s = s - b[k] * a[k * n + i];
        }
        b[i] = s / a[i * n + i];
    }
    true
}

fn tree_length<T: Real>(edges: &[(usize, usize)], terminals: &[Complex<T>], steiner: &[Complex<T>]) -> T {
    let n = terminals.len();
    let at = |k: usize| if k < n { terminals[k] } else { steiner[k - n] };
    edges.iter().fold(T::zero(), |acc, &(a, b)| acc + (at(a) - at(b)).norm())
}

/// Smith's iteration on a fixed topology. Steiner points without incident
/// edges stay where they are.
fn smith<T: Real>(edges: &[(usize, usize)], terminals: &[Complex<T>], steiner: &mut [Complex<T>], scale: T, max_iter: usize) {
    let n = terminals.len();
    let s = steiner.len();
    let floor = scale * T::lit(1e-13);
    let tol = scale * T::lit(1e-11);
    let mut a = vec![T::zero(); s * s];
    let mut b = vec![Complex::new(T::zero(), T::zero()); s];
    for _ in 0..max_iter {
        a.iter_mut().for_each(|x| *x = T::zero());
        b.iter_mut().for_each(|x| *x = Complex::new(T::zero(), T::zero()));
        for &(p, q) in edges {
            let (sp, sq) = (p >= n, q >= n);
            let xp = if sp { steiner[p - n] } else { terminals[p] };
            let xq = if sq { steiner[q - n] } else { terminals[q] };
            let w = T::one() / (xp - xq).norm().max(floor);
            match (sp, sq) {
                (true, true) => {
                    let (i, j) = (p - n, q - n);
                    a[i * s + i] = a[i * s + i] + w;
                    a[j * s + j] = a[j * s + j] + w;
                    a[i * s + j] = a[i * s + j] - w;
                    a[j * s + i] = a[j * s + i] - w;
                }
                (true, false) => {
                    let i = p - n;
                    a[i * s + i] = a[i * s + i] + w;
                    b[i] = b[i] + xq * w;
                }
                (false, true) => {
                    let j = q - n;
                    a[j * s + j] = a[j * s + j] + w;
                    b[j] = b[j] + xp * w;
                }
                (false, false) => {}
            }
        }
        for i in 0..s {
            if a[i * s + i] == T::zero() {
                a[i * s + i] = T::one();
                b[i] = steiner[i];
            }
        }
        if !cholesky_solve(&mut a, &mut b, s) {
            break;
        }
        let mut disp = T::zero();
        for i in 0..s {
            disp = disp.max((b[i] - steiner[i]).norm());
            steiner[i] = b[i];
        }
        if disp < tol {
            break;
        }
    }
}

/// Minimizes the length of a fixed topology over its Steiner points and
/// returns it.
///
/// Smith's iteration converges slowly when the optimum is degenerate, so
/// Steiner points that end close to a neighbour are tentatively merged into
/// it (the edge contracted) and the smaller topology is relaxed again; a
/// merge is kept when it shortens the tree.
pub(crate) fn relax_topology<T: Real>(
    edges: &[(usize, usize)],
    terminals: &[Complex<T>],
    steiner: &mut [Complex<T>],
    scale: T,
    max_iter: usize,
) -> T {
    let n = terminals.len();
    let s = steiner.len();
    if s == 0 {
        return tree_length(edges, terminals, steiner);
    }
    // A point sitting on a neighbour gets an almost infinite weight and
    // would stay pinned; restart such points from their neighbours' centroid.
    for i in 0..s {
        let here = n + i;
        let nbrs: Vec<Complex<T>> = edges
            .iter()
            .filter_map(|&(p, q)| if p == here { Some(q) } else if q == here { Some(p) } else { None })
            .map(|k| if k < n { terminals[k] } else { steiner[k - n] })
            .collect();
        if !nbrs.is_empty() && nbrs.iter().any(|&z| (z - steiner[i]).norm() < scale * T::lit(1e-6)) {
            let sum = nbrs.iter().fold(Complex::new(T::zero(), T::zero()), |acc, &z| acc + z);
            steiner[i] = sum / T::from_usize_lossy(nbrs.len());
        }
    }
    smith(edges, terminals, steiner, scale, max_iter);
    let mut len = tree_length(edges, terminals, steiner);

    let radius = scale * T::lit(1e-2);
    let mut current: Vec<(usize, usize)> = edges.to_vec();
    // alias[i]: node that Steiner point i has been merged into.
    let mut alias: Vec<Option<usize>> = vec![None; s];
    let resolve = |alias: &[Option<usize>], mut k: usize| {
        while k >= n {
            match alias[k - n] {
                Some(t) => k = t,
                None => break,
            }
        }
        k
    };
    let place = |alias: &[Option<usize>], pts: &mut [Complex<T>]| {
        for i in 0..s {
            if alias[i].is_some() {
                let t = resolve(alias, n + i);
                pts[i] = if t < n { terminals[t] } else { pts[t - n] };
            }
        }
    };
    loop {
        let mut improved = false;
        'cand: for i in 0..s {
            if alias[i].is_some() {
                continue;
            }
            let here = n + i;
            for &(p, q) in &current {
                let other = if p == here { q } else if q == here { p } else { continue };
                let target = if other >= n { steiner[other - n] } else { terminals[other] };
                if (target - steiner[i]).norm() >= radius {
                    continue;
                }
                let mut trial_alias = alias.clone();
                trial_alias[i] = Some(other);
                let trial_edges: Vec<(usize, usize)> = current
                    .iter()
                    .map(|&(a, b)| (if a == here { other } else { a }, if b == here { other } else { b }))
                    .filter(|&(a, b)| a != b)
                    .collect();
                let mut trial = steiner.to_vec();
                place(&trial_alias, &mut trial);
                smith(&trial_edges, terminals, &mut trial, scale, max_iter);
                place(&trial_alias, &mut trial);
                let trial_len = tree_length(edges, terminals, &trial);
                if trial_len < len {
                    len = trial_len;
                    steiner.copy_from_slice(&trial);
                    alias = trial_alias;
                    current = trial_edges;
                    improved = true;
                    break 'cand;
                }
            }
        }
        if !improved {
            break;
        }
    }
    len
}

impl<'a, T: Real> Search<'a, T> {
    fn run(&mut self, edges: &mut Vec<(usize, usize)>, steiner: &mut Vec<Complex<T>>, k: usize) {
        let n = self.terminals.len();
        let len = relax_topology(edges, self.terminals, steiner, self.scale, 4000);
        self.evaluated += 1;
        let slack = T::lit(1e-7) * self.scale;
        if len > self.best_len + slack {
            return;
        }
        if k == n {
            if len < self.best_len || self.best.is_none() {
                self.best_len = len;
                self.best = Some((edges.clone(), steiner.clone()));
            }
            return;
        }
        let t = self.order[k];
        let new_s = n + steiner.len();
        for e in 0..edges.len() {
            let (a, b) = edges[e];
            let at = |q: usize| if q < n { self.terminals[q] } else { steiner[q - n] };
            let start = (at(a) + at(b) + self.terminals[t]) / T::lit(3.0);
            edges[e] = (a, new_s);
            edges.push((new_s, b));
            edges.push((new_s, t));
            steiner.push(start);
            let saved: Vec<Complex<T>> = steiner.clone();
            self.run(edges, steiner, k + 1);
            steiner.clear();
            steiner.extend_from_slice(&saved);
            steiner.pop();
            edges.pop();
            edges.pop();
            edges[e] = (a, b);
        }
    }
}

/// Terminal insertion order: a far pair, the point farthest from their
/// line, then by decreasing distance from the centroid.
fn insertion_order<T: Real>(p: &[Complex<T>]) -> Vec<usize> {
    let n = p.len();
    let (mut i0, mut i1, mut far) = (0, 1, T::neg_infinity());
    for i in 0..n {
        for j in i + 1..n {
            let d = (p[i] - p[j]).norm();
            if d > far {
                far = d;
                i0 = i;
                i1 = j;
            }
        }
    }
    let dir = p[i1] - p[i0];
    let mut rest: Vec<usize> = (0..n).filter(|&k| k != i0 && k != i1).collect();
    let off = |k: usize| {
        let q = p[k] - p[i0];
        (dir.re * q.im - dir.im * q.re).abs()
    };
    let i2 = *rest.iter().max_by(|&&a, &&b| off(a).partial_cmp(&off(b)).unwrap().then(b.cmp(&a))).unwrap();
    rest.retain(|&k| k != i2);
    let c = p.iter().fold(Complex::new(T::zero(), T::zero()), |acc, &z| acc + z) / T::from_usize_lossy(n);
    rest.sort_by(|&a, &b| {
        (p[b] - c).norm().partial_cmp(&(p[a] - c).norm()).unwrap().then(a.cmp(&b))
    });
    let mut order = vec![i0, i1, i2];
    order.extend(rest);
    order
}

/// Exact Steiner minimal tree on at most [`MAX_TERMINALS`] terminals.
pub fn steiner_tree<T: Real>(points: &[Complex<T>]) -> Result<SteinerForest<T>, SteinerError> {
    steiner_tree_limited(points, MAX_TERMINALS)
}

/// Exact Steiner minimal tree with an explicit terminal limit (at most
/// [`MAX_TERMINALS_LARGE`]); larger limits can take minutes.
pub fn steiner_tree_limited<T: Real>(points: &[Complex<T>], limit: usize) -> Result<SteinerForest<T>, SteinerError> {
    let n = points.len();
    let limit = limit.min(MAX_TERMINALS_LARGE);
    if n == 0 {
        return Err(SteinerError::Empty);
    }
    if n > limit {
        return Err(SteinerError::TooManyTerminals { n, limit });
    }
    for i in 0..n {
        for j in 0..i {
            if (points[i] - points[j]).norm() == T::zero() {
                return Err(SteinerError::DuplicatePoints { a: j, b: i });
            }
        }
    }
    let ids: Vec<usize> = (0..n).collect();
    if n == 1 {
        return Ok(SteinerForest::from_tree(points, &ids, &[], &[]));
    }
    if n == 2 {
        return Ok(SteinerForest::from_tree(points, &ids, &[], &[(0, 1)]));
    }
    let order = insertion_order(points);
    let scale = {
        let mut s = T::zero();
        for i in 0..n {
            for j in 0..i {
                s = s.max((points[i] - points[j]).norm());
            }
        }
        s
    };
    let mut search = Search {
        terminals: points,
        order: order.clone(),
        scale,
        best_len: mst_length(points) * (T::one() + T::lit(1e-9)),
        best: None,
        evaluated: 0,
    };
    let s0 = n;
    let mut edges = vec![(order[0], s0), (order[1], s0), (order[2], s0)];
    let mut steiner = vec![(points[order[0]] + points[order[1]] + points[order[2]]) / T::lit(3.0)];
    search.run(&mut edges, &mut steiner, 3);
    let (edges, steiner) = match search.best {
        Some(b) => b,
        None => return Ok(mst_forest(points)),
    };
    Ok(SteinerForest::from_tree(points, &ids, &steiner, &edges).collapsed(scale * T::lit(1e-8)))
}

/// The minimum spanning tree as a forest (used when no Steiner topology
/// improves on it).
fn mst_forest<T: Real>(points: &[Complex<T>]) -> SteinerForest<T> {
    let n = points.len();
    let mut in_tree = vec![false; n];
    let mut best = vec![(T::infinity(), 0usize); n];
    best[0].0 = T::zero();
    let mut edges = Vec::new();
    for step in 0..n {
        let mut u = usize::MAX;
        for v in 0..n {
            if !in_tree[v] && (u == usize::MAX || best[v].0 < best[u].0) {
                u = v;
            }
        }
        in_tree[u] = true;
        if step > 0 {
            edges.push((best[u].1, u));
        }
        for v in 0..n {
            let d = (points[u] - points[v]).norm();
            if !in_tree[v] && d < best[v].0 {
                best[v] = (d, u);
            }
        }
    }
    let ids: Vec<usize> = (0..n).collect();
    SteinerForest::from_tree(points, &ids, &[], &edges)
}

/// Exhaustive search over all full topologies without pruning (test oracle).
#[cfg(test)]
pub(crate) fn steiner_length_exhaustive(points: &[Complex<f64>]) -> f64 {
    fn rec(
        p: &[Complex<f64>],
        edges: &mut Vec<(usize, usize)>,
        steiner: &mut Vec<Complex<f64>>,
        k: usize,
        best: &mut f64,
    ) {
        let n = p.len();
        if k == n {
            let mut s = steiner.clone();
            let len = relax_topology(edges, p, &mut s, 1.0, 20000);
            *best = best.min(len);
            return;
        }
        let new_s = n + steiner.len();
        for e in 0..edges.len() {
            let (a, b) = edges[e];
            let at = |q: usize| if q < n { p[q] } else { steiner[q - n] };
            steiner.push((at(a) + at(b) + p[k]) / 3.0);
            edges[e] = (a, new_s);
            edges.push((new_s, b));
            edges.push((new_s, k));
            rec(p, edges, steiner, k + 1, best);
            edges.pop();
            edges.pop();
            edges[e] = (a, b);
            steiner.pop();
        }
    }
    let n = points.len();
    let mut edges = vec![(0, n), (1, n), (2, n)];
    let mut steiner = vec![(points[0] + points[1] + points[2]) / 3.0];
    let mut best = f64::INFINITY;
    rec(points, &mut edges, &mut steiner, 3, &mut best);
    best
}

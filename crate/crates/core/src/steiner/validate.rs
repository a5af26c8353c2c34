use num_complex::Complex;

use super::{PointKind, SteinerForest, UnionFind};
use crate::scalar::Real;

/// Outcome of [`validate_forest`]; `failures` explains every false flag.
#[derive(Debug, Clone, Default)]
pub struct ForestReport {
    pub covers_terminals: bool,
    pub block_counts_ok: bool,
    pub degrees_ok: bool,
    pub angles_ok: bool,
    pub hull_ok: bool,
    pub non_removable: bool,
    pub non_crossing: bool,
    pub acyclic: bool,
    pub failures: Vec<String>,
}

impl ForestReport {
    pub fn is_ok(&self) -> bool {
        self.failures.is_empty()
    }
}

fn cross<T: Real>(a: Complex<T>, b: Complex<T>) -> T {
    a.re * b.im - a.im * b.re
}

/// True if closed segments `ab` and `cd` intersect.
pub(crate) fn segments_intersect<T: Real>(a: Complex<T>, b: Complex<T>, c: Complex<T>, d: Complex<T>, eps: T) -> bool {
    let d1 = cross(b - a, c - a);
    let d2 = cross(b - a, d - a);
    let d3 = cross(d - c, a - c);
    let d4 = cross(d - c, b - c);
    let straddle = |x: T, y: T| (x > eps && y < -eps) || (x < -eps && y > eps);
    if straddle(d1, d2) && straddle(d3, d4) {
        return true;
    }
    let on = |p: Complex<T>, q: Complex<T>, r: Complex<T>, s: T| {
        s.abs() <= eps
            && r.re >= p.re.min(q.re) - eps
            && r.re <= p.re.max(q.re) + eps
            && r.im >= p.im.min(q.im) - eps
            && r.im <= p.im.max(q.im) + eps
    };
    on(a, b, c, d1) || on(a, b, d, d2) || on(c, d, a, d3) || on(c, d, b, d4)
}

fn in_hull<T: Real>(hull_pts: &[Complex<T>], p: Complex<T>, eps: T) -> bool {
    let n = hull_pts.len();
    match n {
        0 => false,
        1 => (hull_pts[0] - p).norm() <= eps,
        _ => {
            // p is in the hull iff no line through two hull points strictly
            // separates p from all of them.
            for i in 0..n {
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    let e = hull_pts[j] - hull_pts[i];
                    let len = e.norm();
                    if len == T::zero() {
                        continue;
                    }
                    let side = |q: Complex<T>| cross(e, q - hull_pts[i]) / len;
                    if side(p) < -eps && hull_pts.iter().all(|&q| side(q) >= -eps) {
                        return false;
                    }
                }
            }
            // Collinear point sets: also require p within the bounding box.
            let (mut lo, mut hi) = (hull_pts[0], hull_pts[0]);
            for q in hull_pts {
                lo = Complex::new(lo.re.min(q.re), lo.im.min(q.im));
                hi = Complex::new(hi.re.max(q.re), hi.im.max(q.im));
            }
            p.re >= lo.re - eps && p.re <= hi.re + eps && p.im >= lo.im - eps && p.im <= hi.im + eps
        }
    }
}

/// Checks the structural properties of a Lambda-admissible forest for the
/// vortex set `vortices` (forest terminals are matched through their labels).
pub fn validate_forest<T: Real>(forest: &SteinerForest<T>, vortices: &[Complex<T>], m: u32) -> ForestReport {
    let mut r = ForestReport {
        covers_terminals: true,
        block_counts_ok: true,
        degrees_ok: true,
        angles_ok: true,
        hull_ok: true,
        non_removable: true,
        non_crossing: true,
        acyclic: true,
        failures: Vec::new(),
    };
    let m = m as usize;
    let n = forest.len();
    let scale = forest
        .points
        .iter()
        .chain(vortices)
        .fold(T::one(), |acc, p| acc.max(p.norm()));
    let eps = scale * T::lit(1e-9);

    for (k, v) in vortices.iter().enumerate() {
        let found = (0..n).any(|i| forest.labels[i] == Some(k) && (forest.points[i] - *v).norm() <= eps);
        if !found {
            r.covers_terminals = false;
            r.failures.push(format!("vortex {k} is not a terminal of the forest"));
        }
    }

    if forest.has_cycle() {
        r.acyclic = false;
        r.failures.push("forest contains a cycle".into());
    }

    let comps = forest.components();
    for (ci, comp) in comps.iter().enumerate() {
        let count = comp.iter().filter(|&&k| forest.kinds[k] == PointKind::Terminal).count();
        if count == 0 || count % m != 0 {
            r.block_counts_ok = false;
            r.failures.push(format!("component {ci} holds {count} terminals, not a positive multiple of {m}"));
        }
        let hull: Vec<Complex<T>> = comp
            .iter()
            .filter(|&&k| forest.kinds[k] == PointKind::Terminal)
            .map(|&k| forest.points[k])
            .collect();
        for &k in comp {
            if !in_hull(&hull, forest.points[k], eps) {
                r.hull_ok = false;
                r.failures.push(format!("point {k} lies outside the hull of its component's terminals"));
            }
        }
    }

    for k in 0..n {
        let deg = forest.degree(k);
        match forest.kinds[k] {
            PointKind::Steiner if deg != 3 => {
                r.degrees_ok = false;
                r.failures.push(format!("Steiner point {k} has degree {deg}"));
            }
            PointKind::Terminal if deg == 0 && comps.iter().any(|c| c.len() > 1 && c.contains(&k)) => {
                r.degrees_ok = false;
                r.failures.push(format!("terminal {k} is isolated"));
            }
            _ => {}
        }
        if forest.kinds[k] == PointKind::Steiner && deg == 3 {
            let dirs: Vec<T> = forest
                .edges
                .iter()
                .filter_map(|&(a, b)| {
                    let other = if a == k { b } else if b == k { a } else { return None };
                    let d = forest.points[other] - forest.points[k];
                    Some(d.im.atan2(d.re))
                })
                .collect();
            let mut sorted = dirs.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let tau = T::TAU();
            let gaps = [sorted[1] - sorted[0], sorted[2] - sorted[1], sorted[0] + tau - sorted[2]];
            let target = tau / T::lit(3.0);
            let tol = T::lit(0.5f64.to_radians());
            if gaps.iter().any(|&g| (g - target).abs() > tol) {
                r.angles_ok = false;
                let deg_vals: Vec<f64> = gaps.iter().map(|g| g.to_f64().unwrap().to_degrees()).collect();
                r.failures.push(format!("junction {k} angles {deg_vals:.2?} deviate from 120 degrees"));
            }
        }
    }

    let ne = forest.edges.len();
    for i in 0..ne {
        for j in 0..i {
            let (a, b) = forest.edges[i];
            let (c, d) = forest.edges[j];
            if a == c || a == d || b == c || b == d {
                continue;
            }
            let (pa, pb, pc, pd) = (forest.points[a], forest.points[b], forest.points[c], forest.points[d]);
            if segments_intersect(pa, pb, pc, pd, eps) {
                r.non_crossing = false;
                r.failures.push(format!("edges {i} and {j} cross"));
            }
        }
    }

    if r.acyclic {
        for e in 0..ne {
            let mut uf = UnionFind::new(n);
            for (f, &(a, b)) in forest.edges.iter().enumerate() {
                if f != e {
                    uf.union(a, b);
                }
            }
            let (a, b) = forest.edges[e];
            let (ra, rb) = (uf.find(a), uf.find(b));
            let count = |root: usize, uf: &mut UnionFind| {
                (0..n).filter(|&k| forest.kinds[k] == PointKind::Terminal && uf.find(k) == root).count()
            };
            let (ca, cb) = (count(ra, &mut uf), count(rb, &mut uf));
            if ca % m == 0 && cb % m == 0 {
                r.non_removable = false;
                r.failures.push(format!("edge {e} can be removed: sides hold {ca} and {cb} terminals"));
            }
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::steiner::steiner_tree;
    use num_complex::Complex64;

    fn c(x: f64, y: f64) -> Complex64 {
        Complex64::new(x, y)
    }

    #[test]
    fn optimal_tree_passes() {
        let sq = [c(0.0, 0.0), c(1.0, 0.0), c(1.0, 1.0), c(0.0, 1.0)];
        let t = steiner_tree(&sq).unwrap();
        let report = validate_forest(&t, &sq, 4);
        assert!(report.is_ok(), "{:?}", report.failures);
    }

    #[test]
    fn right_angle_junction_fails() {
        let pts = [c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0)];
        let mut f = SteinerForest::from_tree(&pts, &[0, 1, 2], &[c(0.0, 0.0)], &[(0, 3), (1, 3), (2, 3)]);
        f.labels[3] = None;
        let report = validate_forest(&f, &pts, 3);
        assert!(!report.angles_ok);
        assert!(report.block_counts_ok);
    }

    #[test]
    fn wrong_block_counts_fail() {
        let a = [c(0.0, 0.0), c(1.0, 0.0)];
        let b = [c(0.0, 2.0), c(1.0, 2.0), c(2.0, 2.0), c(3.0, 2.0)];
        let mut f = SteinerForest::from_tree(&a, &[0, 1], &[], &[(0, 1)]);
        f.merge(&SteinerForest::from_tree(&b, &[2, 3, 4, 5], &[], &[(0, 1), (1, 2), (2, 3)]));
        let all: Vec<Complex64> = a.iter().chain(&b).copied().collect();
        let report = validate_forest(&f, &all, 3);
        assert!(!report.block_counts_ok);
    }

    #[test]
    fn removable_segment_is_reported() {
        // Four collinear vortices joined by a path, m = 2: the middle edge is removable.
        let pts = [c(0.0, 0.0), c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0)];
        let f = SteinerForest::from_tree(&pts, &[0, 1, 2, 3], &[], &[(0, 1), (1, 2), (2, 3)]);
        let report = validate_forest(&f, &pts, 2);
        assert!(!report.non_removable);
    }

    #[test]
    fn crossing_edges_are_reported() {
        let pts = [c(0.0, 0.0), c(1.0, 1.0), c(0.0, 1.0), c(1.0, 0.0)];
        let f = SteinerForest::from_tree(&pts, &[0, 1, 2, 3], &[], &[(0, 1), (2, 3)]);
        let report = validate_forest(&f, &pts, 2);
        assert!(!report.non_crossing);
    }
}

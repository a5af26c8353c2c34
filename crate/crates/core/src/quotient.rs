//! The quotient `C / G_m`, its cone embedding, discrete windings and the
//! m-th root lifting of phase fields on lattice regions.

use std::collections::VecDeque;

use num_complex::Complex;
use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuotientError {
    #[error("modulus m must be at least 2, got {0}")]
    InvalidModulus(u32),
    #[error("corner {corner} has modulus below tolerance; winding undefined")]
    ZeroCorner { corner: usize },
    #[error("winding residual {residual} too far from an integer")]
    WindingResidual { residual: f64 },
    #[error("field cannot be lifted: nonzero winding or monodromy near node {node}")]
    NonzeroWinding { node: usize },
    #[error("field vanishes at node {node}; m-th root undefined")]
    ZeroValue { node: usize },
}

/// The cyclic group `G_m` of m-th roots of unity together with the maps
/// `p(z) = z^m / |z|^{m-1}` and `P(z) = (p(z), |z| sqrt(m^2-1)) / m`.
#[derive(Debug, Clone)]
pub struct ModulusParams<T: Real> {
    m: u32,
    roots: Vec<Complex<T>>,
}

/// A point `(xy, t)` of the round cone `N` in `R^3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConePoint<T: Real> {
    pub xy: Complex<T>,
    pub t: T,
}

impl<T: Real> ConePoint<T> {
    pub fn norm(&self) -> T {
        (self.xy.norm_sqr() + self.t * self.t).sqrt()
    }

    pub fn distance(&self, other: &Self) -> T {
        let dt = self.t - other.t;
        ((self.xy - other.xy).norm_sqr() + dt * dt).sqrt()
    }

    /// Deviation from the cone equation `t = |xy| sqrt(m^2 - 1)`.
    pub fn cone_defect(&self, m: u32) -> T {
        let mf = T::from_u32(m).unwrap();
        (self.t - self.xy.norm() * (mf * mf - T::one()).sqrt()).abs()
    }
}

impl<T: Real> ModulusParams<T> {
    pub fn new(m: u32) -> Result<Self, QuotientError> {
        if m < 2 {
            return Err(QuotientError::InvalidModulus(m));
        }
        let step = T::TAU() / T::from_u32(m).unwrap();
        let roots = (0..m)
            .map(|k| {
                if k == 0 {
                    Complex::new(T::one(), T::zero())
                } else {
                    Complex::from_polar(T::one(), step * T::from_u32(k).unwrap())
                }
            })
            .collect();
        Ok(Self { m, roots })
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn m_real(&self) -> T {
        T::from_u32(self.m).unwrap()
    }

    /// The generator `a = e^{2 pi i / m}`.
    pub fn a(&self) -> Complex<T> {
        self.roots[1]
    }

    /// `a^k`, with `k` taken modulo `m`.
    pub fn root(&self, k: i64) -> Complex<T> {
        self.roots[k.rem_euclid(self.m as i64) as usize]
    }

    pub fn roots(&self) -> &[Complex<T>] {
        &self.roots
    }

    /// `p(z) = z^m / |z|^{m-1}`, with `p(0) = 0`. Preserves the modulus.
    pub fn project_p(&self, z: Complex<T>) -> Complex<T> {
        let r = z.norm();
        if r == T::zero() {
            return Complex::new(T::zero(), T::zero());
        }
        let theta = z.im.atan2(z.re) * self.m_real();
        Complex::from_polar(r, theta)
    }

    /// The isometric cone embedding `P`.
    pub fn project_cone(&self, z: Complex<T>) -> ConePoint<T> {
        let mf = self.m_real();
        let p = self.project_p(z);
        ConePoint {
            xy: p / mf,
            t: z.norm() * (mf * mf - T::one()).sqrt() / mf,
        }
    }

    /// `min_k |z1 - a^k z2|`.
    pub fn quotient_distance(&self, z1: Complex<T>, z2: Complex<T>) -> T {
        let k = self.nearest_group_element(z1, z2);
        (z1 - self.roots[k] * z2).norm()
    }

    /// The `k` minimizing `|z1 - a^k z2|`; ties go to the smallest index.
    pub fn nearest_group_element(&self, z1: Complex<T>, z2: Complex<T>) -> usize {
        let mut best = 0;
        let mut best_d = (z1 - z2).norm_sqr();
        for (k, r) in self.roots.iter().enumerate().skip(1) {
            let d = (z1 - *r * z2).norm_sqr();
            if d < best_d {
                best = k;
                best_d = d;
            }
        }
        best
    }
}

/// Principal branch of `arg(b / a)`, in `(-pi, pi]`.
pub fn phase_diff<T: Real>(a: Complex<T>, b: Complex<T>) -> T {
    let w = b * a.conj();
    w.im.atan2(w.re)
}

/// Winding number of a closed loop of nonzero values, visited in order.
///
/// The sum of principal phase increments is rounded to an integer multiple of
/// `2 pi`; a residual above `0.25` turns is reported as an error.
pub fn loop_winding<T: Real>(values: &[Complex<T>]) -> Result<i32, QuotientError> {
    let n = values.len();
    let mut total = 0.0f64;
    for i in 0..n {
        let d = phase_diff(values[i], values[(i + 1) % n]);
        total += d.to_f64().unwrap();
    }
    let turns = total / std::f64::consts::TAU;
    let rounded = turns.round();
    let residual = (turns - rounded).abs();
    if residual >= 0.25 {
        return Err(QuotientError::WindingResidual { residual });
    }
    Ok(rounded as i32)
}

/// Discrete degree of a field around one lattice cell, corners in
/// counter-clockwise order.
pub fn plaquette_winding<T: Real>(v: [Complex<T>; 4], tol: T) -> Result<i32, QuotientError> {
    for (corner, z) in v.iter().enumerate() {
        if z.norm() < tol {
            return Err(QuotientError::ZeroCorner { corner });
        }
    }
    loop_winding(&v)
}

/// Connectivity used by [`lift_mth_root`]: an undirected graph on node
/// indices together with the elementary 4-cycles (cells) fully inside the
/// region.
#[derive(Debug, Clone, Default)]
pub struct LiftGraph {
    pub adjacency: Vec<Vec<usize>>,
    pub members: Vec<bool>,
    pub plaquettes: Vec<[usize; 4]>,
}

impl LiftGraph {
    pub fn new(n: usize) -> Self {
        Self {
            adjacency: vec![Vec::new(); n],
            members: vec![false; n],
            plaquettes: Vec::new(),
        }
    }

    pub fn add_edge(&mut self, i: usize, j: usize) {
        self.members[i] = true;
        self.members[j] = true;
        self.adjacency[i].push(j);
        self.adjacency[j].push(i);
    }

    pub fn add_node(&mut self, i: usize) {
        self.members[i] = true;
    }
}

/// Lifts `v` to a field `u` with `p(u) = v` that is continuous along every
/// edge of `graph`.
///
/// Each connected component is seeded at its lowest node index with
/// `arg(u) = arg(v)/m` and explored breadth first in index order, so the
/// branch choice is reproducible. Fails with `NonzeroWinding` if a plaquette
/// of the region carries nonzero winding, or if a non-tree edge cannot be made
/// continuous (nontrivial monodromy). Entries outside the region are `None`.
pub fn lift_mth_root<T: Real>(
    v: &[Complex<T>],
    graph: &LiftGraph,
    params: &ModulusParams<T>,
    tol: T,
) -> Result<Vec<Option<Complex<T>>>, QuotientError> {
    let n = v.len();
    for (node, z) in v.iter().enumerate() {
        if graph.members[node] && z.norm() < tol {
            return Err(QuotientError::ZeroValue { node });
        }
    }
    for cell in &graph.plaquettes {
        let w = plaquette_winding([v[cell[0]], v[cell[1]], v[cell[2]], v[cell[3]]], tol)?;
        if w != 0 {
            return Err(QuotientError::NonzeroWinding { node: cell[0] });
        }
    }

    let mf = params.m_real();
    let mut u: Vec<Option<Complex<T>>> = vec![None; n];
    let mut queue = VecDeque::new();
    let mut nbrs = Vec::new();
    for seed in 0..n {
        if !graph.members[seed] || u[seed].is_some() {
            continue;
        }
        let z = v[seed];
        u[seed] = Some(Complex::from_polar(z.norm(), z.im.atan2(z.re) / mf));
        queue.push_back(seed);
        while let Some(i) = queue.pop_front() {
            let ui = u[i].unwrap();
            nbrs.clear();
            nbrs.extend_from_slice(&graph.adjacency[i]);
            nbrs.sort_unstable();
            for &j in &nbrs {
                if u[j].is_some() {
                    continue;
                }
                // arg(u_j) = arg(u_i) + principal(arg v_j - arg v_i) / m
                let step = phase_diff(v[i], v[j]) / mf;
                let phase = ui.im.atan2(ui.re) + step;
                u[j] = Some(Complex::from_polar(v[j].norm(), phase));
                queue.push_back(j);
            }
        }
    }

    // Monodromy: every region edge must join values in the same G_m branch.
    let limit = T::PI() / mf;
    for i in 0..n {
        if !graph.members[i] {
            continue;
        }
        let ui = u[i].unwrap();
        for &j in &graph.adjacency[i] {
            let uj = u[j].unwrap();
            if phase_diff(ui, uj).abs() >= limit {
                return Err(QuotientError::NonzeroWinding { node: i });
            }
        }
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn roots_of_unity_are_exact_and_distinct() {
        for m in 2..9 {
            let g = ModulusParams::<f64>::new(m).unwrap();
            let am = g.a().powu(m);
            assert!((am - c(1.0, 0.0)).norm() < 1e-14);
            for i in 0..m as usize {
                for j in 0..i {
                    assert!((g.roots()[i] - g.roots()[j]).norm() > 1e-3);
                }
            }
        }
        assert_eq!(
            ModulusParams::<f64>::new(1).unwrap_err(),
            QuotientError::InvalidModulus(1)
        );
    }

    #[test]
    fn project_p_examples() {
        let g2 = ModulusParams::<f64>::new(2).unwrap();
        assert_eq!(g2.project_p(c(0.0, 0.0)), c(0.0, 0.0));
        assert!((g2.project_p(c(0.0, 1.0)) - c(-1.0, 0.0)).norm() < 1e-15);
        let g3 = ModulusParams::<f64>::new(3).unwrap();
        let w = c(0.3, -1.7);
        assert!((g3.project_p(g3.a() * w) - g3.project_p(w)).norm() < 1e-14);
    }

    #[test]
    fn project_cone_examples() {
        let g2 = ModulusParams::<f64>::new(2).unwrap();
        let v = g2.project_cone(c(0.0, 0.0));
        assert_eq!(v.norm(), 0.0);
        let p = g2.project_cone(c(1.0, 0.0));
        assert!((p.xy - c(0.5, 0.0)).norm() < 1e-15);
        assert!((p.t - 3f64.sqrt() / 2.0).abs() < 1e-15);
        let g5 = ModulusParams::<f64>::new(5).unwrap();
        assert!((g5.project_cone(c(3.0, 4.0)).norm() - 5.0).abs() < 1e-12);
        assert!(g5.project_cone(c(3.0, 4.0)).cone_defect(5) < 1e-12);
    }

    #[test]
    fn quotient_distance_examples() {
        let g2 = ModulusParams::<f64>::new(2).unwrap();
        assert!(g2.quotient_distance(c(1.0, 0.0), c(-1.0, 0.0)) < 1e-15);
        // m = 3: |1 + a^k| over k = 0,1,2 is (2, 1, 1).
        let g3 = ModulusParams::<f64>::new(3).unwrap();
        assert!((g3.quotient_distance(c(1.0, 0.0), c(-1.0, 0.0)) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn nearest_group_element_examples() {
        let g2 = ModulusParams::<f64>::new(2).unwrap();
        assert_eq!(g2.nearest_group_element(c(1.0, 0.0), c(-0.9, 0.0)), 1);
        let z = c(0.4, 0.2);
        assert_eq!(g2.nearest_group_element(z, z), 0);
        // m = 4: |1 - i a^k| = |1 - i^{k+1}| vanishes at k = 3.
        let g4 = ModulusParams::<f64>::new(4).unwrap();
        assert_eq!(g4.nearest_group_element(c(1.0, 0.0), c(0.0, 1.0)), 3);
        // Tie: 0 and a are equidistant from a^{1/2}.
        let mid = Complex64::from_polar(1.0, std::f64::consts::PI / 2.0);
        let g2b = ModulusParams::<f64>::new(2).unwrap();
        assert_eq!(g2b.nearest_group_element(c(0.0, 0.0), mid), 0);
    }

    fn corners_around_origin<F: Fn(Complex64) -> Complex64>(f: F) -> [Complex64; 4] {
        let pts = [c(-0.5, -0.5), c(0.5, -0.5), c(0.5, 0.5), c(-0.5, 0.5)];
        pts.map(f)
    }

    #[test]
    fn plaquette_winding_examples() {
        let unit = |z: Complex64| z / z.norm();
        assert_eq!(plaquette_winding(corners_around_origin(unit), 1e-12).unwrap(), 1);
        assert_eq!(plaquette_winding([c(1.0, 0.0); 4], 1e-12).unwrap(), 0);
        // (x/|x|)^3 at the four diagonal corners: exact increments 3 pi/2 each
        // wrap to -pi/2, so a single cell cannot see degree 3. Sampling the
        // loop finer recovers it.
        let cube = |z: Complex64| (z / z.norm()).powu(3);
        let loop12: Vec<Complex64> = (0..12)
            .map(|k| cube(Complex64::from_polar(1.0, 0.1 + k as f64 * std::f64::consts::TAU / 12.0)))
            .collect();
        assert_eq!(loop_winding(&loop12).unwrap(), 3);
        let err = plaquette_winding([c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)], 1e-12);
        assert_eq!(err.unwrap_err(), QuotientError::ZeroCorner { corner: 1 });
    }

    /// Builds an `n x n` lattice graph with all cells as plaquettes.
    fn lattice(n: usize, keep: impl Fn(usize, usize) -> bool) -> LiftGraph {
        let idx = |i: usize, j: usize| j * n + i;
        let mut g = LiftGraph::new(n * n);
        for j in 0..n {
            for i in 0..n {
                if !keep(i, j) {
                    continue;
                }
                g.add_node(idx(i, j));
                if i + 1 < n && keep(i + 1, j) {
                    g.add_edge(idx(i, j), idx(i + 1, j));
                }
                if j + 1 < n && keep(i, j + 1) {
                    g.add_edge(idx(i, j), idx(i, j + 1));
                }
                if i + 1 < n && j + 1 < n && keep(i + 1, j) && keep(i, j + 1) && keep(i + 1, j + 1) {
                    g.plaquettes.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)]);
                }
            }
        }
        g
    }

    #[test]
    fn lift_constant_field() {
        let g = lattice(6, |_, _| true);
        let params = ModulusParams::<f64>::new(3).unwrap();
        let v = vec![c(1.0, 0.0); 36];
        let u = lift_mth_root(&v, &g, &params, 1e-12).unwrap();
        for z in u.iter().flatten() {
            assert!((z - c(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn lift_smooth_phase() {
        let n = 10;
        let g = lattice(n, |_, _| true);
        let params = ModulusParams::<f64>::new(4).unwrap();
        let theta = |i: usize, j: usize| 0.1 * (i as f64) - 0.05 * (j as f64) + 0.02 * (i * j) as f64;
        let v: Vec<Complex64> = (0..n * n).map(|k| Complex64::from_polar(1.0, theta(k % n, k / n))).collect();
        let u = lift_mth_root(&v, &g, &params, 1e-12).unwrap();
        for k in 0..n * n {
            let expected = Complex64::from_polar(1.0, theta(k % n, k / n) / 4.0);
            assert!((u[k].unwrap() - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn lift_on_cut_annulus_sector() {
        // v = x/|x| sampled on a lattice around the origin with the ray
        // {y = 0.5 offset, x < 0} removed from the connectivity.
        let n = 12;
        let h = 0.2;
        let pos = |i: usize, j: usize| c((i as f64 - 5.5) * h, (j as f64 - 5.5) * h);
        let mut g = LiftGraph::new(n * n);
        let idx = |i: usize, j: usize| j * n + i;
        for j in 0..n {
            for i in 0..n {
                g.add_node(idx(i, j));
                if i + 1 < n {
                    g.add_edge(idx(i, j), idx(i + 1, j));
                }
                // vertical edges crossing the negative real axis are cut
                if j + 1 < n && !(j == 5 && pos(i, j).re < 0.0) {
                    g.add_edge(idx(i, j), idx(i, j + 1));
                }
            }
        }
        let v: Vec<Complex64> = (0..n * n).map(|k| {
            let z = pos(k % n, k / n);
            z / z.norm()
        }).collect();
        let params = ModulusParams::<f64>::new(2).unwrap();
        let u = lift_mth_root(&v, &g, &params, 1e-12).unwrap();
        for k in 0..n * n {
            assert!((params.project_p(u[k].unwrap()) - v[k]).norm() < 1e-10);
        }
        // The full lattice has the vortex cell as a plaquette and must fail.
        let full = lattice(n, |_, _| true);
        assert!(matches!(
            lift_mth_root(&v, &full, &params, 1e-12),
            Err(QuotientError::NonzeroWinding { .. })
        ));
    }

    #[test]
    fn winding_additivity_on_2x2_block() {
        let f = |z: Complex64| {
            let a = z - c(0.1, 0.05);
            let b = z - c(-0.3, 0.35);
            (a / a.norm()) * (b / b.norm()).conj() * Complex64::from_polar(1.0, z.re * 2.0)
        };
        let h = 0.5;
        let p = |i: i32, j: i32| c(i as f64 * h - 0.45, j as f64 * h - 0.45);
        let mut sum = 0;
        for j in 0..2 {
            for i in 0..2 {
                let w = plaquette_winding(
                    [f(p(i, j)), f(p(i + 1, j)), f(p(i + 1, j + 1)), f(p(i, j + 1))],
                    1e-12,
                )
                .unwrap();
                sum += w;
            }
        }
        let outer: Vec<Complex64> = [(0, 0), (1, 0), (2, 0), (2, 1), (2, 2), (1, 2), (0, 2), (0, 1)]
            .iter()
            .map(|&(i, j)| f(p(i, j)))
            .collect();
        assert_eq!(loop_winding(&outer).unwrap(), sum);
    }

    #[test]
    fn winding_of_p_is_m_times_turning_of_u() {
        // u = (x/|x|)^k sampled on a fine loop; p(u) then winds m*k times.
        for m in 2..5u32 {
            let params = ModulusParams::<f64>::new(m).unwrap();
            for k in 1..3u32 {
                let loop_u: Vec<Complex64> = (0..97)
                    .map(|s| Complex64::from_polar(1.0, k as f64 * s as f64 * std::f64::consts::TAU / 97.0))
                    .collect();
                let loop_v: Vec<Complex64> = loop_u.iter().map(|&z| params.project_p(z)).collect();
                assert_eq!(loop_winding(&loop_u).unwrap(), k as i32);
                assert_eq!(loop_winding(&loop_v).unwrap(), (m * k) as i32);
            }
        }
    }

    fn arb_c() -> impl Strategy<Value = Complex64> {
        (-3.0f64..3.0, -3.0f64..3.0).prop_map(|(a, b)| c(a, b))
    }

    proptest! {
        #[test]
        fn cone_preserves_modulus_and_identifies_orbits(z in arb_c(), w in arb_c(), m in 2u32..7, j in 0i64..7) {
            let g = ModulusParams::<f64>::new(m).unwrap();
            prop_assert!((g.project_cone(z).norm() - z.norm()).abs() < 1e-12);
            prop_assert!((g.project_p(z).norm() - z.norm()).abs() < 1e-12);
            let orbit = g.root(j) * z;
            prop_assert!(g.quotient_distance(z, orbit) < 1e-12);
            prop_assert!(g.project_cone(z).distance(&g.project_cone(orbit)) < 1e-12);
            let d = g.quotient_distance(z, w);
            prop_assert!((d - g.quotient_distance(w, z)).abs() < 1e-12);
            let same_class = g.project_cone(z).distance(&g.project_cone(w)) < 1e-10;
            prop_assert_eq!(d < 1e-10, same_class);
        }

        #[test]
        fn lifted_fields_are_fixed_by_p_then_lift(seed in 0u64..1000, m in 2u32..6) {
            let n = 7;
            let g = lattice(n, |_, _| true);
            let params = ModulusParams::<f64>::new(m).unwrap();
            let v: Vec<Complex64> = (0..n * n)
                .map(|k| {
                    let (i, j) = ((k % n) as f64, (k / n) as f64);
                    Complex64::from_polar(1.0 + 0.1 * i, 0.15 * i + 0.1 * j + seed as f64 * 0.01)
                })
                .collect();
            let u: Vec<Complex64> = lift_mth_root(&v, &g, &params, 1e-12).unwrap().into_iter().map(|z| z.unwrap()).collect();
            let pu: Vec<Complex64> = u.iter().map(|&z| params.project_p(z)).collect();
            for k in 0..n * n {
                prop_assert!((pu[k] - v[k]).norm() < 1e-10);
            }
            let again: Vec<Complex64> = lift_mth_root(&pu, &g, &params, 1e-12).unwrap().into_iter().map(|z| z.unwrap()).collect();
            for k in 0..n * n {
                prop_assert!((again[k] - u[k]).norm() < 1e-10);
            }
        }
    }
}

use num_complex::Complex64;
use thiserror::Error;

use super::SteinerForest;
use crate::domain::{DomainError, DomainSpec, Grid, NodeKind};
use crate::limit::{canonical_map, LimitError, VortexConfig};
use crate::quotient::{lift_mth_root, LiftGraph, ModulusParams, QuotientError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CompetitorError {
    #[error("grid does not resolve the forest: {0}")]
    Resolution(String),
    #[error("a region sees fractional winding near node {node}")]
    NonzeroWinding { node: usize },
    #[error(transparent)]
    Limit(#[from] LimitError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Quotient(QuotientError),
}

impl From<QuotientError> for CompetitorError {
    fn from(e: QuotientError) -> Self {
        match e {
            QuotientError::NonzeroWinding { node } => Self::NonzeroWinding { node },
            other => Self::Quotient(other),
        }
    }
}

/// Lattice field `u` with `p(u) = v_mu` that jumps by a root of unity across
/// the forest; `labels[e]` is the group index `k` minimizing
/// `|u_i - a^k u_j|` on edge `e = (i, j)`.
#[derive(Debug, Clone)]
pub struct CompetitorField {
    pub grid: Grid,
    pub u: Vec<Complex64>,
    pub labels: Vec<u32>,
    /// Canonical map values `v_mu` at the nodes.
    pub v: Vec<Complex64>,
    /// Edges crossed by a forest segment.
    pub cut: Vec<bool>,
}

fn side(a: Complex64, b: Complex64, p: Complex64) -> bool {
    let e = b - a;
    let q = p - a;
    e.re * q.im - e.im * q.re >= 0.0
}

/// True if the grid edge `pq` crosses the forest segment `ab`; zero
/// orientations count as positive.
fn crosses(p: Complex64, q: Complex64, a: Complex64, b: Complex64) -> bool {
    if side(a, b, p) == side(a, b, q) {
        return false;
    }
    let d = q - p;
    let e = b - a;
    let den = d.re * e.im - d.im * e.re;
    if den == 0.0 {
        return false;
    }
    let w = a - p;
    let t = (w.re * d.im - w.im * d.re) / den;
    (0.0..=1.0).contains(&t)
}

fn point_segment_distance(p: Complex64, a: Complex64, b: Complex64) -> f64 {
    let e = b - a;
    let len2 = e.norm_sqr();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = (((p - a) * e.conj()).re / len2).clamp(0.0, 1.0);
    (p - (a + e * t)).norm()
}

/// Smallest geometric scale of the forest: edge lengths, distances between
/// non-adjacent edges and distances from forest points to the boundary.
fn min_feature_size(forest: &SteinerForest<f64>, spec: &DomainSpec) -> f64 {
    let mut best = f64::INFINITY;
    for &(a, b) in &forest.edges {
        best = best.min((forest.points[a] - forest.points[b]).norm());
    }
    for (i, &(a, b)) in forest.edges.iter().enumerate() {
        for &(c, d) in &forest.edges[..i] {
            if a == c || a == d || b == c || b == d {
                continue;
            }
            let (pa, pb, pc, pd) = (forest.points[a], forest.points[b], forest.points[c], forest.points[d]);
            let gap = point_segment_distance(pa, pc, pd)
                .min(point_segment_distance(pb, pc, pd))
                .min(point_segment_distance(pc, pa, pb))
                .min(point_segment_distance(pd, pa, pb));
            best = best.min(gap);
        }
    }
    for &p in &forest.points {
        best = best.min(spec.signed_distance(p));
    }
    best
}

/// Grid realization of the competitor whose jump set is the forest.
///
/// The canonical map `v_mu` is sampled at the nodes, lattice edges crossing
/// a forest segment are removed and `m`-th roots are lifted on what remains.
/// The lift is rotated by a root of unity so that it matches `g` at the first
/// boundary node; boundary nodes then carry `g` exactly.
pub fn construct_competitor_field(
    forest: &SteinerForest<f64>,
    mu: &VortexConfig,
    spec: &DomainSpec,
) -> Result<CompetitorField, CompetitorError> {
    let feature = min_feature_size(forest, spec);
    if spec.h >= 0.5 * feature {
        return Err(CompetitorError::Resolution(format!(
            "h = {} is not below half the smallest feature {feature:.4}",
            spec.h
        )));
    }
    let params = ModulusParams::<f64>::new(mu.m).map_err(CompetitorError::Quotient)?;
    let map = canonical_map(mu, spec)?;
    let n = map.grid.len();
    let v: Vec<Complex64> = (0..n)
        .map(|k| if map.grid.is_active(k) { map.node_value(k) } else { Complex64::new(0.0, 0.0) })
        .collect();
    let grid = map.grid;
    for k in 0..n {
        if grid.is_active(k) && mu.points.iter().any(|&p| (grid.pos[k] - p).norm() < 0.25 * spec.h) {
            return Err(CompetitorError::Resolution(format!("node {k} lies within h/4 of a vortex")));
        }
    }
    let mut cut = vec![false; grid.edges.len()];
    for (e, &[i, j]) in grid.edges.iter().enumerate() {
        let (p, q) = (grid.pos[i], grid.pos[j]);
        if forest
            .edges
            .iter()
            .any(|&(a, b)| crosses(p, q, forest.points[a], forest.points[b]))
        {
            if grid.kind[i] == NodeKind::Boundary || grid.kind[j] == NodeKind::Boundary {
                return Err(CompetitorError::Resolution(format!("cut edge {e} touches the boundary")));
            }
            cut[e] = true;
        }
    }

    let mut graph = LiftGraph::new(n);
    for k in 0..n {
        if grid.is_active(k) {
            graph.add_node(k);
        }
    }
    for (e, &[i, j]) in grid.edges.iter().enumerate() {
        if !cut[e] {
            graph.add_edge(i, j);
        }
    }
    for cell in &grid.cells {
        if cell.edges.iter().all(|&e| !cut[e]) {
            graph.plaquettes.push(cell.corners);
        }
    }
    let lifted = lift_mth_root(&v, &graph, &params, 1e-12)?;
    let mut u: Vec<Complex64> = lifted.into_iter().map(|z| z.unwrap_or_default()).collect();

    if let Some(&b) = grid.boundary_loop.first() {
        let k = params.nearest_group_element(grid.g[b], u[b]);
        let rot = params.root(k as i64);
        for z in u.iter_mut() {
            *z *= rot;
        }
    }
    for &b in &grid.boundary_loop {
        u[b] = grid.g[b];
    }

    let labels = grid
        .edges
        .iter()
        .map(|&[i, j]| params.nearest_group_element(u[i], u[j]) as u32)
        .collect();
    Ok(CompetitorField { grid, u, labels, v, cut })
}

impl CompetitorField {
    /// Dual length of the labelled edges, `h` per edge with a nonzero label.
    pub fn jump_length(&self) -> f64 {
        self.labels.iter().filter(|&&k| k != 0).count() as f64 * self.grid.h
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::steiner::{lambda_mu, LambdaOptions};

    fn c(x: f64, y: f64) -> Complex64 {
        Complex64::new(x, y)
    }

    #[test]
    fn segment_edges_carry_the_nontrivial_label() {
        let spec = DomainSpec::disk(0.02, 1);
        let pts = vec![c(-0.305, 0.013), c(0.305, 0.013)];
        let mu = VortexConfig::new(pts.clone(), 2, 1);
        let forest = lambda_mu(&pts, 2, LambdaOptions::default()).unwrap().forest;
        let comp = construct_competitor_field(&forest, &mu, &spec).unwrap();
        let params = ModulusParams::<f64>::new(2).unwrap();
        for (e, &k) in comp.labels.iter().enumerate() {
            assert_eq!(k != 0, comp.cut[e], "edge {e}");
        }
        for &k in &comp.grid.interior {
            assert!((params.project_p(comp.u[k]) - comp.v[k]).norm() < 1e-10);
        }
        let n_cut = comp.cut.iter().filter(|&&c| c).count();
        assert_eq!(n_cut, 31);
        assert!((comp.jump_length() - 0.61).abs() <= 2.0 * spec.h);
    }

    #[test]
    fn no_forest_means_fractional_winding() {
        let spec = DomainSpec::disk(0.02, 1);
        let pts = vec![c(-0.3, 0.013), c(0.3, 0.013)];
        let mu = VortexConfig::new(pts, 2, 1);
        let empty = SteinerForest::default();
        assert!(matches!(
            construct_competitor_field(&empty, &mu, &spec),
            Err(CompetitorError::NonzeroWinding { .. })
        ));
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let spec = DomainSpec::disk(0.05, 1);
        let pts = vec![c(-0.03, 0.0), c(0.03, 0.0)];
        let mu = VortexConfig::new(pts.clone(), 2, 1);
        let forest = lambda_mu(&pts, 2, LambdaOptions::default()).unwrap().forest;
        assert!(matches!(
            construct_competitor_field(&forest, &mu, &spec),
            Err(CompetitorError::Resolution(_))
        ));
    }
}

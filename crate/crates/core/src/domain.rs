//! Domains, boundary data of prescribed degree, and the square lattice used
//! by every solver.

use std::f64::consts::TAU;

use num_complex::Complex64;
use thiserror::Error;

use crate::quotient::loop_winding;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("grid has only {interior} interior nodes (need at least 100)")]
    DegenerateDomain { interior: usize },
    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),
    #[error("grid spacing must be positive, got {0}")]
    InvalidSpacing(f64),
    #[error("sampled boundary data winds {found} times, expected {expected}")]
    BoundaryWinding { expected: i32, found: i32 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    UnitDisk,
    /// Strictly convex polygon, vertices counter-clockwise.
    Polygon(Vec<Complex64>),
}

/// Boundary phase `Theta(theta) = d theta + sum_k (a_k cos k theta + b_k sin k theta)`
/// as a function of the polar angle about the domain center.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryMode {
    Canonical,
    Fourier(Vec<(f64, f64)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    pub shape: Shape,
    pub h: f64,
    pub d: u32,
    pub mode: BoundaryMode,
}

fn cross(a: Complex64, b: Complex64) -> f64 {
    a.re * b.im - a.im * b.re
}

impl DomainSpec {
    pub fn disk(h: f64, d: u32) -> Self {
        Self { shape: Shape::UnitDisk, h, d, mode: BoundaryMode::Canonical }
    }

    pub fn polygon(vertices: Vec<Complex64>, h: f64, d: u32) -> Self {
        Self { shape: Shape::Polygon(vertices), h, d, mode: BoundaryMode::Canonical }
    }

    pub fn with_h(&self, h: f64) -> Self {
        Self { h, ..self.clone() }
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(DomainError::InvalidSpacing(self.h));
        }
        if let Shape::Polygon(v) = &self.shape {
            if v.len() < 3 {
                return Err(DomainError::InvalidPolygon(format!("{} vertices", v.len())));
            }
            let n = v.len();
            for i in 0..n {
                let e0 = v[(i + 1) % n] - v[i];
                let e1 = v[(i + 2) % n] - v[(i + 1) % n];
                if cross(e0, e1) <= 1e-12 * e0.norm() * e1.norm() {
                    return Err(DomainError::InvalidPolygon(format!(
                        "not strictly convex counter-clockwise at vertex {}",
                        (i + 1) % n
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn center(&self) -> Complex64 {
        match &self.shape {
            Shape::UnitDisk => Complex64::new(0.0, 0.0),
            Shape::Polygon(v) => v.iter().sum::<Complex64>() / v.len() as f64,
        }
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bounding_box(&self) -> (Complex64, Complex64) {
        match &self.shape {
            Shape::UnitDisk => (Complex64::new(-1.0, -1.0), Complex64::new(1.0, 1.0)),
            Shape::Polygon(v) => {
                let mut lo = v[0];
                let mut hi = v[0];
                for p in v {
                    lo = Complex64::new(lo.re.min(p.re), lo.im.min(p.im));
                    hi = Complex64::new(hi.re.max(p.re), hi.im.max(p.im));
                }
                (lo, hi)
            }
        }
    }

    /// Signed distance to the boundary, positive inside. Exact inside the
    /// domain, a lower bound on the true distance outside.
    pub fn signed_distance(&self, p: Complex64) -> f64 {
        match &self.shape {
            Shape::UnitDisk => 1.0 - p.norm(),
            Shape::Polygon(v) => {
                let n = v.len();
                (0..n)
                    .map(|i| {
                        let e = v[(i + 1) % n] - v[i];
                        cross(e, p - v[i]) / e.norm()
                    })
                    .fold(f64::INFINITY, f64::min)
            }
        }
    }

    pub fn contains(&self, p: Complex64, tol: f64) -> bool {
        self.signed_distance(p) >= -tol
    }

    pub fn perimeter(&self) -> f64 {
        match &self.shape {
            Shape::UnitDisk => TAU,
            Shape::Polygon(v) => {
                let n = v.len();
                (0..n).map(|i| (v[(i + 1) % n] - v[i]).norm()).sum()
            }
        }
    }

    /// Boundary point and unit counter-clockwise tangent at arclength `s`
    /// (taken modulo the perimeter). The disk starts at `(1, 0)`, polygons at
    /// their first vertex.
    pub fn boundary_point(&self, s: f64) -> (Complex64, Complex64) {
        let s = s.rem_euclid(self.perimeter());
        match &self.shape {
            Shape::UnitDisk => {
                let z = Complex64::from_polar(1.0, s);
                (z, z * Complex64::i())
            }
            Shape::Polygon(v) => {
                let n = v.len();
                let mut acc = 0.0;
                for i in 0..n {
                    let e = v[(i + 1) % n] - v[i];
                    let len = e.norm();
                    if s < acc + len || i == n - 1 {
                        let t = ((s - acc) / len).clamp(0.0, 1.0);
                        return (v[i] + e * t, e / len);
                    }
                    acc += len;
                }
                unreachable!()
            }
        }
    }

    /// Outward unit normal at arclength `s`.
    pub fn normal(&self, s: f64) -> Complex64 {
        let (_, tau) = self.boundary_point(s);
        -Complex64::i() * tau
    }

    /// Polar angle of `p` about the domain center.
    pub fn center_angle(&self, p: Complex64) -> f64 {
        let q = p - self.center();
        q.im.atan2(q.re)
    }

    /// Boundary phase `Theta` at center angle `theta`.
    pub fn phase_at_angle(&self, theta: f64) -> f64 {
        let mut phase = self.d as f64 * theta;
        if let BoundaryMode::Fourier(coeffs) = &self.mode {
            for (k, (a, b)) in coeffs.iter().enumerate() {
                let kf = (k + 1) as f64;
                phase += a * (kf * theta).cos() + b * (kf * theta).sin();
            }
        }
        phase
    }

    /// `dTheta/dtheta`.
    pub fn phase_derivative(&self, theta: f64) -> f64 {
        let mut dphase = self.d as f64;
        if let BoundaryMode::Fourier(coeffs) = &self.mode {
            for (k, (a, b)) in coeffs.iter().enumerate() {
                let kf = (k + 1) as f64;
                dphase += kf * (-a * (kf * theta).sin() + b * (kf * theta).cos());
            }
        }
        dphase
    }

    /// `g` at a point (on or near the boundary), through its center angle.
    pub fn g_at(&self, p: Complex64) -> Complex64 {
        Complex64::from_polar(1.0, self.phase_at_angle(self.center_angle(p)))
    }

    pub fn sample_boundary_g(&self, s: f64) -> Complex64 {
        let (p, _) = self.boundary_point(s);
        self.g_at(p)
    }

    /// `g ∧ ∂_τ g = d(arg g)/ds` at arclength `s`.
    pub fn g_wedge_dg(&self, s: f64) -> f64 {
        let (p, tau) = self.boundary_point(s);
        let q = p - self.center();
        let dtheta_ds = cross(q, tau) / q.norm_sqr();
        self.phase_derivative(self.center_angle(p)) * dtheta_ds
    }

    /// Arclength coordinate of the boundary point nearest to `p`.
    pub fn arclength_of(&self, p: Complex64) -> f64 {
        match &self.shape {
            Shape::UnitDisk => p.im.atan2(p.re).rem_euclid(TAU),
            Shape::Polygon(v) => {
                let n = v.len();
                let mut acc = 0.0;
                let mut best = (f64::INFINITY, 0.0);
                for i in 0..n {
                    let e = v[(i + 1) % n] - v[i];
                    let len = e.norm();
                    let q = p - v[i];
                    let t = ((q.re * e.re + q.im * e.im) / (len * len)).clamp(0.0, 1.0);
                    let dist = (q - e * t).norm();
                    if dist < best.0 {
                        best = (dist, acc + t * len);
                    }
                    acc += len;
                }
                best.1.rem_euclid(acc)
            }
        }
    }

    /// Boundary point on the ray from the center at angle `theta`.
    pub fn boundary_point_at_angle(&self, theta: f64) -> Complex64 {
        let dir = Complex64::from_polar(1.0, theta);
        match &self.shape {
            Shape::UnitDisk => dir,
            Shape::Polygon(v) => {
                let c = self.center();
                let n = v.len();
                let mut best = f64::INFINITY;
                for i in 0..n {
                    let a = v[i] - c;
                    let e = v[(i + 1) % n] - v[i];
                    let den = cross(dir, e);
                    if den.abs() < 1e-300 {
                        continue;
                    }
                    let t = cross(a, e) / den;
                    let s = cross(a, dir) / den;
                    if t > 0.0 && (-1e-12..=1.0 + 1e-12).contains(&s) {
                        best = best.min(t);
                    }
                }
                c + dir * best
            }
        }
    }

    /// Parameter interval `[t0, t1]` of `a + t (b - a)`, `t in [0, 1]`, lying
    /// inside the closed domain.
    pub fn clip_segment(&self, a: Complex64, b: Complex64) -> Option<(f64, f64)> {
        let dir = b - a;
        let (mut t0, mut t1) = (0.0f64, 1.0f64);
        match &self.shape {
            Shape::UnitDisk => {
                let qa = dir.norm_sqr();
                let qb = 2.0 * (a.re * dir.re + a.im * dir.im);
                let qc = a.norm_sqr() - 1.0;
                let disc = qb * qb - 4.0 * qa * qc;
                if disc <= 0.0 {
                    return None;
                }
                let sq = disc.sqrt();
                t0 = t0.max((-qb - sq) / (2.0 * qa));
                t1 = t1.min((-qb + sq) / (2.0 * qa));
            }
            Shape::Polygon(v) => {
                let n = v.len();
                for i in 0..n {
                    let e = v[(i + 1) % n] - v[i];
                    // inside iff cross(e, p - v_i) >= 0
                    let f0 = cross(e, a - v[i]);
                    let df = cross(e, dir);
                    if df.abs() < 1e-300 {
                        if f0 < 0.0 {
                            return None;
                        }
                        continue;
                    }
                    let t = -f0 / df;
                    if df > 0.0 {
                        t0 = t0.max(t);
                    } else {
                        t1 = t1.min(t);
                    }
                }
            }
        }
        (t1 > t0).then_some((t0, t1))
    }

    /// Winding of `g` sampled at `n` equally spaced arclengths.
    pub fn boundary_winding(&self, n: usize) -> Result<i32, DomainError> {
        let per = self.perimeter();
        let samples: Vec<Complex64> =
            (0..n).map(|k| self.sample_boundary_g(per * k as f64 / n as f64)).collect();
        loop_winding(&samples).map_err(|_| DomainError::BoundaryWinding {
            expected: self.d as i32,
            found: i32::MIN,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Outside,
    Interior,
    Boundary,
}

#[derive(Debug, Clone)]
pub struct Cell {
    /// Corners counter-clockwise from the lower left.
    pub corners: [usize; 4],
    /// Bottom, right, top, left edge indices.
    pub edges: [usize; 4],
    pub center: Complex64,
}

/// Square lattice `{(i h, j h)}` restricted to a domain.
///
/// Nodes inside the closed domain are active; an active node with an outside
/// lattice neighbour is a boundary node and carries the sampled value of `g`.
/// Edges join active neighbours and are oriented towards `+x` or `+y`; cells
/// are lattice squares with four active corners.
#[derive(Debug, Clone)]
pub struct Grid {
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
    pub origin: Complex64,
    pub pos: Vec<Complex64>,
    pub kind: Vec<NodeKind>,
    pub g: Vec<Complex64>,
    pub edges: Vec<[usize; 2]>,
    /// Edge from node `k` to its `+x` neighbour, if any.
    pub right_edge: Vec<Option<usize>>,
    /// Edge from node `k` to its `+y` neighbour, if any.
    pub up_edge: Vec<Option<usize>>,
    pub cells: Vec<Cell>,
    /// Cell whose lower-left corner is node `k`, if any.
    pub cell_at: Vec<Option<usize>>,
    /// Lumped mass `h^2 (#incident cells) / 4`.
    pub weight: Vec<f64>,
    /// Boundary nodes sorted by center angle.
    pub boundary_loop: Vec<usize>,
    pub interior: Vec<usize>,
}

pub fn build_grid(spec: &DomainSpec) -> Result<Grid, DomainError> {
    spec.validate()?;
    let h = spec.h;
    let (lo, hi) = spec.bounding_box();
    let i0 = (lo.re / h).floor() as i64 - 1;
    let j0 = (lo.im / h).floor() as i64 - 1;
    let i1 = (hi.re / h).ceil() as i64 + 1;
    let j1 = (hi.im / h).ceil() as i64 + 1;
    let nx = (i1 - i0 + 1) as usize;
    let ny = (j1 - j0 + 1) as usize;
    let origin = Complex64::new(i0 as f64 * h, j0 as f64 * h);
    let n = nx * ny;
    let tol = 1e-9 * h;

    let pos: Vec<Complex64> = (0..n)
        .map(|k| {
            let (i, j) = ((k % nx) as i64 + i0, (k / nx) as i64 + j0);
            Complex64::new(i as f64 * h, j as f64 * h)
        })
        .collect();
    let inside: Vec<bool> = pos.iter().map(|&p| spec.contains(p, tol)).collect();
    let mut kind = vec![NodeKind::Outside; n];
    for k in 0..n {
        if !inside[k] {
            continue;
        }
        let (i, j) = (k % nx, k / nx);
        let all_in = i > 0 && j > 0 && i + 1 < nx && j + 1 < ny
            && inside[k - 1] && inside[k + 1] && inside[k - nx] && inside[k + nx];
        kind[k] = if all_in { NodeKind::Interior } else { NodeKind::Boundary };
    }
    let interior: Vec<usize> = (0..n).filter(|&k| kind[k] == NodeKind::Interior).collect();
    if interior.len() < 100 {
        return Err(DomainError::DegenerateDomain { interior: interior.len() });
    }

    let mut edges = Vec::new();
    let mut right_edge = vec![None; n];
    let mut up_edge = vec![None; n];
    for k in 0..n {
        if !inside[k] {
            continue;
        }
        if k % nx + 1 < nx && inside[k + 1] {
            right_edge[k] = Some(edges.len());
            edges.push([k, k + 1]);
        }
        if k / nx + 1 < ny && inside[k + nx] {
            up_edge[k] = Some(edges.len());
            edges.push([k, k + nx]);
        }
    }

    let mut cells = Vec::new();
    let mut cell_at = vec![None; n];
    let mut weight = vec![0.0; n];
    for k in 0..n {
        if k % nx + 1 >= nx || k / nx + 1 >= ny {
            continue;
        }
        let corners = [k, k + 1, k + 1 + nx, k + nx];
        if corners.iter().any(|&c| !inside[c]) {
            continue;
        }
        let edge_ids = [
            right_edge[k].unwrap(),
            up_edge[k + 1].unwrap(),
            right_edge[k + nx].unwrap(),
            up_edge[k].unwrap(),
        ];
        for &c in &corners {
            weight[c] += 0.25 * h * h;
        }
        cell_at[k] = Some(cells.len());
        cells.push(Cell {
            corners,
            edges: edge_ids,
            center: pos[k] + Complex64::new(0.5 * h, 0.5 * h),
        });
    }

    let mut boundary_loop: Vec<usize> = (0..n).filter(|&k| kind[k] == NodeKind::Boundary).collect();
    let angles: Vec<f64> = pos.iter().map(|&p| spec.center_angle(p)).collect();
    boundary_loop.sort_by(|&a, &b| angles[a].total_cmp(&angles[b]).then(a.cmp(&b)));

    let mut g = vec![Complex64::new(0.0, 0.0); n];
    for &k in &boundary_loop {
        g[k] = Complex64::from_polar(1.0, spec.phase_at_angle(angles[k]));
    }

    let grid = Grid {
        h,
        nx,
        ny,
        origin,
        pos,
        kind,
        g,
        edges,
        right_edge,
        up_edge,
        cells,
        cell_at,
        weight,
        boundary_loop,
        interior,
    };
    let found = grid.boundary_winding_of(&grid.g).unwrap_or(i32::MIN);
    if found != spec.d as i32 {
        return Err(DomainError::BoundaryWinding { expected: spec.d as i32, found });
    }
    Ok(grid)
}

impl Grid {
    pub fn len(&self) -> usize {
        self.pos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pos.is_empty()
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn is_active(&self, k: usize) -> bool {
        self.kind[k] != NodeKind::Outside
    }

    pub fn active_count(&self) -> usize {
        self.kind.iter().filter(|&&k| k != NodeKind::Outside).count()
    }

    /// Active lattice neighbours of node `k`.
    pub fn neighbors(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        let (i, j) = (k % self.nx, k / self.nx);
        let mut out = [usize::MAX; 4];
        if i + 1 < self.nx {
            out[0] = k + 1;
        }
        if i > 0 {
            out[1] = k - 1;
        }
        if j + 1 < self.ny {
            out[2] = k + self.nx;
        }
        if j > 0 {
            out[3] = k - self.nx;
        }
        out.into_iter().filter(move |&q| q != usize::MAX && self.is_active(q))
    }

    /// Winding of a field along the boundary loop.
    pub fn boundary_winding_of(&self, field: &[Complex64]) -> Option<i32> {
        let vals: Vec<Complex64> = self.boundary_loop.iter().map(|&k| field[k]).collect();
        loop_winding(&vals).ok()
    }

    /// Length of the polyline through the boundary nodes pushed radially onto
    /// the true boundary.
    pub fn boundary_length_estimate(&self, spec: &DomainSpec) -> f64 {
        let pts: Vec<Complex64> = self
            .boundary_loop
            .iter()
            .map(|&k| spec.boundary_point_at_angle(spec.center_angle(self.pos[k])))
            .collect();
        let n = pts.len();
        (0..n).map(|i| (pts[(i + 1) % n] - pts[i]).norm()).sum()
    }

    /// Lattice cell containing `p` as `(lower-left node, fx, fy)` with local
    /// coordinates in `[0, 1]`.
    pub fn locate(&self, p: Complex64) -> Option<(usize, f64, f64)> {
        let q = (p - self.origin) / self.h;
        let i = q.re.floor();
        let j = q.im.floor();
        if i < 0.0 || j < 0.0 || i as usize + 1 >= self.nx || j as usize + 1 >= self.ny {
            return None;
        }
        Some((self.index(i as usize, j as usize), q.re - i, q.im - j))
    }

    /// Bilinear interpolation of a nodal field; `None` if a corner is outside.
    pub fn interpolate<F>(&self, field: &[F], p: Complex64) -> Option<F>
    where
        F: Copy + std::ops::Mul<f64, Output = F> + std::ops::Add<Output = F>,
    {
        let (k, fx, fy) = self.locate(p)?;
        let c = [k, k + 1, k + 1 + self.nx, k + self.nx];
        if c.iter().any(|&q| !self.is_active(q)) {
            return None;
        }
        Some(
            field[c[0]] * ((1.0 - fx) * (1.0 - fy))
                + field[c[1]] * (fx * (1.0 - fy))
                + field[c[2]] * (fx * fy)
                + field[c[3]] * ((1.0 - fx) * fy),
        )
    }

    /// Nearest active node to `p`.
    pub fn nearest_active(&self, p: Complex64) -> Option<usize> {
        let q = (p - self.origin) / self.h;
        let (ci, cj) = (q.re.round() as i64, q.im.round() as i64);
        let mut best: Option<(f64, usize)> = None;
        for r in 0..(self.nx.max(self.ny) as i64) {
            for dj in -r..=r {
                for di in -r..=r {
                    if di.abs().max(dj.abs()) != r {
                        continue;
                    }
                    let (i, j) = (ci + di, cj + dj);
                    if i < 0 || j < 0 || i as usize >= self.nx || j as usize >= self.ny {
                        continue;
                    }
                    let k = self.index(i as usize, j as usize);
                    if self.is_active(k) {
                        let dist = (self.pos[k] - p).norm();
                        if best.is_none_or(|(b, _)| dist < b) {
                            best = Some((dist, k));
                        }
                    }
                }
            }
            if best.is_some() && (r as f64) * self.h > best.unwrap().0 + self.h {
                break;
            }
        }
        best.map(|(_, k)| k)
    }
}

/// Neighbour of a lattice node in one axis direction: another node inside
/// the closed domain, or the point where the grid line leaves the domain at
/// fractional distance `frac` (in units of `h`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Link {
    Node(usize),
    Cut { frac: f64, point: Complex64 },
    Absent,
}

/// Directions in [`lattice_links`]: `+x, -x, +y, -y`.
pub const DIRECTIONS: [(i64, i64); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

/// For every active node, its four axis links.
pub fn lattice_links(spec: &DomainSpec, grid: &Grid) -> Vec<[Link; 4]> {
    let mut out = vec![[Link::Absent; 4]; grid.len()];
    for k in 0..grid.len() {
        if !grid.is_active(k) {
            continue;
        }
        let (i, j) = ((k % grid.nx) as i64, (k / grid.nx) as i64);
        for (dir, &(di, dj)) in DIRECTIONS.iter().enumerate() {
            let (ni, nj) = (i + di, j + dj);
            let inside = ni >= 0 && nj >= 0 && (ni as usize) < grid.nx && (nj as usize) < grid.ny;
            let q = if inside { Some(grid.index(ni as usize, nj as usize)) } else { None };
            if let Some(q) = q.filter(|&q| grid.is_active(q)) {
                out[k][dir] = Link::Node(q);
                continue;
            }
            let a = grid.pos[k];
            let b = a + Complex64::new(di as f64, dj as f64) * grid.h;
            let frac = spec.clip_segment(a, b).map_or(0.0, |(_, t1)| t1.clamp(0.0, 1.0));
            out[k][dir] = Link::Cut { frac, point: a + (b - a) * frac };
        }
    }
    out
}

/// Regular polygon with `n` vertices on the circle of radius `r`, first
/// vertex at angle `phase`.
pub fn regular_polygon(n: usize, r: f64, phase: f64) -> Vec<Complex64> {
    (0..n)
        .map(|k| Complex64::from_polar(r, phase + TAU * k as f64 / n as f64))
        .collect()
}

/// The square `[-a, a]^2`.
pub fn square(a: f64) -> Vec<Complex64> {
    vec![
        Complex64::new(-a, -a),
        Complex64::new(a, -a),
        Complex64::new(a, a),
        Complex64::new(-a, a),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn disk_grid_counts_and_winding() {
        for d in 0..4 {
            let spec = DomainSpec::disk(0.05, d);
            let grid = build_grid(&spec).unwrap();
            let n = grid.interior.len();
            assert!((1000..1300).contains(&n), "interior count {n}");
            assert_eq!(grid.boundary_winding_of(&grid.g), Some(d as i32));
            for &k in &grid.boundary_loop {
                assert!((grid.g[k].norm() - 1.0).abs() < 1e-14);
                assert!(spec.signed_distance(grid.pos[k]) < grid.h + 1e-12);
            }
        }
    }

    #[test]
    fn square_grid_is_19_by_19() {
        let spec = DomainSpec::polygon(square(1.0), 0.1, 1);
        let grid = build_grid(&spec).unwrap();
        assert_eq!(grid.interior.len(), 361);
        assert_eq!(grid.boundary_loop.len(), 80);
        assert_eq!(grid.cells.len(), 400);
        assert_eq!(grid.boundary_winding_of(&grid.g), Some(1));
    }

    #[test]
    fn interior_nodes_have_four_neighbors_and_euler_holds() {
        for spec in [
            DomainSpec::disk(0.07, 1),
            DomainSpec::polygon(regular_polygon(5, 1.3, 0.2), 0.06, 2),
        ] {
            let grid = build_grid(&spec).unwrap();
            for &k in &grid.interior {
                assert_eq!(grid.neighbors(k).count(), 4);
            }
            let v = grid.active_count() as i64;
            let e = grid.edges.len() as i64;
            let f = grid.cells.len() as i64;
            assert_eq!(v - e + f, 1);
        }
    }

    #[test]
    fn too_coarse_grid_is_degenerate() {
        let err = build_grid(&DomainSpec::disk(0.3, 1)).unwrap_err();
        assert!(matches!(err, DomainError::DegenerateDomain { .. }));
    }

    #[test]
    fn rejects_bad_polygons() {
        let cw: Vec<Complex64> = square(1.0).into_iter().rev().collect();
        assert!(DomainSpec::polygon(cw, 0.1, 1).validate().is_err());
        let collinear = vec![
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(2.0, 0.0),
            Complex64::new(1.0, 1.0),
        ];
        assert!(DomainSpec::polygon(collinear, 0.1, 1).validate().is_err());
        assert!(DomainSpec::disk(0.0, 1).validate().is_err());
    }

    #[test]
    fn boundary_g_examples() {
        let d1 = DomainSpec::disk(0.05, 1);
        assert!((d1.sample_boundary_g(0.0) - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((d1.sample_boundary_g(PI) - Complex64::new(-1.0, 0.0)).norm() < 1e-14);
        let d2 = DomainSpec::disk(0.05, 2);
        assert!((d2.sample_boundary_g(PI / 2.0) - Complex64::new(-1.0, 0.0)).norm() < 1e-14);
        let mut four = DomainSpec::polygon(regular_polygon(6, 1.0, 0.0), 0.05, 3);
        four.mode = BoundaryMode::Fourier(vec![(0.3, -0.2), (0.0, 0.4)]);
        assert_eq!(four.boundary_winding(400).unwrap(), 3);
    }

    #[test]
    fn g_wedge_dg_integrates_to_two_pi_d() {
        let mut spec = DomainSpec::polygon(regular_polygon(5, 1.0, 0.3), 0.05, 2);
        spec.mode = BoundaryMode::Fourier(vec![(0.2, 0.1)]);
        let n = 20000;
        let per = spec.perimeter();
        let total: f64 = (0..n).map(|k| spec.g_wedge_dg(per * (k as f64 + 0.5) / n as f64)).sum::<f64>()
            * per / n as f64;
        assert!((total - TAU * 2.0).abs() < 1e-6);
        let disk = DomainSpec::disk(0.05, 3);
        assert!((disk.g_wedge_dg(1.1) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn boundary_length_converges() {
        let coarse = DomainSpec::disk(0.04, 1);
        let fine = coarse.with_h(0.02);
        let lc = build_grid(&coarse).unwrap().boundary_length_estimate(&coarse);
        let lf = build_grid(&fine).unwrap().boundary_length_estimate(&fine);
        assert!((lc - TAU).abs() < 0.04);
        assert!((lf - TAU).abs() <= (lc - TAU).abs() + 1e-12);
    }

    #[test]
    fn clip_segment_against_disk_and_square() {
        let disk = DomainSpec::disk(0.1, 1);
        let (t0, t1) = disk.clip_segment(Complex64::new(-2.0, 0.0), Complex64::new(2.0, 0.0)).unwrap();
        assert!((t0 - 0.25).abs() < 1e-14 && (t1 - 0.75).abs() < 1e-14);
        assert!(disk.clip_segment(Complex64::new(-2.0, 1.5), Complex64::new(2.0, 1.5)).is_none());
        let sq = DomainSpec::polygon(square(1.0), 0.1, 1);
        let (t0, t1) = sq.clip_segment(Complex64::new(0.5, 0.0), Complex64::new(1.5, 0.0)).unwrap();
        assert!(t0.abs() < 1e-14 && (t1 - 0.5).abs() < 1e-14);
    }

    #[test]
    fn interpolation_reproduces_linear_fields() {
        let spec = DomainSpec::disk(0.05, 1);
        let grid = build_grid(&spec).unwrap();
        let f: Vec<f64> = grid.pos.iter().map(|p| 2.0 * p.re - 3.0 * p.im + 1.0).collect();
        let p = Complex64::new(0.123, -0.377);
        let v = grid.interpolate(&f, p).unwrap();
        assert!((v - (2.0 * p.re - 3.0 * p.im + 1.0)).abs() < 1e-12);
        let k = grid.nearest_active(Complex64::new(0.011, 0.0)).unwrap();
        assert!(grid.pos[k].norm() < 1e-12);
    }

    proptest! {
        #[test]
        fn boundary_samples_have_unit_modulus(s in 0.0f64..10.0, d in 0u32..5, a in -0.5f64..0.5, b in -0.5f64..0.5) {
            let mut spec = DomainSpec::polygon(regular_polygon(7, 1.0, 0.1), 0.05, d);
            spec.mode = BoundaryMode::Fourier(vec![(a, b)]);
            prop_assert!((spec.sample_boundary_g(s).norm() - 1.0).abs() < 1e-14);
            prop_assert_eq!(spec.boundary_winding(512).unwrap(), d as i32);
            let (p, _) = spec.boundary_point(s);
            prop_assert!(spec.signed_distance(p).abs() < 1e-12);
        }
    }
}

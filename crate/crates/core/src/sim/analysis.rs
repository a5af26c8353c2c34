use std::collections::VecDeque;

use num_complex::Complex64;

use super::{FieldState, Lattice, SimError};
use crate::quotient::{plaquette_winding, ModulusParams};

/// Corner modulus below which a cell belongs to a vortex core.
pub const CORE_THRESHOLD: f64 = 0.3;

#[derive(Debug, Clone, PartialEq)]
pub struct Vortex {
    pub center: Complex64,
    /// Winding of `p(u)` around the blob.
    pub winding: i32,
    pub cells: Vec<usize>,
}

/// Connected blobs of core cells and cells with nonzero `p(u)` winding.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VortexSet {
    /// Blobs with nonzero winding.
    pub vortices: Vec<Vortex>,
    /// Core blobs with zero net winding.
    pub neutral_cores: Vec<Vortex>,
    pub total_winding: i32,
}

impl VortexSet {
    pub fn count(&self) -> usize {
        self.vortices.len()
    }
}

/// Neighbouring cells sharing an edge with cell `c`.
fn cell_neighbors(lat: &Lattice, c: usize) -> impl Iterator<Item = usize> + '_ {
    let grid = &lat.grid;
    let ll = grid.cells[c].corners[0];
    let (i, j) = ((ll % grid.nx) as i64, (ll / grid.nx) as i64);
    [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)].into_iter().filter_map(move |(di, dj)| {
        let (ni, nj) = (i + di, j + dj);
        if ni < 0 || nj < 0 || ni as usize >= grid.nx || nj as usize >= grid.ny {
            return None;
        }
        grid.cell_at[grid.index(ni as usize, nj as usize)]
    })
}

/// Finds vortices as windings of `p(u)` on lattice cells. Cells with a
/// corner of modulus at most [`CORE_THRESHOLD`] and cells of nonzero
/// winding are merged into blobs; a blob's winding is the sum over its cells,
/// which equals the winding along its outer boundary.
pub fn detect_vortices(state: &FieldState, lat: &Lattice, m: u32) -> VortexSet {
    let params = ModulusParams::<f64>::new(m).expect("valid modulus");
    let grid = &lat.grid;
    let pu: Vec<Complex64> = state.u.iter().map(|&z| params.project_p(z)).collect();
    let nc = grid.cells.len();
    let mut winding = vec![0i32; nc];
    let mut flagged = vec![false; nc];
    let mut mean_mod = vec![0.0; nc];
    for (c, cell) in grid.cells.iter().enumerate() {
        let v = cell.corners.map(|k| pu[k]);
        let w = plaquette_winding(v, 1e-14).unwrap_or(0);
        let min_mod = cell.corners.iter().map(|&k| state.u[k].norm()).fold(f64::INFINITY, f64::min);
        winding[c] = w;
        flagged[c] = w != 0 || min_mod <= CORE_THRESHOLD;
        mean_mod[c] = cell.corners.iter().map(|&k| state.u[k].norm()).sum::<f64>() / 4.0;
    }
    let mut seen = vec![false; nc];
    let mut out = VortexSet::default();
    for start in 0..nc {
        if !flagged[start] || seen[start] {
            continue;
        }
        let mut cells = Vec::new();
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(c) = queue.pop_front() {
            cells.push(c);
            for q in cell_neighbors(lat, c) {
                if flagged[q] && !seen[q] {
                    seen[q] = true;
                    queue.push_back(q);
                }
            }
        }
        let w: i32 = cells.iter().map(|&c| winding[c]).sum();
        let deepest = *cells.iter().min_by(|&&a, &&b| mean_mod[a].total_cmp(&mean_mod[b])).unwrap();
        let v = Vortex { center: grid.cells[deepest].center, winding: w, cells };
        out.total_winding += w;
        if w != 0 {
            out.vortices.push(v);
        } else {
            out.neutral_cores.push(v);
        }
    }
    out
}

/// Straight piece of a jump component between junctions or end points.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    /// Midpoints of the labelled edges, in order along the branch.
    pub points: Vec<Complex64>,
    /// RMS distance of the points outside the vortex exclusion discs from
    /// their least-squares line (`None` if fewer than three such points).
    pub rms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JumpComponent {
    pub edges: Vec<usize>,
    /// `h` times the number of labelled edges.
    pub length: f64,
    /// Net winding of the vortices attached to the component.
    pub vortex_winding: i32,
    pub vortex_count: usize,
    pub branches: Vec<Branch>,
    /// Angles (degrees) between consecutive branches at every junction cell
    /// outside the exclusion discs.
    pub junction_angles: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct JumpSet {
    pub components: Vec<JumpComponent>,
}

impl JumpSet {
    pub fn total_length(&self) -> f64 {
        self.components.iter().map(|c| c.length).sum()
    }

    pub fn max_rms(&self) -> f64 {
        self.components
            .iter()
            .flat_map(|c| c.branches.iter().filter_map(|b| b.rms))
            .fold(0.0, f64::max)
    }

    pub fn max_junction_deviation(&self) -> f64 {
        self.components
            .iter()
            .flat_map(|c| c.junction_angles.iter().flatten())
            .map(|a| (a - 120.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Unit direction of the least-squares line through the points.
fn principal_direction(points: &[Complex64]) -> Option<Complex64> {
    if points.len() < 2 {
        return None;
    }
    let c = points.iter().sum::<Complex64>() / points.len() as f64;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for p in points {
        let d = p - c;
        sxx += d.re * d.re;
        syy += d.im * d.im;
        sxy += d.re * d.im;
    }
    let theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    (sxx + syy > 0.0).then(|| Complex64::from_polar(1.0, theta))
}

fn line_fit_rms(points: &[Complex64]) -> Option<f64> {
    if points.len() < 3 {
        return None;
    }
    let n = points.len() as f64;
    let c = points.iter().sum::<Complex64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for p in points {
        let d = p - c;
        sxx += d.re * d.re;
        syy += d.im * d.im;
        sxy += d.re * d.im;
    }
    // Smallest eigenvalue of the scatter matrix = sum of squared residuals.
    let tr = sxx + syy;
    let det = sxx * syy - sxy * sxy;
    let small = 0.5 * tr - (0.25 * tr * tr - det).max(0.0).sqrt();
    Some((small.max(0.0) / n).sqrt())
}

/// Jump components of a sharp state: labelled edges joined through shared
/// cells, split into branches at vortex cores and at cells where other than
/// two labelled edges meet. Points within `exclusion` of a vortex are left out of the line fits
/// and junction statistics.
pub fn extract_jump_set(state: &FieldState, lat: &Lattice, vortices: &VortexSet, exclusion: f64) -> JumpSet {
    let grid = &lat.grid;
    let ne = grid.edges.len();
    let mut edge_cells: Vec<Vec<usize>> = vec![Vec::new(); ne];
    for (c, cell) in grid.cells.iter().enumerate() {
        for &e in &cell.edges {
            edge_cells[e].push(c);
        }
    }
    let labelled: Vec<bool> = state.labels.iter().map(|&k| k != 0).collect();
    let mut cell_edges: Vec<Vec<usize>> = vec![Vec::new(); grid.cells.len()];
    for e in 0..ne {
        if labelled[e] {
            for &c in &edge_cells[e] {
                cell_edges[c].push(e);
            }
        }
    }
    let midpoint = |e: usize| {
        let [a, b] = grid.edges[e];
        (grid.pos[a] + grid.pos[b]) * 0.5
    };
    let near_vortex = |p: Complex64| vortices.vortices.iter().any(|v| (v.center - p).norm() < exclusion);

    let mut in_core = vec![false; grid.cells.len()];
    for v in &vortices.vortices {
        for &c in &v.cells {
            in_core[c] = true;
        }
    }
    // Cells of each vortex blob, grown by one ring.
    let mut vortex_of_cell: Vec<Option<usize>> = vec![None; grid.cells.len()];
    for (vi, v) in vortices.vortices.iter().enumerate() {
        for &c in &v.cells {
            vortex_of_cell[c] = Some(vi);
            for q in cell_neighbors(lat, c) {
                vortex_of_cell[q].get_or_insert(vi);
            }
        }
    }

    let mut seen = vec![false; ne];
    let mut out = JumpSet::default();
    for start in 0..ne {
        if !labelled[start] || seen[start] {
            continue;
        }
        let mut edges = Vec::new();
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(e) = queue.pop_front() {
            edges.push(e);
            for &c in &edge_cells[e] {
                for &f in &cell_edges[c] {
                    if !seen[f] {
                        seen[f] = true;
                        queue.push_back(f);
                    }
                }
            }
        }
        edges.sort_unstable();

        let mut attached: Vec<usize> = edges
            .iter()
            .flat_map(|&e| edge_cells[e].iter().filter_map(|&c| vortex_of_cell[c]))
            .collect();
        attached.sort_unstable();
        attached.dedup();
        let vortex_winding = attached.iter().map(|&v| vortices.vortices[v].winding).sum();

        // Branches: walk from cells whose labelled degree differs from 2.
        let mut used = vec![false; ne];
        let mut branches = Vec::new();
        let comp_cells: Vec<usize> = {
            let mut cs: Vec<usize> = edges.iter().flat_map(|&e| edge_cells[e].iter().copied()).collect();
            cs.sort_unstable();
            cs.dedup();
            cs
        };
        let is_node = |c: usize| cell_edges[c].len() != 2 || in_core[c];
        let walk = |start_cell: usize, first: usize, used: &mut Vec<bool>| {
            let mut pts = vec![grid.cells[start_cell].center];
            let (mut cell, mut e) = (start_cell, first);
            loop {
                used[e] = true;
                pts.push(midpoint(e));
                let next = edge_cells[e].iter().copied().find(|&c| c != cell);
                match next {
                    Some(c) => {
                        cell = c;
                        if is_node(c) {
                            pts.push(grid.cells[c].center);
                            break;
                        }
                        match cell_edges[c].iter().copied().find(|&f| !used[f]) {
                            Some(f) => e = f,
                            None => break,
                        }
                    }
                    None => break,
                }
            }
            pts
        };
        for &c in &comp_cells {
            if !is_node(c) {
                continue;
            }
            for &e in &cell_edges[c] {
                if !used[e] {
                    branches.push(walk(c, e, &mut used));
                }
            }
        }
        for &e in &edges {
            if !used[e] {
                let c = edge_cells[e][0];
                branches.push(walk(c, e, &mut used));
            }
        }
        let branches: Vec<Branch> = branches
            .into_iter()
            .map(|pts| {
                let kept: Vec<Complex64> = pts.iter().copied().filter(|&p| !near_vortex(p)).collect();
                Branch { rms: line_fit_rms(&kept), points: pts }
            })
            .collect();

        let mut junction_angles = Vec::new();
        for &c in &comp_cells {
            if cell_edges[c].len() < 3 {
                continue;
            }
            let center = grid.cells[c].center;
            if near_vortex(center) {
                continue;
            }
            let mut dirs: Vec<f64> = branches
                .iter()
                .filter_map(|b| {
                    let (first, last) = (b.points[0], *b.points.last().unwrap());
                    let pts: Vec<Complex64> = if (first - center).norm() < 1e-12 {
                        b.points.clone()
                    } else if (last - center).norm() < 1e-12 {
                        b.points.iter().rev().copied().collect()
                    } else {
                        return None;
                    };
                    let kept: Vec<Complex64> = pts
                        .iter()
                        .skip(1)
                        .copied()
                        .filter(|&p| (p - center).norm() >= 2.0 * grid.h && !near_vortex(p))
                        .collect();
                    let far = if kept.len() >= 2 { kept } else { vec![*pts.last().unwrap()] };
                    let mean = far.iter().sum::<Complex64>() / far.len() as f64 - center;
                    let mut dir = principal_direction(&far).unwrap_or(mean);
                    if (dir * mean.conj()).re < 0.0 {
                        dir = -dir;
                    }
                    (dir.norm() > 0.0).then(|| dir.im.atan2(dir.re).to_degrees())
                })
                .collect();
            dirs.sort_by(|a, b| a.total_cmp(b));
            if dirs.len() >= 2 {
                let mut gaps: Vec<f64> = dirs.windows(2).map(|w| w[1] - w[0]).collect();
                gaps.push(dirs[0] + 360.0 - dirs[dirs.len() - 1]);
                junction_angles.push(gaps);
            }
        }

        out.components.push(JumpComponent {
            length: edges.len() as f64 * grid.h,
            edges,
            vortex_winding,
            vortex_count: attached.len(),
            branches,
            junction_angles,
        });
    }
    out
}

/// Least-squares fit `total = slope |log eps| + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpansionFit {
    pub slope: f64,
    pub intercept: f64,
    /// RMS residual of the fit.
    pub residual: f64,
}

pub fn energy_expansion_fit(runs: &[(f64, f64)]) -> Result<ExpansionFit, SimError> {
    if runs.len() < 4 {
        return Err(SimError::IllConditioned(format!("{} runs, need at least 4", runs.len())));
    }
    let (lo, hi) = runs.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &(e, _)| (lo.min(e), hi.max(e)));
    if !(lo > 0.0) || hi / lo < 4.0 {
        return Err(SimError::IllConditioned(format!("eps spans [{lo}, {hi}], less than a factor 4")));
    }
    let n = runs.len() as f64;
    let xs: Vec<f64> = runs.iter().map(|&(e, _)| e.ln().abs()).collect();
    let ys: Vec<f64> = runs.iter().map(|&(_, t)| t).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (xs.iter().zip(&ys).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum::<f64>() / n).sqrt();
    Ok(ExpansionFit { slope, intercept, residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DomainSpec;

    #[test]
    fn fit_recovers_synthetic_data() {
        let runs: Vec<(f64, f64)> =
            [0.2, 0.1, 0.05, 0.025].iter().map(|&e: &f64| (e, std::f64::consts::FRAC_PI_2 * e.ln().abs() + 1.0)).collect();
        let f = energy_expansion_fit(&runs).unwrap();
        assert!((f.slope - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        assert!((f.intercept - 1.0).abs() < 1e-12);
        assert!(f.residual < 1e-12);
        assert!(energy_expansion_fit(&runs[..3]).is_err());
        let narrow: Vec<(f64, f64)> = [0.1, 0.09, 0.08, 0.07].iter().map(|&e| (e, 1.0)).collect();
        assert!(matches!(energy_expansion_fit(&narrow), Err(SimError::IllConditioned(_))));
    }

    #[test]
    fn single_vortex_field_is_detected() {
        let lat = Lattice::new(&DomainSpec::disk(0.05, 1)).unwrap();
        let params = ModulusParams::<f64>::new(2).unwrap();
        // u with p(u) = x/|x|: u = sqrt(x/|x|) on the slit plane.
        let mut s = FieldState::smooth_start(&lat);
        let c = Complex64::new(0.013, 0.021);
        for k in 0..lat.len() {
            let z = lat.grid.pos[k] - c;
            let arg = z.im.atan2(z.re);
            s.u[k] = Complex64::from_polar(1.0, arg / 2.0);
            assert!((params.project_p(s.u[k]) - z / z.norm()).norm() < 1e-12);
        }
        let v = detect_vortices(&s, &lat, 2);
        assert_eq!(v.count(), 1);
        assert_eq!(v.vortices[0].winding, 1);
        assert!((v.vortices[0].center - c).norm() < 0.05);
    }

    #[test]
    fn empty_labels_give_empty_jump_set() {
        let lat = Lattice::new(&DomainSpec::disk(0.1, 0)).unwrap();
        let s = FieldState::smooth_start(&lat);
        let js = extract_jump_set(&s, &lat, &VortexSet::default(), 0.1);
        assert!(js.components.is_empty());
    }

    #[test]
    fn straight_labelled_row_fits_a_line() {
        let lat = Lattice::new(&DomainSpec::disk(0.05, 0)).unwrap();
        let mut s = FieldState::smooth_start(&lat);
        for (e, &[a, b]) in lat.grid.edges.iter().enumerate() {
            let (pa, pb) = (lat.grid.pos[a], lat.grid.pos[b]);
            let vertical = (pa.re - pb.re).abs() < 1e-12;
            if vertical && pa.im.min(pb.im).abs() < 1e-9 && pa.re.abs() < 0.5 && !lat.locked[e] {
                s.labels[e] = 1;
            }
        }
        let js = extract_jump_set(&s, &lat, &VortexSet::default(), 0.1);
        assert_eq!(js.components.len(), 1);
        assert_eq!(js.components[0].branches.len(), 1);
        assert!(js.max_rms() < 1e-12);
        assert!((js.total_length() - 1.0).abs() < 0.11);
    }
}

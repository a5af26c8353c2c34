//! Steiner forests whose components each join a multiple of `m` vortices.
//!
//! `Lambda(mu)` is the least total length of a forest through all vortex
//! points in which every connected component contains `m`, `2m`, ... of
//! them. For small instances it is computed exactly by enumerating block
//! partitions and solving one Steiner minimal tree per block.

pub mod configs;
mod competitor;
mod tree;
mod validate;

pub use competitor::{construct_competitor_field, CompetitorError, CompetitorField};
pub use tree::{mst_length, steiner_tree, steiner_tree_limited, MAX_TERMINALS, MAX_TERMINALS_LARGE};
pub use validate::{validate_forest, ForestReport};

use std::collections::HashMap;
use std::fmt::Write as _;

use num_complex::Complex;
use thiserror::Error;

use crate::scalar::Real;

pub type Point<T> = Complex<T>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SteinerError {
    #[error("no terminals given")]
    Empty,
    #[error("{n} terminals exceed the exact-solver limit of {limit}")]
    TooManyTerminals { n: usize, limit: usize },
    #[error("terminals {a} and {b} coincide")]
    DuplicatePoints { a: usize, b: usize },
    #[error("instance too large: {0}")]
    InstanceTooLarge(String),
    #[error("point sets differ in size ({0} vs {1})")]
    SizeMismatch(usize, usize),
    #[error("malformed forest text at line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointKind {
    Terminal,
    Steiner,
}

/// Union of straight segments between terminals and Steiner points.
#[derive(Debug, Clone, PartialEq)]
pub struct SteinerForest<T: Real> {
    pub points: Vec<Complex<T>>,
    pub kinds: Vec<PointKind>,
    /// Vortex index carried by each terminal.
    pub labels: Vec<Option<usize>>,
    pub edges: Vec<(usize, usize)>,
}

impl<T: Real> Default for SteinerForest<T> {
    fn default() -> Self {
        Self { points: Vec::new(), kinds: Vec::new(), labels: Vec::new(), edges: Vec::new() }
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        Self((0..n).collect())
    }

    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut y = x;
        while self.0[y] != r {
            let next = self.0[y];
            self.0[y] = r;
            y = next;
        }
        r
    }

    /// Returns false if already joined.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.0[ra.max(rb)] = ra.min(rb);
        true
    }
}

impl<T: Real> SteinerForest<T> {
    /// Builds a tree from local indexing: terminal `k` is index `k`, Steiner
    /// point `i` is index `terminals.len() + i`; `ids[k]` is the vortex label.
    pub fn from_tree(
        terminals: &[Complex<T>],
        ids: &[usize],
        steiner: &[Complex<T>],
        edges: &[(usize, usize)],
    ) -> Self {
        let mut f = Self::default();
        for (p, &id) in terminals.iter().zip(ids) {
            f.points.push(*p);
            f.kinds.push(PointKind::Terminal);
            f.labels.push(Some(id));
        }
        for p in steiner {
            f.points.push(*p);
            f.kinds.push(PointKind::Steiner);
            f.labels.push(None);
        }
        f.edges = edges.to_vec();
        f
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_length(&self) -> T {
        self.edges
            .iter()
            .fold(T::zero(), |acc, &(a, b)| acc + (self.points[a] - self.points[b]).norm())
    }

    pub fn degree(&self, k: usize) -> usize {
        self.edges.iter().filter(|&&(a, b)| a == k || b == k).count()
    }

    /// Appends another forest (indices shifted).
    pub fn merge(&mut self, other: &Self) {
        let off = self.points.len();
        self.points.extend_from_slice(&other.points);
        self.kinds.extend_from_slice(&other.kinds);
        self.labels.extend_from_slice(&other.labels);
        self.edges.extend(other.edges.iter().map(|&(a, b)| (a + off, b + off)));
    }

    /// Point indices grouped by connected component, in order of first point.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut uf = UnionFind::new(self.len());
        for &(a, b) in &self.edges {
            uf.union(a, b);
        }
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut slot: HashMap<usize, usize> = HashMap::new();
        for k in 0..self.len() {
            let r = uf.find(k);
            let g = *slot.entry(r).or_insert_with(|| {
                groups.push(Vec::new());
                groups.len() - 1
            });
            groups[g].push(k);
        }
        groups
    }

    /// Vortex labels per component.
    pub fn component_terminals(&self) -> Vec<Vec<usize>> {
        self.components()
            .into_iter()
            .map(|c| c.into_iter().filter_map(|k| self.labels[k]).collect())
            .collect()
    }

    /// True if some edge set forms a cycle.
    pub fn has_cycle(&self) -> bool {
        let mut uf = UnionFind::new(self.len());
        self.edges.iter().any(|&(a, b)| !uf.union(a, b))
    }

    /// Merges Steiner points lying within `tol` of another point (terminals
    /// win), then drops self-loops, duplicate edges, dangling Steiner points
    /// and straight-through Steiner points of degree two.
    pub fn collapsed(&self, tol: T) -> Self {
        let n = self.len();
        let mut rep: Vec<usize> = (0..n).collect();
        for i in 0..n {
            if self.kinds[i] != PointKind::Steiner {
                continue;
            }
            for j in 0..n {
                if j == i || rep[j] != j {
                    continue;
                }
                let better = self.kinds[j] == PointKind::Terminal || j < i;
                if better && (self.points[i] - self.points[j]).norm() <= tol {
                    rep[i] = j;
                    break;
                }
            }
        }
        let mut edges: Vec<(usize, usize)> = Vec::new();
        for &(a, b) in &self.edges {
            let (a, b) = (rep[a], rep[b]);
            if a != b && !edges.iter().any(|&(x, y)| (x, y) == (a, b) || (x, y) == (b, a)) {
                edges.push((a, b));
            }
        }
        let mut alive: Vec<bool> = (0..n).map(|k| rep[k] == k).collect();
        loop {
            let mut changed = false;
            for k in 0..n {
                if !alive[k] || self.kinds[k] != PointKind::Steiner {
                    continue;
                }
                let inc: Vec<usize> = (0..edges.len()).filter(|&e| edges[e].0 == k || edges[e].1 == k).collect();
                if inc.len() <= 1 {
                    for &e in inc.iter().rev() {
                        edges.remove(e);
                    }
                    alive[k] = false;
                    changed = true;
                } else if inc.len() == 2 {
                    let other = |e: usize| if edges[e].0 == k { edges[e].1 } else { edges[e].0 };
                    let (a, b) = (other(inc[0]), other(inc[1]));
                    edges.remove(inc[1]);
                    edges.remove(inc[0]);
                    edges.push((a, b));
                    alive[k] = false;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        let mut new_index = vec![usize::MAX; n];
        let mut out = Self::default();
        for k in 0..n {
            if alive[k] {
                new_index[k] = out.points.len();
                out.points.push(self.points[k]);
                out.kinds.push(self.kinds[k]);
                out.labels.push(self.labels[k]);
            }
        }
        out.edges = edges.into_iter().map(|(a, b)| (new_index[a], new_index[b])).collect();
        out
    }

    /// Plain-text form: `point <id> <x> <y> <terminal|steiner> [vortex]`
    /// lines followed by `edge <id> <id>` lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, p) in self.points.iter().enumerate() {
            let kind = match self.kinds[k] {
                PointKind::Terminal => "terminal",
                PointKind::Steiner => "steiner",
            };
            let (x, y) = (p.re.to_f64().unwrap_or(f64::NAN), p.im.to_f64().unwrap_or(f64::NAN));
            let _ = write!(s, "point {k} {x:.17e} {y:.17e} {kind}");
            if let Some(l) = self.labels[k] {
                let _ = write!(s, " {l}");
            }
            s.push('\n');
        }
        for &(a, b) in &self.edges {
            let _ = writeln!(s, "edge {a} {b}");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, SteinerError> {
        let mut f = Self::default();
        for (line_no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |reason: &str| SteinerError::Parse { line: line_no + 1, reason: reason.to_string() };
            let parts: Vec<&str> = line.split_whitespace().collect();
            match parts[0] {
                "point" => {
                    if parts.len() < 5 {
                        return Err(err("point needs id, x, y, kind"));
                    }
                    let id: usize = parts[1].parse().map_err(|_| err("bad id"))?;
                    if id != f.points.len() {
                        return Err(err("point ids must be consecutive from 0"));
                    }
                    let x: f64 = parts[2].parse().map_err(|_| err("bad x"))?;
                    let y: f64 = parts[3].parse().map_err(|_| err("bad y"))?;
                    let kind = match parts[4] {
                        "terminal" => PointKind::Terminal,
                        "steiner" => PointKind::Steiner,
                        _ => return Err(err("kind must be terminal or steiner")),
                    };
                    let label = match parts.get(5) {
                        Some(l) => Some(l.parse().map_err(|_| err("bad vortex label"))?),
                        None if kind == PointKind::Terminal => Some(id),
                        None => None,
                    };
                    f.points.push(Complex::new(T::lit(x), T::lit(y)));
                    f.kinds.push(kind);
                    f.labels.push(label);
                }
                "edge" => {
                    if parts.len() != 3 {
                        return Err(err("edge needs two ids"));
                    }
                    let a: usize = parts[1].parse().map_err(|_| err("bad id"))?;
                    let b: usize = parts[2].parse().map_err(|_| err("bad id"))?;
                    if a >= f.points.len() || b >= f.points.len() {
                        return Err(err("edge refers to an unknown point"));
                    }
                    f.edges.push((a, b));
                }
                _ => return Err(err("expected 'point' or 'edge'")),
            }
        }
        Ok(f)
    }
}

/// Set partition of vortex indices `0..md` into blocks of size `m, 2m, ...`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionScheme {
    pub blocks: Vec<Vec<usize>>,
}

/// All partitions of `0..n` into blocks whose sizes are positive multiples
/// of `m`. Each block lists its smallest free index first; blocks grow in
/// size order and members in lexicographic order.
pub fn enumerate_partitions(n: usize, m: usize) -> Result<Vec<PartitionScheme>, SteinerError> {
    if n > 12 {
        return Err(SteinerError::InstanceTooLarge(format!("{n} points exceed the partition limit of 12")));
    }
    if m == 0 || !n.is_multiple_of(m) {
        return Ok(Vec::new());
    }
    fn rec(free: &[usize], m: usize, current: &mut Vec<Vec<usize>>, out: &mut Vec<PartitionScheme>) {
        if free.is_empty() {
            out.push(PartitionScheme { blocks: current.clone() });
            return;
        }
        let first = free[0];
        let rest = &free[1..];
        let mut size = m;
        while size <= free.len() {
            let mut chosen = Vec::with_capacity(size - 1);
            combos(rest, size - 1, 0, &mut chosen, &mut |pick| {
                let mut block = vec![first];
                block.extend_from_slice(pick);
                let remaining: Vec<usize> = rest.iter().copied().filter(|x| !pick.contains(x)).collect();
                current.push(block);
                rec(&remaining, m, current, out);
                current.pop();
            });
            size += m;
        }
    }
    fn combos(items: &[usize], k: usize, start: usize, chosen: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if chosen.len() == k {
            f(chosen);
            return;
        }
        for i in start..items.len() {
            if items.len() - i < k - chosen.len() {
                break;
            }
            chosen.push(items[i]);
            combos(items, k, i + 1, chosen, f);
            chosen.pop();
        }
    }
    let free: Vec<usize> = (0..n).collect();
    let mut out = Vec::new();
    rec(&free, m, &mut Vec::new(), &mut out);
    Ok(out)
}

/// Least total length of a perfect matching (bitmask dynamic programming).
pub fn min_perfect_matching<T: Real>(points: &[Complex<T>]) -> T {
    let n = points.len();
    assert!(n.is_multiple_of(2) && n <= 20, "matching needs an even number of at most 20 points");
    let full = (1usize << n) - 1;
    let mut best = vec![T::infinity(); 1 << n];
    best[0] = T::zero();
    for mask in 0..full {
        if best[mask] == T::infinity() {
            continue;
        }
        let i = (!mask).trailing_zeros() as usize;
        for j in i + 1..n {
            if mask & (1 << j) == 0 {
                let next = mask | (1 << i) | (1 << j);
                let v = best[mask] + (points[i] - points[j]).norm();
                if v < best[next] {
                    best[next] = v;
                }
            }
        }
    }
    best[full]
}

/// `min_sigma sum_k |p_k - q_sigma(k)|` by enumeration of permutations.
pub fn minimal_connection<T: Real>(p: &[Complex<T>], q: &[Complex<T>]) -> Result<(T, Vec<usize>), SteinerError> {
    if p.len() != q.len() {
        return Err(SteinerError::SizeMismatch(p.len(), q.len()));
    }
    if p.len() > 8 {
        return Err(SteinerError::InstanceTooLarge(format!("{} pairs exceed the permutation limit of 8", p.len())));
    }
    fn rec<T: Real>(
        p: &[Complex<T>],
        q: &[Complex<T>],
        k: usize,
        used: &mut [bool],
        perm: &mut Vec<usize>,
        acc: T,
        best: &mut (T, Vec<usize>),
    ) {
        if acc >= best.0 {
            return;
        }
        if k == p.len() {
            *best = (acc, perm.clone());
            return;
        }
        for j in 0..q.len() {
            if !used[j] {
                used[j] = true;
                perm.push(j);
                rec(p, q, k + 1, used, perm, acc + (p[k] - q[j]).norm(), best);
                perm.pop();
                used[j] = false;
            }
        }
    }
    let mut best = (T::infinity(), Vec::new());
    rec(p, q, 0, &mut vec![false; q.len()], &mut Vec::new(), T::zero(), &mut best);
    Ok(best)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LambdaOptions {
    /// Allow exact trees on up to nine terminals (slow).
    pub large: bool,
}

#[derive(Debug, Clone)]
pub struct LambdaResult<T: Real> {
    pub value: T,
    pub forest: SteinerForest<T>,
    pub partition: PartitionScheme,
    /// Per-partition totals, `None` where the partition was pruned.
    pub partition_values: Vec<Option<T>>,
    pub partitions: Vec<PartitionScheme>,
}

/// Chung-Graham lower bound on the Steiner ratio.
const STEINER_RATIO_BOUND: f64 = 0.824;

fn block_lower_bound<T: Real>(pts: &[Complex<T>]) -> T {
    if pts.len() == 2 {
        return (pts[0] - pts[1]).norm();
    }
    let mut lb = mst_length(pts) * T::lit(STEINER_RATIO_BOUND);
    for i in 0..pts.len() {
        for j in 0..i {
            lb = lb.max((pts[i] - pts[j]).norm());
        }
    }
    if pts.len().is_multiple_of(2) {
        lb = lb.max(min_perfect_matching(pts));
    }
    lb
}

/// Exact `Lambda(mu)` with its minimizing forest.
///
/// Partitions are visited in order of a lower bound (sum of block bounds) and
/// Steiner trees are solved lazily, once per block. Ties in total length go
/// to the partition that comes first in [`enumerate_partitions`] order.
pub fn lambda_mu<T: Real>(points: &[Complex<T>], m: u32, opts: LambdaOptions) -> Result<LambdaResult<T>, SteinerError> {
    let n = points.len();
    let m = m as usize;
    if n == 0 || !n.is_multiple_of(m) {
        return Err(SteinerError::InstanceTooLarge(format!("{n} points is not a positive multiple of m = {m}")));
    }
    let partitions = enumerate_partitions(n, m)?;
    let limit = if opts.large { MAX_TERMINALS_LARGE } else { MAX_TERMINALS };
    let mask_of = |b: &[usize]| b.iter().fold(0u32, |acc, &k| acc | (1 << k));
    let pts_of = |b: &[usize]| b.iter().map(|&k| points[k]).collect::<Vec<_>>();

    let mut bounds: HashMap<u32, T> = HashMap::new();
    let mut partition_lb = Vec::with_capacity(partitions.len());
    for p in &partitions {
        let mut lb = T::zero();
        for b in &p.blocks {
            let key = mask_of(b);
            let v = *bounds.entry(key).or_insert_with(|| block_lower_bound(&pts_of(b)));
            lb = lb + v;
        }
        partition_lb.push(lb);
    }
    let mut order: Vec<usize> = (0..partitions.len()).collect();
    order.sort_by(|&a, &b| partition_lb[a].partial_cmp(&partition_lb[b]).unwrap().then(a.cmp(&b)));

    let scale = {
        let mut s = T::zero();
        for i in 0..n {
            for j in 0..i {
                s = s.max((points[i] - points[j]).norm());
            }
        }
        s
    };
    let tol = scale * T::lit(1e-10);
    let mut trees: HashMap<u32, SteinerForest<T>> = HashMap::new();
    let mut best: Option<(T, usize)> = None;
    let mut values: Vec<Option<T>> = vec![None; partitions.len()];
    'outer: for &pi in &order {
        if let Some((bv, _)) = best {
            if partition_lb[pi] > bv + tol {
                break;
            }
        }
        let mut total = T::zero();
        for b in &partitions[pi].blocks {
            let key = mask_of(b);
            if let std::collections::hash_map::Entry::Vacant(e) = trees.entry(key) {
                if b.len() > limit {
                    // Cannot be strictly better than what we hold.
                    if let Some((bv, _)) = best {
                        if partition_lb[pi] >= bv - tol {
                            continue 'outer;
                        }
                    }
                    return Err(SteinerError::InstanceTooLarge(format!(
                        "block of {} terminals needs the exact solver beyond its limit of {limit}",
                        b.len()
                    )));
                }
                let mut tree = steiner_tree_limited(&pts_of(b), limit)?;
                for k in tree.labels.iter_mut().flatten() {
                    *k = b[*k];
                }
                e.insert(tree);
            }
            total = total + trees[&key].total_length();
        }
        values[pi] = Some(total);
        best = match best {
            None => Some((total, pi)),
            Some((bv, bi)) if total < bv - tol || ((total - bv).abs() <= tol && pi < bi) => Some((total, pi)),
            keep => keep,
        };
    }
    let (value, pi) = best.expect("at least one partition");
    let mut forest = SteinerForest::default();
    for b in &partitions[pi].blocks {
        forest.merge(&trees[&mask_of(b)]);
    }
    Ok(LambdaResult { value, forest, partition: partitions[pi].clone(), partition_values: values, partitions })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(x: f64, y: f64) -> Complex64 {
        Complex64::new(x, y)
    }

    #[test]
    fn small_trees() {
        let t = steiner_tree(&[c(0.0, 0.0), c(3.0, 4.0)]).unwrap();
        assert!((t.total_length() - 5.0).abs() < 1e-12);
        let single = steiner_tree(&[c(1.0, 1.0)]).unwrap();
        assert_eq!(single.total_length(), 0.0);
        let tri: Vec<Complex64> = (0..3).map(|k| Complex64::from_polar(1.0, 0.3 + k as f64 * 2.0 * std::f64::consts::PI / 3.0)).collect();
        let t = steiner_tree(&tri).unwrap();
        assert!((t.total_length() - 3.0).abs() < 1e-9);
        let center = t.points[t.kinds.iter().position(|&k| k == PointKind::Steiner).unwrap()];
        assert!(center.norm() < 1e-8);
    }

    #[test]
    fn unit_square_has_two_steiner_points() {
        let sq = [c(0.0, 0.0), c(1.0, 0.0), c(1.0, 1.0), c(0.0, 1.0)];
        let t = steiner_tree(&sq).unwrap();
        assert!((t.total_length() - (1.0 + 3f64.sqrt())).abs() < 1e-9);
        assert_eq!(t.kinds.iter().filter(|&&k| k == PointKind::Steiner).count(), 2);
    }

    #[test]
    fn obtuse_triangle_collapses_to_vertex() {
        let t = steiner_tree(&[c(0.0, 0.0), c(1.0, 0.0), c(-0.9, 0.2)]).unwrap();
        assert_eq!(t.kinds.iter().filter(|&&k| k == PointKind::Steiner).count(), 0);
        let expected = 1.0 + c(-0.9, 0.2).norm();
        assert!((t.total_length() - expected).abs() < 1e-9);
    }

    #[test]
    fn pruned_search_matches_exhaustive() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [4usize, 5, 6] {
            for _ in 0..3 {
                let pts: Vec<Complex64> = (0..n).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
                let fast = steiner_tree(&pts).unwrap().total_length();
                let slow = tree::steiner_length_exhaustive(&pts);
                assert!((fast - slow).abs() < 1e-8, "n={n}: {fast} vs {slow}");
            }
        }
    }

    #[test]
    fn too_many_terminals() {
        let pts: Vec<Complex64> = (0..7).map(|k| c(k as f64, (k * k) as f64)).collect();
        assert_eq!(steiner_tree(&pts).unwrap_err(), SteinerError::TooManyTerminals { n: 7, limit: 6 });
    }

    #[test]
    fn partition_counts() {
        assert_eq!(enumerate_partitions(2, 2).unwrap().len(), 1);
        let p4 = enumerate_partitions(4, 2).unwrap();
        assert_eq!(p4.len(), 4);
        assert_eq!(p4[0].blocks, vec![vec![0, 1], vec![2, 3]]);
        assert_eq!(p4[3].blocks, vec![vec![0, 1, 2, 3]]);
        let p6 = enumerate_partitions(6, 3).unwrap();
        assert_eq!(p6.len(), 11);
        assert_eq!(p6.iter().filter(|p| p.blocks.len() == 2).count(), 10);
        assert_eq!(enumerate_partitions(12, 2).unwrap().len(), 150_349);
        assert!(enumerate_partitions(14, 2).is_err());
    }

    #[test]
    fn minimal_connection_examples() {
        let (v, perm) = minimal_connection(&[c(0.0, 0.0)], &[c(3.0, 4.0)]).unwrap();
        assert_eq!((v, perm), (5.0, vec![0]));
        let (v, perm) = minimal_connection(&[c(0.0, 0.0), c(2.0, 0.0)], &[c(1.0, 0.0), c(3.0, 0.0)]).unwrap();
        assert!((v - 2.0).abs() < 1e-15);
        assert_eq!(perm, vec![0, 1]);
    }

    /// O(n^3) Hungarian algorithm on a square cost matrix.
    fn hungarian(cost: &[Vec<f64>]) -> f64 {
        let n = cost.len();
        let inf = f64::INFINITY;
        let (mut u, mut v) = (vec![0.0; n + 1], vec![0.0; n + 1]);
        let (mut p, mut way) = (vec![0usize; n + 1], vec![0usize; n + 1]);
        for i in 1..=n {
            p[0] = i;
            let mut j0 = 0;
            let mut minv = vec![inf; n + 1];
            let mut used = vec![false; n + 1];
            loop {
                used[j0] = true;
                let (i0, mut delta, mut j1) = (p[j0], inf, 0);
                for j in 1..=n {
                    if !used[j] {
                        let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                        if cur < minv[j] {
                            minv[j] = cur;
                            way[j] = j0;
                        }
                        if minv[j] < delta {
                            delta = minv[j];
                            j1 = j;
                        }
                    }
                }
                for j in 0..=n {
                    if used[j] {
                        u[p[j]] += delta;
                        v[j] -= delta;
                    } else {
                        minv[j] -= delta;
                    }
                }
                j0 = j1;
                if p[j0] == 0 {
                    break;
                }
            }
            loop {
                let j1 = way[j0];
                p[j0] = p[j1];
                j0 = j1;
                if j0 == 0 {
                    break;
                }
            }
        }
        (1..=n).map(|j| cost[p[j] - 1][j - 1]).sum()
    }

    #[test]
    fn minimal_connection_matches_assignment_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let p: Vec<Complex64> = (0..4).map(|_| c(rng.gen(), rng.gen())).collect();
            let q: Vec<Complex64> = (0..4).map(|_| c(rng.gen(), rng.gen())).collect();
            let cost: Vec<Vec<f64>> = p.iter().map(|a| q.iter().map(|b| (a - b).norm()).collect()).collect();
            let (v, _) = minimal_connection(&p, &q).unwrap();
            assert!((v - hungarian(&cost)).abs() < 1e-12);
        }
    }

    #[test]
    fn lambda_for_a_pair_is_the_distance() {
        let r = lambda_mu(&[c(0.1, 0.2), c(-0.3, 0.5)], 2, LambdaOptions::default()).unwrap();
        assert!((r.value - 0.5).abs() < 1e-12);
        assert_eq!(r.forest.edges.len(), 1);
    }

    #[test]
    fn forest_text_roundtrip() {
        let sq = [c(0.0, 0.0), c(1.0, 0.0), c(1.0, 1.0), c(0.0, 1.0)];
        let t = steiner_tree(&sq).unwrap();
        let back = SteinerForest::<f64>::from_text(&t.to_text()).unwrap();
        assert_eq!(back, t);
        assert!(SteinerForest::<f64>::from_text("point 0 0 0 vertex").is_err());
        assert!(SteinerForest::<f64>::from_text("edge 0 1").is_err());
    }

    #[test]
    fn generic_over_f32() {
        let t = steiner_tree(&[Complex::<f32>::new(0.0, 0.0), Complex::new(1.0, 0.0), Complex::new(0.5, 0.8)]).unwrap();
        assert!(t.total_length() > 1.0f32);
    }

    proptest! {
        #[test]
        fn steiner_length_is_rigid_motion_invariant(
            seed in 0u64..500, angle in 0.0f64..6.28, tx in -2.0f64..2.0, ty in -2.0f64..2.0, n in 3usize..6
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<Complex64> = (0..n).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            let rot = Complex64::from_polar(1.0, angle);
            let moved: Vec<Complex64> = pts.iter().map(|p| p * rot + c(tx, ty)).collect();
            let a = steiner_tree(&pts).unwrap().total_length();
            let b = steiner_tree(&moved).unwrap().total_length();
            prop_assert!((a - b).abs() < 1e-9);
            prop_assert!(a <= mst_length(&pts) + 1e-12);
        }
    }
}

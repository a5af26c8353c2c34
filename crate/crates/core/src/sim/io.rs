use std::fmt::Write as _;
use std::io::{BufRead, Write};

use num_complex::Complex64;

use super::{EnergyBreakdown, FieldState, Lattice, SimError};

/// Run metadata stored at the top of a snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotHeader {
    pub shape: String,
    pub h: f64,
    pub m: u32,
    pub d: u32,
    pub eps: f64,
    pub eta: f64,
}

/// Writes a plain-text snapshot: header lines `key value`, then
/// `nodes N` followed by `x y re(u) im(u) psi` for every active node in index
/// order, then `edges K` followed by `i j k` for every edge with nonzero
/// label `k` from node `i` to node `j`.
pub fn write_snapshot<W: Write>(
    out: &mut W,
    header: &SnapshotHeader,
    state: &FieldState,
    lat: &Lattice,
) -> std::io::Result<()> {
    writeln!(out, "fracvort-snapshot 1")?;
    writeln!(out, "shape {}", header.shape)?;
    writeln!(out, "h {:e}", header.h)?;
    writeln!(out, "m {}", header.m)?;
    writeln!(out, "d {}", header.d)?;
    writeln!(out, "eps {:e}", header.eps)?;
    writeln!(out, "eta {:e}", header.eta)?;
    let grid = &lat.grid;
    let active: Vec<usize> = (0..lat.len()).filter(|&k| grid.is_active(k)).collect();
    writeln!(out, "nodes {}", active.len())?;
    for &k in &active {
        let (p, u) = (grid.pos[k], state.u[k]);
        writeln!(out, "{:e} {:e} {:e} {:e} {:e}", p.re, p.im, u.re, u.im, state.psi[k])?;
    }
    let labelled: Vec<usize> = (0..grid.edges.len()).filter(|&e| state.labels[e] != 0).collect();
    writeln!(out, "edges {}", labelled.len())?;
    for e in labelled {
        let [i, j] = grid.edges[e];
        writeln!(out, "{i} {j} {}", state.labels[e])?;
    }
    Ok(())
}

fn bad(line: usize, reason: impl Into<String>) -> SimError {
    SimError::Snapshot { line, reason: reason.into() }
}

fn parse<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T, SimError> {
    tok.ok_or_else(|| bad(line, format!("missing {what}")))?
        .parse()
        .map_err(|_| bad(line, format!("cannot parse {what}")))
}

struct Records<'a> {
    it: std::iter::Enumerate<std::slice::Iter<'a, String>>,
    total: usize,
}

impl<'a> Records<'a> {
    fn next_record(&mut self) -> Option<(usize, &'a str)> {
        self.it.by_ref().map(|(i, l)| (i + 1, l.trim())).find(|(_, l)| !l.is_empty())
    }

    fn next(&mut self, what: &str) -> Result<(usize, &'a str), SimError> {
        let total = self.total;
        self.next_record().ok_or_else(|| bad(total, format!("unexpected end, expected {what}")))
    }

    fn field(&mut self, key: &str) -> Result<(usize, String), SimError> {
        let (ln, l) = self.next(key)?;
        let mut t = l.splitn(2, ' ');
        if t.next() != Some(key) {
            return Err(bad(ln, format!("expected `{key}`")));
        }
        Ok((ln, t.next().unwrap_or("").trim().to_string()))
    }
}

/// Reads a snapshot written by [`write_snapshot`] for the same lattice.
pub fn read_snapshot<R: BufRead>(input: R, lat: &Lattice) -> Result<(SnapshotHeader, FieldState), SimError> {
    let lines: Vec<String> = input.lines().collect::<Result<_, _>>().map_err(|e| bad(0, e.to_string()))?;
    let mut rd = Records { it: lines.iter().enumerate(), total: lines.len() };
    let (ln, magic) = rd.next("magic line")?;
    if magic != "fracvort-snapshot 1" {
        return Err(bad(ln, "not a snapshot"));
    }
    let (_, shape) = rd.field("shape")?;
    let (l, h) = rd.field("h")?;
    let h = parse(Some(&h), l, "h")?;
    let (l, m) = rd.field("m")?;
    let m: u32 = parse(Some(&m), l, "m")?;
    let (l, d) = rd.field("d")?;
    let d = parse(Some(&d), l, "d")?;
    let (l, eps) = rd.field("eps")?;
    let eps = parse(Some(&eps), l, "eps")?;
    let (l, eta) = rd.field("eta")?;
    let eta = parse(Some(&eta), l, "eta")?;
    let header = SnapshotHeader { shape, h, m, d, eps, eta };

    let grid = &lat.grid;
    if (h - grid.h).abs() > 1e-12 * grid.h {
        return Err(bad(l, "spacing does not match the lattice"));
    }
    let active: Vec<usize> = (0..lat.len()).filter(|&k| grid.is_active(k)).collect();
    let (l, count) = rd.field("nodes")?;
    let count: usize = parse(Some(&count), l, "node count")?;
    if count != active.len() {
        return Err(bad(l, format!("{count} nodes, lattice has {}", active.len())));
    }
    let mut state = FieldState {
        u: vec![Complex64::new(0.0, 0.0); lat.len()],
        psi: vec![1.0; lat.len()],
        labels: vec![0; grid.edges.len()],
    };
    for &k in &active {
        let (ln, l) = rd.next("node record")?;
        let mut t = l.split_whitespace();
        let x: f64 = parse(t.next(), ln, "x")?;
        let y: f64 = parse(t.next(), ln, "y")?;
        if (Complex64::new(x, y) - grid.pos[k]).norm() > 1e-9 * grid.h.max(1.0) {
            return Err(bad(ln, "node position does not match the lattice"));
        }
        state.u[k] = Complex64::new(parse(t.next(), ln, "re u")?, parse(t.next(), ln, "im u")?);
        state.psi[k] = parse(t.next(), ln, "psi")?;
    }
    let (l, count) = rd.field("edges")?;
    let count: usize = parse(Some(&count), l, "edge count")?;
    for _ in 0..count {
        let (ln, l) = rd.next("edge record")?;
        let mut t = l.split_whitespace();
        let i: usize = parse(t.next(), ln, "i")?;
        let j: usize = parse(t.next(), ln, "j")?;
        let k: u32 = parse(t.next(), ln, "label")?;
        if k >= m {
            return Err(bad(ln, format!("label {k} out of range")));
        }
        let e = (i < lat.len())
            .then(|| [grid.right_edge[i], grid.up_edge[i]].into_iter().flatten().find(|&e| grid.edges[e][1] == j))
            .flatten()
            .ok_or_else(|| bad(ln, format!("no lattice edge {i} -> {j}")))?;
        state.labels[e] = k;
    }
    if let Some((ln, _)) = rd.next_record() {
        return Err(bad(ln, "trailing data"));
    }
    Ok((header, state))
}

/// Energy trace as CSV with one row per sweep.
pub fn trace_csv(trace: &[EnergyBreakdown]) -> String {
    let mut s = String::from("sweep,quotient_dirichlet,potential,at_wall,jump_length,total\n");
    for (i, b) in trace.iter().enumerate() {
        let _ = writeln!(
            s,
            "{i},{:e},{:e},{:e},{:e},{:e}",
            b.quotient_dirichlet, b.potential, b.at_wall, b.jump_length, b.total
        );
    }
    s
}

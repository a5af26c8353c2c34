//! The primary acceptance checks, one function per criterion.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Instant;

use num_complex::Complex64;
use rand::Rng;

use fracvort_core::domain::DomainSpec;
use fracvort_core::limit::{
    core_energy_table, neumann_solve, renormalized_energy, renormalized_energy_oracles, CoreEnergyOptions, VortexConfig,
};
use fracvort_core::quotient::{loop_winding, plaquette_winding, ModulusParams};
use fracvort_core::sim::{
    diffuse_gradient, energy_diffuse, energy_expansion_fit, energy_sharp, lm_split_diagnostic, sharp_gradient, truncate,
    wall_profile_1d, FieldState, Lattice, SimParams,
};
use fracvort_core::steiner::configs::{nine_point_cluster, six_point_cluster};
use fracvort_core::steiner::{enumerate_partitions, lambda_mu, steiner_tree, LambdaOptions};

use crate::experiments::{random_points, rng, run_simulation, HarnessError, RunRequest, SimRun};

pub const PRIMARY: [u8; 12] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12];

#[derive(Debug, Clone)]
pub struct CriterionOutcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl CriterionOutcome {
    pub fn line(&self) -> String {
        format!(
            "{} {:>2} {:<26} {} ({:.1} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.seconds
        )
    }
}

pub fn criterion_name(id: u8) -> &'static str {
    match id {
        1 => "minimal-connection",
        2 => "six-point-connected",
        3 => "nine-point-connected",
        4 => "renormalized-vs-oracle",
        5 => "neumann-vs-images",
        6 => "core-energy",
        7 => "wall-profile",
        8 => "energy-expansion",
        9 => "topological-constraint",
        10 => "jump-structure",
        11 => "invariant-suites",
        12 => "splitting-inequality",
        _ => "unknown",
    }
}

type Check = Result<(bool, String), HarnessError>;

pub fn run_criterion(id: u8) -> CriterionOutcome {
    let start = Instant::now();
    let res: Check = match id {
        1 => minimal_connection(),
        2 => six_point(),
        3 => nine_point(),
        4 => renormalized_vs_oracle(),
        5 => neumann_vs_images(),
        6 => core_energy_check(),
        7 => wall_profile(),
        8 => energy_expansion(),
        9 => topological_constraint(),
        10 => jump_structure(),
        11 => invariant_suites(),
        12 => splitting_inequality(),
        _ => Ok((false, format!("no criterion {id}"))),
    };
    let seconds = start.elapsed().as_secs_f64();
    let (mut passed, mut detail) = res.unwrap_or_else(|e| (false, format!("error: {e}")));
    if let Some(limit) = time_limit(id) {
        if seconds > limit {
            passed = false;
            detail.push_str(&format!("; over the {limit:.0} s budget"));
        }
    }
    CriterionOutcome { id, name: criterion_name(id), passed, detail, seconds }
}

fn time_limit(id: u8) -> Option<f64> {
    match id {
        1 => Some(10.0),
        2 => Some(30.0),
        3 => Some(300.0),
        4 => Some(120.0),
        5 => Some(60.0),
        6 => Some(300.0),
        7 => Some(5.0),
        8 => Some(900.0),
        11 => Some(60.0),
        _ => None,
    }
}

pub fn run_suite(ids: &[u8], mut report: impl FnMut(&CriterionOutcome)) -> Vec<CriterionOutcome> {
    ids.iter()
        .map(|&id| {
            let o = run_criterion(id);
            report(&o);
            o
        })
        .collect()
}

/// Exhaustive minimum over perfect matchings, by recursion on the first
/// unmatched point.
fn brute_force_matching(p: &[Complex64]) -> f64 {
    fn rec(p: &[Complex64], used: &mut [bool]) -> f64 {
        let Some(i) = used.iter().position(|&u| !u) else { return 0.0 };
        used[i] = true;
        let mut best = f64::INFINITY;
        for j in i + 1..p.len() {
            if !used[j] {
                used[j] = true;
                best = best.min((p[i] - p[j]).norm() + rec(p, used));
                used[j] = false;
            }
        }
        used[i] = false;
        best
    }
    rec(p, &mut vec![false; p.len()])
}

fn minimal_connection() -> Check {
    let mut r = rng(2024);
    let mut worst: f64 = 0.0;
    let mut segment_forests = 0;
    for _ in 0..50 {
        let d = r.gen_range(1..=4);
        let pts = random_points(2 * d, 0.9, 0.02, &mut r);
        let res = lambda_mu(&pts, 2, LambdaOptions::default())?;
        worst = worst.max((res.value - brute_force_matching(&pts)).abs());
        let comps = res.forest.component_terminals();
        let steiner_free = res.forest.points.len() == 2 * d;
        if comps.len() == d && comps.iter().all(|c| c.len() == 2) && res.forest.edges.len() == d && steiner_free {
            segment_forests += 1;
        }
    }
    Ok((
        worst <= 1e-9 && segment_forests == 50,
        format!("max |Lambda - matching| = {worst:.2e}, {segment_forests}/50 forests are disjoint segments"),
    ))
}

fn six_point() -> Check {
    let eps = 0.05;
    let pts = six_point_cluster(eps);
    let res = lambda_mu(&pts, 3, LambdaOptions::default())?;
    let connected = res.forest.components().len() == 1;
    let bound = 3.0 + 6.0 * eps;
    let mut best_split = f64::INFINITY;
    for p in enumerate_partitions(6, 3)?.iter().filter(|p| p.blocks.len() == 2) {
        let mut total = 0.0;
        for b in &p.blocks {
            total += steiner_tree(&b.iter().map(|&k| pts[k]).collect::<Vec<_>>())?.total_length();
        }
        best_split = best_split.min(total);
    }
    Ok((
        connected && res.value <= bound + 1e-12 && best_split > res.value,
        format!(
            "connected = {connected}, length {:.6} <= {bound:.2}, best 2-component {best_split:.6}",
            res.value
        ),
    ))
}

fn nine_point() -> Check {
    let (eps, delta) = (0.05, 0.005);
    let pts = nine_point_cluster(eps, delta);
    let res = lambda_mu(&pts, 3, LambdaOptions { large: true })?;
    let comps = res.forest.components().len();
    let bound = 3.0 + 4.0 * eps + 8.0 * delta;
    Ok((
        comps == 1 && res.value <= bound + 1e-12,
        format!("{comps} component(s), length {:.6}, bound {bound:.3}", res.value),
    ))
}

fn renormalized_vs_oracle() -> Check {
    let spec = DomainSpec::disk(2e-3, 1);
    let mu = VortexConfig::new(vec![Complex64::new(-0.3, 0.0), Complex64::new(0.3, 0.0)], 2, 1);
    let w = renormalized_energy(&mu, &spec)?;
    let radii = [0.1, 0.05, 0.02, 0.01];
    let oracle = renormalized_energy_oracles(&mu, &spec, &radii)?;
    let diffs: Vec<f64> = oracle.iter().map(|o| (w - o).abs()).collect();
    let decreasing = diffs.windows(2).all(|d| d[1] < d[0]);
    let last = diffs[diffs.len() - 1];
    Ok((
        decreasing && last <= 1e-2,
        format!(
            "W = {w:.6}, |W - oracle(r)| = {} for r = 0.1, 0.05, 0.02, 0.01",
            diffs.iter().map(|d| format!("{d:.2e}")).collect::<Vec<_>>().join(", ")
        ),
    ))
}

/// `sum_k log|x - x_k| + log(|x_k| |x - x_k / |x_k|^2|)`, the Neumann
/// potential on the unit disc with one image per source.
pub fn disk_image_potential(points: &[Complex64], x: Complex64) -> f64 {
    points
        .iter()
        .map(|&a| (x - a).norm().ln() + (a.norm() * (x - a / a.norm_sqr()).norm()).ln())
        .sum()
}

fn neumann_vs_images() -> Check {
    let spec = DomainSpec::disk(5e-3, 1);
    let pts = vec![Complex64::new(-0.31, 0.12), Complex64::new(0.27, -0.22)];
    let pot = neumann_solve(&VortexConfig::new(pts.clone(), 2, 1), &spec)?;
    let grid = pot.grid();
    let mut err: f64 = 0.0;
    for k in 0..grid.len() {
        let x = grid.pos[k];
        if !pot.is_node_valid(k) || spec.signed_distance(x) <= 0.0 || pts.iter().any(|p| (x - p).norm() < 1e-9) {
            continue;
        }
        err = err.max((pot.phi_at(x) - disk_image_potential(&pts, x)).abs());
    }
    Ok((err <= 5e-4, format!("max interior error {err:.2e}")))
}

fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn core_energy_check() -> Check {
    let radii = [2.0, 4.0, 8.0, 16.0];
    let mut ok = true;
    let mut parts = Vec::new();
    for m in [2u32, 3] {
        let table = core_energy_table(&radii, m, &CoreEnergyOptions::default())?;
        let gammas: Vec<f64> = table.entries.iter().map(|e| e.gamma()).collect();
        let monotone = gammas.windows(2).all(|g| g[1] <= g[0] + 1e-3);
        let logs: Vec<f64> = radii.iter().map(|r: &f64| r.ln()).collect();
        let raw: Vec<f64> = table.entries.iter().map(|e| e.raw_energy).collect();
        let slope = ls_slope(&logs, &raw);
        let target = PI / (m * m) as f64;
        let rel = (slope - target).abs() / target;
        ok &= monotone && rel <= 0.05;
        parts.push(format!("m={m}: monotone = {monotone}, slope {slope:.4} vs {target:.4} ({:.1}%)", 100.0 * rel));
    }
    Ok((ok, parts.join("; ")))
}

fn wall_profile() -> Check {
    let eta = 0.1;
    let p = wall_profile_1d(eta, eta / 20.0, 12.0 * eta);
    let sup = p.sup_error(eta);
    let rel = (p.energy - 1.0).abs();
    Ok((rel <= 0.02 && sup <= 1e-2, format!("energy {:.5}, sup error {sup:.2e}", p.energy)))
}

type RunKey = (u32, u32, u64);

fn run_cache() -> &'static Mutex<HashMap<RunKey, Arc<SimRun>>> {
    static CACHE: OnceLock<Mutex<HashMap<RunKey, Arc<SimRun>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Sharp minimizer on the unit disc with `h = eps / 4`, started from the
/// competitor of `md` vortices on the circle of radius 1/2; memoized.
pub fn sharp_run(m: u32, d: u32, eps: f64) -> Result<Arc<SimRun>, HarnessError> {
    let key = (m, d, eps.to_bits());
    if let Some(r) = run_cache().lock().unwrap().get(&key) {
        return Ok(r.clone());
    }
    let spec = DomainSpec::disk(eps / 4.0, d);
    let run = Arc::new(run_simulation(&spec, &RunRequest::sharp(m, eps))?);
    run_cache().lock().unwrap().insert(key, run.clone());
    Ok(run)
}

const LADDER: [f64; 4] = [0.2, 0.1, 0.05, 0.025];
const STRUCTURE_EPS: [f64; 2] = [0.05, 0.025];
const STRUCTURE_CASES: [(u32, u32); 4] = [(2, 1), (2, 2), (3, 1), (3, 2)];

fn energy_expansion() -> Check {
    let mut runs = Vec::new();
    for eps in LADDER {
        runs.push((eps, sharp_run(2, 1, eps)?.energy.total));
    }
    let fit = energy_expansion_fit(&runs)?;
    let rel = (fit.slope - FRAC_PI_2).abs() / FRAC_PI_2;
    Ok((
        rel <= 0.10,
        format!("slope {:.4} vs pi/2 = {FRAC_PI_2:.4} ({:.1}%), residual {:.2e}", fit.slope, 100.0 * rel, fit.residual),
    ))
}

fn structure_runs() -> Result<Vec<Arc<SimRun>>, HarnessError> {
    let mut out = Vec::new();
    for (m, d) in STRUCTURE_CASES {
        for eps in STRUCTURE_EPS {
            out.push(sharp_run(m, d, eps)?);
        }
    }
    Ok(out)
}

fn topological_constraint() -> Check {
    let runs = structure_runs()?;
    let mut ok = true;
    let mut converged = 0;
    let mut components = 0;
    let mut notes = Vec::new();
    for r in runs.iter().filter(|r| r.outcome.converged) {
        converged += 1;
        let m = r.params.m;
        let md = (m * r.lattice.spec.d) as i32;
        if r.vortices.total_winding != md {
            ok = false;
            notes.push(format!("m={m} eps={}: total winding {} != {md}", r.eps, r.vortices.total_winding));
        }
        for c in &r.jumps.components {
            components += 1;
            if c.vortex_winding.rem_euclid(m as i32) != 0 {
                ok = false;
                notes.push(format!("m={m} eps={}: component carries {}", r.eps, c.vortex_winding));
            }
        }
    }
    ok &= converged == runs.len();
    let mut detail = format!("{converged}/{} runs converged, {components} jump components checked", runs.len());
    if !notes.is_empty() {
        detail.push_str(&format!("; {}", notes.join("; ")));
    }
    Ok((ok, detail))
}

fn jump_structure() -> Check {
    let runs = structure_runs()?;
    let mut ok = true;
    let (mut worst_ratio, mut worst_angle, mut fitted, mut junctions) = (0.0f64, 0.0f64, 0, 0);
    for r in runs.iter().filter(|r| r.outcome.converged) {
        let h = r.lattice.h();
        let rms = r.jumps.max_rms();
        worst_ratio = worst_ratio.max(rms / h);
        fitted += r.jumps.components.iter().flat_map(|c| &c.branches).filter(|b| b.rms.is_some()).count();
        junctions += r.jumps.components.iter().map(|c| c.junction_angles.len()).sum::<usize>();
        let dev = r.jumps.max_junction_deviation();
        worst_angle = worst_angle.max(dev);
        ok &= rms <= 2.0 * h && dev <= 10.0;
    }
    Ok((
        ok && fitted > 0,
        format!(
            "{fitted} branches fitted, worst RMS {worst_ratio:.3} h; {junctions} junctions, worst deviation {worst_angle:.2} deg"
        ),
    ))
}

fn splitting_inequality() -> Check {
    let runs = structure_runs()?;
    let mut r = rng(12);
    let (mut balls, mut worst) = (0, f64::INFINITY);
    let mut ok = true;
    for run in runs.iter().filter(|r| r.outcome.converged) {
        let radius = 0.2;
        let mut taken = 0;
        for _ in 0..200 {
            if taken == 3 {
                break;
            }
            let c = Complex64::from_polar(0.7 * r.gen::<f64>().sqrt(), r.gen_range(0.0..std::f64::consts::TAU));
            let clear = radius + 2.0 * run.eps;
            if run.vortices.vortices.iter().chain(&run.vortices.neutral_cores).any(|v| (v.center - c).norm() < clear) {
                continue;
            }
            match lm_split_diagnostic(&run.outcome.state, &run.lattice, &run.params, c, radius) {
                Ok(rep) => {
                    taken += 1;
                    balls += 1;
                    worst = worst.min((rep.lhs - rep.rhs()) / rep.lhs.max(1e-12));
                    ok &= rep.holds(0.05);
                }
                Err(fracvort_core::sim::SimError::WindingObstruction { .. }) => continue,
                Err(e) => return Err(e.into()),
            }
        }
    }
    Ok((ok && balls > 0, format!("{balls} vortex-free balls, min (lhs - rhs) / lhs = {worst:.2e}, slack 0.05")))
}

fn random_state(lat: &Lattice, seed: u64, max_modulus: f64) -> FieldState {
    let mut r = rng(seed);
    let mut s = FieldState::random(lat, seed);
    for k in 0..lat.len() {
        if lat.free[k] {
            s.u[k] *= max_modulus * r.gen::<f64>();
            s.psi[k] = r.gen();
        }
    }
    for (e, l) in s.labels.iter_mut().enumerate() {
        if !lat.locked[e] {
            *l = r.gen_range(0..2);
        }
    }
    s
}

fn directional_check(
    lat: &Lattice,
    state: &FieldState,
    seed: u64,
    energy: impl Fn(&FieldState) -> f64,
    grad_u: &[Complex64],
    grad_psi: Option<&[f64]>,
) -> f64 {
    let mut r = rng(seed);
    let dir_u: Vec<Complex64> = (0..lat.len())
        .map(|k| if lat.free[k] { Complex64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)) } else { Complex64::new(0.0, 0.0) })
        .collect();
    let dir_psi: Vec<f64> =
        (0..lat.len()).map(|k| if lat.free[k] && grad_psi.is_some() { r.gen_range(-1.0..1.0) } else { 0.0 }).collect();
    let t = 1e-6;
    let shifted = |sign: f64| {
        let mut s = state.clone();
        for k in 0..lat.len() {
            s.u[k] += dir_u[k] * (sign * t);
            s.psi[k] += dir_psi[k] * sign * t;
        }
        energy(&s)
    };
    let fd = (shifted(1.0) - shifted(-1.0)) / (2.0 * t);
    let mut an: f64 = grad_u.iter().zip(&dir_u).map(|(g, d)| g.re * d.re + g.im * d.im).sum();
    if let Some(gp) = grad_psi {
        an += gp.iter().zip(&dir_psi).map(|(g, d)| g * d).sum::<f64>();
    }
    (fd - an).abs() / an.abs().max(1e-8)
}

/// Counts of passed and attempted invariant checks.
#[derive(Debug, Default, Clone, Copy)]
struct Tally {
    passed: usize,
    total: usize,
}

impl Tally {
    fn check(&mut self, ok: bool) {
        self.total += 1;
        self.passed += ok as usize;
    }
}

fn invariant_suites() -> Check {
    let lat = Lattice::new(&DomainSpec::disk(0.1, 1))?;
    let mut grad = Tally::default();
    let mut trunc = Tally::default();
    let mut gauge = Tally::default();
    let mut winding = Tally::default();
    let mut quotient = Tally::default();
    for seed in 0..20u64 {
        for m in [2u32, 3] {
            let params = SimParams { eta: 0.5, ..SimParams::new(m, 0.25) };
            let mut s = random_state(&lat, seed, 1.0);
            s.labels.iter_mut().for_each(|l| *l %= m);

            let mut gu = vec![Complex64::new(0.0, 0.0); lat.len()];
            sharp_gradient(&s, &lat, &params, &mut gu);
            let rel = directional_check(&lat, &s, seed + 100, |x| energy_sharp(x, &lat, &params).total, &gu, None);
            grad.check(rel <= 1e-6);
            let mut gp = vec![0.0; lat.len()];
            diffuse_gradient(&s, &lat, &params, &mut gu, &mut gp);
            let rel =
                directional_check(&lat, &s, seed + 200, |x| energy_diffuse(x, &lat, &params).total, &gu, Some(&gp));
            grad.check(rel <= 1e-6);

            let big = random_state(&lat, seed + 300, 1.6);
            let mut cut = big.clone();
            truncate(&mut cut);
            trunc.check(energy_sharp(&cut, &lat, &params).total <= energy_sharp(&big, &lat, &params).total);
            trunc.check(energy_diffuse(&cut, &lat, &params).total <= energy_diffuse(&big, &lat, &params).total);

            let q = ModulusParams::<f64>::new(m).expect("m >= 2");
            let mut r = rng(seed + 400);
            let shift: Vec<u32> = (0..lat.len())
                .map(|k| {
                    let inner = lat.free[k] && lat.incident[k].iter().all(|i| !lat.locked[i.edge]);
                    if inner { r.gen_range(0..m) } else { 0 }
                })
                .collect();
            let mut g = s.clone();
            for k in 0..lat.len() {
                g.u[k] *= q.root(shift[k] as i64);
            }
            for (e, &[a, b]) in lat.grid.edges.iter().enumerate() {
                g.labels[e] = (s.labels[e] + shift[a] + m - shift[b]) % m;
            }
            let (e0, e1) = (energy_sharp(&s, &lat, &params), energy_sharp(&g, &lat, &params));
            let smooth0 = e0.quotient_dirichlet + e0.potential;
            let smooth1 = e1.quotient_dirichlet + e1.potential;
            gauge.check((smooth0 - smooth1).abs() <= 1e-12 * smooth0.max(1.0));

            // Plaquette windings of p(u) add up to the boundary winding.
            let centers = random_points(3, 0.6, 0.1, &mut r);
            let field: Vec<Complex64> = lat
                .grid
                .pos
                .iter()
                .map(|&x| centers.iter().map(|&c| (x - c) / (x - c).norm()).product::<Complex64>())
                .collect();
            let pu: Vec<Complex64> = field.iter().map(|&z| q.project_p(z)).collect();
            let cells: Option<i32> = lat
                .grid
                .cells
                .iter()
                .map(|c| plaquette_winding(c.corners.map(|k| pu[k]), 1e-12).ok())
                .sum();
            let boundary: Vec<Complex64> = lat.grid.boundary_loop.iter().map(|&k| pu[k]).collect();
            winding.check(cells.is_some() && cells == loop_winding(&boundary).ok());

            for _ in 0..5 {
                let z1 = Complex64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0));
                let z2 = Complex64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0));
                let z3 = Complex64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0));
                let d12 = q.quotient_distance(z1, z2);
                let k = r.gen_range(0..m as i64);
                quotient.check((d12 - q.quotient_distance(z2, z1)).abs() <= 1e-14);
                quotient.check((d12 - q.quotient_distance(z1, q.root(k) * z2)).abs() <= 1e-14);
                quotient.check(d12 <= q.quotient_distance(z1, z3) + q.quotient_distance(z3, z2) + 1e-14);
                let (c1, c2) = (q.project_cone(z1), q.project_cone(z2));
                quotient.check(c1.distance(&c2) <= d12 + 1e-12);
                quotient.check(c1.cone_defect(m) <= 1e-12 && (c1.norm() - z1.norm()).abs() <= 1e-12);
                quotient.check((q.project_p(z1).norm() - z1.norm()).abs() <= 1e-14);
            }
        }
    }
    let all = [grad, trunc, gauge, winding, quotient];
    let ok = all.iter().all(|t| t.passed == t.total);
    Ok((
        ok,
        format!(
            "gradient {}/{}, truncation {}/{}, gauge {}/{}, winding {}/{}, quotient {}/{}",
            grad.passed, grad.total, trunc.passed, trunc.total, gauge.passed, gauge.total, winding.passed,
            winding.total, quotient.passed, quotient.total
        ),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brute_force_matching_small_cases() {
        let pts = [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0), Complex64::new(0.0, 3.0), Complex64::new(1.0, 3.0)];
        assert!((brute_force_matching(&pts) - 2.0).abs() < 1e-15);
        assert_eq!(brute_force_matching(&[]), 0.0);
    }

    #[test]
    fn images_satisfy_the_boundary_condition() {
        let pts = [Complex64::new(0.2, -0.1), Complex64::new(-0.4, 0.3)];
        for t in 0..16 {
            let e = Complex64::from_polar(1.0, t as f64 * 0.4);
            let dr = 1e-6;
            let d = (disk_image_potential(&pts, e * (1.0 + dr)) - disk_image_potential(&pts, e * (1.0 - dr))) / (2.0 * dr);
            assert!((d - 2.0).abs() < 1e-6);
        }
    }

    #[test]
    fn fast_criteria_pass() {
        for id in [1, 2, 7] {
            let o = run_criterion(id);
            assert!(o.passed, "{}", o.line());
        }
    }
}

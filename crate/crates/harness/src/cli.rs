use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use fracvort_core::domain::DomainSpec;
use fracvort_core::limit::{
    core_energy_table, limit_energy, optimize_vortices, renormalized_energy, renormalized_energy_oracles,
    CoreEnergyOptions, SearchOptions, VortexConfig,
};
use fracvort_core::sim::{energy_expansion_fit, trace_csv, write_snapshot, SnapshotHeader};
use fracvort_core::steiner::configs::{nine_point_cluster, six_point_cluster};
use fracvort_core::steiner::{lambda_mu, min_perfect_matching, LambdaOptions};

use crate::acceptance::{criterion_name, run_suite, PRIMARY};
use crate::config::{ExperimentConfig, RunKind};
use crate::experiments::{random_points, read_points, rng, run_simulation, HarnessError, RunRequest};
use crate::output::{num, output_root, Csv, RunDir};

#[derive(Debug, Parser)]
#[command(name = "fracvort", version = crate::output::VERSION, about = "Fractional-degree vortex experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Minimize the lattice energy for every eps and seed in a config file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Renormalized and limit energies of a vortex configuration on the unit disc.
    Limit(LimitArgs),
    /// Minimal connection Lambda of a point set.
    Steiner {
        #[arg(long)]
        m: u32,
        #[arg(long)]
        points: PathBuf,
        /// Allow blocks with up to 9 terminals.
        #[arg(long)]
        large: bool,
        #[arg(long)]
        print_forest: bool,
    },
    /// Core energy table gamma(R).
    Gamma {
        #[arg(long)]
        m: u32,
        #[arg(long = "R", alias = "radii", value_delimiter = ',', default_value = "2,4,8,16")]
        radii: Vec<f64>,
    },
    /// Run acceptance criteria and print one line per criterion.
    Verify {
        #[arg(long, default_value = "primary")]
        suite: String,
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
    },
    /// Recompute the worked minimal-connection examples.
    Reproduce {
        /// Directory name under $FRACVORT_OUT.
        #[arg(long, default_value = "reproduce")]
        out: String,
    },
}

#[derive(Debug, Args)]
pub struct LimitArgs {
    #[arg(long)]
    pub m: u32,
    #[arg(long)]
    pub d: u32,
    /// File with `m d` vortex positions.
    #[arg(long, conflicts_with = "optimize", required_unless_present = "optimize")]
    pub points: Option<PathBuf>,
    /// Search for low-energy positions instead of reading them.
    #[arg(long)]
    pub optimize: bool,
    /// Radii for the finite-part oracle.
    #[arg(long, value_delimiter = ',')]
    pub oracle: Vec<f64>,
    #[arg(long, default_value_t = 0.01)]
    pub h: f64,
    /// Core energy per vortex added to the limit energy.
    #[arg(long, default_value_t = 0.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub large: bool,
}

/// Result of a successful command: 0 when all checks hold, 1 otherwise.
pub type Status = u8;

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<Status, HarnessError> {
    match cli.command {
        Command::Simulate { config } => simulate(&config, out),
        Command::Limit(a) => limit(&a, out),
        Command::Steiner { m, points, large, print_forest } => steiner(m, &points, large, print_forest, out),
        Command::Gamma { m, radii } => gamma(m, &radii, out),
        Command::Verify { suite, only } => verify(&suite, &only, out),
        Command::Reproduce { out: name } => reproduce(&name, out),
    }
}

fn w(out: &mut dyn Write, s: &str) -> Result<(), HarnessError> {
    out.write_all(s.as_bytes()).map_err(|source| HarnessError::Io { path: "<stdout>".into(), source })
}

fn simulate(path: &std::path::Path, out: &mut dyn Write) -> Result<Status, HarnessError> {
    let (cfg, text) = ExperimentConfig::load(path)?;
    let dir = RunDir::create(&output_root(), &cfg.run.output, Some(&text))?;
    let mut header: Vec<&str> = vec![
        "eps", "h", "eta", "seed", "sweeps", "converged", "quotient_dirichlet", "potential", "at_wall", "jump_length",
        "total", "vortices", "total_winding", "jump_components", "max_rms", "max_junction_deviation",
    ];
    if !cfg.run.deterministic {
        header.push("seconds");
    }
    let mut summary = Csv::new(header);
    let mut best: Vec<(f64, f64)> = Vec::new();
    for (i, &eps) in cfg.model.eps.iter().enumerate() {
        let h = cfg.h(eps);
        let spec = cfg.domain_spec(h);
        let mut lowest = f64::INFINITY;
        for &seed in &cfg.run.seeds {
            let req = RunRequest {
                kind: cfg.run.kind,
                init: cfg.run.init,
                m: cfg.model.m,
                eps,
                eta: cfg.eta(i),
                radius: cfg.run.radius,
                seed,
                max_sweeps: cfg.run.max_sweeps,
                large_steiner: cfg.run.large_steiner,
            };
            let start = Instant::now();
            let r = run_simulation(&spec, &req)?;
            let seconds = start.elapsed().as_secs_f64();
            let e = &r.energy;
            let mut row = vec![
                num(eps),
                num(h),
                num(req.eta),
                seed.to_string(),
                r.outcome.sweeps.to_string(),
                r.outcome.converged.to_string(),
                num(e.quotient_dirichlet),
                num(e.potential),
                num(e.at_wall),
                num(e.jump_length),
                num(e.total),
                r.vortices.count().to_string(),
                r.vortices.total_winding.to_string(),
                r.jumps.components.len().to_string(),
                num(r.jumps.max_rms()),
                num(r.jumps.max_junction_deviation()),
            ];
            if !cfg.run.deterministic {
                row.push(format!("{seconds:.3}"));
            }
            summary.push(row);
            lowest = lowest.min(e.total);
            let tag = format!("eps{i}_seed{seed}");
            dir.write(&format!("trace_{tag}.csv"), &trace_csv(&r.outcome.trace))?;
            let hdr = SnapshotHeader {
                shape: cfg.domain.shape.clone(),
                h,
                m: cfg.model.m,
                d: cfg.domain.d,
                eps,
                eta: if cfg.run.kind == RunKind::Diffuse { req.eta } else { 0.0 },
            };
            let name = format!("snapshot_{tag}.txt");
            let mut f = dir.create_file(&name)?;
            write_snapshot(&mut f, &hdr, &r.outcome.state, &r.lattice)
                .and_then(|_| f.flush())
                .map_err(|source| HarnessError::Io { path: dir.file(&name).display().to_string(), source })?;
            w(out, &format!("eps {eps}: seed {seed}, E = {:.6}, {} sweeps\n", e.total, r.outcome.sweeps))?;
        }
        best.push((eps, lowest));
    }
    dir.write("summary.csv", &summary.render())?;
    if best.len() >= 4 {
        let fit = energy_expansion_fit(&best)?;
        let mut c = Csv::new(["slope", "intercept", "residual"]);
        c.push([num(fit.slope), num(fit.intercept), num(fit.residual)]);
        dir.write("fit.csv", &c.render())?;
        w(out, &format!("log(1/eps) slope {:.4}\n", fit.slope))?;
    }
    w(out, &format!("wrote {}\n", dir.path.display()))?;
    Ok(0)
}

fn limit(a: &LimitArgs, out: &mut dyn Write) -> Result<Status, HarnessError> {
    let spec = DomainSpec::disk(a.h, a.d);
    let mut csv = Csv::new(["quantity", "value"]);
    let points = match &a.points {
        Some(p) => read_points(p)?,
        None => {
            let opts = SearchOptions { seed: a.seed, h: a.h, gamma: a.gamma, large: a.large, ..Default::default() };
            let res = optimize_vortices(&spec, a.m, a.d, &opts)?;
            csv.push(["search_value".to_string(), num(res.value)]);
            csv.push(["evaluations".to_string(), res.evaluations.to_string()]);
            res.points
        }
    };
    let mu = VortexConfig::new(points.clone(), a.m, a.d);
    let wval = renormalized_energy(&mu, &spec)?;
    let lam = lambda_mu(&points, a.m, LambdaOptions { large: a.large })?;
    let total = limit_energy(&mu, &spec, a.gamma, &lam.forest)?;
    for (k, p) in points.iter().enumerate() {
        csv.push([format!("x{k}"), num(p.re)]);
        csv.push([format!("y{k}"), num(p.im)]);
    }
    csv.push(["W".to_string(), num(wval)]);
    csv.push(["lambda".to_string(), num(lam.value)]);
    csv.push(["limit_energy".to_string(), num(total)]);
    if !a.oracle.is_empty() {
        for (r, v) in a.oracle.iter().zip(renormalized_energy_oracles(&mu, &spec, &a.oracle)?) {
            csv.push([format!("oracle_r{r}"), num(v)]);
        }
    }
    w(out, &csv.render())?;
    Ok(0)
}

fn steiner(m: u32, path: &std::path::Path, large: bool, print_forest: bool, out: &mut dyn Write) -> Result<Status, HarnessError> {
    let pts = read_points(path)?;
    let res = lambda_mu(&pts, m, LambdaOptions { large })?;
    let mut csv = Csv::new(["quantity", "value"]);
    csv.push(["lambda".to_string(), num(res.value)]);
    csv.push(["components".to_string(), res.forest.components().len().to_string()]);
    if m == 2 {
        csv.push(["matching".to_string(), num(min_perfect_matching(&pts))]);
    }
    w(out, &csv.render())?;
    if print_forest {
        w(out, &res.forest.to_text())?;
    }
    Ok(0)
}

fn gamma(m: u32, radii: &[f64], out: &mut dyn Write) -> Result<Status, HarnessError> {
    let table = core_energy_table(radii, m, &CoreEnergyOptions::default())?;
    let mut csv = Csv::new(["R", "gamma", "raw_energy", "gamma_1d", "gamma_2d", "monotone"]);
    let mut all = true;
    for (i, e) in table.entries.iter().enumerate() {
        let mono = i == 0 || e.gamma() <= table.entries[i - 1].gamma() + 1e-3;
        all &= mono;
        csv.push([num(e.radius), num(e.gamma()), num(e.raw_energy), num(e.gamma_1d), num(e.gamma_2d), mono.to_string()]);
    }
    w(out, &csv.render())?;
    Ok(if all { 0 } else { 1 })
}

fn verify(suite: &str, only: &[u8], out: &mut dyn Write) -> Result<Status, HarnessError> {
    if suite != "primary" {
        return Err(crate::config::ConfigError::Invalid { field: "suite", reason: format!("unknown suite {suite:?}") }.into());
    }
    if let Some(bad) = only.iter().find(|id| !PRIMARY.contains(id)) {
        return Err(crate::config::ConfigError::Invalid { field: "only", reason: format!("no criterion {bad}") }.into());
    }
    let ids: Vec<u8> = if only.is_empty() { PRIMARY.to_vec() } else { only.to_vec() };
    let mut io_err = None;
    let outcomes = run_suite(&ids, |o| {
        if let Err(e) = writeln!(out, "{}", o.line()).and_then(|_| out.flush()) {
            io_err.get_or_insert(e);
        }
    });
    if let Some(source) = io_err {
        return Err(HarnessError::Io { path: "<stdout>".into(), source });
    }
    let failed: Vec<String> = outcomes.iter().filter(|o| !o.passed).map(|o| format!("{} {}", o.id, criterion_name(o.id))).collect();
    w(out, &format!("{}/{} passed\n", outcomes.len() - failed.len(), outcomes.len()))?;
    Ok(if failed.is_empty() { 0 } else { 1 })
}

fn reproduce(name: &str, out: &mut dyn Write) -> Result<Status, HarnessError> {
    let dir = RunDir::create(&output_root(), name, None)?;
    let eps = 0.05;
    let cases = [
        ("six_point", 3u32, six_point_cluster(eps), Some(3.0 + 6.0 * eps), false),
        ("nine_point_delta_0.002", 3, nine_point_cluster(eps, 0.002), Some(3.0 + 4.0 * eps + 8.0 * 0.002), true),
        ("nine_point_delta_0.005", 3, nine_point_cluster(eps, 0.005), Some(3.0 + 4.0 * eps + 8.0 * 0.005), true),
        ("random_m2_d3", 2, random_points(6, 0.8, 0.05, &mut rng(7)), None, false),
    ];
    let mut csv = Csv::new(["case", "m", "points", "lambda", "components", "bound", "within_bound"]);
    for (label, m, pts, bound, large) in cases {
        let res = lambda_mu(&pts, m, LambdaOptions { large })?;
        let comps = res.forest.components().len();
        let within = bound.is_none_or(|b| res.value <= b + 1e-12);
        dir.write(&format!("{label}.forest"), &res.forest.to_text())?;
        csv.push([
            label.to_string(),
            m.to_string(),
            pts.len().to_string(),
            num(res.value),
            comps.to_string(),
            bound.map_or_else(|| "-".to_string(), num),
            within.to_string(),
        ]);
        let b = bound.map_or_else(String::new, |b| format!(", bound {b:.3}"));
        w(out, &format!("{label}: lambda {:.6}, {comps} component(s){b}\n", res.value))?;
    }
    dir.write("cases.csv", &csv.render())?;
    w(out, &format!("wrote {}\n", dir.path.display()))?;
    Ok(0)
}

/// Exit code for an error: 2 for bad input, 1 for failures while computing.
pub fn error_code(e: &HarnessError) -> u8 {
    match e {
        HarnessError::Config(_) | HarnessError::Points { .. } | HarnessError::Io { .. } => 2,
        _ => 1,
    }
}

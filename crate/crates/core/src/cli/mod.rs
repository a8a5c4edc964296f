//! Command-line front end. Every command reads a [`RunConfig`], applies
//! flag overrides, writes its outputs under `--out` with the effective
//! configuration as a `#` header, and maps failures to exit codes
//! (0 success, 2 configuration error, 3 numerical failure).

pub mod config;

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::analytic::{heston_put, mc_put, McConfig};
use crate::error::{Error, Result};
use crate::grid::{build_grid, Grid};
use crate::harness::{
    run_convergence, run_stability_map, write_convergence_csv, write_slope, write_stability_map_csv,
    write_surface_csv, ConvergenceStudy, MapConfig, StabilityMap,
};
use crate::model::{initial_condition, u_to_price};
use crate::solver::{probe, solve_pde, SolutionField};
use crate::stability::{stability_search_with, write_search_csv, Perturbation, Range, SearchBox, SearchReportRow};
use crate::stencil::{elliptic_weights, scheme_weights, Scheme};

pub use config::{Probe, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "hoc-heston", version, about = "Compact fourth-order finite differences for the Heston PDE")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// INI file with [model], [grid], [time] and [study] sections.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Override one configuration value, e.g. `--set grid.h=0.1` (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Output directory (study.out).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<String>,
    /// Random seed (study.seed).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads, 0 for automatic (study.threads).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Solve the PDE, report prices at the probes and write surface.csv.
    Price,
    /// Grid convergence study: convergence.csv and slope.txt.
    Converge,
    /// Error over mesh ratios and widths: stability_map.csv.
    StabilityMap,
    /// Search for the largest |G|^2 - 1: vn_report.csv.
    VnCheck,
    /// Fourier-integral prices at the spots: analytic.csv.
    Analytic,
    /// Monte Carlo prices at the spots: mc.csv.
    Mc,
    /// Stencil weights along y: weights.csv.
    DumpWeights,
}

/// Build the effective configuration from a parsed command line.
pub fn effective_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        cfg.merge_ini(&text)?;
    }
    for kv in &cli.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        cfg.set(k.trim(), v)?;
    }
    if let Some(o) = &cli.out {
        cfg.study.out = o.clone();
    }
    if let Some(s) = cli.seed {
        cfg.study.seed = s;
    }
    if let Some(t) = cli.threads {
        cfg.study.threads = t;
    }
    Ok(cfg)
}

/// Parse arguments, run, and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match effective_config(&cli).and_then(|cfg| execute(cli.command, &cfg)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    std::fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

/// Run one command with a finished configuration. Returns the exit code for
/// outcomes that are reported rather than raised (a failed check).
pub fn execute(command: Command, cfg: &RunConfig) -> Result<i32> {
    if cfg.study.threads > 0 {
        // Fails only if a pool already exists, in which case it is reused.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.study.threads).build_global();
    }
    let out = PathBuf::from(&cfg.study.out);
    let meta = cfg.emit();
    match command {
        Command::Price => price(cfg, &out, &meta),
        Command::Converge => converge(cfg, &out, &meta),
        Command::StabilityMap => stability_map(cfg, &out, &meta).map(|_| 0),
        Command::VnCheck => vn_check(cfg, &out, &meta),
        Command::Analytic => analytic(cfg, &out, &meta),
        Command::Mc => mc(cfg, &out, &meta),
        Command::DumpWeights => dump_weights(cfg, &out, &meta),
    }
}

/// Prices at the configured probes from a PDE solve.
pub fn price_probes(cfg: &RunConfig) -> Result<Vec<(Probe, f64)>> {
    let p = &cfg.model;
    p.validate()?;
    let grid = build_grid(&cfg.grid_spec())?;
    let sol = solve_pde(p, &grid, cfg.study.scheme, &cfg.time)?;
    read_probes(cfg, &grid, &sol.field)
}

fn read_probes(cfg: &RunConfig, grid: &Grid, field: &SolutionField) -> Result<Vec<(Probe, f64)>> {
    let p = &cfg.model;
    cfg.study
        .probes
        .iter()
        .map(|pr| {
            if !(pr.s > 0.0) || !(pr.sigma >= 0.0) {
                return Err(Error::Domain(format!("probe S = {}, sigma = {} is inadmissible", pr.s, pr.sigma)));
            }
            let x = (pr.s / p.strike).ln();
            let y = pr.sigma / p.v;
            // At expiry the payoff is exact; interpolating across the kink is not.
            let u = if grid.n_steps == 0 { initial_condition(x) } else { probe(grid, field, x, y)? };
            Ok((*pr, u_to_price(p, u, field.t)))
        })
        .collect()
}

fn price(cfg: &RunConfig, out: &Path, meta: &str) -> Result<i32> {
    let p = &cfg.model;
    p.validate()?;
    let grid = build_grid(&cfg.grid_spec())?;
    let sol = solve_pde(p, &grid, cfg.study.scheme, &cfg.time)?;
    // `;` lines are INI comments, so the header still parses as a configuration.
    let meta = format!(
        "{meta}; steps = {}, t = {}, max relative residual = {:e}\n",
        grid.n_steps,
        sol.field.t,
        sol.max_residual()
    );
    write_surface_csv(create(out, "surface.csv")?, &meta, p, &grid, &sol.field)?;
    for (pr, v) in read_probes(cfg, &grid, &sol.field)? {
        println!("S = {} sigma = {} V = {v}", pr.s, pr.sigma);
    }
    Ok(0)
}

/// Convergence study described by the configuration.
pub fn convergence_study(cfg: &RunConfig) -> ConvergenceStudy {
    ConvergenceStudy {
        model: cfg.model,
        grid: cfg.grid_spec(),
        ladder: cfg.study.ladder.clone(),
        scheme: cfg.study.scheme,
        reference: cfg.study.reference,
        region: cfg.study.region,
        time: cfg.time,
    }
}

fn converge(cfg: &RunConfig, out: &Path, meta: &str) -> Result<i32> {
    let report = run_convergence(&convergence_study(cfg))?;
    write_convergence_csv(create(out, "convergence.csv")?, meta, &report.records)?;
    for r in &report.records {
        println!("h = {} k = {} eps2 = {:e} epsInf = {:e}", r.h, r.k, r.eps2, r.eps_inf);
    }
    if let Some(f) = &report.failure {
        eprintln!("error: {f}");
        return Ok(report.failure_code.max(3));
    }
    match report.slope {
        Some(fit) => {
            write_slope(create(out, "slope.txt")?, meta, &fit)?;
            println!("slope m = {} C = {}", fit.m, fit.c);
            Ok(0)
        }
        None => Err(Error::InsufficientData("fewer than three usable levels for the slope fit".into())),
    }
}

/// Map configuration described by the run configuration.
pub fn map_config(cfg: &RunConfig) -> MapConfig {
    MapConfig {
        model: cfg.model,
        grid: cfg.grid_spec(),
        ratios: cfg.study.ratios.clone(),
        hs: cfg.study.hs.clone(),
        scheme: cfg.study.scheme,
        time: cfg.time,
        reference_h: cfg.study.reference_h,
        reference_ratio: cfg.study.reference_ratio,
        region: cfg.study.region,
    }
}

fn stability_map(cfg: &RunConfig, out: &Path, meta: &str) -> Result<StabilityMap> {
    let map = run_stability_map(&map_config(cfg))?;
    write_stability_map_csv(create(out, "stability_map.csv")?, meta, &map)?;
    for (h, spread) in map.spread_by_h() {
        match spread {
            Some(s) => println!("h = {h} max/min eps2 = {s}"),
            None => println!("h = {h} max/min eps2 = n/a"),
        }
    }
    for (flag, n) in map.flag_counts() {
        println!("{flag}: {n}");
    }
    Ok(map)
}

/// Search box used by `vn-check` for a given correlation.
pub fn vn_box(rho: f64) -> SearchBox {
    SearchBox { rho: Range::fixed(rho), r: Range::fixed(0.0), mu: Range::fixed(0.5), ..SearchBox::default() }
}

fn vn_check(cfg: &RunConfig, out: &Path, meta: &str) -> Result<i32> {
    let s = &cfg.study;
    let pert = Perturbation { beta0_rel: s.vn_beta0_perturbation };
    let mut rows = Vec::new();
    let mut pass = true;
    let theorem = stability_search_with(&vn_box(0.0), s.vn_samples, s.seed, &pert)?;
    let ok = theorem.max_value <= s.vn_tol;
    pass &= ok;
    println!("{} theorem case rho = 0: max |G|^2-1 = {:e} (tol {:e})", verdict(ok), theorem.max_value, s.vn_tol);
    rows.push(SearchReportRow { label: "theorem".into(), result: theorem });
    for &rho in &s.vn_rhos {
        let res = stability_search_with(&vn_box(rho), s.vn_samples, s.seed, &pert)?;
        let ok = res.max_value <= s.vn_sweep_tol;
        pass &= ok;
        println!("{} sweep rho = {rho}: max |G|^2-1 = {:e} (tol {:e})", verdict(ok), res.max_value, s.vn_sweep_tol);
        rows.push(SearchReportRow { label: format!("sweep rho={rho}"), result: res });
    }
    let mut w = create(out, "vn_report.csv")?;
    for line in meta.lines() {
        use std::io::Write;
        writeln!(w, "# {line}")?;
    }
    write_search_csv(w, &rows)?;
    Ok(if pass { 0 } else { 3 })
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn csv_with_meta(out: &Path, name: &str, meta: &str) -> Result<csv::Writer<BufWriter<File>>> {
    use std::io::Write;
    let mut w = create(out, name)?;
    for line in meta.lines() {
        writeln!(w, "# {line}")?;
    }
    Ok(csv::Writer::from_writer(w))
}

fn analytic(cfg: &RunConfig, out: &Path, meta: &str) -> Result<i32> {
    let mut w = csv_with_meta(out, "analytic.csv", meta)?;
    w.write_record(["S", "sigma", "price"])?;
    for &s in &cfg.study.spots {
        let v = heston_put(&cfg.model, s, cfg.study.sigma, 0.0)?;
        println!("S = {s} sigma = {} V = {v}", cfg.study.sigma);
        w.write_record([s.to_string(), cfg.study.sigma.to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(0)
}

fn mc(cfg: &RunConfig, out: &Path, meta: &str) -> Result<i32> {
    let mcc = McConfig { n_paths: cfg.study.mc_paths, n_steps: cfg.study.mc_steps, seed: cfg.study.seed };
    let mut w = csv_with_meta(out, "mc.csv", meta)?;
    w.write_record(["S", "sigma", "price", "stderr"])?;
    for &s in &cfg.study.spots {
        let (v, se) = mc_put(&cfg.model, s, cfg.study.sigma, &mcc)?;
        println!("S = {s} sigma = {} V = {v} +- {se}", cfg.study.sigma);
        w.write_record([s.to_string(), cfg.study.sigma.to_string(), v.to_string(), se.to_string()])?;
    }
    w.flush()?;
    Ok(0)
}

fn dump_weights(cfg: &RunConfig, out: &Path, meta: &str) -> Result<i32> {
    let c = cfg.model.pde_coeffs()?;
    let grid = build_grid(&cfg.grid_spec())?;
    let mut w = csv_with_meta(out, "weights.csv", meta)?;
    w.write_record(["j", "y", "l", "alpha", "gamma", "beta", "zeta"])?;
    for (j, y) in grid.ys().into_iter().enumerate() {
        let (alpha, gamma) = match cfg.study.scheme {
            Scheme::Hoc => {
                let e = elliptic_weights(&c, y, grid.h())?;
                (e.alpha, e.gamma)
            }
            Scheme::Central => {
                let mut g = [0.0; 9];
                g[0] = 1.0;
                (crate::stencil::central_weights(&c, y, grid.h())?, g)
            }
        };
        let pw = scheme_weights(cfg.study.scheme, &c, y, grid.h(), grid.k, cfg.time.mu)?;
        for l in 0..9 {
            w.write_record([
                j.to_string(),
                y.to_string(),
                l.to_string(),
                alpha[l].to_string(),
                gamma[l].to_string(),
                pw.beta[l].to_string(),
                pw.zeta[l].to_string(),
            ])?;
        }
    }
    w.flush()?;
    println!("wrote {} rows to {}", 9 * grid.ny(), out.join("weights.csv").display());
    Ok(0)
}

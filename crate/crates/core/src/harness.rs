//! Experiment drivers: grid convergence studies with slope fits, stability
//! maps over `(k/h^2, h)`, and the CSV outputs of both.
//!
//! Errors are measured on a grid's own interior nodes against a finer
//! reference solution. When the coarse node is also a reference node the
//! value is taken directly; when it falls halfway between two reference
//! nodes (shifted grids) it is read off with the eight-point midpoint rule,
//! whose error is far below the discretisation error being measured.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;

use crate::analytic::heston_put;
use crate::error::{Error, Result};
use crate::grid::{build_grid, Grid, GridSpec};
use crate::model::{price_to_u, ModelParams};
use crate::solver::{solve_pde, SolutionField, TimeLoopConfig};
use crate::stencil::Scheme;

/// Weights of the eight-point midpoint rule on nodes `-3.5h .. 3.5h`.
pub const MIDPOINT_WEIGHTS: [f64; 8] = [
    -5.0 / 2048.0,
    49.0 / 2048.0,
    -245.0 / 2048.0,
    1225.0 / 2048.0,
    1225.0 / 2048.0,
    -245.0 / 2048.0,
    49.0 / 2048.0,
    -5.0 / 2048.0,
];

const INDEX_TOL: f64 = 1e-8;

/// How a coarse node is read off the reference grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReadOff {
    /// The node is reference column `ii`.
    Node(usize),
    /// The node is halfway between reference columns `ii` and `ii + 1`.
    Midpoint(usize),
}

/// Locate coarse column `ii` on the reference grid.
pub fn locate_x(coarse: &Grid, reference: &Grid, ii: usize) -> Result<ReadOff> {
    let q = (coarse.x(ii) - reference.x(0)) / reference.h();
    let n = q.round();
    if (q - n).abs() <= INDEX_TOL && n >= 0.0 {
        return Ok(ReadOff::Node(n as usize));
    }
    let f = q.floor();
    if (q - f - 0.5).abs() <= INDEX_TOL && f >= 0.0 {
        return Ok(ReadOff::Midpoint(f as usize));
    }
    Err(Error::NonNested(format!(
        "x = {} is neither a node nor a midpoint of the reference grid (h = {})",
        coarse.x(ii),
        reference.h()
    )))
}

/// Reference row of coarse row `j`.
pub fn locate_y(coarse: &Grid, reference: &Grid, j: usize) -> Result<usize> {
    let q = (coarse.y(j) - reference.y(0)) / reference.h();
    let n = q.round();
    if (q - n).abs() <= INDEX_TOL && n >= 0.0 && (n as usize) < reference.ny() {
        Ok(n as usize)
    } else {
        Err(Error::NonNested(format!("y = {} is not a reference node", coarse.y(j))))
    }
}

/// Subset of nodes on which errors are measured.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum ErrorRegion {
    /// All interior nodes.
    #[default]
    Interior,
    /// Interior nodes inside a window in computational coordinates.
    Window { x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64 },
}

impl ErrorRegion {
    fn contains(&self, x: f64, y: f64) -> bool {
        match *self {
            ErrorRegion::Interior => true,
            ErrorRegion::Window { x_lo, x_hi, y_lo, y_hi } => (x_lo..=x_hi).contains(&x) && (y_lo..=y_hi).contains(&y),
        }
    }

    pub fn describe(&self) -> String {
        match *self {
            ErrorRegion::Interior => "interior".into(),
            ErrorRegion::Window { x_lo, x_hi, y_lo, y_hi } => format!("window:{x_lo}:{x_hi}:{y_lo}:{y_hi}"),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        if s == "interior" {
            return Ok(ErrorRegion::Interior);
        }
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() == 5 && parts[0] == "window" {
            let v: std::result::Result<Vec<f64>, _> = parts[1..].iter().map(|p| p.parse::<f64>()).collect();
            if let Ok(v) = v {
                return Ok(ErrorRegion::Window { x_lo: v[0], x_hi: v[1], y_lo: v[2], y_hi: v[3] });
            }
        }
        Err(Error::Config(format!("unknown error region '{s}' (use interior or window:xlo:xhi:ylo:yhi)")))
    }
}

/// Coarse nodes with their reference values.
#[derive(Debug, Clone, PartialEq)]
pub struct CommonNodes {
    /// Flat indices into the coarse field.
    pub nodes: Vec<usize>,
    pub reference: Vec<f64>,
    /// Interior nodes skipped because the midpoint rule did not fit.
    pub skipped: usize,
}

/// Reference values at the coarse grid's interior nodes.
pub fn common_nodes(coarse: &Grid, reference: &Grid, ref_field: &SolutionField, region: ErrorRegion) -> Result<CommonNodes> {
    if ref_field.nx != reference.nx() || ref_field.ny != reference.ny() {
        return Err(Error::Index("reference field does not match its grid".into()));
    }
    let mut out = CommonNodes { nodes: Vec::new(), reference: Vec::new(), skipped: 0 };
    let columns: Vec<ReadOff> = (0..coarse.nx()).map(|ii| locate_x(coarse, reference, ii)).collect::<Result<_>>()?;
    for j in 1..coarse.m {
        let jr = locate_y(coarse, reference, j)?;
        for ii in 1..coarse.nx() - 1 {
            if !region.contains(coarse.x(ii), coarse.y(j)) {
                continue;
            }
            let value = match columns[ii] {
                ReadOff::Node(c) => Some(ref_field.at(c, jr)),
                ReadOff::Midpoint(c) if c >= 3 && c + 4 < reference.nx() => {
                    Some((0..8).map(|t| MIDPOINT_WEIGHTS[t] * ref_field.at(c + t - 3, jr)).sum())
                }
                ReadOff::Midpoint(_) => None,
            };
            match value {
                Some(v) => {
                    out.nodes.push(coarse.idx(ii, j));
                    out.reference.push(v);
                }
                None => out.skipped += 1,
            }
        }
    }
    Ok(out)
}

/// Discrete error norms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorNorms {
    /// `sqrt(h^2 sum e^2)`.
    pub eps2: f64,
    pub eps_inf: f64,
    pub nodes: usize,
}

/// Norms of a list of nodal errors on a grid of width `h`.
pub fn norms_of(h: f64, errors: &[f64]) -> ErrorNorms {
    let sum: f64 = errors.iter().map(|e| e * e).sum();
    ErrorNorms {
        eps2: (h * h * sum).sqrt(),
        eps_inf: errors.iter().fold(0.0, |a, e| a.max(e.abs())),
        nodes: errors.len(),
    }
}

pub fn error_norms(h: f64, u: &SolutionField, common: &CommonNodes) -> Result<ErrorNorms> {
    if common.nodes.iter().any(|&n| n >= u.values.len()) {
        return Err(Error::Index("common node outside the field".into()));
    }
    let errs: Vec<f64> = common.nodes.iter().zip(&common.reference).map(|(&n, r)| u.values[n] - r).collect();
    Ok(norms_of(h, &errs))
}

/// Least-squares fit `ln eps = ln C + m ln h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub m: f64,
    pub c: f64,
    pub used: usize,
}

pub fn fit_slope(records: &[(f64, f64)]) -> Result<SlopeFit> {
    let mut pts = Vec::new();
    for &(h, e) in records {
        if !(h > 0.0) || !h.is_finite() || !e.is_finite() || e < 0.0 {
            return Err(Error::InvalidParameter(format!("bad record (h = {h}, eps = {e})")));
        }
        if e == 0.0 {
            log::warn!("dropping zero error at h = {h} from the slope fit");
            continue;
        }
        pts.push((h.ln(), e.ln()));
    }
    if pts.len() < 3 {
        return Err(Error::InsufficientData(format!("slope fit needs 3 positive errors, got {}", pts.len())));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InsufficientData("slope fit needs at least two distinct h".into()));
    }
    let m = sxy / sxx;
    Ok(SlopeFit { m, c: (my - m * mx).exp(), used: pts.len() })
}

/// What the errors are measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReferenceMode {
    /// Solution on a grid of half the finest width with the same mesh ratio.
    #[default]
    NestedFine,
    /// The Fourier-integral price at every node.
    Analytic,
}

impl std::str::FromStr for ReferenceMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nested-fine" => Ok(ReferenceMode::NestedFine),
            "analytic" => Ok(ReferenceMode::Analytic),
            _ => Err(Error::Config(format!("unknown reference mode '{s}' (nested-fine | analytic)"))),
        }
    }
}

impl std::fmt::Display for ReferenceMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ReferenceMode::NestedFine => "nested-fine",
            ReferenceMode::Analytic => "analytic",
        })
    }
}

/// A grid convergence study at fixed mesh ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudy {
    pub model: ModelParams,
    /// Geometry, mesh ratio and offset; `h` is replaced by each ladder value.
    pub grid: GridSpec,
    /// Strictly decreasing mesh widths.
    pub ladder: Vec<f64>,
    pub scheme: Scheme,
    pub reference: ReferenceMode,
    pub region: ErrorRegion,
    pub time: TimeLoopConfig,
}

impl ConvergenceStudy {
    pub fn validate(&self) -> Result<()> {
        if self.ladder.is_empty() || self.ladder.iter().any(|h| !(*h > 0.0)) {
            return Err(Error::Config("ladder must be non-empty with positive entries".into()));
        }
        if self.ladder.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::Config("ladder must be strictly decreasing".into()));
        }
        self.model.validate()?;
        self.time.validate()
    }

    fn spec(&self, h: f64) -> GridSpec {
        GridSpec { h, horizon: self.model.maturity, ..self.grid }
    }
}

/// One level of a convergence study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRecord {
    pub h: f64,
    pub k: f64,
    pub eps2: f64,
    pub eps_inf: f64,
    pub nodes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub records: Vec<ErrorRecord>,
    /// Fit of `eps2`; `None` when fewer than three levels succeeded.
    pub slope: Option<SlopeFit>,
    pub slope_inf: Option<SlopeFit>,
    /// Reference mesh width in nested mode.
    pub reference_h: Option<f64>,
    /// First failure, if any; records hold the levels completed before it.
    pub failure: Option<String>,
    pub failure_code: i32,
}

impl ConvergenceReport {
    /// The report as a result, failing if any level failed.
    pub fn into_result(self) -> Result<Self> {
        match &self.failure {
            Some(f) => Err(Error::Inconsistent(format!("convergence study aborted: {f}"))),
            None => Ok(self),
        }
    }
}

/// Nodal values of the analytic price at the grid's interior nodes.
pub fn analytic_common_nodes(p: &ModelParams, grid: &Grid, region: ErrorRegion) -> Result<CommonNodes> {
    let mut coords = Vec::new();
    for j in 1..grid.m {
        for ii in 1..grid.nx() - 1 {
            if region.contains(grid.x(ii), grid.y(j)) {
                coords.push((ii, j));
            }
        }
    }
    let reference: Vec<f64> = coords
        .par_iter()
        .map(|&(ii, j)| {
            let s = p.strike * grid.x(ii).exp();
            let price = heston_put(p, s, p.v * grid.y(j), 0.0)?;
            Ok(price_to_u(p, price, p.maturity))
        })
        .collect::<Result<_>>()?;
    Ok(CommonNodes { nodes: coords.iter().map(|&(ii, j)| grid.idx(ii, j)).collect(), reference, skipped: 0 })
}

pub fn run_convergence(study: &ConvergenceStudy) -> Result<ConvergenceReport> {
    study.validate()?;
    let grids: Vec<Grid> = study.ladder.iter().map(|&h| build_grid(&study.spec(h))).collect::<Result<_>>()?;
    let finest = *study.ladder.last().unwrap();
    let (reference, reference_h) = match study.reference {
        ReferenceMode::NestedFine => {
            let g = build_grid(&study.spec(finest / 2.0))?;
            (Some(g), Some(finest / 2.0))
        }
        ReferenceMode::Analytic => (None, None),
    };
    // Solve every level and the reference independently; results are
    // collected in ladder order.
    let mut all: Vec<&Grid> = grids.iter().collect();
    if let Some(g) = &reference {
        all.push(g);
    }
    let solved: Vec<Result<SolutionField>> = all
        .par_iter()
        .map(|g| solve_pde(&study.model, g, study.scheme, &study.time).map(|s| s.field))
        .collect();
    let mut solved = solved.into_iter();
    let levels: Vec<Result<SolutionField>> = solved.by_ref().take(grids.len()).collect();
    let mut report = ConvergenceReport {
        records: Vec::new(),
        slope: None,
        slope_inf: None,
        reference_h,
        failure: None,
        failure_code: 0,
    };
    let ref_field = match solved.next() {
        Some(Ok(f)) => Some(f),
        Some(Err(e)) => {
            report.failure_code = e.exit_code();
            report.failure = Some(format!("reference solve failed: {e}"));
            return Ok(report);
        }
        None => None,
    };
    for (g, field) in grids.iter().zip(levels) {
        let outcome = field.and_then(|f| {
            let common = match (&reference, &ref_field) {
                (Some(rg), Some(rf)) => common_nodes(g, rg, rf, study.region)?,
                _ => analytic_common_nodes(&study.model, g, study.region)?,
            };
            error_norms(g.h(), &f, &common)
        });
        match outcome {
            Ok(n) => report.records.push(ErrorRecord { h: g.h(), k: g.k, eps2: n.eps2, eps_inf: n.eps_inf, nodes: n.nodes }),
            Err(e) => {
                report.failure_code = e.exit_code();
                report.failure = Some(format!("level h = {} failed: {e}", g.h()));
                return Ok(report);
            }
        }
    }
    let pts2: Vec<(f64, f64)> = report.records.iter().map(|r| (r.h, r.eps2)).collect();
    let pts_inf: Vec<(f64, f64)> = report.records.iter().map(|r| (r.h, r.eps_inf)).collect();
    report.slope = fit_slope(&pts2).ok();
    report.slope_inf = fit_slope(&pts_inf).ok();
    Ok(report)
}

/// Status of a stability-map cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CellFlag {
    Ok,
    /// The linear solver or time loop failed.
    SolverFailure,
    NonFinite,
    /// Too many sign changes of the error along x compared with the smallest
    /// mesh ratio at the same h.
    Oscillation,
    /// One step of the requested ratio is longer than the horizon.
    RatioUnrealizable,
}

impl std::fmt::Display for CellFlag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CellFlag::Ok => "ok",
            CellFlag::SolverFailure => "solver-failure",
            CellFlag::NonFinite => "non-finite",
            CellFlag::Oscillation => "oscillation",
            CellFlag::RatioUnrealizable => "ratio-unrealizable",
        })
    }
}

impl std::str::FromStr for CellFlag {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "ok" => CellFlag::Ok,
            "solver-failure" => CellFlag::SolverFailure,
            "non-finite" => CellFlag::NonFinite,
            "oscillation" => CellFlag::Oscillation,
            "ratio-unrealizable" => CellFlag::RatioUnrealizable,
            _ => return Err(Error::Config(format!("unknown cell flag '{s}'"))),
        })
    }
}

/// Sweep of the mesh ratio and mesh width.
#[derive(Debug, Clone, PartialEq)]
pub struct MapConfig {
    pub model: ModelParams,
    pub grid: GridSpec,
    pub ratios: Vec<f64>,
    pub hs: Vec<f64>,
    pub scheme: Scheme,
    pub time: TimeLoopConfig,
    /// Reference width; defaults to half the smallest `h`.
    pub reference_h: Option<f64>,
    /// Mesh ratio of the reference run.
    pub reference_ratio: f64,
    pub region: ErrorRegion,
}

impl MapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ratios.is_empty() || self.hs.is_empty() {
            return Err(Error::Config("stability map needs ratios and h values".into()));
        }
        if self.ratios.iter().chain(&self.hs).any(|v| !(*v > 0.0)) || !(self.reference_ratio > 0.0) {
            return Err(Error::Config("ratios and h values must be > 0".into()));
        }
        self.model.validate()?;
        self.time.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapCell {
    pub ratio: f64,
    pub h: f64,
    /// Realised `k / h^2`.
    pub realised_ratio: f64,
    pub eps2: f64,
    pub sign_changes: usize,
    pub flag: CellFlag,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityMap {
    pub ratios: Vec<f64>,
    pub hs: Vec<f64>,
    /// Cells in `hs`-major order: `cells[ih * ratios.len() + ir]`.
    pub cells: Vec<MapCell>,
    pub reference_h: f64,
}

impl StabilityMap {
    pub fn cell(&self, ir: usize, ih: usize) -> &MapCell {
        &self.cells[ih * self.ratios.len() + ir]
    }

    /// `max / min` of `eps2` over unflagged cells at each `h`; `None` when
    /// fewer than two cells are usable.
    pub fn spread_by_h(&self) -> Vec<(f64, Option<f64>)> {
        self.hs
            .iter()
            .enumerate()
            .map(|(ih, &h)| {
                let v: Vec<f64> = (0..self.ratios.len())
                    .map(|ir| self.cell(ir, ih))
                    .filter(|c| c.flag == CellFlag::Ok)
                    .map(|c| c.eps2)
                    .collect();
                let spread = if v.len() < 2 {
                    None
                } else {
                    let hi = v.iter().copied().fold(f64::MIN, f64::max);
                    let lo = v.iter().copied().fold(f64::MAX, f64::min);
                    Some(hi / lo)
                };
                (h, spread)
            })
            .collect()
    }

    pub fn flag_counts(&self) -> BTreeMap<CellFlag, usize> {
        let mut m = BTreeMap::new();
        for c in &self.cells {
            *m.entry(c.flag).or_insert(0) += 1;
        }
        m
    }
}

/// Errors below this fraction of the largest |e| carry no sign.
pub const SIGN_NOISE_FLOOR: f64 = 1e-3;

/// Largest count of sign changes of the error along x over the rows. Entries
/// smaller than [`SIGN_NOISE_FLOOR`] times the largest error are skipped, so
/// round-off in the far field does not count as oscillation.
pub fn max_sign_changes(grid: &Grid, u: &SolutionField, common: &CommonNodes) -> usize {
    let mut rows: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
    let mut emax = 0.0f64;
    for (&n, r) in common.nodes.iter().zip(&common.reference) {
        let (ii, j) = grid.ij(n);
        let e = u.values[n] - r;
        emax = emax.max(e.abs());
        rows.entry(j).or_default().push((ii, e));
    }
    let floor = SIGN_NOISE_FLOOR * emax;
    rows.values_mut()
        .map(|row| {
            row.sort_by_key(|e| e.0);
            let signs: Vec<f64> = row.iter().map(|e| e.1).filter(|e| e.abs() > floor).collect();
            signs.windows(2).filter(|w| w[0].signum() != w[1].signum()).count()
        })
        .max()
        .unwrap_or(0)
}

pub fn run_stability_map(cfg: &MapConfig) -> Result<StabilityMap> {
    cfg.validate()?;
    let h_min = cfg.hs.iter().copied().fold(f64::MAX, f64::min);
    let reference_h = cfg.reference_h.unwrap_or(h_min / 2.0);
    let spec = |h: f64, ratio: f64| GridSpec { h, mesh_ratio: ratio, horizon: cfg.model.maturity, ..cfg.grid };
    let ref_grid = build_grid(&spec(reference_h, cfg.reference_ratio))?;
    let ref_field = solve_pde(&cfg.model, &ref_grid, cfg.scheme, &cfg.time)?.field;
    let jobs: Vec<(usize, usize)> = (0..cfg.hs.len()).flat_map(|ih| (0..cfg.ratios.len()).map(move |ir| (ih, ir))).collect();
    let mut cells: Vec<MapCell> = jobs
        .par_iter()
        .map(|&(ih, ir)| {
            let (h, ratio) = (cfg.hs[ih], cfg.ratios[ir]);
            let mut cell = MapCell { ratio, h, realised_ratio: f64::NAN, eps2: f64::NAN, sign_changes: 0, flag: CellFlag::Ok };
            let grid = build_grid(&spec(h, ratio))?;
            cell.realised_ratio = grid.mesh_ratio();
            if !grid.ratio_is_realisable() {
                cell.flag = CellFlag::RatioUnrealizable;
                return Ok(cell);
            }
            let field = match solve_pde(&cfg.model, &grid, cfg.scheme, &cfg.time) {
                Ok(s) => s.field,
                Err(e) => {
                    log::warn!("map cell (ratio {ratio}, h {h}) failed: {e}");
                    cell.flag = CellFlag::SolverFailure;
                    return Ok(cell);
                }
            };
            let common = common_nodes(&grid, &ref_grid, &ref_field, cfg.region)?;
            let n = error_norms(h, &field, &common)?;
            cell.eps2 = n.eps2;
            cell.sign_changes = max_sign_changes(&grid, &field, &common);
            if !n.eps2.is_finite() || field.values.iter().any(|v| !v.is_finite()) {
                cell.flag = CellFlag::NonFinite;
            }
            Ok(cell)
        })
        .collect::<Result<_>>()?;
    // Oscillation: compare with the smallest-step usable run at the same h.
    let nr = cfg.ratios.len();
    for ih in 0..cfg.hs.len() {
        let finest = cells[ih * nr..(ih + 1) * nr]
            .iter()
            .filter(|c| c.flag == CellFlag::Ok)
            .min_by(|a, b| a.ratio.total_cmp(&b.ratio))
            .map(|c| c.sign_changes);
        if let Some(base) = finest {
            let limit = 2 * base.max(1);
            for c in &mut cells[ih * nr..(ih + 1) * nr] {
                if c.flag == CellFlag::Ok && c.sign_changes > limit {
                    c.flag = CellFlag::Oscillation;
                }
            }
        }
    }
    Ok(StabilityMap { ratios: cfg.ratios.clone(), hs: cfg.hs.clone(), cells, reference_h })
}

fn write_metadata<W: Write>(out: &mut W, metadata: &str) -> Result<()> {
    for line in metadata.lines() {
        if line.is_empty() {
            writeln!(out, "#")?;
        } else {
            writeln!(out, "# {line}")?;
        }
    }
    Ok(())
}

/// Strip the `# ` prefix from the metadata header of an output file.
pub fn read_metadata(text: &str) -> String {
    let mut out = String::new();
    for line in text.lines() {
        match line.strip_prefix('#') {
            Some(rest) => {
                out.push_str(rest.strip_prefix(' ').unwrap_or(rest));
                out.push('\n');
            }
            None => break,
        }
    }
    out
}

/// `convergence.csv`: `h, k, eps2, epsInf`.
pub fn write_convergence_csv<W: Write>(mut out: W, metadata: &str, records: &[ErrorRecord]) -> Result<()> {
    write_metadata(&mut out, metadata)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["h", "k", "eps2", "epsInf"])?;
    for r in records {
        w.write_record([r.h.to_string(), r.k.to_string(), r.eps2.to_string(), r.eps_inf.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// `slope.txt`: the fitted `m` and `C`.
pub fn write_slope<W: Write>(mut out: W, metadata: &str, fit: &SlopeFit) -> Result<()> {
    write_metadata(&mut out, metadata)?;
    writeln!(out, "m = {}", fit.m)?;
    writeln!(out, "C = {}", fit.c)?;
    Ok(())
}

/// `stability_map.csv`: `ratio, h, eps2, flag`.
pub fn write_stability_map_csv<W: Write>(mut out: W, metadata: &str, map: &StabilityMap) -> Result<()> {
    write_metadata(&mut out, metadata)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["ratio", "h", "eps2", "flag"])?;
    for c in &map.cells {
        w.write_record([c.ratio.to_string(), c.h.to_string(), c.eps2.to_string(), c.flag.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// `surface.csv`: every node in computational and financial coordinates.
pub fn write_surface_csv<W: Write>(mut out: W, metadata: &str, p: &ModelParams, grid: &Grid, field: &SolutionField) -> Result<()> {
    write_metadata(&mut out, metadata)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["i", "j", "x", "y", "sigma", "S", "u", "V"])?;
    for j in 0..grid.ny() {
        for ii in 0..grid.nx() {
            let (x, y) = (grid.x(ii), grid.y(j));
            let u = field.at(ii, j);
            let price = crate::model::u_to_price(p, u, field.t);
            w.write_record([
                ii.to_string(),
                j.to_string(),
                x.to_string(),
                y.to_string(),
                (p.v * y).to_string(),
                (p.strike * x.exp()).to_string(),
                u.to_string(),
                price.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

//! Run configuration: INI sections `[model]`, `[grid]`, `[time]` and
//! `[study]`. Unknown sections or keys are errors, and every run writes the
//! effective configuration back out so that it can be reproduced.

use ini::Ini;

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::harness::{ErrorRegion, ReferenceMode};
use crate::model::ModelParams;
use crate::solver::{SolverPolicy, TimeLoopConfig};
use crate::stencil::Scheme;

/// A spot/variance pair at which prices are reported.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Probe {
    pub s: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub scheme: Scheme,
    pub ladder: Vec<f64>,
    pub reference: ReferenceMode,
    pub region: ErrorRegion,
    pub ratios: Vec<f64>,
    pub hs: Vec<f64>,
    /// `None` means half the smallest map width.
    pub reference_h: Option<f64>,
    pub reference_ratio: f64,
    pub probes: Vec<Probe>,
    pub spots: Vec<f64>,
    pub sigma: f64,
    pub mc_paths: usize,
    pub mc_steps: usize,
    pub seed: u64,
    /// 0 lets the thread pool decide.
    pub threads: usize,
    pub out: String,
    pub vn_samples: usize,
    pub vn_tol: f64,
    pub vn_rhos: Vec<f64>,
    pub vn_sweep_tol: f64,
    pub vn_beta0_perturbation: f64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::Hoc,
            ladder: vec![0.4, 0.2, 0.1, 0.05],
            reference: ReferenceMode::NestedFine,
            region: ErrorRegion::Interior,
            ratios: vec![0.1, 0.5, 1.0, 2.0, 5.0, 10.0],
            hs: vec![0.4, 0.2, 0.1, 0.05],
            reference_h: None,
            reference_ratio: 0.78125,
            probes: vec![Probe { s: 100.0, sigma: 0.1 }],
            spots: vec![80.0, 100.0, 120.0],
            sigma: 0.1,
            mc_paths: 100_000,
            mc_steps: 200,
            seed: 42,
            threads: 0,
            out: ".".into(),
            vn_samples: 1_000_000,
            vn_tol: 1e-12,
            vn_rhos: vec![-1.0, -0.75, -0.5, -0.25, 0.0],
            vn_sweep_tol: 1e-10,
            vn_beta0_perturbation: 0.0,
        }
    }
}

/// Everything a command needs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub model: ModelParams,
    /// Geometry; the horizon always equals the maturity.
    pub grid: GridSpec,
    pub time: TimeLoopConfig,
    pub study: StudyConfig,
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.trim().parse::<f64>().map_err(|_| Error::Config(format!("{key}: '{v}' is not a number")))
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.trim().parse::<usize>().map_err(|_| Error::Config(format!("{key}: '{v}' is not a non-negative integer")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("{key}: '{v}' is not a boolean"))),
    }
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|t| parse_f64(key, t)).collect()
}

fn list(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn parse_probes(key: &str, v: &str) -> Result<Vec<Probe>> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',')
        .map(|t| {
            let (s, sigma) = t
                .split_once(':')
                .ok_or_else(|| Error::Config(format!("{key}: probe '{t}' must be S:sigma")))?;
            Ok(Probe { s: parse_f64(key, s)?, sigma: parse_f64(key, sigma)? })
        })
        .collect()
}

impl RunConfig {
    /// Ordered `(section, key, value)` triples of the configuration.
    pub fn entries(&self) -> Vec<(&'static str, &'static str, String)> {
        let m = &self.model;
        let g = &self.grid;
        let t = &self.time;
        let s = &self.study;
        vec![
            ("model", "r", m.r.to_string()),
            ("model", "v", m.v.to_string()),
            ("model", "kappa_star", m.kappa_star.to_string()),
            ("model", "theta_star", m.theta_star.to_string()),
            ("model", "lambda0", m.lambda0.to_string()),
            ("model", "rho", m.rho.to_string()),
            ("model", "strike", m.strike.to_string()),
            ("model", "maturity", m.maturity.to_string()),
            ("grid", "r1", g.r1.to_string()),
            ("grid", "l2", g.l2.to_string()),
            ("grid", "r2", g.r2.to_string()),
            ("grid", "h", g.h.to_string()),
            ("grid", "offset", g.offset.to_string()),
            ("grid", "mesh_ratio", g.mesh_ratio.to_string()),
            ("time", "mu", t.mu.to_string()),
            ("time", "rannacher", t.rannacher.to_string()),
            ("time", "rannacher_substeps", t.rannacher_substeps.to_string()),
            ("time", "direct_max_unknowns", t.policy.direct_max_unknowns.to_string()),
            ("time", "krylov_tol", t.policy.krylov_tol.to_string()),
            ("time", "krylov_max_iter", t.policy.krylov_max_iter.to_string()),
            ("time", "residual_tol", t.policy.residual_tol.to_string()),
            ("study", "scheme", s.scheme.to_string()),
            ("study", "ladder", list(&s.ladder)),
            ("study", "reference", s.reference.to_string()),
            ("study", "region", s.region.describe()),
            ("study", "ratios", list(&s.ratios)),
            ("study", "hs", list(&s.hs)),
            ("study", "reference_h", s.reference_h.map_or("auto".into(), |h| h.to_string())),
            ("study", "reference_ratio", s.reference_ratio.to_string()),
            (
                "study",
                "probes",
                s.probes.iter().map(|p| format!("{}:{}", p.s, p.sigma)).collect::<Vec<_>>().join(","),
            ),
            ("study", "spots", list(&s.spots)),
            ("study", "sigma", s.sigma.to_string()),
            ("study", "mc_paths", s.mc_paths.to_string()),
            ("study", "mc_steps", s.mc_steps.to_string()),
            ("study", "seed", s.seed.to_string()),
            ("study", "threads", s.threads.to_string()),
            ("study", "out", s.out.clone()),
            ("study", "vn_samples", s.vn_samples.to_string()),
            ("study", "vn_tol", s.vn_tol.to_string()),
            ("study", "vn_rhos", list(&s.vn_rhos)),
            ("study", "vn_sweep_tol", s.vn_sweep_tol.to_string()),
            ("study", "vn_beta0_perturbation", s.vn_beta0_perturbation.to_string()),
        ]
    }

    /// Set one value from `section.key` (or bare `key` when unambiguous).
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let (section, name) = match key.split_once('.') {
            Some((a, b)) => (a.to_string(), b.to_string()),
            None => {
                let hits: Vec<&str> = self.entries().iter().filter(|e| e.1 == key).map(|e| e.0).collect();
                match hits.as_slice() {
                    [one] => (one.to_string(), key.to_string()),
                    [] => return Err(Error::Config(format!("unknown key '{key}'"))),
                    _ => return Err(Error::Config(format!("key '{key}' is ambiguous; qualify it with a section"))),
                }
            }
        };
        let full = format!("{section}.{name}");
        let k = full.as_str();
        let m = &mut self.model;
        let g = &mut self.grid;
        let t = &mut self.time;
        let s = &mut self.study;
        match (section.as_str(), name.as_str()) {
            ("model", "r") => m.r = parse_f64(k, value)?,
            ("model", "v") => m.v = parse_f64(k, value)?,
            ("model", "kappa_star") => m.kappa_star = parse_f64(k, value)?,
            ("model", "theta_star") => m.theta_star = parse_f64(k, value)?,
            ("model", "lambda0") => m.lambda0 = parse_f64(k, value)?,
            ("model", "rho") => m.rho = parse_f64(k, value)?,
            ("model", "strike") => m.strike = parse_f64(k, value)?,
            ("model", "maturity") => m.maturity = parse_f64(k, value)?,
            ("grid", "r1") => g.r1 = parse_f64(k, value)?,
            ("grid", "l2") => g.l2 = parse_f64(k, value)?,
            ("grid", "r2") => g.r2 = parse_f64(k, value)?,
            ("grid", "h") => g.h = parse_f64(k, value)?,
            ("grid", "offset") => g.offset = parse_bool(k, value)?,
            ("grid", "mesh_ratio") => g.mesh_ratio = parse_f64(k, value)?,
            ("time", "mu") => t.mu = parse_f64(k, value)?,
            ("time", "rannacher") => t.rannacher = parse_bool(k, value)?,
            ("time", "rannacher_substeps") => t.rannacher_substeps = parse_usize(k, value)?,
            ("time", "direct_max_unknowns") => t.policy.direct_max_unknowns = parse_usize(k, value)?,
            ("time", "krylov_tol") => t.policy.krylov_tol = parse_f64(k, value)?,
            ("time", "krylov_max_iter") => t.policy.krylov_max_iter = parse_usize(k, value)?,
            ("time", "residual_tol") => t.policy.residual_tol = parse_f64(k, value)?,
            ("study", "scheme") => s.scheme = value.trim().parse()?,
            ("study", "ladder") => s.ladder = parse_list(k, value)?,
            ("study", "reference") => s.reference = value.trim().parse()?,
            ("study", "region") => s.region = ErrorRegion::parse(value.trim())?,
            ("study", "ratios") => s.ratios = parse_list(k, value)?,
            ("study", "hs") => s.hs = parse_list(k, value)?,
            ("study", "reference_h") => {
                s.reference_h = if value.trim() == "auto" { None } else { Some(parse_f64(k, value)?) }
            }
            ("study", "reference_ratio") => s.reference_ratio = parse_f64(k, value)?,
            ("study", "probes") => s.probes = parse_probes(k, value)?,
            ("study", "spots") => s.spots = parse_list(k, value)?,
            ("study", "sigma") => s.sigma = parse_f64(k, value)?,
            ("study", "mc_paths") => s.mc_paths = parse_usize(k, value)?,
            ("study", "mc_steps") => s.mc_steps = parse_usize(k, value)?,
            ("study", "seed") => {
                s.seed = value.trim().parse().map_err(|_| Error::Config(format!("{k}: '{value}' is not a seed")))?
            }
            ("study", "threads") => s.threads = parse_usize(k, value)?,
            ("study", "out") => s.out = value.trim().to_string(),
            ("study", "vn_samples") => s.vn_samples = parse_usize(k, value)?,
            ("study", "vn_tol") => s.vn_tol = parse_f64(k, value)?,
            ("study", "vn_rhos") => s.vn_rhos = parse_list(k, value)?,
            ("study", "vn_sweep_tol") => s.vn_sweep_tol = parse_f64(k, value)?,
            ("study", "vn_beta0_perturbation") => s.vn_beta0_perturbation = parse_f64(k, value)?,
            _ => return Err(Error::Config(format!("unknown key '{full}'"))),
        }
        Ok(())
    }

    /// Apply an INI document on top of the current values.
    pub fn merge_ini(&mut self, text: &str) -> Result<()> {
        let doc = Ini::load_from_str(text).map_err(|e| Error::Config(format!("config parse error: {e}")))?;
        for (section, props) in doc.iter() {
            let section = match section {
                Some(s) => s,
                None if props.is_empty() => continue,
                None => return Err(Error::Config("keys outside a section".into())),
            };
            if !["model", "grid", "time", "study"].contains(&section) {
                return Err(Error::Config(format!("unknown section [{section}]")));
            }
            for (k, v) in props.iter() {
                self.set(&format!("{section}.{k}"), v)?;
            }
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Self::default();
        c.merge_ini(text)?;
        Ok(c)
    }

    /// INI text that [`RunConfig::parse`] maps back to `self`.
    pub fn emit(&self) -> String {
        let mut doc = Ini::new();
        for (section, key, value) in self.entries() {
            doc.with_section(Some(section)).set(key, value);
        }
        let mut buf = Vec::new();
        doc.write_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ini output is utf-8")
    }

    /// Grid geometry with the horizon set to the maturity.
    pub fn grid_spec(&self) -> GridSpec {
        GridSpec { horizon: self.model.maturity, ..self.grid }
    }

    pub fn solver_policy(&self) -> SolverPolicy {
        self.time.policy
    }
}

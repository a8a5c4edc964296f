//! Von Neumann analysis of the fully discrete scheme with frozen
//! coefficients: the amplification factor, two closed-form routes for the
//! case `rho = r = 0`, `mu = 1/2`, the auxiliary sign functions and a
//! sampling search for the largest growth `|G|^2 - 1`.

use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::PdeCoeffs;
use crate::stencil::{parabolic_weights, ParabolicWeightPair, OFFSETS};

/// Frozen-coefficient inputs of one Fourier mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmplificationQuery {
    pub z1: f64,
    pub z2: f64,
    pub h: f64,
    pub k: f64,
    pub y: f64,
    pub v: f64,
    pub kappa: f64,
    pub theta: f64,
    pub rho: f64,
    pub r: f64,
    pub mu: f64,
}

impl AmplificationQuery {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.z1, self.z2, self.h, self.k, self.y, self.v, self.kappa, self.theta, self.rho, self.r, self.mu,
        ];
        if all.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidParameter("non-finite query field".into()));
        }
        if !(self.h > 0.0 && self.k > 0.0 && self.y >= 0.0 && self.v > 0.0 && self.kappa > 0.0) {
            return Err(Error::InvalidParameter(format!("inadmissible query {self:?}")));
        }
        if !(0.0..=1.0).contains(&self.mu) || !(-1.0..=1.0).contains(&self.rho) {
            return Err(Error::InvalidParameter(format!("mu or rho out of range in {self:?}")));
        }
        Ok(())
    }

    pub fn coeffs(&self) -> PdeCoeffs {
        PdeCoeffs { v: self.v, kappa: self.kappa, theta: self.theta, rho: self.rho, r: self.r }
    }

    fn is_theorem_case(&self) -> bool {
        self.rho == 0.0 && self.r == 0.0 && self.mu == 0.5
    }
}

/// Deliberate distortions of the weights, used to check that the analysis
/// is sensitive to transcription errors.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Perturbation {
    /// Relative change applied to the central implicit weight.
    pub beta0_rel: f64,
}

fn symbol(w: &[f64; 9], z1: f64, z2: f64) -> Complex64 {
    OFFSETS
        .iter()
        .zip(w)
        .map(|(&(di, dj), &c)| c * Complex64::from_polar(1.0, di as f64 * z1 + dj as f64 * z2))
        .sum()
}

/// `G = sum zeta_l e^{i(di z1 + dj z2)} / sum beta_l e^{i(di z1 + dj z2)}`.
pub fn amplification_factor(q: &AmplificationQuery) -> Result<Complex64> {
    amplification_factor_perturbed(q, &Perturbation::default())
}

pub fn amplification_factor_perturbed(q: &AmplificationQuery, pert: &Perturbation) -> Result<Complex64> {
    q.validate()?;
    let ParabolicWeightPair { mut beta, zeta } = parabolic_weights(&q.coeffs(), q.y, q.h, q.k, q.mu)?;
    beta[0] *= 1.0 + pert.beta0_rel;
    let den = symbol(&beta, q.z1, q.z2);
    let num = symbol(&zeta, q.z1, q.z2);
    let scale = beta.iter().map(|b| b.abs()).sum::<f64>();
    if !(den.norm() > 1e-14 * scale) {
        return Err(Error::SingularQuery(format!("implicit symbol vanishes at {q:?}")));
    }
    Ok(num / den)
}

/// `|G|^2 - 1` by direct evaluation.
pub fn growth(q: &AmplificationQuery) -> Result<f64> {
    growth_perturbed(q, &Perturbation::default())
}

pub fn growth_perturbed(q: &AmplificationQuery, pert: &Perturbation) -> Result<f64> {
    Ok(amplification_factor_perturbed(q, pert)?.norm_sqr() - 1.0)
}

/// Half-angle variables of a query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrigVars {
    pub c1: f64,
    pub c2: f64,
    pub s1: f64,
    pub s2: f64,
    pub w: f64,
    pub vvar: f64,
}

impl TrigVars {
    pub fn new(q: &AmplificationQuery) -> Self {
        let (s1, c1) = (0.5 * q.z1).sin_cos();
        let (s2, c2) = (0.5 * q.z2).sin_cos();
        Self {
            c1,
            c2,
            s1,
            s2,
            w: 2.0 * (q.theta - q.v * q.y) * s2 / q.v,
            vvar: 2.0 * q.v * q.y * s1 / q.kappa,
        }
    }
}

/// The seven sign-definite polynomials `f1..f7` in `(c1, c2)`.
pub fn f_functions(c1: f64, c2: f64) -> [f64; 7] {
    let (a, b) = (c1 * c1, c2 * c2);
    [
        2.0 * a * b + a + b - 4.0,
        a + b + 1.0,
        2.0 * a * b - a - 1.0,
        2.0 * a * b - b - 1.0,
        4.0 * a * a * b - 2.0 * a - b + 8.0,
        4.0 * a * b * b - 2.0 * b - a + 8.0,
        4.0 * a * a * b * b - 2.0 * a * a * b - 2.0 * a * b * b + 6.0 * a * b + a + b - 8.0,
    ]
}

/// Expected sign of each `f_i`: `-1` for `<= 0`, `+1` for `>= 0`.
pub const F_SIGNS: [i8; 7] = [-1, 1, -1, -1, 1, 1, -1];

/// Numerator and denominator coefficients of the published reduced form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormTerms {
    pub n4: f64,
    pub n2: f64,
    pub d6: f64,
    pub d4: f64,
    pub d2: f64,
    pub d0: f64,
}

pub fn closed_form_terms(q: &AmplificationQuery) -> Result<ClosedFormTerms> {
    q.validate()?;
    if !q.is_theorem_case() {
        return Err(Error::InvalidParameter("closed form requires rho = 0, r = 0, mu = 1/2".into()));
    }
    let TrigVars { c1, c2, s1, w, vvar: vv, .. } = TrigVars::new(q);
    let [f1, f2, f3, f4, ..] = f_functions(c1, c2);
    let (ka, k) = (q.kappa, q.k);
    let (ka2, ka3, ka4) = (ka * ka, ka * ka * ka, ka * ka * ka * ka);
    let n4 = -4.0 * vv * ka3 * f3 * s1.powi(3) * w * w - vv.powi(3) * ka3 * f4 * s1.powi(3);
    let n2 = -4.0 * vv.powi(3) * ka3 * f2 * f1 * s1;
    let d6 = 4.0 * (-2.0 * w * c2 + vv * c1).powi(2) * ka2 * s1.powi(4);
    let d4 = 0.25 * ka4 * s1.powi(4) * (vv * vv - 4.0 * vv * c1 * w * c2 + 4.0 * w * w).powi(2) * k * k
        - 4.0 * vv * ka3 * s1.powi(3) * (f4 * vv * vv + 4.0 * f3 * w * w) * k
        + 16.0 * ka2 * vv * vv * f2 * f2 * s1 * s1;
    let d2 = d22(vv, w, ka, s1, c1, c2) * k * k - 16.0 * vv.powi(3) * ka3 * f2 * f1 * s1 * k;
    let d0 = 4.0 * vv.powi(4) * ka4 * f1 * f1 * k * k;
    Ok(ClosedFormTerms { n4, n2, d6, d4, d2, d0 })
}

/// `|G|^2 - 1` from the published reduced form
/// `-8 k h^2 (n4 h^2 + n2) / (d6 h^6 + d4 h^4 + d2 h^2 + d0)`.
pub fn closed_form_criterion(q: &AmplificationQuery) -> Result<f64> {
    let t = closed_form_terms(q)?;
    let h2 = q.h * q.h;
    let den = ((t.d6 * h2 + t.d4) * h2 + t.d2) * h2 + t.d0;
    let num = -8.0 * q.k * h2 * (t.n4 * h2 + t.n2);
    if num == 0.0 && den == 0.0 {
        return Ok(0.0);
    }
    if !(den > 0.0) {
        return Err(Error::Inconsistent(format!("closed-form denominator {den:e} <= 0 at {q:?}")));
    }
    Ok(num / den)
}

/// `|G|^2 - 1` from a closed form of the symbols for `rho = r = 0`,
/// `mu = 1/2`, written in half-angle variables. With `Gamma` and `A` the
/// normalised symbols of the right-hand side and of the operator,
/// `G = (Gamma - k A / 2) / (Gamma + k A / 2)`.
pub fn exact_criterion(q: &AmplificationQuery) -> Result<f64> {
    q.validate()?;
    if !q.is_theorem_case() {
        return Err(Error::InvalidParameter("closed form requires rho = 0, r = 0, mu = 1/2".into()));
    }
    if !(q.y > 0.0) {
        return Err(Error::InvalidParameter("closed form requires y > 0".into()));
    }
    let AmplificationQuery { h, k, y, v, kappa: ka, theta: th, .. } = *q;
    let (s1, c1) = (0.5 * q.z1).sin_cos();
    let (s2, c2) = (0.5 * q.z2).sin_cos();
    let (s1q, s2q) = (s1 * s1, s2 * s2);
    let qq = th - v * y;
    let (v2, v3, v4) = (v * v, v * v * v, v * v * v * v);
    let gr = (3.0 - s1q - s2q) / 3.0;
    let gi = -h * (c1 * s1 * v2 * y + 2.0 * c2 * s2 * (v2 - ka * qq)) / (6.0 * v2 * y);
    let ar = (2.0 * v * y / 3.0) * (3.0 * s1q + 3.0 * s2q - 2.0 * s1q * s2q) / (h * h)
        + (4.0 * ka * ka * s2q * qq * qq - 4.0 * c1 * c2 * ka * s1 * s2 * v2 * y * qq + 2.0 * ka * s1q * v2 * qq
            - 2.0 * ka * s2q * v2 * (th + v * y)
            + s1q * v4 * y * y
            - 2.0 * s1q * v4
            - 2.0 * s2q * v4)
            / (6.0 * v3 * y);
    let ai = -(c1 * s1 * v2 * y * (2.0 * s2q - 3.0) + 2.0 * c2 * s2 * ka * qq * (3.0 - 2.0 * s1q)) / (3.0 * v * h)
        - h * (c1 * s1 * v + 2.0 * c2 * ka * s2) * (v2 - ka * qq) / (6.0 * v2 * y);
    let dr = gr + 0.5 * k * ar;
    let di = gi + 0.5 * k * ai;
    let den = dr * dr + di * di;
    if !(den > 0.0) {
        return Err(Error::SingularQuery(format!("implicit symbol vanishes at {q:?}")));
    }
    Ok(-2.0 * k * (gr * ar + gi * ai) / den)
}

/// The `k^2` coefficient of `d2`, a quadratic in `W`.
pub fn d22(vvar: f64, w: f64, kappa: f64, s1: f64, c1: f64, c2: f64) -> f64 {
    let [_, _, _, _, f5, f6, _] = f_functions(c1, c2);
    vvar * vvar
        * kappa.powi(4)
        * s1
        * s1
        * (vvar * vvar * f6 - 36.0 * vvar * c1 * w * c2 + 4.0 * f5 * w * w)
}

/// Stated minimum of [`d22`] over `W`: `2 V^4 kappa^4 s1^2 f1 f7 / f5`.
pub fn d22_minimum_formula(vvar: f64, kappa: f64, s1: f64, c1: f64, c2: f64) -> f64 {
    let f = f_functions(c1, c2);
    2.0 * vvar.powi(4) * kappa.powi(4) * s1 * s1 * f[0] * f[6] / f[4]
}

/// Minimum of [`d22`] over `W` by golden-section search on a bracket that
/// contains the vertex.
pub fn d22_minimum_numeric(vvar: f64, kappa: f64, s1: f64, c1: f64, c2: f64) -> f64 {
    let f = |w: f64| d22(vvar, w, kappa, s1, c1, c2);
    let span = 10.0 * (vvar.abs() + 1.0);
    let (mut a, mut b) = (-span, span);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        }
        if (b - a).abs() <= 1e-15 * (1.0 + a.abs()) {
            break;
        }
    }
    f(0.5 * (a + b))
}

/// Closed interval of one search coordinate; `lo == hi` pins it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
    /// Sample uniformly in `ln` rather than linearly.
    pub log: bool,
}

impl Range {
    pub const fn lin(lo: f64, hi: f64) -> Self {
        Self { lo, hi, log: false }
    }
    pub const fn log(lo: f64, hi: f64) -> Self {
        Self { lo, hi, log: true }
    }
    pub const fn fixed(v: f64) -> Self {
        Self { lo: v, hi: v, log: false }
    }

    fn at(&self, t: f64) -> f64 {
        if self.lo == self.hi {
            self.lo
        } else if self.log {
            (self.lo.ln() + t * (self.hi.ln() - self.lo.ln())).exp()
        } else {
            self.lo + t * (self.hi - self.lo)
        }
    }
}

/// Search box over all query coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchBox {
    pub z1: Range,
    pub z2: Range,
    pub h: Range,
    pub k: Range,
    pub y: Range,
    pub v: Range,
    pub kappa: Range,
    pub theta: Range,
    pub rho: Range,
    pub r: Range,
    pub mu: Range,
}

impl Default for SearchBox {
    fn default() -> Self {
        let two_pi = 2.0 * std::f64::consts::PI;
        Self {
            z1: Range::lin(0.0, two_pi),
            z2: Range::lin(0.0, two_pi),
            h: Range::log(1e-3, 1.0),
            k: Range::log(1e-6, 1.0),
            y: Range::lin(0.0, 20.0),
            v: Range::lin(0.01, 1.0),
            kappa: Range::lin(0.1, 5.0),
            theta: Range::lin(0.01, 1.0),
            rho: Range::fixed(0.0),
            r: Range::fixed(0.0),
            mu: Range::fixed(0.5),
        }
    }
}

const DIMS: usize = 11;

impl SearchBox {
    fn ranges(&self) -> [Range; DIMS] {
        [
            self.z1, self.z2, self.h, self.k, self.y, self.v, self.kappa, self.theta, self.rho, self.r, self.mu,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for r in self.ranges() {
            if !(r.lo.is_finite() && r.hi.is_finite() && r.lo <= r.hi) || (r.log && r.lo <= 0.0) {
                return Err(Error::Config(format!("invalid search range {r:?}")));
            }
        }
        Ok(())
    }

    /// Map a point of the unit cube into the box. Phases use `[0, 2 pi)`.
    pub fn query(&self, t: &[f64; DIMS]) -> AmplificationQuery {
        let r = self.ranges();
        let x: Vec<f64> = (0..DIMS).map(|d| r[d].at(t[d].clamp(0.0, 1.0))).collect();
        let two_pi = 2.0 * std::f64::consts::PI;
        AmplificationQuery {
            z1: x[0].rem_euclid(two_pi),
            z2: x[1].rem_euclid(two_pi),
            h: x[2],
            k: x[3],
            y: x[4],
            v: x[5],
            kappa: x[6],
            theta: x[7],
            rho: x[8],
            r: x[9],
            mu: x[10],
        }
    }
}

/// Outcome of [`stability_search`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchResult {
    pub max_value: f64,
    pub argmax: AmplificationQuery,
    pub samples: usize,
    /// Samples at which the implicit symbol vanished.
    pub singular: usize,
    pub seed: u64,
}

/// Largest `|G|^2 - 1` over the box: Latin-hypercube sampling followed by a
/// compass pattern search from the best samples. Deterministic for a fixed
/// seed; ties go to the lowest sample index.
pub fn stability_search(bx: &SearchBox, samples: usize, seed: u64) -> Result<SearchResult> {
    stability_search_with(bx, samples, seed, &Perturbation::default())
}

pub fn stability_search_with(bx: &SearchBox, samples: usize, seed: u64, pert: &Perturbation) -> Result<SearchResult> {
    bx.validate()?;
    if samples == 0 {
        return Err(Error::Config("sample count must be >= 1".into()));
    }
    const CHUNK: usize = 8192;
    const STARTS: usize = 16;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let perms: Vec<Vec<u32>> = (0..DIMS)
        .map(|_| {
            let mut p: Vec<u32> = (0..samples as u32).collect();
            for i in (1..samples).rev() {
                p.swap(i, rng.random_range(0..=i));
            }
            p
        })
        .collect();
    let eval = |t: &[f64; DIMS]| -> Option<f64> {
        growth_perturbed(&bx.query(t), pert).ok().filter(|g| g.is_finite())
    };
    let chunks: Vec<(Vec<(usize, f64)>, usize)> = (0..samples.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut jitter = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
            jitter.set_stream(c as u64);
            let mut best: Vec<(usize, f64)> = Vec::new();
            let mut singular = 0;
            for i in c * CHUNK..((c + 1) * CHUNK).min(samples) {
                let mut t = [0.0; DIMS];
                for d in 0..DIMS {
                    t[d] = (perms[d][i] as f64 + jitter.random::<f64>()) / samples as f64;
                }
                match eval(&t) {
                    Some(g) => push_best(&mut best, (i, g), STARTS),
                    None => singular += 1,
                }
            }
            (best, singular)
        })
        .collect();
    let mut best = Vec::new();
    let mut singular = 0;
    for (b, s) in chunks {
        singular += s;
        for e in b {
            push_best(&mut best, e, STARTS);
        }
    }
    if best.is_empty() {
        return Err(Error::SingularQuery("no admissible sample in the search box".into()));
    }
    let point = |i: usize| -> [f64; DIMS] {
        // Regenerate the jittered coordinates of sample i.
        let c = i / CHUNK;
        let mut jitter = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
        jitter.set_stream(c as u64);
        let mut t = [0.0; DIMS];
        for _ in c * CHUNK..i {
            for _ in 0..DIMS {
                let _: f64 = jitter.random();
            }
        }
        for d in 0..DIMS {
            t[d] = (perms[d][i] as f64 + jitter.random::<f64>()) / samples as f64;
        }
        t
    };
    let refined: Vec<([f64; DIMS], f64)> = best
        .par_iter()
        .map(|&(i, g)| pattern_search(&eval, point(i), g))
        .collect();
    let (t, g) = refined
        .iter()
        .fold(None::<&([f64; DIMS], f64)>, |acc, e| match acc {
            Some(a) if a.1 >= e.1 => Some(a),
            _ => Some(e),
        })
        .unwrap();
    Ok(SearchResult { max_value: *g, argmax: bx.query(t), samples, singular, seed })
}

fn push_best(best: &mut Vec<(usize, f64)>, e: (usize, f64), cap: usize) {
    best.push(e);
    best.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    best.truncate(cap);
}

fn pattern_search<F>(eval: &F, mut t: [f64; DIMS], mut g: f64) -> ([f64; DIMS], f64)
where
    F: Fn(&[f64; DIMS]) -> Option<f64>,
{
    let mut step = 0.05;
    while step > 1e-9 {
        let mut improved = false;
        for d in 0..DIMS {
            for sgn in [1.0, -1.0] {
                let mut c = t;
                c[d] = (c[d] + sgn * step).clamp(0.0, 1.0);
                if c[d] == t[d] {
                    continue;
                }
                if let Some(gc) = eval(&c) {
                    if gc > g {
                        t = c;
                        g = gc;
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (t, g)
}

/// One row of the search report.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchReportRow {
    pub label: String,
    pub result: SearchResult,
}

/// CSV report with one row per search.
pub fn write_search_csv<W: Write>(out: W, rows: &[SearchReportRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "label", "rho", "max_value", "z1", "z2", "h", "k", "y", "v", "kappa", "theta", "r", "mu", "samples",
        "singular", "seed",
    ])?;
    for row in rows {
        let q = row.result.argmax;
        let mut rec = vec![row.label.clone()];
        rec.extend(
            [q.rho, row.result.max_value, q.z1, q.z2, q.h, q.k, q.y, q.v, q.kappa, q.theta, q.r, q.mu]
                .iter()
                .map(|x| format!("{x:e}")),
        );
        rec.push(row.result.samples.to_string());
        rec.push(row.result.singular.to_string());
        rec.push(row.result.seed.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

//! Reference prices for the European put: the semi-closed-form Fourier
//! integral and a Monte Carlo simulation of the SDE system.
//!
//! Throughout, `sigma` is the instantaneous variance (the second state
//! variable of the model), not a volatility.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{modified_params, ModelParams};

/// Which algebraic form of the characteristic function to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Formulation {
    /// `g = (b - d)/(b + d)` with `exp(-d tau)`; free of branch crossings.
    #[default]
    TrapSafe,
    /// `g = (b + d)/(b - d)` with `exp(d tau)`, the form in which the model was
    /// originally published.
    Original,
}

/// Quadrature settings for [`heston_put_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourierConfig {
    pub formulation: Formulation,
    /// Absolute tolerance of each probability integral.
    pub tol: f64,
    /// Largest admissible truncation point of the integrals.
    pub xi_max: f64,
    /// Tail threshold used to choose the truncation point.
    pub tail: f64,
}

impl Default for FourierConfig {
    fn default() -> Self {
        Self {
            formulation: Formulation::TrapSafe,
            tol: 1e-8,
            xi_max: 500.0,
            tail: 1e-12,
        }
    }
}

/// Intermediates of one characteristic-function evaluation.
#[derive(Debug, Clone, Copy)]
pub struct CharacteristicTerms {
    pub xi: f64,
    pub k_index: u8,
    pub b: Complex64,
    pub d: Complex64,
    pub g: Complex64,
    pub c: Complex64,
    pub dd: Complex64,
    /// `f_k(xi)` itself.
    pub f: Complex64,
}

const MAX_EXPONENT: f64 = 700.0;

fn check_inputs(p: &ModelParams, s: f64, sigma: f64) -> Result<()> {
    p.validate()?;
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::Domain(format!("S must be > 0, got {s}")));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::Domain(format!("sigma must be >= 0, got {sigma}")));
    }
    Ok(())
}

/// Evaluate `f_k(xi)` and its intermediates for time to maturity `tau`.
pub fn characteristic_terms(
    p: &ModelParams,
    s: f64,
    sigma: f64,
    tau: f64,
    xi: f64,
    k_index: u8,
    formulation: Formulation,
) -> Result<CharacteristicTerms> {
    let (kappa, theta) = modified_params(p)?;
    let v = p.v;
    let i = Complex64::i();
    let (shift, uk) = match k_index {
        1 => (1.0, 0.5),
        2 => (0.0, -0.5),
        _ => return Err(Error::InvalidParameter(format!("k_index must be 1 or 2, got {k_index}"))),
    };
    let b = Complex64::new(kappa - p.rho * v * shift, -p.rho * v * xi);
    let d = (b * b + v * v * Complex64::new(xi * xi, -2.0 * uk * xi)).sqrt();
    let a = kappa * theta / (v * v);
    let (g, c, dd) = match formulation {
        Formulation::TrapSafe => {
            let g = (b - d) / (b + d);
            let e = (-d * tau).exp();
            let c = i * p.r * xi * tau + a * ((b - d) * tau - 2.0 * ((1.0 - g * e) / (1.0 - g)).ln());
            let dd = (b - d) / (v * v) * (1.0 - e) / (1.0 - g * e);
            (g, c, dd)
        }
        Formulation::Original => {
            let g = (b + d) / (b - d);
            let e = (d * tau).exp();
            let c = i * p.r * xi * tau + a * ((b + d) * tau - 2.0 * ((1.0 - g * e) / (1.0 - g)).ln());
            let dd = (b + d) / (v * v) * (1.0 - e) / (1.0 - g * e);
            (g, c, dd)
        }
    };
    let expo = c + dd * sigma + i * xi * s.ln();
    if !expo.re.is_finite() || expo.re > MAX_EXPONENT {
        return Err(Error::Oracle(format!(
            "characteristic exponent {:e} out of range at xi = {xi}",
            expo.re
        )));
    }
    Ok(CharacteristicTerms { xi, k_index, b, d, g, c, dd, f: expo.exp() })
}

/// `Re[exp(-i xi ln K) f_k(xi) / (i xi)]`.
pub fn heston_integrand(p: &ModelParams, s: f64, sigma: f64, tau: f64, xi: f64, k_index: u8) -> Result<f64> {
    integrand_with(p, s, sigma, tau, xi, k_index, Formulation::TrapSafe)
}

fn integrand_with(
    p: &ModelParams,
    s: f64,
    sigma: f64,
    tau: f64,
    xi: f64,
    k_index: u8,
    formulation: Formulation,
) -> Result<f64> {
    if !(xi > 0.0) {
        return Err(Error::Domain(format!("xi must be > 0, got {xi}")));
    }
    let t = characteristic_terms(p, s, sigma, tau, xi, k_index, formulation)?;
    let phase = Complex64::new(0.0, -xi * p.strike.ln()).exp();
    Ok((phase * t.f / Complex64::new(0.0, xi)).re)
}

// Gauss-Kronrod 7/15 nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: FnMut(f64) -> Result<f64>>(f: &mut F, a: f64, b: f64) -> Result<(f64, f64)> {
    let c = 0.5 * (a + b);
    let hw = 0.5 * (b - a);
    let fc = f(c)?;
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = hw * XGK[j];
        let s = f(c - dx)? + f(c + dx)?;
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    Ok((kron * hw, ((kron - gauss) * hw).abs()))
}

/// Adaptive Gauss-Kronrod integration of `f` over `[a, b]` to absolute
/// tolerance `tol`, bisecting the interval with the largest error estimate.
pub fn integrate<F: FnMut(f64) -> Result<f64>>(mut f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    const MAX_INTERVALS: usize = 2000;
    let (v, e) = gk15(&mut f, a, b)?;
    let mut parts = vec![(a, b, v, e)];
    loop {
        let total: f64 = parts.iter().map(|p| p.3).sum();
        if total <= tol {
            return Ok(parts.iter().map(|p| p.2).sum());
        }
        if parts.len() >= MAX_INTERVALS {
            return Err(Error::Oracle(format!(
                "quadrature did not converge: error estimate {total:e} after {MAX_INTERVALS} intervals"
            )));
        }
        let (worst, _) = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .unwrap();
        let (lo, hi, _, _) = parts.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&mut f, lo, mid)?;
        let (v2, e2) = gk15(&mut f, mid, hi)?;
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
    }
}

/// Truncation point: the first of 5, 10, 20, ... beyond which the integrand
/// stays below the tail threshold on a short window, capped at `xi_max`.
fn truncation_point<F: FnMut(f64) -> Result<f64>>(f: &mut F, cfg: &FourierConfig) -> Result<f64> {
    let mut xi = 5.0;
    while xi < cfg.xi_max {
        let mut peak = 0.0f64;
        for q in 0..8 {
            peak = peak.max(f(xi * (1.0 + q as f64 / 16.0))?.abs());
        }
        if peak < cfg.tail {
            return Ok(xi);
        }
        xi *= 2.0;
    }
    Ok(cfg.xi_max)
}

/// `(P1, P2)`: the two exercise probabilities.
pub fn probabilities(p: &ModelParams, s: f64, sigma: f64, tau: f64, cfg: &FourierConfig) -> Result<(f64, f64)> {
    let mut out = [0.0; 2];
    for (slot, k) in out.iter_mut().zip([1u8, 2]) {
        let mut f = |xi: f64| integrand_with(p, s, sigma, tau, xi, k, cfg.formulation);
        let upper = truncation_point(&mut f, cfg)?;
        let integral = integrate(&mut f, 0.0, upper, cfg.tol)?;
        *slot = 0.5 + integral / std::f64::consts::PI;
    }
    Ok((out[0], out[1]))
}

/// Put price at spot `s`, variance `sigma` and calendar time `t`.
pub fn heston_put(p: &ModelParams, s: f64, sigma: f64, t: f64) -> Result<f64> {
    heston_put_with(p, s, sigma, t, &FourierConfig::default())
}

pub fn heston_put_with(p: &ModelParams, s: f64, sigma: f64, t: f64, cfg: &FourierConfig) -> Result<f64> {
    check_inputs(p, s, sigma)?;
    if !(0.0..=p.maturity).contains(&t) {
        return Err(Error::Domain(format!("t must lie in [0, T], got {t}")));
    }
    let tau = p.maturity - t;
    let disc = p.strike * (-p.r * tau).exp();
    if tau == 0.0 {
        return Ok((p.strike - s).max(0.0));
    }
    let (p1, p2) = probabilities(p, s, sigma, tau, cfg)?;
    let raw = disc * (1.0 - p2) - s * (1.0 - p1);
    if !raw.is_finite() {
        return Err(Error::Oracle(format!("non-finite price at S = {s}, sigma = {sigma}")));
    }
    let lower = (disc - s).max(0.0) - cfg.tol;
    Ok(raw.clamp(lower, disc))
}

/// Call price from the same probabilities, `S P1 - K exp(-r tau) P2`.
pub fn heston_call(p: &ModelParams, s: f64, sigma: f64, t: f64) -> Result<f64> {
    check_inputs(p, s, sigma)?;
    let tau = p.maturity - t;
    if !(tau > 0.0) {
        return Err(Error::Domain(format!("t must lie in [0, T), got {t}")));
    }
    let cfg = FourierConfig::default();
    let (p1, p2) = probabilities(p, s, sigma, tau, &cfg)?;
    Ok(s * p1 - p.strike * (-p.r * tau).exp() * p2)
}

/// Monte Carlo settings. Paths are simulated in batches, each batch with its
/// own stream of one seeded generator, so results depend only on the seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McConfig {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self { n_paths: 100_000, n_steps: 200, seed: 42 }
    }
}

impl McConfig {
    pub const BATCH: usize = 4096;

    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 || self.n_steps == 0 {
            return Err(Error::Config("n_paths and n_steps must be >= 1".into()));
        }
        Ok(())
    }
}

/// Monte Carlo estimate of the put at `t = 0` with Euler full truncation
/// under the pricing measure. Returns `(price, standard error)`.
pub fn mc_put(p: &ModelParams, s: f64, sigma: f64, cfg: &McConfig) -> Result<(f64, f64)> {
    check_inputs(p, s, sigma)?;
    cfg.validate()?;
    let (kappa, theta) = modified_params(p)?;
    let dt = p.maturity / cfg.n_steps as f64;
    let sdt = dt.sqrt();
    let rho_c = (1.0 - p.rho * p.rho).max(0.0).sqrt();
    let disc = (-p.r * p.maturity).exp();
    let n_batches = cfg.n_paths.div_ceil(McConfig::BATCH);
    let sums: Vec<(f64, f64)> = (0..n_batches)
        .into_par_iter()
        .map(|batch| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(batch as u64);
            let count = McConfig::BATCH.min(cfg.n_paths - batch * McConfig::BATCH);
            let (mut sum, mut sum2) = (0.0, 0.0);
            for _ in 0..count {
                let mut lns = s.ln();
                let mut var = sigma;
                for _ in 0..cfg.n_steps {
                    let z2: f64 = StandardNormal.sample(&mut rng);
                    let z3: f64 = StandardNormal.sample(&mut rng);
                    let z1 = p.rho * z2 + rho_c * z3;
                    let vp = var.max(0.0);
                    let sq = vp.sqrt();
                    lns += (p.r - 0.5 * vp) * dt + sq * sdt * z1;
                    var += kappa * (theta - vp) * dt + p.v * sq * sdt * z2;
                }
                let payoff = disc * (p.strike - lns.exp()).max(0.0);
                sum += payoff;
                sum2 += payoff * payoff;
            }
            (sum, sum2)
        })
        .collect();
    let (mut sum, mut sum2) = (0.0, 0.0);
    for (a, b) in sums {
        sum += a;
        sum2 += b;
    }
    let n = cfg.n_paths as f64;
    let mean = sum / n;
    let var = if cfg.n_paths > 1 { ((sum2 - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
    Ok((mean, (var / n).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ContinuousCDF, Normal};

    fn bs_put(s: f64, k: f64, r: f64, tau: f64, total_var: f64) -> f64 {
        let n = Normal::new(0.0, 1.0).unwrap();
        let sd = total_var.sqrt();
        let d1 = ((s / k).ln() + r * tau + 0.5 * total_var) / sd;
        let d2 = d1 - sd;
        k * (-r * tau).exp() * n.cdf(-d2) - s * n.cdf(-d1)
    }

    fn deterministic_variance(sigma: f64, kappa: f64, theta: f64, tau: f64) -> f64 {
        theta * tau + (sigma - theta) * (1.0 - (-kappa * tau).exp()) / kappa
    }

    #[test]
    fn gauss_kronrod_integrates_smooth_functions() {
        let v = integrate(|x| Ok(x.sin()), 0.0, std::f64::consts::PI, 1e-12).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
        let v = integrate(|x| Ok((-x * x).exp()), 0.0, 10.0, 1e-12).unwrap();
        assert!((v - std::f64::consts::PI.sqrt() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn small_vol_of_vol_matches_black_scholes() {
        // With correlation the leading correction is O(rho v), so v is smaller there.
        for (sigma, rho, v) in [(0.1, 0.0, 1e-3), (0.04, 0.0, 1e-3), (0.2, -0.5, 1e-4)] {
            let p = ModelParams { v, rho, ..ModelParams::table1() };
            let tv = deterministic_variance(sigma, 2.0, 0.1, 0.5);
            for s in [80.0, 100.0, 120.0] {
                let got = heston_put(&p, s, sigma, 0.0).unwrap();
                let want = bs_put(s, 100.0, 0.05, 0.5, tv);
                assert!((got - want).abs() < 1e-3, "S={s} sigma={sigma}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn parity_and_bounds() {
        let p = ModelParams::table1();
        let disc = 100.0 * (-0.05f64 * 0.5).exp();
        for s in [60.0, 90.0, 100.0, 110.0, 140.0] {
            for sigma in [0.05, 0.1, 0.3] {
                let put = heston_put(&p, s, sigma, 0.0).unwrap();
                let call = heston_call(&p, s, sigma, 0.0).unwrap();
                assert!((put + s - disc - call).abs() < 1e-6, "S={s}");
                assert!(put >= (disc - s).max(0.0) - 1e-8 && put <= disc + 1e-8);
            }
        }
    }

    #[test]
    fn monotone_in_spot() {
        let p = ModelParams::table1();
        let prices: Vec<f64> = (0..=20).map(|i| heston_put(&p, 50.0 + 5.0 * i as f64, 0.1, 0.0).unwrap()).collect();
        assert!(prices.windows(2).all(|w| w[1] <= w[0]), "{prices:?}");
    }

    #[test]
    fn limits_in_spot() {
        let p = ModelParams::table1();
        let disc = 100.0 * (-0.05f64 * 0.5).exp();
        assert!((heston_put(&p, 1e-3, 0.1, 0.0).unwrap() - (disc - 1e-3)).abs() < 1e-6);
        assert!(heston_put(&p, 1e4, 0.1, 0.0).unwrap() < 1e-8);
        assert_eq!(heston_put(&p, 90.0, 0.1, 0.5).unwrap(), 10.0);
    }

    #[test]
    fn formulations_agree_at_short_maturity() {
        let p = ModelParams::table1();
        let orig = FourierConfig { formulation: Formulation::Original, ..Default::default() };
        for s in [80.0, 100.0, 120.0] {
            for sigma in [0.1, 0.2] {
                let a = heston_put(&p, s, sigma, 0.0).unwrap();
                let b = heston_put_with(&p, s, sigma, 0.0, &orig).unwrap();
                assert!((a - b).abs() < 1e-8, "S={s}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn integrand_is_continuous() {
        // A branch crossing shows up as an O(1) second difference on a fine
        // sampling; smooth integrands give O(step^2).
        for (p, tau) in [
            (ModelParams::table1(), 0.5),
            (ModelParams { v: 0.9, rho: -0.9, kappa_star: 0.5, theta_star: 0.2, maturity: 20.0, ..ModelParams::table1() }, 20.0),
        ] {
            for k in [1u8, 2] {
                let step = 1e-3;
                let vals: Vec<f64> = (0..200_000)
                    .map(|i| heston_integrand(&p, 100.0, 0.1, tau, 1e-6 + step * i as f64, k).unwrap())
                    .collect();
                let worst = vals.windows(3).map(|w| (w[2] - 2.0 * w[1] + w[0]).abs()).fold(0.0, f64::max);
                assert!(worst < 1e-4, "k={k} tau={tau}: second difference {worst:e}");
            }
        }
    }

    #[test]
    fn integrand_decays() {
        let p = ModelParams::table1();
        for k in [1u8, 2] {
            assert!(heston_integrand(&p, 100.0, 0.1, 0.5, 400.0, k).unwrap().abs() < 1e-12);
        }
        assert!(heston_integrand(&p, 100.0, 0.1, 0.5, 0.0, 1).is_err());
        assert!(heston_integrand(&p, 100.0, 0.1, 0.5, 1.0, 3).is_err());
    }

    #[test]
    fn mc_is_reproducible_and_seed_dependent() {
        let p = ModelParams::table1();
        let cfg = McConfig { n_paths: 10_000, n_steps: 20, seed: 7 };
        let a = mc_put(&p, 100.0, 0.1, &cfg).unwrap();
        assert_eq!(a, mc_put(&p, 100.0, 0.1, &cfg).unwrap());
        assert_ne!(a, mc_put(&p, 100.0, 0.1, &McConfig { seed: 8, ..cfg }).unwrap());
    }

    #[test]
    fn mc_worthless_put() {
        let p = ModelParams { strike: 1e-6, ..ModelParams::table1() };
        let (v, se) = mc_put(&p, 100.0, 0.1, &McConfig { n_paths: 1000, n_steps: 10, seed: 1 }).unwrap();
        assert_eq!((v, se), (0.0, 0.0));
    }

    #[test]
    fn mc_small_vol_of_vol_matches_black_scholes() {
        let p = ModelParams { v: 1e-3, rho: 0.3, ..ModelParams::table1() };
        let (v, se) = mc_put(&p, 100.0, 0.1, &McConfig { n_paths: 50_000, n_steps: 100, seed: 3 }).unwrap();
        let want = bs_put(100.0, 100.0, 0.05, 0.5, deterministic_variance(0.1, 2.0, 0.1, 0.5));
        assert!((v - want).abs() <= 3.0 * se, "{v} +- {se} vs {want}");
    }

    #[test]
    fn mc_rejects_empty_config() {
        let p = ModelParams::table1();
        assert!(mc_put(&p, 100.0, 0.1, &McConfig { n_paths: 0, n_steps: 1, seed: 0 }).is_err());
    }
}

//! Model and market parameters, coordinate transformations, payoff and
//! boundary values.
//!
//! Computational coordinates are `x = ln(S/K)`, `y = sigma / v` and the time to
//! maturity `t_tilde = T - t`; the unknown is `u = exp(r t_tilde) V / K`.

use crate::error::{Error, Result};

/// Heston model and contract constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Riskless rate.
    pub r: f64,
    /// Volatility of volatility.
    pub v: f64,
    /// Mean-reversion speed under the real-world measure.
    pub kappa_star: f64,
    /// Long-run mean of the variance under the real-world measure.
    pub theta_star: f64,
    /// Risk-premium coefficient; the market price of volatility risk is `lambda0 * sigma`.
    pub lambda0: f64,
    /// Correlation between the asset and variance Brownian motions.
    pub rho: f64,
    /// Strike.
    pub strike: f64,
    /// Maturity in years.
    pub maturity: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self::table1()
    }
}

impl ModelParams {
    /// The reference parameter set used throughout the experiments.
    pub fn table1() -> Self {
        Self {
            r: 0.05,
            v: 0.1,
            kappa_star: 2.0,
            theta_star: 0.1,
            lambda0: 0.0,
            rho: -0.5,
            strike: 100.0,
            maturity: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.r,
            self.v,
            self.kappa_star,
            self.theta_star,
            self.lambda0,
            self.rho,
            self.strike,
            self.maturity,
        ];
        if all.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidParameter("non-finite model parameter".into()));
        }
        if self.v <= 0.0 {
            return Err(Error::InvalidParameter(format!("v must be > 0, got {}", self.v)));
        }
        if self.strike <= 0.0 {
            return Err(Error::InvalidParameter(format!("K must be > 0, got {}", self.strike)));
        }
        // T = 0 is admitted as a degenerate horizon: the solution is the payoff.
        if self.maturity < 0.0 {
            return Err(Error::InvalidParameter(format!("T must be >= 0, got {}", self.maturity)));
        }
        if self.kappa_star <= 0.0 || self.theta_star <= 0.0 {
            return Err(Error::InvalidParameter("kappa_star and theta_star must be > 0".into()));
        }
        if !(-1.0..=1.0).contains(&self.rho) {
            return Err(Error::InvalidParameter(format!("rho must lie in [-1, 1], got {}", self.rho)));
        }
        modified_params(self).map(|_| ())
    }

    /// Frozen PDE coefficients in computational form.
    pub fn pde_coeffs(&self) -> Result<PdeCoeffs> {
        self.validate()?;
        let (kappa, theta) = modified_params(self)?;
        Ok(PdeCoeffs {
            v: self.v,
            kappa,
            theta,
            rho: self.rho,
            r: self.r,
        })
    }
}

/// The constants that enter the transformed PDE.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdeCoeffs {
    pub v: f64,
    pub kappa: f64,
    pub theta: f64,
    pub rho: f64,
    pub r: f64,
}

/// A point in financial coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FinancialPoint {
    pub s: f64,
    pub sigma: f64,
    pub t: f64,
}

/// A point in computational coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComputationalPoint {
    pub x: f64,
    pub y: f64,
    pub t_tilde: f64,
}

/// Risk-neutral mean-reversion parameters `(kappa, theta)`.
pub fn modified_params(p: &ModelParams) -> Result<(f64, f64)> {
    let kappa = p.kappa_star + p.lambda0;
    if kappa <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "kappa_star + lambda0 must be > 0, got {kappa}"
        )));
    }
    Ok((kappa, p.theta_star * (p.kappa_star / kappa)))
}

pub fn to_computational(p: &ModelParams, fp: &FinancialPoint) -> Result<ComputationalPoint> {
    if !(fp.s > 0.0) {
        return Err(Error::Domain(format!("S must be > 0, got {}", fp.s)));
    }
    if !(fp.sigma >= 0.0) {
        return Err(Error::Domain(format!("sigma must be >= 0, got {}", fp.sigma)));
    }
    if !(0.0..=p.maturity).contains(&fp.t) {
        return Err(Error::Domain(format!("t must lie in [0, T], got {}", fp.t)));
    }
    Ok(ComputationalPoint {
        x: (fp.s / p.strike).ln(),
        y: fp.sigma / p.v,
        t_tilde: p.maturity - fp.t,
    })
}

pub fn to_financial(p: &ModelParams, cp: &ComputationalPoint) -> FinancialPoint {
    FinancialPoint {
        s: p.strike * cp.x.exp(),
        sigma: cp.y * p.v,
        t: p.maturity - cp.t_tilde,
    }
}

pub fn u_to_price(p: &ModelParams, u: f64, t_tilde: f64) -> f64 {
    p.strike * (-p.r * t_tilde).exp() * u
}

pub fn price_to_u(p: &ModelParams, price: f64, t_tilde: f64) -> f64 {
    (p.r * t_tilde).exp() * price / p.strike
}

/// Transformed put payoff `max(1 - e^x, 0)`.
pub fn initial_condition(x: f64) -> f64 {
    (1.0 - x.exp()).max(0.0)
}

/// Left Dirichlet value at the (possibly shifted) boundary abscissa `x_left`.
pub fn dirichlet_left(p: &ModelParams, x_left: f64, t_n: f64) -> f64 {
    1.0 - (p.r * t_n + x_left).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn modified_params_examples() {
        let mut p = ModelParams::table1();
        assert_eq!(modified_params(&p).unwrap(), (2.0, 0.1));
        p.kappa_star = 1.5;
        p.theta_star = 0.2;
        p.lambda0 = 0.5;
        let (k, t) = modified_params(&p).unwrap();
        assert_relative_eq!(k, 2.0);
        assert_relative_eq!(t, 0.15, max_relative = 1e-15);
        p.kappa_star = 1.0;
        p.theta_star = 0.1;
        p.lambda0 = -1.0;
        assert!(matches!(modified_params(&p), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn transformation_examples() {
        let p = ModelParams::table1();
        let fp = FinancialPoint { s: 100.0, sigma: 0.1, t: p.maturity };
        let cp = to_computational(&p, &fp).unwrap();
        assert_eq!((cp.x, cp.y, cp.t_tilde), (0.0, 1.0, 0.0));
        let cp = to_computational(&p, &FinancialPoint { s: 100.0 * std::f64::consts::E, sigma: 0.0, t: 0.0 })
            .unwrap();
        assert_relative_eq!(cp.x, 1.0, max_relative = 1e-15);
        let cp = to_computational(&p, &FinancialPoint { s: 50.0, sigma: 0.0, t: 0.0 }).unwrap();
        assert_relative_eq!(cp.x, -0.693_147_180_559_945_3, max_relative = 1e-15);
        assert!(to_computational(&p, &FinancialPoint { s: 0.0, sigma: 0.1, t: 0.0 }).is_err());
    }

    #[test]
    fn price_and_boundary_examples() {
        let mut p = ModelParams::table1();
        p.r = 0.0;
        assert_eq!(u_to_price(&p, 1.0, 0.3), 100.0);
        assert_eq!(u_to_price(&p, 0.0, 0.3), 0.0);
        p.r = 0.05;
        assert_relative_eq!(u_to_price(&p, 1.0, 0.5), 97.530_991_202_833_26, max_relative = 1e-13);
        assert_eq!(initial_condition(0.0), 0.0);
        assert_relative_eq!(initial_condition(0.5f64.ln()), 0.5, max_relative = 1e-15);
        assert_eq!(initial_condition(2.0), 0.0);
        assert_relative_eq!(dirichlet_left(&p, -2.0, 0.5), 1.0 - (-1.975f64).exp(), max_relative = 1e-15);
        assert_relative_eq!(dirichlet_left(&p, -2.0, 0.5), 0.8612, epsilon = 1e-4);
        assert!((dirichlet_left(&p, -60.0, 0.5) - 1.0).abs() < 1e-15);
        p.r = 0.0;
        assert_relative_eq!(dirichlet_left(&p, -1.5, 0.2), 1.0 - (-1.5f64).exp());
    }

    #[test]
    fn validation_rejects_bad_inputs() {
        let base = ModelParams::table1();
        assert!(base.validate().is_ok());
        for bad in [
            ModelParams { v: 0.0, ..base },
            ModelParams { strike: -1.0, ..base },
            ModelParams { rho: 1.5, ..base },
            ModelParams { theta_star: 0.0, ..base },
            ModelParams { r: f64::NAN, ..base },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }

    proptest! {
        #[test]
        fn round_trip(s in 1e-3f64..1e4, sigma in 0.0f64..2.0, frac in 0.0f64..=1.0) {
            let p = ModelParams::table1();
            let fp = FinancialPoint { s, sigma, t: frac * p.maturity };
            let back = to_financial(&p, &to_computational(&p, &fp).unwrap());
            prop_assert!(((back.s - s) / s).abs() <= 1e-14);
            prop_assert!((back.sigma - sigma).abs() <= 1e-14 * sigma.max(1e-300) + 1e-300);
            prop_assert!((back.t - fp.t).abs() <= 1e-14 * p.maturity);
        }

        #[test]
        fn payoff_matches_put(s in 1e-2f64..1e3) {
            let p = ModelParams::table1();
            let x = (s / p.strike).ln();
            let got = u_to_price(&p, initial_condition(x), 0.0);
            let want = (p.strike - s).max(0.0);
            prop_assert!((got - want).abs() <= 1e-12 * p.strike);
        }

        #[test]
        fn payoff_monotone(a in -5.0f64..5.0, d in 0.0f64..1.0) {
            prop_assert!(initial_condition(a + d) <= initial_condition(a));
        }

        #[test]
        fn zero_premium_is_identity(k in 0.01f64..10.0, t in 0.001f64..2.0) {
            let p = ModelParams { kappa_star: k, theta_star: t, lambda0: 0.0, ..ModelParams::table1() };
            prop_assert_eq!(modified_params(&p).unwrap(), (k, t));
        }
    }
}

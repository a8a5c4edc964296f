//! Nine-point weight sets.
//!
//! Node numbering: 0 = centre, 1 = E, 2 = N, 3 = W, 4 = S, 5 = NE, 6 = NW,
//! 7 = SW, 8 = SE. Paired nodes (1,3), (2,4), (5,7), (6,8) are written as
//! `even + odd` for the first node and `even - odd` for the second.
//!
//! The elliptic operator is
//! `L u = -vy/2 (u_xx + u_yy) - rho v y u_xy + (vy/2 - r) u_x - kappa (theta - vy)/v u_y`.

use crate::error::{Error, Result};
use crate::model::PdeCoeffs;

/// Grid offsets `(di, dj)` of the nine nodes.
pub const OFFSETS: [(i32, i32); 9] = [
    (0, 0),
    (1, 0),
    (0, 1),
    (-1, 0),
    (0, -1),
    (1, 1),
    (-1, 1),
    (-1, -1),
    (1, -1),
];

pub type StencilWeights9 = [f64; 9];

/// Elliptic weights: `sum alpha_l u_l = sum gamma_l f_l` approximates `L u = f` to fourth order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticWeightPair {
    pub alpha: StencilWeights9,
    pub gamma: StencilWeights9,
}

/// Fully discrete weights: `sum beta_l u_l^{n+1} = sum zeta_l u_l^n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParabolicWeightPair {
    pub beta: StencilWeights9,
    pub zeta: StencilWeights9,
}

/// Spatial discretisation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Fourth-order compact scheme.
    Hoc,
    /// Standard second-order central differences.
    Central,
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hoc" => Ok(Scheme::Hoc),
            "central" | "second-order" => Ok(Scheme::Central),
            other => Err(Error::Config(format!("unknown scheme '{other}' (hoc | central)"))),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scheme::Hoc => "hoc",
            Scheme::Central => "central",
        })
    }
}

fn check_positive(y: f64, h: f64) -> Result<()> {
    if !(y > 0.0) {
        return Err(Error::SingularCoefficient(format!("weights need y > 0, got {y}")));
    }
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("h must be > 0, got {h}")));
    }
    Ok(())
}

/// Fourth-order compact weights at a grid row with variance coordinate `y`.
pub fn elliptic_weights(c: &PdeCoeffs, y: f64, h: f64) -> Result<EllipticWeightPair> {
    check_positive(y, h)?;
    let PdeCoeffs { v, kappa: ka, theta: th, rho, r } = *c;
    let (v2, v3, v4) = (v * v, v * v * v, v * v * v * v);
    let h2 = h * h;
    let kt = ka * th;

    let mut a = [0.0; 9];
    a[0] = ((4.0 * ka * ka + v2) / (12.0 * v) - v * (2.0 * rho * rho - 5.0) / (3.0 * h2)) * y
        - (ka * v2 + 2.0 * ka * kt + v2 * r) / (3.0 * v2)
        + (-v4 + kt * kt - v3 * r * rho + v2 * r * r) / (3.0 * v3 * y);

    let e = (-v / 24.0 + v * (rho * rho - 1.0) / (3.0 * h2)) * y + ka / 12.0 + r / 6.0
        - (-2.0 * r * v * rho + kt + 2.0 * r * r - v2) / (12.0 * v * y);
    let o = ((v / 6.0 - ka * rho / 3.0) / h) * y
        - ka * h / 24.0
        - (v * r - kt * rho) / (3.0 * v * h)
        - (v2 - kt) * h / (24.0 * v * y);
    a[1] = e + o;
    a[3] = e - o;

    let e = (-ka * ka / (6.0 * v) + v * (rho * rho - 1.0) / (3.0 * h2)) * y
        + ka * (v2 + 4.0 * kt) / (12.0 * v2)
        + (2.0 * kt + v2) * (v2 - kt) / (12.0 * v3 * y);
    let o = ((ka / 3.0 - rho * v / 6.0) / h) * y - ka * ka * h / (12.0 * v)
        + (r * v * rho - kt) / (3.0 * v * h)
        - ka * (v2 - kt) * h / (12.0 * v2 * y);
    a[2] = e + o;
    a[4] = e - o;

    let e = (-ka / 24.0 - v * (rho + 1.0) * (2.0 * rho + 1.0) / (12.0 * h2)) * y
        + ka * (rho * v + 2.0 * r + th) / (24.0 * v)
        + (v2 * r + v3 * rho - 2.0 * r * kt) / (24.0 * v2 * y);
    let o = ((2.0 * rho + 1.0) * (2.0 * ka + v) / (24.0 * h)) * y
        - (2.0 * rho + 1.0) * (kt + v * r) / (12.0 * v * h);
    a[5] = e + o;
    a[7] = e - o;

    let e = (ka / 24.0 - v * (2.0 * rho - 1.0) * (rho - 1.0) / (12.0 * h2)) * y
        - ka * (rho * v + 2.0 * r + th) / (24.0 * v)
        - (v2 * r + v3 * rho - 2.0 * r * kt) / (24.0 * v2 * y);
    let o = ((2.0 * rho - 1.0) * (v - 2.0 * ka) / (24.0 * h)) * y
        - (2.0 * rho - 1.0) * (v * r - kt) / (12.0 * v * h);
    a[6] = e + o;
    a[8] = e - o;

    let mut g = [0.0; 9];
    g[0] = 2.0 / 3.0;
    let o = -h / 24.0 + (r - rho * v) * h / (12.0 * v * y);
    g[1] = 1.0 / 12.0 + o;
    g[3] = 1.0 / 12.0 - o;
    let o = -ka * h / (12.0 * v) - (v2 - kt) * h / (12.0 * v2 * y);
    g[2] = 1.0 / 12.0 + o;
    g[4] = 1.0 / 12.0 - o;
    g[5] = rho / 24.0;
    g[7] = rho / 24.0;
    g[6] = -rho / 24.0;
    g[8] = -rho / 24.0;

    Ok(EllipticWeightPair { alpha: a, gamma: g })
}

/// Fully discrete fourth-order weights for the theta-scheme with weight `mu`
/// on the new time level, scaled by `24 v^3 h^2 y`.
///
/// The expressions are polynomial in `y`, so `y = 0` is admitted (the
/// stability analysis evaluates the degenerate row).
pub fn parabolic_weights(c: &PdeCoeffs, y: f64, h: f64, k: f64, mu: f64) -> Result<ParabolicWeightPair> {
    if !(y >= 0.0) || !(h > 0.0) || !(k >= 0.0) || !(0.0..=1.0).contains(&mu) {
        return Err(Error::InvalidParameter(format!(
            "parabolic weights need y >= 0, h > 0, k >= 0, mu in [0,1]; got y={y}, h={h}, k={k}, mu={mu}"
        )));
    }
    let PdeCoeffs { v, kappa: ka, theta: th, rho, r } = *c;
    let (v2, v3, v4) = (v * v, v * v * v, v * v * v * v);
    let (h2, h3) = (h * h, h * h * h);
    let (y2, ka2, rho2) = (y * y, ka * ka, rho * rho);
    let kt = ka * th;
    let mk = mu * k;
    let q = (1.0 - mu) * k;

    let mut b = [0.0; 9];
    let mut z = [0.0; 9];

    b[0] = (((2.0 * y2 - 8.0) * v4 + ((-8.0 * ka - 8.0 * r) * y - 8.0 * rho * r) * v3
        + (8.0 * ka2 * y2 + 8.0 * r * r) * v2
        - 16.0 * ka2 * th * v * y
        + 8.0 * kt * kt)
        * mk
        + 16.0 * v3 * y)
        * h2
        + (40.0 - 16.0 * rho2) * y2 * v4 * mk;
    z[0] = 16.0 * v3 * y * h2
        + q * (((8.0 - 2.0 * y2) * v4 + ((8.0 * ka + 8.0 * r) * y + 8.0 * rho * r) * v3
            + (-8.0 * r * r - 8.0 * ka2 * y2) * v2
            + 16.0 * ka2 * th * v * y
            - 8.0 * kt * kt)
            * h2
            + (16.0 * rho2 - 40.0) * y2 * v4);

    // E / W
    let o = ((kt * v2 - v4 - ka * y * v3) * mk - (y + 2.0 * rho) * v3 + 2.0 * v2 * r) * h3
        + (4.0 * v4 * y2 + (-8.0 * y2 * ka * rho - 8.0 * y * r) * v3 + 8.0 * y * kt * rho * v2) * mk * h;
    let e = (((2.0 - y2) * v4 + ((4.0 * r + 2.0 * ka) * y + 4.0 * rho * r) * v3
        - (2.0 * kt + 4.0 * r * r) * v2)
        * mk
        + 2.0 * v3 * y)
        * h2
        + (8.0 * rho2 - 8.0) * y2 * v4 * mk;
    b[1] = e + o;
    b[3] = e - o;
    let o = (2.0 * r - (y + 2.0 * rho) * v) * v2 * h3
        + q * ((v * ka * y + v2 - kt) * v2 * h3
            + ((8.0 * ka * rho - 4.0 * v) * v3 * y2 + (8.0 * v * r - 8.0 * kt * rho) * v2 * y) * h);
    let e = 2.0 * v3 * y * h2
        + q * ((v2 * y2 - (4.0 * r + 2.0 * ka) * v * y + 4.0 * r * r + 2.0 * kt - 2.0 * v2 - 4.0 * rho * v * r)
            * v2
            * h2
            + (8.0 * v2 - 8.0 * v2 * rho2) * v2 * y2);
    z[1] = e + o;
    z[3] = e - o;

    // N / S
    let o = ((2.0 * ka2 * th * v - 2.0 * ka2 * v2 * y - 2.0 * v3 * ka) * mk - 2.0 * v2 * y * ka + 2.0 * v * kt
        - 2.0 * v3)
        * h3
        + ((8.0 * y2 * ka + 8.0 * y * rho * r) * v3 - 4.0 * v4 * y2 * rho - 8.0 * v2 * y * kt) * mk * h;
    let e = ((2.0 * v4 + 2.0 * ka * y * v3 + (2.0 * kt - 4.0 * ka2 * y2) * v2 + 8.0 * ka2 * th * v * y
        - 4.0 * kt * kt)
        * mk
        + 2.0 * v3 * y)
        * h2
        + (8.0 * rho2 - 8.0) * y2 * v4 * mk;
    b[2] = e + o;
    b[4] = e - o;
    let o = (2.0 * v * kt - 2.0 * v2 * y * ka - 2.0 * v3) * h3
        + q * (2.0 * (v3 * ka - ka2 * th * v + ka2 * v2 * y) * h3
            + ((4.0 * v4 * rho - 8.0 * v3 * ka) * y2 + (8.0 * kt * v2 - 8.0 * v3 * rho * r) * y) * h);
    let e = 2.0 * v3 * y * h2
        + q * ((4.0 * ka2 * v2 * y2 - (2.0 * v2 + 8.0 * kt) * ka * v * y + 2.0 * kt * (2.0 * kt - v2)
            - 2.0 * v4)
            * h2
            + (8.0 * v4 - 8.0 * v4 * rho2) * y2);
    z[2] = e + o;
    z[4] = e - o;

    // NE / SW
    let e = ((v4 * rho + (ka * y * rho - y2 * ka + r) * v3 + (th + 2.0 * r) * ka * y * v2
        - 2.0 * r * kt * v)
        * mk
        + v3 * rho * y)
        * h2
        - (2.0 + 4.0 * rho2 + 6.0 * rho) * y2 * v4 * mk;
    let o = ((2.0 * rho + 1.0) * y2 * v4
        + ((2.0 + 4.0 * rho) * ka * y2 - (4.0 * rho * r + 2.0 * r) * y) * v3
        - (2.0 * th + 4.0 * th * rho) * ka * y * v2)
        * mk
        * h;
    b[5] = e + o;
    b[7] = e - o;
    let e = v3 * rho * y * h2
        + q * ((v3 * y2 * ka - v * (v * kt + 2.0 * r * ka * v + ka * v2 * rho) * y
            - v * (v2 * r - 2.0 * r * kt + v3 * rho))
            * h2
            + v * (2.0 * v3 + 6.0 * v3 * rho + 4.0 * v3 * rho2) * y2);
    let o = q
        * ((-v * (2.0 * v3 * rho + v3 + 4.0 * ka * v2 * rho + 2.0 * v2 * ka) * y2
            + v * (2.0 * v * kt + 4.0 * v * kt * rho + 4.0 * v2 * rho * r + 2.0 * v2 * r) * y)
            * h);
    z[5] = e + o;
    z[7] = e - o;

    // NW / SE
    let e = ((-v4 * rho + (y2 * ka - ka * y * rho - r) * v3 - (th + 2.0 * r) * ka * y * v2
        + 2.0 * r * kt * v)
        * mk
        - v3 * rho * y)
        * h2
        + (-4.0 * rho2 + 6.0 * rho - 2.0) * y2 * v4 * mk;
    let o = ((2.0 * rho - 1.0) * y2 * v4
        + ((2.0 - 4.0 * rho) * ka * y2 + (2.0 * r - 4.0 * rho * r) * y) * v3
        + (4.0 * th * rho - 2.0 * th) * ka * y * v2)
        * mk
        * h;
    b[6] = e + o;
    b[8] = e - o;
    let e = -v3 * rho * y * h2
        + q * ((-v3 * y2 * ka + v * (v * kt + 2.0 * r * ka * v + ka * v2 * rho) * y
            + v * (v2 * r - 2.0 * r * kt + v3 * rho))
            * h2
            + v * (2.0 * v3 - 6.0 * v3 * rho + 4.0 * v3 * rho2) * y2);
    let o = q
        * ((v * (v3 - 2.0 * v3 * rho + 4.0 * ka * v2 * rho - 2.0 * v2 * ka) * y2
            + v * (2.0 * v * kt - 4.0 * v * kt * rho + 4.0 * v2 * rho * r - 2.0 * v2 * r) * y)
            * h);
    z[6] = e + o;
    z[8] = e - o;

    Ok(ParabolicWeightPair { beta: b, zeta: z })
}

/// Fully discrete weights rebuilt from the elliptic pair:
/// `beta = S (gamma + k mu alpha)`, `zeta = S (gamma - k (1-mu) alpha)`, `S = 24 v^3 h^2 y`.
pub fn parabolic_from_elliptic(c: &PdeCoeffs, ew: &EllipticWeightPair, y: f64, h: f64, k: f64, mu: f64) -> ParabolicWeightPair {
    let s = 24.0 * c.v.powi(3) * h * h * y;
    let mut beta = [0.0; 9];
    let mut zeta = [0.0; 9];
    for l in 0..9 {
        beta[l] = s * (ew.gamma[l] + k * mu * ew.alpha[l]);
        zeta[l] = s * (ew.gamma[l] - k * (1.0 - mu) * ew.alpha[l]);
    }
    ParabolicWeightPair { beta, zeta }
}

/// Second-order central weights of `L`.
pub fn central_weights(c: &PdeCoeffs, y: f64, h: f64) -> Result<StencilWeights9> {
    check_positive(y, h)?;
    let diff = -0.5 * c.v * y;
    let cx = 0.5 * c.v * y - c.r;
    let cy = -c.kappa * (c.theta - c.v * y) / c.v;
    let h2 = h * h;
    let corner = -c.rho * c.v * y / (4.0 * h2);
    let mut w = [0.0; 9];
    w[0] = -4.0 * diff / h2;
    w[1] = diff / h2 + cx / (2.0 * h);
    w[3] = diff / h2 - cx / (2.0 * h);
    w[2] = diff / h2 + cy / (2.0 * h);
    w[4] = diff / h2 - cy / (2.0 * h);
    w[5] = corner;
    w[7] = corner;
    w[6] = -corner;
    w[8] = -corner;
    Ok(w)
}

/// Theta-scheme weights for the central discretisation (unscaled).
pub fn central_parabolic(c: &PdeCoeffs, y: f64, h: f64, k: f64, mu: f64) -> Result<ParabolicWeightPair> {
    let a = central_weights(c, y, h)?;
    let mut beta = [0.0; 9];
    let mut zeta = [0.0; 9];
    for l in 0..9 {
        let id = if l == 0 { 1.0 } else { 0.0 };
        beta[l] = id + k * mu * a[l];
        zeta[l] = id - k * (1.0 - mu) * a[l];
    }
    Ok(ParabolicWeightPair { beta, zeta })
}

/// Row weights for the selected scheme.
pub fn scheme_weights(scheme: Scheme, c: &PdeCoeffs, y: f64, h: f64, k: f64, mu: f64) -> Result<ParabolicWeightPair> {
    match scheme {
        Scheme::Hoc => {
            check_positive(y, h)?;
            parabolic_weights(c, y, h, k, mu)
        }
        Scheme::Central => central_parabolic(c, y, h, k, mu),
    }
}

/// `sum_l w_l u(i + di_l, j + dj_l)` on a row-major field with `nx` columns.
pub fn apply_stencil(w: &StencilWeights9, u: &[f64], nx: usize, ny: usize, i: usize, j: usize) -> Result<f64> {
    if u.len() != nx * ny {
        return Err(Error::Index(format!("field length {} != {nx} x {ny}", u.len())));
    }
    if i == 0 || j == 0 || i + 1 >= nx || j + 1 >= ny {
        return Err(Error::Index(format!("({i}, {j}) is not interior to {nx} x {ny}")));
    }
    Ok(OFFSETS
        .iter()
        .zip(w)
        .map(|(&(di, dj), wl)| {
            let ii = (i as i64 + di as i64) as usize;
            let jj = (j as i64 + dj as i64) as usize;
            wl * u[jj * nx + ii]
        })
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;
    use proptest::prelude::*;

    fn table1() -> PdeCoeffs {
        ModelParams::table1().pde_coeffs().unwrap()
    }

    fn coeffs() -> impl Strategy<Value = PdeCoeffs> {
        (0.05f64..1.0, 0.1f64..5.0, 0.01f64..1.0, -1.0f64..=1.0, 0.0f64..0.1)
            .prop_map(|(v, kappa, theta, rho, r)| PdeCoeffs { v, kappa, theta, rho, r })
    }

    fn maxabs(w: &[f64]) -> f64 {
        w.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    #[test]
    fn gamma_centre_and_corners() {
        let c = table1();
        let w = elliptic_weights(&c, 1.0, 0.1).unwrap();
        assert_eq!(w.gamma[0], 2.0 / 3.0);
        let c0 = PdeCoeffs { rho: 0.0, ..c };
        let w = elliptic_weights(&c0, 1.7, 0.2).unwrap();
        assert_eq!(&w.gamma[5..], &[0.0; 4]);
        let a = w.alpha.iter().sum::<f64>();
        assert!(a.abs() <= 1e-12 * maxabs(&w.alpha));
    }

    #[test]
    fn alpha_kernel_at_table1() {
        let w = elliptic_weights(&table1(), 1.0, 0.1).unwrap();
        assert!(w.alpha.iter().sum::<f64>().abs() <= 1e-12 * maxabs(&w.alpha));
    }

    #[test]
    fn zero_y_is_singular() {
        assert!(matches!(elliptic_weights(&table1(), 0.0, 0.1), Err(Error::SingularCoefficient(_))));
        assert!(central_weights(&table1(), 0.0, 0.1).is_err());
    }

    #[test]
    fn beta_centre_has_time_free_term() {
        let c = table1();
        let (y, h) = (1.3, 0.1);
        let b = parabolic_weights(&c, y, h, 0.0, 0.5).unwrap();
        let want = 16.0 * c.v.powi(3) * y * h * h;
        assert!((b.beta[0] - want).abs() <= 1e-15 * want);
    }

    #[test]
    fn explicit_limit_has_no_alpha_on_new_level() {
        let c = table1();
        let (y, h) = (2.1, 0.05);
        let ew = elliptic_weights(&c, y, h).unwrap();
        let p = parabolic_weights(&c, y, h, 0.01, 0.0).unwrap();
        let s = 24.0 * c.v.powi(3) * h * h * y;
        for l in 0..9 {
            assert!((p.beta[l] - s * ew.gamma[l]).abs() <= 1e-14 * s);
        }
    }

    #[test]
    fn reconstruction_at_table1() {
        let c = table1();
        let (y, h, k) = (1.0, 0.1, 0.001);
        let ew = elliptic_weights(&c, y, h).unwrap();
        let p = parabolic_weights(&c, y, h, k, 0.5).unwrap();
        let s = 24.0 * c.v.powi(3) * h * h * y;
        let scale = maxabs(&p.beta);
        for l in 0..9 {
            let d = p.beta[l] - p.zeta[l] - s * k * ew.alpha[l];
            assert!(d.abs() <= 1e-10 * scale, "l={l} d={d}");
        }
    }

    #[test]
    fn central_corner_signs() {
        let c = table1();
        let (y, h) = (1.5, 0.1);
        let w = central_weights(&c, y, h).unwrap();
        let expect = -c.rho * c.v * y / (4.0 * h * h);
        assert_eq!(w[5], expect);
        assert_eq!(w[7], expect);
        assert_eq!(w[6], -expect);
        assert_eq!(w[8], -expect);
        assert!(w.iter().sum::<f64>().abs() < 1e-12 * maxabs(&w));
        let w0 = central_weights(&PdeCoeffs { rho: 0.0, ..c }, y, h).unwrap();
        assert_eq!(&w0[5..], &[0.0; 4]);
    }

    #[test]
    fn apply_stencil_examples() {
        let (nx, ny) = (5, 4);
        let u: Vec<f64> = (0..nx * ny).map(|n| (n as f64).sin()).collect();
        let mut unit = [0.0; 9];
        unit[0] = 1.0;
        assert_eq!(apply_stencil(&unit, &u, nx, ny, 2, 1).unwrap(), u[nx + 2]);
        let ew = elliptic_weights(&table1(), 1.2, 0.1).unwrap();
        let cst = vec![3.5; nx * ny];
        let a = apply_stencil(&ew.alpha, &cst, nx, ny, 1, 2).unwrap();
        assert!(a.abs() <= 1e-12 * maxabs(&ew.alpha) * 3.5);
        let g = apply_stencil(&ew.gamma, &cst, nx, ny, 3, 1).unwrap();
        assert!((g - 3.5).abs() < 1e-14);
        assert!(apply_stencil(&unit, &u, nx, ny, 0, 1).is_err());
        assert!(apply_stencil(&unit, &u, nx, ny, 1, 3).is_err());
        // Neighbour mapping: E, N, W, S, NE, NW, SW, SE.
        for (l, &(di, dj)) in OFFSETS.iter().enumerate() {
            let mut w = [0.0; 9];
            w[l] = 1.0;
            let got = apply_stencil(&w, &u, nx, ny, 2, 2).unwrap();
            let want = u[((2 + dj) as usize) * nx + (2 + di) as usize];
            assert_eq!(got, want);
        }
    }

    #[test]
    fn paired_branches_follow_the_sign_convention() {
        // Upper (E, N, NE, NW) and lower (W, S, SW, SE) branches differ only in
        // the odd part, which vanishes as h -> 0 relative to the 1/h^2 part.
        let c = table1();
        let y = 1.4;
        for h in [0.1, 0.01] {
            let w = elliptic_weights(&c, y, h).unwrap();
            let d13 = w.alpha[1] - w.alpha[3];
            // Leading odd term of alpha_1 - alpha_3 is 2 * (v/6 - kappa rho/3) y / h - 2 (v r - kappa theta rho)/(3 v h).
            let lead = 2.0 * ((c.v / 6.0 - c.kappa * c.rho / 3.0) * y - (c.v * c.r - c.kappa * c.theta * c.rho) / (3.0 * c.v)) / h;
            assert!((d13 - lead).abs() < 0.2 * h.max(0.01) * lead.abs().max(1.0), "h={h}: {d13} vs {lead}");
            // gamma_1 - gamma_3 = -h/12 + (r - rho v) h / (6 v y)
            let g = w.gamma[1] - w.gamma[3];
            let want = -h / 12.0 + (c.r - c.rho * c.v) * h / (6.0 * c.v * y);
            assert!((g - want).abs() < 1e-15);
            let g = w.gamma[2] - w.gamma[4];
            let want = -c.kappa * h / (6.0 * c.v) - (c.v * c.v - c.kappa * c.theta) * h / (6.0 * c.v * c.v * y);
            assert!((g - want).abs() < 1e-15);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn kernel_and_consistency(c in coeffs(), y in 0.01f64..20.0, h in 0.001f64..1.0) {
            let w = elliptic_weights(&c, y, h).unwrap();
            let sa: f64 = w.alpha.iter().sum();
            let sg: f64 = w.gamma.iter().sum();
            prop_assert!(sa.abs() <= 1e-12 * maxabs(&w.alpha), "sum alpha = {}", sa);
            prop_assert!((sg - 1.0).abs() <= 1e-14 * maxabs(&w.gamma).max(1.0));
            prop_assert_eq!(w.gamma[0], 2.0 / 3.0);
        }

        #[test]
        fn reconstruction(c in coeffs(), y in 0.01f64..20.0, h in 0.001f64..1.0, k in 1e-6f64..1.0, mu in 0.0f64..=1.0) {
            let ew = elliptic_weights(&c, y, h).unwrap();
            let p = parabolic_weights(&c, y, h, k, mu).unwrap();
            let r = parabolic_from_elliptic(&c, &ew, y, h, k, mu);
            let scale = maxabs(&r.beta).max(maxabs(&r.zeta));
            for l in 0..9 {
                prop_assert!((p.beta[l] - r.beta[l]).abs() <= 1e-10 * scale, "beta[{}]", l);
                prop_assert!((p.zeta[l] - r.zeta[l]).abs() <= 1e-10 * scale, "zeta[{}]", l);
            }
            let sb: f64 = p.beta.iter().sum();
            let sz: f64 = p.zeta.iter().sum();
            prop_assert!((sb - sz).abs() <= 1e-10 * scale);
        }

        #[test]
        fn rho_reflection(c in coeffs(), y in 0.01f64..20.0, h in 0.001f64..1.0) {
            let a = elliptic_weights(&c, y, h).unwrap().gamma;
            let b = elliptic_weights(&PdeCoeffs { rho: -c.rho, ..c }, y, h).unwrap().gamma;
            prop_assert_eq!(a[5], -b[5]);
            prop_assert_eq!(a[7], -b[7]);
            prop_assert_eq!(a[6], -b[6]);
            prop_assert_eq!(a[8], -b[8]);
            prop_assert_eq!(a[5], -a[6]);
        }

        #[test]
        fn weights_are_smooth_in_y(c in coeffs(), y in 0.2f64..10.0, h in 0.01f64..0.5) {
            // Centred difference of each weight at two step sizes must agree
            // (a typo that breaks smoothness would not).
            let f = |yy: f64| {
                let e = elliptic_weights(&c, yy, h).unwrap();
                let p = parabolic_weights(&c, yy, h, 0.01, 0.5).unwrap();
                let mut all = Vec::with_capacity(36);
                all.extend(e.alpha); all.extend(e.gamma); all.extend(p.beta); all.extend(p.zeta);
                all
            };
            let (d1, d2) = (1e-5 * y, 5e-6 * y);
            let (p1, m1, p2, m2) = (f(y + d1), f(y - d1), f(y + d2), f(y - d2));
            let base = f(y);
            for n in 0..36 {
                let g1 = (p1[n] - m1[n]) / (2.0 * d1);
                let g2 = (p2[n] - m2[n]) / (2.0 * d2);
                let scale = g2.abs().max(base[n].abs() / y).max(1e-300);
                prop_assert!((g1 - g2).abs() <= 1e-6 * scale, "weight {}: {} vs {}", n, g1, g2);
            }
        }
    }
}

#[cfg(test)]
mod mms {
    //! Truncation order by manufactured solution
    //! `u = sin(2x) cos(3y) + x^2 y`.
    use super::*;
    use crate::model::ModelParams;

    fn exact(x: f64, y: f64) -> f64 {
        (2.0 * x).sin() * (3.0 * y).cos() + x * x * y
    }

    fn forcing(c: &PdeCoeffs, x: f64, y: f64) -> f64 {
        let (s2, c2, s3, c3) = ((2.0 * x).sin(), (2.0 * x).cos(), (3.0 * y).sin(), (3.0 * y).cos());
        let ux = 2.0 * c2 * c3 + 2.0 * x * y;
        let uy = -3.0 * s2 * s3 + x * x;
        let uxx = -4.0 * s2 * c3 + 2.0 * y;
        let uyy = -9.0 * s2 * c3;
        let uxy = -6.0 * c2 * s3 + 2.0 * x;
        -0.5 * c.v * y * (uxx + uyy) - c.rho * c.v * y * uxy + (0.5 * c.v * y - c.r) * ux
            - c.kappa * (c.theta - c.v * y) / c.v * uy
    }

    fn residual(c: &PdeCoeffs, scheme: Scheme, h: f64) -> f64 {
        let pts = [(0.3, 1.2), (-0.7, 2.5), (0.05, 0.9), (1.1, 4.0)];
        pts.iter()
            .map(|&(x, y)| {
                let (a, g) = match scheme {
                    Scheme::Hoc => {
                        let w = elliptic_weights(c, y, h).unwrap();
                        (w.alpha, w.gamma)
                    }
                    Scheme::Central => {
                        let mut g = [0.0; 9];
                        g[0] = 1.0;
                        (central_weights(c, y, h).unwrap(), g)
                    }
                };
                let mut res = 0.0;
                for (l, &(di, dj)) in OFFSETS.iter().enumerate() {
                    let (xl, yl) = (x + di as f64 * h, y + dj as f64 * h);
                    res += a[l] * exact(xl, yl) - g[l] * forcing(c, xl, yl);
                }
                res.abs()
            })
            .fold(0.0, f64::max)
    }

    fn slope(c: &PdeCoeffs, scheme: Scheme) -> f64 {
        let hs: [f64; 4] = [0.2, 0.1, 0.05, 0.025];
        let pts: Vec<(f64, f64)> = hs.iter().map(|&h| (h.ln(), residual(c, scheme, h).ln())).collect();
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        sxy / sxx
    }

    #[test]
    fn hoc_is_fourth_order() {
        for rho in [-0.5, 0.0, 0.7] {
            let c = PdeCoeffs { rho, ..ModelParams::table1().pde_coeffs().unwrap() };
            let m = slope(&c, Scheme::Hoc);
            assert!(m >= 3.7, "rho={rho}: slope {m}");
        }
    }

    #[test]
    fn central_is_second_order() {
        let c = ModelParams::table1().pde_coeffs().unwrap();
        let m = slope(&c, Scheme::Central);
        assert!((1.7..=2.3).contains(&m), "slope {m}");
    }
}

//! Uniform `(x, y)` grid, time step, node classification and the
//! fourth-order Neumann extrapolation rows.
//!
//! Nodes are `x_i = i h + delta` for `i = -N..=N` and `y_j = L2 + j h` for
//! `j = 0..=M`. Storage is row-major in `j` with `x` fastest:
//! `flat = j * (2N + 1) + (i + N)`.

use crate::error::{Error, Result};

/// Extrapolation weights applied to `(u_1, u_2, u_3)`.
pub const NEUMANN_WEIGHTS: [f64; 3] = [18.0 / 11.0, -9.0 / 11.0, 2.0 / 11.0];

/// Geometry as configured.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    /// Half-width of the x-domain before the offset.
    pub r1: f64,
    /// Lower y bound (must be > 0).
    pub l2: f64,
    /// Upper y bound.
    pub r2: f64,
    pub h: f64,
    /// Shift the x-grid by `h/2` so that `x = 0` is not a node.
    pub offset: bool,
    /// Parabolic mesh ratio `k / h^2`.
    pub mesh_ratio: f64,
    /// Time horizon covered by the time loop.
    pub horizon: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            r1: 2.0,
            l2: 0.4,
            r2: 10.0,
            h: 0.05,
            offset: true,
            mesh_ratio: 0.78125,
            horizon: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    /// Half-count of x-intervals.
    pub n: usize,
    /// Count of y-intervals.
    pub m: usize,
    pub h1: f64,
    pub h2: f64,
    pub k: f64,
    pub r1: f64,
    pub l2: f64,
    pub r2: f64,
    /// x-shift.
    pub delta: f64,
    pub n_steps: usize,
    pub horizon: f64,
    /// The mesh ratio that was asked for; `k / h^2` may differ when the
    /// horizon is not an integer multiple of `ratio * h^2`.
    pub requested_ratio: f64,
}

fn integral_count(len: f64, h: f64, what: &str) -> Result<usize> {
    let q = len / h;
    let n = q.round();
    if !(n >= 1.0) || (q - n).abs() > 1e-9 * q.max(1.0) {
        return Err(Error::Config(format!("{what} = {len} is not an integer multiple of h = {h}")));
    }
    Ok(n as usize)
}

/// Build the grid and time step.
///
/// `n_steps = ceil(horizon / (ratio h^2))`, so `k / h^2` equals the requested
/// ratio whenever the horizon is a multiple of `ratio h^2`, and is otherwise
/// the largest admissible ratio below it.
pub fn build_grid(spec: &GridSpec) -> Result<Grid> {
    let GridSpec { r1, l2, r2, h, offset, mesh_ratio, horizon } = *spec;
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Config(format!("h must be > 0, got {h}")));
    }
    if !(mesh_ratio > 0.0) {
        return Err(Error::Config(format!("mesh ratio must be > 0, got {mesh_ratio}")));
    }
    if !(l2 > 0.0) || !(r2 > l2) || !(r1 > 0.0) {
        return Err(Error::Config(format!(
            "domain needs r1 > 0 and 0 < l2 < r2, got r1={r1}, l2={l2}, r2={r2}"
        )));
    }
    if !(horizon >= 0.0) {
        return Err(Error::Config(format!("horizon must be >= 0, got {horizon}")));
    }
    let n = integral_count(r1, h, "r1")?;
    let m = integral_count(r2 - l2, h, "r2 - l2")?;
    if n < 2 || m < 3 {
        return Err(Error::GridTooSmall(format!("need N >= 2 and M >= 3, got N={n}, M={m}")));
    }
    let n_steps = if horizon == 0.0 {
        0
    } else {
        ((horizon / (mesh_ratio * h * h)) - 1e-9).ceil().max(1.0) as usize
    };
    let k = if n_steps == 0 { 0.0 } else { horizon / n_steps as f64 };
    Ok(Grid {
        n,
        m,
        h1: h,
        h2: h,
        k,
        r1,
        l2,
        r2,
        delta: if offset { 0.5 * h } else { 0.0 },
        n_steps,
        horizon,
        requested_ratio: mesh_ratio,
    })
}

impl Grid {
    pub fn h(&self) -> f64 {
        self.h1
    }
    pub fn nx(&self) -> usize {
        2 * self.n + 1
    }
    pub fn ny(&self) -> usize {
        self.m + 1
    }
    pub fn len(&self) -> usize {
        self.nx() * self.ny()
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    /// x-coordinate of column `ii` (`ii = i + N`).
    pub fn x(&self, ii: usize) -> f64 {
        (ii as f64 - self.n as f64) * self.h1 + self.delta
    }
    pub fn y(&self, j: usize) -> f64 {
        self.l2 + j as f64 * self.h2
    }
    pub fn xs(&self) -> Vec<f64> {
        (0..self.nx()).map(|ii| self.x(ii)).collect()
    }
    pub fn ys(&self) -> Vec<f64> {
        (0..self.ny()).map(|j| self.y(j)).collect()
    }
    pub fn idx(&self, ii: usize, j: usize) -> usize {
        j * self.nx() + ii
    }
    pub fn ij(&self, flat: usize) -> (usize, usize) {
        (flat % self.nx(), flat / self.nx())
    }
    /// Realised `k / h^2`.
    pub fn mesh_ratio(&self) -> f64 {
        self.k / (self.h1 * self.h1)
    }
    /// Whether the realised ratio matches the requested one.
    pub fn ratio_is_exact(&self) -> bool {
        (self.mesh_ratio() - self.requested_ratio).abs() <= 1e-12 * self.requested_ratio
    }
    /// Whether one step of the requested ratio fits in the horizon.
    pub fn ratio_is_realisable(&self) -> bool {
        self.requested_ratio * self.h1 * self.h1 <= self.horizon * (1.0 + 1e-12)
    }
    /// Time of level `n`.
    pub fn t(&self, level: usize) -> f64 {
        level as f64 * self.k
    }
}

/// Boundary role of a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    Interior,
    DirichletLeft,
    DirichletRight,
    NeumannBottom,
    NeumannTop,
}

/// Per-node tags; corners belong to the x-boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryClassification {
    pub nx: usize,
    pub tags: Vec<BoundaryTag>,
}

impl BoundaryClassification {
    pub fn tag(&self, ii: usize, j: usize) -> BoundaryTag {
        self.tags[j * self.nx + ii]
    }
}

pub fn tag_of(grid: &Grid, ii: usize, j: usize) -> BoundaryTag {
    if ii == 0 {
        BoundaryTag::DirichletLeft
    } else if ii + 1 == grid.nx() {
        BoundaryTag::DirichletRight
    } else if j == 0 {
        BoundaryTag::NeumannBottom
    } else if j == grid.m {
        BoundaryTag::NeumannTop
    } else {
        BoundaryTag::Interior
    }
}

pub fn classify(grid: &Grid) -> BoundaryClassification {
    let mut tags = Vec::with_capacity(grid.len());
    for j in 0..grid.ny() {
        for ii in 0..grid.nx() {
            tags.push(tag_of(grid, ii, j));
        }
    }
    BoundaryClassification { nx: grid.nx(), tags }
}

/// Boundary value from the three nearest interior values.
pub fn neumann_value(u1: f64, u2: f64, u3: f64) -> f64 {
    NEUMANN_WEIGHTS[0] * u1 + NEUMANN_WEIGHTS[1] * u2 + NEUMANN_WEIGHTS[2] * u3
}

/// Bottom and top values of a y-column `u_0..=u_M`.
pub fn neumann_extrapolate(column: &[f64]) -> Result<(f64, f64)> {
    let len = column.len();
    if len < 4 {
        return Err(Error::GridTooSmall(format!("Neumann extrapolation needs M >= 3, got M = {}", len as i64 - 1)));
    }
    let bottom = (18.0 * column[1] - 9.0 * column[2] + 2.0 * column[3]) / 11.0;
    let top = (18.0 * column[len - 2] - 9.0 * column[len - 3] + 2.0 * column[len - 4]) / 11.0;
    Ok((bottom, top))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec(r1: f64, l2: f64, r2: f64, h: f64, offset: bool) -> GridSpec {
        GridSpec { r1, l2, r2, h, offset, mesh_ratio: 0.5, horizon: 0.5 }
    }

    #[test]
    fn node_examples() {
        let g = build_grid(&spec(1.0, 0.5, 2.5, 0.5, false)).unwrap();
        assert_eq!(g.xs(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert_eq!(g.ys(), vec![0.5, 1.0, 1.5, 2.0, 2.5]);
        let g = build_grid(&spec(1.0, 0.5, 2.5, 0.5, true)).unwrap();
        assert_eq!(g.xs(), vec![-0.75, -0.25, 0.25, 0.75, 1.25]);
        assert!(g.xs().iter().all(|x| *x != 0.0));
    }

    #[test]
    fn build_errors() {
        assert!(matches!(build_grid(&spec(1.0, 0.5, 2.5, 0.3, false)), Err(Error::Config(_))));
        assert!(matches!(build_grid(&spec(1.0, 0.0, 2.5, 0.5, false)), Err(Error::Config(_))));
        assert!(matches!(build_grid(&spec(0.5, 0.5, 2.5, 0.5, false)), Err(Error::GridTooSmall(_))));
        assert!(matches!(build_grid(&spec(1.0, 0.5, 1.5, 0.5, false)), Err(Error::GridTooSmall(_))));
        let mut s = spec(1.0, 0.5, 2.5, 0.5, false);
        s.mesh_ratio = 0.0;
        assert!(build_grid(&s).is_err());
    }

    #[test]
    fn classification_examples() {
        let g = build_grid(&spec(1.0, 0.5, 2.5, 0.5, true)).unwrap();
        let c = classify(&g);
        let mid = g.n;
        for j in 0..g.ny() {
            assert_eq!(c.tag(0, j), BoundaryTag::DirichletLeft);
            assert_eq!(c.tag(g.nx() - 1, j), BoundaryTag::DirichletRight);
        }
        assert_eq!(c.tag(mid, 0), BoundaryTag::NeumannBottom);
        assert_eq!(c.tag(mid, g.m), BoundaryTag::NeumannTop);
        assert_eq!(c.tag(mid, 1), BoundaryTag::Interior);
        let interior = c.tags.iter().filter(|t| **t == BoundaryTag::Interior).count();
        assert_eq!(interior, (g.nx() - 2) * (g.ny() - 2));
    }

    #[test]
    fn neumann_examples() {
        assert_eq!(neumann_extrapolate(&[0.0, 11.0, 11.0, 11.0]).unwrap().0, 11.0);
        let c = vec![2.5; 7];
        let (b, t) = neumann_extrapolate(&c).unwrap();
        assert!((b - 2.5).abs() < 1e-15 && (t - 2.5).abs() < 1e-15);
        assert!(matches!(neumann_extrapolate(&[1.0, 2.0, 3.0]), Err(Error::GridTooSmall(_))));
    }

    #[test]
    fn ladder_quarters_k() {
        let mut s = GridSpec::default();
        let mut prev: Option<Grid> = None;
        for h in [0.4, 0.2, 0.1, 0.05] {
            s.h = h;
            let g = build_grid(&s).unwrap();
            assert!(g.ratio_is_exact(), "h={h}: ratio {}", g.mesh_ratio());
            assert!((g.xs().iter().fold(f64::MAX, |m, x| m.min(x.abs())) - h / 2.0).abs() < 1e-14);
            if let Some(p) = prev {
                assert_eq!(p.k, 4.0 * g.k);
            }
            prev = Some(g);
        }
    }

    #[test]
    fn zero_horizon_has_no_steps() {
        let g = build_grid(&GridSpec { horizon: 0.0, ..GridSpec::default() }).unwrap();
        assert_eq!(g.n_steps, 0);
    }

    proptest! {
        #[test]
        fn indexing_is_bijective(n in 2usize..12, m in 3usize..12) {
            let h = 0.25;
            let g = build_grid(&spec(n as f64 * h, 0.5, 0.5 + m as f64 * h, h, true)).unwrap();
            prop_assert_eq!(g.len(), (2 * n + 1) * (m + 1));
            let mut seen = vec![false; g.len()];
            for j in 0..g.ny() {
                for ii in 0..g.nx() {
                    let f = g.idx(ii, j);
                    prop_assert!(!seen[f]);
                    seen[f] = true;
                    prop_assert_eq!(g.ij(f), (ii, j));
                }
            }
        }

        #[test]
        fn offset_keeps_kink_off_grid(n in 2usize..200, hexp in -6i32..0) {
            let h = 2f64.powi(hexp);
            let g = build_grid(&spec(n as f64 * h, h, 5.0 * h, h, true)).unwrap();
            let dmin = g.xs().iter().fold(f64::MAX, |m, x| m.min(x.abs()));
            prop_assert!((dmin - h / 2.0).abs() <= 1e-12 * h);
        }

        #[test]
        fn extrapolation_exact_for_flat_cubics(y0 in -3.0f64..3.0, a in -5.0f64..5.0, b in -5.0f64..5.0, c in -5.0f64..5.0, h in 0.01f64..1.0) {
            // p(y) = a + b (y-y0)^2 + c (y-y0)^3 has p'(y0) = 0.
            let p = |y: f64| a + b * (y - y0).powi(2) + c * (y - y0).powi(3);
            let col: Vec<f64> = (0..6).map(|j| p(y0 + j as f64 * h)).collect();
            let (bottom, _) = neumann_extrapolate(&col).unwrap();
            prop_assert!((bottom - a).abs() <= 1e-12 * (1.0 + a.abs() + b.abs() + c.abs()));
            let top_col: Vec<f64> = (0..6).map(|j| p(y0 - (5 - j) as f64 * h)).collect();
            let (_, top) = neumann_extrapolate(&top_col).unwrap();
            prop_assert!((top - a).abs() <= 1e-12 * (1.0 + a.abs() + b.abs() + c.abs()));
        }
    }
}

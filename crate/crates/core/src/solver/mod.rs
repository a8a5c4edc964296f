//! System assembly and the time loop.
//!
//! Each step solves `LHS u^{n+1} = RHS u^n + g^{n+1}`. Interior rows carry
//! the `beta` (LHS) and `zeta` (RHS) weights. Dirichlet rows are identity
//! rows whose value comes from `g`. Neumann rows encode
//! `u_0 - (18 u_1 - 9 u_2 + 2 u_3)/11 = 0`.

pub mod linalg;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Grid, NEUMANN_WEIGHTS};
use crate::model::{dirichlet_left, initial_condition, ModelParams, PdeCoeffs};
use crate::stencil::{scheme_weights, Scheme, OFFSETS};
use linalg::{bicgstab, BandedLu, CsrMatrix, Ilu0};

/// Values `u_{i,j}` at one time level, row-major in `j` with `x` fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionField {
    pub values: Vec<f64>,
    pub time_level: usize,
    /// Time to maturity of this level.
    pub t: f64,
    pub nx: usize,
    pub ny: usize,
}

impl SolutionField {
    pub fn at(&self, ii: usize, j: usize) -> f64 {
        self.values[j * self.nx + ii]
    }
}

/// Boundary treatment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryMode {
    /// Dirichlet in x, Neumann extrapolation in y.
    Standard,
    /// Extrapolation rows on all four sides, with zero data. Test configuration
    /// in which constants are exact discrete solutions.
    AllNeumann,
}

/// Left and right hand side matrices of one `(k, mu)` pair.
#[derive(Debug, Clone)]
pub struct SystemPair {
    pub lhs: CsrMatrix,
    pub rhs: CsrMatrix,
}

fn extrapolation_row(at: usize, inward: [usize; 3]) -> Vec<(usize, f64)> {
    vec![
        (at, 1.0),
        (inward[0], -NEUMANN_WEIGHTS[0]),
        (inward[1], -NEUMANN_WEIGHTS[1]),
        (inward[2], -NEUMANN_WEIGHTS[2]),
    ]
}

/// Assemble the step matrices.
pub fn assemble(grid: &Grid, c: &PdeCoeffs, scheme: Scheme, k: f64, mu: f64, mode: BoundaryMode) -> Result<SystemPair> {
    if grid.m < 3 || grid.n < 2 {
        return Err(Error::GridTooSmall(format!("assembly needs M >= 3 and N >= 2, got M={}, N={}", grid.m, grid.n)));
    }
    if grid.l2 <= 0.0 {
        return Err(Error::SingularCoefficient(format!("y must stay > 0 on the domain, L2 = {}", grid.l2)));
    }
    let (nx, ny) = (grid.nx(), grid.ny());
    let h = grid.h();
    let rows: Vec<(Vec<Vec<(usize, f64)>>, Vec<Vec<(usize, f64)>>)> = (0..ny)
        .into_par_iter()
        .map(|j| -> Result<_> {
            let w = scheme_weights(scheme, c, grid.y(j), h, k, mu)?;
            let mut lrows = Vec::with_capacity(nx);
            let mut rrows = Vec::with_capacity(nx);
            for ii in 0..nx {
                let p = grid.idx(ii, j);
                let x_edge = ii == 0 || ii + 1 == nx;
                let y_edge = j == 0 || j + 1 == ny;
                if x_edge {
                    match mode {
                        BoundaryMode::Standard => lrows.push(vec![(p, 1.0)]),
                        BoundaryMode::AllNeumann => {
                            let inward = if ii == 0 {
                                [grid.idx(1, j), grid.idx(2, j), grid.idx(3, j)]
                            } else {
                                [grid.idx(nx - 2, j), grid.idx(nx - 3, j), grid.idx(nx - 4, j)]
                            };
                            lrows.push(extrapolation_row(p, inward));
                        }
                    }
                    rrows.push(Vec::new());
                } else if y_edge {
                    let inward = if j == 0 {
                        [grid.idx(ii, 1), grid.idx(ii, 2), grid.idx(ii, 3)]
                    } else {
                        [grid.idx(ii, ny - 2), grid.idx(ii, ny - 3), grid.idx(ii, ny - 4)]
                    };
                    lrows.push(extrapolation_row(p, inward));
                    rrows.push(Vec::new());
                } else {
                    let mut lr = Vec::with_capacity(9);
                    let mut rr = Vec::with_capacity(9);
                    for (l, &(di, dj)) in OFFSETS.iter().enumerate() {
                        let q = grid.idx((ii as i64 + di as i64) as usize, (j as i64 + dj as i64) as usize);
                        lr.push((q, w.beta[l]));
                        rr.push((q, w.zeta[l]));
                    }
                    lrows.push(lr);
                    rrows.push(rr);
                }
            }
            Ok((lrows, rrows))
        })
        .collect::<Result<_>>()?;
    let n = grid.len();
    let mut l_all = Vec::with_capacity(n);
    let mut r_all = Vec::with_capacity(n);
    for (l, r) in rows {
        l_all.extend(l);
        r_all.extend(r);
    }
    Ok(SystemPair {
        lhs: CsrMatrix::from_rows(n, l_all)?,
        rhs: CsrMatrix::from_rows(n, r_all)?,
    })
}

/// Linear solver selection and tolerances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverPolicy {
    /// Systems up to this many unknowns use the banded LU; larger ones BiCGSTAB.
    pub direct_max_unknowns: usize,
    pub krylov_tol: f64,
    pub krylov_max_iter: usize,
    /// Contract on `||b - A x|| / ||b||` per step.
    pub residual_tol: f64,
}

impl Default for SolverPolicy {
    fn default() -> Self {
        Self {
            direct_max_unknowns: 200_000,
            krylov_tol: 1e-12,
            krylov_max_iter: 2000,
            residual_tol: 1e-10,
        }
    }
}

enum Factorization {
    Direct(BandedLu),
    Krylov(Ilu0),
}

/// Factorised system for one `(k, mu)` pair.
pub struct Stepper {
    pub system: SystemPair,
    pub k: f64,
    pub mu: f64,
    policy: SolverPolicy,
    fact: Factorization,
}

impl Stepper {
    pub fn new(system: SystemPair, k: f64, mu: f64, policy: SolverPolicy) -> Result<Self> {
        let fact = if system.lhs.n <= policy.direct_max_unknowns {
            Factorization::Direct(BandedLu::factor(&system.lhs)?)
        } else {
            Factorization::Krylov(Ilu0::factor(&system.lhs)?)
        };
        Ok(Self { system, k, mu, policy, fact })
    }

    pub fn is_direct(&self) -> bool {
        matches!(self.fact, Factorization::Direct(_))
    }

    /// Solve `LHS x = b` starting from `guess`; returns `x` and the relative residual.
    pub fn solve(&self, b: &[f64], guess: &[f64]) -> Result<(Vec<f64>, f64)> {
        let a = &self.system.lhs;
        match &self.fact {
            Factorization::Direct(lu) => {
                let mut x = b.to_vec();
                lu.solve_in_place(&mut x);
                let mut res = a.relative_residual(&x, b);
                if res > self.policy.residual_tol {
                    // One step of iterative refinement.
                    let ax = a.matvec(&x);
                    let mut d: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
                    lu.solve_in_place(&mut d);
                    x.iter_mut().zip(&d).for_each(|(x, d)| *x += d);
                    res = a.relative_residual(&x, b);
                }
                Ok((x, res))
            }
            Factorization::Krylov(ilu) => {
                let mut x = guess.to_vec();
                let st = bicgstab(a, ilu, b, &mut x, self.policy.krylov_tol, self.policy.krylov_max_iter)?;
                Ok((x, st.residual))
            }
        }
    }
}

/// Time-stepping policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeLoopConfig {
    /// Weight of the new time level (1/2 is Crank-Nicolson).
    pub mu: f64,
    /// Replace the first step by fully implicit sub-steps.
    pub rannacher: bool,
    pub rannacher_substeps: usize,
    pub policy: SolverPolicy,
}

impl Default for TimeLoopConfig {
    fn default() -> Self {
        Self {
            mu: 0.5,
            rannacher: true,
            rannacher_substeps: 4,
            policy: SolverPolicy::default(),
        }
    }
}

impl TimeLoopConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.mu) {
            return Err(Error::Config(format!("mu must lie in [0, 1], got {}", self.mu)));
        }
        if self.rannacher && self.rannacher_substeps == 0 {
            return Err(Error::Config("rannacher_substeps must be >= 1".into()));
        }
        Ok(())
    }
}

/// Boundary data for the new level.
fn boundary_vector(grid: &Grid, p: &ModelParams, mode: BoundaryMode, t_next: f64, rhs: &mut [f64]) {
    if mode != BoundaryMode::Standard {
        return;
    }
    let left = dirichlet_left(p, grid.x(0), t_next);
    let last = grid.nx() - 1;
    for j in 0..grid.ny() {
        rhs[grid.idx(0, j)] = left;
        rhs[grid.idx(last, j)] = 0.0;
    }
}

/// Advance one level: solve `LHS u^{n+1} = RHS u^n + g(t_next)`.
pub fn step(
    u: &SolutionField,
    stepper: &Stepper,
    grid: &Grid,
    p: &ModelParams,
    mode: BoundaryMode,
    t_next: f64,
) -> Result<(SolutionField, f64)> {
    let mut b = stepper.system.rhs.matvec(&u.values);
    boundary_vector(grid, p, mode, t_next, &mut b);
    let (x, res) = stepper.solve(&b, &u.values).map_err(|e| Error::Step {
        step: u.time_level + 1,
        reason: e.to_string(),
        residual: f64::NAN,
    })?;
    if !(res <= stepper.policy.residual_tol) || x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Step {
            step: u.time_level + 1,
            reason: "linear residual above contract or non-finite solution".into(),
            residual: res,
        });
    }
    Ok((
        SolutionField {
            values: x,
            time_level: u.time_level + 1,
            t: t_next,
            nx: u.nx,
            ny: u.ny,
        },
        res,
    ))
}

/// Final field plus the per-step relative residuals.
#[derive(Debug, Clone)]
pub struct PdeSolution {
    pub field: SolutionField,
    pub residuals: Vec<f64>,
}

impl PdeSolution {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

/// Field of an initial condition on the grid.
pub fn initial_field(grid: &Grid, init: &(dyn Fn(f64, f64) -> f64 + Sync)) -> SolutionField {
    let mut values = Vec::with_capacity(grid.len());
    for j in 0..grid.ny() {
        let y = grid.y(j);
        for ii in 0..grid.nx() {
            values.push(init(grid.x(ii), y));
        }
    }
    SolutionField { values, time_level: 0, t: 0.0, nx: grid.nx(), ny: grid.ny() }
}

/// Evolve the put payoff to `t_tilde = horizon`.
pub fn solve_pde(p: &ModelParams, grid: &Grid, scheme: Scheme, cfg: &TimeLoopConfig) -> Result<PdeSolution> {
    let sol = solve_pde_with(p, grid, scheme, cfg, BoundaryMode::Standard, &|x, _| initial_condition(x))?;
    let (lo, hi) = sol
        .field
        .values
        .iter()
        .fold((f64::MAX, f64::MIN), |(a, b), v| (a.min(*v), b.max(*v)));
    if lo < -0.01 || hi > 1.01 {
        log::warn!("solution leaves [-0.01, 1.01]: min {lo:e}, max {hi:e}");
    }
    Ok(sol)
}

/// General time loop with a custom initial condition and boundary mode.
pub fn solve_pde_with(
    p: &ModelParams,
    grid: &Grid,
    scheme: Scheme,
    cfg: &TimeLoopConfig,
    mode: BoundaryMode,
    init: &(dyn Fn(f64, f64) -> f64 + Sync),
) -> Result<PdeSolution> {
    cfg.validate()?;
    let c = p.pde_coeffs()?;
    let mut u = initial_field(grid, init);
    let mut residuals = Vec::with_capacity(grid.n_steps + cfg.rannacher_substeps);
    if grid.n_steps == 0 {
        return Ok(PdeSolution { field: u, residuals });
    }
    let k = grid.k;
    let mut t = 0.0;
    let mut level = 0usize;
    let mut remaining = grid.n_steps;
    if cfg.rannacher {
        let sub = cfg.rannacher_substeps;
        let ks = k / sub as f64;
        let st = Stepper::new(assemble(grid, &c, scheme, ks, 1.0, mode)?, ks, 1.0, cfg.policy)?;
        for s in 1..=sub {
            t = (level as f64 + s as f64 / sub as f64) * k;
            let (next, res) = step(&u, &st, grid, p, mode, t)?;
            u = next;
            residuals.push(res);
        }
        level += 1;
        remaining -= 1;
    }
    if remaining > 0 {
        let st = Stepper::new(assemble(grid, &c, scheme, k, cfg.mu, mode)?, k, cfg.mu, cfg.policy)?;
        for _ in 0..remaining {
            level += 1;
            t = level as f64 * k;
            let (next, res) = step(&u, &st, grid, p, mode, t)?;
            u = next;
            residuals.push(res);
        }
    }
    u.time_level = level;
    u.t = t;
    Ok(PdeSolution { field: u, residuals })
}

/// Bilinear read-off of `u` at `(x, y)`.
pub fn probe(grid: &Grid, field: &SolutionField, x: f64, y: f64) -> Result<f64> {
    let (x0, x1) = (grid.x(0), grid.x(grid.nx() - 1));
    let (y0, y1) = (grid.y(0), grid.y(grid.ny() - 1));
    let tol = 1e-12 * grid.h();
    if x < x0 - tol || x > x1 + tol || y < y0 - tol || y > y1 + tol {
        return Err(Error::Domain(format!(
            "probe (x={x}, y={y}) outside the domain x in [{x0}, {x1}], y in [{y0}, {y1}]"
        )));
    }
    let h = grid.h();
    let fi = ((x - x0) / h).clamp(0.0, (grid.nx() - 1) as f64);
    let fj = ((y - y0) / h).clamp(0.0, (grid.ny() - 1) as f64);
    let i0 = (fi.floor() as usize).min(grid.nx() - 2);
    let j0 = (fj.floor() as usize).min(grid.ny() - 2);
    let (a, b) = (fi - i0 as f64, fj - j0 as f64);
    Ok((1.0 - a) * (1.0 - b) * field.at(i0, j0)
        + a * (1.0 - b) * field.at(i0 + 1, j0)
        + (1.0 - a) * b * field.at(i0, j0 + 1)
        + a * b * field.at(i0 + 1, j0 + 1))
}

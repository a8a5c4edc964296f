//! Solve the transformed Heston PDE with the compact scheme and compare the
//! prices at a few spots with the Fourier-integral price.
//!
//! cargo run --release --example price -- [h] [sigma]

use hoc_heston::analytic::heston_put;
use hoc_heston::grid::{build_grid, GridSpec};
use hoc_heston::model::{u_to_price, ModelParams};
use hoc_heston::solver::{probe, solve_pde, TimeLoopConfig};
use hoc_heston::stencil::Scheme;

fn main() -> hoc_heston::Result<()> {
    let mut args = std::env::args().skip(1);
    let h: f64 = args.next().map_or(0.05, |a| a.parse().expect("h"));
    let sigma: f64 = args.next().map_or(0.1, |a| a.parse().expect("sigma"));

    let p = ModelParams::table1();
    let grid = build_grid(&GridSpec { h, horizon: p.maturity, ..GridSpec::default() })?;
    println!("grid {} x {}, k = {:.3e}, {} steps", grid.nx(), grid.ny(), grid.k, grid.n_steps);

    let t0 = std::time::Instant::now();
    let sol = solve_pde(&p, &grid, Scheme::Hoc, &TimeLoopConfig::default())?;
    println!("solved in {:.2?}, max relative residual {:.1e}", t0.elapsed(), sol.max_residual());

    println!("{:>8} {:>12} {:>12} {:>10}", "S", "PDE", "Fourier", "diff");
    for s in [80.0, 90.0, 100.0, 110.0, 120.0] {
        let u = probe(&grid, &sol.field, (s / p.strike).ln(), sigma / p.v)?;
        let pde = u_to_price(&p, u, sol.field.t);
        let exact = heston_put(&p, s, sigma, 0.0)?;
        println!("{s:>8.1} {pde:>12.6} {exact:>12.6} {:>10.2e}", pde - exact);
    }
    Ok(())
}

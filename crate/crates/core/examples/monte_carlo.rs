//! Euler full-truncation Monte Carlo against the Fourier price.
//!
//! cargo run --release --example monte_carlo -- [paths] [steps]

use hoc_heston::analytic::{heston_put, mc_put, McConfig};
use hoc_heston::model::ModelParams;

fn main() -> hoc_heston::Result<()> {
    let mut args = std::env::args().skip(1);
    let n_paths: usize = args.next().map_or(200_000, |a| a.parse().expect("paths"));
    let n_steps: usize = args.next().map_or(200, |a| a.parse().expect("steps"));

    let p = ModelParams::table1();
    let cfg = McConfig { n_paths, n_steps, seed: 7 };
    println!("{:>6} {:>6} {:>11} {:>11} {:>9} {:>7}", "S", "sigma", "Fourier", "MC", "stderr", "z");
    for sigma in [0.1, 0.2] {
        for s in [80.0, 100.0, 120.0] {
            let exact = heston_put(&p, s, sigma, 0.0)?;
            let (mc, se) = mc_put(&p, s, sigma, &cfg)?;
            println!("{s:>6} {sigma:>6} {exact:>11.5} {mc:>11.5} {se:>9.5} {:>7.2}", (mc - exact) / se);
        }
    }
    Ok(())
}

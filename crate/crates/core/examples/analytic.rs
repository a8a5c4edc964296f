//! Semi-analytic Heston prices from the Fourier integral: both characteristic
//! function formulations, put-call parity, and a smile of implied variances.
//!
//! cargo run --release --example analytic

use hoc_heston::analytic::{heston_call, heston_put, heston_put_with, Formulation, FourierConfig};
use hoc_heston::model::ModelParams;

fn main() -> hoc_heston::Result<()> {
    let p = ModelParams::table1();
    let original = FourierConfig { formulation: Formulation::Original, ..FourierConfig::default() };
    let fwd_df = (-p.r * p.maturity).exp();

    println!("{:>6} {:>6} {:>12} {:>12} {:>10} {:>10}", "S", "sigma", "put", "call", "parity", "orig-trap");
    for sigma in [0.05, 0.1, 0.2] {
        for s in [70.0, 85.0, 100.0, 115.0, 130.0] {
            let put = heston_put(&p, s, sigma, 0.0)?;
            let call = heston_call(&p, s, sigma, 0.0)?;
            let parity = call - put - (s - p.strike * fwd_df);
            let orig = heston_put_with(&p, s, sigma, 0.0, &original)?;
            println!("{s:>6} {sigma:>6} {put:>12.6} {call:>12.6} {parity:>10.1e} {:>10.1e}", orig - put);
        }
    }

    // Long maturities are where the original formulation can jump branches.
    let long = ModelParams { maturity: 20.0, ..p };
    let trap = heston_put(&long, 100.0, 0.1, 0.0)?;
    let orig = heston_put_with(&long, 100.0, 0.1, 0.0, &original)?;
    println!("T = 20: trap-safe {trap:.6}, original {orig:.6}");
    Ok(())
}

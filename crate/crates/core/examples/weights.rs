//! The nine-point weights of the compact scheme at a few heights, with the
//! consistency sums.
//!
//! cargo run --release --example weights -- [h]

use hoc_heston::model::ModelParams;
use hoc_heston::stencil::{elliptic_weights, parabolic_weights, OFFSETS};

fn main() -> hoc_heston::Result<()> {
    let h: f64 = std::env::args().nth(1).map_or(0.1, |a| a.parse().expect("h"));
    let c = ModelParams::table1().pde_coeffs()?;
    let k = 0.78125 * h * h;

    for y in [0.5, 2.0, 8.0] {
        let e = elliptic_weights(&c, y, h)?;
        let pw = parabolic_weights(&c, y, h, k, 0.5)?;
        println!("y = {y}");
        println!("  {:>8} {:>13} {:>13} {:>13} {:>13}", "offset", "alpha", "gamma", "beta", "zeta");
        for l in 0..9 {
            println!(
                "  {:>8} {:>13.5e} {:>13.5e} {:>13.5e} {:>13.5e}",
                format!("{:?}", OFFSETS[l]),
                e.alpha[l],
                e.gamma[l],
                pw.beta[l],
                pw.zeta[l]
            );
        }
        let sum = |w: &[f64; 9]| w.iter().sum::<f64>();
        println!("  sum alpha = {:.1e}, sum gamma = {}", sum(&e.alpha), sum(&e.gamma));
    }
    Ok(())
}

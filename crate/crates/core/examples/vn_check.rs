//! Frozen-coefficient von Neumann analysis: search for the largest |G|^2 - 1
//! and compare the amplification factor computed from the stencil symbols
//! with the trigonometric closed form.
//!
//! cargo run --release --example vn_check -- [samples]

use hoc_heston::stability::{
    closed_form_criterion, exact_criterion, growth, stability_search, AmplificationQuery, Range, SearchBox,
};

fn main() -> hoc_heston::Result<()> {
    let samples: usize = std::env::args().nth(1).map_or(200_000, |a| a.parse().expect("samples"));

    for rho in [0.0, -0.25, -0.5, -0.75, -1.0] {
        let bx = SearchBox { rho: Range::fixed(rho), ..SearchBox::default() };
        let res = stability_search(&bx, samples, 42)?;
        let q = res.argmax;
        println!(
            "rho = {rho:>5}: max |G|^2-1 = {:.3e} at y = {:.3e}, h = {:.3e}, k = {:.3e} ({} singular samples)",
            res.max_value, q.y, q.h, q.k, res.singular
        );
    }

    // The same search restricted to the region the PDE grids cover with the
    // default model: y >= 0.4 and h <= 0.2.
    for rho in [0.0, -0.5] {
        let bx = SearchBox {
            h: Range::log(0.025, 0.2),
            k: Range::log(1e-4, 0.5),
            y: Range::lin(0.4, 10.0),
            v: Range::fixed(0.1),
            kappa: Range::fixed(2.0),
            theta: Range::fixed(0.1),
            rho: Range::fixed(rho),
            ..SearchBox::default()
        };
        let res = stability_search(&bx, samples, 42)?;
        println!("grid region, rho = {rho:>5}: max |G|^2-1 = {:.3e}", res.max_value);
    }

    // A single well-conditioned query evaluated three ways.
    let q = AmplificationQuery {
        z1: 0.7,
        z2: 2.1,
        h: 0.1,
        k: 0.01,
        y: 3.0,
        v: 0.1,
        kappa: 2.0,
        theta: 0.1,
        rho: 0.0,
        r: 0.0,
        mu: 0.5,
    };
    println!("direct       {:.15e}", growth(&q)?);
    println!("trig exact   {:.15e}", exact_criterion(&q)?);
    println!("reduced form {:.15e}", closed_form_criterion(&q)?);
    Ok(())
}

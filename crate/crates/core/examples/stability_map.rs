//! Error dependence on the parabolic mesh ratio k/h^2.
//!
//! cargo run --release --example stability_map -- [rho]

use hoc_heston::grid::GridSpec;
use hoc_heston::harness::{run_stability_map, CellFlag, ErrorRegion, MapConfig};
use hoc_heston::model::ModelParams;
use hoc_heston::solver::TimeLoopConfig;
use hoc_heston::stencil::Scheme;

fn main() -> hoc_heston::Result<()> {
    let rho: f64 = std::env::args().nth(1).map_or(-0.5, |a| a.parse().expect("rho"));
    let p = ModelParams { rho, ..ModelParams::table1() };
    let cfg = MapConfig {
        model: p,
        grid: GridSpec { horizon: p.maturity, ..GridSpec::default() },
        ratios: vec![0.1, 0.5, 1.0, 2.0, 5.0, 10.0],
        hs: vec![0.4, 0.2, 0.1],
        scheme: Scheme::Hoc,
        time: TimeLoopConfig::default(),
        reference_h: Some(0.05),
        reference_ratio: 0.78125,
        region: ErrorRegion::Interior,
    };
    let map = run_stability_map(&cfg)?;

    print!("{:>8}", "h \\ k/h2");
    for r in &map.ratios {
        print!(" {r:>11}");
    }
    println!();
    for (ih, h) in map.hs.iter().enumerate() {
        print!("{h:>8}");
        for ir in 0..map.ratios.len() {
            let c = map.cell(ir, ih);
            if c.flag == CellFlag::Ok {
                print!(" {:>11.3e}", c.eps2);
            } else {
                print!(" {:>11}", c.flag.to_string());
            }
        }
        println!();
    }
    for (h, spread) in map.spread_by_h() {
        println!("h = {h}: max/min eps2 = {}", spread.map_or("n/a".into(), |s| format!("{s:.3}")));
    }
    Ok(())
}

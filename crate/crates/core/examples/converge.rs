//! Grid convergence study at a fixed parabolic mesh ratio.
//!
//! cargo run --release --example converge -- [hoc|central] [offset|on-node] [nested-fine|analytic]
//!
//! The default nested-fine reference solves at h = 0.025 and takes a minute or so.

use hoc_heston::grid::GridSpec;
use hoc_heston::harness::{run_convergence, ConvergenceStudy, ErrorRegion, ReferenceMode};
use hoc_heston::model::ModelParams;
use hoc_heston::solver::TimeLoopConfig;
use hoc_heston::stencil::Scheme;

fn main() -> hoc_heston::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let scheme: Scheme = args.first().map_or(Ok(Scheme::Hoc), |s| s.parse())?;
    let offset = args.get(1).map_or(true, |s| s != "on-node");
    let reference: ReferenceMode = args.get(2).map_or(Ok(ReferenceMode::NestedFine), |s| s.parse())?;

    let p = ModelParams::table1();
    let study = ConvergenceStudy {
        model: p,
        grid: GridSpec { offset, horizon: p.maturity, ..GridSpec::default() },
        ladder: vec![0.4, 0.2, 0.1, 0.05],
        scheme,
        reference,
        region: ErrorRegion::Interior,
        time: TimeLoopConfig::default(),
    };
    let report = run_convergence(&study)?.into_result()?;

    println!("{:>8} {:>12} {:>12} {:>12} {:>8}", "h", "k", "eps2", "epsInf", "nodes");
    for r in &report.records {
        println!("{:>8} {:>12.4e} {:>12.4e} {:>12.4e} {:>8}", r.h, r.k, r.eps2, r.eps_inf, r.nodes);
    }
    if let (Some(s2), Some(si)) = (report.slope, report.slope_inf) {
        println!("slope eps2 = {:.3}, epsInf = {:.3}", s2.m, si.m);
    }
    Ok(())
}

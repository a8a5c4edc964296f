use hoc_heston::analytic::{heston_call, heston_put, mc_put, McConfig};
use hoc_heston::grid::{build_grid, GridSpec};
use hoc_heston::harness::{analytic_common_nodes, error_norms, ErrorRegion};
use hoc_heston::model::{u_to_price, ModelParams};
use hoc_heston::solver::{probe, solve_pde, TimeLoopConfig};
use hoc_heston::stencil::Scheme;

#[test]
fn fourier_and_monte_carlo_agree_at_the_money() {
    let p = ModelParams::table1();
    let exact = heston_put(&p, 100.0, 0.1, 0.0).unwrap();
    let (mc, se) = mc_put(&p, 100.0, 0.1, &McConfig { n_paths: 1_000_000, n_steps: 500, seed: 11 }).unwrap();
    assert!(se < 0.02, "stderr {se}");
    assert!((mc - exact).abs() <= 3.0 * se, "MC {mc} +- {se}, Fourier {exact}");
}

#[test]
fn fourier_grid_of_spots_agrees_with_monte_carlo() {
    let p = ModelParams { rho: -0.7, ..ModelParams::table1() };
    let cfg = McConfig { n_paths: 200_000, n_steps: 200, seed: 5 };
    for s in [85.0, 100.0, 115.0] {
        for sigma in [0.05, 0.1, 0.3] {
            let exact = heston_put(&p, s, sigma, 0.0).unwrap();
            let (mc, se) = mc_put(&p, s, sigma, &cfg).unwrap();
            assert!((mc - exact).abs() <= 4.0 * se, "S {s} sigma {sigma}: MC {mc} +- {se}, Fourier {exact}");
        }
    }
}

#[test]
fn put_call_parity_holds_across_parameters() {
    for (rho, lambda0, r) in [(-0.9, 0.0, 0.0), (0.0, 0.5, 0.03), (0.6, -0.2, 0.08)] {
        let p = ModelParams { rho, lambda0, r, ..ModelParams::table1() };
        for s in [70.0, 100.0, 140.0] {
            let put = heston_put(&p, s, 0.15, 0.0).unwrap();
            let call = heston_call(&p, s, 0.15, 0.0).unwrap();
            let parity = s - p.strike * (-p.r * p.maturity).exp();
            assert!((call - put - parity).abs() < 1e-7, "rho {rho} S {s}: {}", call - put - parity);
        }
    }
}

#[test]
fn pde_prices_approach_fourier_prices() {
    let p = ModelParams::table1();
    let mut worst = Vec::new();
    for h in [0.2, 0.1] {
        let grid = build_grid(&GridSpec { h, horizon: p.maturity, ..GridSpec::default() }).unwrap();
        let sol = solve_pde(&p, &grid, Scheme::Hoc, &TimeLoopConfig::default()).unwrap();
        assert!(sol.max_residual() < 1e-10);
        let mut w = 0.0f64;
        for s in [80.0, 100.0, 120.0] {
            let u = probe(&grid, &sol.field, (s / p.strike).ln(), 1.0).unwrap();
            let pde = u_to_price(&p, u, sol.field.t);
            let exact = heston_put(&p, s, 0.1, 0.0).unwrap();
            w = w.max((pde - exact).abs());
        }
        worst.push(w);
    }
    assert!(worst[1] < 0.25, "{worst:?}");
    assert!(worst[1] < worst[0], "{worst:?}");
}

#[test]
fn analytic_reference_error_shrinks_under_refinement() {
    let p = ModelParams::table1();
    let region = ErrorRegion::Window { x_lo: -1.0, x_hi: 1.0, y_lo: 1.0, y_hi: 6.0 };
    let mut errs = Vec::new();
    for h in [0.4, 0.2, 0.1] {
        let grid = build_grid(&GridSpec { h, horizon: p.maturity, ..GridSpec::default() }).unwrap();
        let sol = solve_pde(&p, &grid, Scheme::Hoc, &TimeLoopConfig::default()).unwrap();
        let nodes = analytic_common_nodes(&p, &grid, region).unwrap();
        errs.push(error_norms(h, &sol.field, &nodes).unwrap().eps2);
    }
    assert!(errs[0] > 2.5 * errs[1] && errs[1] > 2.5 * errs[2], "{errs:?}");
}

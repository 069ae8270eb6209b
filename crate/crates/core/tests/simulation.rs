use carbon_fbsde_core::burgers::{cap_centred_grid, solve_toy_pde};
use carbon_fbsde_core::pde::surface_gradient;
use carbon_fbsde_core::sde::*;
use carbon_fbsde_core::stats::VarianceEstimate;
use carbon_fbsde_core::*;

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

fn toy_surface(dx: f64) -> ValueSurface {
    let g = cap_centred_grid(0.0, 1.0, 400, 0.0, dx, (3.0 / dx).round() as usize).unwrap();
    solve_toy_pde(&g, &TerminalCondition::ramp(0.0, dx, 1.0).unwrap(), &SchemeConfig::with_substeps(10_000)).unwrap()
}

#[test]
fn batches_do_not_depend_on_the_pool_size() {
    let v = toy_surface(0.02);
    let run = || simulate_feedback_forward(&v, 0.5, 0.2, 3_000, 0.01, 17, &ForwardDynamics::Toy).unwrap();
    let (a, b) = (in_pool(1, run), in_pool(3, run));
    assert_eq!(a.terminal_values, b.terminal_values);
    let p = MarketParams::reference();
    let gbm = |threads| in_pool(threads, || simulate_gbm_euler(&p, 0.0, 1.0, 1.0, 2_000, 0.01, 5).unwrap());
    assert_eq!(gbm(1).terminal_values, gbm(2).terminal_values);
}

#[test]
fn wiener_integral_variance_identity() {
    let g = cap_centred_grid(0.0, 1.0, 10, 0.0, 0.1, 50).unwrap();
    let zero = ValueSurface::constant(g, 0.0, 1.0).unwrap();
    let batch = simulate_feedback_forward(&zero, 0.4, 0.0, 20_000, 0.05, 3, &ForwardDynamics::Toy).unwrap();
    let var = VarianceEstimate::from_samples(&batch.terminal_values);
    let exact = 0.6f64.powi(3) / 3.0;
    assert!((var.variance - exact).abs() <= 3.0 * var.standard_error, "{var:?} vs {exact}");
}

#[test]
fn malliavin_estimate_matches_the_surface_slope_off_the_cone() {
    let dx = 0.01;
    let v = toy_surface(dx);
    let grad = surface_gradient(&v);
    let i = v.grid().time_index(0.25).unwrap();
    for e in [-0.25, 1.1] {
        let est = malliavin_gradient_estimate(&v, &grad, 0.25, e, 40_000, 0.01, 8).unwrap();
        let fd = grad.at(i, v.grid().nearest_space_index(e));
        assert!(est.agrees_with(fd, 3.0, 5.0 * dx), "e {e}: {est:?} vs {fd}");
    }
}

#[test]
fn gbm_has_no_atom_at_the_cap() {
    let p = MarketParams::reference();
    let a = simulate_gbm(&p, 0.75, 1.0, 1.0, 20_000, 2).unwrap();
    let wide = terminal_mass_estimate(&a, p.cap, 0.04).unwrap();
    let narrow = terminal_mass_estimate(&a, p.cap, 0.01).unwrap();
    assert!(narrow.upper < wide.lower);
}

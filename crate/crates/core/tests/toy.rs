use carbon_fbsde_core::burgers::*;
use carbon_fbsde_core::*;

fn toy(term: &TerminalCondition, dx: f64) -> ValueSurface {
    let g = cap_centred_grid(0.0, 1.0, 200, 0.0, dx, (5.0 / dx).round() as usize).unwrap();
    solve_toy_pde(&g, term, &SchemeConfig::with_substeps(10_000)).unwrap()
}

#[test]
fn scaled_slope_stays_in_the_unit_interval() {
    let dx = 0.02;
    for term in [TerminalCondition::indicator(0.0, 1.0), TerminalCondition::ramp(0.0, 2.0 * dx, 1.0).unwrap()] {
        let v = toy(&term, dx);
        let r = scaled_slope_range(&v, 1.0);
        assert!(r.min >= 0.0 && r.max <= 1.0 + 5.0 * dx, "{r:?}");
        assert!(strict_gradient_margin(&v, 0.9) > 0.0);
    }
}

#[test]
fn ramps_conserve_their_integral_difference() {
    let dx = 0.02;
    let a = TerminalCondition::ramp(0.2, 2.0 * dx, 1.0).unwrap();
    let b = TerminalCondition::ramp(0.0, 4.0 * dx, 1.0).unwrap();
    let (va, vb) = (toy(&a, dx), toy(&b, dx));
    let exact = a.integral_difference(&b).unwrap();
    assert!((exact + 0.2).abs() < 1e-15);
    assert!(conservation_defect_against(&va, &vb, exact).unwrap() < 1e-9);
}

#[test]
fn surface_approaches_the_inviscid_profile_near_maturity() {
    let dx = 0.01;
    let v = toy(&TerminalCondition::indicator(0.0, 1.0), dx);
    let rep =
        check_boundary_envelopes(&v, &TerminalCondition::indicator(0.0, 1.0), GAUSSIAN_ENVELOPE_CONSTANT).unwrap();
    assert!(rep.fitted_c > 0.0 && rep.fitted_c.is_finite());
    assert!(rep.fitted_squeeze_c < 1.0, "{}", rep.fitted_squeeze_c);
    let g = v.grid();
    let i = g.time_index(0.95).unwrap();
    for e in [-0.5, 0.025, 0.5] {
        let psi = inviscid_profile(0.95, e, 0.0, 1.0).unwrap();
        assert!((v.interpolate_row(i, e) - psi).abs() < 0.2, "e {e}");
    }
}

#[test]
fn constant_noise_smooths_the_profile() {
    let dx = 0.02;
    let g = cap_centred_grid(0.0, 1.0, 200, 0.0, dx, 250).unwrap();
    let term = TerminalCondition::indicator(0.0, 1.0);
    let cfg = SchemeConfig::with_substeps(10_000);
    let degenerate = solve_toy_pde(&g, &term, &cfg).unwrap();
    let noisy = solve_toy_pde_with(&g, &term, &cfg, ToyDiffusion::Constant { sigma0: 0.5 }).unwrap();
    let i = g.time_index(0.9).unwrap();
    let j = g.nearest_space_index(-0.1);
    assert!(noisy.at(i, j) > degenerate.at(i, j));
}

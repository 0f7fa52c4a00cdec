//! Physical-field checks: entropy constancy, collapse profiles, blowup
//! exponents, rate signs, and ball integrals.

use std::sync::OnceLock;

use ril_core::flowfield::{
    collapse_profile, conserved_integrals, density_material_rate, radial_compression_rate,
    verify_isentropy, FieldEvaluator, FlowError, IntegralOptions, VERTICAL_TOL,
};
use ril_core::integrator::{assemble_gamma, lsq_slope, Gamma, Seed};
use ril_core::params::GasParams;
use ril_core::phaseplane::{critical_point, PointLabel};

fn reference() -> GasParams {
    GasParams::isentropic(3, 1.4, 1.05).unwrap()
}

fn vertical_ev() -> &'static FieldEvaluator {
    static EV: OnceLock<FieldEvaluator> = OnceLock::new();
    EV.get_or_init(|| {
        let p = reference();
        let g = assemble_gamma(&p, Seed::Vertical, 1.0).unwrap();
        FieldEvaluator::new(&g, &p).unwrap()
    })
}

fn tilted_gamma(ell: f64) -> Gamma {
    assemble_gamma(&reference(), Seed::Slope(ell), 1.0).unwrap()
}

fn tilted_ev() -> &'static (Gamma, FieldEvaluator) {
    static EV: OnceLock<(Gamma, FieldEvaluator)> = OnceLock::new();
    EV.get_or_init(|| {
        let p = reference();
        let g = tilted_gamma(12.0);
        let ev = FieldEvaluator::new(&g, &p).unwrap();
        (g, ev)
    })
}

fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// The free constant of the adiabatic integral is fixed so the density
/// profile is 1 at the anchor coordinate.
#[test]
fn density_is_normalized_at_the_anchor() {
    let p = reference();
    let ev = vertical_ev();
    // x9 = 1, so (t, r) = (1, 1) sits exactly at the anchor
    let s = ev.state(1.0, 1.0).unwrap();
    assert!((s.rho - 1.0).abs() < 1e-9, "rho at anchor: {}", s.rho);
    let p9 = critical_point(&p, PointLabel::P9).unwrap().location;
    let expect_c = -p9.c / p.lambda;
    assert!((s.c - expect_c).abs() < 1e-9 * expect_c.abs());
}

/// The entropy proxy is the same constant on both sides of the collapse
/// and across many decades of radius, and matches the closed form fixed
/// by the anchor.
#[test]
fn entropy_proxy_is_globally_constant() {
    let p = reference();
    let ev = vertical_ev();
    let rs = log_grid(1e-6, 1e3, 2500);
    for t in [-2.0, -0.5, 0.5, 2.0] {
        let dev = verify_isentropy(ev, t, &rs).unwrap();
        assert!(dev <= 1e-7, "t = {t}: max deviation {dev}");
    }
    let p9 = critical_point(&p, PointLabel::P9).unwrap().location;
    let c0 = p9.c * p9.c; // anchor x9 = 1
    let expect = c0 / (p.gamma * p.lambda * p.lambda);
    let got = ev.state(0.7, 3.0).unwrap().s_proxy;
    assert!((got - expect).abs() <= 1e-6 * expect.abs());
}

/// At the collapse instant the fields are exact power laws with the
/// amplitudes determined by the origin limits of the similarity profile.
#[test]
fn collapse_profile_matches_analytic_limits() {
    let p = reference();
    let (g, ev) = tilted_ev();
    let prof = collapse_profile(g, &p).unwrap();
    assert!(!prof.vertical);
    let ell = prof.ell.unwrap();
    assert!((ell - 12.0).abs() <= 0.12, "recovered slope {ell}");
    // Case 1 seed: outflow at collapse, compression handled below
    assert!(prof.nu < 0.0 && prof.omega < 0.0);

    for r in [1e-4, 0.3, 1.0, 47.0, 1e4] {
        let s = ev.state(0.0, r).unwrap();
        let amp = r.powf(1.0 - p.lambda);
        assert!((s.u - prof.u_amplitude * amp).abs() <= 1e-12 * s.u.abs());
        assert!((s.c - prof.c_amplitude * amp).abs() <= 1e-12 * s.c);
        assert!((s.rho - prof.rho_amplitude * r.powf(p.kappa)).abs() <= 1e-12 * s.rho);
        assert!(s.u > 0.0, "diverging flow at collapse");
    }

    // log-log slope of the collapse velocity profile
    let rs = log_grid(1e-3, 1e3, 40);
    let (lnr, lnu): (Vec<f64>, Vec<f64>) = rs
        .iter()
        .map(|&r| (r.ln(), ev.state(0.0, r).unwrap().u.abs().ln()))
        .unzip();
    let slope = lsq_slope(&lnr, &lnu);
    assert!((slope - (1.0 - p.lambda)).abs() <= 1e-6);
}

/// The vertical branch has no collapse velocity beyond origin-fit noise,
/// while the sound speed keeps its full power-law profile.
#[test]
fn vertical_branch_collapse_velocity_vanishes() {
    let p = reference();
    let g = assemble_gamma(&p, Seed::Vertical, 1.0).unwrap();
    let prof = collapse_profile(&g, &p).unwrap();
    assert!(prof.vertical);
    assert!(prof.ell.is_none());
    let ev = vertical_ev();
    for r in [1e-3, 1.0, 1e3] {
        let s = ev.state(0.0, r).unwrap();
        assert!(s.u.abs() <= VERTICAL_TOL * s.c, "residual u = {} at r = {r}", s.u);
        assert!(s.c > 0.0);
    }
}

/// Approaching the collapse instant through nonzero times, interpolated
/// states recover the blowup exponents without using the analytic t = 0
/// branch.
#[test]
fn blowup_exponents_recovered_off_axis() {
    let p = reference();
    let (g, ev) = tilted_ev();
    // keep x = t / r^lambda inside the lowest sampled decade, so every
    // state comes from the interpolated curve rather than the origin
    // fallback or the collapse closed form
    let t = 1e-8;
    let x_lo = 2.0 * g.lower_sigma.first().lnx.exp();
    let r_of = |x: f64| (t / x).powf(1.0 / p.lambda);
    let rs = log_grid(r_of(10.0 * x_lo), r_of(x_lo), 25);
    let mut lnr = Vec::new();
    let (mut ln_rho, mut ln_u, mut ln_c) = (Vec::new(), Vec::new(), Vec::new());
    for &r in &rs {
        let s = ev.state(t, r).unwrap();
        lnr.push(r.ln());
        ln_rho.push(s.rho.ln());
        ln_u.push(s.u.abs().ln());
        ln_c.push(s.c.ln());
    }
    let rho_slope = lsq_slope(&lnr, &ln_rho);
    let u_slope = lsq_slope(&lnr, &ln_u);
    let c_slope = lsq_slope(&lnr, &ln_c);
    assert!(
        (rho_slope - p.kappa).abs() <= 0.02 * p.kappa.abs(),
        "density exponent {rho_slope} vs {}",
        p.kappa
    );
    let ve = 1.0 - p.lambda;
    assert!((u_slope - ve).abs() <= 0.02 * ve.abs(), "velocity exponent {u_slope} vs {ve}");
    assert!((c_slope - ve).abs() <= 0.02 * ve.abs(), "sound exponent {c_slope} vs {ve}");
}

/// At collapse the diverging branch still compresses: the radial part of
/// the density rate is positive while the full material rate, dominated
/// by geometric dilution, is negative.
#[test]
fn density_rate_signs_at_collapse() {
    let (_, ev) = tilted_ev();
    for r in [0.1, 1.0, 10.0] {
        let radial = radial_compression_rate(ev, 0.0, r).unwrap();
        let material = density_material_rate(ev, 0.0, r).unwrap();
        assert!(radial > 0.0, "radial rate at r = {r}: {radial}");
        assert!(material < 0.0, "material rate at r = {r}: {material}");
    }
}

/// Pressure, internal energy, and sound speed satisfy the ideal-gas
/// relations at every sample.
#[test]
fn thermodynamic_chain_is_consistent() {
    let p = reference();
    let ev = vertical_ev();
    for t in [-1.5, 0.0, 0.02, 3.0] {
        for r in log_grid(1e-4, 1e2, 7) {
            let s = ev.state(t, r).unwrap();
            let tol = 1e-12;
            assert!((s.p - (p.gamma - 1.0) * s.rho * s.theta).abs() <= tol * s.p);
            assert!((s.c * s.c - p.gamma * s.p / s.rho).abs() <= tol * s.c * s.c);
            assert!((s.s_proxy - s.p / s.rho.powf(p.gamma)).abs() <= tol * s.s_proxy.abs());
        }
    }
}

/// Away from collapse the velocity vanishes linearly at the center with
/// the slope fixed by the far-field similarity limit.
#[test]
fn center_velocity_is_linear_off_collapse() {
    let p = reference();
    let ev = vertical_ev();
    let d = p.derived();
    for t in [1.0, -1.0, 0.25] {
        let expect = -d.v_star / (p.lambda * t);
        for r in [1e-7, 1e-6, 1e-5] {
            let s = ev.state(t, r).unwrap();
            assert!(
                (s.u / r - expect).abs() <= 1e-5 * expect.abs(),
                "t = {t}, r = {r}: u/r = {}, expect {expect}",
                s.u / r
            );
        }
    }
}

/// Quadrature self-convergence: tightening the tolerance tenfold moves
/// the ball integrals by less than 1e-6 relative.
#[test]
fn integrals_self_converge() {
    let ev = vertical_ev();
    let loose = conserved_integrals(ev, 1.0, 10.0, IntegralOptions { rel_tol: 1e-7, max_depth: 40 })
        .unwrap();
    let tight = conserved_integrals(ev, 1.0, 10.0, IntegralOptions { rel_tol: 1e-9, max_depth: 48 })
        .unwrap();
    for (a, b) in [
        (loose.mass, tight.mass),
        (loose.momentum_abs, tight.momentum_abs),
        (loose.energy, tight.energy),
    ] {
        assert!(a.is_finite() && a > 0.0);
        assert!((a - b).abs() <= 1e-6 * b.abs(), "{a} vs {b}");
    }
}

/// At the collapse instant the integrals are closed-form powers of the
/// ball radius.
#[test]
fn collapse_integrals_scale_exactly() {
    let p = reference();
    let ev = vertical_ev();
    let opts = IntegralOptions::default();
    let full = conserved_integrals(ev, 0.0, 1.0, opts).unwrap();
    let half = conserved_integrals(ev, 0.0, 0.5, opts).unwrap();
    let n = p.nf();
    let mass_ratio = 0.5f64.powf(p.kappa + n);
    let en_ratio = 0.5f64.powf(p.kappa + n + 2.0 - 2.0 * p.lambda);
    assert!((half.mass / full.mass - mass_ratio).abs() <= 1e-12);
    assert!((half.energy / full.energy - en_ratio).abs() <= 1e-12);
}

/// Off the collapse instant the far field still carries the power-law
/// tail, so doubling the ball radius scales the mass accordingly.
#[test]
fn mass_tail_scaling_off_collapse() {
    let p = reference();
    let ev = vertical_ev();
    let opts = IntegralOptions::default();
    let big = conserved_integrals(ev, 1.0, 200.0, opts).unwrap();
    let small = conserved_integrals(ev, 1.0, 100.0, opts).unwrap();
    let expect = 2.0f64.powf(p.kappa + p.nf());
    let got = big.mass / small.mass;
    assert!((got - expect).abs() <= 0.02 * expect, "mass ratio {got} vs {expect}");
}

/// Re-anchoring is a space-time rescaling: doubling the anchor halves the
/// velocity at doubled time and leaves the density there unchanged.
#[test]
fn anchor_rescaling_is_exact() {
    let p = reference();
    let g2 = assemble_gamma(&p, Seed::Vertical, 2.0).unwrap();
    let ev1 = vertical_ev();
    let ev2 = FieldEvaluator::new(&g2, &p).unwrap();
    for (t, r) in [(0.3, 0.7), (-1.2, 2.0), (4.0, 0.05)] {
        let a = ev1.state(t, r).unwrap();
        let b = ev2.state(2.0 * t, r).unwrap();
        assert!((b.u - 0.5 * a.u).abs() <= 1e-12 * a.u.abs().max(1e-30));
        assert!((b.rho - a.rho).abs() <= 1e-12 * a.rho);
        assert!((b.c - 0.5 * a.c).abs() <= 1e-12 * a.c);
    }
    let rs = log_grid(1e-5, 1e2, 500);
    assert!(verify_isentropy(&ev2, 1.0, &rs).unwrap() <= 1e-7);
}

/// No vacuum on compact sets excluding the collapse point.
#[test]
fn no_vacuum_off_the_collapse_point() {
    let ev = vertical_ev();
    let rs = log_grid(1e-6, 1e3, 200);
    let mut rho_min = f64::INFINITY;
    for t in [-1.0, -0.1, 0.0, 0.1, 1.0] {
        for &r in &rs {
            let s = ev.state(t, r).unwrap();
            assert!(s.rho.is_finite() && s.rho > 0.0, "t = {t}, r = {r}");
            assert!(s.c.is_finite() && s.c > 0.0, "t = {t}, r = {r}");
            rho_min = rho_min.min(s.rho);
        }
    }
    assert!(rho_min > 0.0);
}

/// Input validation on the singular point and the axis.
#[test]
fn singular_inputs_are_rejected() {
    let ev = vertical_ev();
    assert!(matches!(ev.state(0.0, 0.0), Err(FlowError::AtSingularity)));
    assert!(matches!(ev.state(1.0, 0.0), Err(FlowError::AtSingularity)));
    assert!(matches!(ev.state(1.0, -2.0), Err(FlowError::AtSingularity)));
    assert!(matches!(
        conserved_integrals(ev, 1.0, 0.0, IntegralOptions::default()),
        Err(FlowError::AtSingularity)
    ));
}

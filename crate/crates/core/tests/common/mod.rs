//! Shared helpers for the integration tests: an independent root finder
//! for the zero set {F = 0, G = 0}. Only the field evaluation itself is
//! shared with the library; Jacobians come from central differences so a
//! bug in the closed-form partials cannot hide here.

#![allow(dead_code)]

use ril_core::params::GasParams;
use ril_core::phaseplane::{fgd, PhasePoint};

/// Residual norm below which a point counts as a root. The fields are
/// polynomials with O(1) coefficients on the test boxes, so this is a
/// relative measure too; it sits close to the evaluation noise floor so
/// the position error stays below 1e-10 even at badly conditioned roots.
pub const ROOT_TOL: f64 = 1e-13;

fn residual(params: &GasParams, p: PhasePoint) -> (f64, f64, f64) {
    let (f, g, _) = fgd(p, params);
    (f, g, f.hypot(g))
}

/// Damped Newton iteration with finite-difference Jacobian. Returns the
/// converged root, or None if the iteration leaves the basin, hits a
/// singular Jacobian, or stalls without reaching `ROOT_TOL`.
pub fn newton_root(params: &GasParams, seed: PhasePoint) -> Option<PhasePoint> {
    let mut p = seed;
    for _ in 0..120 {
        let (f, g, norm) = residual(params, p);
        if norm <= ROOT_TOL {
            return Some(p);
        }
        let hv = 1e-7 * (1.0 + p.v.abs());
        let hc = 1e-7 * (1.0 + p.c.abs());
        let (f_vp, g_vp, _) = residual(params, PhasePoint::new(p.v + hv, p.c));
        let (f_vm, g_vm, _) = residual(params, PhasePoint::new(p.v - hv, p.c));
        let (f_cp, g_cp, _) = residual(params, PhasePoint::new(p.v, p.c + hc));
        let (f_cm, g_cm, _) = residual(params, PhasePoint::new(p.v, p.c - hc));
        let fv = (f_vp - f_vm) / (2.0 * hv);
        let fc = (f_cp - f_cm) / (2.0 * hc);
        let gv = (g_vp - g_vm) / (2.0 * hv);
        let gc = (g_cp - g_cm) / (2.0 * hc);
        let det = fv * gc - fc * gv;
        if det.abs() < 1e-100 {
            return None;
        }
        let dv = (f * gc - g * fc) / det;
        let dc = (fv * g - gv * f) / det;
        // backtracking line search on the residual norm
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..50 {
            let cand = PhasePoint::new(p.v - step * dv, p.c - step * dc);
            let (_, _, cn) = residual(params, cand);
            if cn < norm {
                accepted = Some(cand);
                break;
            }
            step *= 0.5;
        }
        p = accepted?;
    }
    let (_, _, norm) = residual(params, p);
    (norm <= ROOT_TOL).then_some(p)
}

/// Runs Newton from every node of a uniform grid over the given box and
/// returns the distinct converged roots (deduplicated at `merge_dist`).
pub fn grid_roots(
    params: &GasParams,
    v_range: (f64, f64),
    c_range: (f64, f64),
    nv: usize,
    nc: usize,
    merge_dist: f64,
) -> Vec<PhasePoint> {
    let mut roots: Vec<PhasePoint> = Vec::new();
    for i in 0..nv {
        let v = v_range.0 + (v_range.1 - v_range.0) * (i as f64) / ((nv - 1) as f64);
        for j in 0..nc {
            let c = c_range.0 + (c_range.1 - c_range.0) * (j as f64) / ((nc - 1) as f64);
            if let Some(r) = newton_root(params, PhasePoint::new(v, c)) {
                if !roots.iter().any(|q| q.dist(&r) < merge_dist) {
                    roots.push(r);
                }
            }
        }
    }
    roots
}

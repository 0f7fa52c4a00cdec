//! Trajectory tracing in the similarity plane: the desingularized field,
//! the branches connecting the origin to the lower triple point, barrier
//! containment, the continuation to infinite sound speed, recovery of the
//! similarity coordinate, and assembly of the global curve.

pub mod rk;

use crate::params::{self, GasParams, ParamError};
use crate::phaseplane::{
    self, critical_point, fgd, partials, PhaseError, PhasePoint, PointLabel,
};
use rk::{dp54_step, step_factor, RkOptions};
use serde::Serialize;
use thiserror::Error;

/// Distance from the origin at which branches are seeded (the field is
/// degenerate at the origin itself; the quadratic/linear leading-order
/// behavior supplies the seed).
pub const SEED_OFFSET: f64 = 1e-5;
/// Stopping radius around a node endpoint (infinite s-time at the node).
pub const NODE_RADIUS: f64 = 1e-7;
/// Radius at which departures from the node are seeded.
pub const NODE_DEPART: f64 = 1e-4;
/// Hand off to the compactifying (w, z) chart once C^2 exceeds this.
pub const CHART_SWITCH_C2: f64 = 25.0;
/// Bisection budget for departure-direction searches.
pub const BISECT_BUDGET: usize = 80;
/// Per-step phase-residual tolerance enforced on recorded trajectories:
/// |dC*avg(F,G)...| <= RESIDUAL_TOL * (|F|+|G|) * ds with trapezoid
/// averages of F and G over the step.
pub const RESIDUAL_TOL: f64 = 1e-8;
/// Relative slope mismatch at the origin accepted before the assembled
/// global curve is rejected as kinked.
pub const KINK_TOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrateError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Phase(#[from] PhaseError),
    #[error("parameter pair is not relevant; required trajectory structure is absent")]
    NotRelevant,
    #[error("seed slope 0 lies on the invariant axis and generates no branch")]
    BadSeed,
    #[error("trajectory left the trapping region through a barrier parabola at V={v}, C={c}")]
    BarrierExit { v: f64, c: f64 },
    #[error("sonic line reached away from a triple point at V={v}, C={c}")]
    SonicLineHit { v: f64, c: f64 },
    #[error("node not captured within the step budget")]
    NoNodeCapture,
    #[error("departure-direction bisection failed to separate within budget")]
    BisectionStall,
    #[error("recovered |x| is not strictly monotone along the branch")]
    NonMonotone,
    #[error("entry/exit slopes at the origin differ beyond tolerance: relative mismatch {mismatch}")]
    KinkAtOrigin { mismatch: f64 },
    #[error("step size underflow during integration")]
    StepUnderflow,
    #[error("anchor not applicable to this branch")]
    BadAnchor,
}

/// How a branch from the origin is seeded: vertically (tangent to the
/// C-axis, quadratic leading order) or along a finite slope C = l V.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Seed {
    Vertical,
    Slope(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum BranchKind {
    Sigma,
    SigmaPrime,
    Perturbed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BranchLabel {
    pub kind: BranchKind,
    /// Mirrored branches live in the upper half-plane (C > 0), where the
    /// similarity coordinate is negative.
    pub mirrored: bool,
}

impl BranchLabel {
    pub fn x_sign(&self) -> f64 {
        if self.mirrored {
            -1.0
        } else {
            1.0
        }
    }

    pub fn name(&self) -> String {
        let base = match self.kind {
            BranchKind::Sigma => "sigma".to_string(),
            BranchKind::SigmaPrime => "sigma_prime".to_string(),
            BranchKind::Perturbed(l) => format!("perturbed({l})"),
        };
        if self.mirrored {
            format!("{base}_mirror")
        } else {
            base
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Sample {
    pub s: f64,
    pub point: PhasePoint,
    /// ln|x|; trace-relative until the branch is anchored.
    pub lnx: f64,
    pub d: f64,
    pub f: f64,
    pub g: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub branch: BranchLabel,
    pub endpoints: (PointLabel, PointLabel),
    /// Orientation sign applied to (G, F) so ln|x| increases with s.
    pub sigma: f64,
    /// V at the first crossing of {G = 0} with V strictly between the
    /// interior and lower triple-point abscissas, when one occurred.
    pub crossing_v: Option<f64>,
    /// Analytic ln|x| increment from the node endpoint to the first
    /// sample (branches departing a node).
    pub start_bridge: Option<f64>,
    /// Analytic ln|x| increment from the last sample to the node
    /// endpoint (branches captured by a node).
    pub end_bridge: Option<f64>,
    pub anchored: bool,
}

impl Trajectory {
    pub fn first(&self) -> &Sample {
        self.samples.first().expect("trajectory has samples")
    }

    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectory has samples")
    }

    /// Signed similarity coordinate of sample i (anchored branches).
    pub fn x_at(&self, i: usize) -> f64 {
        self.branch.x_sign() * self.samples[i].lnx.exp()
    }

    /// ln|x| of the node endpoint on the end side, when it exists.
    pub fn end_node_lnx(&self) -> Option<f64> {
        self.end_bridge.map(|b| self.last().lnx + b)
    }

    /// ln|x| of the node endpoint on the start side, when it exists.
    pub fn start_node_lnx(&self) -> Option<f64> {
        self.start_bridge.map(|b| self.first().lnx - b)
    }

    /// Mirror image in the upper/lower half-plane: (V, C) -> (V, -C),
    /// x -> -x. |x| values are unchanged.
    pub fn mirror(&self) -> Trajectory {
        let samples = self
            .samples
            .iter()
            .map(|s| Sample {
                s: s.s,
                point: s.point.mirror(),
                lnx: s.lnx,
                d: s.d,
                f: -s.f,
                g: s.g,
            })
            .collect();
        Trajectory {
            samples,
            branch: BranchLabel {
                kind: self.branch.kind,
                mirrored: !self.branch.mirrored,
            },
            endpoints: (
                mirror_label(self.endpoints.0),
                mirror_label(self.endpoints.1),
            ),
            sigma: self.sigma,
            crossing_v: self.crossing_v,
            start_bridge: self.start_bridge,
            end_bridge: self.end_bridge,
            anchored: self.anchored,
        }
    }

    /// Writes `s,V,C,lnx,D,F,G,branch` rows, thinned to at most
    /// `max_rows` evenly strided samples (0 = all).
    pub fn write_csv<W: std::io::Write>(&self, out: &mut W, max_rows: usize) -> std::io::Result<()> {
        let stride = if max_rows == 0 || self.samples.len() <= max_rows {
            1
        } else {
            self.samples.len().div_ceil(max_rows)
        };
        let name = self.branch.name();
        for (i, s) in self.samples.iter().enumerate() {
            if i % stride != 0 && i != self.samples.len() - 1 {
                continue;
            }
            writeln!(
                out,
                "{:.14e},{:.14e},{:.14e},{:.14e},{:.14e},{:.14e},{:.14e},{}",
                s.s, s.point.v, s.point.c, s.lnx, s.d, s.f, s.g, name
            )?;
        }
        Ok(())
    }
}

pub const TRAJECTORY_CSV_HEADER: &str = "s,V,C,lnx,D,F,G,branch";

fn mirror_label(l: PointLabel) -> PointLabel {
    match l {
        PointLabel::P4 => PointLabel::P5,
        PointLabel::P5 => PointLabel::P4,
        PointLabel::P6 => PointLabel::P7,
        PointLabel::P7 => PointLabel::P6,
        PointLabel::P8 => PointLabel::P9,
        PointLabel::P9 => PointLabel::P8,
        PointLabel::PPlusInf => PointLabel::PMinusInf,
        PointLabel::PMinusInf => PointLabel::PPlusInf,
        other => other,
    }
}

/// The desingularized flow: (dV, dC, dln|x|)/ds = (sigma G, sigma F,
/// -sigma lambda D). Phase curves coincide with dC/dV = F/G away from
/// {G = 0}; sigma is fixed per branch so ln|x| increases with s.
pub fn desingularized_field(p: PhasePoint, params: &GasParams, sigma: f64) -> (f64, f64, f64) {
    let (f, g, d) = fgd(p, params);
    (sigma * g, sigma * f, -sigma * params.lambda * d)
}

fn phase_field<'a>(params: &'a GasParams, sigma: f64) -> impl Fn(&[f64; 3]) -> [f64; 3] + 'a {
    let lambda = params.lambda;
    move |y| {
        let (f, g, d) = fgd(PhasePoint::new(y[0], y[1]), params);
        [sigma * g, sigma * f, -sigma * lambda * d]
    }
}

/// One error-controlled step; `residual_ok` may veto an otherwise
/// accepted step (the step is then retried at half size with growth
/// capped, keeping the sample chain inside the phase-residual budget).
fn controlled_step<F, R>(
    field: &F,
    y: &[f64; 3],
    h: &mut f64,
    opts: &RkOptions,
    residual_ok: &R,
) -> Result<([f64; 3], f64), IntegrateError>
where
    F: Fn(&[f64; 3]) -> [f64; 3],
    R: Fn(&[f64; 3], &[f64; 3], f64) -> bool,
{
    let mut cap = 5.0f64;
    for _ in 0..200 {
        if !h.is_finite() || *h < 1e-15 {
            return Err(IntegrateError::StepUnderflow);
        }
        let out = dp54_step(field, y, *h, opts);
        if out.err_ratio > 1.0 {
            *h *= step_factor(out.err_ratio);
            continue;
        }
        if !residual_ok(y, &out.y, *h) {
            *h *= 0.5;
            cap = 1.2;
            continue;
        }
        let used = *h;
        *h = (*h * step_factor(out.err_ratio).min(cap)).min(opts.h_max);
        return Ok((out.y, used));
    }
    Err(IntegrateError::StepUnderflow)
}

fn phase_residual_ok(params: &GasParams, tol: Option<f64>) -> impl Fn(&[f64; 3], &[f64; 3], f64) -> bool + '_ {
    move |y0, y1, h| {
        let Some(tol) = tol else { return true };
        let (f0, g0, _) = fgd(PhasePoint::new(y0[0], y0[1]), params);
        let (f1, g1, _) = fgd(PhasePoint::new(y1[0], y1[1]), params);
        let fbar = 0.5 * (f0 + f1);
        let gbar = 0.5 * (g0 + g1);
        let res = ((y1[1] - y0[1]) * gbar - (y1[0] - y0[0]) * fbar).abs();
        res <= tol * (fbar.abs() + gbar.abs()) * h
    }
}

/// Locates a zero of `event` inside an accepted step by bisecting the
/// step fraction; each trial is a single embedded step from `y0`.
fn refine_event<F, E>(field: &F, y0: &[f64; 3], h: f64, opts: &RkOptions, event: &E) -> [f64; 3]
where
    F: Fn(&[f64; 3]) -> [f64; 3],
    E: Fn(&[f64; 3]) -> f64,
{
    let sign0 = event(y0) >= 0.0;
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    let mut y_hi = dp54_step(field, y0, h, opts).y;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let y_mid = dp54_step(field, y0, mid * h, opts).y;
        if (event(&y_mid) >= 0.0) == sign0 {
            lo = mid;
        } else {
            hi = mid;
            y_hi = y_mid;
        }
    }
    y_hi
}

fn sample_of(params: &GasParams, s: f64, y: &[f64; 3]) -> Sample {
    let point = PhasePoint::new(y[0], y[1]);
    let (f, g, d) = fgd(point, params);
    Sample { s, point, lnx: y[2], d, f, g }
}

/// Slow (primary) eigen-rate of the forward field at a node; the rate at
/// which generic trajectories approach or leave it.
fn node_slow_rate(params: &GasParams, label: PointLabel) -> Result<f64, IntegrateError> {
    let cp = critical_point(params, label)?;
    let cl = phaseplane::classify(&cp, params)?;
    let pd = partials(cp.location, params);
    Ok((cl.e1.expect("node classified") * pd.g_c).abs())
}

/// Traces the branch that leaves the origin with the given seed and is
/// captured by the lower triple-point node. The vertical branch is the
/// main connecting trajectory; finite slopes give the perturbed family.
/// The barrier parabolas are enforced on the vertical branch while it is
/// still above the node abscissa.
pub fn trace_sigma(params: &GasParams, seed: Seed) -> Result<Trajectory, IntegrateError> {
    params.require_isentropic()?;
    if !params::is_relevant(params.n, params.gamma, params.lambda)? {
        return Err(IntegrateError::NotRelevant);
    }
    let d = params.derived();
    let p9 = critical_point(params, PointLabel::P9)?.location;
    let abscissas = phaseplane::triple_abscissas(params);
    let v5 = abscissas.v4;
    let v9 = p9.v;
    let kappa_slow = node_slow_rate(params, PointLabel::P9)?;
    let beta = 2.0 * d.mu / (d.eps * params.lambda);
    let (beta1, beta2) = {
        let b = barrier_check(params)?;
        (b.beta1, b.beta2)
    };

    let (v0, c0, vertical) = match seed {
        Seed::Vertical => {
            let c = -SEED_OFFSET;
            (-beta * c * c, c, true)
        }
        Seed::Slope(l) => {
            if l == 0.0 || !l.is_finite() {
                return Err(IntegrateError::BadSeed);
            }
            let t = -l.signum() * SEED_OFFSET / (1.0 + l * l).sqrt();
            (t, t * l, false)
        }
    };

    let sigma = -1.0;
    let field = phase_field(params, sigma);
    let opts = RkOptions::default();
    let residual = phase_residual_ok(params, Some(RESIDUAL_TOL));
    let mut y = [v0, c0, 0.0];
    let mut s = 0.0;
    let mut h = opts.h_init;
    let mut samples = vec![sample_of(params, s, &y)];
    let mut crossing_v = None;
    let captured = loop {
        if samples.len() >= opts.max_steps {
            return Err(IntegrateError::NoNodeCapture);
        }
        let prev = y;
        let (next, used) = controlled_step(&field, &y, &mut h, &opts, &residual)?;
        y = next;
        s += used;

        let p = PhasePoint::new(y[0], y[1]);
        let (f, g, dd) = fgd(p, params);
        if p.dist(&p9) < NODE_RADIUS {
            samples.push(Sample { s, point: p, lnx: y[2], d: dd, f, g });
            break true;
        }
        if dd <= 0.0 {
            return Err(IntegrateError::SonicLineHit { v: p.v, c: p.c });
        }
        if vertical && p.v > v9 {
            let c2 = p.c * p.c;
            if p.v + beta1 * c2 <= 0.0 || p.v + beta2 * c2 >= 0.0 {
                return Err(IntegrateError::BarrierExit { v: p.v, c: p.c });
            }
        }
        if crossing_v.is_none() {
            let (_, g_prev, _) = fgd(PhasePoint::new(prev[0], prev[1]), params);
            if g_prev.signum() != g.signum() && g_prev != 0.0 {
                let yc = refine_event(&field, &prev, used, &opts, &|yy: &[f64; 3]| {
                    fgd(PhasePoint::new(yy[0], yy[1]), params).1
                });
                if yc[0] > v5 && yc[0] < v9 {
                    crossing_v = Some(yc[0]);
                }
            }
        }
        samples.push(Sample { s, point: p, lnx: y[2], d: dd, f, g });
    };
    debug_assert!(captured);

    // remaining ln|x| to the node: D decays exponentially over the
    // infinite s-time left, so the integral of -sigma*lambda*D ds
    // closes analytically; measure the decay rate from the last pair
    let end_bridge = {
        let k = samples.len();
        let rate = if k >= 2 {
            let (a, b) = (&samples[k - 2], &samples[k - 1]);
            if a.d > 0.0 && b.d > 0.0 && b.s > a.s {
                (a.d / b.d).ln() / (b.s - a.s)
            } else {
                0.0
            }
        } else {
            0.0
        };
        let rate = if rate > 0.0 { rate } else { kappa_slow };
        -sigma * params.lambda * samples[k - 1].d / rate
    };
    Ok(Trajectory {
        samples,
        branch: BranchLabel {
            kind: match seed {
                Seed::Vertical => BranchKind::Sigma,
                Seed::Slope(l) => BranchKind::Perturbed(l),
            },
            mirrored: false,
        },
        endpoints: (PointLabel::P1, PointLabel::P9),
        sigma,
        crossing_v,
        start_bridge: None,
        end_bridge: Some(end_bridge),
        anchored: false,
    })
}

/// Barrier parabola report. The vertical branch is trapped between
/// {V = -beta1 C^2} and {V = -beta2 C^2} exactly when prop_a holds; the
/// two crossing polynomials phi(.; beta1), phi(.; beta2) certify the
/// parabolas are one-way membranes (prop_b, prop_c).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BarrierReport {
    pub beta: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub prop_a: bool,
    pub prop_b: bool,
    pub prop_c: bool,
    /// Filled by the pipeline from the traced vertical branch.
    pub crossing_v: Option<f64>,
    pub phi_at_z5: f64,
    pub dphi_at_z5: f64,
    pub psi_at_zero: f64,
    pub psi_at_z9: f64,
}

impl BarrierReport {
    pub fn with_crossing(mut self, v: Option<f64>) -> Self {
        self.crossing_v = v;
        self
    }
}

pub fn barrier_check(params: &GasParams) -> Result<BarrierReport, IntegrateError> {
    params.require_isentropic()?;
    let d = params.derived();
    let n = params.nf();
    let abscissas = phaseplane::triple_abscissas(params);
    let v_plus = abscissas.v_plus.ok_or(IntegrateError::NotRelevant)?;
    let z5 = phaseplane::g_of_v(abscissas.v4, params);
    if !(z5 > 0.0) {
        return Err(IntegrateError::NotRelevant);
    }
    let z9 = (1.0 + v_plus) * (1.0 + v_plus);

    let beta = 2.0 * d.mu / (d.eps * params.lambda);
    let beta1 = 2.0 * (2.0 + n * d.eps) / (n * params.lambda * d.eps * d.eps);
    let beta2 = -v_plus / z9;
    let prop_a = beta1 > beta && beta > beta2;

    // phi(Z; b) = b^2 (m eps + 1) Z^2
    //           + [(n-2) + b (gamma lambda - gamma n - 2 lambda + n - 1)] Z
    //           + (lambda - 2 mu / (b eps))
    let coeffs = |b: f64| {
        (
            b * b * (d.m * d.eps + 1.0),
            (n - 2.0)
                + b * (params.gamma * params.lambda - params.gamma * n - 2.0 * params.lambda
                    + n
                    - 1.0),
            params.lambda - 2.0 * d.mu / (b * d.eps),
        )
    };
    let (a2_1, a1_1, a0_1) = coeffs(beta1);
    let (a2_2, a1_2, a0_2) = coeffs(beta2);
    let phi1 = |z: f64| (a2_1 * z + a1_1) * z + a0_1;
    let phi2 = |z: f64| (a2_2 * z + a1_2) * z + a0_2;

    let interior = |z_max: f64| (1..1000).map(move |i| z_max * i as f64 / 1000.0);
    let phi_at_z5 = phi1(z5);
    let dphi_at_z5 = 2.0 * a2_1 * z5 + a1_1;
    let psi_at_zero = phi2(0.0);
    let psi_at_z9 = phi2(z9);
    let scale1 = (a2_1 * z5 * z5).abs().max((a1_1 * z5).abs()).max(a0_1.abs());
    let scale2 = (a2_2 * z9 * z9).abs().max((a1_2 * z9).abs()).max(a0_2.abs());

    let prop_b = interior(z5).all(|z| phi1(z) > 0.0)
        && phi_at_z5.abs() <= 1e-10 * scale1
        && dphi_at_z5 < 0.0;
    let prop_c = interior(z9).all(|z| phi2(z) < 0.0)
        && psi_at_z9.abs() <= 1e-10 * scale2
        && psi_at_zero < 0.0;

    Ok(BarrierReport {
        beta,
        beta1,
        beta2,
        prop_a,
        prop_b,
        prop_c,
        crossing_v: None,
        phi_at_z5,
        dphi_at_z5,
        psi_at_zero,
        psi_at_z9,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum ShotSide {
    /// Exited through {G = 0}.
    B,
    /// Exited through {F = 0} or {V = V*}.
    A,
    /// Reached the stable-subspace neighborhood of the saddle at
    /// infinity without exiting.
    Converged,
}

#[derive(Debug, Clone, Copy)]
struct ChartEntry {
    theta: f64,
    w: f64,
    z: f64,
    lnx: f64,
    s: f64,
}

fn chart_field<'a>(params: &'a GasParams) -> impl Fn(&[f64; 3]) -> [f64; 3] + 'a {
    let d = params.derived();
    let n = params.nf();
    let lambda = params.lambda;
    move |y| {
        let (w, z) = (y[0], y[1]);
        let v = d.v_star + w;
        let ov = 1.0 + v;
        let phi = v * ov * (lambda + v);
        let pv = d.k1 * ov * ov - d.k2 * ov + d.k3;
        [
            n * w - z * phi,
            -2.0 * z * (1.0 - z * pv),
            -lambda * (z * ov * ov - 1.0),
        ]
    }
}

fn chart_residual_ok(params: &GasParams, tol: Option<f64>) -> impl Fn(&[f64; 3], &[f64; 3], f64) -> bool + '_ {
    let d = params.derived();
    move |y0, y1, h| {
        let Some(tol) = tol else { return true };
        let to_vc = |y: &[f64; 3]| PhasePoint::new(d.v_star + y[0], -y[1].powf(-0.5));
        let p0 = to_vc(y0);
        let p1 = to_vc(y1);
        let (f0, g0, _) = fgd(p0, params);
        let (f1, g1, _) = fgd(p1, params);
        let fbar = 0.5 * (f0 + f1);
        let gbar = 0.5 * (g0 + g1);
        let res = ((p1.c - p0.c) * gbar - (p1.v - p0.v) * fbar).abs();
        // the chart runs on its own rescaled parameter; the phase-curve
        // relation is parameterization-free, so scale by the arclength
        // the primal field would need for this displacement
        let ds = ((p1.v - p0.v).powi(2) + (p1.c - p0.c).powi(2)).sqrt()
            / (fbar.powi(2) + gbar.powi(2)).sqrt().max(1e-300);
        let _ = h;
        res <= tol * (fbar.abs() + gbar.abs()) * ds
    }
}

struct ChartRun {
    side: ShotSide,
    /// Samples in chart coordinates up to the closest subspace approach
    /// (only collected when `record` is set).
    samples: Vec<(f64, [f64; 3])>,
    best_rel: f64,
}

/// Integrates the chart system from y0 until the shot exits the trapped
/// wedge or converges to the stable subspace of the saddle at infinity.
fn run_chart(
    params: &GasParams,
    y0: [f64; 3],
    s0: f64,
    record: bool,
    residual_tol: Option<f64>,
) -> Result<ChartRun, IntegrateError> {
    let d = params.derived();
    let n = params.nf();
    let stable_slope = (n + d.a) / d.b;
    let field = chart_field(params);
    let residual = chart_residual_ok(params, residual_tol);
    let opts = RkOptions::default();
    let mut y = y0;
    let mut s = s0;
    let mut h = opts.h_init;
    let mut samples = Vec::new();
    let mut best_rel = f64::INFINITY;
    let mut best_idx = 0usize;
    if record {
        samples.push((s, y));
    }
    for _ in 0..opts.max_steps {
        let (next, used) = controlled_step(&field, &y, &mut h, &opts, &residual)?;
        y = next;
        s += used;
        let (w, z) = (y[0], y[1]);
        if record {
            samples.push((s, y));
        }
        if w >= 0.0 {
            return Ok(ChartRun { side: ShotSide::A, samples, best_rel });
        }
        let v = d.v_star + w;
        if n * w - z * (v * (1.0 + v) * (params.lambda + v)) <= 0.0 {
            return Ok(ChartRun { side: ShotSide::B, samples, best_rel });
        }
        let rel = (z - stable_slope * w).abs() / (z.abs() + w.abs());
        if rel < best_rel {
            best_rel = rel;
            best_idx = samples.len().max(1) - 1;
        }
        // past closest approach the recorded tail peels off the
        // connection and stops being useful; cut it there. Search shots
        // must keep going: an off-target shot grows its deviation long
        // before it commits to an exit, and cutting early would hide
        // which side it was on.
        if record && rel > 50.0 * best_rel {
            samples.truncate(best_idx + 1);
            return Ok(ChartRun { side: ShotSide::Converged, samples, best_rel });
        }
        // z below resolution: the shot has ridden the connection as far
        // as double precision allows
        if z < 1e-12 {
            if record {
                samples.truncate(best_idx + 1);
            }
            return Ok(ChartRun { side: ShotSide::Converged, samples, best_rel });
        }
    }
    Err(IntegrateError::NoNodeCapture)
}

struct PrimalShot {
    side: Option<ShotSide>,
    entry: Option<ChartEntry>,
    /// Samples recorded when requested, ending at the chart entry.
    samples: Vec<Sample>,
}

/// Integrates the primal field from the node-departure point at angle
/// theta until the shot exits the wedge or reaches the chart switch.
fn run_primal_shot(
    params: &GasParams,
    theta: f64,
    record: bool,
    residual_tol: Option<f64>,
) -> Result<PrimalShot, IntegrateError> {
    let d = params.derived();
    let p9 = critical_point(params, PointLabel::P9)?.location;
    let sigma = 1.0;
    let field = phase_field(params, sigma);
    let residual = phase_residual_ok(params, residual_tol);
    let opts = RkOptions::default();
    let mut y = [
        p9.v + NODE_DEPART * theta.cos(),
        p9.c + NODE_DEPART * theta.sin(),
        0.0,
    ];
    let mut s = 0.0;
    let mut h = opts.h_init;
    let mut samples = Vec::new();
    if record {
        samples.push(sample_of(params, s, &y));
    }
    for _ in 0..opts.max_steps {
        let prev = y;
        let (next, used) = controlled_step(&field, &y, &mut h, &opts, &residual)?;
        y = next;
        s += used;
        let p = PhasePoint::new(y[0], y[1]);
        let (f, g, _) = fgd(p, params);
        if g <= 0.0 {
            return Ok(PrimalShot { side: Some(ShotSide::B), entry: None, samples });
        }
        if f >= 0.0 || p.v >= d.v_star {
            return Ok(PrimalShot { side: Some(ShotSide::A), entry: None, samples });
        }
        if p.c * p.c >= CHART_SWITCH_C2 {
            // land exactly on the switch section
            let yc = refine_event(&field, &prev, used, &opts, &|yy: &[f64; 3]| {
                yy[1] * yy[1] - CHART_SWITCH_C2
            });
            let pc = PhasePoint::new(yc[0], yc[1]);
            if record {
                samples.push(sample_of(params, s, &yc));
            }
            return Ok(PrimalShot {
                side: None,
                entry: Some(ChartEntry {
                    theta,
                    w: pc.v - d.v_star,
                    z: 1.0 / (pc.c * pc.c),
                    lnx: yc[2],
                    s,
                }),
                samples,
            });
        }
        if record {
            samples.push(sample_of(params, s, &y));
        }
    }
    Err(IntegrateError::NoNodeCapture)
}

/// Traces the unique branch connecting the lower triple-point node to the
/// saddle at infinite sound speed. Two-stage direction search: bisection
/// on the departure angle at the node until double precision is
/// exhausted, then re-bisection of the chart-section offset; the final
/// run is recorded with the residual constraint and truncated at its
/// closest approach to the stable subspace.
pub fn trace_sigma_prime(params: &GasParams) -> Result<Trajectory, IntegrateError> {
    params.require_isentropic()?;
    if !params::is_relevant(params.n, params.gamma, params.lambda)? {
        return Err(IntegrateError::NotRelevant);
    }
    let d = params.derived();
    let p9 = critical_point(params, PointLabel::P9)?.location;
    let pd = partials(p9, params);
    let theta_g = (-pd.g_v / pd.g_c).atan();
    let theta_f = (-pd.f_v / pd.f_c).atan();
    let span = theta_f - theta_g;

    let classify_theta = |theta: f64| -> Result<(ShotSide, Option<ChartEntry>), IntegrateError> {
        let shot = run_primal_shot(params, theta, false, None)?;
        match (shot.side, shot.entry) {
            (Some(side), _) => Ok((side, None)),
            (None, Some(entry)) => {
                let run = run_chart(params, [entry.w, entry.z, entry.lnx], entry.s, false, None)?;
                Ok((run.side, Some(entry)))
            }
            _ => Err(IntegrateError::BisectionStall),
        }
    };

    // stage 1: angle bisection between the boundary tangents
    let mut th_b = theta_g + 1e-6 * span;
    let mut th_a = theta_f - 1e-6 * span;
    let (side_b, _) = classify_theta(th_b)?;
    let (side_a, _) = classify_theta(th_a)?;
    if side_b == side_a {
        return Err(IntegrateError::BisectionStall);
    }
    if side_b != ShotSide::B {
        std::mem::swap(&mut th_b, &mut th_a);
    }
    let mut entry: Option<ChartEntry> = None;
    for _ in 0..BISECT_BUDGET {
        let mid = 0.5 * (th_b + th_a);
        let (side, e) = classify_theta(mid)?;
        if let Some(e) = e {
            entry = Some(e);
        }
        match side {
            ShotSide::B => th_b = mid,
            ShotSide::A => th_a = mid,
            ShotSide::Converged => break,
        }
        if (th_a - th_b).abs() < 1e-15 {
            break;
        }
    }
    let entry = entry.ok_or(IntegrateError::BisectionStall)?;

    // stage 2: re-bisect the section offset at the chart switch; the
    // angle search saturates double precision while the section offset
    // still has headroom
    let side_of_w = |w: f64| -> Result<ShotSide, IntegrateError> {
        Ok(run_chart(params, [w, entry.z, entry.lnx], entry.s, false, None)?.side)
    };
    let mut k = 1e-9;
    let (mut w_b, mut w_a) = loop {
        let wl = entry.w * (1.0 + k);
        let wh = entry.w * (1.0 - k);
        match (side_of_w(wl)?, side_of_w(wh)?) {
            (ShotSide::B, ShotSide::A) => break (wl, wh),
            (ShotSide::A, ShotSide::B) => break (wh, wl),
            _ => {
                k *= 4.0;
                if k > 0.25 {
                    return Err(IntegrateError::BisectionStall);
                }
            }
        }
    };
    let mut w_best = 0.5 * (w_b + w_a);
    for _ in 0..BISECT_BUDGET {
        let mid = 0.5 * (w_b + w_a);
        w_best = mid;
        match side_of_w(mid)? {
            ShotSide::B => w_b = mid,
            ShotSide::A => w_a = mid,
            ShotSide::Converged => break,
        }
        if (w_a - w_b).abs() <= f64::EPSILON * w_best.abs() {
            break;
        }
    }

    // final recorded run: primal leg at the resolved angle, chart leg at
    // the resolved section offset
    let primal = run_primal_shot(params, entry.theta, true, Some(RESIDUAL_TOL))?;
    let entry_rec = primal.entry.ok_or(IntegrateError::BisectionStall)?;
    let mut samples = primal.samples;
    let chart = run_chart(
        params,
        [w_best, entry_rec.z, entry_rec.lnx],
        entry_rec.s,
        true,
        Some(RESIDUAL_TOL),
    )?;
    if chart.best_rel > 1e-4 {
        return Err(IntegrateError::BisectionStall);
    }
    for (s, y) in chart.samples.iter().skip(1) {
        let p = PhasePoint::new(d.v_star + y[0], -y[1].powf(-0.5));
        let (f, g, dd) = fgd(p, params);
        samples.push(Sample { s: *s, point: p, lnx: y[2], d: dd, f, g });
    }

    // bridge from the node to the departure sample: close the ln|x|
    // integral over the infinite s-time near the node with the measured
    // exponential growth rate of D
    let start_bridge = {
        let rate = if samples.len() >= 2 {
            let (a, b) = (&samples[0], &samples[1]);
            if a.d < 0.0 && b.d < 0.0 && b.s > a.s {
                (b.d / a.d).ln() / (b.s - a.s)
            } else {
                0.0
            }
        } else {
            0.0
        };
        let rate = if rate > 0.0 {
            rate
        } else {
            node_slow_rate(params, PointLabel::P9)?
        };
        -params.lambda * samples.first().expect("nonempty").d / rate
    };

    Ok(Trajectory {
        samples,
        branch: BranchLabel { kind: BranchKind::SigmaPrime, mirrored: false },
        endpoints: (PointLabel::P9, PointLabel::PMinusInf),
        sigma: 1.0,
        crossing_v: None,
        start_bridge: Some(start_bridge),
        end_bridge: None,
        anchored: false,
    })
}

/// Where the |x| anchor is applied.
#[derive(Debug, Clone, Copy)]
pub enum AnchorAt {
    StartNode,
    EndNode,
    Sample(usize),
}

#[derive(Debug, Clone, Copy)]
pub struct Anchor {
    pub at: AnchorAt,
    /// |x| value at the anchor location; must be positive.
    pub x_abs: f64,
}

/// Shifts the trace-relative ln|x| so the anchor holds, then verifies
/// strict monotonicity (a non-monotone recovery would mean the branch
/// crossed a sonic line away from a triple point).
pub fn recover_x(traj: &mut Trajectory, anchor: Anchor) -> Result<(), IntegrateError> {
    if !(anchor.x_abs > 0.0) || !anchor.x_abs.is_finite() {
        return Err(IntegrateError::BadAnchor);
    }
    let raw = match anchor.at {
        AnchorAt::StartNode => traj.start_node_lnx().ok_or(IntegrateError::BadAnchor)?,
        AnchorAt::EndNode => traj.end_node_lnx().ok_or(IntegrateError::BadAnchor)?,
        AnchorAt::Sample(i) => traj.samples.get(i).ok_or(IntegrateError::BadAnchor)?.lnx,
    };
    let shift = anchor.x_abs.ln() - raw;
    for s in &mut traj.samples {
        s.lnx += shift;
    }
    for pair in traj.samples.windows(2) {
        if !(pair[1].lnx > pair[0].lnx) {
            return Err(IntegrateError::NonMonotone);
        }
    }
    traj.anchored = true;
    Ok(())
}

/// Limits of V/x and C/x as the branch runs into the origin, from a
/// linear fit over the first decade of |x|. Requires an anchored branch
/// starting at the origin.
pub fn origin_limits(traj: &Trajectory) -> Result<(f64, f64), IntegrateError> {
    if !traj.anchored || traj.endpoints.0 != PointLabel::P1 {
        return Err(IntegrateError::BadAnchor);
    }
    let x_sign = traj.branch.x_sign();
    let lnx0 = traj.first().lnx;
    let window: Vec<&Sample> = traj
        .samples
        .iter()
        .take_while(|s| s.lnx <= lnx0 + std::f64::consts::LN_10)
        .collect();
    let fit = |value: &dyn Fn(&Sample) -> f64| -> f64 {
        // least-squares intercept of value = a + b*|x|
        let n = window.len() as f64;
        let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
        for s in &window {
            let x = s.lnx.exp();
            let y = value(s);
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        let det = n * sxx - sx * sx;
        if det == 0.0 {
            return sy / n;
        }
        (sy * sxx - sx * sxy) / det
    };
    let nu = fit(&|s: &Sample| s.point.v / (x_sign * s.lnx.exp()));
    let omega = fit(&|s: &Sample| s.point.c / (x_sign * s.lnx.exp()));
    Ok((nu, omega))
}

/// Least-squares slope of ys against xs.
pub fn lsq_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Log-log tail exponents of |V - V*| and |C| against |x| over the last
/// two decades of the branch.
pub fn tail_exponents(traj: &Trajectory, params: &GasParams) -> (f64, f64) {
    let v_star = params.derived().v_star;
    let lnx_max = traj.last().lnx;
    let lo = lnx_max - 2.0 * std::f64::consts::LN_10;
    let (mut xs, mut yv, mut yc) = (Vec::new(), Vec::new(), Vec::new());
    for s in &traj.samples {
        if s.lnx >= lo {
            xs.push(s.lnx);
            yv.push((s.point.v - v_star).abs().ln());
            yc.push(s.point.c.abs().ln());
        }
    }
    (lsq_slope(&xs, &yv), lsq_slope(&xs, &yc))
}

/// Fitted approach slope dC/dV toward a node endpoint, over samples at
/// distance (1e-6, 1e-3) from it.
pub fn approach_slope(traj: &Trajectory, target: PhasePoint) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for s in &traj.samples {
        let dist = s.point.dist(&target);
        if dist > 1e-6 && dist < 1e-3 {
            let dv = s.point.v - target.v;
            let dc = s.point.c - target.c;
            num += dv * dc;
            den += dv * dv;
        }
    }
    num / den
}

/// The assembled global trajectory: four anchored branches ordered by
/// the signed similarity coordinate. The upper half carries its own
/// anchor scale, fixed by matching the sound-speed collapse limit across
/// the origin (the scale freedom of each half is exactly one multiplier).
#[derive(Debug, Clone)]
pub struct Gamma {
    pub upper_sigma_prime: Trajectory,
    pub upper_sigma: Trajectory,
    pub lower_sigma: Trajectory,
    pub lower_sigma_prime: Trajectory,
    pub x9: f64,
    pub x9_upper: f64,
    pub nu: f64,
    pub omega: f64,
    pub seed: Seed,
}

impl Gamma {
    /// Segments in ascending global x order.
    pub fn segments(&self) -> [&Trajectory; 4] {
        [
            &self.upper_sigma_prime,
            &self.upper_sigma,
            &self.lower_sigma,
            &self.lower_sigma_prime,
        ]
    }

    pub fn write_csv<W: std::io::Write>(&self, out: &mut W, max_rows_per_branch: usize) -> std::io::Result<()> {
        writeln!(out, "{TRAJECTORY_CSV_HEADER}")?;
        for t in self.segments() {
            t.write_csv(out, max_rows_per_branch)?;
        }
        Ok(())
    }
}

/// Traces and assembles the four branches with a common anchor |x| = x9
/// at the lower node. For a finite seed slope l, the upper half is the
/// mirror of the branch seeded at -l, rescaled so both collapse limits
/// match across the origin; a residual slope mismatch is a kink and
/// rejects the assembly.
pub fn assemble_gamma(params: &GasParams, seed: Seed, x9: f64) -> Result<Gamma, IntegrateError> {
    let mut lower_sigma = trace_sigma(params, seed)?;
    recover_x(&mut lower_sigma, Anchor { at: AnchorAt::EndNode, x_abs: x9 })?;
    let mut lower_sigma_prime = trace_sigma_prime(params)?;
    recover_x(&mut lower_sigma_prime, Anchor { at: AnchorAt::StartNode, x_abs: x9 })?;
    let (nu_l, om_l) = origin_limits(&lower_sigma)?;

    let (upper_sigma, scale) = match seed {
        Seed::Vertical => (lower_sigma.mirror(), 1.0),
        Seed::Slope(l) => {
            let mut source = trace_sigma(params, Seed::Slope(-l))?;
            recover_x(&mut source, Anchor { at: AnchorAt::EndNode, x_abs: x9 })?;
            let upper = source.mirror();
            let (nu_u, om_u) = origin_limits(&upper)?;
            // one scale per half-plane: |x| -> scale*|x| divides both
            // limits by `scale`; match the sound-speed limit exactly
            let scale = om_u / om_l;
            let nu_matched = nu_u / scale;
            let mismatch = (nu_matched - nu_l).abs() / nu_l.abs().max(om_l.abs());
            if mismatch > KINK_TOL {
                return Err(IntegrateError::KinkAtOrigin { mismatch });
            }
            (upper, scale)
        }
    };
    let mut upper_sigma = upper_sigma;
    let mut upper_sigma_prime = lower_sigma_prime.mirror();
    let shift = scale.ln();
    for s in &mut upper_sigma.samples {
        s.lnx += shift;
    }
    for s in &mut upper_sigma_prime.samples {
        s.lnx += shift;
    }

    Ok(Gamma {
        upper_sigma_prime,
        upper_sigma,
        lower_sigma,
        lower_sigma_prime,
        x9,
        x9_upper: x9 * scale,
        nu: nu_l,
        omega: om_l,
        seed,
    })
}

/// Nonzero similarity coordinates at which the velocity profile V
/// changes sign along the assembled curve. The collapse point itself
/// (x = 0) is a junction between segments, not a stagnation point, and
/// never appears here.
pub fn stagnation_points(gamma: &Gamma) -> Vec<f64> {
    let mut out = Vec::new();
    for t in gamma.segments() {
        for pair in t.samples.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            if a.point.v * b.point.v < 0.0 {
                let xa = t.branch.x_sign() * a.lnx.exp();
                let xb = t.branch.x_sign() * b.lnx.exp();
                out.push(xa + (xb - xa) * (-a.point.v) / (b.point.v - a.point.v));
            }
        }
    }
    out.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    out
}

/// Empirical upper end of the "lambda close to 1" regime: the largest
/// lambda in (1, lambda_circ) for which the pair is relevant and all
/// three barrier properties hold, located by bisection. Returns 1.0 when
/// the regime is empty (e.g. n = 2).
pub fn sufficient_lambda(n: u32, gamma: f64) -> Result<f64, IntegrateError> {
    let circ = params::lambda_thresholds(n, gamma)?.lambda_circ;
    let pass = |lambda: f64| -> bool {
        let Ok(p) = GasParams::isentropic(n, gamma, lambda) else {
            return false;
        };
        if !params::is_relevant(n, gamma, lambda).unwrap_or(false) {
            return false;
        }
        barrier_check(&p)
            .map(|b| b.prop_a && b.prop_b && b.prop_c)
            .unwrap_or(false)
    };
    let mut lo = 1.0 + 1e-7;
    let mut hi = circ * (1.0 - 1e-7);
    if !pass(lo) {
        return Ok(1.0);
    }
    if pass(hi) {
        return Ok(hi);
    }
    for _ in 0..BISECT_BUDGET {
        let mid = 0.5 * (lo + hi);
        if pass(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

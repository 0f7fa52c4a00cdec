//! The reduced similarity-plane field: the cubics F, G and the sonic
//! factor D, their analytic partials, the critical points in closed form,
//! and node/saddle classification at each of them.

use crate::params::{GasParams, ParamError};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PhaseError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("classification undefined at {0:?}: discriminant vanishes within tolerance")]
    Degenerate(PointLabel),
    #[error("no real eigendirections at {0:?}: discriminant negative")]
    NoRealSlopes(PointLabel),
    #[error("{0:?} is not classified here")]
    Unclassifiable(PointLabel),
}

/// A state in the similarity plane. The sign of `c` encodes the
/// half-plane: the flows built here have x > 0 exactly where c < 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhasePoint {
    pub v: f64,
    pub c: f64,
}

impl PhasePoint {
    pub fn new(v: f64, c: f64) -> Self {
        PhasePoint { v, c }
    }

    pub fn mirror(&self) -> Self {
        PhasePoint { v: self.v, c: -self.c }
    }

    pub fn dist(&self, other: &PhasePoint) -> f64 {
        ((self.v - other.v).powi(2) + (self.c - other.c).powi(2)).sqrt()
    }
}

/// Evaluates (F, G, D) at a point:
///   F = C [ C^2 (1 + alpha/(1+V)) - k1 (1+V)^2 + k2 (1+V) - k3 ]
///   G = n C^2 (V - V*) - V (1+V) (lambda + V)
///   D = (1+V)^2 - C^2
pub fn fgd(p: PhasePoint, params: &GasParams) -> (f64, f64, f64) {
    let d = params.derived();
    let w = 1.0 + p.v;
    let c2 = p.c * p.c;
    let alpha_term = if d.alpha == 0.0 { 0.0 } else { d.alpha / w };
    let f = p.c * (c2 * (1.0 + alpha_term) - d.k1 * w * w + d.k2 * w - d.k3);
    let g = params.nf() * c2 * (p.v - d.v_star) - p.v * w * (params.lambda + p.v);
    (f, g, w * w - c2)
}

/// Analytic first partials of F and G.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PartialDerivatives {
    pub f_v: f64,
    pub f_c: f64,
    pub g_v: f64,
    pub g_c: f64,
}

pub fn partials(p: PhasePoint, params: &GasParams) -> PartialDerivatives {
    let d = params.derived();
    let n = params.nf();
    let w = 1.0 + p.v;
    let c2 = p.c * p.c;
    let pv = d.k1 * w * w - d.k2 * w + d.k3;
    let (alpha_term, alpha_dv) = if d.alpha == 0.0 {
        (0.0, 0.0)
    } else {
        (d.alpha / w, -d.alpha / (w * w))
    };
    PartialDerivatives {
        f_v: p.c * c2 * alpha_dv - p.c * (2.0 * d.k1 * w - d.k2),
        f_c: 3.0 * c2 * (1.0 + alpha_term) - pv,
        g_v: n * c2 - (w * (params.lambda + p.v) + p.v * (params.lambda + p.v) + p.v * w),
        g_c: 2.0 * n * p.c * (p.v - d.v_star),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PointLabel {
    P1,
    P2,
    P3,
    P4,
    P5,
    P6,
    P7,
    P8,
    P9,
    PPlusInf,
    PMinusInf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PointKind {
    Star,
    Node,
    Saddle,
    AtInfinitySaddle,
    Absent,
    Unclassified,
}

/// A located (and possibly classified) critical point. Even labels among
/// P4..P9 carry c > 0, odd ones c < 0. For the points at infinite sound
/// speed `at_infinity` is set and `location.c` holds a signed infinity;
/// their quantitative treatment lives in the compactifying chart.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CriticalPoint {
    pub label: PointLabel,
    pub location: PhasePoint,
    pub at_infinity: bool,
    pub kind: PointKind,
    pub w: Option<f64>,
    pub r2: Option<f64>,
    pub l1: Option<f64>,
    pub l2: Option<f64>,
    pub e1: Option<f64>,
    pub e2: Option<f64>,
}

impl CriticalPoint {
    fn bare(label: PointLabel, location: PhasePoint, kind: PointKind) -> Self {
        CriticalPoint {
            label,
            location,
            at_infinity: false,
            kind,
            w: None,
            r2: None,
            l1: None,
            l2: None,
            e1: None,
            e2: None,
        }
    }
}

/// Tolerance on radicands deciding presence of a critical point: absent
/// below -1e-12, degenerate (double root) within +-1e-12.
pub const PRESENCE_TOL: f64 = 1e-12;

/// C^2 as a function of V along the zero set of G away from the sonic
/// lines: g(V) = V (1+V) (lambda+V) / (n (V - V*)).
pub fn g_of_v(v: f64, params: &GasParams) -> f64 {
    let d = params.derived();
    v * (1.0 + v) * (params.lambda + v) / (params.nf() * (v - d.v_star))
}

/// The V-coordinates of the two families of off-axis critical points:
/// the sonic-line pair (V-, V+) when the radicand is nonnegative, plus
/// the interior pair abscissa V4.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TriplePointAbscissas {
    pub v4: f64,
    pub v_plus: Option<f64>,
    pub v_minus: Option<f64>,
}

pub fn triple_abscissas(params: &GasParams) -> TriplePointAbscissas {
    let d = params.derived();
    let n = params.nf();
    let v4 = -2.0 * params.lambda / (2.0 + n * d.eps);
    let t = (d.eps - 2.0) / (d.m * d.eps);
    let a_n = t * d.mu - 1.0;
    let q_n = t * t * d.mu * d.mu - 2.0 * ((d.eps + 2.0) / (d.m * d.eps)) * d.mu + 1.0;
    let (v_plus, v_minus) = if q_n < -PRESENCE_TOL {
        (None, None)
    } else {
        let s = q_n.max(0.0).sqrt();
        (Some(0.5 * (a_n + s)), Some(0.5 * (a_n - s)))
    };
    TriplePointAbscissas { v4, v_plus, v_minus }
}

/// Locates all critical points in closed form. Requires the isentropic
/// kappa. Points whose radicand is negative are reported with kind
/// `Absent` rather than dropped, so the list always has 11 entries in
/// label order P1..P9, P+inf, P-inf.
pub fn critical_points(params: &GasParams) -> Result<Vec<CriticalPoint>, PhaseError> {
    params.require_isentropic()?;
    let d = params.derived();
    let abscissas = triple_abscissas(params);
    let mut out = Vec::with_capacity(11);
    out.push(CriticalPoint::bare(
        PointLabel::P1,
        PhasePoint::new(0.0, 0.0),
        PointKind::Star,
    ));
    out.push(CriticalPoint::bare(
        PointLabel::P2,
        PhasePoint::new(-1.0, 0.0),
        PointKind::Unclassified,
    ));
    out.push(CriticalPoint::bare(
        PointLabel::P3,
        PhasePoint::new(-params.lambda, 0.0),
        PointKind::Unclassified,
    ));

    // interior pair on {G = 0}: present when g(V4) > 0
    let g4 = g_of_v(abscissas.v4, params);
    if g4 > PRESENCE_TOL {
        let c4 = g4.sqrt();
        out.push(CriticalPoint::bare(
            PointLabel::P4,
            PhasePoint::new(abscissas.v4, c4),
            PointKind::Unclassified,
        ));
        out.push(CriticalPoint::bare(
            PointLabel::P5,
            PhasePoint::new(abscissas.v4, -c4),
            PointKind::Unclassified,
        ));
    } else {
        let loc = PhasePoint::new(abscissas.v4, f64::NAN);
        out.push(CriticalPoint::bare(PointLabel::P4, loc, PointKind::Absent));
        out.push(CriticalPoint::bare(PointLabel::P5, loc, PointKind::Absent));
    }

    // sonic-line pairs at V-, V+: C = +-(1+V)
    let mut push_pair = |upper: PointLabel, lower: PointLabel, v: Option<f64>| match v {
        Some(v) if g_of_v(v, params) > PRESENCE_TOL => {
            let c = (1.0 + v).abs();
            out.push(CriticalPoint::bare(upper, PhasePoint::new(v, c), PointKind::Unclassified));
            out.push(CriticalPoint::bare(lower, PhasePoint::new(v, -c), PointKind::Unclassified));
        }
        _ => {
            let loc = PhasePoint::new(v.unwrap_or(f64::NAN), f64::NAN);
            out.push(CriticalPoint::bare(upper, loc, PointKind::Absent));
            out.push(CriticalPoint::bare(lower, loc, PointKind::Absent));
        }
    };
    push_pair(PointLabel::P6, PointLabel::P7, abscissas.v_minus);
    push_pair(PointLabel::P8, PointLabel::P9, abscissas.v_plus);

    for (label, sign) in [(PointLabel::PPlusInf, 1.0), (PointLabel::PMinusInf, -1.0)] {
        let mut cp = CriticalPoint::bare(
            label,
            PhasePoint::new(d.v_star, sign * f64::INFINITY),
            PointKind::AtInfinitySaddle,
        );
        cp.at_infinity = true;
        out.push(cp);
    }
    Ok(out)
}

/// Looks up one labelled point from [`critical_points`].
pub fn critical_point(params: &GasParams, label: PointLabel) -> Result<CriticalPoint, PhaseError> {
    Ok(critical_points(params)?
        .into_iter()
        .find(|cp| cp.label == label)
        .expect("list covers all labels"))
}

/// Fills Wronskian, discriminant, slopes, and exponents of a located
/// point and assigns its kind. The slope/exponent pair carrying the minus
/// sign of the discriminant root is the primary one; signs are swapped if
/// needed so |e1| < |e2|.
pub fn classify(cp: &CriticalPoint, params: &GasParams) -> Result<CriticalPoint, PhaseError> {
    match cp.kind {
        PointKind::Absent => return Err(PhaseError::Unclassifiable(cp.label)),
        PointKind::AtInfinitySaddle => return Ok(*cp),
        PointKind::Star => {
            let mut out = *cp;
            out.kind = PointKind::Star;
            return Ok(out);
        }
        _ => {}
    }
    if matches!(cp.label, PointLabel::P2 | PointLabel::P3) {
        return Err(PhaseError::Unclassifiable(cp.label));
    }
    let pd = partials(cp.location, params);
    let w = pd.f_c * pd.g_v - pd.f_v * pd.g_c;
    let r2 = (pd.f_c - pd.g_v).powi(2) + 4.0 * pd.f_v * pd.g_c;
    let scale = pd.f_c.abs().max(pd.g_v.abs()).max(pd.f_v.abs()).max(pd.g_c.abs());
    let tol = 1e-12 * scale * scale;
    if r2.abs() <= tol {
        return Err(PhaseError::Degenerate(cp.label));
    }
    if r2 < 0.0 {
        return Err(PhaseError::NoRealSlopes(cp.label));
    }
    let r = r2.sqrt();
    let tr = pd.f_c + pd.g_v;
    let (e_minus, e_plus) = ((tr - r) / (2.0 * pd.g_c), (tr + r) / (2.0 * pd.g_c));
    let (l_minus, l_plus) = (
        (pd.f_c - pd.g_v - r) / (2.0 * pd.g_c),
        (pd.f_c - pd.g_v + r) / (2.0 * pd.g_c),
    );
    let (e1, e2, l1, l2) = if e_minus.abs() <= e_plus.abs() {
        (e_minus, e_plus, l_minus, l_plus)
    } else {
        (e_plus, e_minus, l_plus, l_minus)
    };
    let mut out = *cp;
    out.w = Some(w);
    out.r2 = Some(r2);
    out.e1 = Some(e1);
    out.e2 = Some(e2);
    out.l1 = Some(l1);
    out.l2 = Some(l2);
    out.kind = if w > 0.0 { PointKind::Node } else { PointKind::Saddle };
    Ok(out)
}

/// The five slope quantities checked in order at the lower-right triple
/// point: -G_V/G_C < L1 < -F_V/F_C < -1 < 0 < L2.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SlopeOrdering {
    pub g_slope: f64,
    pub l1: f64,
    pub f_slope: f64,
    pub l2: f64,
    pub satisfied: bool,
}

pub fn slope_ordering(params: &GasParams) -> Result<SlopeOrdering, PhaseError> {
    let p9 = critical_point(params, PointLabel::P9)?;
    if p9.kind == PointKind::Absent {
        return Err(PhaseError::Unclassifiable(PointLabel::P9));
    }
    let cp = classify(&p9, params)?;
    let pd = partials(p9.location, params);
    let g_slope = -pd.g_v / pd.g_c;
    let f_slope = -pd.f_v / pd.f_c;
    let (l1, l2) = (cp.l1.unwrap(), cp.l2.unwrap());
    let satisfied = g_slope < l1 && l1 < f_slope && f_slope < -1.0 && l2 > 0.0;
    Ok(SlopeOrdering { g_slope, l1, f_slope, l2, satisfied })
}

/// Chart data near the critical points at infinite sound speed, in the
/// variables w = V - V*, z = C^-2 (lower half: C = -z^-1/2).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ChartField {
    /// Linearized slope field A z / (B z - n w) at (w, z).
    pub dz_dw_linear: f64,
    /// Stable-subspace slope (n + A) / B at the origin of the chart.
    pub stable_slope: f64,
    /// |V - V*| ~ |x|^v_exponent with v_exponent = -A/lambda.
    pub v_exponent: f64,
    /// |C| ~ |x|^c_exponent with c_exponent = A/(2 lambda).
    pub c_exponent: f64,
    /// Exact (unlinearized) chart dynamics at (w, z), rescaled by a
    /// positive factor; orientation applied by the caller:
    ///   dw/ds = n w - z Phi(V),  dz/ds = -2 z (1 - z P(V)),
    ///   dlnx/ds = -lambda (z (1+V)^2 - 1),
    /// with Phi(V) = V(1+V)(lambda+V), P(V) = k1(1+V)^2 - k2(1+V) + k3.
    pub dw_ds: f64,
    pub dz_ds: f64,
    pub dlnx_ds: f64,
}

pub fn infinity_chart_field(w: f64, z: f64, params: &GasParams) -> Result<ChartField, PhaseError> {
    params.require_isentropic()?;
    let d = params.derived();
    let n = params.nf();
    let v = d.v_star + w;
    let one_v = 1.0 + v;
    let phi = v * one_v * (params.lambda + v);
    let pv = d.k1 * one_v * one_v - d.k2 * one_v + d.k3;
    Ok(ChartField {
        dz_dw_linear: d.a * z / (d.b * z - n * w),
        stable_slope: (n + d.a) / d.b,
        v_exponent: -d.a / params.lambda,
        c_exponent: d.a / (2.0 * params.lambda),
        dw_ds: n * w - z * phi,
        dz_ds: -2.0 * z * (1.0 - z * pv),
        dlnx_ds: -params.lambda * (z * one_v * one_v - 1.0),
    })
}

//! Shock companions to the continuous flow: normal jump relations in
//! similarity variables, the exponent map a discontinuity induces on
//! approach slopes, the locus of post-shock states over the captured
//! branch, and the verification that this locus never meets the
//! assembled curve.

use crate::flowfield::density_similarity;
use crate::integrator::{Gamma, Trajectory};
use crate::par::par_map;
use crate::params::{GasParams, ParamError};
use crate::phaseplane::{critical_point, PhaseError, PhasePoint, PointLabel};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HugoniotError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Phase(#[from] PhaseError),
    #[error("ahead state is not supersonic: M^2 = {mach2}")]
    SonicAhead { mach2: f64 },
    #[error("no admissible post-shock branch at this state")]
    NoAdmissibleBranch,
    #[error("slope map evaluated at its pole sigma = (gamma - 3)/4")]
    AtPole,
    #[error("fewer than {got} of {needed} matched levels; curves barely overlap")]
    InsufficientOverlap { got: usize, needed: usize },
    #[error("locus requires an anchored branch ending at the lower node")]
    UnanchoredBranch,
}

/// Relative entropy-jump floor: values above -ENTROPY_FLOOR * scale count
/// as nonnegative (the jump vanishes quadratically at the sonic point and
/// round-off may land barely below zero there).
pub const ENTROPY_FLOOR: f64 = 1e-12;

/// An ahead/behind state pair connected by the normal jump relations at
/// one similarity coordinate.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ShockPair {
    pub x: f64,
    pub ahead: PhasePoint,
    pub behind: PhasePoint,
    /// Squared Mach number of the ahead state, (1+V)^2 / C^2.
    pub mach2: f64,
    /// Density ratio across the jump, R_behind / R_ahead.
    pub density_ratio: f64,
    /// Jump of the adiabatic invariant C^2 R^(1-gamma) / gamma.
    pub entropy_jump: f64,
    pub admissible: bool,
}

/// Normal-shock relations applied to an ahead state with density factor
/// r0. The behind state keeps the half-plane of the ahead state.
pub fn rh_jump(
    x: f64,
    ahead: PhasePoint,
    r0: f64,
    params: &GasParams,
) -> Result<ShockPair, HugoniotError> {
    let gamma = params.gamma;
    let eps = gamma - 1.0;
    let v0 = 1.0 + ahead.v;
    let c0sq = ahead.c * ahead.c;
    if !(v0 > 0.0) {
        return Err(HugoniotError::NoAdmissibleBranch);
    }
    let mach2 = v0 * v0 / c0sq;
    if !(mach2 > 1.0) {
        return Err(HugoniotError::SonicAhead { mach2 });
    }
    let v1 = v0 * (eps * mach2 + 2.0) / ((gamma + 1.0) * mach2);
    let c1sq = c0sq * (2.0 * gamma * mach2 - eps) * (eps * mach2 + 2.0)
        / ((gamma + 1.0) * (gamma + 1.0) * mach2);
    let behind = PhasePoint::new(v1 - 1.0, ahead.c.signum() * c1sq.sqrt());
    let density_ratio = v0 / v1;
    let r1 = r0 * density_ratio;
    let entropy_jump = (c1sq * r1.powf(-eps) - c0sq * r0.powf(-eps)) / gamma;
    let scale = c0sq * r0.powf(-eps) / gamma;
    let subsonic_behind = v1 * v1 < c1sq;
    let compressive = density_ratio > 1.0;
    let admissible = compressive && subsonic_behind && entropy_jump > -ENTROPY_FLOOR * scale;
    Ok(ShockPair {
        x,
        ahead,
        behind,
        mach2,
        density_ratio,
        entropy_jump,
        admissible,
    })
}

/// The slope map a weak discontinuity applies at the sonic node: an
/// approach slope sigma on the continuous side maps to
///   sigma_H = (gamma-1)/2 + (gamma+1) (sigma - (gamma-1)/2) / (gamma - 3 - 4 sigma)
/// on the shocked side. Fixed point at (gamma-1)/2, pole at (gamma-3)/4.
pub fn sigma_h(sigma: f64, params: &GasParams) -> Result<f64, HugoniotError> {
    let gamma = params.gamma;
    let half_eps = 0.5 * (gamma - 1.0);
    let den = gamma - 3.0 - 4.0 * sigma;
    if den.abs() <= 1e-14 * (1.0 + gamma.abs() + 4.0 * sigma.abs()) {
        return Err(HugoniotError::AtPole);
    }
    Ok(half_eps + (gamma + 1.0) * (sigma - half_eps) / den)
}

#[derive(Debug, Clone)]
pub struct HugoniotLocus {
    pub pairs: Vec<ShockPair>,
}

pub const LOCUS_CSV_HEADER: &str = "x,V_ahead,C_ahead,V_behind,C_behind,entropy_jump";

impl HugoniotLocus {
    /// Distance from the last (weakest-shock) behind state to a point;
    /// the locus closes onto the node as the ahead state goes sonic.
    pub fn endpoint_gap(&self, target: PhasePoint) -> f64 {
        self.pairs
            .iter()
            .map(|p| p.behind.dist(&target))
            .fold(f64::INFINITY, f64::min)
    }

    /// Fitted slope dC/dV of the behind curve into a node, over behind
    /// states at distance (lo, hi) from it.
    pub fn slope_at(&self, target: PhasePoint, lo: f64, hi: f64) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for p in &self.pairs {
            let dist = p.behind.dist(&target);
            if dist > lo && dist < hi {
                let dv = p.behind.v - target.v;
                let dc = p.behind.c - target.c;
                num += dv * dc;
                den += dv * dv;
            }
        }
        num / den
    }

    pub fn write_csv<W: std::io::Write>(&self, out: &mut W, max_rows: usize) -> std::io::Result<()> {
        writeln!(out, "{LOCUS_CSV_HEADER}")?;
        let stride = if max_rows == 0 || self.pairs.len() <= max_rows {
            1
        } else {
            self.pairs.len().div_ceil(max_rows)
        };
        for (i, p) in self.pairs.iter().enumerate() {
            if i % stride != 0 && i != self.pairs.len() - 1 {
                continue;
            }
            writeln!(
                out,
                "{:.14e},{:.14e},{:.14e},{:.14e},{:.14e},{:.14e}",
                p.x, p.ahead.v, p.ahead.c, p.behind.v, p.behind.c, p.entropy_jump
            )?;
        }
        Ok(())
    }
}

/// Post-shock states over every state of the captured branch, with the
/// ahead density factor taken from the adiabatic integral anchored at the
/// node. States the jump relations reject (sonic at the very endpoint)
/// are skipped.
pub fn hugoniot_locus(
    sigma_branch: &Trajectory,
    params: &GasParams,
) -> Result<HugoniotLocus, HugoniotError> {
    if !sigma_branch.anchored || sigma_branch.endpoints.1 != PointLabel::P9 {
        return Err(HugoniotError::UnanchoredBranch);
    }
    let p9 = critical_point(params, PointLabel::P9)?.location;
    let x9 = sigma_branch
        .end_node_lnx()
        .ok_or(HugoniotError::UnanchoredBranch)?
        .exp();
    let c0 = (p9.c / x9) * (p9.c / x9);
    let results = par_map(&sigma_branch.samples, |s| {
        let x = sigma_branch.branch.x_sign() * s.lnx.exp();
        let r0 = density_similarity(s.point.c, x, c0, params)
            .map_err(|_| HugoniotError::NoAdmissibleBranch)?;
        rh_jump(x, s.point, r0, params)
    });
    let mut pairs = Vec::with_capacity(results.len());
    for r in results {
        match r {
            Ok(p) => pairs.push(p),
            Err(HugoniotError::SonicAhead { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    if pairs.is_empty() {
        return Err(HugoniotError::NoAdmissibleBranch);
    }
    Ok(HugoniotLocus { pairs })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Verdict {
    /// Smallest phase-plane separation found between the post-shock
    /// locus and the assembled curve.
    NoIntersection { min_gap: f64 },
    Intersection { x_s: f64 },
}

/// Radius around the shared node endpoint excluded from the pointwise
/// comparison; inside it both curves meet at the node by construction
/// and their tangent wedges separate them.
pub const NODE_EXCLUSION: f64 = 1e-3;
/// Phase-plane gap below which two curves count as touching.
pub const GAP_TOL: f64 = 1e-6;
/// Minimum number of matched sound-speed levels for a meaningful
/// comparison against the captured branch.
pub const MIN_MATCHED: usize = 10;

/// Verifies that the post-shock locus never meets the assembled curve.
/// Two certificates: against the captured branch, V-gaps at matched
/// C-levels; against the continuation branch, strict separation by the
/// node abscissa (the locus stays on the far side, and the slope map
/// keeps its tangent wedge there).
pub fn intersection_test(
    gamma: &Gamma,
    locus: &HugoniotLocus,
    params: &GasParams,
) -> Result<Verdict, HugoniotError> {
    let p9 = critical_point(params, PointLabel::P9)?.location;
    let v9 = p9.v;
    let mut min_gap = f64::INFINITY;

    // matched C-levels against the captured branch: sort the usable
    // locus levels once, then each branch segment range-queries them
    let sigma = &gamma.lower_sigma;
    let mut order: Vec<usize> = (0..locus.pairs.len())
        .filter(|&i| locus.pairs[i].behind.dist(&p9) > NODE_EXCLUSION)
        .collect();
    order.sort_by(|&i, &j| {
        locus.pairs[i]
            .behind
            .c
            .partial_cmp(&locus.pairs[j].behind.c)
            .expect("finite")
    });
    let levels: Vec<f64> = order.iter().map(|&i| locus.pairs[i].behind.c).collect();
    let mut seen = vec![false; order.len()];
    let mut matched = 0usize;
    for w in sigma.samples.windows(2) {
        let (a, b) = (&w[0].point, &w[1].point);
        let (clo, chi) = if a.c <= b.c { (a.c, b.c) } else { (b.c, a.c) };
        if clo == chi {
            continue;
        }
        let start = levels.partition_point(|&c| c < clo);
        let end = levels.partition_point(|&c| c <= chi);
        for k in start..end {
            let pair = &locus.pairs[order[k]];
            let t = (pair.behind.c - a.c) / (b.c - a.c);
            let v_sigma = a.v + t * (b.v - a.v);
            let gap = (v_sigma - pair.behind.v).abs();
            if !seen[k] {
                seen[k] = true;
                matched += 1;
            }
            if gap < min_gap {
                min_gap = gap;
            }
            if gap <= GAP_TOL {
                return Ok(Verdict::Intersection { x_s: pair.x });
            }
        }
    }
    if matched < MIN_MATCHED {
        return Err(HugoniotError::InsufficientOverlap { got: matched, needed: MIN_MATCHED });
    }

    // separation from the continuation branch by the node abscissa
    for pair in locus.pairs.iter().filter(|p| p.behind.dist(&p9) > NODE_EXCLUSION) {
        let margin = v9 - pair.behind.v;
        if margin <= GAP_TOL {
            return Ok(Verdict::Intersection { x_s: pair.x });
        }
        min_gap = min_gap.min(margin);
    }
    for s in gamma
        .lower_sigma_prime
        .samples
        .iter()
        .filter(|s| s.point.dist(&p9) > NODE_EXCLUSION)
    {
        let margin = s.point.v - v9;
        if margin <= GAP_TOL {
            let x_s = gamma.lower_sigma_prime.branch.x_sign() * s.lnx.exp();
            return Ok(Verdict::Intersection { x_s });
        }
        min_gap = min_gap.min(margin);
    }

    Ok(Verdict::NoIntersection { min_gap })
}

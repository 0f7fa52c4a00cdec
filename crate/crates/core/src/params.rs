//! Parameter validation, derived constants, and the admissible-exponent
//! thresholds that decide whether a parameter pair supports the
//! shock-free collapse construction.

use serde::Serialize;
use thiserror::Error;

/// Relative guard band applied when comparing `lambda` against a
/// threshold. The theory uses strict inequalities; values within the band
/// of a boundary are treated as outside it.
pub const THRESHOLD_GUARD: f64 = 1e-9;

/// Largest accepted adiabatic index. Chosen to comfortably cover the
/// branch switch of `lambda_star` for n = 3 near gamma ~ 76.9.
pub const GAMMA_MAX: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("spatial dimension must be 2 or 3, got {0}")]
    Dimension(u32),
    #[error("gamma must be finite and lie in (1, {GAMMA_MAX}], got {0}")]
    Gamma(f64),
    #[error("lambda must be finite and > 1, got {0}")]
    Lambda(f64),
    #[error("kappa must be finite, got {0}")]
    Kappa(f64),
    #[error("operation requires the isentropic kappa = {expected}, got {got}")]
    NotIsentropic { got: f64, expected: f64 },
    #[error("discriminant radicand negative at gamma = {gamma}, lambda = {lambda}: outside the admissible band")]
    NegativeRadicand { gamma: f64, lambda: f64 },
}

/// The (n, gamma, lambda, kappa) tuple defining one self-similar flow
/// family: spatial dimension, adiabatic index, similarity exponent of the
/// collapse time scale, and density similarity exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GasParams {
    pub n: u32,
    pub gamma: f64,
    pub lambda: f64,
    pub kappa: f64,
}

/// The unique density exponent for which the specific entropy is constant
/// along the constructed flow. Always negative for gamma, lambda > 1.
pub fn kappa_isentropic(gamma: f64, lambda: f64) -> Result<f64, ParamError> {
    check_gamma(gamma)?;
    check_lambda(lambda)?;
    Ok(-2.0 * (lambda - 1.0) / (gamma - 1.0))
}

fn check_dimension(n: u32) -> Result<(), ParamError> {
    if n == 2 || n == 3 {
        Ok(())
    } else {
        Err(ParamError::Dimension(n))
    }
}

fn check_gamma(gamma: f64) -> Result<(), ParamError> {
    if gamma.is_finite() && gamma > 1.0 && gamma <= GAMMA_MAX {
        Ok(())
    } else {
        Err(ParamError::Gamma(gamma))
    }
}

fn check_lambda(lambda: f64) -> Result<(), ParamError> {
    if lambda.is_finite() && lambda > 1.0 {
        Ok(())
    } else {
        Err(ParamError::Lambda(lambda))
    }
}

impl GasParams {
    pub fn new(n: u32, gamma: f64, lambda: f64, kappa: f64) -> Result<Self, ParamError> {
        check_dimension(n)?;
        check_gamma(gamma)?;
        check_lambda(lambda)?;
        if !kappa.is_finite() {
            return Err(ParamError::Kappa(kappa));
        }
        Ok(GasParams { n, gamma, lambda, kappa })
    }

    /// Constructs the tuple with kappa fixed to its isentropic value.
    pub fn isentropic(n: u32, gamma: f64, lambda: f64) -> Result<Self, ParamError> {
        let kappa = kappa_isentropic(gamma, lambda)?;
        GasParams::new(n, gamma, lambda, kappa)
    }

    pub fn nf(&self) -> f64 {
        f64::from(self.n)
    }

    /// True when kappa is bit-identical to the isentropic value; the
    /// [`GasParams::isentropic`] constructor guarantees this.
    pub fn is_isentropic(&self) -> bool {
        match kappa_isentropic(self.gamma, self.lambda) {
            Ok(k) => k == self.kappa,
            Err(_) => false,
        }
    }

    pub fn require_isentropic(&self) -> Result<(), ParamError> {
        if self.is_isentropic() {
            Ok(())
        } else {
            Err(ParamError::NotIsentropic {
                got: self.kappa,
                expected: kappa_isentropic(self.gamma, self.lambda)
                    .unwrap_or(f64::NAN),
            })
        }
    }

    pub fn derived(&self) -> DerivedConstants {
        let n = self.nf();
        let m = n - 1.0;
        let mu = self.lambda - 1.0;
        let eps = self.gamma - 1.0;
        let v_star = (self.kappa - 2.0 * mu) / (n * self.gamma);
        let k1 = 1.0 + m * eps / 2.0;
        let k2 = (m * eps + (self.gamma - 3.0) * mu) / 2.0;
        let k3 = eps * mu / 2.0;
        // In isentropic mode the alpha formula cancels symbolically; the
        // branch keeps the cancellation exact instead of leaving round-off.
        let (alpha, a) = if self.is_isentropic() {
            (0.0, 2.0)
        } else {
            let alpha = (mu + 0.5 * self.kappa * eps) / self.gamma;
            (alpha, 2.0 * (1.0 + alpha / (1.0 + v_star)))
        };
        let b = v_star * (1.0 + v_star) * (self.lambda + v_star);
        DerivedConstants {
            m,
            mu,
            eps,
            v_star,
            k1,
            k2,
            k3,
            alpha,
            a,
            b,
            k_lazarus: m * (n * eps + 2.0),
        }
    }
}

/// Scalars derived from the parameter tuple. `a` and `b` are the
/// linearization coefficients of the chart that compactifies the two
/// critical points at infinite sound speed; `k_lazarus` scales the
/// factored Wronskians at the triple points.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DerivedConstants {
    pub m: f64,
    pub mu: f64,
    pub eps: f64,
    /// Vertical asymptote of the zero set of the radial cubic; < 0 in
    /// isentropic mode.
    pub v_star: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub alpha: f64,
    pub a: f64,
    pub b: f64,
    pub k_lazarus: f64,
}

/// The five lambda-bounds for a given (n, gamma). `lambda_check` is +inf
/// at gamma = 3 where its denominator vanishes.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ThresholdReport {
    /// Finite mass/momentum/energy bound.
    pub lambda_tilde: f64,
    /// Double-root bound for the triple points (radicand zero).
    pub lambda_hat: f64,
    /// Conjugate root of the same quadratic; irrelevant branch, +inf at
    /// gamma = 3.
    pub lambda_check: f64,
    /// min(lambda_hat, lambda_tilde); the two cross at gamma_plus for n = 3.
    pub lambda_star: f64,
    /// The working admissibility bound; always <= lambda_hat, lambda_tilde.
    pub lambda_circ: f64,
}

/// Branch-switch index for `lambda_star` at n = 3: 3(13 + 4*sqrt(10)).
pub fn gamma_plus() -> f64 {
    3.0 * (13.0 + 4.0 * 10f64.sqrt())
}

pub fn lambda_thresholds(n: u32, gamma: f64) -> Result<ThresholdReport, ParamError> {
    check_dimension(n)?;
    check_gamma(gamma)?;
    let nf = f64::from(n);
    let m = nf - 1.0;
    let eps = gamma - 1.0;
    let s8 = (8.0 * eps).sqrt();
    let lambda_tilde = 1.0 + (nf / 2.0) * (1.0 - 1.0 / gamma);
    let lambda_hat = 1.0 + m * eps / ((gamma + 1.0) + s8);
    // (gamma+1) - sqrt(8 eps) = (sqrt(eps) - sqrt(2))^2 >= 0, zero only at
    // gamma = 3.
    let den_check = (gamma + 1.0) - s8;
    let lambda_check = if den_check <= 0.0 {
        f64::INFINITY
    } else {
        1.0 + m * eps / den_check
    };
    let lambda_star = lambda_hat.min(lambda_tilde);
    let lambda_circ = match n {
        2 => {
            if gamma <= 2.0 {
                lambda_hat
            } else {
                gamma * std::f64::consts::SQRT_2 / (gamma + std::f64::consts::SQRT_2 - 1.0)
            }
        }
        _ => {
            if gamma <= 5.0 / 3.0 {
                lambda_hat
            } else {
                (3.0 * gamma - 1.0) / (3f64.sqrt() * eps + 2.0)
            }
        }
    };
    Ok(ThresholdReport {
        lambda_tilde,
        lambda_hat,
        lambda_check,
        lambda_star,
        lambda_circ,
    })
}

/// Radicand of the discriminant inequality,
/// (gamma-3)^2 mu^2 - 2 m (gamma^2-1) mu + m^2 (gamma-1)^2.
/// Positive exactly when the pair of triple points exists.
pub fn q_n(n: u32, gamma: f64, lambda: f64) -> f64 {
    let m = f64::from(n) - 1.0;
    let mu = lambda - 1.0;
    (gamma - 3.0).powi(2) * mu * mu - 2.0 * m * (gamma * gamma - 1.0) * mu
        + m * m * (gamma - 1.0).powi(2)
}

/// Evaluates the closed-form inequality equivalent to "the discriminant at
/// the lower triple point is positive", deciding nodality there.
pub fn discriminant_positive(n: u32, gamma: f64, lambda: f64) -> Result<bool, ParamError> {
    check_dimension(n)?;
    check_gamma(gamma)?;
    check_lambda(lambda)?;
    let q = q_n(n, gamma, lambda);
    if q < 0.0 {
        return Err(ParamError::NegativeRadicand { gamma, lambda });
    }
    let sq = q.sqrt();
    let mu = lambda - 1.0;
    let g = gamma;
    let (lhs, rhs) = if n == 2 {
        (
            4.0 * (g - 2.0) * ((g + 1.0) * mu - (g - 1.0)) * sq,
            (-4.0 * g.powi(3) + 25.0 * g * g - 34.0 * g + 1.0) * mu * mu
                + 2.0 * (g * g - 1.0) * (4.0 * g - 3.0) * mu
                - (4.0 * g - 9.0) * (g - 1.0).powi(2),
        )
    } else {
        (
            (3.0 * g - 5.0) * ((g + 1.0) * mu - 2.0 * (g - 1.0)) * sq,
            -(3.0 * g - 5.0) * (g * g - 5.0 * g + 2.0) * mu * mu
                + 12.0 * (g - 1.0).powi(2) * (g + 1.0) * mu
                - 4.0 * (3.0 * g - 5.0) * (g - 1.0).powi(2),
        )
    };
    Ok(lhs < rhs)
}

/// Relevance decision with its inputs: the pair supports the construction
/// when lambda sits strictly inside (1, lambda_circ) and the discriminant
/// at the lower triple point is positive.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RelevanceReport {
    pub thresholds: ThresholdReport,
    pub in_band: bool,
    pub q_n_positive: bool,
    pub discriminant_positive: bool,
    pub relevant: bool,
}

pub fn relevance(n: u32, gamma: f64, lambda: f64) -> Result<RelevanceReport, ParamError> {
    check_dimension(n)?;
    check_gamma(gamma)?;
    let thresholds = lambda_thresholds(n, gamma)?;
    let in_band = lambda.is_finite()
        && lambda > 1.0
        && lambda < thresholds.lambda_circ * (1.0 - THRESHOLD_GUARD);
    let q_n_positive = in_band && q_n(n, gamma, lambda) > 0.0;
    let discriminant_positive = if q_n_positive {
        discriminant_positive(n, gamma, lambda)?
    } else {
        false
    };
    Ok(RelevanceReport {
        thresholds,
        in_band,
        q_n_positive,
        discriminant_positive,
        relevant: in_band && discriminant_positive,
    })
}

pub fn is_relevant(n: u32, gamma: f64, lambda: f64) -> Result<bool, ParamError> {
    Ok(relevance(n, gamma, lambda)?.relevant)
}

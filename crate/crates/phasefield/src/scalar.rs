//! Scalar ingredients shared by every field-level functional: the double
//! well, the heteroclinic transition profile, and the plateau cutoff that
//! drives the connectedness detector.

use crate::error::{Error, Result};
use crate::quad::adaptive_simpson;
use serde::{Deserialize, Serialize};

const QUAD_TOL: f64 = 1e-12;

/// W(r) = (1 - r^2)^2 / 4. Minima at r = +-1, W(+-1) = 0.
pub fn double_well(r: f64) -> f64 {
    let s = 1.0 - r * r;
    0.25 * s * s
}

/// W'(r) = r^3 - r.
pub fn double_well_prime(r: f64) -> f64 {
    r * r * r - r
}

/// W''(r) = 3 r^2 - 1.
pub fn double_well_second(r: f64) -> f64 {
    3.0 * r * r - 1.0
}

/// Transition profile q(r) = tanh(r / sqrt(2)): the monotone solution of
/// -q'' + W'(q) = 0 with q(0) = 0 and q(+-inf) = +-1.
pub fn optimal_profile(r: f64) -> f64 {
    (r / std::f64::consts::SQRT_2).tanh()
}

/// q'(r) = sech^2(r / sqrt(2)) / sqrt(2). Equals sqrt(2 W(q(r))) identically.
pub fn optimal_profile_deriv(r: f64) -> f64 {
    let c = (r / std::f64::consts::SQRT_2).cosh();
    1.0 / (std::f64::consts::SQRT_2 * c * c)
}

/// Residuals of the two optimal-profile identities at `r`: the profile
/// equation -q'' + W'(q) = 0 and the equipartition law q' = sqrt(2 W(q)).
/// Each side is evaluated through a different composition of
/// transcendentals (sech/cosh against tanh-polynomials), so the result
/// measures genuine floating-point agreement rather than restating one
/// formula twice.
pub fn profile_residuals(r: f64) -> (f64, f64) {
    let s = r / std::f64::consts::SQRT_2;
    let q = optimal_profile(r);
    let sech2 = {
        let c = s.cosh();
        1.0 / (c * c)
    };
    let q_second = -sech2 * s.tanh();
    let ode = -q_second + double_well_prime(q);
    let equipartition = optimal_profile_deriv(r) - (2.0 * double_well(q)).sqrt();
    (ode, equipartition)
}

/// Inverse of the profile on (-1, 1): sqrt(2) * atanh(y).
pub fn profile_inverse(y: f64) -> Result<f64> {
    if !(y > -1.0 && y < 1.0) {
        return Err(Error::InvalidParam(format!(
            "profile_inverse domain is (-1, 1), got {y}"
        )));
    }
    Ok(std::f64::consts::SQRT_2 * y.atanh())
}

/// Normalization of the diffuse area functional: integral of sqrt(2 W)
/// over [-1, 1]. Closed form 2 sqrt(2) / 3; computed by quadrature.
pub fn area_constant() -> f64 {
    adaptive_simpson(|s| (2.0 * double_well(s)).sqrt(), -1.0, 1.0, QUAD_TOL)
}

/// Quintic smoothstep: 0 -> 1 on [0, 1] with vanishing first and second
/// derivatives at both ends, so the cutoffs built from it are C^2.
pub(crate) fn smoothstep5(t: f64) -> f64 {
    t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
}

fn smoothstep5_deriv(t: f64) -> f64 {
    30.0 * t * t * (1.0 - t) * (1.0 - t)
}

/// Plateau cutoff parameters. `lambda` sets where the plateau ends,
/// `lambda_bar` the rescaling used for the wider detector band.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutoffParams {
    pub lambda: f64,
    pub lambda_bar: f64,
}

impl CutoffParams {
    pub fn new(lambda: f64, lambda_bar: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::InvalidParam(format!(
                "lambda must lie in (0, 1), got {lambda}"
            )));
        }
        if !(lambda_bar > 0.0 && lambda_bar < 1.0) {
            return Err(Error::InvalidParam(format!(
                "lambda_bar must lie in (0, 1), got {lambda_bar}"
            )));
        }
        // Outer cutoff edge must sit strictly inside (-1, 1) so the cutoff
        // vanishes at the bulk values.
        if (1.0 - lambda) / lambda_bar >= 1.0 {
            return Err(Error::InvalidParam(format!(
                "(1 - lambda) / lambda_bar must be < 1, got {}",
                (1.0 - lambda) / lambda_bar
            )));
        }
        Ok(Self { lambda, lambda_bar })
    }

    /// Plateau edge: the cutoff is identically 1 for |s| <= edge_lo.
    pub fn edge_lo(&self) -> f64 {
        1.0 - self.lambda
    }

    /// Support edge: the cutoff is identically 0 for |s| >= edge_hi.
    pub fn edge_hi(&self) -> f64 {
        (1.0 - self.lambda) / self.lambda_bar
    }

    /// Half-width (in profile coordinates) of the plateau region
    /// {|q| <= 1 - lambda}.
    pub fn core_halfwidth(&self) -> f64 {
        profile_inverse(self.edge_lo()).expect("edge_lo < 1 by construction")
    }

    /// Half-width of the full cutoff support {|q| < edge_hi}.
    pub fn support_halfwidth(&self) -> f64 {
        profile_inverse(self.edge_hi()).expect("edge_hi < 1 by construction")
    }
}

impl Default for CutoffParams {
    /// lambda = 1/61. lambda_bar solves lambda_bar^2 = (1 + lambda/4)(1 - lambda):
    /// this keeps the outer edge (1 - lambda)/lambda_bar strictly below
    /// lambda_bar itself, so the rescaled cutoff s -> wtilde(lambda_bar * s)
    /// vanishes at s = +-1 with a margin of about lambda/4. A bar value any
    /// closer to 1 - lambda leaves the detector band covering the bulk.
    fn default() -> Self {
        let lambda = 1.0f64 / 61.0;
        let lambda_bar = ((1.0 + 0.25 * lambda) * (1.0 - lambda)).sqrt();
        Self { lambda, lambda_bar }
    }
}

/// Even C^2 cutoff: 1 on the plateau |s| <= 1 - lambda, 0 outside
/// |s| >= (1 - lambda)/lambda_bar, quintic-smoothstep monotone between.
pub fn cutoff_wtilde(s: f64, p: &CutoffParams) -> f64 {
    let a = s.abs();
    let lo = p.edge_lo();
    let hi = p.edge_hi();
    if a <= lo {
        1.0
    } else if a >= hi {
        0.0
    } else {
        1.0 - smoothstep5((a - lo) / (hi - lo))
    }
}

/// Derivative of the cutoff in s; odd, supported on the two transition
/// intervals.
pub fn cutoff_wtilde_prime(s: f64, p: &CutoffParams) -> f64 {
    let a = s.abs();
    let lo = p.edge_lo();
    let hi = p.edge_hi();
    if a <= lo || a >= hi {
        0.0
    } else {
        -s.signum() * smoothstep5_deriv((a - lo) / (hi - lo)) / (hi - lo)
    }
}

/// Detector mass per unit interface area: integral of wtilde(q(r)) over the
/// full support of the integrand. Strictly larger than the plateau-only
/// value because the cutoff decays smoothly rather than jumping to zero.
pub fn baseline_constant(p: &CutoffParams) -> f64 {
    let r1 = p.core_halfwidth();
    let rbar = p.support_halfwidth();
    // Plateau contributes exactly 2 r1; integrate the two C^2 tails.
    let tail = adaptive_simpson(|r| cutoff_wtilde(optimal_profile(r), p), r1, rbar, QUAD_TOL);
    2.0 * r1 + 2.0 * tail
}

/// Plateau-only part of `baseline_constant`: 2 * core_halfwidth.
pub fn baseline_plateau(p: &CutoffParams) -> f64 {
    2.0 * p.core_halfwidth()
}

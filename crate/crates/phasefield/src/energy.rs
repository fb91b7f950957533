//! The energy functionals: diffuse area, diffuse bending (squared
//! Allen–Cahn residual), the two-field connectedness detector, penalty
//! assembly, and the exact gradients of the discrete functionals.
//!
//! Every gradient here differentiates the *discrete* energy — the same
//! stencils and quadrature the energy itself uses — so finite differences
//! of the energies reproduce the gradients to roundoff, and descent
//! directions are genuine descent directions.

use crate::error::{Error, Result};
use crate::grid::{DomainMask, ScalarField};
use crate::ops::{
    div_coeff_grad, grad_sq, integrate, laplacian, BC_PHASE, BC_NATURAL, BC_ZERO,
};
use crate::scalar::{
    area_constant, cutoff_wtilde, cutoff_wtilde_prime, double_well, double_well_prime,
    double_well_second, CutoffParams,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

/// Normalization 2*sqrt(2)/3 of the diffuse area, computed once.
pub fn area_normalization() -> f64 {
    static C: OnceLock<f64> = OnceLock::new();
    *C.get_or_init(area_constant)
}

/// Model constants for one run: interface width, penalty exponent, target
/// area, cutoff shape, and the detector's two coefficient weights.
/// The weights are fields (not literals) so tests can perturb them; their
/// production values are 9 and 8.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseFieldParams {
    pub epsilon: f64,
    pub sigma: f64,
    pub target_area: f64,
    pub cutoff: CutoffParams,
    pub coeff_well: f64,
    pub coeff_grad: f64,
}

impl PhaseFieldParams {
    pub fn new(epsilon: f64, sigma: f64, target_area: f64) -> Result<Self> {
        let p = Self {
            epsilon,
            sigma,
            target_area,
            cutoff: CutoffParams::default(),
            coeff_well: 9.0,
            coeff_grad: 8.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::InvalidParam(format!(
                "epsilon must be > 0, got {}",
                self.epsilon
            )));
        }
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return Err(Error::InvalidParam("sigma must lie in (0,1)".into()));
        }
        if !(self.target_area > 0.0) || !self.target_area.is_finite() {
            return Err(Error::InvalidParam(format!(
                "target_area must be > 0, got {}",
                self.target_area
            )));
        }
        if !(self.coeff_well >= 0.0 && self.coeff_grad >= 0.0) {
            return Err(Error::InvalidParam(
                "detector coefficients must be nonnegative".into(),
            ));
        }
        CutoffParams::new(self.cutoff.lambda, self.cutoff.lambda_bar)?;
        Ok(())
    }

    /// Weight of the squared area defect: eps^{-(1-sigma)}.
    pub fn area_weight(&self) -> f64 {
        self.epsilon.powf(-(1.0 - self.sigma))
    }

    /// Weight of the squared connectedness defect: eps^{-(1/2 - sigma/2)}.
    pub fn connect_weight(&self) -> f64 {
        self.epsilon.powf(-0.5 * (1.0 - self.sigma))
    }

    /// Scale of the detector's band coefficients: eps^{-3/2}.
    fn band_scale(&self) -> f64 {
        self.epsilon.powf(-1.5)
    }
}

/// Itemized energy report. `total = willmore + area_penalty +
/// connect_penalty` by construction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub willmore: f64,
    pub area: f64,
    pub area_penalty: f64,
    pub baseline: f64,
    pub inner_value: f64,
    pub connect_penalty: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    pub fn assemble(
        willmore: f64,
        area: f64,
        baseline: f64,
        inner_value: f64,
        p: &PhaseFieldParams,
    ) -> Self {
        let area_defect = area - p.target_area;
        let area_penalty = p.area_weight() * area_defect * area_defect;
        let gap = inner_value - baseline;
        let connect_penalty = p.connect_weight() * gap * gap;
        Self {
            willmore,
            area,
            area_penalty,
            baseline,
            inner_value,
            connect_penalty,
            total: willmore + area_penalty + connect_penalty,
        }
    }
}

/// Smoothed absolute value sqrt(x^2 + mu^2): C^inf, within mu of |x|.
pub fn smooth_abs(x: f64, mu: f64) -> f64 {
    (x * x + mu * mu).sqrt()
}

/// Derivative of `smooth_abs` in x: x / sqrt(x^2 + mu^2).
pub fn smooth_sign(x: f64, mu: f64) -> f64 {
    x / (x * x + mu * mu).sqrt()
}

/// Default smoothing width for the detector's absolute value, scaled so it
/// perturbs values far below test tolerances: 1e-8 * (baseline + 1).
pub fn default_abs_smoothing(baseline: f64) -> f64 {
    1e-8 * (baseline + 1.0)
}

fn map_inside(
    mask: &DomainMask,
    f: impl Fn(usize) -> f64 + Sync,
) -> Vec<f64> {
    (0..mask.grid().len())
        .into_par_iter()
        .map(|i| if mask.inside(i) { f(i) } else { 0.0 })
        .collect()
}

/// Diffuse area density: (1/c0) (eps/2 |grad u|^2 + W(u)/eps) per cell,
/// zero outside the container.
pub fn mu_density(u: &ScalarField, mask: &DomainMask, p: &PhaseFieldParams) -> Result<ScalarField> {
    mask.same_grid_as(u)?;
    let gs = grad_sq(u, mask, BC_PHASE)?;
    let inv_c0 = 1.0 / area_normalization();
    let eps = p.epsilon;
    let uv = u.values();
    let gv = gs.values();
    let vals = map_inside(mask, |i| {
        inv_c0 * (0.5 * eps * gv[i] + double_well(uv[i]) / eps)
    });
    ScalarField::from_values(mask.grid(), vals)
}

/// Diffuse area: integral of `mu_density` (identical quadrature).
pub fn area_energy(u: &ScalarField, mask: &DomainMask, p: &PhaseFieldParams) -> Result<f64> {
    integrate(&mu_density(u, mask, p)?, mask)
}

/// The Allen–Cahn residual v = eps * lap(u) - W'(u)/eps, with the phase
/// exterior rule. Flat optimal-profile interfaces annihilate it.
pub fn allen_cahn_residual(
    u: &ScalarField,
    mask: &DomainMask,
    p: &PhaseFieldParams,
) -> Result<ScalarField> {
    mask.same_grid_as(u)?;
    let lap = laplacian(u, mask, BC_PHASE)?;
    let eps = p.epsilon;
    let uv = u.values();
    let lv = lap.values();
    let vals = map_inside(mask, |i| eps * lv[i] - double_well_prime(uv[i]) / eps);
    ScalarField::from_values(mask.grid(), vals)
}

/// Squared-residual density (1/eps) v^2, zero outside. Its integral times
/// (1/c0) is the bending energy — same quadrature, exact identity.
pub fn alpha_density(
    u: &ScalarField,
    mask: &DomainMask,
    p: &PhaseFieldParams,
) -> Result<ScalarField> {
    let v = allen_cahn_residual(u, mask, p)?;
    let inv_eps = 1.0 / p.epsilon;
    let vv = v.values();
    let vals = map_inside(mask, |i| inv_eps * vv[i] * vv[i]);
    ScalarField::from_values(mask.grid(), vals)
}

/// Diffuse bending energy: (1/c0) * integral of `alpha_density`.
pub fn willmore_energy(u: &ScalarField, mask: &DomainMask, p: &PhaseFieldParams) -> Result<f64> {
    Ok(integrate(&alpha_density(u, mask, p)?, mask)? / area_normalization())
}

/// Detector mass of the interface band: integral of wtilde(u)/eps.
/// This is the detector value at the uniform indicator phi = 1.
pub fn connectedness_baseline(
    u: &ScalarField,
    mask: &DomainMask,
    p: &PhaseFieldParams,
) -> Result<f64> {
    mask.same_grid_as(u)?;
    let uv = u.values();
    let cutoff = &p.cutoff;
    let inv_eps = 1.0 / p.epsilon;
    let vals = map_inside(mask, |i| cutoff_wtilde(uv[i], cutoff) * inv_eps);
    integrate(&ScalarField::from_values(mask.grid(), vals)?, mask)
}

/// Coefficient of the indicator's double well inside the detector:
/// coeff_well * eps^{-3/2} * wtilde(lambda_bar * u) + eps.
fn well_coefficient(u: &ScalarField, mask: &DomainMask, p: &PhaseFieldParams) -> ScalarField {
    let uv = u.values();
    let scale = p.coeff_well * p.band_scale();
    let vals = map_inside(mask, |i| {
        scale * cutoff_wtilde(p.cutoff.lambda_bar * uv[i], &p.cutoff) + p.epsilon
    });
    ScalarField::from_values(mask.grid(), vals).expect("finite by construction")
}

/// Coefficient of the indicator's gradient term inside the detector:
/// coeff_grad * eps^{-3/2} * wtilde(lambda_bar * u) + eps.
fn grad_coefficient(u: &ScalarField, mask: &DomainMask, p: &PhaseFieldParams) -> ScalarField {
    let uv = u.values();
    let scale = p.coeff_grad * p.band_scale();
    let vals = map_inside(mask, |i| {
        scale * cutoff_wtilde(p.cutoff.lambda_bar * uv[i], &p.cutoff) + p.epsilon
    });
    ScalarField::from_values(mask.grid(), vals).expect("finite by construction")
}

/// Signed detector mass paired with the indicator: integral of
/// wtilde(u) * phi / eps.
fn signed_band_mass(
    u: &ScalarField,
    phi: &ScalarField,
    mask: &DomainMask,
    p: &PhaseFieldParams,
) -> Result<f64> {
    mask.same_grid_as(u)?;
    mask.same_grid_as(phi)?;
    let uv = u.values();
    let pv = phi.values();
    let inv_eps = 1.0 / p.epsilon;
    let vals = map_inside(mask, |i| cutoff_wtilde(uv[i], &p.cutoff) * pv[i] * inv_eps);
    integrate(&ScalarField::from_values(mask.grid(), vals)?, mask)
}

fn connectedness_terms(
    u: &ScalarField,
    phi: &ScalarField,
    mask: &DomainMask,
    p: &PhaseFieldParams,
) -> Result<(f64, f64)> {
    let wc = well_coefficient(u, mask, p);
    let gc = grad_coefficient(u, mask, p);
    let gs = grad_sq(phi, mask, BC_NATURAL)?;
    let pv = phi.values();
    let wv = wc.values();
    let gcv = gc.values();
    let gsv = gs.values();
    let well_vals = map_inside(mask, |i| wv[i] * double_well(pv[i]));
    let grad_vals = map_inside(mask, |i| gcv[i] * gsv[i]);
    let t_well = integrate(&ScalarField::from_values(mask.grid(), well_vals)?, mask)?;
    let t_grad = integrate(&ScalarField::from_values(mask.grid(), grad_vals)?, mask)?;
    Ok((t_well, t_grad))
}

/// The connectedness detector evaluated at (u, phi):
/// |∫ wtilde(u) phi / eps| + ∫ (c_w eps^{-3/2} wtilde(lb u) + eps) W(phi)
/// + ∫ (c_g eps^{-3/2} wtilde(lb u) + eps) |grad phi|^2.
/// Uniform phi = +-1 gives exactly the baseline.
pub fn connectedness_functional(
    u: &ScalarField,
    phi: &ScalarField,
    mask: &DomainMask,
    p: &PhaseFieldParams,
) -> Result<f64> {
    let m = signed_band_mass(u, phi, mask, p)?;
    let (t_well, t_grad) = connectedness_terms(u, phi, mask, p)?;
    Ok(m.abs() + t_well + t_grad)
}

/// Detector with the absolute value smoothed to sqrt(m^2 + mu^2) and the
/// first term scaled by `gamma` — the differentiable objective the
/// detector's minimizer descends on. `gamma = 1` with tiny `mu_abs`
/// matches `connectedness_functional` to within `mu_abs`.
pub fn connectedness_objective(
    u: &ScalarField,
    phi: &ScalarField,
    mask: &DomainMask,
    p: &PhaseFieldParams,
    mu_abs: f64,
    gamma: f64,
) -> Result<f64> {
    let m = signed_band_mass(u, phi, mask, p)?;
    let (t_well, t_grad) = connectedness_terms(u, phi, mask, p)?;
    Ok(gamma * smooth_abs(m, mu_abs) + t_well + t_grad)
}

/// Variational gradient of the smoothed detector in phi (natural boundary
/// rule for phi), with the first term scaled by `gamma`.
pub fn grad_connect_scaled(
    u: &ScalarField,
    phi: &ScalarField,
    mask: &DomainMask,
    p: &PhaseFieldParams,
    mu_abs: f64,
    gamma: f64,
) -> Result<ScalarField> {
    let m = signed_band_mass(u, phi, mask, p)?;
    let sgn = gamma * smooth_sign(m, mu_abs);
    let wc = well_coefficient(u, mask, p);
    let gc = grad_coefficient(u, mask, p);
    let div = div_coeff_grad(&gc, phi, mask)?;
    let uv = u.values();
    let pv = phi.values();
    let wv = wc.values();
    let dv = div.values();
    let inv_eps = 1.0 / p.epsilon;
    let vals = map_inside(mask, |i| {
        sgn * cutoff_wtilde(uv[i], &p.cutoff) * inv_eps + wv[i] * double_well_prime(pv[i])
            - 2.0 * dv[i]
    });
    ScalarField::from_values(mask.grid(), vals)
}

/// Variational gradient of the smoothed detector in phi at gamma = 1:
/// smooth_sign(m) wtilde(u)/eps + well-coefficient * W'(phi)
/// - 2 div(grad-coefficient * grad phi).
pub fn grad_connect_wrt_phi(
    u: &ScalarField,
    phi: &ScalarField,
    mask: &DomainMask,
    p: &PhaseFieldParams,
    mu_abs: f64,
) -> Result<ScalarField> {
    grad_connect_scaled(u, phi, mask, p, mu_abs, 1.0)
}

/// Assemble the full breakdown from a detector value supplied by the
/// detector's minimizer (or the baseline itself as an upper bound).
/// Rejects detector values materially above the baseline: the uniform
/// indicator is always admissible, so a larger value breaks the
/// minimizer's contract.
pub fn total_energy(
    u: &ScalarField,
    mask: &DomainMask,
    p: &PhaseFieldParams,
    inner_value: f64,
) -> Result<EnergyBreakdown> {
    let willmore = willmore_energy(u, mask, p)?;
    let area = area_energy(u, mask, p)?;
    let baseline = connectedness_baseline(u, mask, p)?;
    if inner_value > baseline + 1e-8 * (baseline + 1.0) {
        return Err(Error::Contract(format!(
            "detector value {inner_value} exceeds the uniform-indicator value {baseline}"
        )));
    }
    Ok(EnergyBreakdown::assemble(willmore, area, baseline, inner_value, p))
}

/// Frozen-indicator total energy: the objective the outer descent
/// monitors between detector refreshes. The detector term uses the
/// smoothed absolute value with a fixed `mu_abs`, so this quantity is
/// differentiable in u and `grad_total_wrt_u` is its exact gradient.
pub fn total_energy_frozen_phi(
    u: &ScalarField,
    phi_star: &ScalarField,
    mask: &DomainMask,
    p: &PhaseFieldParams,
    mu_abs: f64,
) -> Result<EnergyBreakdown> {
    let willmore = willmore_energy(u, mask, p)?;
    let area = area_energy(u, mask, p)?;
    let baseline = connectedness_baseline(u, mask, p)?;
    let smoothed = connectedness_objective(u, phi_star, mask, p, mu_abs, 1.0)?;
    Ok(EnergyBreakdown::assemble(willmore, area, baseline, smoothed, p))
}

/// Exact gradient of the diffuse area: (1/c0)(-eps lap(u) + W'(u)/eps).
pub fn grad_area(u: &ScalarField, mask: &DomainMask, p: &PhaseFieldParams) -> Result<ScalarField> {
    mask.same_grid_as(u)?;
    let lap = laplacian(u, mask, BC_PHASE)?;
    let inv_c0 = 1.0 / area_normalization();
    let eps = p.epsilon;
    let uv = u.values();
    let lv = lap.values();
    let vals = map_inside(mask, |i| {
        inv_c0 * (-eps * lv[i] + double_well_prime(uv[i]) / eps)
    });
    ScalarField::from_values(mask.grid(), vals)
}

/// Exact gradient of the bending energy. With v the Allen–Cahn residual:
/// (2/(c0 eps)) (eps lap_0(v) - W''(u) v / eps), where lap_0 applies the
/// Laplacian stencil with zero ghosts — the adjoint of the stencil that
/// produced v (ghost constants drop out of the derivative).
pub fn grad_willmore(
    u: &ScalarField,
    mask: &DomainMask,
    p: &PhaseFieldParams,
) -> Result<ScalarField> {
    let v = allen_cahn_residual(u, mask, p)?;
    let lap_v = laplacian(&v, mask, BC_ZERO)?;
    let eps = p.epsilon;
    let scale = 2.0 / (area_normalization() * eps);
    let uv = u.values();
    let vv = v.values();
    let lv = lap_v.values();
    let vals = map_inside(mask, |i| {
        scale * (eps * lv[i] - double_well_second(uv[i]) * vv[i] / eps)
    });
    ScalarField::from_values(mask.grid(), vals)
}

/// Partial derivative of the detector in u at frozen phi, minus the
/// derivative of the baseline — the chain-rule factor of the
/// connectedness penalty. Both cutoff compositions differentiate through
/// wtilde'.
fn grad_connect_gap_wrt_u(
    u: &ScalarField,
    phi: &ScalarField,
    mask: &DomainMask,
    p: &PhaseFieldParams,
    mu_abs: f64,
) -> Result<ScalarField> {
    let m = signed_band_mass(u, phi, mask, p)?;
    let sgn = smooth_sign(m, mu_abs);
    let gs = grad_sq(phi, mask, BC_NATURAL)?;
    let uv = u.values();
    let pv = phi.values();
    let gsv = gs.values();
    let cutoff = &p.cutoff;
    let lb = cutoff.lambda_bar;
    let inv_eps = 1.0 / p.epsilon;
    let well_scale = p.coeff_well * p.band_scale();
    let grad_scale = p.coeff_grad * p.band_scale();
    let vals = map_inside(mask, |i| {
        let wprime = cutoff_wtilde_prime(uv[i], cutoff);
        let wprime_band = cutoff_wtilde_prime(lb * uv[i], cutoff) * lb;
        sgn * wprime * pv[i] * inv_eps
            + well_scale * wprime_band * double_well(pv[i])
            + grad_scale * wprime_band * gsv[i]
            - wprime * inv_eps
    });
    ScalarField::from_values(mask.grid(), vals)
}

/// Exact gradient in u of the frozen-indicator total energy:
/// bending gradient
/// + 2 area_weight (area - target) * area gradient
/// + 2 connect_weight (smoothed detector - baseline) * gap derivative.
pub fn grad_total_wrt_u(
    u: &ScalarField,
    phi_star: &ScalarField,
    mask: &DomainMask,
    p: &PhaseFieldParams,
) -> Result<ScalarField> {
    let baseline = connectedness_baseline(u, mask, p)?;
    let mu_abs = default_abs_smoothing(baseline);
    grad_total_wrt_u_smoothed(u, phi_star, mask, p, mu_abs)
}

/// As `grad_total_wrt_u` with the smoothing width pinned by the caller
/// (the outer descent fixes it per refresh so its Armijo energy and
/// gradient describe the same function).
pub fn grad_total_wrt_u_smoothed(
    u: &ScalarField,
    phi_star: &ScalarField,
    mask: &DomainMask,
    p: &PhaseFieldParams,
    mu_abs: f64,
) -> Result<ScalarField> {
    let mut g = grad_willmore(u, mask, p)?;
    let area = area_energy(u, mask, p)?;
    let ga = grad_area(u, mask, p)?;
    g.axpy(2.0 * p.area_weight() * (area - p.target_area), &ga)?;
    let baseline = connectedness_baseline(u, mask, p)?;
    let smoothed = connectedness_objective(u, phi_star, mask, p, mu_abs, 1.0)?;
    let gap_grad = grad_connect_gap_wrt_u(u, phi_star, mask, p, mu_abs)?;
    g.axpy(2.0 * p.connect_weight() * (smoothed - baseline), &gap_grad)?;
    Ok(g)
}

/// Signed equipartition defect: integral of (eps/2 |grad u|^2 - W(u)/eps).
/// Vanishes, as eps shrinks, on well-formed interface fields.
pub fn discrepancy(u: &ScalarField, mask: &DomainMask, p: &PhaseFieldParams) -> Result<f64> {
    mask.same_grid_as(u)?;
    let gs = grad_sq(u, mask, BC_PHASE)?;
    let uv = u.values();
    let gv = gs.values();
    let eps = p.epsilon;
    let vals = map_inside(mask, |i| 0.5 * eps * gv[i] - double_well(uv[i]) / eps);
    integrate(&ScalarField::from_values(mask.grid(), vals)?, mask)
}

/// Hint for callers assembling grids: the interface needs several cells
/// across its core width to mean anything. Logs (never fails).
pub fn warn_resolution(h: f64, epsilon: f64) {
    if h > 0.5 * epsilon {
        log::warn!(
            "grid spacing h = {h} exceeds epsilon/2 = {}; the interface layer is unresolved",
            0.5 * epsilon
        );
    } else if h > 0.25 * epsilon {
        log::warn!(
            "grid spacing h = {h} exceeds epsilon/4 = {}; results will carry visible discretization bias",
            0.25 * epsilon
        );
    }
}

//! Analytic test geometries: signed distance functions (positive inside),
//! the blended transition profile, and construction of smooth phase fields
//! that approximate a sharp shape at a given interface width.

use crate::error::{Error, Result};
use crate::grid::{DomainMask, ScalarField, EXTERIOR_VALUE};
use crate::quad::adaptive_simpson;
use crate::scalar::{optimal_profile, smoothstep5};
use serde::{Deserialize, Serialize};

/// One solid primitive. Centers fix the dimension; all primitives of a
/// shape must agree on it. `Ellipsoid` with two semi-axes is an ellipse.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Primitive {
    Ball { center: Vec<f64>, radius: f64 },
    Ellipsoid { center: Vec<f64>, semi_axes: Vec<f64> },
    Torus { center: Vec<f64>, major_radius: f64, minor_radius: f64 },
}

impl Primitive {
    pub fn dim(&self) -> usize {
        match self {
            Primitive::Ball { center, .. } | Primitive::Ellipsoid { center, .. } => center.len(),
            Primitive::Torus { .. } => 3,
        }
    }

    fn validate(&self) -> Result<()> {
        let all_finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match self {
            Primitive::Ball { center, radius } => {
                if !all_finite(center) || !(center.len() == 2 || center.len() == 3) {
                    return Err(Error::Shape("ball center must be a finite 2D/3D point".into()));
                }
                if !(*radius > 0.0) || !radius.is_finite() {
                    return Err(Error::Shape(format!("ball radius must be > 0, got {radius}")));
                }
            }
            Primitive::Ellipsoid { center, semi_axes } => {
                if !all_finite(center) || !(center.len() == 2 || center.len() == 3) {
                    return Err(Error::Shape(
                        "ellipsoid center must be a finite 2D/3D point".into(),
                    ));
                }
                if semi_axes.len() != center.len() {
                    return Err(Error::Shape(
                        "ellipsoid needs one semi-axis per coordinate".into(),
                    ));
                }
                if !semi_axes.iter().all(|a| *a > 0.0 && a.is_finite()) {
                    return Err(Error::Shape("ellipsoid semi-axes must be > 0".into()));
                }
            }
            Primitive::Torus { center, major_radius, minor_radius } => {
                if !all_finite(center) || center.len() != 3 {
                    return Err(Error::Shape("torus center must be a finite 3D point".into()));
                }
                if !(*minor_radius > 0.0 && *major_radius > *minor_radius)
                    || !major_radius.is_finite()
                {
                    return Err(Error::Shape(format!(
                        "torus needs 0 < minor < major, got minor {minor_radius}, major {major_radius}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Signed distance, positive inside. Exact for balls and tori; for
    /// ellipsoids the normalized level function scaled by its local
    /// gradient norm (exact when all semi-axes coincide, first order
    /// accurate near the interface otherwise).
    pub fn signed_distance(&self, x: &[f64]) -> f64 {
        match self {
            Primitive::Ball { center, radius } => {
                let mut s = 0.0;
                for (xi, ci) in x.iter().zip(center) {
                    s += (xi - ci) * (xi - ci);
                }
                radius - s.sqrt()
            }
            Primitive::Ellipsoid { center, semi_axes } => {
                let mut rho2 = 0.0;
                let mut slope2 = 0.0;
                for ((xi, ci), ai) in x.iter().zip(center).zip(semi_axes) {
                    let d = xi - ci;
                    rho2 += (d / ai) * (d / ai);
                    slope2 += (d / (ai * ai)) * (d / (ai * ai));
                }
                if slope2 == 0.0 {
                    return semi_axes.iter().cloned().fold(f64::INFINITY, f64::min);
                }
                let rho = rho2.sqrt();
                (1.0 - rho) * rho / slope2.sqrt()
            }
            Primitive::Torus { center, major_radius, minor_radius } => {
                let px = x[0] - center[0];
                let py = x[1] - center[1];
                let pz = x[2] - center[2];
                let ring = px.hypot(py) - major_radius;
                minor_radius - ring.hypot(pz)
            }
        }
    }

    /// Radius of a ball around the center guaranteed to contain the solid.
    pub fn bounding_radius(&self) -> f64 {
        match self {
            Primitive::Ball { radius, .. } => *radius,
            Primitive::Ellipsoid { semi_axes, .. } => {
                semi_axes.iter().cloned().fold(0.0, f64::max)
            }
            Primitive::Torus { major_radius, minor_radius, .. } => major_radius + minor_radius,
        }
    }

    /// Smallest curvature radius scale of the surface (limits how wide an
    /// interface band can be before it self-intersects).
    pub fn min_feature_radius(&self) -> f64 {
        match self {
            Primitive::Ball { radius, .. } => *radius,
            Primitive::Ellipsoid { semi_axes, .. } => {
                // Curvature radius at the tip of the long axis: b^2 / a.
                let a = semi_axes.iter().cloned().fold(0.0, f64::max);
                let b = semi_axes.iter().cloned().fold(f64::INFINITY, f64::min);
                b * b / a
            }
            Primitive::Torus { minor_radius, .. } => *minor_radius,
        }
    }

    pub fn center(&self) -> &[f64] {
        match self {
            Primitive::Ball { center, .. }
            | Primitive::Ellipsoid { center, .. }
            | Primitive::Torus { center, .. } => center,
        }
    }

    /// Surface measure (perimeter in 2D, area in 3D) where a closed form
    /// or a cheap quadrature exists.
    fn sharp_area(&self) -> Option<f64> {
        match self {
            Primitive::Ball { center, radius } => Some(if center.len() == 2 {
                2.0 * std::f64::consts::PI * radius
            } else {
                4.0 * std::f64::consts::PI * radius * radius
            }),
            Primitive::Ellipsoid { center, semi_axes } if center.len() == 2 => {
                let (a, b) = (semi_axes[0], semi_axes[1]);
                Some(adaptive_simpson(
                    |t| {
                        let g = a * a * t.sin().powi(2) + b * b * t.cos().powi(2);
                        g.sqrt()
                    },
                    0.0,
                    2.0 * std::f64::consts::PI,
                    1e-12,
                ))
            }
            Primitive::Ellipsoid { .. } => None,
            Primitive::Torus { major_radius, minor_radius, .. } => {
                Some(4.0 * std::f64::consts::PI.powi(2) * major_radius * minor_radius)
            }
        }
    }

    /// Squared-curvature surface integral (bending energy of the sharp
    /// interface) where a closed form or a cheap quadrature exists.
    fn sharp_bending(&self) -> Option<f64> {
        match self {
            Primitive::Ball { center, radius } => Some(if center.len() == 2 {
                2.0 * std::f64::consts::PI / radius
            } else {
                16.0 * std::f64::consts::PI
            }),
            Primitive::Ellipsoid { center, semi_axes } if center.len() == 2 => {
                // kappa = a b / g^{3/2}, ds = sqrt(g) dt on the standard
                // parametrization; kappa^2 ds = a^2 b^2 g^{-5/2} dt.
                let (a, b) = (semi_axes[0], semi_axes[1]);
                Some(
                    a * a
                        * b
                        * b
                        * adaptive_simpson(
                            |t| {
                                let g = a * a * t.sin().powi(2) + b * b * t.cos().powi(2);
                                g.powf(-2.5)
                            },
                            0.0,
                            2.0 * std::f64::consts::PI,
                            1e-12,
                        ),
                )
            }
            Primitive::Ellipsoid { .. } => None,
            Primitive::Torus { major_radius, minor_radius, .. } => {
                let (rr, r) = (*major_radius, *minor_radius);
                Some(std::f64::consts::PI.powi(2) * rr * rr / (r * (rr * rr - r * r).sqrt()))
            }
        }
    }
}

/// A union of pairwise-disjoint primitives sharing one dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeSpec {
    pub primitives: Vec<Primitive>,
}

impl ShapeSpec {
    pub fn new(primitives: Vec<Primitive>) -> Result<Self> {
        if primitives.is_empty() {
            return Err(Error::Shape("shape needs at least one primitive".into()));
        }
        for p in &primitives {
            p.validate()?;
        }
        let dim = primitives[0].dim();
        if primitives.iter().any(|p| p.dim() != dim) {
            return Err(Error::Shape("all primitives must share one dimension".into()));
        }
        Ok(Self { primitives })
    }

    pub fn validate(&self) -> Result<()> {
        let clone = Self::new(self.primitives.clone())?;
        let _ = clone;
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.primitives[0].dim()
    }

    /// Signed distance of the union: max over primitives. Exact wherever
    /// the per-primitive distances are exact and the parts are disjoint.
    pub fn signed_distance(&self, x: &[f64]) -> f64 {
        self.primitives
            .iter()
            .map(|p| p.signed_distance(x))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Require every pair of primitives to keep at least `2 delta` of
    /// empty space between their bounding spheres, so the interface bands
    /// cannot interact and the union distance stays exact on the bands.
    pub fn validate_clearance(&self, delta: f64) -> Result<()> {
        for i in 0..self.primitives.len() {
            for j in i + 1..self.primitives.len() {
                let a = &self.primitives[i];
                let b = &self.primitives[j];
                let mut d2 = 0.0;
                for (ca, cb) in a.center().iter().zip(b.center()) {
                    d2 += (ca - cb) * (ca - cb);
                }
                let gap = d2.sqrt() - a.bounding_radius() - b.bounding_radius();
                if gap < 2.0 * delta {
                    return Err(Error::Shape(format!(
                        "primitives {i} and {j} leave a gap of {gap:.6} < 2*delta = {:.6}",
                        2.0 * delta
                    )));
                }
            }
        }
        Ok(())
    }

    /// Minimal gap between bounding spheres over all pairs (infinite for a
    /// single primitive).
    fn min_pairwise_gap(&self) -> f64 {
        let mut gap = f64::INFINITY;
        for i in 0..self.primitives.len() {
            for j in i + 1..self.primitives.len() {
                let a = &self.primitives[i];
                let b = &self.primitives[j];
                let mut d2 = 0.0;
                for (ca, cb) in a.center().iter().zip(b.center()) {
                    d2 += (ca - cb) * (ca - cb);
                }
                gap = gap.min(d2.sqrt() - a.bounding_radius() - b.bounding_radius());
            }
        }
        gap
    }

    /// Total sharp surface measure of the union (None if any part lacks a
    /// reference value).
    pub fn sharp_area(&self) -> Option<f64> {
        self.primitives.iter().map(|p| p.sharp_area()).sum()
    }

    /// Total sharp bending energy of the union (None if any part lacks a
    /// reference value).
    pub fn sharp_bending(&self) -> Option<f64> {
        self.primitives.iter().map(|p| p.sharp_bending()).sum()
    }
}

/// Even C^2 blend weight: 1 on [-1, 1], 0 for |r| >= 2, monotone quintic
/// smoothstep between.
pub fn eta_cutoff(r: f64) -> f64 {
    let a = r.abs();
    if a <= 1.0 {
        1.0
    } else if a >= 2.0 {
        0.0
    } else {
        1.0 - smoothstep5(a - 1.0)
    }
}

/// Interface width and blend band half-width for a smooth approximation of
/// a sharp shape.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecoveryParams {
    pub epsilon: f64,
    pub delta: f64,
}

impl RecoveryParams {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidParam(format!("epsilon must be > 0, got {epsilon}")));
        }
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::InvalidParam(format!("delta must be > 0, got {delta}")));
        }
        Ok(Self { epsilon, delta })
    }

    /// The construction's standing assumption: the transition tail scale
    /// eps^{1 - sigma/2} must fit twice into the blend band.
    pub fn band_assumption_holds(&self, sigma: f64) -> bool {
        self.epsilon.powf(1.0 - 0.5 * sigma) < 0.5 * self.delta
    }
}

#[inline]
fn sign0(r: f64) -> f64 {
    if r > 0.0 {
        1.0
    } else if r < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Blended transition value at signed distance `r`: the optimal profile
/// q(r/eps) inside the band |r| <= delta/2, exactly +-1 beyond |r| >= delta,
/// and a C^2 blend between. Odd in r.
pub fn q_eps(r: f64, p: &RecoveryParams) -> f64 {
    let blend = eta_cutoff(2.0 * r / p.delta);
    blend * optimal_profile(r / p.epsilon) + sign0(r) * (1.0 - blend)
}

/// Largest blend half-width the geometry supports: half the smallest of
/// (feature radii, pairwise gaps, clearance to the container boundary),
/// capped at a quarter of the smallest box extent.
pub fn default_delta(shape: &ShapeSpec, mask: &DomainMask) -> Result<f64> {
    let grid = mask.grid();
    if shape.dim() != grid.dim() {
        return Err(Error::Shape(format!(
            "{}-dimensional shape on a {}-dimensional grid",
            shape.dim(),
            grid.dim()
        )));
    }
    let mut scale = shape
        .primitives
        .iter()
        .map(|p| p.min_feature_radius())
        .fold(f64::INFINITY, f64::min);
    scale = scale.min(shape.min_pairwise_gap());
    // Clearance to wherever exterior ghosts live: outside cells and the
    // outermost inside layer of the grid.
    let mut clearance = f64::INFINITY;
    for i in 0..grid.len() {
        if !mask.inside(i) || grid.on_boundary(i) {
            let x = grid.center(i);
            clearance = clearance.min(shape.signed_distance(&x[..grid.dim()]).abs());
        }
    }
    scale = scale.min(clearance);
    let min_extent = (0..grid.dim()).map(|a| grid.extent(a)).fold(f64::INFINITY, f64::min);
    let delta = (0.5 * scale).min(0.25 * min_extent);
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::Shape(
            "geometry leaves no room for an interface band (zero clearance)".into(),
        ));
    }
    Ok(delta)
}

/// Sample the blended profile of the shape's signed distance at every cell
/// center: a smooth field that is +1 deep inside the shape, -1 outside it
/// and on all exterior cells, transitioning across the interface.
///
/// Fails when the band (with a `2 delta` safety margin) reaches the
/// container boundary or exterior cells, since the field there is pinned
/// to -1 and would truncate the transition.
pub fn build_recovery(
    shape: &ShapeSpec,
    mask: &DomainMask,
    p: &RecoveryParams,
) -> Result<ScalarField> {
    let grid = mask.grid();
    if shape.dim() != grid.dim() {
        return Err(Error::Shape(format!(
            "{}-dimensional shape on a {}-dimensional grid",
            shape.dim(),
            grid.dim()
        )));
    }
    shape.validate_clearance(p.delta)?;
    // Exterior cells and the outermost inside layer see ghost values; the
    // band must stay clear of them (up to half a cell diagonal of slack,
    // since we check at cell centers).
    let slack = 0.5 * grid.h() * (grid.dim() as f64).sqrt();
    let required = 2.0 * p.delta - slack;
    for i in 0..grid.len() {
        if !mask.inside(i) || grid.on_boundary(i) {
            let x = grid.center(i);
            let d = shape.signed_distance(&x[..grid.dim()]);
            if d.abs() < required {
                return Err(Error::Shape(format!(
                    "interface band exits the container: |distance| = {:.6} < {:.6} at a boundary/exterior cell",
                    d.abs(),
                    required
                )));
            }
        }
    }
    let values: Vec<f64> = (0..grid.len())
        .map(|i| {
            if !mask.inside(i) {
                return EXTERIOR_VALUE;
            }
            let x = grid.center(i);
            q_eps(shape.signed_distance(&x[..grid.dim()]), p)
        })
        .collect();
    ScalarField::from_values(grid, values)
}

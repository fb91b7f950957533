//! Finite-difference operators on masked uniform grids. Every operator
//! treats cells outside the container (or past the grid edge) through a
//! ghost-cell rule, and returns zero on outside cells.
//!
//! The same stencils are used by the energies and by their gradients, so
//! the gradients are the exact derivatives of the discrete energies —
//! descent directions are guaranteed rather than approximated.

use crate::error::{Error, Result};
use crate::grid::{DomainMask, ScalarField};
use rayon::prelude::*;

/// Ghost-cell rule for neighbors outside the container.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Bc {
    /// Ghost cells hold a fixed value (the phase field uses the exterior
    /// value −1; adjoint applications use 0).
    Dirichlet(f64),
    /// Ghost cells mirror the center value (zero normal derivative).
    Neumann,
}

/// Exterior rule for the phase field u: ghosts hold the bulk value −1.
pub const BC_PHASE: Bc = Bc::Dirichlet(-1.0);
/// Matrix-only rule: ghosts hold 0, which drops all affine ghost terms.
/// This is the adjoint of `Dirichlet(c)` stencils, whatever `c` is.
pub const BC_ZERO: Bc = Bc::Dirichlet(0.0);
/// Natural (no-flux) rule used for the indicator field phi.
pub const BC_NATURAL: Bc = Bc::Neumann;

#[inline]
fn ghosted(
    f: &[f64],
    mask: &DomainMask,
    center: usize,
    axis: usize,
    dir: isize,
    bc: Bc,
) -> f64 {
    match mask.grid().neighbor(center, axis, dir) {
        Some(n) if mask.inside(n) => f[n],
        _ => match bc {
            Bc::Dirichlet(g) => g,
            Bc::Neumann => f[center],
        },
    }
}

/// Compact 2·dim+1-point Laplacian. Outside cells map to zero.
pub fn laplacian(f: &ScalarField, mask: &DomainMask, bc: Bc) -> Result<ScalarField> {
    mask.same_grid_as(f)?;
    let grid = mask.grid();
    let v = f.values();
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    let out: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            if !mask.inside(i) {
                return 0.0;
            }
            let mut acc = 0.0;
            for axis in 0..grid.dim() {
                let e = ghosted(v, mask, i, axis, 1, bc);
                let w = ghosted(v, mask, i, axis, -1, bc);
                // (e + w) first: addition is commutative, so reflecting the
                // field along an axis reflects the output bit-for-bit.
                acc += (e + w) - 2.0 * v[i];
            }
            acc * inv_h2
        })
        .collect();
    ScalarField::from_values(grid, out)
}

/// Squared gradient magnitude per cell: along each axis, the mean of the
/// two one-sided difference quotients squared. Outside cells map to zero.
///
/// This face-based form makes the cell sum a sum over faces with uniform
/// weight: an interior face splits its share between its two cells, and a
/// ghost face (missing neighbor) gives both half-shares to the one cell it
/// touches. The exact derivative of `integrate(grad_sq)` is then the
/// compact Laplacian above — the property the energy gradients rely on.
pub fn grad_sq(f: &ScalarField, mask: &DomainMask, bc: Bc) -> Result<ScalarField> {
    mask.same_grid_as(f)?;
    let grid = mask.grid();
    let v = f.values();
    let half_inv_h2 = 0.5 / (grid.h() * grid.h());
    let out: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            if !mask.inside(i) {
                return 0.0;
            }
            let mut acc = 0.0;
            for axis in 0..grid.dim() {
                let face = |dir: isize| match grid.neighbor(i, axis, dir) {
                    Some(n) if mask.inside(n) => {
                        let d = v[n] - v[i];
                        d * d
                    }
                    _ => {
                        let ghost = match bc {
                            Bc::Dirichlet(g) => g,
                            Bc::Neumann => v[i],
                        };
                        let d = ghost - v[i];
                        2.0 * d * d
                    }
                };
                // Commutative per-axis sum keeps reflections bit-exact.
                acc += face(1) + face(-1);
            }
            acc * half_inv_h2
        })
        .collect();
    ScalarField::from_values(grid, out)
}

/// Conservative div(a grad f) with arithmetic face means of the coefficient
/// and no flux through the container boundary. Outside cells map to zero.
pub fn div_coeff_grad(a: &ScalarField, f: &ScalarField, mask: &DomainMask) -> Result<ScalarField> {
    mask.same_grid_as(a)?;
    mask.same_grid_as(f)?;
    let grid = mask.grid();
    let av = a.values();
    let fv = f.values();
    if let Some(i) = (0..grid.len()).find(|&i| mask.inside(i) && av[i] < 0.0) {
        return Err(Error::InvalidParam(format!(
            "coefficient field is negative ({}) at cell {i}",
            av[i]
        )));
    }
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    let out: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            if !mask.inside(i) {
                return 0.0;
            }
            let mut acc = 0.0;
            for axis in 0..grid.dim() {
                let flux = |dir: isize| match grid.neighbor(i, axis, dir) {
                    Some(n) if mask.inside(n) => 0.5 * (av[i] + av[n]) * (fv[n] - fv[i]),
                    _ => 0.0,
                };
                // Commutative per-axis sum keeps reflections bit-exact.
                acc += flux(1) + flux(-1);
            }
            acc * inv_h2
        })
        .collect();
    ScalarField::from_values(grid, out)
}

/// Midpoint-rule integral over inside cells: h^dim times the cell sum.
/// The sum is sequential so results are bit-identical across thread counts.
pub fn integrate(f: &ScalarField, mask: &DomainMask) -> Result<f64> {
    mask.same_grid_as(f)?;
    let mut acc = 0.0;
    for (i, v) in f.values().iter().enumerate() {
        if mask.inside(i) {
            acc += v;
        }
    }
    Ok(acc * mask.grid().volume_element())
}

/// Discrete L² inner product over inside cells (sequential sum).
pub fn inner_product(f: &ScalarField, g: &ScalarField, mask: &DomainMask) -> Result<f64> {
    mask.same_grid_as(f)?;
    mask.same_grid_as(g)?;
    let fv = f.values();
    let gv = g.values();
    let mut acc = 0.0;
    for i in 0..fv.len() {
        if mask.inside(i) {
            acc += fv[i] * gv[i];
        }
    }
    Ok(acc * mask.grid().volume_element())
}

/// Discrete L² norm over inside cells.
pub fn norm_l2(f: &ScalarField, mask: &DomainMask) -> Result<f64> {
    Ok(inner_product(f, f, mask)?.sqrt())
}

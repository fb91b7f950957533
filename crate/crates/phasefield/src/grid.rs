//! Uniform cell-centered Cartesian grids in 2D/3D, scalar fields sampled on
//! them, and the container mask that fixes which cells belong to the domain.

use crate::error::{Error, Result};
use std::collections::VecDeque;

/// Value imposed on the phase field outside the container: the "empty" bulk
/// phase. Exterior ghost cells and masked-out cells hold this value.
pub const EXTERIOR_VALUE: f64 = -1.0;

/// A uniform grid of cells covering an axis-aligned box. Cell `i` along an
/// axis is centered at `origin + (i + 1/2) * h`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    dim: usize,
    cells: [usize; 3],
    origin: [f64; 3],
    h: f64,
}

impl GridSpec {
    /// `cells_per_axis.len()` fixes the dimension (2 or 3). Spacing is
    /// uniform and shared by all axes.
    pub fn new(cells_per_axis: &[usize], origin: &[f64], h: f64) -> Result<Self> {
        let dim = cells_per_axis.len();
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidParam(format!(
                "grid dimension must be 2 or 3, got {dim}"
            )));
        }
        if origin.len() != dim {
            return Err(Error::InvalidParam(format!(
                "origin has {} entries but the grid is {dim}-dimensional",
                origin.len()
            )));
        }
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidParam(format!("spacing must be > 0, got {h}")));
        }
        let mut cells = [1usize; 3];
        let mut total: usize = 1;
        for (a, &n) in cells_per_axis.iter().enumerate() {
            if n < 4 {
                return Err(Error::InvalidParam(format!(
                    "need at least 4 cells per axis, got {n} on axis {a}"
                )));
            }
            cells[a] = n;
            total = total.checked_mul(n).ok_or_else(|| {
                Error::InvalidParam("total cell count overflows the address space".into())
            })?;
        }
        if total > (1usize << 31) {
            return Err(Error::InvalidParam(format!(
                "total cell count {total} exceeds the supported budget (2^31)"
            )));
        }
        let mut org = [0.0f64; 3];
        for (a, &o) in origin.iter().enumerate() {
            if !o.is_finite() {
                return Err(Error::InvalidParam(format!("origin must be finite, got {o}")));
            }
            org[a] = o;
        }
        Ok(Self { dim, cells, origin: org, h })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Cell counts, one entry per axis.
    pub fn cells(&self) -> &[usize] {
        &self.cells[..self.dim]
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin[..self.dim]
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Total number of cells.
    pub fn len(&self) -> usize {
        self.cells[..self.dim].iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Physical box size along `axis`.
    pub fn extent(&self, axis: usize) -> f64 {
        self.cells[axis] as f64 * self.h
    }

    /// Cell volume h^dim: the midpoint-rule weight.
    pub fn volume_element(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    /// Linear index of the cell with per-axis coordinates `c`
    /// (x fastest, then y, then z).
    pub fn index(&self, c: [usize; 3]) -> usize {
        debug_assert!(c[0] < self.cells[0] && c[1] < self.cells[1] && c[2] < self.cells[2]);
        (c[2] * self.cells[1] + c[1]) * self.cells[0] + c[0]
    }

    /// Per-axis coordinates of linear index `idx`. Unused axes read 0.
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let nx = self.cells[0];
        let ny = self.cells[1];
        [idx % nx, (idx / nx) % ny, idx / (nx * ny)]
    }

    /// Physical coordinates of the cell center. Unused axes read 0.
    pub fn center(&self, idx: usize) -> [f64; 3] {
        let c = self.coords(idx);
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            x[a] = self.origin[a] + (c[a] as f64 + 0.5) * self.h;
        }
        x
    }

    /// Linear index of the face neighbor along `axis` in direction `dir`
    /// (+1/-1), or `None` past the edge of the grid.
    pub fn neighbor(&self, idx: usize, axis: usize, dir: isize) -> Option<usize> {
        let c = self.coords(idx);
        let i = c[axis] as isize + dir;
        if i < 0 || i as usize >= self.cells[axis] {
            return None;
        }
        let mut c2 = c;
        c2[axis] = i as usize;
        Some(self.index(c2))
    }

    /// True when the cell touches the edge of the grid along any axis.
    pub fn on_boundary(&self, idx: usize) -> bool {
        let c = self.coords(idx);
        (0..self.dim).any(|a| c[a] == 0 || c[a] + 1 == self.cells[a])
    }
}

/// A scalar function sampled at cell centers: phase fields, indicator
/// fields, and densities all use this container.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn constant(grid: &GridSpec, c: f64) -> Self {
        Self { grid: grid.clone(), values: vec![c; grid.len()] }
    }

    /// Sample `f` at every cell center.
    pub fn from_fn(grid: &GridSpec, f: impl Fn(&[f64]) -> f64 + Sync) -> Self {
        let values = (0..grid.len())
            .map(|i| {
                let x = grid.center(i);
                f(&x[..grid.dim()])
            })
            .collect();
        Self { grid: grid.clone(), values }
    }

    /// Wrap precomputed values; rejects wrong length or non-finite entries.
    pub fn from_values(grid: &GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} cells",
                values.len(),
                grid.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParam(format!("field holds a non-finite value {v}")));
        }
        Ok(Self { grid: grid.clone(), values })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn same_grid(&self, other: &ScalarField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("fields live on different grids".into()));
        }
        Ok(())
    }

    /// self += alpha * other, cell-wise.
    pub fn axpy(&mut self, alpha: f64, other: &ScalarField) -> Result<()> {
        self.same_grid(other)?;
        for (v, o) in self.values.iter_mut().zip(&other.values) {
            *v += alpha * o;
        }
        Ok(())
    }
}

/// Which cells belong to the container domain. Everything outside carries
/// the fixed exterior phase value.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainMask {
    grid: GridSpec,
    inside: Vec<bool>,
    n_inside: usize,
}

impl DomainMask {
    /// Every cell inside: the container is the whole grid box.
    pub fn full(grid: &GridSpec) -> Self {
        Self { grid: grid.clone(), inside: vec![true; grid.len()], n_inside: grid.len() }
    }

    /// Cells whose centers satisfy the predicate are inside. The inside set
    /// must be nonempty and face-connected.
    pub fn from_fn(grid: &GridSpec, pred: impl Fn(&[f64]) -> bool) -> Result<Self> {
        let inside: Vec<bool> = (0..grid.len())
            .map(|i| {
                let x = grid.center(i);
                pred(&x[..grid.dim()])
            })
            .collect();
        let n_inside = inside.iter().filter(|b| **b).count();
        if n_inside == 0 {
            return Err(Error::InvalidParam("domain mask selects no cells".into()));
        }
        let (_, count) = label_components(grid, &inside);
        if count != 1 {
            return Err(Error::InvalidParam(format!(
                "domain mask must be face-connected; found {count} components"
            )));
        }
        Ok(Self { grid: grid.clone(), inside, n_inside })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    #[inline]
    pub fn inside(&self, idx: usize) -> bool {
        self.inside[idx]
    }

    pub fn inside_slice(&self) -> &[bool] {
        &self.inside
    }

    pub fn n_inside(&self) -> usize {
        self.n_inside
    }

    pub fn same_grid_as(&self, f: &ScalarField) -> Result<()> {
        if self.grid != *f.grid() {
            return Err(Error::GridMismatch("field and mask live on different grids".into()));
        }
        Ok(())
    }

    /// Force the exterior phase value on all outside cells.
    pub fn clamp_exterior(&self, f: &mut ScalarField) -> Result<()> {
        self.same_grid_as(f)?;
        for (v, &ins) in f.values_mut().iter_mut().zip(&self.inside) {
            if !ins {
                *v = EXTERIOR_VALUE;
            }
        }
        Ok(())
    }
}

/// Label the face-connected components of the `active` cell set.
/// Returns per-cell labels (0 = inactive, 1.. = component id) and the
/// number of components. Breadth-first flood fill.
pub fn label_components(grid: &GridSpec, active: &[bool]) -> (Vec<u32>, usize) {
    assert_eq!(active.len(), grid.len(), "active set does not match the grid");
    let mut labels = vec![0u32; active.len()];
    let mut count = 0u32;
    let mut queue = VecDeque::new();
    for start in 0..active.len() {
        if !active[start] || labels[start] != 0 {
            continue;
        }
        count += 1;
        labels[start] = count;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            for axis in 0..grid.dim() {
                for dir in [-1isize, 1] {
                    if let Some(n) = grid.neighbor(i, axis, dir) {
                        if active[n] && labels[n] == 0 {
                            labels[n] = count;
                            queue.push_back(n);
                        }
                    }
                }
            }
        }
    }
    (labels, count as usize)
}

/// Multi-source breadth-first distance (in cell steps) from the `seeds`
/// set, walking face neighbors inside the mask. Unreachable cells get
/// `usize::MAX`.
pub fn bfs_distance(mask: &DomainMask, seeds: &[bool]) -> Vec<usize> {
    let grid = mask.grid();
    assert_eq!(seeds.len(), grid.len(), "seed set does not match the grid");
    let mut dist = vec![usize::MAX; seeds.len()];
    let mut queue = VecDeque::new();
    for i in 0..seeds.len() {
        if seeds[i] && mask.inside(i) {
            dist[i] = 0;
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        let d = dist[i] + 1;
        for axis in 0..grid.dim() {
            for dir in [-1isize, 1] {
                if let Some(n) = grid.neighbor(i, axis, dir) {
                    if mask.inside(n) && dist[n] == usize::MAX {
                        dist[n] = d;
                        queue.push_back(n);
                    }
                }
            }
        }
    }
    dist
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_grid(n: usize) -> GridSpec {
        GridSpec::new(&[n, n], &[0.0, 0.0], 1.0 / n as f64).unwrap()
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(GridSpec::new(&[8], &[0.0], 0.1).is_err());
        assert!(GridSpec::new(&[3, 8], &[0.0, 0.0], 0.1).is_err());
        assert!(GridSpec::new(&[8, 8], &[0.0, 0.0], 0.0).is_err());
        assert!(GridSpec::new(&[8, 8], &[0.0], 0.1).is_err());
        assert!(GridSpec::new(&[8, 8, 8], &[0.0, 0.0, 0.0], 0.1).is_ok());
    }

    #[test]
    fn centers_are_offset_by_half_a_cell() {
        let g = GridSpec::new(&[4, 8], &[1.0, -2.0], 0.25).unwrap();
        let x = g.center(g.index([0, 0, 0]));
        assert_eq!(x[0], 1.0 + 0.125);
        assert_eq!(x[1], -2.0 + 0.125);
        let x = g.center(g.index([3, 7, 0]));
        assert!((x[0] - (1.0 + 3.5 * 0.25)).abs() < 1e-15);
        assert!((x[1] - (-2.0 + 7.5 * 0.25)).abs() < 1e-15);
    }

    #[test]
    fn index_round_trip_3d() {
        let g = GridSpec::new(&[5, 6, 7], &[0.0; 3], 0.1).unwrap();
        for idx in 0..g.len() {
            assert_eq!(g.index(g.coords(idx)), idx);
        }
    }

    #[test]
    fn neighbors_stop_at_edges() {
        let g = unit_grid(4);
        let corner = g.index([0, 0, 0]);
        assert_eq!(g.neighbor(corner, 0, -1), None);
        assert_eq!(g.neighbor(corner, 1, -1), None);
        assert_eq!(g.neighbor(corner, 0, 1), Some(g.index([1, 0, 0])));
        assert!(g.on_boundary(corner));
        let g8 = unit_grid(8);
        assert!(!g8.on_boundary(g8.index([3, 3, 0])));
    }

    #[test]
    fn field_validation() {
        let g = unit_grid(4);
        assert!(ScalarField::from_values(&g, vec![0.0; 15]).is_err());
        assert!(ScalarField::from_values(&g, vec![f64::NAN; 16]).is_err());
        assert!(ScalarField::from_values(&g, vec![0.5; 16]).is_ok());
    }

    #[test]
    fn mask_requires_connected_nonempty_inside() {
        let g = unit_grid(8);
        assert!(DomainMask::from_fn(&g, |_| false).is_err());
        // Two disjoint quadrants: not face-connected.
        let split = DomainMask::from_fn(&g, |x| {
            (x[0] < 0.3 && x[1] < 0.3) || (x[0] > 0.7 && x[1] > 0.7)
        });
        assert!(split.is_err());
        let disk = DomainMask::from_fn(&g, |x| {
            (x[0] - 0.5).hypot(x[1] - 0.5) < 0.45
        })
        .unwrap();
        assert!(disk.n_inside() > 0 && disk.n_inside() < g.len());
    }

    #[test]
    fn clamp_exterior_only_touches_outside_cells() {
        let g = unit_grid(8);
        let mask = DomainMask::from_fn(&g, |x| x[0] < 0.5).unwrap();
        let mut f = ScalarField::constant(&g, 0.7);
        mask.clamp_exterior(&mut f).unwrap();
        for i in 0..g.len() {
            let expect = if mask.inside(i) { 0.7 } else { EXTERIOR_VALUE };
            assert_eq!(f.values()[i], expect);
        }
    }

    #[test]
    fn labeling_counts_components() {
        let g = unit_grid(16);
        let two_blobs: Vec<bool> = (0..g.len())
            .map(|i| {
                let x = g.center(i);
                (x[0] - 0.25).hypot(x[1] - 0.25) < 0.12
                    || (x[0] - 0.75).hypot(x[1] - 0.75) < 0.12
            })
            .collect();
        let (labels, count) = label_components(&g, &two_blobs);
        assert_eq!(count, 2);
        assert!(labels.iter().all(|&l| l <= 2));
        let empty = vec![false; g.len()];
        assert_eq!(label_components(&g, &empty).1, 0);
    }

    #[test]
    fn bfs_distance_matches_manhattan_on_full_mask() {
        let g = unit_grid(8);
        let mask = DomainMask::full(&g);
        let mut seeds = vec![false; g.len()];
        seeds[g.index([0, 0, 0])] = true;
        let d = bfs_distance(&mask, &seeds);
        assert_eq!(d[g.index([3, 4, 0])], 7);
        assert_eq!(d[g.index([0, 0, 0])], 0);
    }
}

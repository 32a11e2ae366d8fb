//! Uniform Cartesian grids on axis-parallel boxes.
//!
//! Nodal fields use the multilinear (Q1) interpolant; cell quantities are
//! evaluated at the cell center, which is also the single quadrature point of
//! every cell. Storage is row-major over the index tuple `(i_0, .., i_{n-1})`
//! with the last axis varying fastest. Vector-valued entries are stored
//! contiguously, and per-cell Jacobians are row-major `N x n`.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;


use crate::error::{Error, Result};
use crate::geometry::{point, Point, Region, GEOM_EPS, MAX_DIM};

/// Number of corners of a cell in `dim` dimensions.
pub const fn corner_count(dim: usize) -> usize {
    1 << dim
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    origin: Point,
    extent: Point,
    cells: [usize; MAX_DIM],
}

/// Cells overlapping a region together with their overlap volumes.
#[derive(Debug, Clone, PartialEq)]
pub struct Overlap {
    pub cells: Vec<(usize, f64)>,
    /// Measure of the region clipped to the grid domain.
    pub measure: f64,
    /// The region was not contained in the grid domain.
    pub clipped: bool,
}

impl Grid {
    pub fn new(dim: usize, origin: &[f64], extent: &[f64], cells_per_axis: &[usize]) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        for len in [origin.len(), extent.len(), cells_per_axis.len()] {
            if len != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: len,
                });
            }
        }
        let mut cells = [1usize; MAX_DIM];
        for k in 0..dim {
            if !(extent[k] > 0.0) || !extent[k].is_finite() || !origin[k].is_finite() {
                return Err(Error::NonPositiveExtent { axis: k });
            }
            if cells_per_axis[k] < 2 {
                return Err(Error::TooFewCells {
                    axis: k,
                    cells: cells_per_axis[k],
                });
            }
            cells[k] = cells_per_axis[k];
        }
        Ok(Grid {
            dim,
            origin: point(origin),
            extent: point(extent),
            cells,
        })
    }

    /// Grid covering `region` with `cells` cells per axis.
    pub fn on_region(region: &Region, cells: usize) -> Result<Self> {
        let dim = region.dim();
        let extent: Vec<f64> = (0..dim).map(|k| region.side(k)).collect();
        Grid::new(dim, region.lo(), &extent, &vec![cells; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin[..self.dim]
    }

    pub fn extent(&self) -> &[f64] {
        &self.extent[..self.dim]
    }

    pub fn cells_per_axis(&self) -> &[usize] {
        &self.cells[..self.dim]
    }

    pub fn cell_size(&self, axis: usize) -> f64 {
        self.extent[axis] / self.cells[axis] as f64
    }

    pub fn cell_sizes(&self) -> Vec<f64> {
        (0..self.dim).map(|k| self.cell_size(k)).collect()
    }

    pub fn nodes_per_axis(&self, axis: usize) -> usize {
        self.cells[axis] + 1
    }

    pub fn node_count(&self) -> usize {
        (0..self.dim).map(|k| self.nodes_per_axis(k)).product()
    }

    pub fn cell_count(&self) -> usize {
        (0..self.dim).map(|k| self.cells[k]).product()
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim).map(|k| self.cell_size(k)).product()
    }

    pub fn domain(&self) -> Region {
        let mut hi = [0.0; MAX_DIM];
        for k in 0..self.dim {
            hi[k] = self.origin[k] + self.extent[k];
        }
        Region::from_points(self.dim, self.origin, hi)
    }

    pub fn node_index(&self, multi: &[usize]) -> usize {
        let mut idx = 0;
        for k in 0..self.dim {
            idx = idx * self.nodes_per_axis(k) + multi[k];
        }
        idx
    }

    pub fn node_multi(&self, mut idx: usize) -> [usize; MAX_DIM] {
        let mut m = [0; MAX_DIM];
        for k in (0..self.dim).rev() {
            let n = self.nodes_per_axis(k);
            m[k] = idx % n;
            idx /= n;
        }
        m
    }

    pub fn cell_index(&self, multi: &[usize]) -> usize {
        let mut idx = 0;
        for k in 0..self.dim {
            idx = idx * self.cells[k] + multi[k];
        }
        idx
    }

    pub fn cell_multi(&self, mut idx: usize) -> [usize; MAX_DIM] {
        let mut m = [0; MAX_DIM];
        for k in (0..self.dim).rev() {
            m[k] = idx % self.cells[k];
            idx /= self.cells[k];
        }
        m
    }

    pub fn node_coord(&self, idx: usize) -> Point {
        let m = self.node_multi(idx);
        let mut p = [0.0; MAX_DIM];
        for k in 0..self.dim {
            p[k] = self.origin[k] + m[k] as f64 * self.cell_size(k);
        }
        p
    }

    pub fn cell_center(&self, idx: usize) -> Point {
        let m = self.cell_multi(idx);
        let mut p = [0.0; MAX_DIM];
        for k in 0..self.dim {
            p[k] = self.origin[k] + (m[k] as f64 + 0.5) * self.cell_size(k);
        }
        p
    }

    /// Cell as a box.
    pub fn cell_region(&self, idx: usize) -> Region {
        let m = self.cell_multi(idx);
        let mut lo = [0.0; MAX_DIM];
        let mut hi = [0.0; MAX_DIM];
        for k in 0..self.dim {
            let h = self.cell_size(k);
            lo[k] = self.origin[k] + m[k] as f64 * h;
            hi[k] = lo[k] + h;
        }
        Region::from_points(self.dim, lo, hi)
    }

    /// Index of the lowest corner node of a cell.
    pub fn cell_base_node(&self, cell: usize) -> usize {
        let m = self.cell_multi(cell);
        self.node_index(&m[..self.dim])
    }

    /// Node index offsets (relative to the base node) of the `2^n` cell corners.
    /// Corner `c` has bit `k` set when it sits on the upper face along axis `k`
    /// (axis 0 is the most significant bit).
    pub fn corner_offsets(&self) -> Vec<usize> {
        let mut strides = [0usize; MAX_DIM];
        let mut s = 1;
        for k in (0..self.dim).rev() {
            strides[k] = s;
            s *= self.nodes_per_axis(k);
        }
        (0..corner_count(self.dim))
            .map(|c| {
                (0..self.dim)
                    .filter(|&k| corner_bit(c, k, self.dim))
                    .map(|k| strides[k])
                    .sum()
            })
            .collect()
    }

    /// Coefficients `d(Du)_a / du_corner` of the Q1 gradient at the cell center,
    /// laid out as `[corner][axis]`.
    pub fn gradient_stencil(&self) -> Vec<[f64; MAX_DIM]> {
        let scale = 1.0 / (1u32 << (self.dim - 1)) as f64;
        (0..corner_count(self.dim))
            .map(|c| {
                let mut w = [0.0; MAX_DIM];
                for (k, wk) in w.iter_mut().enumerate().take(self.dim) {
                    let sign = if corner_bit(c, k, self.dim) { 1.0 } else { -1.0 };
                    *wk = sign * scale / self.cell_size(k);
                }
                w
            })
            .collect()
    }

    /// Whether node `idx` lies on the boundary of the grid domain.
    pub fn is_boundary_node(&self, idx: usize) -> bool {
        let m = self.node_multi(idx);
        (0..self.dim).any(|k| m[k] == 0 || m[k] == self.cells[k])
    }

    pub fn boundary_mask(&self) -> Vec<bool> {
        (0..self.node_count()).map(|i| self.is_boundary_node(i)).collect()
    }

    /// Per-axis nodal index range `[lo, hi]` of nodes in the closed region.
    pub fn node_range(&self, region: &Region) -> Option<[(usize, usize); MAX_DIM]> {
        let mut r = [(0usize, 0usize); MAX_DIM];
        for k in 0..self.dim {
            let h = self.cell_size(k);
            let eps = GEOM_EPS * (1.0 + self.cells[k] as f64);
            let a = ((region.lo()[k] - self.origin[k]) / h - eps).ceil().max(0.0);
            let b = ((region.hi()[k] - self.origin[k]) / h + eps)
                .floor()
                .min(self.cells[k] as f64);
            if b < a {
                return None;
            }
            r[k] = (a as usize, b as usize);
        }
        Some(r)
    }

    /// The sub-grid spanned by the nodes of the ambient grid that lie in the
    /// closed region, together with the ambient index of its first node.
    pub fn subgrid(&self, region: &Region) -> Result<(Grid, [usize; MAX_DIM])> {
        let range = self.node_range(region).ok_or(Error::RegionOutsideDomain)?;
        let mut origin = [0.0; MAX_DIM];
        let mut extent = [0.0; MAX_DIM];
        let mut cells = [0usize; MAX_DIM];
        let mut start = [0usize; MAX_DIM];
        for k in 0..self.dim {
            let (a, b) = range[k];
            let h = self.cell_size(k);
            origin[k] = self.origin[k] + a as f64 * h;
            cells[k] = b - a;
            extent[k] = cells[k] as f64 * h;
            start[k] = a;
        }
        let g = Grid::new(
            self.dim,
            &origin[..self.dim],
            &extent[..self.dim],
            &cells[..self.dim],
        )?;
        Ok((g, start))
    }

    /// Cells overlapping `region`, weighted by overlap volume.
    pub fn overlap(&self, region: &Region) -> Overlap {
        let dim = self.dim;
        let domain = self.domain();
        let clipped = !domain.contains_region(region);
        let Some(inter) = domain.intersection(region) else {
            return Overlap {
                cells: Vec::new(),
                measure: 0.0,
                clipped: true,
            };
        };
        // per-axis list of (cell index, overlap length)
        let mut axes: [Vec<(usize, f64)>; MAX_DIM] = [Vec::new(), Vec::new(), Vec::new()];
        for (k, axis) in axes.iter_mut().enumerate().take(dim) {
            let h = self.cell_size(k);
            let a = inter.lo()[k];
            let b = inter.hi()[k];
            let first = (((a - self.origin[k]) / h).floor().max(0.0) as usize).min(self.cells[k] - 1);
            let last = (((b - self.origin[k]) / h).ceil() as usize).min(self.cells[k]);
            for i in first..last {
                let c0 = self.origin[k] + i as f64 * h;
                let len = (c0 + h).min(b) - c0.max(a);
                if len > 0.0 {
                    axis.push((i, len));
                }
            }
        }
        let mut cells = Vec::new();
        let mut measure = 0.0;
        let counts: Vec<usize> = (0..dim).map(|k| axes[k].len()).collect();
        if counts.contains(&0) {
            return Overlap {
                cells,
                measure: 0.0,
                clipped,
            };
        }
        let total: usize = counts.iter().product();
        let mut multi = [0usize; MAX_DIM];
        cells.reserve(total);
        for _ in 0..total {
            let mut idx = [0usize; MAX_DIM];
            let mut w = 1.0;
            for k in 0..dim {
                let (i, len) = axes[k][multi[k]];
                idx[k] = i;
                w *= len;
            }
            measure += w;
            cells.push((self.cell_index(&idx[..dim]), w));
            for k in (0..dim).rev() {
                multi[k] += 1;
                if multi[k] < counts[k] {
                    break;
                }
                multi[k] = 0;
            }
        }
        Overlap {
            cells,
            measure,
            clipped,
        }
    }
}

#[inline]
pub(crate) fn corner_bit(corner: usize, axis: usize, dim: usize) -> bool {
    (corner >> (dim - 1 - axis)) & 1 == 1
}

fn check_len(expected: usize, values: &[f64]) -> Result<()> {
    if values.len() != expected {
        return Err(Error::LengthMismatch {
            expected,
            found: values.len(),
        });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

/// Nodal field `u : Ω -> R^N`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    codomain: usize,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid, codomain: usize, values: Vec<f64>) -> Result<Self> {
        if codomain == 0 {
            return Err(Error::param("codomain", "must be at least 1"));
        }
        check_len(grid.node_count() * codomain, &values)?;
        Ok(GridFunction {
            grid,
            codomain,
            values,
        })
    }

    pub fn zeros(grid: Grid, codomain: usize) -> Self {
        GridFunction {
            grid,
            codomain,
            values: vec![0.0; grid.node_count() * codomain],
        }
    }

    pub fn from_fn(grid: Grid, codomain: usize, mut f: impl FnMut(&Point, &mut [f64])) -> Self {
        let mut values = vec![0.0; grid.node_count() * codomain];
        for (i, chunk) in values.chunks_mut(codomain).enumerate() {
            f(&grid.node_coord(i), chunk);
        }
        GridFunction {
            grid,
            codomain,
            values,
        }
    }

    pub fn scalar_from_fn(grid: Grid, mut f: impl FnMut(&Point) -> f64) -> Self {
        Self::from_fn(grid, 1, |x, out| out[0] = f(x))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn codomain(&self) -> usize {
        self.codomain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn node(&self, idx: usize) -> &[f64] {
        &self.values[idx * self.codomain..(idx + 1) * self.codomain]
    }

    /// Q1 interpolant evaluated at every cell center (average of the corners).
    pub fn cell_values(&self) -> CellField {
        let g = &self.grid;
        let n = self.codomain;
        let offsets = g.corner_offsets();
        let inv = 1.0 / offsets.len() as f64;
        let mut values = vec![0.0; g.cell_count() * n];
        for c in 0..g.cell_count() {
            let base = g.cell_base_node(c);
            for off in &offsets {
                let node = base + off;
                for k in 0..n {
                    values[c * n + k] += self.values[node * n + k] * inv;
                }
            }
        }
        CellField {
            grid: *g,
            components: n,
            values,
        }
    }

    /// Restriction to the nodes of a sub-grid produced by [`Grid::subgrid`].
    pub fn restrict(&self, sub: &Grid, start: &[usize; MAX_DIM]) -> GridFunction {
        let n = self.codomain;
        let dim = self.grid.dim();
        let mut values = Vec::with_capacity(sub.node_count() * n);
        for i in 0..sub.node_count() {
            let m = sub.node_multi(i);
            let mut amb = [0usize; MAX_DIM];
            for k in 0..dim {
                amb[k] = m[k] + start[k];
            }
            let j = self.grid.node_index(&amb[..dim]);
            values.extend_from_slice(&self.values[j * n..(j + 1) * n]);
        }
        GridFunction {
            grid: *sub,
            codomain: n,
            values,
        }
    }
}

/// Per-cell quantity (scalar, vector or `N x n` matrix per cell).
#[derive(Debug, Clone, PartialEq)]
pub struct CellField {
    grid: Grid,
    components: usize,
    values: Vec<f64>,
}

impl CellField {
    pub fn new(grid: Grid, components: usize, values: Vec<f64>) -> Result<Self> {
        if components == 0 {
            return Err(Error::param("components", "must be at least 1"));
        }
        check_len(grid.cell_count() * components, &values)?;
        Ok(CellField {
            grid,
            components,
            values,
        })
    }

    pub fn zeros(grid: Grid, components: usize) -> Self {
        CellField {
            grid,
            components,
            values: vec![0.0; grid.cell_count() * components],
        }
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        CellField {
            grid,
            components: 1,
            values: vec![value; grid.cell_count()],
        }
    }

    pub fn from_fn(grid: Grid, components: usize, mut f: impl FnMut(&Point, &mut [f64])) -> Self {
        let mut values = vec![0.0; grid.cell_count() * components];
        for (i, chunk) in values.chunks_mut(components).enumerate() {
            f(&grid.cell_center(i), chunk);
        }
        CellField {
            grid,
            components,
            values,
        }
    }

    pub fn scalar_from_fn(grid: Grid, mut f: impl FnMut(&Point) -> f64) -> Self {
        Self::from_fn(grid, 1, |x, out| out[0] = f(x))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn cell(&self, idx: usize) -> &[f64] {
        &self.values[idx * self.components..(idx + 1) * self.components]
    }

    /// Euclidean (Frobenius) norm per cell.
    pub fn norms(&self) -> CellField {
        let values = self
            .values
            .chunks(self.components)
            .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect();
        CellField {
            grid: self.grid,
            components: 1,
            values,
        }
    }

    /// Scalar field `f(cell index, cell entries)`.
    pub fn map(&self, mut f: impl FnMut(usize, &[f64]) -> f64) -> CellField {
        let values = self
            .values
            .chunks(self.components)
            .enumerate()
            .map(|(i, c)| f(i, c))
            .collect();
        CellField {
            grid: self.grid,
            components: 1,
            values,
        }
    }

    /// Restriction to the cells of a sub-grid produced by [`Grid::subgrid`].
    pub fn restrict(&self, sub: &Grid, start: &[usize; MAX_DIM]) -> CellField {
        let n = self.components;
        let dim = self.grid.dim();
        let mut values = Vec::with_capacity(sub.cell_count() * n);
        for i in 0..sub.cell_count() {
            let m = sub.cell_multi(i);
            let mut amb = [0usize; MAX_DIM];
            for k in 0..dim {
                amb[k] = m[k] + start[k];
            }
            let j = self.grid.cell_index(&amb[..dim]);
            values.extend_from_slice(&self.values[j * n..(j + 1) * n]);
        }
        CellField {
            grid: *sub,
            components: n,
            values,
        }
    }

    fn require_scalar(&self) -> Result<()> {
        if self.components != 1 {
            return Err(Error::param("field", "expected a scalar cell field"));
        }
        Ok(())
    }

    /// Midpoint quadrature over `region`, partial cells weighted by overlap volume.
    pub fn integrate(&self, region: &Region) -> Result<f64> {
        integrate(self, region)
    }

    /// `integrate / |region ∩ domain|`.
    pub fn mean(&self, region: &Region) -> Result<f64> {
        self.require_scalar()?;
        let ov = self.grid.overlap(region);
        if ov.measure <= 0.0 {
            return Err(Error::RegionOutsideDomain);
        }
        Ok(weighted_sum(&ov, |c| self.values[c]) / ov.measure)
    }
}

pub(crate) fn weighted_sum(ov: &Overlap, mut f: impl FnMut(usize) -> f64) -> f64 {
    ov.cells.iter().map(|&(c, w)| w * f(c)).sum()
}

/// Per-cell gradient of the Q1 interpolant at the cell center; for vector
/// valued `u` the `N x n` Jacobian in row-major order.
pub fn gradient(u: &GridFunction) -> CellField {
    let g = u.grid();
    let dim = g.dim();
    let n = u.codomain();
    let offsets = g.corner_offsets();
    let stencil = g.gradient_stencil();
    let comps = n * dim;
    let mut values = vec![0.0; g.cell_count() * comps];
    for c in 0..g.cell_count() {
        let base = g.cell_base_node(c);
        let out = &mut values[c * comps..(c + 1) * comps];
        for (off, w) in offsets.iter().zip(&stencil) {
            let node = u.node(base + off);
            for k in 0..n {
                for a in 0..dim {
                    out[k * dim + a] += w[a] * node[k];
                }
            }
        }
    }
    CellField {
        grid: *g,
        components: comps,
        values,
    }
}

/// Midpoint quadrature of a scalar cell field over `region`.
pub fn integrate(f: &CellField, region: &Region) -> Result<f64> {
    f.require_scalar()?;
    if region.dim() != f.grid.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.grid.dim(),
            found: region.dim(),
        });
    }
    let ov = f.grid.overlap(region);
    if ov.cells.is_empty() {
        return Err(Error::RegionOutsideDomain);
    }
    Ok(weighted_sum(&ov, |c| f.values[c]))
}

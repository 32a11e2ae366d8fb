//! Dyadic lattices of a root cube, the localized maximal operator, level
//! sets, the maximal-cube covering and good-λ measurements.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::geometry::{Region, GEOM_EPS, MAX_DIM};
use crate::grid::{weighted_sum, CellField, Grid};
use crate::varlp::magnitudes;

/// A cube of the dyadic lattice of `root`: `index` locates it among the
/// `2^level` sub-intervals per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DyadicCube {
    pub root: Region,
    pub level: u32,
    pub index: [usize; MAX_DIM],
}

impl DyadicCube {
    pub fn root(root: Region) -> Self {
        DyadicCube {
            root,
            level: 0,
            index: [0; MAX_DIM],
        }
    }

    pub fn region(&self) -> Region {
        let dim = self.root.dim();
        let scale = (1u64 << self.level) as f64;
        let mut lo = [0.0; MAX_DIM];
        let mut hi = [0.0; MAX_DIM];
        for k in 0..dim {
            let side = self.root.side(k) / scale;
            lo[k] = self.root.lo()[k] + self.index[k] as f64 * side;
            hi[k] = lo[k] + side;
        }
        Region::from_points(dim, lo, hi)
    }

    pub fn children(&self) -> impl Iterator<Item = DyadicCube> + '_ {
        let dim = self.root.dim();
        (0..1usize << dim).map(move |c| {
            let mut index = [0; MAX_DIM];
            for (k, slot) in index.iter_mut().enumerate().take(dim) {
                *slot = 2 * self.index[k] + ((c >> (dim - 1 - k)) & 1);
            }
            DyadicCube {
                root: self.root,
                level: self.level + 1,
                index,
            }
        })
    }
}

/// All cubes of levels `0..=max_level`, coarse to fine.
pub fn dyadic_lattice(root: &Region, max_level: u32) -> Vec<DyadicCube> {
    let mut out = vec![DyadicCube::root(*root)];
    let mut start = 0;
    for _ in 0..max_level {
        let end = out.len();
        for i in start..end {
            let kids: Vec<_> = out[i].children().collect();
            out.extend(kids);
        }
        start = end;
    }
    out
}

/// The parent cube (twice the side length).
pub fn predecessor(q: &DyadicCube) -> Result<DyadicCube> {
    if q.level == 0 {
        return Err(Error::NoPredecessor);
    }
    let mut index = [0; MAX_DIM];
    for (k, slot) in index.iter_mut().enumerate() {
        *slot = q.index[k] / 2;
    }
    Ok(DyadicCube {
        root: q.root,
        level: q.level - 1,
        index,
    })
}

/// Deepest level whose cubes still span at least two grid cells per axis.
pub fn default_max_level(grid: &Grid, root: &Region) -> u32 {
    let mut level = 0;
    loop {
        let scale = (1u64 << (level + 1)) as f64;
        let fits = (0..grid.dim()).all(|k| root.side(k) / scale >= 2.0 * grid.cell_size(k) * (1.0 - 1e-9));
        if !fits || level >= 30 {
            return level;
        }
        level += 1;
    }
}

fn check_root(grid: &Grid, root: &Region) -> Result<()> {
    if root.dim() != grid.dim() {
        return Err(Error::DimensionMismatch {
            expected: grid.dim(),
            found: root.dim(),
        });
    }
    if !grid.domain().contains_region(&root.scaled(2.0)) {
        return Err(Error::RootOutsideDomain);
    }
    Ok(())
}

/// Per-axis index range `[a, b)` of cells whose centers lie in the closed region.
pub(crate) fn center_range(grid: &Grid, region: &Region) -> Option<[(usize, usize); MAX_DIM]> {
    let mut r = [(0usize, 1usize); MAX_DIM];
    for k in 0..grid.dim() {
        let h = grid.cell_size(k);
        let n = grid.cells_per_axis()[k];
        let eps = GEOM_EPS * (1.0 + n as f64);
        let a = ((region.lo()[k] - grid.origin()[k]) / h - 0.5 - eps).ceil().max(0.0);
        let b = ((region.hi()[k] - grid.origin()[k]) / h - 0.5 + eps).floor() + 1.0;
        let b = b.min(n as f64);
        if b <= a {
            return None;
        }
        r[k] = (a as usize, b as usize);
    }
    Some(r)
}

pub(crate) fn for_each_cell_in(grid: &Grid, region: &Region, mut f: impl FnMut(usize)) {
    let Some(r) = center_range(grid, region) else {
        return;
    };
    for i in r[0].0..r[0].1 {
        for j in r[1].0..r[1].1 {
            for k in r[2].0..r[2].1 {
                let m = [i, j, k];
                f(grid.cell_index(&m[..grid.dim()]));
            }
        }
    }
}

/// `⨍_{2Q} v` for a precomputed non-negative cell density.
fn double_average(grid: &Grid, q: &Region, density: &[f64]) -> f64 {
    let ov = grid.overlap(&q.scaled(2.0));
    if ov.measure <= 0.0 {
        return 0.0;
    }
    weighted_sum(&ov, |c| density[c]) / ov.measure
}

/// `M*_{root,s} f` at cell centers: the largest `(⨍_{2Q}|f|^s)^{1/s}` over
/// lattice cubes `Q` whose closure contains the center; zero outside `root`.
pub fn maximal_function(f: &CellField, root: &Region, s: f64, max_level: u32) -> Result<CellField> {
    if !(s >= 1.0) {
        return Err(Error::param("s", "must be >= 1"));
    }
    let grid = f.grid();
    check_root(grid, root)?;
    let density: Vec<f64> = magnitudes(f).iter().map(|a| a.powf(s)).collect();
    let mut out = vec![0.0; grid.cell_count()];
    for q in dyadic_lattice(root, max_level) {
        let r = q.region();
        let avg = double_average(grid, &r, &density);
        for_each_cell_in(grid, &r, |c| {
            if avg > out[c] {
                out[c] = avg;
            }
        });
    }
    for v in &mut out {
        *v = v.powf(1.0 / s);
    }
    CellField::new(*grid, 1, out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelSets {
    pub kappa: f64,
    pub epsilon: f64,
    pub lambda: f64,
    /// `{M*F > λ}`
    pub o_lambda: Vec<bool>,
    /// `{M*F > κλ} ∩ {M*_{m0}(G + h) <= ελ}`
    pub u_lambda: Vec<bool>,
}

impl LevelSets {
    pub fn from_maximal(
        max_f: &CellField,
        max_gh: &CellField,
        lambda: f64,
        kappa: f64,
        epsilon: f64,
    ) -> Self {
        let mf = max_f.values();
        let mg = max_gh.values();
        LevelSets {
            kappa,
            epsilon,
            lambda,
            o_lambda: mf.iter().map(|&v| v > lambda).collect(),
            u_lambda: mf
                .iter()
                .zip(mg)
                .map(|(&v, &g)| v > kappa * lambda && g <= epsilon * lambda)
                .collect(),
        }
    }

    pub fn o_measure(&self, grid: &Grid) -> f64 {
        mask_measure(grid, &self.o_lambda)
    }

    pub fn u_measure(&self, grid: &Grid) -> f64 {
        mask_measure(grid, &self.u_lambda)
    }
}

pub fn mask_measure(grid: &Grid, mask: &[bool]) -> f64 {
    mask.iter().filter(|&&m| m).count() as f64 * grid.cell_volume()
}

/// Level sets of `M*F` and `M*_{m0}(Gh)` over the truncated lattice of `root`.
#[allow(clippy::too_many_arguments)]
pub fn level_sets(
    f: &CellField,
    gh: &CellField,
    lambda: f64,
    kappa: f64,
    epsilon: f64,
    m0: f64,
    root: &Region,
    max_level: u32,
) -> Result<LevelSets> {
    if !(lambda > 0.0) {
        return Err(Error::param("lambda", "must be positive"));
    }
    if f.grid() != gh.grid() {
        return Err(Error::GridMismatch);
    }
    let mf = maximal_function(f, root, 1.0, max_level)?;
    let mg = maximal_function(gh, root, m0, max_level)?;
    Ok(LevelSets::from_maximal(&mf, &mg, lambda, kappa, epsilon))
}

/// `λ0 = ⨍_{2 root} |F|`.
pub fn covering_threshold(f: &CellField, root: &Region) -> Result<f64> {
    check_root(f.grid(), root)?;
    let a = magnitudes(f);
    Ok(double_average(f.grid(), root, &a))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CZCover {
    pub lambda: f64,
    pub lambda0: f64,
    pub cubes: Vec<DyadicCube>,
    /// `⨍_{2Q_j} F` per cube.
    pub means: Vec<f64>,
    pub max_level: u32,
    /// Some selected cube sits at `max_level`, so finer structure was cut off.
    pub truncated: bool,
}

impl CZCover {
    /// Cells whose centers lie in some covering cube.
    pub fn mask(&self, grid: &Grid) -> Vec<bool> {
        let mut m = vec![false; grid.cell_count()];
        for q in &self.cubes {
            for_each_cell_in(grid, &q.region(), |c| m[c] = true);
        }
        m
    }

    pub fn measure(&self) -> f64 {
        self.cubes.iter().map(|q| q.region().volume()).sum()
    }
}

/// Maximal lattice cubes with `⨍_{2Q} F > λ`, found by a top-down walk.
pub fn cz_cover(f: &CellField, root: &Region, lambda: f64, max_level: u32) -> Result<CZCover> {
    let grid = f.grid();
    let lambda0 = covering_threshold(f, root)?;
    if lambda < lambda0 {
        return Err(Error::BelowCoveringThreshold { lambda, lambda0 });
    }
    let a = magnitudes(f);
    let mut cubes = Vec::new();
    let mut means = Vec::new();
    let mut truncated = false;
    let mut stack: Vec<DyadicCube> = if max_level == 0 {
        Vec::new()
    } else {
        DyadicCube::root(*root).children().collect()
    };
    while let Some(q) = stack.pop() {
        let avg = double_average(grid, &q.region(), &a);
        if avg > lambda {
            truncated |= q.level == max_level;
            cubes.push(q);
            means.push(avg);
        } else if q.level < max_level {
            stack.extend(q.children());
        }
    }
    Ok(CZCover {
        lambda,
        lambda0,
        cubes,
        means,
        max_level,
        truncated,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoodLambdaRow {
    pub epsilon: f64,
    pub lambda: f64,
    pub o_measure: f64,
    pub u_measure: f64,
    /// `|U| / |O|`, zero when `O` is empty.
    pub ratio: f64,
    /// `|Q_j ∩ U| / |Q_j|` for each covering cube at this `λ`.
    pub cube_ratios: Vec<f64>,
}

/// Measured redistribution ratios `δ(ε, λ) = |U_λ| / |O_λ|`.
#[allow(clippy::too_many_arguments)]
pub fn good_lambda_measure(
    f: &CellField,
    gh: &CellField,
    root: &Region,
    kappa: f64,
    epsilons: &[f64],
    lambdas: &[f64],
    m0: f64,
    max_level: u32,
) -> Result<Vec<GoodLambdaRow>> {
    let grid = f.grid();
    if f.grid() != gh.grid() {
        return Err(Error::GridMismatch);
    }
    if !(kappa >= (1u64 << grid.dim()) as f64) {
        return Err(Error::param("kappa", "must be >= 2^n"));
    }
    let lambda0 = covering_threshold(f, root)?;
    if let Some(&l) = lambdas.iter().find(|&&l| l < lambda0) {
        return Err(Error::BelowCoveringThreshold { lambda: l, lambda0 });
    }
    let mf = maximal_function(f, root, 1.0, max_level)?;
    let mg = maximal_function(gh, root, m0, max_level)?;
    let mut rows = Vec::with_capacity(epsilons.len() * lambdas.len());
    for &lambda in lambdas {
        let cover = cz_cover(f, root, lambda, max_level)?;
        for &epsilon in epsilons {
            let ls = LevelSets::from_maximal(&mf, &mg, lambda, kappa, epsilon);
            let o = ls.o_measure(grid);
            let u = ls.u_measure(grid);
            let cube_ratios = cover
                .cubes
                .iter()
                .map(|q| {
                    let (mut hit, mut all) = (0usize, 0usize);
                    for_each_cell_in(grid, &q.region(), |c| {
                        all += 1;
                        hit += ls.u_lambda[c] as usize;
                    });
                    if all == 0 {
                        0.0
                    } else {
                        hit as f64 / all as f64
                    }
                })
                .collect();
            rows.push(GoodLambdaRow {
                epsilon,
                lambda,
                o_measure: o,
                u_measure: u,
                ratio: if o > 0.0 { u / o } else { 0.0 },
                cube_ratios,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn setup(n: usize) -> (Grid, Region) {
        let g = Grid::new(2, &[-0.5, -0.5], &[2.0, 2.0], &[n, n]).unwrap();
        let root = Region::new(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        (g, root)
    }

    #[test]
    fn lattice_counts_and_nesting() {
        let root = Region::new(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert_eq!(dyadic_lattice(&root, 0), vec![DyadicCube::root(root)]);
        assert_eq!(dyadic_lattice(&root, 1).len(), 5);
        let l3 = dyadic_lattice(&root, 3);
        assert_eq!(l3.len(), 85);
        for a in &l3 {
            for b in &l3 {
                assert!(a.region().disjoint_or_nested(&b.region()));
            }
        }
    }

    #[test]
    fn predecessor_geometry() {
        let root = Region::new(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!(predecessor(&DyadicCube::root(root)).is_err());
        for q in dyadic_lattice(&root, 4).into_iter().skip(1) {
            let pre = predecessor(&q).unwrap();
            assert!(pre.region().contains_region(&q.region()));
            assert_relative_eq!(pre.region().volume(), 4.0 * q.region().volume(), max_relative = 1e-12);
            assert!(pre.region().scaled(2.0).contains_region(&q.region().scaled(3.0)));
            if q.level == 1 {
                assert_eq!(pre, DyadicCube::root(root));
            }
        }
    }

    #[test]
    fn maximal_function_constant() {
        let (g, root) = setup(32);
        let f = CellField::constant(g, 3.0);
        let m = maximal_function(&f, &root, 2.0, default_max_level(&g, &root)).unwrap();
        for c in 0..g.cell_count() {
            let inside = root.contains_point(&g.cell_center(c));
            assert_relative_eq!(m.values()[c], if inside { 3.0 } else { 0.0 }, max_relative = 1e-12);
        }
    }

    #[test]
    fn root_must_fit_doubled() {
        let g = Grid::new(2, &[0.0, 0.0], &[1.0, 1.0], &[8, 8]).unwrap();
        let f = CellField::constant(g, 1.0);
        assert_eq!(
            maximal_function(&f, &g.domain(), 1.0, 1),
            Err(Error::RootOutsideDomain)
        );
    }

    #[test]
    fn default_level_keeps_two_cells() {
        let (g, root) = setup(32);
        // root spans 16 cells: 8, 4, 2 cells at levels 1..3
        assert_eq!(default_max_level(&g, &root), 3);
    }

    #[test]
    fn cover_of_constant_is_empty() {
        let (g, root) = setup(16);
        let f = CellField::constant(g, 2.0);
        let cov = cz_cover(&f, &root, 2.0, 3).unwrap();
        assert!(cov.cubes.is_empty());
        assert!(matches!(
            cz_cover(&f, &root, 1.0, 3),
            Err(Error::BelowCoveringThreshold { .. })
        ));
    }

    #[test]
    fn level_sets_above_max_are_empty() {
        let (g, root) = setup(16);
        let f = CellField::scalar_from_fn(g, |x| 1.0 + x[0] * x[0]);
        let gh = CellField::constant(g, 0.5);
        let ls = level_sets(&f, &gh, 100.0, 8.0, 0.1, 2.0, &root, 3).unwrap();
        assert!(ls.o_lambda.iter().all(|&b| !b));
        assert!(ls.u_lambda.iter().all(|&b| !b));
    }

    #[test]
    fn kappa_below_two_to_n_is_rejected() {
        let (g, root) = setup(16);
        let f = CellField::constant(g, 1.0);
        assert!(good_lambda_measure(&f, &f, &root, 3.0, &[0.1], &[2.0], 1.0, 2).is_err());
    }
}

//! Sampled variable exponents and their log-Hölder diagnostics.
//!
//! Essential infima and suprema are grid minima and maxima. All log-Hölder
//! quantities are computed for `1/p`, matching the convention that the
//! log-Hölder constant of an exponent is the one of its reciprocal.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec::Vec;
use core::f64::consts::E;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{distance, norm, Point, Region, MAX_DIM};
use crate::grid::{weighted_sum, Grid, GridFunction};

const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ExponentField {
    field: GridFunction,
    p_minus: f64,
    p_plus: f64,
    p_infinity: Option<f64>,
    cell_p: Vec<f64>,
}

impl ExponentField {
    pub fn new(field: GridFunction, p_infinity: Option<f64>) -> Result<Self> {
        if field.codomain() != 1 {
            return Err(Error::param("exponent", "must be scalar"));
        }
        let vals = field.values();
        if vals.iter().any(|&p| !(p >= 1.0)) {
            return Err(Error::param("exponent", "values must be >= 1"));
        }
        if let Some(pi) = p_infinity {
            if !(pi >= 1.0) || !pi.is_finite() {
                return Err(Error::param("p_infinity", "must be finite and >= 1"));
            }
        }
        let p_minus = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let p_plus = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let cell_p = field.cell_values().values().to_vec();
        Ok(ExponentField {
            field,
            p_minus,
            p_plus,
            p_infinity,
            cell_p,
        })
    }

    pub fn constant(grid: Grid, p: f64) -> Result<Self> {
        Self::new(GridFunction::scalar_from_fn(grid, |_| p), None)
    }

    pub fn from_fn(grid: Grid, f: impl FnMut(&Point) -> f64) -> Result<Self> {
        Self::new(GridFunction::scalar_from_fn(grid, f), None)
    }

    pub fn with_p_infinity(mut self, p_infinity: Option<f64>) -> Result<Self> {
        if let Some(pi) = p_infinity {
            if !(pi >= 1.0) || !pi.is_finite() {
                return Err(Error::param("p_infinity", "must be finite and >= 1"));
            }
        }
        self.p_infinity = p_infinity;
        Ok(self)
    }

    pub fn grid(&self) -> &Grid {
        self.field.grid()
    }

    pub fn field(&self) -> &GridFunction {
        &self.field
    }

    pub fn p_minus(&self) -> f64 {
        self.p_minus
    }

    pub fn p_plus(&self) -> f64 {
        self.p_plus
    }

    pub fn p_infinity(&self) -> Option<f64> {
        self.p_infinity
    }

    /// Checks `1 < p- <= p+ < inf`, required by every higher-integrability operation.
    pub fn require_admissible(&self) -> Result<()> {
        if self.p_minus > 1.0 && self.p_plus.is_finite() {
            Ok(())
        } else {
            Err(Error::ExponentRange {
                p_minus: self.p_minus,
                p_plus: self.p_plus,
            })
        }
    }

    pub fn at_node(&self, idx: usize) -> f64 {
        self.field.values()[idx]
    }

    /// Exponent at cell centers (multilinear interpolation of the nodal values).
    pub fn cell_values(&self) -> &[f64] {
        &self.cell_p
    }

    pub fn at_cell(&self, idx: usize) -> f64 {
        self.cell_p[idx]
    }

    /// Multilinear interpolation at an arbitrary point (clamped to the domain).
    pub fn eval(&self, x: &Point) -> f64 {
        let g = self.grid();
        let dim = g.dim();
        let mut base = [0usize; MAX_DIM];
        let mut t = [0.0; MAX_DIM];
        for k in 0..dim {
            let h = g.cell_size(k);
            let s = ((x[k] - g.origin()[k]) / h).clamp(0.0, g.cells_per_axis()[k] as f64);
            let i = (s.floor() as usize).min(g.cells_per_axis()[k] - 1);
            base[k] = i;
            t[k] = s - i as f64;
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << dim) {
            let mut w = 1.0;
            let mut m = base;
            for k in 0..dim {
                if (corner >> (dim - 1 - k)) & 1 == 1 {
                    m[k] += 1;
                    w *= t[k];
                } else {
                    w *= 1.0 - t[k];
                }
            }
            if w != 0.0 {
                acc += w * self.at_node(g.node_index(&m[..dim]));
            }
        }
        acc
    }

    /// `p_infinity`, defaulting to the value at the node of largest `|x|`.
    pub fn effective_p_infinity(&self) -> f64 {
        if let Some(pi) = self.p_infinity {
            return pi;
        }
        let g = self.grid();
        let mut best = 0;
        let mut best_r = f64::NEG_INFINITY;
        for i in 0..g.node_count() {
            let r = norm(&g.node_coord(i), g.dim());
            if r > best_r * (1.0 + TIE_TOL) + TIE_TOL {
                best_r = r;
                best = i;
            }
        }
        self.at_node(best)
    }

    /// Grid minimum and maximum of `p` over the nodes of every cell meeting `region`.
    pub fn range_over(&self, region: &Region) -> Option<(f64, f64)> {
        let g = self.grid();
        let ov = g.overlap(region);
        let offsets = g.corner_offsets();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &(c, _) in &ov.cells {
            let base = g.cell_base_node(c);
            for off in &offsets {
                let p = self.at_node(base + off);
                lo = lo.min(p);
                hi = hi.max(p);
            }
        }
        if let Some(range) = g.node_range(region) {
            for_each_node_in(g, &range, |i| {
                let p = self.at_node(i);
                lo = lo.min(p);
                hi = hi.max(p);
            });
        }
        if lo.is_finite() {
            Some((lo, hi))
        } else {
            None
        }
    }

    pub fn restrict(&self, sub: &Grid, start: &[usize; MAX_DIM]) -> ExponentField {
        let field = self.field.restrict(sub, start);
        let vals = field.values();
        let p_minus = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let p_plus = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let cell_p = field.cell_values().values().to_vec();
        ExponentField {
            field,
            p_minus,
            p_plus,
            p_infinity: self.p_infinity,
            cell_p,
        }
    }
}

pub(crate) fn for_each_node_in(
    g: &Grid,
    range: &[(usize, usize); MAX_DIM],
    mut f: impl FnMut(usize),
) {
    let dim = g.dim();
    let mut m = [0usize; MAX_DIM];
    for k in 0..dim {
        m[k] = range[k].0;
    }
    loop {
        f(g.node_index(&m[..dim]));
        let mut k = dim;
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            if m[k] < range[k].1 {
                m[k] += 1;
                break;
            }
            m[k] = range[k].0;
        }
    }
}

/// Options for the pairwise log-Hölder scans.
#[derive(Debug, Clone, PartialEq)]
pub struct LogHolderOptions {
    /// Above this many node pairs a fixed-seed random subsample is scanned.
    pub pair_budget: usize,
    pub seed: u64,
}

impl Default for LogHolderOptions {
    fn default() -> Self {
        LogHolderOptions {
            pair_budget: 2_000_000,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VanishingEntry {
    pub epsilon: f64,
    /// Largest node distance below which the local modulus `eps / log(e + 1/|x-y|)` holds.
    pub r: Option<f64>,
    /// Smallest threshold beyond which the far-field and decay conditions hold.
    pub big_r: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogHolderReport {
    pub c_log_local: f64,
    pub c_log_decay: Option<f64>,
    pub c_log: f64,
    /// `(p+)^2 c_log`, the constant of the modulus expressed in `p` itself.
    pub p_scale_bound: f64,
    pub vanishing_profile: Vec<VanishingEntry>,
    pub vmo_oscillation: Option<f64>,
    pub pairs_examined: usize,
    pub subsampled: bool,
}

fn local_modulus(dist: f64) -> f64 {
    (E + 1.0 / dist).ln()
}

fn decay_modulus(r: f64) -> f64 {
    (E + r).ln()
}

/// Visits node pairs: all of them, or `budget` random ones when there are too many.
fn for_each_pair(n: usize, opts: &LogHolderOptions, mut f: impl FnMut(usize, usize)) -> (usize, bool) {
    let total = n * (n - 1) / 2;
    if total <= opts.pair_budget {
        for i in 0..n {
            for j in (i + 1)..n {
                f(i, j);
            }
        }
        (total, false)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut count = 0;
        while count < opts.pair_budget {
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            if i == j {
                continue;
            }
            f(i.min(j), i.max(j));
            count += 1;
        }
        (count, true)
    }
}

/// Log-Hölder constant of `1/p` from scattered samples.
pub fn log_holder_from_samples(
    dim: usize,
    points: &[Point],
    p: &[f64],
    p_infinity: Option<f64>,
    opts: &LogHolderOptions,
) -> Result<LogHolderReport> {
    if points.len() < 2 || p.len() != points.len() {
        return Err(Error::TooFewNodes);
    }
    let alpha: Vec<f64> = p.iter().map(|v| 1.0 / v).collect();
    let mut local: f64 = 0.0;
    let (pairs, subsampled) = for_each_pair(points.len(), opts, |i, j| {
        let d = distance(&points[i], &points[j], dim);
        if d > 0.0 {
            local = local.max((alpha[i] - alpha[j]).abs() * local_modulus(d));
        }
    });
    let decay = p_infinity.map(|pi| {
        let ai = 1.0 / pi;
        points
            .iter()
            .zip(&alpha)
            .map(|(x, a)| (a - ai).abs() * decay_modulus(norm(x, dim)))
            .fold(0.0, f64::max)
    });
    let c_log = local.max(decay.unwrap_or(0.0));
    let p_plus = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(LogHolderReport {
        c_log_local: local,
        c_log_decay: decay,
        c_log,
        p_scale_bound: p_plus * p_plus * c_log,
        vanishing_profile: Vec::new(),
        vmo_oscillation: None,
        pairs_examined: pairs,
        subsampled,
    })
}

fn node_samples(p: &ExponentField) -> (Vec<Point>, Vec<f64>) {
    let g = p.grid();
    let points = (0..g.node_count()).map(|i| g.node_coord(i)).collect();
    (points, p.field().values().to_vec())
}

/// Log-Hölder constant of `1/p` over the grid nodes; the decay part uses
/// [`ExponentField::effective_p_infinity`].
pub fn log_holder_constant(p: &ExponentField, opts: &LogHolderOptions) -> Result<LogHolderReport> {
    let (points, values) = node_samples(p);
    log_holder_from_samples(
        p.grid().dim(),
        &points,
        &values,
        Some(p.effective_p_infinity()),
        opts,
    )
}

/// For each `eps`, the largest admissible local radius `r` and the smallest
/// far-field threshold `R` on the sampled grid.
pub fn vanishing_profile(
    p: &ExponentField,
    epsilons: &[f64],
    opts: &LogHolderOptions,
) -> Result<Vec<VanishingEntry>> {
    if epsilons.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::param("epsilons", "must be positive"));
    }
    let (points, values) = node_samples(p);
    let dim = p.grid().dim();
    let alpha: Vec<f64> = values.iter().map(|v| 1.0 / v).collect();
    let norms: Vec<f64> = points.iter().map(|x| norm(x, dim)).collect();
    // (distance, modulus level, far-field threshold)
    let mut pairs: Vec<(f64, f64, f64)> = Vec::new();
    for_each_pair(points.len(), opts, |i, j| {
        let d = distance(&points[i], &points[j], dim);
        if d > 0.0 {
            let level = (alpha[i] - alpha[j]).abs() * local_modulus(d);
            pairs.push((d, level, norms[i].min(norms[j])));
        }
    });
    let ai = 1.0 / p.effective_p_infinity();
    let decay: Vec<(f64, f64)> = alpha
        .iter()
        .zip(&norms)
        .map(|(a, r)| ((a - ai).abs() * decay_modulus(*r), *r))
        .collect();
    let mut sorted_norms = norms.clone();
    sorted_norms.sort_by(|a, b| a.total_cmp(b));
    let diameter = pairs.iter().map(|t| t.0).fold(0.0, f64::max);

    let mut out = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let first_bad = pairs
            .iter()
            .filter(|t| t.1 > eps)
            .map(|t| t.0)
            .fold(f64::INFINITY, f64::min);
        let r = if first_bad.is_infinite() {
            Some(diameter)
        } else {
            let below = pairs
                .iter()
                .filter(|t| t.0 < first_bad * (1.0 - TIE_TOL))
                .map(|t| t.0)
                .fold(f64::NEG_INFINITY, f64::max);
            below.is_finite().then_some(below)
        };
        let worst = pairs
            .iter()
            .filter(|t| t.1 > eps)
            .map(|t| t.2)
            .chain(decay.iter().filter(|d| d.0 > eps).map(|d| d.1))
            .fold(f64::NEG_INFINITY, f64::max);
        let big_r = if worst.is_infinite() {
            Some(0.0)
        } else {
            sorted_norms
                .iter()
                .copied()
                .find(|&r| r > worst * (1.0 + TIE_TOL) + TIE_TOL)
        };
        out.push(VanishingEntry {
            epsilon: eps,
            r,
            big_r,
        });
    }
    Ok(out)
}

/// The comparison point `y_j` (farthest node from the origin in the closed,
/// domain-clipped `2Q`) and `p_j = p(y_j)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonExponent {
    pub y: Point,
    pub node: usize,
    pub p_j: f64,
}

pub fn select_comparison_exponent(q: &Region, p: &ExponentField) -> Result<ComparisonExponent> {
    let g = p.grid();
    let doubled = q.scaled(2.0);
    let clipped = g
        .domain()
        .intersection(&doubled)
        .ok_or(Error::RegionOutsideDomain)?;
    let range = g.node_range(&clipped).ok_or(Error::RegionOutsideDomain)?;
    let dim = g.dim();
    let mut best: Option<(usize, f64)> = None;
    // row-major traversal is lexicographic in the coordinates, so keeping the
    // first strict maximum implements the lexicographic tie-break
    for_each_node_in(g, &range, |i| {
        let r2: f64 = g.node_coord(i)[..dim].iter().map(|x| x * x).sum();
        match best {
            Some((_, b)) if r2 <= b * (1.0 + TIE_TOL) + TIE_TOL * TIE_TOL => {}
            _ => best = Some((i, r2)),
        }
    });
    let (node, _) = best.ok_or(Error::RegionOutsideDomain)?;
    Ok(ComparisonExponent {
        y: g.node_coord(node),
        node,
        p_j: p.at_node(node),
    })
}

/// `(mean over region of |p - p_ref|^s)^(1/s)` by midpoint quadrature.
pub fn oscillation_about(region: &Region, p: &ExponentField, p_ref: f64, s: f64) -> Result<f64> {
    if !(s >= 1.0) {
        return Err(Error::param("s", "must be >= 1"));
    }
    let ov = p.grid().overlap(region);
    if ov.measure <= 0.0 {
        return Err(Error::RegionOutsideDomain);
    }
    let cp = p.cell_values();
    let m = weighted_sum(&ov, |c| (cp[c] - p_ref).abs().powf(s)) / ov.measure;
    Ok(m.powf(1.0 / s))
}

/// `(mean over Q of |p - p_j|^s)^(1/s)` with `p_j` chosen from `2Q`.
pub fn oscillation_average(q: &Region, p: &ExponentField, s: f64) -> Result<f64> {
    if !(s >= 1.0) {
        return Err(Error::param("s", "must be >= 1"));
    }
    let cmp = select_comparison_exponent(q, p)?;
    oscillation_about(q, p, cmp.p_j, s)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillationReport {
    pub value: f64,
    /// `(p+)^2 c_log / log(e + max{R, 1/R, |center(Q)|})`.
    pub bound: f64,
    pub ratio: f64,
}

/// Logarithmic scale `log(e + max{R, 1/R, |center(Q)|})` of a cube.
pub fn cube_log_scale(q: &Region) -> f64 {
    let r = q.side_length();
    let c = norm(&q.center(), q.dim());
    (E + r.max(1.0 / r).max(c)).ln()
}

pub fn oscillation_report(q: &Region, p: &ExponentField, s: f64, c_log: f64) -> Result<OscillationReport> {
    let value = oscillation_average(q, p, s)?;
    let bound = p.p_plus() * p.p_plus() * c_log / cube_log_scale(q);
    let ratio = if bound > 0.0 {
        value / bound
    } else if value == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(OscillationReport { value, bound, ratio })
}

/// Largest normalized oscillation over a cube family:
/// `(mean over 2Q of |p - p_j|^s)^(1/s) * log(e + max{1/l, l, |center|})`.
pub fn vmo_oscillation(p: &ExponentField, cubes: &[Region], s: f64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for q in cubes {
        let cmp = select_comparison_exponent(q, p)?;
        let osc = oscillation_about(&q.scaled(2.0), p, cmp.p_j, s)?;
        worst = worst.max(osc * cube_log_scale(q));
    }
    Ok(worst)
}

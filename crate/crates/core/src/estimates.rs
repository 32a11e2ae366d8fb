//! Measured forms of the Caccioppoli, reverse Hölder and Gehring
//! inequalities, the comparison integrability triplet, and the level-set
//! route to higher integrability.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::dyadic::{default_max_level, dyadic_lattice};
use crate::error::{Error, Result};
use crate::exponent::ExponentField;
use crate::geometry::Region;
use crate::grid::{gradient, weighted_sum, CellField, Grid, GridFunction};
use crate::record::{EstimateRecord, Flag};
use crate::varlp::{decay_value, magnitudes, oscillation_field, pow0, sobolev_exponent_limit};

/// Per-cell `|Du|^{p}`, `|G|^{p}` and `|Du|` of a solved instance.
struct Densities {
    grid: Grid,
    du: Vec<f64>,
    f: Vec<f64>,
    gp: Vec<f64>,
    p: Vec<f64>,
}

impl Densities {
    fn new(u: &GridFunction, g: &CellField, p: &ExponentField) -> Result<Self> {
        let grid = *u.grid();
        if g.grid() != &grid || p.grid() != &grid {
            return Err(Error::GridMismatch);
        }
        let du = magnitudes(&gradient(u));
        let gm = magnitudes(g);
        let pc = p.cell_values().to_vec();
        let f = du.iter().zip(&pc).map(|(a, q)| pow0(*a, *q)).collect();
        let gp = gm.iter().zip(&pc).map(|(a, q)| pow0(*a, *q)).collect();
        Ok(Densities { grid, du, f, gp, p: pc })
    }

    fn h(&self, c: usize, m: f64) -> f64 {
        decay_value(&self.grid.cell_center(c), self.grid.dim(), m)
    }
}

fn mean_over(grid: &Grid, region: &Region, f: impl FnMut(usize) -> f64) -> Result<f64> {
    let ov = grid.overlap(region);
    if ov.measure <= 0.0 {
        return Err(Error::RegionOutsideDomain);
    }
    Ok(weighted_sum(&ov, f) / ov.measure)
}

fn integral_over(grid: &Grid, region: &Region, f: impl FnMut(usize) -> f64) -> f64 {
    weighted_sum(&grid.overlap(region), f)
}

fn require_doubled(grid: &Grid, q: &Region) -> Result<Region> {
    if q.dim() != grid.dim() {
        return Err(Error::DimensionMismatch {
            expected: grid.dim(),
            found: q.dim(),
        });
    }
    let q2 = q.scaled(2.0);
    if !grid.domain().contains_region(&q2) {
        return Err(Error::RegionOutsideDomain);
    }
    Ok(q2)
}

/// `∫_Q |Du|^p` against `∫_{2Q} |(u - <u>_{2Q}) / R|^p + ∫_{2Q} |G|^p`, `R` the
/// side length of `Q`.
pub fn caccioppoli_check(u: &GridFunction, g: &CellField, p: &ExponentField, q: &Region) -> Result<EstimateRecord> {
    let d = Densities::new(u, g, p)?;
    let grid = d.grid;
    let q2 = require_doubled(&grid, q)?;
    let r = q.side_length();
    let lhs = integral_over(&grid, q, |c| d.f[c]);
    let ov2 = grid.overlap(&q2);
    let osc = oscillation_field(&u.cell_values(), &ov2);
    let osc_term = weighted_sum(&ov2, |c| pow0(osc[c] / r, d.p[c]));
    let g_term = weighted_sum(&ov2, |c| d.gp[c]);
    Ok(EstimateRecord::new(
        "caccioppoli",
        lhs,
        vec![("oscillation", osc_term), ("data", g_term)],
        *q,
        &grid,
    ))
}

/// `⨍_Q |Du|^p` against `(⨍_{2Q} |Du|^{p/s})^s`, `⨍_{2Q} |G|^p` and
/// `⨍_{2Q} h` (decay exponent `m`, conventionally `2n`).
pub fn reverse_holder_check(
    u: &GridFunction,
    g: &CellField,
    p: &ExponentField,
    q: &Region,
    s: f64,
    m: f64,
) -> Result<EstimateRecord> {
    let d = Densities::new(u, g, p)?;
    let grid = d.grid;
    let q2 = require_doubled(&grid, q)?;
    let (pm, _) = p.range_over(&q2).ok_or(Error::RegionOutsideDomain)?;
    if !(s >= 1.0 && s < sobolev_exponent_limit(grid.dim(), pm)) {
        return Err(Error::param("s", "must satisfy 1 <= s < min{p-, n/(n-1)}"));
    }
    if !(m > grid.dim() as f64) {
        return Err(Error::param("m", "must exceed the dimension"));
    }
    let lhs = mean_over(&grid, q, |c| d.f[c])?;
    let low = mean_over(&grid, &q2, |c| pow0(d.du[c], d.p[c] / s))?.powf(s);
    let g_term = mean_over(&grid, &q2, |c| d.gp[c])?;
    let h_term = mean_over(&grid, &q2, |c| d.h(c, m))?;
    Ok(EstimateRecord::new(
        "reverse_holder",
        lhs,
        vec![("lower_moment", low), ("data", g_term), ("decay", h_term)],
        *q,
        &grid,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GehringRow {
    pub mu: f64,
    /// Values on the cube attaining the worst constant.
    pub lhs: f64,
    pub rhs: f64,
    pub constant: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GehringResult {
    /// Largest `μ` of the grid such that every `μ' <= μ` keeps the worst-cube
    /// constant below the cap.
    pub m0: f64,
    pub mu_grid: Vec<f64>,
    pub ratio_table: Vec<GehringRow>,
    pub sigma: f64,
    pub cubes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GehringOptions {
    pub cap: f64,
    /// Decay exponent of `h`; `None` uses `2n`.
    pub m: Option<f64>,
    /// Stand-in for the second integrability exponent entering `σ`; `None`
    /// uses `m0`.
    pub m1: Option<f64>,
    pub max_level: Option<u32>,
}

impl Default for GehringOptions {
    fn default() -> Self {
        GehringOptions {
            cap: 1e3,
            m: None,
            m1: None,
            max_level: None,
        }
    }
}

/// Higher-integrability scan over `μ = 1 ..= mu_max` (`steps` points) on the
/// lattice cubes `Q` of `root` with `2Q ⊆ root`:
/// `(⨍_Q F^μ)^{1/μ}` against `⨍_{2Q} F + (⨍_{2Q} |G|^{pμ} + ⨍_{2Q} h^μ)^{1/μ}`.
pub fn gehring_scan(
    u: &GridFunction,
    g: &CellField,
    p: &ExponentField,
    root: &Region,
    mu_max: f64,
    steps: usize,
    opts: &GehringOptions,
) -> Result<GehringResult> {
    if !(mu_max > 1.0) || steps < 2 {
        return Err(Error::param("mu_max", "need mu_max > 1 and at least two steps"));
    }
    let d = Densities::new(u, g, p)?;
    let grid = d.grid;
    if !grid.domain().contains_region(root) {
        return Err(Error::RootOutsideDomain);
    }
    let m = opts.m.unwrap_or(2.0 * grid.dim() as f64);
    let level = opts.max_level.unwrap_or_else(|| default_max_level(&grid, root));
    let cubes: Vec<Region> = dyadic_lattice(root, level)
        .into_iter()
        .map(|c| c.region())
        .filter(|q| root.contains_region(&q.scaled(2.0)))
        .collect();
    if cubes.is_empty() {
        return Err(Error::param("root", "no lattice cube has its double inside the root"));
    }
    let mu_grid: Vec<f64> = (0..steps)
        .map(|i| 1.0 + (mu_max - 1.0) * i as f64 / (steps - 1) as f64)
        .collect();
    let h: Vec<f64> = (0..grid.cell_count()).map(|c| d.h(c, m)).collect();
    // per cube overlaps are reused across μ
    let ovs: Vec<_> = cubes.iter().map(|q| (grid.overlap(q), grid.overlap(&q.scaled(2.0)))).collect();
    let mut table = Vec::with_capacity(steps);
    for &mu in &mu_grid {
        let mut worst = GehringRow {
            mu,
            lhs: 0.0,
            rhs: 0.0,
            constant: 0.0,
        };
        for (ov, ov2) in &ovs {
            let lhs = (weighted_sum(ov, |c| pow0(d.f[c], mu)) / ov.measure).powf(1.0 / mu);
            let mean_f = weighted_sum(ov2, |c| d.f[c]) / ov2.measure;
            let data = (weighted_sum(ov2, |c| pow0(d.gp[c], mu) + h[c].powf(mu)) / ov2.measure).powf(1.0 / mu);
            let rhs = mean_f + data;
            let constant = if rhs > 0.0 { lhs / rhs } else { 0.0 };
            if constant > worst.constant {
                worst = GehringRow { mu, lhs, rhs, constant };
            }
        }
        table.push(worst);
    }
    let mut m0 = 1.0;
    for row in &table {
        if row.constant <= opts.cap {
            m0 = row.mu;
        } else {
            break;
        }
    }
    let m1 = opts.m1.unwrap_or(m0);
    Ok(GehringResult {
        m0,
        mu_grid,
        ratio_table: table,
        sigma: m0.min(m1).powf(0.25),
        cubes: cubes.len(),
    })
}

/// Integrability of `u` and its replacement `w` on `2Qj` relative to the
/// covering level `lambda`:
/// `(⨍|Du|^{σ³p_j})^{1/σ³}`, `(⨍|Dw|^{σ³p_j})^{1/σ³}` and `(⨍|Dw|^{σ²p})^{1/σ²}`.
/// The record's lhs is the largest of the three and its rhs is `λ`.
pub fn integrability_triplet(
    u: &GridFunction,
    w: &GridFunction,
    qj: &Region,
    p: &ExponentField,
    p_j: f64,
    sigma: f64,
    lambda: f64,
) -> Result<EstimateRecord> {
    if u.grid() != p.grid() {
        return Err(Error::GridMismatch);
    }
    if !(sigma >= 1.0) || !(lambda > 0.0) {
        return Err(Error::param("sigma", "need sigma >= 1 and lambda > 0"));
    }
    let q2 = require_doubled(u.grid(), qj)?;
    let (sub, start) = u.grid().subgrid(&q2)?;
    if w.grid() != &sub {
        return Err(Error::GridMismatch);
    }
    let du = magnitudes(&gradient(&u.restrict(&sub, &start)));
    let dw = magnitudes(&gradient(w));
    let pc = p.restrict(&sub, &start);
    let cells = sub.cell_count() as f64;
    let s3 = sigma.powi(3);
    let s2 = sigma * sigma;
    let a = (du.iter().map(|v| pow0(*v, s3 * p_j)).sum::<f64>() / cells).powf(1.0 / s3);
    let b = (dw.iter().map(|v| pow0(*v, s3 * p_j)).sum::<f64>() / cells).powf(1.0 / s3);
    let c = (dw
        .iter()
        .enumerate()
        .map(|(i, v)| pow0(*v, s2 * pc.at_cell(i)))
        .sum::<f64>()
        / cells)
        .powf(1.0 / s2);
    let mut rec = EstimateRecord::new("integrability_triplet", a.max(b).max(c), vec![("lambda", lambda)], *qj, u.grid());
    rec.extras = vec![
        ("du_pj", a),
        ("dw_pj", b),
        ("dw_p", c),
        ("du_pj_ratio", a / lambda),
        ("dw_pj_ratio", b / lambda),
        ("dw_p_ratio", c / lambda),
    ];
    let exact = (0..u.grid().dim()).all(|k| (sub.extent()[k] - q2.side(k)).abs() <= 1e-9 * q2.side(k));
    if !exact {
        rec.flag(Flag::SubgridMismatch);
    }
    Ok(rec)
}

/// `q ∫_0^∞ λ^{q-1} |{F > λ}| dλ` from the distribution function sampled
/// at the increasing levels `lambdas` (trapezoid rule in `λ^q`, plus the
/// interval `[0, λ_1]` with `|{F > 0}|` at its left end). Levels past the
/// last sample contribute nothing, so the last level must exceed `max F`.
pub fn level_set_moment(values: &[(f64, f64)], q: f64, lambdas: &[f64]) -> f64 {
    let dist = |l: f64| values.iter().filter(|v| v.0 > l).map(|v| v.1).sum::<f64>();
    let mut total = 0.0;
    let mut prev_s = 0.0;
    let mut prev_d = dist(0.0);
    for &l in lambdas {
        let s = l.powf(q);
        let d = dist(l);
        total += 0.5 * (s - prev_s) * (prev_d + d);
        prev_s = s;
        prev_d = d;
    }
    total
}

/// 64 geometric levels from `lo` to `hi`.
pub fn geometric_levels(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let count = count.max(2);
    let r = (hi / lo).powf(1.0 / (count - 1) as f64);
    (0..count).map(|i| lo * r.powi(i as i32)).collect()
}

pub const LEVEL_COUNT: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HigherIntegrabilityOptions {
    pub kappa: f64,
    pub epsilon: f64,
    pub m0: f64,
    /// Decay exponent of `h`; `None` uses `2n`.
    pub m: Option<f64>,
    pub levels: usize,
    pub max_level: Option<u32>,
}

impl HigherIntegrabilityOptions {
    pub fn new(kappa: f64, epsilon: f64, m0: f64) -> Self {
        HigherIntegrabilityOptions {
            kappa,
            epsilon,
            m0,
            m: None,
            levels: LEVEL_COUNT,
            max_level: None,
        }
    }
}

/// `(⨍_root F^q)^{1/q}` with `F = |Du|^p`, computed by quadrature and again
/// from a λ-sweep of the distribution function split at `κλ0`, against
/// `⨍_{2 root} F + (⨍_{2 root} (|G|^p + h)^q)^{1/q}`.
pub fn higher_integrability_check(
    u: &GridFunction,
    g: &CellField,
    p: &ExponentField,
    q: f64,
    root: &Region,
    opts: &HigherIntegrabilityOptions,
) -> Result<EstimateRecord> {
    if !(q >= 1.0) {
        return Err(Error::param("q", "must be >= 1"));
    }
    let d = Densities::new(u, g, p)?;
    let grid = d.grid;
    let root2 = require_doubled(&grid, root).map_err(|_| Error::RootOutsideDomain)?;
    let m = opts.m.unwrap_or(2.0 * grid.dim() as f64);
    let ov = grid.overlap(root);
    let ov2 = grid.overlap(&root2);
    let moment = weighted_sum(&ov, |c| pow0(d.f[c], q)) / ov.measure;
    let lhs = moment.powf(1.0 / q);
    let lambda0 = weighted_sum(&ov2, |c| d.f[c]) / ov2.measure;
    let data = (weighted_sum(&ov2, |c| (d.gp[c] + d.h(c, m)).powf(q)) / ov2.measure).powf(1.0 / q);

    // level-set route
    let fmax = ov.cells.iter().map(|&(c, _)| d.f[c]).fold(0.0, f64::max);
    let values: Vec<(f64, f64)> = ov.cells.iter().map(|&(c, w)| (d.f[c], w)).collect();
    let (lower, upper) = if fmax > 0.0 {
        let lo = if lambda0 > 0.0 { lambda0 / 10.0 } else { fmax * 1e-3 };
        let levels = geometric_levels(lo.min(fmax), 2.0 * fmax, opts.levels);
        let split = opts.kappa * lambda0;
        let below: Vec<f64> = levels.iter().copied().filter(|&l| l <= split).collect();
        let whole = level_set_moment(&values, q, &levels);
        let low = if below.is_empty() {
            0.0
        } else {
            level_set_moment(&values, q, &below)
        };
        (low, whole - low)
    } else {
        (0.0, 0.0)
    };
    let reconstructed = ((lower + upper) / ov.measure).powf(1.0 / q);
    let mut rec = EstimateRecord::new(
        "higher_integrability",
        lhs,
        vec![("mean_f_double", lambda0), ("data_q", data)],
        *root,
        &grid,
    );
    rec.extras = vec![
        ("q", q),
        ("lhs_level_sets", reconstructed),
        ("level_set_gap", if lhs > 0.0 { (reconstructed - lhs).abs() / lhs } else { 0.0 }),
        ("lambda0", lambda0),
        ("kappa_lambda0", opts.kappa * lambda0),
        ("moment_below_split", lower / ov.measure),
        ("moment_above_split", upper / ov.measure),
    ];
    Ok(rec)
}

/// `higher_integrability_check` on the boxes `(-R, R)^n` for each `R`, with
/// both sides multiplied by `|Ω|^{1/q}` (norms instead of averages).
pub fn global_proxy(
    u: &GridFunction,
    g: &CellField,
    p: &ExponentField,
    q: f64,
    box_sizes: &[f64],
    opts: &HigherIntegrabilityOptions,
) -> Result<Vec<EstimateRecord>> {
    let dim = u.grid().dim();
    box_sizes
        .iter()
        .map(|&r| {
            let root = Region::cube(&[0.0; 3][..dim], 2.0 * r)?;
            let mut rec = higher_integrability_check(u, g, p, q, &root, opts)?;
            let scale = root.volume().powf(1.0 / q);
            rec.name = "global_proxy";
            rec.lhs *= scale;
            for (_, v) in rec.rhs_components.iter_mut() {
                *v *= scale;
            }
            rec.extras.push(("box_half_width", r));
            rec.refresh_constant();
            Ok(rec)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn centered(n: usize) -> Grid {
        Grid::new(2, &[-1.0, -1.0], &[2.0, 2.0], &[n, n]).unwrap()
    }

    #[test]
    fn constant_u_has_no_caccioppoli_energy() {
        let g = centered(16);
        let p = ExponentField::constant(g, 2.5).unwrap();
        let u = GridFunction::scalar_from_fn(g, |_| 3.0);
        let q = Region::cube(&[0.0, 0.0], 0.5).unwrap();
        let rec = caccioppoli_check(&u, &CellField::zeros(g, 2), &p, &q).unwrap();
        assert_eq!(rec.lhs, 0.0);
        assert_eq!(rec.empirical_constant, 0.0);
        let big = Region::cube(&[0.0, 0.0], 1.5).unwrap();
        assert!(caccioppoli_check(&u, &CellField::zeros(g, 2), &p, &big).is_err());
    }

    #[test]
    fn reverse_holder_equality_case() {
        let g = centered(16);
        let p = ExponentField::constant(g, 3.0).unwrap();
        let u = GridFunction::scalar_from_fn(g, |x| 2.0 * x[0] - x[1]);
        let q = Region::cube(&[0.0, 0.0], 0.5).unwrap();
        let rec = reverse_holder_check(&u, &CellField::zeros(g, 2), &p, &q, 1.5, 4.0).unwrap();
        assert_relative_eq!(rec.lhs, rec.rhs("lower_moment").unwrap(), max_relative = 1e-12);
        assert!(rec.empirical_constant <= 1.0);
        assert!(reverse_holder_check(&u, &CellField::zeros(g, 2), &p, &q, 2.0, 4.0).is_err());
    }

    #[test]
    fn gehring_at_mu_one_is_bounded_by_the_doubling_factor() {
        let g = centered(32);
        let p = ExponentField::from_fn(g, |x| 2.0 + 0.1 * x[0]).unwrap();
        let u = GridFunction::scalar_from_fn(g, |x| (2.0 * x[0]).sin() * (x[1] + 0.3));
        let r = gehring_scan(&u, &CellField::zeros(g, 2), &p, &g.domain(), 2.0, 5, &GehringOptions::default()).unwrap();
        assert_eq!(r.mu_grid[0], 1.0);
        assert!(r.ratio_table[0].constant <= 4.0);
        assert!(r.m0 > 1.0);
        assert_relative_eq!(r.sigma, r.m0.powf(0.25));
    }

    #[test]
    fn triplet_on_affine_data() {
        let g = centered(16);
        let p = ExponentField::constant(g, 2.0).unwrap();
        let u = GridFunction::scalar_from_fn(g, |x| 3.0 * x[0]);
        let q = Region::cube(&[0.0, 0.0], 0.5).unwrap();
        let (sub, start) = g.subgrid(&q.scaled(2.0)).unwrap();
        let w = u.restrict(&sub, &start);
        let rec = integrability_triplet(&u, &w, &q, &p, 2.0, 1.1, 1.0).unwrap();
        assert_relative_eq!(rec.extra("du_pj").unwrap(), 9.0, max_relative = 1e-12);
        assert_relative_eq!(rec.extra("dw_pj").unwrap(), 9.0, max_relative = 1e-12);
        assert!(!rec.has_flag(Flag::SubgridMismatch));
    }

    #[test]
    fn level_set_moment_of_two_values() {
        // F = 1 on measure 1/2 and 3 on measure 1/2: ∫F² = 5
        let v = [(1.0, 0.5), (3.0, 0.5)];
        let fine = geometric_levels(1e-4, 4.0, 4000);
        assert_relative_eq!(level_set_moment(&v, 2.0, &fine), 5.0, max_relative = 2e-3);
    }

    #[test]
    fn higher_integrability_q1_is_trivial() {
        let g = centered(32);
        let p = ExponentField::constant(g, 2.0).unwrap();
        let u = GridFunction::scalar_from_fn(g, |x| (3.0 * x[0]).sin() + x[1] * x[1]);
        let root = Region::cube(&[0.0, 0.0], 1.0).unwrap();
        let opts = HigherIntegrabilityOptions::new(8.0, 0.1, 1.0);
        let rec = higher_integrability_check(&u, &CellField::zeros(g, 2), &p, 1.0, &root, &opts).unwrap();
        assert!(rec.empirical_constant <= 4.0);
        assert!(rec.extra("level_set_gap").unwrap() < 0.05);
        assert!(higher_integrability_check(&u, &CellField::zeros(g, 2), &p, 0.5, &root, &opts).is_err());
    }
}

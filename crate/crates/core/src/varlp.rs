//! Variable-exponent Lebesgue machinery: modulars, Luxemburg and
//! Marcinkiewicz norms, and the measured forms of the key Jensen estimate,
//! the Sobolev–Poincaré inequality and the log-mean bound.
//!
//! Vector- or matrix-valued cell fields enter through their pointwise
//! Euclidean norm.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::E;


use crate::error::{Error, Result};
use crate::exponent::ExponentField;
use crate::geometry::{norm, Point, Region};
use crate::grid::{gradient, weighted_sum, CellField, Grid, GridFunction, Overlap};
use crate::record::{EstimateRecord, Flag};

/// Pointwise `|f|` of a cell field.
pub(crate) fn magnitudes(f: &CellField) -> Vec<f64> {
    if f.components() == 1 {
        f.values().iter().map(|v| v.abs()).collect()
    } else {
        f.norms().values().to_vec()
    }
}

fn same_grid(a: &Grid, b: &Grid) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

fn overlap_in(grid: &Grid, region: &Region) -> Result<Overlap> {
    if region.dim() != grid.dim() {
        return Err(Error::DimensionMismatch {
            expected: grid.dim(),
            found: region.dim(),
        });
    }
    let ov = grid.overlap(region);
    if ov.measure <= 0.0 {
        return Err(Error::RegionOutsideDomain);
    }
    Ok(ov)
}

/// `∫_region |f(x)|^{p(x)} dx`.
pub fn modular(f: &CellField, p: &ExponentField, region: &Region) -> Result<f64> {
    same_grid(f.grid(), p.grid())?;
    let ov = overlap_in(f.grid(), region)?;
    let a = magnitudes(f);
    Ok(modular_of(&a, p.cell_values(), &ov, 1.0))
}

fn modular_of(a: &[f64], p: &[f64], ov: &Overlap, scale: f64) -> f64 {
    weighted_sum(ov, |c| {
        let v = a[c] * scale;
        if v == 0.0 {
            0.0
        } else {
            v.powf(p[c])
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LuxemburgResult {
    pub norm: f64,
    pub modular_at_norm: f64,
    pub bisection_iterations: usize,
}

pub const LUXEMBURG_TOL: f64 = 1e-10;

/// `inf{λ > 0 : ∫ |f/λ|^{p(x)} ≤ 1}` by bracketing and bisection.
pub fn luxemburg_norm(f: &CellField, p: &ExponentField, region: &Region) -> Result<LuxemburgResult> {
    luxemburg_norm_with_tol(f, p, region, LUXEMBURG_TOL)
}

pub fn luxemburg_norm_with_tol(
    f: &CellField,
    p: &ExponentField,
    region: &Region,
    rel_tol: f64,
) -> Result<LuxemburgResult> {
    same_grid(f.grid(), p.grid())?;
    let ov = overlap_in(f.grid(), region)?;
    let a = magnitudes(f);
    let pc = p.cell_values();
    let rho = |lambda: f64| modular_of(&a, pc, &ov, 1.0 / lambda);
    let amax = ov.cells.iter().map(|&(c, _)| a[c]).fold(0.0, f64::max);
    if amax == 0.0 {
        return Ok(LuxemburgResult {
            norm: 0.0,
            modular_at_norm: 0.0,
            bisection_iterations: 0,
        });
    }
    if !rho(1.0).is_finite() && !rho(amax).is_finite() {
        return Err(Error::NonFinite);
    }
    let mut iterations = 0;
    let (mut lo, mut hi) = {
        let mut lam = amax.max(f64::MIN_POSITIVE);
        if rho(lam) > 1.0 {
            while rho(2.0 * lam) > 1.0 {
                lam *= 2.0;
                iterations += 1;
            }
            (lam, 2.0 * lam)
        } else {
            while rho(0.5 * lam) <= 1.0 {
                lam *= 0.5;
                iterations += 1;
            }
            (0.5 * lam, lam)
        }
    };
    while hi - lo > rel_tol * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if rho(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    Ok(LuxemburgResult {
        norm: hi,
        modular_at_norm: rho(hi),
        bisection_iterations: iterations,
    })
}

/// `sup_λ λ |{|f| > λ} ∩ region|^{1/s}`, evaluated exactly at the jumps of the
/// distribution function.
pub fn marcinkiewicz_norm(f: &CellField, s: f64, region: &Region) -> Result<f64> {
    if !(s >= 1.0) {
        return Err(Error::param("s", "must be >= 1"));
    }
    let ov = overlap_in(f.grid(), region)?;
    let a = magnitudes(f);
    let mut vals: Vec<(f64, f64)> = ov.cells.iter().map(|&(c, w)| (a[c], w)).collect();
    vals.sort_by(|x, y| y.0.total_cmp(&x.0));
    // descending scan: after consuming every entry >= v, `mass` is |{|f| >= v}|
    let mut best: f64 = 0.0;
    let mut mass = 0.0;
    let mut i = 0;
    while i < vals.len() {
        let v = vals[i].0;
        while i < vals.len() && vals[i].0 == v {
            mass += vals[i].1;
            i += 1;
        }
        if v > 0.0 {
            best = best.max(v * mass.powf(1.0 / s));
        }
    }
    Ok(best)
}

/// The decay weight `h(x) = (e + |x|)^{-m}` at cell centers.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayWeight {
    pub m: f64,
    pub values: CellField,
}

pub fn decay_value(x: &Point, dim: usize, m: f64) -> f64 {
    (E + norm(x, dim)).powf(-m)
}

pub fn decay_weight(grid: &Grid, m: f64) -> Result<DecayWeight> {
    if !(m > grid.dim() as f64) {
        return Err(Error::param("m", "must exceed the dimension"));
    }
    let dim = grid.dim();
    Ok(DecayWeight {
        m,
        values: CellField::scalar_from_fn(*grid, |x| decay_value(x, dim, m)),
    })
}

/// Measured key Jensen estimate on `Q` at `x_eval`:
/// `(⨍|f|)^{p(x)}` against `⨍|f|^{p(y)}`, `(e+|x|)^{-m}` and `⨍(e+|y|)^{-m}`.
///
/// When `|x_eval|` is the largest norm over `Q` the pointwise term is bounded
/// by the averaged one and is dropped from the right-hand side (it stays in
/// the extras).
#[allow(clippy::too_many_arguments)]
pub fn jensen_check(
    f: &CellField,
    q: &Region,
    p: &ExponentField,
    m: f64,
    x_eval: &Point,
    k1: f64,
    beta: f64,
) -> Result<EstimateRecord> {
    same_grid(f.grid(), p.grid())?;
    let g = f.grid();
    let dim = g.dim();
    if !(m > dim as f64) {
        return Err(Error::param("m", "must exceed the dimension"));
    }
    let ov = overlap_in(g, q)?;
    let a = magnitudes(f);
    let pc = p.cell_values();
    let mean_f = weighted_sum(&ov, |c| a[c]) / ov.measure;
    let bound = k1 * 1f64.max(q.volume().powf(-beta));
    if mean_f > bound {
        return Err(Error::KeyEstimatePrecondition { mean: mean_f, bound });
    }
    let px = p.eval(x_eval);
    let lhs = mean_f.powf(px);
    let modular_mean = weighted_sum(&ov, |c| if a[c] == 0.0 { 0.0 } else { a[c].powf(pc[c]) }) / ov.measure;
    let pointwise = decay_value(x_eval, dim, m);
    let averaged = weighted_sum(&ov, |c| decay_value(&g.cell_center(c), dim, m)) / ov.measure;
    let farthest = norm(x_eval, dim) >= q.max_norm() * (1.0 - 1e-12);
    let mut rhs = vec![("mean_f_pow_p", modular_mean), ("decay_average", averaged)];
    if !farthest {
        rhs.insert(1, ("decay_pointwise", pointwise));
    }
    let mut rec = EstimateRecord::new("jensen", lhs, rhs, *q, g);
    rec.extras.push(("decay_pointwise", pointwise));
    rec.extras.push(("mean_abs_f", mean_f));
    rec.extras.push(("p_at_x", px));
    if farthest {
        rec.flag(Flag::DecayTermDropped);
    }
    if ov.clipped {
        rec.flag(Flag::Clipped);
    }
    Ok(rec)
}

/// Upper end of the admissible Sobolev–Poincaré exponent range,
/// `min{n/(n-1), p-_Q}`.
pub fn sobolev_exponent_limit(dim: usize, p_minus_q: f64) -> f64 {
    if dim == 1 {
        p_minus_q
    } else {
        (dim as f64 / (dim as f64 - 1.0)).min(p_minus_q)
    }
}

/// Measured Sobolev–Poincaré inequality on `Q`:
/// `⨍(|f - <f>|/R)^{p}` against `(⨍|Df|^{p/s})^s` and `⨍h`.
pub fn sobolev_poincare_check(
    f: &GridFunction,
    q: &Region,
    p: &ExponentField,
    s: f64,
    m: f64,
) -> Result<EstimateRecord> {
    same_grid(f.grid(), p.grid())?;
    let g = f.grid();
    let dim = g.dim();
    let (pq_minus, _) = p.range_over(q).ok_or(Error::RegionOutsideDomain)?;
    if !(s >= 1.0 && s < sobolev_exponent_limit(dim, pq_minus)) {
        return Err(Error::param("s", "must satisfy 1 <= s < min{n/(n-1), p-_Q}"));
    }
    if !(m > dim as f64) {
        return Err(Error::param("m", "must exceed the dimension"));
    }
    let ov = overlap_in(g, q)?;
    let pc = p.cell_values();
    let r = q.side_length();
    let osc = oscillation_field(&f.cell_values(), &ov);
    let lhs = weighted_sum(&ov, |c| pow0(osc[c] / r, pc[c])) / ov.measure;
    let du = magnitudes(&gradient(f));
    let grad_term = (weighted_sum(&ov, |c| pow0(du[c], pc[c] / s)) / ov.measure).powf(s);
    let h_term = weighted_sum(&ov, |c| decay_value(&g.cell_center(c), dim, m)) / ov.measure;
    let mut rec = EstimateRecord::new(
        "sobolev_poincare",
        lhs,
        vec![("grad_mean_pow", grad_term), ("decay_average", h_term)],
        *q,
        g,
    );
    if ov.clipped {
        rec.flag(Flag::Clipped);
    }
    Ok(rec)
}

/// `|v(x) - <v>_region|` per cell for a (possibly vector valued) cell field.
pub(crate) fn oscillation_field(v: &CellField, ov: &Overlap) -> Vec<f64> {
    let n = v.components();
    let mut mean = vec![0.0; n];
    for &(c, w) in &ov.cells {
        for (k, m) in mean.iter_mut().enumerate() {
            *m += w * v.cell(c)[k];
        }
    }
    for m in &mut mean {
        *m /= ov.measure;
    }
    (0..v.grid().cell_count())
        .map(|c| {
            v.cell(c)
                .iter()
                .zip(&mean)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

#[inline]
pub(crate) fn pow0(x: f64, e: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.powf(e)
    }
}

/// `⨍_Q log(e + |f| / ⨍_Q|f|)^s`.
pub fn log_mean_check(f: &CellField, q: &Region, s: f64) -> Result<f64> {
    if !(s >= 1.0) {
        return Err(Error::param("s", "must be >= 1"));
    }
    let ov = overlap_in(f.grid(), q)?;
    let a = magnitudes(f);
    let mean = weighted_sum(&ov, |c| a[c]) / ov.measure;
    if !(mean > 0.0) {
        return Err(Error::ZeroMean);
    }
    Ok(weighted_sum(&ov, |c| (E + a[c] / mean).ln().powf(s)) / ov.measure)
}

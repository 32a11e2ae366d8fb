//! The nonlinearity `A(x, z) = |z|^{p(x)-2} z`, its regularizations, fitted
//! structure constants, and the discrete energy whose critical points solve
//! `-div A(x, Du) = -div A(x, G)`.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exponent::ExponentField;
use crate::geometry::{Point, Region};
use crate::grid::{CellField, Grid, GridFunction};
use crate::linalg::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Variant {
    /// `|z|^{p-2} z`
    Power,
    /// `(γ + |z|)^{p-2} z`
    Shifted,
    /// `(γ² + |z|²)^{(p-2)/2} z`
    #[default]
    Squared,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FluxParams {
    pub gamma: f64,
    pub variant: Variant,
}

impl FluxParams {
    pub fn new(gamma: f64, variant: Variant) -> Result<Self> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::param("gamma", "must be finite and >= 0"));
        }
        Ok(FluxParams { gamma, variant })
    }

    pub fn power() -> Self {
        FluxParams {
            gamma: 0.0,
            variant: Variant::Power,
        }
    }

    pub fn with_gamma(self, gamma: f64) -> Self {
        FluxParams { gamma, ..self }
    }
}

/// Radial profile of the flux for a fixed exponent: `A(z) = a(|z|) z`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Radial {
    p: f64,
    gamma: f64,
    variant: Variant,
}

impl Radial {
    pub(crate) fn new(p: f64, params: &FluxParams) -> Self {
        Radial {
            p,
            gamma: params.gamma,
            variant: params.variant,
        }
    }

    /// `a(t)`; only called with `t > 0` or a positive shift.
    fn coefficient(&self, t: f64) -> f64 {
        let (p, g) = (self.p, self.gamma);
        match self.variant {
            Variant::Power => t.powf(p - 2.0),
            Variant::Shifted => (g + t).powf(p - 2.0),
            Variant::Squared => (g * g + t * t).powf(0.5 * (p - 2.0)),
        }
    }

    fn singular_at_zero(&self) -> bool {
        match self.variant {
            Variant::Power => true,
            _ => self.gamma == 0.0,
        }
    }

    /// `a(t)` with the continuous extension at `t = 0` (zero flux there).
    pub(crate) fn coef(&self, t: f64) -> f64 {
        if t == 0.0 && self.singular_at_zero() {
            if self.p >= 2.0 {
                if self.p == 2.0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                // multiplies a zero vector
                0.0
            }
        } else {
            self.coefficient(t)
        }
    }

    /// `a'(t) / t`, the rank-one weight of the Jacobian; zero at `t = 0`
    /// unless the profile is smooth there.
    pub(crate) fn slope(&self, t: f64) -> f64 {
        let (p, g) = (self.p, self.gamma);
        if p == 2.0 {
            return 0.0;
        }
        match self.variant {
            Variant::Squared => {
                if t == 0.0 && g == 0.0 {
                    0.0
                } else {
                    (p - 2.0) * (g * g + t * t).powf(0.5 * (p - 4.0))
                }
            }
            Variant::Power => {
                if t == 0.0 {
                    0.0
                } else {
                    (p - 2.0) * t.powf(p - 4.0)
                }
            }
            Variant::Shifted => {
                if t == 0.0 {
                    0.0
                } else {
                    (p - 2.0) * (g + t).powf(p - 3.0) / t
                }
            }
        }
    }

    /// Potential `φ` with `φ(0) = 0` and `φ'(t) = a(t) t`, written to avoid
    /// cancellation when `t` is small against `γ`.
    pub(crate) fn potential(&self, t: f64) -> f64 {
        let (p, g) = (self.p, self.gamma);
        if t == 0.0 {
            return 0.0;
        }
        match self.variant {
            Variant::Power => t.powf(p) / p,
            Variant::Squared if g > 0.0 => {
                let u = t / g;
                g.powf(p) * (0.5 * p * (u * u).ln_1p()).exp_m1() / p
            }
            Variant::Squared => t.powf(p) / p,
            Variant::Shifted if g > 0.0 => {
                let u = t / g;
                let scaled = if u < 1e-4 {
                    let (a, b, c) = (p - 2.0, (p - 2.0) * (p - 3.0), (p - 2.0) * (p - 3.0) * (p - 4.0));
                    u * u * (0.5 + u * (a / 3.0 + u * (b / 8.0 + u * c / 30.0)))
                } else {
                    (p * u.ln_1p()).exp_m1() / p - ((p - 1.0) * u.ln_1p()).exp_m1() / (p - 1.0)
                };
                g.powf(p) * scaled
            }
            Variant::Shifted => t.powf(p) / p,
        }
    }

    /// `φ(a + delta) - φ(a)`; small increments integrate `a(s) s` over the
    /// interval instead of subtracting two nearly equal potentials.
    pub(crate) fn potential_change(&self, a: f64, delta: f64) -> f64 {
        let b = a + delta;
        if delta == 0.0 {
            return 0.0;
        }
        if delta.abs() > 1e-2 * a.max(b) {
            return self.potential(b) - self.potential(a);
        }
        let (mid, half) = (a + 0.5 * delta, 0.5 * delta);
        GAUSS5
            .iter()
            .map(|(x, w)| {
                let s = mid + half * x;
                w * self.coef(s) * s
            })
            .sum::<f64>()
            * half
    }
}

const GAUSS5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

fn euclid(z: &[f64]) -> f64 {
    z.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `A(z)` for exponent `p` into `out`.
pub fn flux_with_exponent(p: f64, z: &[f64], params: &FluxParams, out: &mut [f64]) {
    let r = Radial::new(p, params);
    let a = r.coef(euclid(z));
    for (o, v) in out.iter_mut().zip(z) {
        *o = a * v;
    }
}

/// `A(x, z)` with the exponent interpolated at `x`.
pub fn flux(x: &Point, z: &[f64], p: &ExponentField, params: &FluxParams) -> Vec<f64> {
    let mut out = vec![0.0; z.len()];
    flux_with_exponent(p.eval(x), z, params, &mut out);
    out
}

/// Worst sample found for one structure constant.
#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub x: Point,
    pub y: Point,
    pub z: Vec<f64>,
    pub xi: Vec<f64>,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructureFit {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub h1_sup: f64,
    pub h2_sup: f64,
    pub samples: usize,
    /// Witnesses for `c1`, `c2`, `c3`, `c4` in that order.
    pub worst_case: [Option<Witness>; 4],
}

const Z_LOG_RANGE: (f64, f64) = (-6.0, 6.0);
/// Relative slack below which a fitted residual counts as roundoff.
const FIT_SLACK: f64 = 1e-12;

/// Smallest constants consistent with the growth, coercivity, log-modulus
/// and monotonicity bounds over random samples; `|z|` log-uniform in
/// `[1e-6, 1e6]`.
pub fn structure_fit(p: &ExponentField, params: &FluxParams, sample_budget: usize, seed: u64) -> Result<StructureFit> {
    if sample_budget < 1000 {
        return Err(Error::param("sample_budget", "must be >= 1000"));
    }
    let grid = p.grid();
    let dim = grid.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells = grid.cell_count();
    let pc = p.cell_values();

    let random_direction = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let n = euclid(&v);
            if n > 1e-3 && n <= 1.0 {
                return v.iter().map(|x| x / n).collect();
            }
        }
    };
    let random_z = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        let t = 10f64.powf(rng.random_range(Z_LOG_RANGE.0..Z_LOG_RANGE.1));
        random_direction(rng).iter().map(|v| v * t).collect()
    };

    struct Sample {
        c: usize,
        c2: usize,
        z: Vec<f64>,
        xi: Vec<f64>,
    }
    let mut samples = Vec::with_capacity(sample_budget);
    for i in 0..sample_budget {
        let c = rng.random_range(0..cells);
        let c2 = rng.random_range(0..cells);
        let z = random_z(&mut rng);
        let xi = match i % 4 {
            0 => z.clone(),
            1 => random_z(&mut rng),
            _ => {
                // probe near z: ξ = s z + small perturbation
                let s: f64 = rng.random_range(0.0..1.0);
                let t = euclid(&z);
                let d = random_direction(&mut rng);
                let e = 10f64.powf(rng.random_range(-3.0..0.0)) * t;
                z.iter().zip(&d).map(|(a, b)| s * a + e * b).collect()
            }
        };
        samples.push(Sample { c, c2, z, xi });
    }

    let mut fa = vec![0.0; dim];
    let mut fb = vec![0.0; dim];
    let witness = |s: &Sample, ratio: f64| Witness {
        x: grid.cell_center(s.c),
        y: grid.cell_center(s.c2),
        z: s.z.clone(),
        xi: s.xi.clone(),
        ratio,
    };

    // growth and coercivity: constants from |z| >= 1, offsets from everything
    let mut c1 = 0.0f64;
    let mut c2 = f64::INFINITY;
    let mut w1 = None;
    let mut w2 = None;
    for s in &samples {
        let px = pc[s.c];
        let t = euclid(&s.z);
        if t < 1.0 {
            continue;
        }
        flux_with_exponent(px, &s.z, params, &mut fa);
        let scale = t.powf(px - 1.0);
        let r1 = euclid(&fa) / scale;
        if r1 > c1 * (1.0 + FIT_SLACK) {
            c1 = r1;
            w1 = Some(witness(s, r1));
        }
        let r2 = dot(&fa, &s.z).abs() / (scale * t);
        if r2 < c2 * (1.0 - FIT_SLACK) {
            c2 = r2;
            w2 = Some(witness(s, r2));
        }
    }
    if !c2.is_finite() {
        c2 = 0.0;
    }
    let mut h1 = 0.0f64;
    let mut h2 = 0.0f64;
    for s in &samples {
        let px = pc[s.c];
        let t = euclid(&s.z);
        flux_with_exponent(px, &s.z, params, &mut fa);
        let a = euclid(&fa);
        let bound = c1 * t.powf(px - 1.0);
        if a - bound > FIT_SLACK * a.max(bound) {
            h1 = h1.max(a - bound);
        }
        let az = dot(&fa, &s.z).abs();
        let lower = c2 * t.powf(px);
        if lower - az > FIT_SLACK * az.max(lower) {
            h2 = h2.max(lower - az);
        }
    }

    // log-modulus in x and monotonicity
    let mut c3 = 0.0f64;
    let mut c4 = 0.0f64;
    let mut w3 = None;
    let mut w4 = None;
    for s in &samples {
        let (px, py) = (pc[s.c], pc[s.c2]);
        let t = euclid(&s.z);
        let denom = (px - py).abs() * t.ln().abs() * (t.powf(px - 1.0) + t.powf(py - 1.0));
        if denom > 0.0 && denom.is_finite() {
            flux_with_exponent(px, &s.z, params, &mut fa);
            flux_with_exponent(py, &s.z, params, &mut fb);
            let diff: Vec<f64> = fa.iter().zip(&fb).map(|(a, b)| a - b).collect();
            let r3 = euclid(&diff) / denom;
            if r3 > c3 {
                c3 = r3;
                w3 = Some(witness(s, r3));
            }
        }
        flux_with_exponent(px, &s.z, params, &mut fa);
        flux_with_exponent(px, &s.xi, params, &mut fb);
        let mono: f64 = fa
            .iter()
            .zip(&fb)
            .zip(s.z.iter().zip(&s.xi))
            .map(|((a, b), (z, x))| (a - b) * (z - x))
            .sum();
        let num = t.powf(px);
        let den = euclid(&s.xi).powf(px) + mono.max(0.0);
        if den > 0.0 {
            let r4 = num / den;
            if r4 > c4 {
                c4 = r4;
                w4 = Some(witness(s, r4));
            }
        }
    }
    Ok(StructureFit {
        c1,
        c2,
        c3,
        c4,
        h1_sup: h1,
        h2_sup: h2,
        samples: sample_budget,
        worst_case: [w1, w2, w3, w4],
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Quadratic penalty `weight/2 * sum_i m_i |u_i - target_i|²` with lumped
/// nodal masses `m_i`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Fidelity {
    pub target: Vec<f64>,
    pub weight: f64,
}

/// Discrete energy `scale * Σ_c w_c [φ(|Du_c|) - A(G_c):Du_c] (+ fidelity)`.
#[derive(Debug, Clone)]
pub(crate) struct DiscreteEnergy {
    pub grid: Grid,
    pub codomain: usize,
    pub cell_p: Vec<f64>,
    pub weights: Vec<f64>,
    /// `A(x_c, G_c)` per cell, `codomain * dim` entries each.
    pub rhs_flux: Vec<f64>,
    pub params: FluxParams,
    pub scale: f64,
    pub fidelity: Option<Fidelity>,
    offsets: Vec<usize>,
    stencil: Vec<[f64; 3]>,
    lumped: Vec<f64>,
}

impl DiscreteEnergy {
    pub fn new(
        g: Option<&CellField>,
        p: &ExponentField,
        codomain: usize,
        params: FluxParams,
        region: Option<&Region>,
    ) -> Result<Self> {
        let grid = *p.grid();
        let dim = grid.dim();
        let comps = codomain * dim;
        let weights = match region {
            None => vec![grid.cell_volume(); grid.cell_count()],
            Some(r) => {
                let mut w = vec![0.0; grid.cell_count()];
                for (c, v) in grid.overlap(r).cells {
                    w[c] = v;
                }
                w
            }
        };
        let cell_p = p.cell_values().to_vec();
        let mut rhs_flux = vec![0.0; grid.cell_count() * comps];
        if let Some(g) = g {
            if g.grid() != &grid {
                return Err(Error::GridMismatch);
            }
            if g.components() != comps {
                return Err(Error::DimensionMismatch {
                    expected: comps,
                    found: g.components(),
                });
            }
            for c in 0..grid.cell_count() {
                flux_with_exponent(cell_p[c], g.cell(c), &params, &mut rhs_flux[c * comps..(c + 1) * comps]);
            }
        }
        let offsets = grid.corner_offsets();
        let mut lumped = vec![0.0; grid.node_count()];
        let share = 1.0 / offsets.len() as f64;
        for c in 0..grid.cell_count() {
            let base = grid.cell_base_node(c);
            for off in &offsets {
                lumped[base + off] += share * weights[c];
            }
        }
        Ok(DiscreteEnergy {
            grid,
            codomain,
            cell_p,
            weights,
            rhs_flux,
            params,
            scale: 1.0,
            fidelity: None,
            stencil: grid.gradient_stencil(),
            offsets,
            lumped,
        })
    }

    fn comps(&self) -> usize {
        self.codomain * self.grid.dim()
    }

    pub fn dofs(&self) -> usize {
        self.grid.node_count() * self.codomain
    }

    fn cell_gradient(&self, u: &[f64], c: usize, out: &mut [f64]) {
        let dim = self.grid.dim();
        let n = self.codomain;
        out.iter_mut().for_each(|v| *v = 0.0);
        let base = self.grid.cell_base_node(c);
        for (off, w) in self.offsets.iter().zip(&self.stencil) {
            let node = (base + off) * n;
            for k in 0..n {
                let v = u[node + k];
                for a in 0..dim {
                    out[k * dim + a] += w[a] * v;
                }
            }
        }
    }

    pub fn energy(&self, u: &[f64]) -> f64 {
        let comps = self.comps();
        let mut du = vec![0.0; comps];
        let mut total = 0.0;
        for c in 0..self.grid.cell_count() {
            let w = self.weights[c];
            if w == 0.0 {
                continue;
            }
            self.cell_gradient(u, c, &mut du);
            let r = Radial::new(self.cell_p[c], &self.params);
            let lin = dot(&self.rhs_flux[c * comps..(c + 1) * comps], &du);
            total += w * (r.potential(euclid(&du)) - lin);
        }
        total *= self.scale;
        if let Some(f) = &self.fidelity {
            total += 0.5 * f.weight * self.fidelity_sum(u, &f.target);
        }
        total
    }

    /// `energy(u + t d) - energy(u)` without forming either energy.
    pub fn energy_change(&self, u: &[f64], d: &[f64], t: f64) -> f64 {
        let comps = self.comps();
        let mut du = vec![0.0; comps];
        let mut dd = vec![0.0; comps];
        let mut total = 0.0;
        for c in 0..self.grid.cell_count() {
            let w = self.weights[c];
            if w == 0.0 {
                continue;
            }
            self.cell_gradient(u, c, &mut du);
            self.cell_gradient(d, c, &mut dd);
            let before = euclid(&du);
            // |z + δ| - |z| = (2 z·δ + |δ|²) / (|z + δ| + |z|)
            let (mut cross, mut sq) = (0.0, 0.0);
            for (x, y) in du.iter_mut().zip(&dd) {
                cross += *x * t * y;
                sq += t * y * t * y;
                *x += t * y;
            }
            let after = euclid(&du);
            let delta = if after + before > 0.0 { (2.0 * cross + sq) / (after + before) } else { 0.0 };
            let r = Radial::new(self.cell_p[c], &self.params);
            let lin = t * dot(&self.rhs_flux[c * comps..(c + 1) * comps], &dd);
            total += w * (r.potential_change(before, delta) - lin);
        }
        total *= self.scale;
        if let Some(f) = &self.fidelity {
            let n = self.codomain;
            let mut s = 0.0;
            for (i, m) in self.lumped.iter().enumerate() {
                for k in 0..n {
                    let j = i * n + k;
                    s += m * t * d[j] * (2.0 * (u[j] - f.target[j]) + t * d[j]);
                }
            }
            total += 0.5 * f.weight * s;
        }
        total
    }

    fn fidelity_sum(&self, u: &[f64], target: &[f64]) -> f64 {
        let n = self.codomain;
        let mut s = 0.0;
        for (i, m) in self.lumped.iter().enumerate() {
            for k in 0..n {
                let d = u[i * n + k] - target[i * n + k];
                s += m * d * d;
            }
        }
        s
    }

    /// Gradient with respect to nodal values; entries at `fixed` dofs are zero.
    pub fn gradient(&self, u: &[f64], fixed: Option<&[bool]>) -> Vec<f64> {
        let dim = self.grid.dim();
        let n = self.codomain;
        let comps = self.comps();
        let mut du = vec![0.0; comps];
        let mut res = vec![0.0; comps];
        let mut out = vec![0.0; self.dofs()];
        for c in 0..self.grid.cell_count() {
            let w = self.weights[c];
            if w == 0.0 {
                continue;
            }
            self.cell_gradient(u, c, &mut du);
            let r = Radial::new(self.cell_p[c], &self.params);
            let a = r.coef(euclid(&du));
            for i in 0..comps {
                res[i] = w * self.scale * (a * du[i] - self.rhs_flux[c * comps + i]);
            }
            let base = self.grid.cell_base_node(c);
            for (off, st) in self.offsets.iter().zip(&self.stencil) {
                let node = (base + off) * n;
                for k in 0..n {
                    let mut acc = 0.0;
                    for d in 0..dim {
                        acc += res[k * dim + d] * st[d];
                    }
                    out[node + k] += acc;
                }
            }
        }
        if let Some(f) = &self.fidelity {
            for (i, m) in self.lumped.iter().enumerate() {
                for k in 0..n {
                    let j = i * n + k;
                    out[j] += f.weight * m * (u[j] - f.target[j]);
                }
            }
        }
        if let Some(fixed) = fixed {
            for (o, &f) in out.iter_mut().zip(fixed) {
                if f {
                    *o = 0.0;
                }
            }
        }
        out
    }

    /// Assemble the Hessian into `h` (pattern from `CsrMatrix::grid_pattern`).
    pub fn hessian(&self, u: &[f64], h: &mut CsrMatrix) {
        h.clear();
        let dim = self.grid.dim();
        let n = self.codomain;
        let comps = self.comps();
        let corners = self.offsets.len();
        let mut du = vec![0.0; comps];
        let mut d = vec![0.0; comps * comps];
        // B maps local dofs (corner, component) to gradient entries
        let local = corners * n;
        let mut db = vec![0.0; comps * local];
        for c in 0..self.grid.cell_count() {
            let w = self.weights[c] * self.scale;
            if w == 0.0 {
                continue;
            }
            self.cell_gradient(u, c, &mut du);
            let r = Radial::new(self.cell_p[c], &self.params);
            let t = euclid(&du);
            let a = r.coef(t);
            let s = r.slope(t);
            for i in 0..comps {
                for j in 0..comps {
                    d[i * comps + j] = s * du[i] * du[j] + if i == j { a } else { 0.0 };
                }
            }
            // db = D * B
            for i in 0..comps {
                for (ci, st) in self.stencil.iter().enumerate() {
                    for k in 0..n {
                        let mut acc = 0.0;
                        for a2 in 0..dim {
                            acc += d[i * comps + k * dim + a2] * st[a2];
                        }
                        db[i * local + ci * n + k] = acc;
                    }
                }
            }
            let base = self.grid.cell_base_node(c);
            for (ci, sti) in self.stencil.iter().enumerate() {
                for ki in 0..n {
                    let row = (base + self.offsets[ci]) * n + ki;
                    for cj in 0..corners {
                        for kj in 0..n {
                            let col = (base + self.offsets[cj]) * n + kj;
                            let mut acc = 0.0;
                            for a2 in 0..dim {
                                acc += sti[a2] * db[(ki * dim + a2) * local + cj * n + kj];
                            }
                            h.add(row, col, w * acc);
                        }
                    }
                }
            }
        }
        if let Some(f) = &self.fidelity {
            for (i, m) in self.lumped.iter().enumerate() {
                for k in 0..n {
                    h.add(i * n + k, i * n + k, f.weight * m);
                }
            }
        }
    }
}

fn check_inputs(u: &GridFunction, p: &ExponentField) -> Result<()> {
    if u.grid() != p.grid() {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

/// `J(u) = ∫_region φ(|Du|) - A(x, G) : Du`.
pub fn energy(u: &GridFunction, g: &CellField, p: &ExponentField, params: &FluxParams, region: &Region) -> Result<f64> {
    check_inputs(u, p)?;
    let e = DiscreteEnergy::new(Some(g), p, u.codomain(), *params, Some(region))?;
    Ok(e.energy(u.values()))
}

/// Gradient of `energy` with respect to nodal values, zero on `bc_mask` nodes.
pub fn energy_gradient(
    u: &GridFunction,
    g: &CellField,
    p: &ExponentField,
    params: &FluxParams,
    region: &Region,
    bc_mask: &[bool],
) -> Result<GridFunction> {
    check_inputs(u, p)?;
    if bc_mask.len() != u.grid().node_count() {
        return Err(Error::LengthMismatch {
            expected: u.grid().node_count(),
            found: bc_mask.len(),
        });
    }
    let e = DiscreteEnergy::new(Some(g), p, u.codomain(), *params, Some(region))?;
    let n = u.codomain();
    let fixed: Vec<bool> = (0..e.dofs()).map(|j| bc_mask[j / n]).collect();
    GridFunction::new(*u.grid(), n, e.gradient(u.values(), Some(&fixed)))
}

/// Sparse Hessian of `energy` (no boundary treatment).
pub fn energy_hessian(
    u: &GridFunction,
    g: &CellField,
    p: &ExponentField,
    params: &FluxParams,
    region: &Region,
) -> Result<CsrMatrix> {
    check_inputs(u, p)?;
    let e = DiscreteEnergy::new(Some(g), p, u.codomain(), *params, Some(region))?;
    let mut h = CsrMatrix::grid_pattern(u.grid(), u.codomain());
    e.hessian(u.values(), &mut h);
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::gradient;
    use approx::assert_relative_eq;

    fn unit(n: usize) -> Grid {
        Grid::new(2, &[0.0, 0.0], &[1.0, 1.0], &[n, n]).unwrap()
    }

    #[test]
    fn flux_examples() {
        let g = unit(2);
        let p2 = ExponentField::constant(g, 2.0).unwrap();
        let x = [0.5, 0.5, 0.0];
        for v in [Variant::Power, Variant::Shifted, Variant::Squared] {
            let params = FluxParams::new(0.0, v).unwrap();
            assert_eq!(flux(&x, &[0.3, -1.2], &p2, &params), vec![0.3, -1.2]);
            assert_eq!(flux(&x, &[0.0, 0.0], &p2, &params), vec![0.0, 0.0]);
            let p15 = ExponentField::constant(g, 1.5).unwrap();
            assert_eq!(flux(&x, &[0.0, 0.0], &p15, &params), vec![0.0, 0.0]);
        }
        let p4 = ExponentField::constant(g, 4.0).unwrap();
        assert_eq!(flux(&x, &[2.0, 0.0], &p4, &FluxParams::power()), vec![8.0, 0.0]);
    }

    #[test]
    fn potentials_match_flux() {
        for v in [Variant::Power, Variant::Shifted, Variant::Squared] {
            for p in [1.3, 2.0, 3.7] {
                let r = Radial::new(p, &FluxParams::new(0.4, v).unwrap());
                assert_eq!(r.potential(0.0), 0.0);
                // small-argument branch against the second-order expansion
                if v != Variant::Power {
                    let t = 1e-7;
                    let a0 = r.coef(0.0);
                    assert_relative_eq!(r.potential(t), 0.5 * a0 * t * t, max_relative = 1e-5);
                }
                for t in [0.05, 0.7, 2.5] {
                    let h = 1e-6;
                    let fd = (r.potential(t + h) - r.potential(t - h)) / (2.0 * h);
                    assert_relative_eq!(fd, r.coef(t) * t, max_relative = 1e-7);
                    let fa = (r.coef(t + h) * (t + h) - r.coef(t - h) * (t - h)) / (2.0 * h);
                    // d/dt (a t) = a + a' t = a + slope t²
                    assert_relative_eq!(fa, r.coef(t) + r.slope(t) * t * t, max_relative = 1e-6);
                }
            }
        }
    }

    #[test]
    fn power_fit_is_exact() {
        let g = unit(4);
        let p = ExponentField::from_fn(g, |x| 1.5 + x[0]).unwrap();
        let fit = structure_fit(&p, &FluxParams::power(), 2000, 1).unwrap();
        assert_relative_eq!(fit.c1, 1.0, max_relative = 1e-12);
        assert_relative_eq!(fit.c2, 1.0, max_relative = 1e-12);
        assert_eq!(fit.h1_sup, 0.0);
        assert_eq!(fit.h2_sup, 0.0);
        assert!(fit.c4 >= 1.0);
        let w = fit.worst_case[3].as_ref().unwrap();
        let px = p.eval(&w.x);
        let mut fa = [0.0; 2];
        let mut fb = [0.0; 2];
        flux_with_exponent(px, &w.z, &FluxParams::power(), &mut fa);
        flux_with_exponent(px, &w.xi, &FluxParams::power(), &mut fb);
        let mono = (fa[0] - fb[0]) * (w.z[0] - w.xi[0]) + (fa[1] - fb[1]) * (w.z[1] - w.xi[1]);
        let r = euclid(&w.z).powf(px) / (euclid(&w.xi).powf(px) + mono);
        assert_relative_eq!(r, w.ratio, max_relative = 1e-9);
    }

    #[test]
    fn constant_exponent_has_no_log_modulus() {
        let g = unit(4);
        let p = ExponentField::constant(g, 3.0).unwrap();
        let fit = structure_fit(&p, &FluxParams::power(), 1000, 2).unwrap();
        assert_eq!(fit.c3, 0.0);
        assert!(fit.worst_case[2].is_none());
    }

    #[test]
    fn quadratic_monotonicity_constant() {
        let g = unit(4);
        let p = ExponentField::constant(g, 2.0).unwrap();
        let fit = structure_fit(&p, &FluxParams::power(), 20000, 3).unwrap();
        assert!(fit.c4 <= 2.0 + 1e-9, "c4 = {}", fit.c4);
        assert!(fit.c4 > 1.9);
        assert!(structure_fit(&p, &FluxParams::power(), 999, 3).is_err());
    }

    #[test]
    fn energy_examples() {
        let g = unit(8);
        let p3 = ExponentField::constant(g, 3.0).unwrap();
        let zero_g = CellField::zeros(g, 2);
        let u = GridFunction::scalar_from_fn(g, |x| x[0]);
        let e = energy(&u, &zero_g, &p3, &FluxParams::power(), &g.domain()).unwrap();
        assert_relative_eq!(e, 1.0 / 3.0, max_relative = 1e-14);
        let c = GridFunction::scalar_from_fn(g, |_| 4.0);
        assert_eq!(energy(&c, &zero_g, &p3, &FluxParams::power(), &g.domain()).unwrap(), 0.0);
    }

    #[test]
    fn gradient_vanishes_when_g_is_du() {
        let g = unit(6);
        let p = ExponentField::from_fn(g, |x| 1.7 + x[1]).unwrap();
        let u = GridFunction::scalar_from_fn(g, |x| (2.0 * x[0]).sin() * x[1] * x[1]);
        let du = gradient(&u);
        let mask = vec![false; g.node_count()];
        for v in [Variant::Power, Variant::Squared, Variant::Shifted] {
            let params = FluxParams::new(0.1, v).unwrap();
            let r = energy_gradient(&u, &du, &p, &params, &g.domain(), &mask).unwrap();
            assert!(r.values().iter().all(|v| v.abs() < 1e-15));
        }
    }

    #[test]
    fn hessian_matches_gradient_differences() {
        let g = Grid::new(2, &[0.0, 0.0], &[1.0, 1.0], &[3, 4]).unwrap();
        let p = ExponentField::from_fn(g, |x| 2.5 + 0.5 * x[0]).unwrap();
        let params = FluxParams::new(0.2, Variant::Squared).unwrap();
        let u = GridFunction::from_fn(g, 2, |x, out| {
            out[0] = x[0] * x[1] + 0.3 * x[0];
            out[1] = (x[1] * 3.0).cos();
        });
        let e = DiscreteEnergy::new(None, &p, 2, params, None).unwrap();
        let mut h = CsrMatrix::grid_pattern(&g, 2);
        e.hessian(u.values(), &mut h);
        let n = e.dofs();
        let step = 1e-6;
        for j in [0, 5, 13, n - 1] {
            let mut up = u.values().to_vec();
            let mut um = u.values().to_vec();
            up[j] += step;
            um[j] -= step;
            let gp = e.gradient(&up, None);
            let gm = e.gradient(&um, None);
            for i in 0..n {
                let fd = (gp[i] - gm[i]) / (2.0 * step);
                assert!((fd - h.get(i, j)).abs() < 1e-6 * (1.0 + fd.abs()), "({i},{j}) {fd} vs {}", h.get(i, j));
            }
        }
    }

    #[test]
    fn energy_change_matches_difference_and_resolves_tiny_steps() {
        let g = unit(6);
        let p = ExponentField::from_fn(g, |x| 1.6 + 0.8 * x[0]).unwrap();
        let u = GridFunction::scalar_from_fn(g, |x| 30.0 * x[0] + (3.0 * x[1]).sin());
        let d: Vec<f64> = (0..g.node_count()).map(|i| ((i * 7919) % 13) as f64 / 13.0 - 0.5).collect();
        let gvec = CellField::from_fn(g, 2, |x, out| {
            out[0] = 2.0 + x[1];
            out[1] = -1.0;
        });
        for v in [Variant::Power, Variant::Squared, Variant::Shifted] {
            let params = FluxParams::new(0.05, v).unwrap();
            let mut e = DiscreteEnergy::new(Some(&gvec), &p, 1, params, None).unwrap();
            e.fidelity = Some(Fidelity {
                target: vec![0.25; g.node_count()],
                weight: 0.5,
            });
            let moved: Vec<f64> = u.values().iter().zip(&d).map(|(a, b)| a + 0.7 * b).collect();
            let direct = e.energy(&moved) - e.energy(u.values());
            assert_relative_eq!(e.energy_change(u.values(), &d, 0.7), direct, max_relative = 1e-10);
            // first-order agreement far below the energy's own roundoff
            let grad = e.gradient(u.values(), None);
            let slope: f64 = grad.iter().zip(&d).map(|(a, b)| a * b).sum();
            let t = 1e-9;
            assert_relative_eq!(e.energy_change(u.values(), &d, t) / t, slope, max_relative = 1e-6);
        }
    }
}

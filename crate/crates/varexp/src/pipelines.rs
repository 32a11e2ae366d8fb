//! The experiment pipelines behind each command.

use std::path::Path;

use rayon::prelude::*;
use varexp_core::dyadic::{covering_threshold, default_max_level, dyadic_lattice, good_lambda_measure};
use varexp_core::estimates::{
    caccioppoli_check, gehring_scan, higher_integrability_check, reverse_holder_check, GehringOptions,
    HigherIntegrabilityOptions,
};
use varexp_core::exponent::ExponentField;
use varexp_core::grid::gradient;
use varexp_core::operator::{structure_fit, FluxParams};
use varexp_core::record::EstimateRecord;
use varexp_core::solver::{manufactured_instance, solve_pxlaplace, InstanceKind, SolverResult};
use varexp_core::varlp::decay_value;
use varexp_core::{CellField, Grid, GridFunction, Region};

use crate::config::{Command, DataSpec, ExperimentConfig, ExponentKind, ExponentSpec, GridSpec, Kappa, SweepKind};
use crate::error::{CliError, Result};
use crate::report::{num, Outcome, Table};
use crate::vxf;

pub fn build_exponent(spec: &ExponentSpec, grid: &Grid) -> Result<ExponentField> {
    let dim = grid.dim();
    let (b, a) = (spec.base, spec.amplitude);
    let p = match &spec.kind {
        ExponentKind::Constant(v) => ExponentField::constant(*grid, *v)?,
        ExponentKind::Table { file } => {
            let t = vxf::read_nodes(file)?;
            if t.grid() != grid || t.codomain() != 1 {
                return Err(CliError::format(file, "exponent table does not match the configured grid"));
            }
            let vals = t.values().iter().map(|v| b + a * v).collect();
            ExponentField::new(GridFunction::new(*grid, 1, vals)?, None)?
        }
        ExponentKind::Wave { frequency, phase } => {
            if frequency.len() != dim {
                return Err(crate::config::key_error("exponent", "frequency", "length must equal grid dim"));
            }
            ExponentField::from_fn(*grid, |x| {
                let t: f64 = (0..dim).map(|k| frequency[k] * x[k]).sum();
                b + a * (t + phase).sin()
            })?
        }
        ExponentKind::Inclusion { center, width } => {
            if center.is_empty() || center.len() > dim {
                return Err(crate::config::key_error("exponent", "center", "needs 1..=dim coordinates"));
            }
            ExponentField::from_fn(*grid, |x| {
                let r2: f64 = center.iter().enumerate().map(|(k, c)| (x[k] - c).powi(2)).sum();
                b + a * (1.0 - 2.0 * (-r2 / (width * width)).exp())
            })?
        }
    };
    p.require_admissible()
        .map_err(|e| crate::config::key_error("exponent", "kind", &e.to_string()))?;
    Ok(p.with_p_infinity(spec.p_infinity)?)
}

#[derive(Debug, Clone)]
pub struct Problem {
    pub grid: Grid,
    pub p: ExponentField,
    pub g: CellField,
    pub boundary: GridFunction,
    pub u_star: Option<GridFunction>,
}

pub fn build_problem(cfg: &ExperimentConfig, grid_spec: &GridSpec, exponent: &ExponentSpec) -> Result<Problem> {
    let grid = grid_spec.build()?;
    let p = build_exponent(exponent, &grid)?;
    let kind = match &cfg.data {
        DataSpec::Matched => Some(InstanceKind::Matched),
        DataSpec::Linear => Some(InstanceKind::Linear),
        DataSpec::Bump => Some(InstanceKind::Bump),
        _ => None,
    };
    if let Some(kind) = kind {
        let inst = manufactured_instance(kind, &grid, &p)?;
        return Ok(Problem {
            grid,
            p,
            g: inst.g,
            boundary: inst.boundary,
            u_star: inst.u_star,
        });
    }
    let (g, boundary) = match &cfg.data {
        DataSpec::Ramp { slope } => (
            CellField::zeros(grid, grid.dim()),
            GridFunction::scalar_from_fn(grid, |x| slope * x[0]),
        ),
        DataSpec::Files { g, boundary } => {
            let gf = vxf::read_cells(g)?;
            let bf = vxf::read_nodes(boundary)?;
            if gf.grid() != &grid || bf.grid() != &grid {
                return Err(CliError::format(g, "data files do not match the configured grid"));
            }
            if gf.components() != bf.codomain() * grid.dim() {
                return Err(CliError::format(g, "G must have codomain x dim components"));
            }
            (gf, bf)
        }
        _ => unreachable!(),
    };
    Ok(Problem {
        grid,
        p,
        g,
        boundary,
        u_star: None,
    })
}

pub struct Solved {
    pub problem: Problem,
    pub result: SolverResult,
}

impl Solved {
    pub fn u(&self) -> &GridFunction {
        &self.result.u
    }

    pub fn sup_error(&self) -> Option<f64> {
        self.problem.u_star.as_ref().map(|e| {
            self.result
                .u
                .values()
                .iter()
                .zip(e.values())
                .fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs()))
        })
    }
}

pub fn solve_problem(cfg: &ExperimentConfig, problem: Problem) -> Result<Solved> {
    let result = solve_pxlaplace(&problem.g, &problem.p, &problem.boundary, &problem.grid, &cfg.solver)?;
    Ok(Solved { problem, result })
}

fn solve_configured(cfg: &ExperimentConfig) -> Result<Solved> {
    let problem = build_problem(cfg, cfg.grid_spec()?, cfg.exponent_spec()?)?;
    solve_problem(cfg, problem)
}

/// `κ` and the fitted `c4` (`None` when `κ` was configured).
pub fn kappa_for(cfg: &ExperimentConfig, p: &ExponentField) -> Result<(f64, Option<f64>)> {
    match cfg.estimates.kappa {
        Kappa::Value(k) => Ok((k, None)),
        Kappa::Auto => {
            let params = FluxParams::new(0.0, cfg.solver.variant)?;
            let fit = structure_fit(p, &params, cfg.estimates.fit_samples.max(1000), cfg.seed)?;
            let n = p.grid().dim() as i32;
            Ok((2f64.powi(n + 1) * fit.c4, Some(fit.c4)))
        }
    }
}

fn hi_options(cfg: &ExperimentConfig, kappa: f64) -> HigherIntegrabilityOptions {
    let e = &cfg.estimates;
    let mut o = HigherIntegrabilityOptions::new(kappa, e.epsilons[0], e.m0);
    o.m = e.m;
    o.max_level = e.max_level;
    o
}

/// Lattice cubes of `root` down to `levels` whose double lies in the domain.
pub fn verification_cubes(grid: &Grid, root: &Region, levels: u32) -> Vec<Region> {
    let dom = grid.domain();
    dyadic_lattice(root, levels)
        .into_iter()
        .map(|c| c.region())
        .filter(|q| dom.contains_region(&q.scaled(2.0)))
        .collect()
}

fn estimate_records(cfg: &ExperimentConfig, s: &Solved, root: &Region, kappa: f64) -> Result<Vec<EstimateRecord>> {
    let e = &cfg.estimates;
    let pr = &s.problem;
    let m = e.m.unwrap_or(2.0 * pr.grid.dim() as f64);
    let mut recs = Vec::new();
    for q in verification_cubes(&pr.grid, root, e.levels) {
        recs.push(caccioppoli_check(s.u(), &pr.g, &pr.p, &q)?);
        recs.push(reverse_holder_check(s.u(), &pr.g, &pr.p, &q, e.s, m)?);
    }
    let opts = hi_options(cfg, kappa);
    for &q in &e.q {
        recs.push(higher_integrability_check(s.u(), &pr.g, &pr.p, q, root, &opts)?);
    }
    Ok(recs)
}

/// `F = |Du|^p` and `|G|^p + h` on the cells.
pub fn densities(s: &Solved, m: f64) -> (CellField, CellField) {
    let pr = &s.problem;
    let pc = pr.p.cell_values();
    let norm = |z: &[f64]| z.iter().map(|v| v * v).sum::<f64>().sqrt();
    let f = gradient(s.u()).map(|c, z| pow0(norm(z), pc[c]));
    let dim = pr.grid.dim();
    let gh = pr
        .g
        .map(|c, z| pow0(norm(z), pc[c]) + decay_value(&pr.grid.cell_center(c), dim, m));
    (f, gh)
}

fn pow0(t: f64, p: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        t.powf(p)
    }
}

pub struct GoodLambdaTable {
    pub kappa: f64,
    pub lambda0: f64,
    pub rows: Vec<varexp_core::dyadic::GoodLambdaRow>,
}

impl GoodLambdaTable {
    /// `δ(ε)`: the largest measured ratio over the λ grid.
    pub fn delta(&self, epsilon: f64) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.epsilon == epsilon)
            .fold(0.0, |m, r| m.max(r.ratio))
    }
}

pub fn good_lambda_table(cfg: &ExperimentConfig, s: &Solved, root: &Region, kappa: f64) -> Result<GoodLambdaTable> {
    let e = &cfg.estimates;
    let grid = s.problem.grid;
    let (f, gh) = densities(s, e.m.unwrap_or(2.0 * grid.dim() as f64));
    let lambda0 = covering_threshold(&f, root)?;
    if !(lambda0 > 0.0) {
        return Err(CliError::Invalid("covering threshold is zero (Du vanishes on the doubled root)".into()));
    }
    let lambdas = if e.lambda_count == 1 {
        vec![lambda0]
    } else {
        varexp_core::estimates::geometric_levels(lambda0, e.lambda_max * lambda0, e.lambda_count)
    };
    let level = e.max_level.unwrap_or_else(|| default_max_level(&grid, root));
    let rows = good_lambda_measure(&f, &gh, root, kappa, &e.epsilons, &lambdas, e.m0, level)?;
    Ok(GoodLambdaTable { kappa, lambda0, rows })
}

fn note_solve(out: &mut Outcome, s: &Solved) {
    let r = &s.result;
    out.converged &= r.converged;
    out.note("converged", r.converged);
    out.note("iterations", r.iterations);
    out.note("residual", num(r.residual));
    out.note("gamma_final", num(r.gamma_final));
    out.note("descent_fallbacks", r.descent_fallbacks);
    if let Some(e) = s.sup_error() {
        out.note("sup_error", num(e));
    }
}

pub fn run(cfg: &ExperimentConfig, command: Command, out_dir: &Path) -> Result<Outcome> {
    match command {
        Command::Solve => run_solve(cfg, out_dir),
        Command::Verify => run_verify(cfg),
        Command::Gehring => run_gehring(cfg),
        Command::GoodLambda => run_good_lambda(cfg),
        Command::Sweep => run_sweep(cfg),
        Command::Denoise => crate::denoise::run(cfg, out_dir),
    }
}

fn run_solve(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Outcome> {
    let s = solve_configured(cfg)?;
    let mut out = Outcome::new();
    note_solve(&mut out, &s);
    let schedule = cfg.solver.schedule(s.problem.p.p_minus())?;
    let mut t = Table::new("solve", &["stage", "gamma", "step", "energy"]);
    let starts = &s.result.stage_starts;
    for (stage, &start) in starts.iter().enumerate() {
        let end = starts.get(stage + 1).copied().unwrap_or(s.result.energy_history.len());
        for (step, e) in s.result.energy_history[start..end].iter().enumerate() {
            t.push(vec![stage.to_string(), num(schedule[stage]), step.to_string(), num(*e)]);
        }
    }
    out.tables.push(t);
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    for (name, write) in [
        ("u.vxf", vxf::VxfField::from_nodes(s.u())),
        ("g.vxf", vxf::VxfField::from_cells(&s.problem.g)),
        ("p.vxf", vxf::VxfField::from_nodes(s.problem.p.field())),
    ] {
        let path = out_dir.join(name);
        write.write(&path)?;
        out.files.push(path);
    }
    Ok(out)
}

fn run_verify(cfg: &ExperimentConfig) -> Result<Outcome> {
    let s = solve_configured(cfg)?;
    let mut out = Outcome::new();
    note_solve(&mut out, &s);
    let root = cfg.estimates.root(&s.problem.grid)?;
    let (kappa, c4) = kappa_for(cfg, &s.problem.p)?;
    out.note("kappa", num(kappa));
    if let Some(c4) = c4 {
        out.note("c4", num(c4));
    }
    let mut t = Table::records("records");
    for rec in estimate_records(cfg, &s, &root, kappa)? {
        t.push_record(&rec);
    }
    out.tables.push(t);
    Ok(out)
}

fn run_gehring(cfg: &ExperimentConfig) -> Result<Outcome> {
    let s = solve_configured(cfg)?;
    let mut out = Outcome::new();
    note_solve(&mut out, &s);
    let e = &cfg.estimates;
    let root = cfg.estimates.root(&s.problem.grid)?;
    let opts = GehringOptions {
        cap: e.cap,
        m: e.m,
        m1: e.m1,
        max_level: e.max_level,
    };
    let pr = &s.problem;
    let r = gehring_scan(s.u(), &pr.g, &pr.p, &root, e.mu_max, e.mu_steps, &opts)?;
    out.note("m0", num(r.m0));
    out.note("sigma", num(r.sigma));
    out.note("cubes", r.cubes);
    let mut t = Table::new("gehring", &["mu", "lhs", "rhs", "constant"]);
    for row in &r.ratio_table {
        t.push(vec![num(row.mu), num(row.lhs), num(row.rhs), num(row.constant)]);
    }
    out.tables.push(t);
    Ok(out)
}

fn run_good_lambda(cfg: &ExperimentConfig) -> Result<Outcome> {
    let s = solve_configured(cfg)?;
    let mut out = Outcome::new();
    note_solve(&mut out, &s);
    let root = cfg.estimates.root(&s.problem.grid)?;
    let (kappa, c4) = kappa_for(cfg, &s.problem.p)?;
    let table = good_lambda_table(cfg, &s, &root, kappa)?;
    out.note("kappa", num(kappa));
    if let Some(c4) = c4 {
        out.note("c4", num(c4));
    }
    out.note("lambda0", num(table.lambda0));
    let mut t = Table::new(
        "goodlambda",
        &["epsilon", "lambda", "o_measure", "u_measure", "delta", "max_cube_ratio"],
    );
    for r in &table.rows {
        let worst = r.cube_ratios.iter().fold(0.0f64, |m, v| m.max(*v));
        t.push(vec![
            num(r.epsilon),
            num(r.lambda),
            num(r.o_measure),
            num(r.u_measure),
            num(r.ratio),
            num(worst),
        ]);
    }
    out.tables.push(t);
    for &eps in &cfg.estimates.epsilons {
        out.note(&format!("delta(eps={})", num(eps)), num(table.delta(eps)));
    }
    Ok(out)
}

/// Quantities measured at one sweep point, in a fixed order.
fn sweep_point(cfg: &ExperimentConfig, s: &Solved, root: &Region) -> Result<Vec<(String, f64)>> {
    let mut q = vec![
        ("converged".to_string(), s.result.converged as u8 as f64),
        ("residual".to_string(), s.result.residual),
    ];
    if let Some(e) = s.sup_error() {
        q.push(("sup_error".into(), e));
    }
    let (kappa, c4) = kappa_for(cfg, &s.problem.p)?;
    if let Some(c4) = c4 {
        q.push(("c4".into(), c4));
    }
    q.push(("kappa".into(), kappa));
    let pr = &s.problem;
    let e = &cfg.estimates;
    let m = e.m.unwrap_or(2.0 * pr.grid.dim() as f64);
    q.push(("caccioppoli".into(), caccioppoli_check(s.u(), &pr.g, &pr.p, root)?.empirical_constant));
    q.push((
        "reverse_holder".into(),
        reverse_holder_check(s.u(), &pr.g, &pr.p, root, e.s, m)?.empirical_constant,
    ));
    let opts = hi_options(cfg, kappa);
    for &qq in &e.q {
        let rec = higher_integrability_check(s.u(), &pr.g, &pr.p, qq, root, &opts)?;
        q.push((format!("higher_integrability(q={})", num(qq)), rec.empirical_constant));
        q.push((format!("level_set_gap(q={})", num(qq)), rec.extra("level_set_gap").unwrap_or(f64::NAN)));
    }
    if cfg.sweep.as_ref().map(|s| s.kind) == Some(SweepKind::Amplitude) {
        let table = good_lambda_table(cfg, s, root, kappa)?;
        for &eps in &e.epsilons {
            q.push((format!("delta(eps={})", num(eps)), table.delta(eps)));
        }
    }
    Ok(q)
}

/// Parameter value and the named quantities measured there.
type SweepPoint = (f64, Vec<(String, f64)>);

fn run_sweep(cfg: &ExperimentConfig) -> Result<Outcome> {
    let sweep = cfg.sweep.as_ref().ok_or_else(|| CliError::MissingKey {
        section: "sweep".into(),
        key: "kind".into(),
    })?;
    let grid_spec = cfg.grid_spec()?;
    let exponent = cfg.exponent_spec()?;
    let (label, points): (&str, Vec<Result<SweepPoint>>) = match sweep.kind {
        SweepKind::Refinement => (
            "refinement",
            sweep
                .resolutions
                .par_iter()
                .map(|&n| {
                    let s = solve_problem(cfg, build_problem(cfg, &grid_spec.with_cells(n), exponent)?)?;
                    let root = cfg.estimates.root(&s.problem.grid)?;
                    Ok((n as f64, sweep_point(cfg, &s, &root)?))
                })
                .collect(),
        ),
        SweepKind::Size => {
            let s = solve_configured(cfg)?;
            let center = cfg.estimates.root(&s.problem.grid)?.center();
            let dim = s.problem.grid.dim();
            (
                "size",
                sweep
                    .sizes
                    .par_iter()
                    .map(|&side| {
                        let root = Region::cube(&center[..dim], side)?;
                        Ok((side, sweep_point(cfg, &s, &root)?))
                    })
                    .collect(),
            )
        }
        SweepKind::Amplitude => (
            "amplitude",
            sweep
                .amplitudes
                .par_iter()
                .map(|&a| {
                    let spec = ExponentSpec {
                        amplitude: a,
                        ..exponent.clone()
                    };
                    let s = solve_problem(cfg, build_problem(cfg, grid_spec, &spec)?)?;
                    let root = cfg.estimates.root(&s.problem.grid)?;
                    Ok((a, sweep_point(cfg, &s, &root)?))
                })
                .collect(),
        ),
    };
    let mut out = Outcome::new();
    let mut t = Table::new("sweep", &["kind", "parameter", "quantity", "value"]);
    for p in points {
        let (param, qs) = p?;
        for (name, v) in qs {
            if name == "converged" && v == 0.0 {
                out.converged = false;
            }
            t.push(vec![label.to_string(), num(param), name, num(v)]);
        }
    }
    out.note("kind", label);
    out.note("points", t.rows.iter().map(|r| r[1].clone()).collect::<std::collections::BTreeSet<_>>().len());
    out.tables.push(t);
    Ok(out)
}


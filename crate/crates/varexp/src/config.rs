//! Experiment configuration: `[section]` headers followed by `key = value`
//! lines. `#` starts a comment. Lists are whitespace separated. Every key is
//! listed in [`KNOWN_KEYS`]; anything else is rejected.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use varexp_core::operator::Variant;
use varexp_core::solver::SolveOptions;
use varexp_core::{Grid, Region};

use crate::error::{CliError, Result};

pub const KNOWN_KEYS: &[(&str, &[&str])] = &[
    ("grid", &["dim", "origin", "extent", "cells"]),
    (
        "exponent",
        &["kind", "value", "file", "base", "amplitude", "frequency", "phase", "center", "width", "p_infinity"],
    ),
    ("data", &["instance", "slope", "g_file", "boundary_file"]),
    ("solver", &["tolerance", "max_iterations", "variant", "gamma_floor", "gamma_schedule"]),
    (
        "estimates",
        &[
            "q", "kappa", "epsilons", "lambda_count", "lambda_max", "m", "m0", "s", "root_center", "root_side",
            "levels", "max_level", "mu_max", "mu_steps", "cap", "m1", "fit_samples",
        ],
    ),
    ("sweep", &["kind", "resolutions", "sizes", "amplitudes"]),
    (
        "denoise",
        &["input", "strength", "p_minus", "p_plus", "iterations", "contrast", "smoothing", "gamma", "format"],
    ),
    ("output", &["dir"]),
    ("run", &["seed", "threads"]),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Verify,
    Gehring,
    GoodLambda,
    Sweep,
    Denoise,
}

impl FromStr for Command {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "solve" => Command::Solve,
            "verify" => Command::Verify,
            "gehring" => Command::Gehring,
            "goodlambda" => Command::GoodLambda,
            "sweep" => Command::Sweep,
            "denoise" => Command::Denoise,
            _ => return Err(CliError::Invalid(format!("unknown command `{s}`"))),
        })
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Command::Solve => "solve",
            Command::Verify => "verify",
            Command::Gehring => "gehring",
            Command::GoodLambda => "goodlambda",
            Command::Sweep => "sweep",
            Command::Denoise => "denoise",
        })
    }
}

/// Raw `section -> key -> value` table, in file order per section.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut current: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| syntax(line_no, "unterminated section header"))?
                    .trim();
                if !KNOWN_KEYS.iter().any(|(s, _)| *s == name) {
                    return Err(syntax(line_no, &format!("unknown section [{name}]")));
                }
                sections.entry(name.to_string()).or_default();
                current = Some(name.to_string());
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| syntax(line_no, "expected `key = value`"))?;
            let section = current
                .as_ref()
                .ok_or_else(|| syntax(line_no, "key outside of any section"))?;
            let key = key.trim();
            let known = KNOWN_KEYS.iter().find(|(s, _)| s == section).map(|(_, k)| *k).unwrap_or(&[]);
            if !known.contains(&key) {
                return Err(CliError::UnknownKey {
                    section: section.clone(),
                    key: key.to_string(),
                });
            }
            let entry = sections.get_mut(section).expect("section registered");
            if entry.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(syntax(line_no, &format!("duplicate key `{key}`")));
            }
        }
        Ok(RawConfig { sections })
    }

    pub fn has_section(&self, section: &str) -> bool {
        self.sections.contains_key(section)
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections.get(section).and_then(|s| s.get(key)).map(String::as_str)
    }

    fn require(&self, section: &str, key: &str) -> Result<&str> {
        self.get(section, key).ok_or_else(|| CliError::MissingKey {
            section: section.into(),
            key: key.into(),
        })
    }

    pub fn parse_opt<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<T>> {
        match self.get(section, key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| key_error(section, key, &format!("cannot parse `{v}`"))),
        }
    }

    pub fn parse_or<T: FromStr>(&self, section: &str, key: &str, default: T) -> Result<T> {
        Ok(self.parse_opt(section, key)?.unwrap_or(default))
    }

    pub fn parse_required<T: FromStr>(&self, section: &str, key: &str) -> Result<T> {
        let v = self.require(section, key)?;
        v.parse().map_err(|_| key_error(section, key, &format!("cannot parse `{v}`")))
    }

    pub fn list_opt<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<Vec<T>>> {
        match self.get(section, key) {
            None => Ok(None),
            Some(v) => v
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| key_error(section, key, &format!("cannot parse `{t}`"))))
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }

    pub fn list_required<T: FromStr>(&self, section: &str, key: &str) -> Result<Vec<T>> {
        self.require(section, key)?;
        Ok(self.list_opt(section, key)?.expect("present"))
    }
}

fn syntax(line: usize, message: &str) -> CliError {
    CliError::Syntax {
        line,
        message: message.to_string(),
    }
}

pub(crate) fn key_error(section: &str, key: &str, message: &str) -> CliError {
    CliError::Key {
        section: section.into(),
        key: key.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub dim: usize,
    pub origin: Vec<f64>,
    pub extent: Vec<f64>,
    pub cells: Vec<usize>,
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid> {
        Ok(Grid::new(self.dim, &self.origin, &self.extent, &self.cells)?)
    }

    pub fn with_cells(&self, n: usize) -> GridSpec {
        GridSpec {
            cells: vec![n; self.dim],
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExponentKind {
    Constant(f64),
    /// Nodal VXF1 table `t`, used as `base + amplitude * t`.
    Table { file: PathBuf },
    /// `base + amplitude * sin(frequency . x + phase)`
    Wave { frequency: Vec<f64>, phase: f64 },
    /// `base + amplitude * (1 - 2 exp(-|x - center|^2 / width^2))`, distance
    /// taken over the axes listed in `center` only.
    Inclusion { center: Vec<f64>, width: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExponentSpec {
    pub kind: ExponentKind,
    pub base: f64,
    pub amplitude: f64,
    pub p_infinity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSpec {
    Matched,
    Linear,
    Bump,
    /// `G = 0`, boundary `slope * x_0`
    Ramp { slope: f64 },
    Files { g: PathBuf, boundary: PathBuf },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Kappa {
    /// `2^{n+1} c4` with `c4` fitted from the exponent.
    Auto,
    Value(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateSpec {
    pub q: Vec<f64>,
    pub kappa: Kappa,
    pub epsilons: Vec<f64>,
    pub lambda_count: usize,
    /// Largest λ as a multiple of the covering threshold.
    pub lambda_max: f64,
    pub m: Option<f64>,
    pub m0: f64,
    pub s: f64,
    pub root_center: Option<Vec<f64>>,
    pub root_side: Option<f64>,
    pub levels: u32,
    pub max_level: Option<u32>,
    pub mu_max: f64,
    pub mu_steps: usize,
    pub cap: f64,
    pub m1: Option<f64>,
    pub fit_samples: usize,
}

impl EstimateSpec {
    /// The configured root, or the largest centered cube whose double fits
    /// in the domain.
    pub fn root(&self, grid: &Grid) -> Result<Region> {
        let dom = grid.domain();
        let center = match &self.root_center {
            Some(c) => c.clone(),
            None => dom.center()[..grid.dim()].to_vec(),
        };
        let side = match self.root_side {
            Some(s) => s,
            None => (0..grid.dim()).map(|k| 0.5 * dom.side(k)).fold(f64::INFINITY, f64::min),
        };
        if center.len() != grid.dim() {
            return Err(key_error("estimates", "root_center", "length must equal grid dim"));
        }
        Ok(Region::cube(&center, side)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    Refinement,
    Size,
    Amplitude,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub kind: SweepKind,
    pub resolutions: Vec<usize>,
    pub sizes: Vec<f64>,
    pub amplitudes: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PgmFormat {
    Ascii,
    Binary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenoiseSpec {
    pub input: PathBuf,
    pub strength: f64,
    pub p_minus: f64,
    pub p_plus: f64,
    pub iterations: usize,
    pub contrast: f64,
    /// Gaussian width in pixels of the edge-detector pre-smoothing.
    pub smoothing: f64,
    pub gamma: f64,
    pub format: PgmFormat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub grid: Option<GridSpec>,
    pub exponent: Option<ExponentSpec>,
    pub data: DataSpec,
    pub solver: SolveOptions,
    pub estimates: EstimateSpec,
    pub sweep: Option<SweepSpec>,
    pub denoise: Option<DenoiseSpec>,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    /// Parse `text`; relative file names resolve against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let raw = RawConfig::parse(text)?;
        Self::from_raw(&raw, base_dir)
    }

    pub fn load(path: &Path) -> Result<(Self, String)> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Ok((Self::parse(&text, base)?, text))
    }

    pub fn from_raw(raw: &RawConfig, base: &Path) -> Result<Self> {
        let resolve = |p: &str| -> PathBuf {
            let p = PathBuf::from(p);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };
        let grid = if raw.has_section("grid") {
            let dim: usize = raw.parse_required("grid", "dim")?;
            if !(1..=3).contains(&dim) {
                return Err(key_error("grid", "dim", "must be 1, 2 or 3"));
            }
            let spec = GridSpec {
                dim,
                origin: raw.list_opt("grid", "origin")?.unwrap_or_else(|| vec![0.0; dim]),
                extent: raw.list_opt("grid", "extent")?.unwrap_or_else(|| vec![1.0; dim]),
                cells: raw.list_required("grid", "cells")?,
            };
            for (key, len) in [("origin", spec.origin.len()), ("extent", spec.extent.len()), ("cells", spec.cells.len())] {
                if len != dim {
                    return Err(key_error("grid", key, &format!("expected {dim} values, got {len}")));
                }
            }
            spec.build()?;
            Some(spec)
        } else {
            None
        };

        let exponent = if raw.has_section("exponent") {
            let kind: String = raw.parse_required("exponent", "kind")?;
            let kind = match kind.as_str() {
                "constant" => {
                    let v: f64 = raw.parse_required("exponent", "value")?;
                    if !(v > 1.0 && v.is_finite()) {
                        return Err(key_error("exponent", "value", "must lie in (1, inf)"));
                    }
                    ExponentKind::Constant(v)
                }
                "table" => {
                    let file: String = raw.parse_required("exponent", "file")?;
                    let file = resolve(&file);
                    if !file.is_file() {
                        return Err(key_error("exponent", "file", &format!("{} does not exist", file.display())));
                    }
                    ExponentKind::Table { file }
                }
                "wave" => ExponentKind::Wave {
                    frequency: raw.list_required("exponent", "frequency")?,
                    phase: raw.parse_or("exponent", "phase", 0.0)?,
                },
                "inclusion" => {
                    let width: f64 = raw.parse_required("exponent", "width")?;
                    if !(width > 0.0) {
                        return Err(key_error("exponent", "width", "must be positive"));
                    }
                    ExponentKind::Inclusion {
                        center: raw.list_required("exponent", "center")?,
                        width,
                    }
                }
                other => {
                    return Err(key_error(
                        "exponent",
                        "kind",
                        &format!("`{other}` is not one of constant, table, wave, inclusion"),
                    ))
                }
            };
            let (base_default, amp_default) = match kind {
                ExponentKind::Table { .. } => (0.0, 1.0),
                _ => (2.0, 0.0),
            };
            let needs_base = matches!(kind, ExponentKind::Wave { .. } | ExponentKind::Inclusion { .. });
            let base_v = if needs_base {
                raw.parse_required("exponent", "base")?
            } else {
                raw.parse_or("exponent", "base", base_default)?
            };
            Some(ExponentSpec {
                kind,
                base: base_v,
                amplitude: raw.parse_or("exponent", "amplitude", amp_default)?,
                p_infinity: raw.parse_opt("exponent", "p_infinity")?,
            })
        } else {
            None
        };

        let data = match raw.get("data", "instance").unwrap_or("matched") {
            "matched" => DataSpec::Matched,
            "linear" => DataSpec::Linear,
            "bump" => DataSpec::Bump,
            "ramp" => DataSpec::Ramp {
                slope: raw.parse_or("data", "slope", 1.0)?,
            },
            "file" => {
                let g = resolve(&raw.parse_required::<String>("data", "g_file")?);
                let b = resolve(&raw.parse_required::<String>("data", "boundary_file")?);
                for (key, p) in [("g_file", &g), ("boundary_file", &b)] {
                    if !p.is_file() {
                        return Err(key_error("data", key, &format!("{} does not exist", p.display())));
                    }
                }
                DataSpec::Files { g, boundary: b }
            }
            other => {
                return Err(key_error(
                    "data",
                    "instance",
                    &format!("`{other}` is not one of matched, linear, bump, ramp, file"),
                ))
            }
        };

        let mut solver = SolveOptions::default();
        solver.tolerance = raw.parse_or("solver", "tolerance", solver.tolerance)?;
        solver.max_iterations = raw.parse_or("solver", "max_iterations", solver.max_iterations)?;
        solver.gamma_floor = raw.parse_or("solver", "gamma_floor", solver.gamma_floor)?;
        solver.gamma_schedule = raw.list_opt("solver", "gamma_schedule")?;
        if let Some(v) = raw.get("solver", "variant") {
            solver.variant = parse_variant(v)?;
        }
        if !(solver.tolerance > 0.0) {
            return Err(key_error("solver", "tolerance", "must be positive"));
        }
        if let Some(s) = &solver.gamma_schedule {
            if s.is_empty() || s.iter().any(|g| !(*g >= 0.0)) || s.windows(2).any(|w| w[1] > w[0]) {
                return Err(key_error("solver", "gamma_schedule", "must be non-empty, non-negative, non-increasing"));
            }
        }

        let kappa = match raw.get("estimates", "kappa") {
            None | Some("auto") => Kappa::Auto,
            Some(v) => Kappa::Value(v.parse().map_err(|_| key_error("estimates", "kappa", "expected `auto` or a number"))?),
        };
        let estimates = EstimateSpec {
            q: raw.list_opt("estimates", "q")?.unwrap_or_else(|| vec![2.0]),
            kappa,
            epsilons: raw.list_opt("estimates", "epsilons")?.unwrap_or_else(|| vec![0.4, 0.2, 0.1, 0.05]),
            lambda_count: raw.parse_or("estimates", "lambda_count", 4)?,
            lambda_max: raw.parse_or("estimates", "lambda_max", 2.0)?,
            m: raw.parse_opt("estimates", "m")?,
            m0: raw.parse_or("estimates", "m0", 1.5)?,
            s: raw.parse_or("estimates", "s", 1.2)?,
            root_center: raw.list_opt("estimates", "root_center")?,
            root_side: raw.parse_opt("estimates", "root_side")?,
            levels: raw.parse_or("estimates", "levels", 1)?,
            max_level: raw.parse_opt("estimates", "max_level")?,
            mu_max: raw.parse_or("estimates", "mu_max", 3.0)?,
            mu_steps: raw.parse_or("estimates", "mu_steps", 9)?,
            cap: raw.parse_or("estimates", "cap", 1e3)?,
            m1: raw.parse_opt("estimates", "m1")?,
            fit_samples: raw.parse_or("estimates", "fit_samples", 20_000)?,
        };
        if estimates.q.iter().any(|q| !(*q >= 1.0)) {
            return Err(key_error("estimates", "q", "every q must be >= 1"));
        }
        if estimates.epsilons.iter().any(|e| !(*e > 0.0)) {
            return Err(key_error("estimates", "epsilons", "must be positive"));
        }
        if estimates.lambda_count == 0 || !(estimates.lambda_max >= 1.0) {
            return Err(key_error("estimates", "lambda_count", "need at least one level and lambda_max >= 1"));
        }
        if let Kappa::Value(k) = estimates.kappa {
            if !(k > 0.0) {
                return Err(key_error("estimates", "kappa", "must be positive"));
            }
        }
        if !(estimates.mu_max > 1.0) || estimates.mu_steps < 2 {
            return Err(key_error("estimates", "mu_max", "need mu_max > 1 and mu_steps >= 2"));
        }

        let sweep = if raw.has_section("sweep") {
            let kind = match raw.get("sweep", "kind").unwrap_or("refinement") {
                "refinement" => SweepKind::Refinement,
                "size" => SweepKind::Size,
                "amplitude" => SweepKind::Amplitude,
                other => {
                    return Err(key_error(
                        "sweep",
                        "kind",
                        &format!("`{other}` is not one of refinement, size, amplitude"),
                    ))
                }
            };
            let spec = SweepSpec {
                kind,
                resolutions: raw.list_opt("sweep", "resolutions")?.unwrap_or_else(|| vec![16, 32]),
                sizes: raw.list_opt("sweep", "sizes")?.unwrap_or_else(|| vec![1.0, 2.0]),
                amplitudes: raw.list_opt("sweep", "amplitudes")?.unwrap_or_else(|| vec![0.2, 0.1, 0.05]),
            };
            if spec.resolutions.iter().any(|&n| n < 2) {
                return Err(key_error("sweep", "resolutions", "every resolution must be >= 2"));
            }
            if spec.sizes.iter().any(|s| !(*s > 0.0)) {
                return Err(key_error("sweep", "sizes", "must be positive"));
            }
            Some(spec)
        } else {
            None
        };

        let denoise = if raw.has_section("denoise") {
            let input = resolve(&raw.parse_required::<String>("denoise", "input")?);
            if !input.is_file() {
                return Err(key_error("denoise", "input", &format!("{} does not exist", input.display())));
            }
            let spec = DenoiseSpec {
                input,
                strength: raw.parse_or("denoise", "strength", 1.0)?,
                p_minus: raw.parse_or("denoise", "p_minus", 1.2)?,
                p_plus: raw.parse_or("denoise", "p_plus", 2.0)?,
                iterations: raw.parse_or("denoise", "iterations", 3)?,
                contrast: raw.parse_or("denoise", "contrast", 100.0)?,
                smoothing: raw.parse_or("denoise", "smoothing", 1.0)?,
                gamma: raw.parse_or("denoise", "gamma", 1e-3)?,
                format: match raw.get("denoise", "format").unwrap_or("p5") {
                    "p2" => PgmFormat::Ascii,
                    "p5" => PgmFormat::Binary,
                    other => return Err(key_error("denoise", "format", &format!("`{other}` is not p2 or p5"))),
                },
            };
            if !(spec.p_minus > 1.0) {
                return Err(key_error("denoise", "p_minus", "must be > 1"));
            }
            if !(spec.p_plus >= spec.p_minus && spec.p_plus.is_finite()) {
                return Err(key_error("denoise", "p_plus", "must be finite and >= p_minus"));
            }
            if !(spec.strength >= 0.0 && spec.strength.is_finite()) {
                return Err(key_error("denoise", "strength", "must be finite and >= 0"));
            }
            if !(spec.contrast >= 0.0) || !(spec.smoothing >= 0.0) || !(spec.gamma >= 0.0) {
                return Err(key_error("denoise", "contrast", "contrast, smoothing and gamma must be >= 0"));
            }
            Some(spec)
        } else {
            None
        };

        let threads = raw.parse_opt::<usize>("run", "threads")?;
        if threads == Some(0) {
            return Err(key_error("run", "threads", "must be >= 1"));
        }
        Ok(ExperimentConfig {
            grid,
            exponent,
            data,
            solver,
            estimates,
            sweep,
            denoise,
            out_dir: raw.get("output", "dir").map(resolve).unwrap_or_else(|| PathBuf::from("out")),
            seed: raw.parse_or("run", "seed", 0)?,
            threads,
        })
    }

    pub fn grid_spec(&self) -> Result<&GridSpec> {
        self.grid.as_ref().ok_or_else(|| CliError::MissingKey {
            section: "grid".into(),
            key: "dim".into(),
        })
    }

    pub fn exponent_spec(&self) -> Result<&ExponentSpec> {
        self.exponent.as_ref().ok_or_else(|| CliError::MissingKey {
            section: "exponent".into(),
            key: "kind".into(),
        })
    }
}

pub fn parse_variant(v: &str) -> Result<Variant> {
    match v {
        "power" => Ok(Variant::Power),
        "shifted" => Ok(Variant::Shifted),
        "squared" => Ok(Variant::Squared),
        other => Err(key_error(
            "solver",
            "variant",
            &format!("`{other}` is not one of power, shifted, squared"),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = "
# matched instance
[grid]
dim = 2
origin = 0 0
extent = 1 1
cells = 16 16

[exponent]
kind = wave
base = 2.2
amplitude = 0.1
frequency = 1 2

[solver]
variant = shifted
gamma_schedule = 1 0.1 0
";

    #[test]
    fn parses_sections_and_lists() {
        let c = ExperimentConfig::parse(BASIC, Path::new(".")).unwrap();
        let g = c.grid.unwrap();
        assert_eq!(g.cells, vec![16, 16]);
        let e = c.exponent.unwrap();
        assert_eq!(e.base, 2.2);
        assert_eq!(
            e.kind,
            ExponentKind::Wave {
                frequency: vec![1.0, 2.0],
                phase: 0.0
            }
        );
        assert_eq!(c.solver.variant, Variant::Shifted);
        assert_eq!(c.solver.gamma_schedule, Some(vec![1.0, 0.1, 0.0]));
        assert_eq!(c.data, DataSpec::Matched);
        assert_eq!(c.estimates.kappa, Kappa::Auto);
    }

    #[test]
    fn unknown_key_names_section_and_key() {
        let err = ExperimentConfig::parse("[grid]\ndim = 2\ncels = 4 4\n", Path::new(".")).unwrap_err();
        assert!(matches!(err, CliError::UnknownKey { ref section, ref key } if section == "grid" && key == "cels"));
    }

    #[test]
    fn rejects_malformed_input() {
        for bad in [
            "dim = 2\n",
            "[grid\n",
            "[nowhere]\n",
            "[grid]\ndim 2\n",
            "[grid]\ndim = 2\ndim = 3\n",
        ] {
            assert!(RawConfig::parse(bad).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn range_errors_mention_the_field() {
        let text = "[grid]\ndim = 2\ncells = 8 8\n[exponent]\nkind = constant\nvalue = 0.5\n";
        let err = ExperimentConfig::parse(text, Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("value"), "{err}");
        let text = "[grid]\ndim = 2\ncells = 8\n";
        let err = ExperimentConfig::parse(text, Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("cells"), "{err}");
        let text = "[estimates]\nq = 0.5\n";
        assert!(ExperimentConfig::parse(text, Path::new(".")).is_err());
    }

    #[test]
    fn missing_files_are_reported() {
        let text = "[data]\ninstance = file\ng_file = nope.vxf\nboundary_file = nope.vxf\n";
        let err = ExperimentConfig::parse(text, Path::new("/nonexistent")).unwrap_err();
        assert!(err.to_string().contains("g_file"), "{err}");
    }
}

//! Edge-adaptive smoothing of grayscale images by proximal steps of the
//! variable-exponent energy.
//!
//! Pixels are grid nodes with unit spacing (axis 0 = row) and intensities
//! scaled to `[0, 1]`. The exponent is
//! `p = p- + (p+ - p-) / (1 + contrast |∇(smoothed image)|²)`, so flat
//! regions diffuse (`p` near `p+`) and edges see a total-variation-like
//! penalty (`p` near `p-`).

use std::path::Path;

use varexp_core::exponent::ExponentField;
use varexp_core::solver::{solve_proximal, SolveOptions};
use varexp_core::{Grid, GridFunction};

use crate::config::{DenoiseSpec, ExperimentConfig};
use crate::error::{CliError, Result};
use crate::pgm::Image;
use crate::report::{num, Outcome, Table};
use crate::vxf;

pub fn image_grid(img: &Image) -> Result<Grid> {
    if img.height < 3 || img.width < 3 {
        return Err(CliError::Invalid("image must be at least 3x3 pixels".into()));
    }
    let (h, w) = ((img.height - 1) as f64, (img.width - 1) as f64);
    Ok(Grid::new(2, &[0.0, 0.0], &[h, w], &[img.height - 1, img.width - 1])?)
}

pub fn to_field(img: &Image) -> Result<GridFunction> {
    let grid = image_grid(img)?;
    let vals = img.pixels.iter().map(|&v| v as f64 / 255.0).collect();
    Ok(GridFunction::new(grid, 1, vals)?)
}

pub fn to_image(u: &GridFunction, width: usize, height: usize) -> Image {
    let px = u
        .values()
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    Image::new(width, height, px)
}

/// Separable Gaussian blur with mirrored borders; `sigma = 0` copies.
pub fn gaussian_blur(vals: &[f64], height: usize, width: usize, sigma: f64) -> Vec<f64> {
    if sigma == 0.0 {
        return vals.to_vec();
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let kernel: Vec<f64> = (-radius..=radius).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let total: f64 = kernel.iter().sum();
    let kernel: Vec<f64> = kernel.iter().map(|k| k / total).collect();
    let mirror = |i: isize, n: usize| -> usize {
        let n = n as isize;
        let mut i = i;
        // reflect until inside; handles radii larger than the image
        loop {
            if i < 0 {
                i = -i - 1;
            } else if i >= n {
                i = 2 * n - i - 1;
            } else {
                return i as usize;
            }
        }
    };
    let mut tmp = vec![0.0; vals.len()];
    for r in 0..height {
        for c in 0..width {
            tmp[r * width + c] = kernel
                .iter()
                .enumerate()
                .map(|(k, w)| w * vals[r * width + mirror(c as isize + k as isize - radius, width)])
                .sum();
        }
    }
    let mut out = vec![0.0; vals.len()];
    for r in 0..height {
        for c in 0..width {
            out[r * width + c] = kernel
                .iter()
                .enumerate()
                .map(|(k, w)| w * tmp[mirror(r as isize + k as isize - radius, height) * width + c])
                .sum();
        }
    }
    out
}

/// Squared gradient magnitude at each pixel by central differences
/// (one-sided on the border).
pub fn gradient_sq(vals: &[f64], height: usize, width: usize) -> Vec<f64> {
    let at = |r: usize, c: usize| vals[r * width + c];
    let diff = |lo: f64, hi: f64, span: usize| (hi - lo) / span as f64;
    let mut out = vec![0.0; vals.len()];
    for r in 0..height {
        for c in 0..width {
            let (r0, r1) = (r.saturating_sub(1), (r + 1).min(height - 1));
            let (c0, c1) = (c.saturating_sub(1), (c + 1).min(width - 1));
            let gr = diff(at(r0, c), at(r1, c), r1 - r0);
            let gc = diff(at(r, c0), at(r, c1), c1 - c0);
            out[r * width + c] = gr * gr + gc * gc;
        }
    }
    out
}

pub fn edge_exponent(img: &Image, spec: &DenoiseSpec) -> Result<ExponentField> {
    let grid = image_grid(img)?;
    let u0: Vec<f64> = img.pixels.iter().map(|&v| v as f64 / 255.0).collect();
    let smooth = gaussian_blur(&u0, img.height, img.width, spec.smoothing);
    let g2 = gradient_sq(&smooth, img.height, img.width);
    let vals = g2
        .iter()
        .map(|t| {
            let p = spec.p_minus + (spec.p_plus - spec.p_minus) / (1.0 + spec.contrast * t);
            p.clamp(spec.p_minus, spec.p_plus)
        })
        .collect();
    Ok(ExponentField::new(GridFunction::new(grid, 1, vals)?, None)?)
}

pub struct Denoised {
    pub image: Image,
    pub exponent: ExponentField,
    pub steps: Vec<StepStats>,
}

pub struct StepStats {
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
    pub mean_change: f64,
}

pub fn denoise(img: &Image, spec: &DenoiseSpec, base: &SolveOptions) -> Result<Denoised> {
    let p = edge_exponent(img, spec)?;
    let mut u = to_field(img)?;
    let mut opts = base.clone();
    let mut schedule: Vec<f64> = [1.0, 0.1, 0.01].into_iter().filter(|&g| g > spec.gamma).collect();
    schedule.push(spec.gamma);
    opts.gamma_schedule = Some(schedule);
    let mut steps = Vec::with_capacity(spec.iterations);
    for _ in 0..spec.iterations {
        let r = solve_proximal(&u, &p, spec.strength, &opts)?;
        let change = r
            .u
            .values()
            .iter()
            .zip(u.values())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / u.values().len() as f64;
        steps.push(StepStats {
            converged: r.converged,
            iterations: r.iterations,
            residual: r.residual,
            mean_change: change,
        });
        u = r.u;
    }
    Ok(Denoised {
        image: to_image(&u, img.width, img.height),
        exponent: p,
        steps,
    })
}

pub fn run(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Outcome> {
    let spec = cfg.denoise.as_ref().ok_or_else(|| CliError::MissingKey {
        section: "denoise".into(),
        key: "input".into(),
    })?;
    let img = Image::read(&spec.input)?;
    let d = denoise(&img, spec, &cfg.solver)?;
    let mut out = Outcome::new();
    let mut t = Table::new("denoise", &["step", "converged", "iterations", "residual", "mean_change"]);
    for (i, s) in d.steps.iter().enumerate() {
        out.converged &= s.converged;
        t.push(vec![
            i.to_string(),
            s.converged.to_string(),
            s.iterations.to_string(),
            num(s.residual),
            num(s.mean_change),
        ]);
    }
    out.tables.push(t);
    out.note("width", img.width);
    out.note("height", img.height);
    out.note("p_min_used", num(d.exponent.p_minus()));
    out.note("p_max_used", num(d.exponent.p_plus()));
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let img_path = out_dir.join("denoised.pgm");
    d.image.write(&img_path, spec.format)?;
    let p_path = out_dir.join("p.vxf");
    vxf::write_nodes(&p_path, d.exponent.field())?;
    out.files.push(img_path);
    out.files.push(p_path);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::PgmFormat;

    fn spec(strength: f64) -> DenoiseSpec {
        DenoiseSpec {
            input: "unused".into(),
            strength,
            p_minus: 1.2,
            p_plus: 2.0,
            iterations: 2,
            contrast: 100.0,
            smoothing: 1.0,
            gamma: 1e-3,
            format: PgmFormat::Binary,
        }
    }

    fn ramp_image() -> Image {
        let (w, h) = (12, 9);
        Image::new(w, h, (0..w * h).map(|i| ((i * 37) % 251) as u8).collect())
    }

    #[test]
    fn zero_strength_is_identity() {
        let img = ramp_image();
        let d = denoise(&img, &spec(0.0), &SolveOptions::default()).unwrap();
        assert_eq!(d.image, img);
    }

    #[test]
    fn constant_image_is_fixed() {
        let img = Image::new(10, 8, vec![77; 80]);
        let d = denoise(&img, &spec(2.0), &SolveOptions::default()).unwrap();
        assert_eq!(d.image, img);
        assert!(d.steps.iter().all(|s| s.converged));
        assert_eq!(d.exponent.p_minus(), 2.0);
    }

    #[test]
    fn blur_preserves_constants_and_mass() {
        let v = vec![0.3; 7 * 5];
        for x in gaussian_blur(&v, 7, 5, 1.5) {
            assert!((x - 0.3).abs() < 1e-15);
        }
        let mut spike = vec![0.0; 9 * 9];
        spike[40] = 1.0;
        let b = gaussian_blur(&spike, 9, 9, 1.0);
        assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(b[40] < 1.0 && b[41] > 0.0);
    }

    #[test]
    fn exponent_drops_at_edges() {
        let (w, h) = (16, 8);
        let img = Image::new(w, h, (0..w * h).map(|i| if i % w < 8 { 40 } else { 220 }).collect());
        let p = edge_exponent(&img, &spec(1.0)).unwrap();
        let at = |r: usize, c: usize| p.at_node(r * w + c);
        assert!(at(4, 7) < 1.5);
        assert!(at(4, 0) > 1.99);
        assert!(p.p_minus() >= 1.2 && p.p_plus() <= 2.0);
    }
}

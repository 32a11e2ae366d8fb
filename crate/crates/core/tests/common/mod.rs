//! Brute-force reference computations shared by the integration tests.
#![allow(dead_code, clippy::needless_range_loop)]

use nalgebra::{DMatrix, DVector};
use varexp_core::grid::{CellField, Grid, GridFunction};
use varexp_core::Region;

/// Mean of a cell density over the box `[lo, hi]` clipped to the grid, by
/// explicit per-cell overlap lengths.
pub fn box_mean(grid: &Grid, vals: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    let dim = grid.dim();
    let mut num = 0.0;
    let mut den = 0.0;
    for c in 0..grid.cell_count() {
        let center = grid.cell_center(c);
        let mut w = 1.0;
        for k in 0..dim {
            let h = grid.cell_size(k);
            let a = center[k] - 0.5 * h;
            let b = center[k] + 0.5 * h;
            let len = (b.min(hi[k]) - a.max(lo[k])).max(0.0);
            w *= len;
        }
        num += w * vals[c];
        den += w;
    }
    num / den
}

/// One lattice cube as (level, index, lo, hi).
pub type Cube = (u32, Vec<usize>, Vec<f64>, Vec<f64>);

pub fn all_cubes(root: &Region, depth: u32) -> Vec<Cube> {
    let dim = root.dim();
    let mut out = Vec::new();
    for level in 0..=depth {
        let per_axis = 1usize << level;
        let total = per_axis.pow(dim as u32);
        for t in 0..total {
            let mut idx = vec![0; dim];
            let mut r = t;
            for k in (0..dim).rev() {
                idx[k] = r % per_axis;
                r /= per_axis;
            }
            let lo: Vec<f64> = (0..dim)
                .map(|k| root.lo()[k] + idx[k] as f64 * root.side(k) / per_axis as f64)
                .collect();
            let hi: Vec<f64> = (0..dim)
                .map(|k| root.lo()[k] + (idx[k] + 1) as f64 * root.side(k) / per_axis as f64)
                .collect();
            out.push((level, idx, lo, hi));
        }
    }
    out
}

fn doubled(lo: &[f64], hi: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let a = lo.iter().zip(hi).map(|(l, h)| l - 0.5 * (h - l)).collect();
    let b = lo.iter().zip(hi).map(|(l, h)| h + 0.5 * (h - l)).collect();
    (a, b)
}

pub fn doubled_mean(grid: &Grid, vals: &[f64], cube: &Cube) -> f64 {
    let (a, b) = doubled(&cube.2, &cube.3);
    box_mean(grid, vals, &a, &b)
}

/// `M*_{root,s}` by enumerating every lattice cube whose closure holds the
/// cell center.
pub fn brute_maximal(grid: &Grid, vals: &[f64], root: &Region, s: f64, depth: u32) -> Vec<f64> {
    let pow: Vec<f64> = vals.iter().map(|v| v.abs().powf(s)).collect();
    let cubes = all_cubes(root, depth);
    let means: Vec<f64> = cubes.iter().map(|c| doubled_mean(grid, &pow, c)).collect();
    let tol = 1e-12;
    (0..grid.cell_count())
        .map(|cell| {
            let x = grid.cell_center(cell);
            let mut best = 0.0f64;
            for (cube, m) in cubes.iter().zip(&means) {
                let inside = (0..grid.dim()).all(|k| x[k] >= cube.2[k] - tol && x[k] <= cube.3[k] + tol);
                if inside {
                    best = best.max(*m);
                }
            }
            best.powf(1.0 / s)
        })
        .collect()
}

/// Maximal proper lattice cubes with doubled mean above `lambda`, sorted.
pub fn brute_cover(grid: &Grid, vals: &[f64], root: &Region, lambda: f64, depth: u32) -> Vec<(u32, Vec<usize>)> {
    let abs: Vec<f64> = vals.iter().map(|v| v.abs()).collect();
    let cubes = all_cubes(root, depth);
    let hot: Vec<(u32, Vec<usize>)> = cubes
        .iter()
        .filter(|c| c.0 >= 1 && doubled_mean(grid, &abs, c) > lambda)
        .map(|c| (c.0, c.1.clone()))
        .collect();
    let mut out: Vec<(u32, Vec<usize>)> = hot
        .iter()
        .filter(|(level, idx)| {
            // no hot ancestor at levels 1..level
            !(1..*level).any(|l| {
                let shift = level - l;
                let anc: Vec<usize> = idx.iter().map(|i| i >> shift).collect();
                hot.iter().any(|(hl, hi)| *hl == l && *hi == anc)
            })
        })
        .cloned()
        .collect();
    out.sort();
    out
}

/// Direct dense solve of the discrete Dirichlet problem for `p = 2` in 2D:
/// `Σ_c |c| ∇φ_i(x_c)·∇u(x_c) = Σ_c |c| ∇φ_i(x_c)·G_c` on free nodes.
pub fn dense_linear_solve(grid: &Grid, g: &CellField, boundary: &GridFunction) -> Vec<f64> {
    assert_eq!(grid.dim(), 2);
    let (nx, ny) = (grid.cells_per_axis()[0], grid.cells_per_axis()[1]);
    let (hx, hy) = (grid.cell_size(0), grid.cell_size(1));
    let nodes = grid.node_count();
    let node = |i: usize, j: usize| i * (ny + 1) + j;
    let on_boundary = |i: usize, j: usize| i == 0 || j == 0 || i == nx || j == ny;
    let mut a = DMatrix::<f64>::zeros(nodes, nodes);
    let mut b = DVector::<f64>::zeros(nodes);
    let vol = hx * hy;
    for i in 0..nx {
        for j in 0..ny {
            // bilinear shape gradients at the cell center
            let corners = [(0, 0), (0, 1), (1, 0), (1, 1)];
            let grads: Vec<[f64; 2]> = corners
                .iter()
                .map(|&(di, dj)| {
                    let sx = if di == 1 { 1.0 } else { -1.0 };
                    let sy = if dj == 1 { 1.0 } else { -1.0 };
                    [0.5 * sx / hx, 0.5 * sy / hy]
                })
                .collect();
            let c = i * ny + j;
            let gc = g.cell(c);
            for (ci, &(ai, aj)) in corners.iter().enumerate() {
                let row = node(i + ai, j + aj);
                b[row] += vol * (grads[ci][0] * gc[0] + grads[ci][1] * gc[1]);
                for (cj, &(bi, bj)) in corners.iter().enumerate() {
                    let col = node(i + bi, j + bj);
                    a[(row, col)] += vol * (grads[ci][0] * grads[cj][0] + grads[ci][1] * grads[cj][1]);
                }
            }
        }
    }
    for i in 0..=nx {
        for j in 0..=ny {
            if on_boundary(i, j) {
                let r = node(i, j);
                for k in 0..nodes {
                    a[(r, k)] = 0.0;
                }
                a[(r, r)] = 1.0;
                b[r] = boundary.values()[r];
            }
        }
    }
    let x = a.lu().solve(&b).expect("singular system");
    x.iter().copied().collect()
}

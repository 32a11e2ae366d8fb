//! Sparse symmetric systems on grid stencils and a preconditioned conjugate
//! gradient solver with a Lanczos condition estimate.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::grid::Grid;

/// Compressed sparse rows with sorted column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Pattern coupling every node with its `3^n` stencil neighbours, in
    /// `block x block` blocks (dof index `node * block + component`).
    pub fn grid_pattern(grid: &Grid, block: usize) -> Self {
        let dim = grid.dim();
        let nodes = grid.node_count();
        let n = nodes * block;
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        row_ptr.push(0);
        let mut neigh = Vec::new();
        for node in 0..nodes {
            let m = grid.node_multi(node);
            neigh.clear();
            let total = 3usize.pow(dim as u32);
            'outer: for t in 0..total {
                let mut idx = [0usize; 3];
                let mut r = t;
                for k in (0..dim).rev() {
                    let d = (r % 3) as isize - 1;
                    r /= 3;
                    let v = m[k] as isize + d;
                    if v < 0 || v >= grid.nodes_per_axis(k) as isize {
                        continue 'outer;
                    }
                    idx[k] = v as usize;
                }
                neigh.push(grid.node_index(&idx[..dim]));
            }
            neigh.sort_unstable();
            for _ in 0..block {
                for &j in &neigh {
                    for b in 0..block {
                        cols.push(j * block + b);
                    }
                }
                row_ptr.push(cols.len());
            }
        }
        let nnz = cols.len();
        CsrMatrix {
            n,
            row_ptr,
            cols,
            vals: vec![0.0; nnz],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn clear(&mut self) {
        self.vals.iter_mut().for_each(|v| *v = 0.0);
    }

    fn position(&self, row: usize, col: usize) -> usize {
        let s = self.row_ptr[row];
        let e = self.row_ptr[row + 1];
        match self.cols[s..e].binary_search(&col) {
            Ok(k) => s + k,
            Err(_) => panic!("entry ({row}, {col}) outside the sparsity pattern"),
        }
    }

    pub fn add(&mut self, row: usize, col: usize, v: f64) {
        let k = self.position(row, col);
        self.vals[k] += v;
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let s = self.row_ptr[row];
        let e = self.row_ptr[row + 1];
        match self.cols[s..e].binary_search(&col) {
            Ok(k) => self.vals[s + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// Replace the rows and columns of fixed dofs by the identity.
    pub fn pin(&mut self, fixed: &[bool]) {
        for row in 0..self.n {
            for k in self.row_ptr[row]..self.row_ptr[row + 1] {
                let col = self.cols[k];
                if fixed[row] || fixed[col] {
                    self.vals[k] = if row == col { 1.0 } else { 0.0 };
                }
            }
        }
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (row, out) in y.iter_mut().enumerate().take(self.n) {
            let mut acc = 0.0;
            for k in self.row_ptr[row]..self.row_ptr[row + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *out = acc;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgOutcome {
    pub iterations: usize,
    pub converged: bool,
    pub relative_residual: f64,
    /// Extreme-eigenvalue ratio of the Lanczos tridiagonal built from the
    /// CG coefficients (preconditioned operator).
    pub condition_estimate: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Jacobi-preconditioned CG for a symmetric positive definite `a`, starting
/// from `x = 0`.
pub fn pcg(a: &CsrMatrix, b: &[f64], x: &mut [f64], rel_tol: f64, max_iter: usize) -> CgOutcome {
    let n = a.dim();
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    x.iter_mut().for_each(|v| *v = 0.0);
    let mut r = b.to_vec();
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        return CgOutcome {
            iterations: 0,
            converged: true,
            relative_residual: 0.0,
            condition_estimate: 1.0,
        };
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, b)| a * b).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut alphas = Vec::new();
    let mut betas = Vec::new();
    let mut rel = 1.0;
    let mut converged = false;
    let mut it = 0;
    while it < max_iter {
        a.mul_vec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        alphas.push(alpha);
        it += 1;
        rel = dot(&r, &r).sqrt() / bnorm;
        if rel <= rel_tol {
            converged = true;
            break;
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        betas.push(beta);
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    CgOutcome {
        iterations: it,
        converged,
        relative_residual: rel,
        condition_estimate: lanczos_condition(&alphas, &betas),
    }
}

/// Condition number of the Lanczos tridiagonal associated with CG
/// coefficients `alpha_k`, `beta_k`.
pub fn lanczos_condition(alphas: &[f64], betas: &[f64]) -> f64 {
    let m = alphas.len();
    if m == 0 {
        return 1.0;
    }
    let mut diag = vec![0.0; m];
    let mut off = vec![0.0; m.saturating_sub(1)];
    for k in 0..m {
        diag[k] = 1.0 / alphas[k];
        if k > 0 {
            diag[k] += betas[k - 1] / alphas[k - 1];
        }
        if k + 1 < m {
            off[k] = betas[k].sqrt() / alphas[k];
        }
    }
    let (lo, hi) = tridiagonal_extremes(&diag, &off);
    if lo > 0.0 {
        hi / lo
    } else {
        f64::INFINITY
    }
}

/// Number of eigenvalues below `x` (Sturm count).
fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for k in 0..diag.len() {
        let o2 = if k > 0 { off[k - 1] * off[k - 1] } else { 0.0 };
        q = diag[k] - x - if k > 0 { o2 / q } else { 0.0 };
        if q == 0.0 {
            q = -f64::EPSILON * (diag[k].abs() + 1.0);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Smallest and largest eigenvalue of a symmetric tridiagonal matrix.
pub fn tridiagonal_extremes(diag: &[f64], off: &[f64]) -> (f64, f64) {
    let m = diag.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for k in 0..m {
        let r = if k > 0 { off[k - 1].abs() } else { 0.0 } + if k + 1 < m { off[k].abs() } else { 0.0 };
        lo = lo.min(diag[k] - r);
        hi = hi.max(diag[k] + r);
    }
    let find = |target: usize| {
        // smallest x with sturm_count(x) >= target
        let (mut a, mut b) = (lo, hi);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if sturm_count(diag, off, mid) >= target {
                b = mid;
            } else {
                a = mid;
            }
        }
        0.5 * (a + b)
    };
    (find(1), find(m))
}

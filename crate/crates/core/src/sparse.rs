//! Sparse complex operators and an extremal-singular-value solver.
//!
//! Operator norms of compressed free-product operators are computed as
//! √λ_max(T*T) by Lanczos iteration on the Hermitian positive operator T*T,
//! applied matrix-free from the CSR form of T. Small problems use full
//! reorthogonalization (exact up to machine precision); large ones run the
//! plain three-term recurrence, whose extremal Ritz values are reliable
//! even when orthogonality degrades.

use crate::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Compressed sparse row matrix over ℂ.
#[derive(Debug, Clone)]
pub struct SparseOp {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    vals: Vec<C64>,
}

impl SparseOp {
    /// Assemble from columns: `columns[j]` lists the nonzero (row, value)
    /// pairs of column j. Rows within a column need not be sorted.
    pub fn from_columns(nrows: usize, columns: Vec<Vec<(u32, C64)>>) -> Self {
        let ncols = columns.len();
        let mut counts = vec![0usize; nrows + 1];
        for col in &columns {
            for &(r, _) in col {
                counts[r as usize + 1] += 1;
            }
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let nnz = counts[nrows];
        let mut col_idx = vec![0u32; nnz];
        let mut vals = vec![C64::new(0.0, 0.0); nnz];
        let mut cursor = counts.clone();
        for (j, col) in columns.iter().enumerate() {
            for &(r, v) in col {
                let slot = cursor[r as usize];
                col_idx[slot] = j as u32;
                vals[slot] = v;
                cursor[r as usize] += 1;
            }
        }
        // sort each row by column for deterministic application order
        let mut op = SparseOp { nrows, ncols, row_ptr: counts, col_idx, vals };
        op.sort_rows();
        op
    }

    fn sort_rows(&mut self) {
        for r in 0..self.nrows {
            let lo = self.row_ptr[r];
            let hi = self.row_ptr[r + 1];
            let mut pairs: Vec<(u32, C64)> = (lo..hi)
                .map(|k| (self.col_idx[k], self.vals[k]))
                .collect();
            pairs.sort_by_key(|p| p.0);
            for (off, (c, v)) in pairs.into_iter().enumerate() {
                self.col_idx[lo + off] = c;
                self.vals[lo + off] = v;
            }
        }
    }

    pub fn identity(n: usize) -> Self {
        SparseOp {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n as u32).collect(),
            vals: vec![C64::new(1.0, 0.0); n],
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// y = A x.
    pub fn apply(&self, x: &[C64], y: &mut [C64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for r in 0..self.nrows {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.col_idx[k] as usize];
            }
            y[r] = acc;
        }
    }

    /// y = A* x (conjugate transpose application).
    pub fn apply_adjoint(&self, x: &[C64], y: &mut [C64]) {
        assert_eq!(x.len(), self.nrows);
        assert_eq!(y.len(), self.ncols);
        for v in y.iter_mut() {
            *v = C64::new(0.0, 0.0);
        }
        for r in 0..self.nrows {
            let xr = x[r];
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                y[self.col_idx[k] as usize] += self.vals[k].conj() * xr;
            }
        }
    }

    /// The conjugate transpose as a materialized matrix.
    pub fn adjoint(&self) -> SparseOp {
        let mut columns = vec![Vec::new(); self.nrows];
        for r in 0..self.nrows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                columns[r].push((self.col_idx[k], self.vals[k].conj()));
            }
        }
        SparseOp::from_columns(self.ncols, columns)
    }

    /// Entries as (row, col, value) triples in row-major order.
    pub fn triples(&self) -> Vec<(u32, u32, C64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for r in 0..self.nrows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                out.push((r as u32, self.col_idx[k], self.vals[k]));
            }
        }
        out
    }

    pub fn sub(&self, other: &SparseOp) -> SparseOp {
        assert_eq!(self.nrows, other.nrows);
        assert_eq!(self.ncols, other.ncols);
        let mut columns = vec![Vec::new(); self.ncols];
        for (r, c, v) in self.triples() {
            columns[c as usize].push((r, v));
        }
        for (r, c, v) in other.triples() {
            columns[c as usize].push((r, -v));
        }
        // merge duplicates
        for col in &mut columns {
            col.sort_by_key(|p| p.0);
            let mut merged: Vec<(u32, C64)> = Vec::with_capacity(col.len());
            for &(r, v) in col.iter() {
                match merged.last_mut() {
                    Some(last) if last.0 == r => last.1 += v,
                    _ => merged.push((r, v)),
                }
            }
            merged.retain(|p| p.1.norm_sqr() != 0.0);
            *col = merged;
        }
        SparseOp::from_columns(self.nrows, columns)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.vals.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.vals.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// Settings for the norm solver.
#[derive(Debug, Clone, Copy)]
pub struct NormSolver {
    /// Relative stagnation tolerance on the top Ritz value.
    pub rtol: f64,
    /// Iteration cap as a multiple of the dimension.
    pub max_iter_factor: usize,
    /// Seed for the random start vector.
    pub seed: u64,
}

impl Default for NormSolver {
    fn default() -> Self {
        NormSolver { rtol: 1e-9, max_iter_factor: 10, seed: 1 }
    }
}

/// Outcome of a norm computation. On stagnation the best Rayleigh bound
/// attained is still reported with `converged = false`.
#[derive(Debug, Clone, Copy)]
pub struct NormEstimate {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub restarted: bool,
}

const FULL_REORTH_LIMIT: usize = 4096;

/// ‖A‖ = √λ_max(A*A) by Lanczos iteration on A*A.
pub fn operator_norm(op: &SparseOp, solver: &NormSolver) -> NormEstimate {
    let first = lanczos_top(op, solver.seed, solver);
    if first.converged {
        return first;
    }
    // one restart with a fresh start vector
    let second = lanczos_top(op, solver.seed.wrapping_add(0x9e3779b97f4a7c15), solver);
    let best = if second.value >= first.value { second } else { first };
    NormEstimate { restarted: true, ..best }
}

fn lanczos_top(op: &SparseOp, seed: u64, solver: &NormSolver) -> NormEstimate {
    let n = op.ncols();
    if n == 0 {
        return NormEstimate { value: 0.0, iterations: 0, converged: true, restarted: false };
    }
    let full_reorth = n <= FULL_REORTH_LIMIT;
    let max_iter = if full_reorth {
        n
    } else {
        (solver.max_iter_factor.max(1) * n).min(5000)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<C64> = (0..n)
        .map(|_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
        .collect();
    normalize(&mut v);

    let mut v_prev = vec![C64::new(0.0, 0.0); n];
    let mut beta_prev = 0.0f64;
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut kept: Vec<Vec<C64>> = Vec::new();
    if full_reorth {
        kept.push(v.clone());
    }

    let mut mid = vec![C64::new(0.0, 0.0); op.nrows()];
    let mut w = vec![C64::new(0.0, 0.0); n];
    let mut iterations = 0usize;

    for j in 0..max_iter {
        iterations = j + 1;
        // w = (A*A) v
        op.apply(&v, &mut mid);
        op.apply_adjoint(&mid, &mut w);

        if beta_prev != 0.0 {
            for i in 0..n {
                w[i] -= C64::new(beta_prev, 0.0) * v_prev[i];
            }
        }
        let alpha = dot(&w, &v).re;
        alphas.push(alpha);
        for i in 0..n {
            w[i] -= C64::new(alpha, 0.0) * v[i];
        }
        if full_reorth {
            for prev in &kept {
                let c = dot(&w, prev);
                for i in 0..n {
                    w[i] -= c * prev[i];
                }
            }
        }
        let beta = norm2(&w);

        let theta = top_tridiag_eigenvalue(&alphas, &betas);
        let scale = theta.abs().max(1e-30);

        if beta <= 1e-13 * scale.max(1.0) {
            // invariant subspace: Ritz values are exact
            return NormEstimate {
                value: theta.max(0.0).sqrt(),
                iterations,
                converged: true,
                restarted: false,
            };
        }
        // residual bound |λ_max − θ| ≤ β·|s_m| with s the unit top Ritz
        // vector of the tridiagonal
        let tail = top_ritz_tail(&alphas, &betas, theta);
        if beta * tail <= 0.5 * solver.rtol * scale {
            return NormEstimate {
                value: theta.max(0.0).sqrt(),
                iterations,
                converged: true,
                restarted: false,
            };
        }

        betas.push(beta);
        v_prev.copy_from_slice(&v);
        beta_prev = beta;
        for i in 0..n {
            v[i] = w[i] / beta;
        }
        if full_reorth {
            kept.push(v.clone());
        }
    }

    // Krylov space exhausted (full reorthogonalization: exact) or cap hit.
    let theta = top_tridiag_eigenvalue(&alphas, &betas);
    NormEstimate {
        value: theta.max(0.0).sqrt(),
        iterations,
        converged: full_reorth,
        restarted: false,
    }
}

/// |last component| of the unit top eigenvector of the tridiagonal, by
/// shifted inverse iteration with a pivoting tridiagonal solve.
fn top_ritz_tail(alphas: &[f64], betas: &[f64], theta: f64) -> f64 {
    let m = alphas.len();
    if m == 1 {
        return 1.0;
    }
    let mut x = vec![1.0 / (m as f64).sqrt(); m];
    for _ in 0..2 {
        x = solve_shifted_tridiag(alphas, betas, theta, &x);
        let nrm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if nrm == 0.0 || !nrm.is_finite() {
            return 1.0;
        }
        for v in x.iter_mut() {
            *v /= nrm;
        }
    }
    x[m - 1].abs()
}

/// Solve (T − σI) x = b for symmetric tridiagonal T, with partial pivoting
/// (one superdiagonal of fill-in). Near-singular pivots are regularized.
fn solve_shifted_tridiag(alphas: &[f64], betas: &[f64], sigma: f64, b: &[f64]) -> Vec<f64> {
    let m = alphas.len();
    let mut d: Vec<f64> = alphas.iter().map(|a| a - sigma).collect();
    let mut e: Vec<f64> = betas.to_vec(); // superdiagonal
    let mut a: Vec<f64> = betas.to_vec(); // subdiagonal
    let mut f = vec![0.0f64; m]; // second superdiagonal fill-in
    let mut rhs = b.to_vec();

    for i in 0..m - 1 {
        if a[i].abs() > d[i].abs() {
            // swap rows i and i+1 (entries by column: i, i+1, i+2)
            std::mem::swap(&mut d[i], &mut a[i]);
            std::mem::swap(&mut e[i], &mut d[i + 1]);
            if i + 2 < m {
                std::mem::swap(&mut f[i], &mut e[i + 1]);
            }
            rhs.swap(i, i + 1);
        }
        let mut piv = d[i];
        if piv == 0.0 {
            piv = 1e-300;
        }
        let l = a[i] / piv;
        d[i + 1] -= l * e[i];
        if i + 2 < m {
            e[i + 1] -= l * f[i];
        }
        rhs[i + 1] -= l * rhs[i];
        a[i] = 0.0;
    }
    // back substitution
    let mut x = vec![0.0f64; m];
    for i in (0..m).rev() {
        let mut acc = rhs[i];
        if i + 1 < m {
            acc -= e[i] * x[i + 1];
        }
        if i + 2 < m {
            acc -= f[i] * x[i + 2];
        }
        let mut piv = d[i];
        if piv == 0.0 {
            piv = 1e-300;
        }
        x[i] = acc / piv;
    }
    x
}

fn dot(x: &[C64], y: &[C64]) -> C64 {
    // ⟨x, y⟩ = Σ conj(y_i) x_i
    let mut acc = C64::new(0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        acc += b.conj() * a;
    }
    acc
}

fn norm2(x: &[C64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

fn normalize(x: &mut [C64]) {
    let n = norm2(x);
    if n > 0.0 {
        for v in x.iter_mut() {
            *v /= n;
        }
    }
}

/// Largest eigenvalue of the symmetric tridiagonal matrix with diagonal
/// `alphas` and off-diagonal `betas`, by bisection on the Sturm sequence.
pub fn top_tridiag_eigenvalue(alphas: &[f64], betas: &[f64]) -> f64 {
    let m = alphas.len();
    if m == 0 {
        return 0.0;
    }
    // Gershgorin upper/lower bounds
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..m {
        let left = if i > 0 { betas[i - 1].abs() } else { 0.0 };
        let right = if i < m - 1 { betas[i].abs() } else { 0.0 };
        lo = lo.min(alphas[i] - left - right);
        hi = hi.max(alphas[i] + left + right);
    }
    if lo == hi {
        return hi;
    }
    // count of eigenvalues < x
    let count_below = |x: f64| -> usize {
        let mut count = 0;
        let mut d = 1.0f64;
        for i in 0..m {
            let off2 = if i > 0 { betas[i - 1] * betas[i - 1] } else { 0.0 };
            d = alphas[i] - x - if i > 0 { off2 / d } else { 0.0 };
            if d == 0.0 {
                d = -1e-300;
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    };
    let mut a = lo;
    let mut b = hi + (hi - lo) * 1e-12 + 1e-300;
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if count_below(mid) >= m {
            b = mid;
        } else {
            a = mid;
        }
    }
    0.5 * (a + b)
}

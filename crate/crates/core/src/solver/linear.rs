//! Sparse linear algebra for the linearized operator.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Reductions are summed per fixed chunk and then sequentially, so results
/// do not depend on the thread count.
const CHUNK: usize = 4096;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let partial: Vec<f64> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum())
        .collect();
    partial.iter().sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Compressed sparse rows.
#[derive(Debug, Clone, Default)]
pub struct Csr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl Csr {
    pub fn with_capacity(n: usize, nnz: usize) -> Self {
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        Csr { n, row_ptr, cols: Vec::with_capacity(nnz), vals: Vec::with_capacity(nnz) }
    }

    /// Append a row given as (column, value) pairs; duplicate columns are merged.
    pub fn push_row(&mut self, entries: &mut Vec<(usize, f64)>) {
        entries.sort_by_key(|e| e.0);
        let mut last: Option<usize> = None;
        for &(c, v) in entries.iter() {
            if last == Some(c) {
                *self.vals.last_mut().expect("entry exists") += v;
            } else {
                self.cols.push(c);
                self.vals.push(v);
                last = Some(c);
            }
        }
        self.row_ptr.push(self.cols.len());
        entries.clear();
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            let mut s = 0.0;
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.vals[p] * x[self.cols[p]];
            }
            *yi = s;
        });
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                (self.row_ptr[i]..self.row_ptr[i + 1])
                    .find(|&p| self.cols[p] == i)
                    .map(|p| self.vals[p])
                    .unwrap_or(0.0)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct KrylovStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Jacobi-preconditioned BiCGStab. `x` holds the initial guess on entry.
pub fn bicgstab(a: &Csr, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> Result<KrylovStats> {
    let n = a.n;
    let diag = a.diagonal();
    if let Some(i) = diag.iter().position(|d| *d == 0.0 || !d.is_finite()) {
        return Err(Error::LinearSolveFailure(format!("zero diagonal in row {i}")));
    }
    let inv_diag: Vec<f64> = diag.iter().map(|d| 1.0 / d).collect();
    let precondition = |v: &[f64], out: &mut [f64]| {
        out.par_iter_mut().zip(v.par_iter()).zip(inv_diag.par_iter()).for_each(|((o, vi), di)| *o = vi * di);
    };

    let b_norm = norm(b).max(f64::MIN_POSITIVE);
    let mut r = vec![0.0; n];
    a.matvec(x, &mut r);
    r.par_iter_mut().zip(b.par_iter()).for_each(|(ri, bi)| *ri = bi - *ri);
    let r_hat = r.clone();
    let mut rho = 1.0;
    let mut alpha = 1.0;
    let mut omega = 1.0;
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut t = vec![0.0; n];

    let mut res = norm(&r) / b_norm;
    if res <= tol {
        return Ok(KrylovStats { iterations: 0, relative_residual: res });
    }
    for it in 1..=max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new.abs() < 1e-300 {
            return Err(Error::LinearSolveFailure(format!("BiCGStab breakdown (rho) at iteration {it}")));
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        p.par_iter_mut()
            .zip(r.par_iter())
            .zip(v.par_iter())
            .for_each(|((pi, ri), vi)| *pi = ri + beta * (*pi - omega * vi));
        precondition(&p, &mut y);
        a.matvec(&y, &mut v);
        let denom = dot(&r_hat, &v);
        if denom.abs() < 1e-300 {
            return Err(Error::LinearSolveFailure(format!("BiCGStab breakdown (alpha) at iteration {it}")));
        }
        alpha = rho / denom;
        s.par_iter_mut().zip(r.par_iter()).zip(v.par_iter()).for_each(|((si, ri), vi)| *si = ri - alpha * vi);
        if norm(&s) / b_norm <= tol {
            x.par_iter_mut().zip(y.par_iter()).for_each(|(xi, yi)| *xi += alpha * yi);
            return Ok(KrylovStats { iterations: it, relative_residual: norm(&s) / b_norm });
        }
        precondition(&s, &mut z);
        a.matvec(&z, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        x.par_iter_mut()
            .zip(y.par_iter())
            .zip(z.par_iter())
            .for_each(|((xi, yi), zi)| *xi += alpha * yi + omega * zi);
        r.par_iter_mut().zip(s.par_iter()).zip(t.par_iter()).for_each(|((ri, si), ti)| *ri = si - omega * ti);
        res = norm(&r) / b_norm;
        if res <= tol {
            return Ok(KrylovStats { iterations: it, relative_residual: res });
        }
        if omega == 0.0 {
            return Err(Error::LinearSolveFailure(format!("BiCGStab stagnated at iteration {it}")));
        }
    }
    Err(Error::LinearSolveFailure(format!("BiCGStab reached {max_iter} iterations, residual {res:.3e}")))
}

/// Thomas algorithm for `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]`.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut denom = diag[0];
    if denom == 0.0 {
        return Err(Error::LinearSolveFailure("zero pivot in row 0".into()));
    }
    c[0] = upper[0] / denom;
    d[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag[i] - lower[i] * c[i - 1];
        if denom == 0.0 || !denom.is_finite() {
            return Err(Error::LinearSolveFailure(format!("zero pivot in row {i}")));
        }
        c[i] = if i + 1 < n { upper[i] / denom } else { 0.0 };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / denom;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thomas_matches_dense() {
        let lower = [0.0, -1.0, -1.0, -1.0];
        let diag = [4.0, 4.0, 4.0, 4.0];
        let upper = [-1.0, -1.0, -2.0, 0.0];
        let x_true = [1.0, -2.0, 0.5, 3.0];
        let rhs: Vec<f64> = (0..4)
            .map(|i| {
                let mut s = diag[i] * x_true[i];
                if i > 0 {
                    s += lower[i] * x_true[i - 1];
                }
                if i < 3 {
                    s += upper[i] * x_true[i + 1];
                }
                s
            })
            .collect();
        let x = solve_tridiagonal(&lower, &diag, &upper, &rhs).unwrap();
        for i in 0..4 {
            assert!((x[i] - x_true[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn bicgstab_on_nonsymmetric_convection_diffusion() {
        let n = 200;
        let h = 1.0 / (n + 1) as f64;
        let mut a = Csr::with_capacity(n, 3 * n);
        let mut row = Vec::new();
        for i in 0..n {
            let (diff, conv) = (1.0 / (h * h), 5.0 / (2.0 * h));
            if i > 0 {
                row.push((i - 1, diff + conv));
            }
            row.push((i, -2.0 * diff));
            if i + 1 < n {
                row.push((i + 1, diff - conv));
            }
            a.push_row(&mut row);
        }
        let x_true: Vec<f64> = (0..n).map(|i| ((i + 1) as f64 * h * 3.0).sin()).collect();
        let mut b = vec![0.0; n];
        a.matvec(&x_true, &mut b);
        let mut x = vec![0.0; n];
        let stats = bicgstab(&a, &b, &mut x, 1e-12, 5000).unwrap();
        assert!(stats.relative_residual <= 1e-12);
        let err = x.iter().zip(&x_true).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn dot_is_independent_of_thread_count() {
        let a: Vec<f64> = (0..100_000).map(|i| ((i * 7919) % 1000) as f64 * 1e-3 + 1e-9 * i as f64).collect();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| dot(&a, &a));
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(|| dot(&a, &a));
        assert_eq!(one.to_bits(), four.to_bits());
    }
}

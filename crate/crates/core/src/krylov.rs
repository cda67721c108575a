//! Sparse row-compressed matrices and restarted GMRES with right Jacobi preconditioning.
//!
//! Reductions are computed on fixed-size chunks and combined in index order, so
//! results do not depend on the number of threads.

use rayon::prelude::*;

use crate::error::{Error, Result};

const CHUNK: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub rows: usize,
    pub cols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from per-row entries; duplicate columns within a row are summed.
    pub fn from_rows(cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut r in rows.iter().cloned() {
            r.sort_by_key(|&(c, _)| c);
            let mut last: Option<usize> = None;
            for (c, v) in r {
                debug_assert!(c < cols);
                if last == Some(c) {
                    *values.last_mut().expect("entry") += v;
                } else {
                    col_idx.push(c);
                    values.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            rows: rows.len(),
            cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        y.par_iter_mut().enumerate().for_each(|(r, out)| {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *out = acc;
        });
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.rows];
        self.matvec(x, &mut y);
        y
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows)
            .map(|r| {
                (self.row_ptr[r]..self.row_ptr[r + 1])
                    .find(|&k| self.col_idx[k] == r)
                    .map(|k| self.values[k])
                    .unwrap_or(0.0)
            })
            .collect()
    }
}

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

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.par_iter_mut()
        .zip(x.par_iter())
        .for_each(|(yi, xi)| *yi += alpha * xi);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresConfig {
    pub tol: f64,
    pub max_iters: usize,
    pub restart: usize,
}

impl Default for GmresConfig {
    fn default() -> Self {
        GmresConfig {
            tol: 1e-12,
            max_iters: 4000,
            restart: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KrylovOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Solves `A x = b` to `‖b - A x‖ ≤ tol ‖b‖` from `x = 0`.
pub fn gmres(a: &CsrMatrix, b: &[f64], cfg: &GmresConfig) -> Result<KrylovOutcome> {
    let n = b.len();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok(KrylovOutcome {
            x: vec![0.0; n],
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    // zero diagonal entries (constraint rows) are left unscaled
    let minv: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d != 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let m = cfg.restart.max(1);
    let mut x = vec![0.0; n];
    let mut iterations = 0;
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];

    while iterations < cfg.max_iters {
        let ax = a.mul(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
        let beta = norm(&r);
        if beta / bnorm <= cfg.tol {
            break;
        }
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut h = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            if iterations >= cfg.max_iters {
                break;
            }
            iterations += 1;
            z.par_iter_mut()
                .zip(basis[k].par_iter())
                .zip(minv.par_iter())
                .for_each(|((zi, vi), mi)| *zi = vi * mi);
            a.matvec(&z, &mut w);
            for (j, vj) in basis.iter().enumerate() {
                let hj = dot(&w, vj);
                h[j][k] = hj;
                axpy(-hj, vj, &mut w);
            }
            let hn = norm(&w);
            h[k + 1][k] = hn;
            for j in 0..k {
                let t = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let d = h[k][k].hypot(h[k + 1][k]);
            if d == 0.0 {
                k_used = k;
                break;
            }
            cs[k] = h[k][k] / d;
            sn[k] = h[k + 1][k] / d;
            h[k][k] = d;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            if g[k + 1].abs() / bnorm <= cfg.tol || hn == 0.0 {
                break;
            }
            basis.push(w.iter().map(|v| v / hn).collect());
        }
        // back substitution for the projected least-squares problem
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        let mut update = vec![0.0; n];
        for (j, yj) in y.iter().enumerate() {
            axpy(*yj, &basis[j], &mut update);
        }
        x.par_iter_mut()
            .zip(update.par_iter())
            .zip(minv.par_iter())
            .for_each(|((xi, ui), mi)| *xi += ui * mi);
        if k_used == 0 {
            break;
        }
    }
    let ax = a.mul(&x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
    let rel = norm(&r) / bnorm;
    if rel <= cfg.tol {
        Ok(KrylovOutcome {
            x,
            iterations,
            relative_residual: rel,
        })
    } else {
        Err(Error::LinearSolveFailure {
            iterations,
            relative_residual: rel,
        })
    }
}

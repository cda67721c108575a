//! Uniform grids on the unit torus `(ℝ/ℤ)^{2n}` or the unit box `[0,1]^{2n}`,
//! with real coordinates `(x_1..x_n, y_1..y_n)`, `z_i = x_i + √-1 y_i`.
//!
//! Periodic axes with `s` points have spacing `1/s`; box axes with `s` points
//! have spacing `1/(s-1)` and include both faces.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermitian::{relative_spectrum, HermitianMatrix, DEGENERATE_EIGENVALUE};

pub const MIN_AXIS_POINTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    Periodic,
    Box,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    n: usize,
    shape: Vec<usize>,
    spacing: Vec<f64>,
    topology: Topology,
    strides: Vec<usize>,
    len: usize,
}

/// Stencil entries `(flat index, weight)`.
pub type Stencil = Vec<(usize, f64)>;

impl Grid {
    pub fn new(n: usize, shape: &[usize], topology: Topology) -> Result<Arc<Self>> {
        if n == 0 || shape.len() != 2 * n {
            return Err(Error::DimensionMismatch(format!(
                "grid for n = {n} needs {} axes, got {}",
                2 * n,
                shape.len()
            )));
        }
        if let Some(&s) = shape.iter().find(|&&s| s < MIN_AXIS_POINTS) {
            return Err(Error::GridTooSmall { points: s });
        }
        let spacing = shape
            .iter()
            .map(|&s| match topology {
                Topology::Periodic => 1.0 / s as f64,
                Topology::Box => 1.0 / (s - 1) as f64,
            })
            .collect();
        let mut strides = vec![1; 2 * n];
        for a in (0..2 * n - 1).rev() {
            strides[a] = strides[a + 1] * shape[a + 1];
        }
        Ok(Arc::new(Grid {
            n,
            shape: shape.to_vec(),
            spacing,
            topology,
            strides,
            len: shape.iter().product(),
        }))
    }

    /// `s` points on every axis.
    pub fn uniform(n: usize, s: usize, topology: Topology) -> Result<Arc<Self>> {
        Self::new(n, &vec![s; 2 * n], topology)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn multi_index(&self, p: usize) -> Vec<usize> {
        (0..2 * self.n)
            .map(|a| (p / self.strides[a]) % self.shape[a])
            .collect()
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(k, s)| k * s).sum()
    }

    fn axis_index(&self, p: usize, a: usize) -> usize {
        (p / self.strides[a]) % self.shape[a]
    }

    /// Real coordinates of point `p`.
    pub fn coords(&self, p: usize) -> Vec<f64> {
        (0..2 * self.n)
            .map(|a| self.axis_index(p, a) as f64 * self.spacing[a])
            .collect()
    }

    pub fn is_boundary(&self, p: usize) -> bool {
        self.topology == Topology::Box
            && (0..2 * self.n).any(|a| {
                let k = self.axis_index(p, a);
                k == 0 || k + 1 == self.shape[a]
            })
    }

    pub fn boundary_points(&self) -> Vec<usize> {
        (0..self.len).filter(|&p| self.is_boundary(p)).collect()
    }

    fn shift(&self, p: usize, a: usize, off: isize) -> usize {
        let s = self.shape[a] as isize;
        let k = self.axis_index(p, a) as isize;
        let mut t = k + off;
        if self.topology == Topology::Periodic {
            t = t.rem_euclid(s);
        }
        debug_assert!((0..s).contains(&t));
        (p as isize + (t - k) * self.strides[a] as isize) as usize
    }

    fn first_weights(&self, p: usize, a: usize) -> [(isize, f64); 3] {
        let h2 = 2.0 * self.spacing[a];
        let k = self.axis_index(p, a);
        let last = self.shape[a] - 1;
        if self.topology == Topology::Box && k == 0 {
            [(0, -3.0 / h2), (1, 4.0 / h2), (2, -1.0 / h2)]
        } else if self.topology == Topology::Box && k == last {
            [(0, 3.0 / h2), (-1, -4.0 / h2), (-2, 1.0 / h2)]
        } else {
            [(-1, -1.0 / h2), (1, 1.0 / h2), (0, 0.0)]
        }
    }

    fn second_weights(&self, p: usize, a: usize) -> [(isize, f64); 4] {
        let hh = self.spacing[a] * self.spacing[a];
        let k = self.axis_index(p, a);
        let last = self.shape[a] - 1;
        if self.topology == Topology::Box && k == 0 {
            [(0, 2.0 / hh), (1, -5.0 / hh), (2, 4.0 / hh), (3, -1.0 / hh)]
        } else if self.topology == Topology::Box && k == last {
            [
                (0, 2.0 / hh),
                (-1, -5.0 / hh),
                (-2, 4.0 / hh),
                (-3, -1.0 / hh),
            ]
        } else {
            [(-1, 1.0 / hh), (0, -2.0 / hh), (1, 1.0 / hh), (0, 0.0)]
        }
    }

    /// Weights of `∂_{x_a}` at `p`: centered, one-sided second order on box faces.
    pub fn first_stencil(&self, p: usize, a: usize) -> Stencil {
        self.first_weights(p, a)
            .iter()
            .filter(|(_, w)| *w != 0.0)
            .map(|&(o, w)| (self.shift(p, a, o), w))
            .collect()
    }

    /// Weights of `∂_{x_a}∂_{x_b}` at `p`; mixed derivatives compose first-derivative stencils.
    pub fn second_stencil(&self, p: usize, a: usize, b: usize) -> Stencil {
        if a == b {
            return self
                .second_weights(p, a)
                .iter()
                .filter(|(_, w)| *w != 0.0)
                .map(|&(o, w)| (self.shift(p, a, o), w))
                .collect();
        }
        let mut out = Vec::with_capacity(9);
        for (q, wa) in self.first_stencil(p, a) {
            for &(o, wb) in self.first_weights(p, b).iter().filter(|(_, w)| *w != 0.0) {
                out.push((self.shift(q, b, o), wa * wb));
            }
        }
        out
    }

    fn apply(stencil: &Stencil, u: &[f64]) -> f64 {
        stencil.iter().map(|&(q, w)| w * u[q]).sum()
    }

    /// Real gradient `(∂_{x_a} u)` at `p`.
    pub fn real_gradient(&self, u: &[f64], p: usize) -> Vec<f64> {
        (0..2 * self.n)
            .map(|a| Self::apply(&self.first_stencil(p, a), u))
            .collect()
    }

    /// Symmetric real Hessian `(∂_{x_a}∂_{x_b} u)` at `p`, row-major `2n × 2n`.
    pub fn real_hessian(&self, u: &[f64], p: usize) -> Vec<f64> {
        let m = 2 * self.n;
        let mut out = vec![0.0; m * m];
        for a in 0..m {
            for b in a..m {
                let v = Self::apply(&self.second_stencil(p, a, b), u);
                out[a * m + b] = v;
                out[b * m + a] = v;
            }
        }
        out
    }

    /// Real `2n × 2n` coefficients `A` with `tr(F · Hess_ℂ v) = Σ_ab A_ab ∂_a∂_b v`
    /// for the discrete complex Hessian, so operators built from `A` are exactly
    /// the linearization of stencil-based residuals.
    pub fn hessian_trace_coefficients(&self, f: &HermitianMatrix) -> Vec<f64> {
        let n = self.n;
        let m = 2 * n;
        let mut a = vec![0.0; m * m];
        for i in 0..n {
            for j in 0..n {
                // F_{ji} H_{ij}, H_{ij} = ¼[(D_{i,j} + D_{n+i,n+j}) + √-1 (D_{i,n+j} - D_{n+i,j})]
                let w = f.get(j, i) * 0.25;
                a[i * m + j] += w.re;
                a[(n + i) * m + n + j] += w.re;
                a[i * m + n + j] -= w.im;
                a[(n + i) * m + j] += w.im;
            }
        }
        // D_ab = D_ba, so only the symmetric part matters
        for x in 0..m {
            for y in x + 1..m {
                let s = 0.5 * (a[x * m + y] + a[y * m + x]);
                a[x * m + y] = s;
                a[y * m + x] = s;
            }
        }
        a
    }

    /// Complex gradient `u_i = ½(∂_{x_i} - √-1 ∂_{y_i}) u` at `p`.
    pub fn complex_gradient(&self, u: &[f64], p: usize) -> Vec<Complex64> {
        let d = self.real_gradient(u, p);
        (0..self.n)
            .map(|i| Complex64::new(0.5 * d[i], -0.5 * d[self.n + i]))
            .collect()
    }

    /// Discrete `u_{ij̄}` at `p`.
    pub fn complex_hessian_at(&self, u: &[f64], p: usize) -> HermitianMatrix {
        let n = self.n;
        let m = 2 * n;
        let h = self.real_hessian(u, p);
        HermitianMatrix::from_upper_fn(n, |i, j| {
            let re = h[i * m + j] + h[(n + i) * m + n + j];
            let im = h[i * m + n + j] - h[(n + i) * m + j];
            Complex64::new(0.25 * re, 0.25 * im)
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: Arc<Grid>,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: &Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "field has {} values, grid has {} points",
                values.len(),
                grid.len()
            )));
        }
        Ok(ScalarField {
            grid: grid.clone(),
            values,
        })
    }

    pub fn constant(grid: &Arc<Grid>, c: f64) -> Self {
        ScalarField {
            grid: grid.clone(),
            values: vec![c; grid.len()],
        }
    }

    /// Samples `f` at the real coordinates of every point.
    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(&[f64]) -> f64 + Sync) -> Self {
        let values = (0..grid.len())
            .into_par_iter()
            .map(|p| f(&grid.coords(p)))
            .collect();
        ScalarField {
            grid: grid.clone(),
            values,
        }
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Grid average, summed in index order.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        ScalarField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        ScalarField {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HermitianField {
    pub grid: Arc<Grid>,
    pub values: Vec<HermitianMatrix>,
}

impl HermitianField {
    pub fn new(grid: &Arc<Grid>, values: Vec<HermitianMatrix>) -> Result<Self> {
        if values.len() != grid.len() || values.iter().any(|h| h.dim() != grid.n()) {
            return Err(Error::DimensionMismatch(format!(
                "hermitian field does not match grid with {} points and n = {}",
                grid.len(),
                grid.n()
            )));
        }
        Ok(HermitianField {
            grid: grid.clone(),
            values,
        })
    }

    pub fn constant(grid: &Arc<Grid>, h: &HermitianMatrix) -> Self {
        HermitianField {
            grid: grid.clone(),
            values: vec![h.clone(); grid.len()],
        }
    }

    pub fn identity(grid: &Arc<Grid>) -> Self {
        Self::constant(grid, &HermitianMatrix::identity(grid.n()))
    }

    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(&[f64]) -> HermitianMatrix + Sync) -> Self {
        let values = (0..grid.len())
            .into_par_iter()
            .map(|p| f(&grid.coords(p)))
            .collect();
        HermitianField {
            grid: grid.clone(),
            values,
        }
    }
}

fn check_same_grid(a: &Arc<Grid>, b: &Arc<Grid>) -> Result<()> {
    if Arc::ptr_eq(a, b) || **a == **b {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(
            "fields live on different grids".into(),
        ))
    }
}

/// Discrete `u_{ij̄}` at every point.
pub fn complex_hessian(u: &ScalarField) -> HermitianField {
    let g = &u.grid;
    let values = (0..g.len())
        .into_par_iter()
        .map(|p| g.complex_hessian_at(&u.values, p))
        .collect();
    HermitianField {
        grid: g.clone(),
        values,
    }
}

/// `𝔤 = χ + u_{ij̄}` and the smallest eigenvalue of `𝔤` over the grid.
pub fn gfrak_field(chi: &HermitianField, u: &ScalarField) -> Result<(HermitianField, f64)> {
    check_same_grid(&chi.grid, &u.grid)?;
    let hess = complex_hessian(u);
    let values: Vec<HermitianMatrix> = chi
        .values
        .par_iter()
        .zip(hess.values.par_iter())
        .map(|(c, h)| c.add(h))
        .collect();
    let margins: Vec<f64> = values
        .par_iter()
        .map(|m| m.eigenvalues().last().copied().unwrap_or(f64::NAN))
        .collect();
    let margin = margins.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((
        HermitianField {
            grid: chi.grid.clone(),
            values,
        },
        margin,
    ))
}

/// Smallest relative eigenvalue of `(a, g)` over the given points, with its location.
pub fn min_relative_margin(
    a: &HermitianField,
    g: &HermitianField,
    points: &[usize],
) -> Result<(f64, usize)> {
    check_same_grid(&a.grid, &g.grid)?;
    let margins: Vec<Result<f64>> = points
        .par_iter()
        .map(|&p| Ok(relative_spectrum(&a.values[p], &g.values[p])?.min()))
        .collect();
    let mut best = (f64::INFINITY, points.first().copied().unwrap_or(0));
    for (&p, m) in points.iter().zip(margins) {
        let m = m?;
        if m < best.0 || m.is_nan() {
            best = (m, p);
        }
    }
    Ok(best)
}

/// `tr(𝔤⁻¹ g) - n/ψ` pointwise.
pub fn residual_field(
    gfrak: &HermitianField,
    g: &HermitianField,
    psi: &ScalarField,
) -> Result<ScalarField> {
    check_same_grid(&gfrak.grid, &g.grid)?;
    check_same_grid(&gfrak.grid, &psi.grid)?;
    let grid = &gfrak.grid;
    let nf = grid.n() as f64;
    let values: Result<Vec<f64>> = (0..grid.len())
        .into_par_iter()
        .map(|p| {
            let s = relative_spectrum(&gfrak.values[p], &g.values[p])?;
            if s.min() <= DEGENERATE_EIGENVALUE {
                return Err(Error::PositivityLost {
                    location: Some(grid.multi_index(p)),
                });
            }
            Ok(s.values.iter().map(|l| 1.0 / l).sum::<f64>() - nf / psi.values[p])
        })
        .collect();
    Ok(ScalarField {
        grid: grid.clone(),
        values: values?,
    })
}

/// Chern Laplacian `g^{ij̄} u_{ij̄}` from the real Hessian contracted with
/// coefficients of `g⁻¹`, without forming `u_{ij̄}`.
pub fn laplacian(u: &ScalarField, g: &HermitianField) -> Result<ScalarField> {
    check_same_grid(&u.grid, &g.grid)?;
    let grid = &u.grid;
    let m = 2 * grid.n();
    let values: Result<Vec<f64>> = (0..grid.len())
        .into_par_iter()
        .map(|p| {
            let ginv = g.values[p].inverse().ok_or(Error::NonPositiveMetric {
                min_eigenvalue: 0.0,
            })?;
            let a = grid.hessian_trace_coefficients(&ginv);
            let h = grid.real_hessian(&u.values, p);
            Ok(a.iter().zip(&h).take(m * m).map(|(x, y)| x * y).sum())
        })
        .collect();
    Ok(ScalarField {
        grid: grid.clone(),
        values: values?,
    })
}

/// `|∇u|² = g^{ij̄} u_i u_j̄`.
pub fn gradient_norm_sq(u: &ScalarField, g: &HermitianField) -> Result<ScalarField> {
    check_same_grid(&u.grid, &g.grid)?;
    let grid = &u.grid;
    let n = grid.n();
    let values: Result<Vec<f64>> = (0..grid.len())
        .into_par_iter()
        .map(|p| {
            let ginv = g.values[p].inverse().ok_or(Error::NonPositiveMetric {
                min_eigenvalue: 0.0,
            })?;
            let du = grid.complex_gradient(&u.values, p);
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..n {
                for j in 0..n {
                    // g^{ij̄} = (G⁻¹)_{ji}
                    acc += ginv.get(j, i) * du[i] * du[j].conj();
                }
            }
            Ok(acc.re)
        })
        .collect();
    Ok(ScalarField {
        grid: grid.clone(),
        values: values?,
    })
}

/// `tr(g⁻¹ χ)` pointwise.
pub fn trace_field(chi: &HermitianField, g: &HermitianField) -> Result<ScalarField> {
    check_same_grid(&chi.grid, &g.grid)?;
    let values: Result<Vec<f64>> = chi
        .values
        .par_iter()
        .zip(g.values.par_iter())
        .map(|(c, gm)| {
            let ginv = gm.inverse().ok_or(Error::NonPositiveMetric {
                min_eigenvalue: 0.0,
            })?;
            Ok(ginv.trace_product(c))
        })
        .collect();
    Ok(ScalarField {
        grid: chi.grid.clone(),
        values: values?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub osc: f64,
    pub grad_max: f64,
    pub lap_max: f64,
    pub w_max: f64,
    pub w_min: f64,
    /// `min (u - u̲)`.
    pub sub_gap_min: f64,
    pub boundary_grad_max: Option<f64>,
    pub boundary_lap_max: Option<f64>,
    /// `W = tr_g χ + Δu`.
    #[serde(skip)]
    pub w_field: Option<ScalarField>,
}

/// Oscillation, `max |∇u|`, `max |Δu|`, `W` and their boundary maxima on box grids.
pub fn diagnostics(
    u: &ScalarField,
    chi: &HermitianField,
    g: &HermitianField,
    usub: &ScalarField,
) -> Result<Diagnostics> {
    check_same_grid(&u.grid, &usub.grid)?;
    let grad = gradient_norm_sq(u, g)?;
    let lap = laplacian(u, g)?;
    let w = trace_field(chi, g)?.zip_map(&lap, |a, b| a + b);
    let grid = &u.grid;
    let (bg, bl) = if grid.topology() == Topology::Box {
        let pts = grid.boundary_points();
        let bg = pts
            .iter()
            .fold(0.0f64, |m, &p| m.max(grad.values[p].max(0.0).sqrt()));
        let bl = pts.iter().fold(0.0f64, |m, &p| m.max(lap.values[p].abs()));
        (Some(bg), Some(bl))
    } else {
        (None, None)
    };
    Ok(Diagnostics {
        osc: u.max() - u.min(),
        grad_max: grad
            .values
            .iter()
            .fold(0.0f64, |m, &v| m.max(v.max(0.0).sqrt())),
        lap_max: lap.sup_norm(),
        w_max: w.max(),
        w_min: w.min(),
        sub_gap_min: u.zip_map(usub, |a, b| a - b).min(),
        boundary_grad_max: bg,
        boundary_lap_max: bl,
        w_field: Some(w),
    })
}

/// Subtracts the grid average.
pub fn mean_zero(u: &ScalarField) -> Result<ScalarField> {
    if u.grid.topology() != Topology::Periodic {
        return Err(Error::BoxGridUnsupported);
    }
    let m = u.mean();
    Ok(u.map(|v| v - m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn small_axes_are_rejected() {
        assert_eq!(
            Grid::new(2, &[8, 8, 3, 8], Topology::Periodic).unwrap_err(),
            Error::GridTooSmall { points: 3 }
        );
        assert!(Grid::new(2, &[8, 8, 8], Topology::Box).is_err());
    }

    #[test]
    fn index_roundtrip_and_box_faces() {
        let g = Grid::new(2, &[4, 5, 6, 7], Topology::Box).unwrap();
        for p in [0, 17, 301, g.len() - 1] {
            assert_eq!(g.flat_index(&g.multi_index(p)), p);
        }
        assert!(g.is_boundary(0));
        let inner = g.flat_index(&[1, 2, 3, 4]);
        assert!(!g.is_boundary(inner));
        assert_eq!(g.coords(g.len() - 1), vec![1.0; 4]);
        // 4·5·6·7 minus the 2·3·4·5 interior
        assert_eq!(g.boundary_points().len(), 840 - 120);
    }

    #[test]
    fn pluriharmonic_pairing_has_constant_imaginary_entry() {
        // u = x_1 y_2 - y_1 x_2: ∂_1∂̄_2 u = ¼·√-1·(∂_{x1}∂_{y2} - ∂_{y1}∂_{x2}) u = √-1/2
        for topo in [Topology::Box, Topology::Periodic] {
            let g = Grid::uniform(2, 6, topo).unwrap();
            let u = ScalarField::from_fn(&g, |x| x[0] * x[3] - x[2] * x[1]);
            let h = complex_hessian(&u);
            let pts: Vec<usize> = if topo == Topology::Box {
                (0..g.len()).collect()
            } else {
                // the pairing is not periodic; only points away from the wrap see it
                (0..g.len())
                    .filter(|&p| g.multi_index(p).iter().all(|&k| k > 0 && k < 5))
                    .collect()
            };
            for p in pts {
                let m = &h.values[p];
                assert!((m.get(0, 1) - c(0.0, 0.5)).norm() < 1e-12);
                assert!((m.get(1, 0) - c(0.0, -0.5)).norm() < 1e-12);
                assert!(m.get(0, 0).norm() < 1e-12 && m.get(1, 1).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn sine_hessian_converges_at_second_order() {
        let err = |s: usize| {
            let g = Grid::uniform(2, s, Topology::Periodic).unwrap();
            let u = ScalarField::from_fn(&g, |x| (2.0 * PI * x[0]).sin());
            let h = complex_hessian(&u);
            let mut e = 0.0f64;
            for p in 0..g.len() {
                let x = g.coords(p);
                let want = -PI * PI * (2.0 * PI * x[0]).sin();
                e = e.max((h.values[p].get(0, 0).re - want).abs());
                e = e
                    .max(h.values[p].get(0, 1).norm())
                    .max(h.values[p].get(1, 1).norm());
            }
            e
        };
        let ratio = err(8) / err(16);
        assert!((3.0..=5.0).contains(&ratio), "{ratio}");
    }

    #[test]
    fn one_sided_boundary_stencils_are_exact_on_quadratics() {
        let g = Grid::uniform(2, 5, Topology::Box).unwrap();
        let u = ScalarField::from_fn(&g, |x| 1.5 * x[0] * x[0] - x[1] * x[2] + 0.3 * x[3]);
        for p in g.boundary_points() {
            let d = g.real_gradient(&u.values, p);
            let x = g.coords(p);
            assert!((d[0] - 3.0 * x[0]).abs() < 1e-12);
            assert!((d[3] - 0.3).abs() < 1e-12);
            let h = g.real_hessian(&u.values, p);
            assert!((h[0] - 3.0).abs() < 1e-10);
            assert!((h[4 + 2] + 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn gfrak_margin_examples() {
        let g = Grid::uniform(2, 8, Topology::Periodic).unwrap();
        let u = ScalarField::from_fn(&g, |x| 0.1 * (2.0 * PI * x[0]).sin());
        let chi = HermitianField::constant(&g, &HermitianMatrix::identity(2).scale(2.0));
        let (_, m) = gfrak_field(&chi, &u).unwrap();
        assert!(m >= 2.0 - 0.1 * PI * PI && m < 2.0);
        let u = ScalarField::from_fn(&g, |x| (2.0 * PI * x[0]).sin());
        let (_, m) = gfrak_field(&HermitianField::identity(&g), &u).unwrap();
        assert!(m < 0.0);
    }

    #[test]
    fn residual_vanishes_for_scaled_metric() {
        let g = Grid::uniform(2, 4, Topology::Periodic).unwrap();
        let metric = HermitianField::identity(&g);
        let r = residual_field(
            &HermitianField::constant(&g, &HermitianMatrix::identity(2).scale(2.0)),
            &metric,
            &ScalarField::constant(&g, 2.0),
        )
        .unwrap();
        assert_eq!(r.sup_norm(), 0.0);
        let bad = HermitianField::constant(&g, &HermitianMatrix::diagonal(&[1.0, -1.0]));
        assert!(matches!(
            residual_field(&bad, &metric, &ScalarField::constant(&g, 1.0)),
            Err(Error::PositivityLost { location: Some(_) })
        ));
    }

    #[test]
    fn laplacian_two_paths_agree() {
        let g = Grid::uniform(2, 6, Topology::Box).unwrap();
        let u = ScalarField::from_fn(&g, |x| {
            (x[0] * x[3] + 2.0 * x[1]).sin() + x[2] * x[2] * x[0]
        });
        let metric = HermitianField::from_fn(&g, |x| {
            HermitianMatrix::from_upper_fn(2, |i, j| {
                if i == j {
                    c(1.0 + 0.3 * x[i] + 0.2 * i as f64, 0.0)
                } else {
                    c(0.2 * x[1], -0.1 * x[2])
                }
            })
        });
        let lap = laplacian(&u, &metric).unwrap();
        let h = complex_hessian(&u);
        for p in 0..g.len() {
            let via_hessian = metric.values[p]
                .inverse()
                .unwrap()
                .trace_product(&h.values[p]);
            assert!((lap.values[p] - via_hessian).abs() < 1e-12);
        }
    }

    #[test]
    fn sine_gradient_and_laplacian() {
        let g = Grid::uniform(2, 32, Topology::Periodic).unwrap();
        let u = ScalarField::from_fn(&g, |x| (2.0 * PI * x[0]).sin());
        let metric = HermitianField::identity(&g);
        let gr = gradient_norm_sq(&u, &metric).unwrap();
        let lap = laplacian(&u, &metric).unwrap();
        for p in 0..g.len() {
            let x = g.coords(p)[0];
            // O(h²) with h = 1/32 is about 1.5% of π² here
            assert!((gr.values[p] - (PI * (2.0 * PI * x).cos()).powi(2)).abs() < 0.2);
            assert!((lap.values[p] + PI * PI * (2.0 * PI * x).sin()).abs() < 0.1);
        }
        let d = diagnostics(&ScalarField::constant(&g, 3.0), &metric, &metric, &u).unwrap();
        assert_eq!((d.osc, d.grad_max, d.lap_max), (0.0, 0.0, 0.0));
        assert!(d.boundary_grad_max.is_none());
    }

    #[test]
    fn mean_zero_examples() {
        let g = Grid::uniform(2, 8, Topology::Periodic).unwrap();
        let u = ScalarField::from_fn(&g, |x| 3.0 + (2.0 * PI * x[0]).sin());
        let z = mean_zero(&u).unwrap();
        for p in 0..g.len() {
            assert!((z.values[p] - (2.0 * PI * g.coords(p)[0]).sin()).abs() < 1e-14);
        }
        let twice = mean_zero(&z).unwrap();
        for (a, b) in twice.values.iter().zip(&z.values) {
            assert!((a - b).abs() < 1e-13);
        }
        assert_eq!(
            mean_zero(&ScalarField::constant(&g, 5.0))
                .unwrap()
                .sup_norm(),
            0.0
        );
        let b = Grid::uniform(2, 4, Topology::Box).unwrap();
        assert_eq!(
            mean_zero(&ScalarField::constant(&b, 1.0)).unwrap_err(),
            Error::BoxGridUnsupported
        );
    }
}

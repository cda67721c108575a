//! Chern connection, torsion and curvature of a Hermitian metric given by
//! Taylor jets, covariant derivatives of scalars up to fourth order, and the
//! residuals of the commutation formulas for those derivatives.
//!
//! Index conventions: `g_{ij̄}` is stored at `[i][j]`; `g^{kl̄}` is the inverse
//! in the sense `g^{kl̄} g_{jl̄} = δ_kj`; `Γ^k_{ij} = g^{kl̄} ∂_i g_{jl̄}` with `i`
//! the differentiation slot; `v_{ij̄k} = ∂_k v_{ij̄} - Γ^l_{ki} v_{lj̄}`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermitian::HermitianMatrix;
use crate::jet::TaylorJet;

fn czero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

/// Coefficients `g_{ij̄}` of a Hermitian metric as jets about a base point.
#[derive(Debug, Clone)]
pub struct MetricJet {
    n: usize,
    g: Vec<TaylorJet>,
}

impl MetricJet {
    /// `entries` is row-major, `entries[i*n + j] = g_{ij̄}`.
    pub fn new(n: usize, entries: Vec<TaylorJet>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::DimensionMismatch(format!(
                "metric jet needs {} entries, got {}",
                n * n,
                entries.len()
            )));
        }
        let m = MetricJet { n, g: entries };
        for i in 0..n {
            for j in 0..n {
                let d = (&m.g[i * n + j] - &m.g[j * n + i].conj())
                    .coefficients()
                    .iter()
                    .map(|c| c.norm())
                    .fold(0.0, f64::max);
                if d > 1e-12 {
                    return Err(Error::DimensionMismatch(format!(
                        "metric jet is not Hermitian at ({i},{j}): defect {d:e}"
                    )));
                }
            }
        }
        let base = m.base_value();
        if crate::hermitian::cholesky_factor(&base).is_err() {
            return Err(Error::NonPositiveMetric {
                min_eigenvalue: base.eigenvalues().last().copied().unwrap_or(f64::NAN),
            });
        }
        Ok(m)
    }

    /// Builds the metric from `f(i, j)` for `i ≤ j`, filling the lower triangle with conjugate jets.
    pub fn from_upper(n: usize, mut f: impl FnMut(usize, usize) -> TaylorJet) -> Result<Self> {
        let mut slots: Vec<Option<TaylorJet>> = vec![None; n * n];
        for i in 0..n {
            for j in i..n {
                let e = f(i, j);
                if i == j {
                    // keep only the real part of the diagonal
                    let re = (&e + &e.conj()).scale_real(0.5);
                    slots[i * n + i] = Some(re);
                } else {
                    slots[j * n + i] = Some(e.conj());
                    slots[i * n + j] = Some(e);
                }
            }
        }
        Self::new(n, slots.into_iter().map(|s| s.expect("filled")).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> &TaylorJet {
        &self.g[i * self.n + j]
    }

    pub fn order(&self) -> usize {
        self.g.iter().map(|j| j.order()).min().unwrap_or(0)
    }

    pub fn base_value(&self) -> HermitianMatrix {
        let n = self.n;
        HermitianMatrix::from_upper_fn(n, |i, j| self.g[i * n + j].value())
    }

    /// `C g C†` for a constant matrix `C`, entrywise on jets. With `C = Aᵀ` this is
    /// the metric in coordinates `w`, `z = p + A w`, provided the entries are already
    /// jets in `w`.
    pub fn congruence(&self, c: &DMatrix<Complex64>) -> Result<Self> {
        let n = self.n;
        let mut out = Vec::with_capacity(n * n);
        let space = self.g[0].space().clone();
        for a in 0..n {
            for b in 0..n {
                let mut acc = TaylorJet::real(&space, 0.0);
                for i in 0..n {
                    for j in 0..n {
                        let coef = c[(a, i)] * c[(b, j)].conj();
                        if coef.norm() != 0.0 {
                            acc = &acc + &self.g[i * n + j].scale(coef);
                        }
                    }
                }
                out.push(acc);
            }
        }
        Self::new(n, out)
    }

    /// Jets of `g^{kl̄}` stored at `[k][l]`.
    fn inverse_jets(&self) -> Result<Vec<TaylorJet>> {
        let n = self.n;
        let space = self.g[0].space().clone();
        let base = DMatrix::from_fn(n, n, |i, j| self.g[i * n + j].value());
        let b_inv = base.try_inverse().ok_or(Error::NonPositiveMetric {
            min_eigenvalue: 0.0,
        })?;
        let order = self.order();
        // G = G₀ + G', G⁻¹ = Σ_k (-G₀⁻¹ G')^k G₀⁻¹, nilpotent past `order`
        let mut dev = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let mut e = self.g[i * n + j].clone();
                let v = e.value();
                e = &e - &TaylorJet::constant(&space, v);
                dev.push(e);
            }
        }
        let constant = |m: &DMatrix<Complex64>| -> Vec<TaylorJet> {
            (0..n * n)
                .map(|k| TaylorJet::constant(&space, m[(k / n, k % n)]).truncate(order))
                .collect()
        };
        let minus_b_inv = constant(&(-&b_inv));
        let step = matmul_jets(n, &minus_b_inv, &dev);
        let mut term = constant(&b_inv);
        let mut total = term.clone();
        for _ in 0..order {
            term = matmul_jets(n, &step, &term);
            for (t, x) in total.iter_mut().zip(&term) {
                *t = &*t + x;
            }
        }
        // matrix inverse H satisfies Σ_l G_{ml} H_{lk} = δ; g^{kl̄} is its transpose
        let mut out = Vec::with_capacity(n * n);
        for k in 0..n {
            for l in 0..n {
                out.push(total[l * n + k].clone());
            }
        }
        Ok(out)
    }
}

fn matmul_jets(n: usize, a: &[TaylorJet], b: &[TaylorJet]) -> Vec<TaylorJet> {
    let space = a[0].space().clone();
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = TaylorJet::real(&space, 0.0);
            for k in 0..n {
                acc = &acc + &(&a[i * n + k] * &b[k * n + j]);
            }
            out.push(acc);
        }
    }
    out
}

/// Dense complex tensor with `rank` indices of range `n`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub n: usize,
    pub rank: usize,
    pub data: Vec<Complex64>,
}

impl Tensor {
    pub fn zeros(n: usize, rank: usize) -> Self {
        Tensor {
            n,
            rank,
            data: vec![czero(); n.pow(rank as u32)],
        }
    }

    fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.rank);
        idx.iter().fold(0, |acc, &i| acc * self.n + i)
    }

    pub fn get(&self, idx: &[usize]) -> Complex64 {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: Complex64) {
        let o = self.offset(idx);
        self.data[o] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

fn for_each_index(n: usize, rank: usize, mut f: impl FnMut(&[usize])) {
    let mut idx = vec![0usize; rank];
    let total = n.pow(rank as u32);
    for _ in 0..total {
        f(&idx);
        for pos in (0..rank).rev() {
            idx[pos] += 1;
            if idx[pos] < n {
                break;
            }
            idx[pos] = 0;
        }
    }
}

/// Connection data at the base point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConnectionData {
    pub n: usize,
    /// `Γ^k_{ij}` at `[k, i, j]`.
    pub gamma: Tensor,
    /// `T^k_{ij}` at `[k, i, j]`.
    pub torsion: Tensor,
    /// `R_{ij̄kl̄}` at `[i, j, k, l]`.
    pub curvature: Tensor,
    /// `g^{pq̄}` at `[p, q]`.
    pub inverse_metric: Tensor,
}

/// Connection jets kept for covariant differentiation.
struct ConnectionJets {
    /// `Γ^k_{ij}` at `k*n*n + i*n + j`.
    gamma: Vec<TaylorJet>,
    inverse: Vec<TaylorJet>,
}

fn connection_jets(m: &MetricJet) -> Result<ConnectionJets> {
    let n = m.n;
    if m.order() < 1 {
        return Err(Error::InsufficientOrder {
            have: m.order(),
            need: 1,
        });
    }
    let inverse = m.inverse_jets()?;
    let space = m.g[0].space().clone();
    let mut dg = Vec::with_capacity(n * n * n); // ∂_i g_{jl̄} at i, j, l
    for i in 0..n {
        for j in 0..n {
            for l in 0..n {
                dg.push(m.entry(j, l).dz(i)?);
            }
        }
    }
    let mut gamma = Vec::with_capacity(n * n * n);
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut acc = TaylorJet::real(&space, 0.0);
                for l in 0..n {
                    acc = &acc + &(&inverse[k * n + l] * &dg[(i * n + j) * n + l]);
                }
                gamma.push(acc);
            }
        }
    }
    Ok(ConnectionJets { gamma, inverse })
}

/// Christoffel symbols, torsion and curvature at the base point.
pub fn connection(m: &MetricJet) -> Result<ConnectionData> {
    let n = m.n;
    if m.order() < 2 {
        return Err(Error::InsufficientOrder {
            have: m.order(),
            need: 2,
        });
    }
    let cj = connection_jets(m)?;
    let mut gamma = Tensor::zeros(n, 3);
    let mut torsion = Tensor::zeros(n, 3);
    for_each_index(n, 3, |idx| {
        let (k, i, j) = (idx[0], idx[1], idx[2]);
        gamma.set(idx, cj.gamma[(k * n + i) * n + j].value());
    });
    for_each_index(n, 3, |idx| {
        let (k, i, j) = (idx[0], idx[1], idx[2]);
        torsion.set(idx, gamma.get(&[k, i, j]) - gamma.get(&[k, j, i]));
    });
    let mut inverse_metric = Tensor::zeros(n, 2);
    for p in 0..n {
        for q in 0..n {
            inverse_metric.set(&[p, q], cj.inverse[p * n + q].value());
        }
    }
    // R_{ij̄kl̄} = -∂_i∂̄_j g_{kl̄} + g^{pq̄} ∂_i g_{kq̄} ∂̄_j g_{pl̄}
    let mut first = vec![czero(); n * n * n]; // ∂_i g_{kq̄} at (i, k, q)
    let mut first_bar = vec![czero(); n * n * n]; // ∂̄_j g_{pl̄} at (j, p, l)
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                first[(a * n + b) * n + c] = m.entry(b, c).dz(a)?.value();
                first_bar[(a * n + b) * n + c] = m.entry(b, c).dzbar(a)?.value();
            }
        }
    }
    let mut curvature = Tensor::zeros(n, 4);
    let mut err = None;
    for_each_index(n, 4, |idx| {
        let (i, j, k, l) = (idx[0], idx[1], idx[2], idx[3]);
        let second = match m.entry(k, l).dz(i).and_then(|d| d.dzbar(j)) {
            Ok(d) => d.value(),
            Err(e) => {
                err = Some(e);
                return;
            }
        };
        let mut acc = -second;
        for p in 0..n {
            for q in 0..n {
                acc += inverse_metric.get(&[p, q])
                    * first[(i * n + k) * n + q]
                    * first_bar[(j * n + p) * n + l];
            }
        }
        curvature.set(idx, acc);
    });
    if let Some(e) = err {
        return Err(e);
    }
    Ok(ConnectionData {
        n,
        gamma,
        torsion,
        curvature,
        inverse_metric,
    })
}

/// `R_{ij̄kl̄} = -g_{ml̄} ∂̄_j Γ^m_{ik}`, the Christoffel route to the curvature.
pub fn curvature_via_christoffel(m: &MetricJet) -> Result<Tensor> {
    let n = m.n;
    let cj = connection_jets(m)?;
    let mut out = Tensor::zeros(n, 4);
    let mut err = None;
    for_each_index(n, 4, |idx| {
        let (i, j, k, l) = (idx[0], idx[1], idx[2], idx[3]);
        let mut acc = czero();
        for mm in 0..n {
            match cj.gamma[(mm * n + i) * n + k].dzbar(j) {
                Ok(d) => acc -= m.entry(mm, l).value() * d.value(),
                Err(e) => err = Some(e),
            }
        }
        out.set(idx, acc);
    });
    match err {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

/// Covariant derivatives of a real scalar at the base point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CovariantDerivatives {
    pub n: usize,
    /// `v_{ij̄}` at `[i, j]`.
    pub v2: Tensor,
    /// `v_{ij̄k}` at `[i, j, k]`.
    pub v3: Tensor,
    /// `v_{ij̄k̄}` at `[i, j, k]`.
    pub v3_bar: Tensor,
    /// `v_{ij̄kl̄} = ∇_l̄ ∇_k v_{ij̄}` at `[i, j, k, l]`.
    pub v4: Tensor,
    /// `v_{ij̄l̄k} = ∇_k ∇_l̄ v_{ij̄}` at `[i, j, l, k]`.
    pub v4_swapped: Tensor,
}

/// `v_{ij̄}`, `v_{ij̄k}`, `v_{ij̄k̄}`, `v_{ij̄kl̄}` and `v_{ij̄l̄k}` for a scalar jet `v` of order ≥ 4.
pub fn covariant_derivatives(v: &TaylorJet, m: &MetricJet) -> Result<CovariantDerivatives> {
    let n = m.n;
    if v.order() < 4 {
        return Err(Error::InsufficientOrder {
            have: v.order(),
            need: 4,
        });
    }
    if m.order() < 2 {
        return Err(Error::InsufficientOrder {
            have: m.order(),
            need: 2,
        });
    }
    let cj = connection_jets(m)?;
    let gamma = |k: usize, i: usize, j: usize| &cj.gamma[(k * n + i) * n + j];
    let gamma_bar: Vec<TaylorJet> = cj.gamma.iter().map(|j| j.conj()).collect();
    let gamma_conj = |k: usize, i: usize, j: usize| &gamma_bar[(k * n + i) * n + j];

    // v_{ij̄} jets
    let mut a = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            a.push(v.dz(i)?.dzbar(j)?);
        }
    }
    let a_at = |i: usize, j: usize| &a[i * n + j];

    let mut b = Vec::with_capacity(n * n * n); // v_{ij̄k}
    let mut bb = Vec::with_capacity(n * n * n); // v_{ij̄k̄}
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let mut hol = a_at(i, j).dz(k)?;
                let mut anti = a_at(i, j).dzbar(k)?;
                for l in 0..n {
                    hol = &hol - &(gamma(l, k, i) * a_at(l, j));
                    anti = &anti - &(gamma_conj(l, k, j) * a_at(i, l));
                }
                b.push(hol);
                bb.push(anti);
            }
        }
    }
    let b_at = |i: usize, j: usize, k: usize| &b[(i * n + j) * n + k];
    let bb_at = |i: usize, j: usize, k: usize| &bb[(i * n + j) * n + k];

    let mut v2 = Tensor::zeros(n, 2);
    let mut v3 = Tensor::zeros(n, 3);
    let mut v3_bar = Tensor::zeros(n, 3);
    let mut v4 = Tensor::zeros(n, 4);
    let mut v4_swapped = Tensor::zeros(n, 4);
    for i in 0..n {
        for j in 0..n {
            v2.set(&[i, j], a_at(i, j).value());
            for k in 0..n {
                v3.set(&[i, j, k], b_at(i, j, k).value());
                v3_bar.set(&[i, j, k], bb_at(i, j, k).value());
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    // ∇_l̄ of v_{ij̄k}: only the antiholomorphic slot j̄ is corrected
                    let mut x = b_at(i, j, k).dzbar(l)?.value();
                    for q in 0..n {
                        x -= gamma_conj(q, l, j).value() * b_at(i, q, k).value();
                    }
                    v4.set(&[i, j, k, l], x);
                    // ∇_k of v_{ij̄l̄}: only the holomorphic slot i is corrected
                    let mut y = bb_at(i, j, l).dz(k)?.value();
                    for p in 0..n {
                        y -= gamma(p, k, i).value() * bb_at(p, j, l).value();
                    }
                    v4_swapped.set(&[i, j, l, k], y);
                }
            }
        }
    }
    Ok(CovariantDerivatives {
        n,
        v2,
        v3,
        v3_bar,
        v4,
        v4_swapped,
    })
}

/// Largest residual and largest term magnitude over all index tuples.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub max_residual: f64,
    pub term_scale: f64,
}

impl Residual {
    fn absorb(&mut self, residual: f64, scale: f64) {
        self.max_residual = self.max_residual.max(residual);
        self.term_scale = self.term_scale.max(scale);
    }

    pub fn merge(&mut self, other: &Residual) {
        self.absorb(other.max_residual, other.term_scale);
    }
}

/// Residuals of the commutation formulas at one base point.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CommutationResiduals {
    /// `v_{ij̄k} - v_{kj̄i} = T^l_{ik} v_{lj̄}` and `v_{ij̄k̄} - v_{ik̄j̄} = conj(T^l_{jk}) v_{il̄}`.
    pub third_order: Residual,
    /// `v_{ij̄kl̄} - v_{ij̄l̄k} = g^{pq̄} R_{kl̄iq̄} v_{pj̄} - g^{pq̄} R_{kl̄pj̄} v_{iq̄}`.
    pub fourth_order_mixed: Residual,
    /// `v_{ij̄kl̄} - v_{kl̄ij̄} = g^{pq̄}(R_{kl̄iq̄} v_{pj̄} - R_{ij̄kq̄} v_{pl̄})
    ///   + T^p_{ik} v_{pj̄l̄} + conj(T^q_{jl}) v_{iq̄k} - T^p_{ik} conj(T^q_{jl}) v_{pq̄}`.
    pub fourth_order_swap: Residual,
    /// The mixed formula with the curvature written `R_{pl̄kj̄}` in its second
    /// term; agrees with `fourth_order_mixed` only where `∂̄T = 0`.
    pub fourth_order_mixed_transposed: Residual,
}

impl CommutationResiduals {
    pub fn merge(&mut self, other: &CommutationResiduals) {
        self.third_order.merge(&other.third_order);
        self.fourth_order_mixed.merge(&other.fourth_order_mixed);
        self.fourth_order_swap.merge(&other.fourth_order_swap);
        self.fourth_order_mixed_transposed
            .merge(&other.fourth_order_mixed_transposed);
    }

    /// Worst residual among the three identities that hold for every Hermitian metric.
    pub fn max_residual(&self) -> f64 {
        self.third_order
            .max_residual
            .max(self.fourth_order_mixed.max_residual)
            .max(self.fourth_order_swap.max_residual)
    }
}

fn scale_of(terms: &[Complex64]) -> f64 {
    terms.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Evaluates every commutation formula for `v` on metric `m` at the base point.
pub fn commutation_residuals(v: &TaylorJet, m: &MetricJet) -> Result<CommutationResiduals> {
    let conn = connection(m)?;
    let d = covariant_derivatives(v, m)?;
    Ok(residuals_from(&conn, &d))
}

pub(crate) fn residuals_from(
    conn: &ConnectionData,
    d: &CovariantDerivatives,
) -> CommutationResiduals {
    let n = conn.n;
    let t = |k: usize, i: usize, j: usize| conn.torsion.get(&[k, i, j]);
    let r = |i: usize, j: usize, k: usize, l: usize| conn.curvature.get(&[i, j, k, l]);
    let ginv = |p: usize, q: usize| conn.inverse_metric.get(&[p, q]);
    let mut out = CommutationResiduals::default();

    for_each_index(n, 3, |idx| {
        let (i, j, k) = (idx[0], idx[1], idx[2]);
        let lhs = d.v3.get(&[i, j, k]) - d.v3.get(&[k, j, i]);
        let rhs: Complex64 = (0..n).map(|l| t(l, i, k) * d.v2.get(&[l, j])).sum();
        out.third_order
            .absorb((lhs - rhs).norm(), scale_of(&[lhs, rhs]));

        let lhs = d.v3_bar.get(&[i, j, k]) - d.v3_bar.get(&[i, k, j]);
        let rhs: Complex64 = (0..n).map(|l| t(l, j, k).conj() * d.v2.get(&[i, l])).sum();
        out.third_order
            .absorb((lhs - rhs).norm(), scale_of(&[lhs, rhs]));
    });

    for_each_index(n, 4, |idx| {
        let (i, j, k, l) = (idx[0], idx[1], idx[2], idx[3]);
        let v4 = d.v4.get(&[i, j, k, l]);
        let lhs = v4 - d.v4_swapped.get(&[i, j, l, k]);
        let mut first = czero();
        let mut second = czero();
        let mut second_transposed = czero();
        for p in 0..n {
            for q in 0..n {
                first += ginv(p, q) * r(k, l, i, q) * d.v2.get(&[p, j]);
                second += ginv(p, q) * r(k, l, p, j) * d.v2.get(&[i, q]);
                second_transposed += ginv(p, q) * r(p, l, k, j) * d.v2.get(&[i, q]);
            }
        }
        let rhs = first - second;
        out.fourth_order_mixed
            .absorb((lhs - rhs).norm(), scale_of(&[lhs, first, second]));
        let rhs_t = first - second_transposed;
        out.fourth_order_mixed_transposed.absorb(
            (lhs - rhs_t).norm(),
            scale_of(&[lhs, first, second_transposed]),
        );

        let lhs = v4 - d.v4.get(&[k, l, i, j]);
        let mut curv = czero();
        let mut tors = czero();
        for p in 0..n {
            for q in 0..n {
                curv += ginv(p, q)
                    * (r(k, l, i, q) * d.v2.get(&[p, j]) - r(i, j, k, q) * d.v2.get(&[p, l]));
                tors -= t(p, i, k) * t(q, j, l).conj() * d.v2.get(&[p, q]);
            }
            tors += t(p, i, k) * d.v3_bar.get(&[p, j, l]);
            tors += t(p, j, l).conj() * d.v3.get(&[i, p, k]);
        }
        let rhs = curv + tors;
        out.fourth_order_swap
            .absorb((lhs - rhs).norm(), scale_of(&[lhs, curv, tors]));
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{catalog, catalog_raw, METRICS};
    use crate::jet::JetSpace;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn flat_metric_has_no_connection() {
        let e = catalog("flat", &[0.2, 0.1, -0.3, 0.4]).unwrap();
        let conn = connection(&e.metric).unwrap();
        assert_eq!(conn.gamma.max_abs(), 0.0);
        assert_eq!(conn.curvature.max_abs(), 0.0);
        for (_, v) in &e.scalars {
            let r = commutation_residuals(v, &e.metric).unwrap();
            assert!(r.max_residual() < 1e-13);
        }
    }

    #[test]
    fn conformal_exp_torsion_at_unit_point() {
        let raw = catalog_raw("conformal-exp", &[1.0, 0.0, 0.0, 0.0]).unwrap();
        let conn = connection(&raw).unwrap();
        // Γ^k_{ij} = z̄_i δ_jk
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    let want = if j == k && i == 0 { 1.0 } else { 0.0 };
                    assert!((conn.gamma.get(&[k, i, j]) - c(want, 0.0)).norm() < 1e-13);
                }
            }
        }
        assert!((conn.torsion.get(&[1, 0, 1]) - c(1.0, 0.0)).norm() < 1e-13);
        // in normalized coordinates w = e^{1/2} z the torsion tensor picks up e^{-1/2}
        let e = catalog("conformal-exp", &[1.0, 0.0, 0.0, 0.0]).unwrap();
        let t = connection(&e.metric).unwrap().torsion.get(&[1, 0, 1]);
        assert!((t.re - (-0.5f64).exp()).abs() < 1e-13 && t.im.abs() < 1e-13);
    }

    #[test]
    fn torsion_antisymmetry_and_curvature_symmetry() {
        let p = [0.3, -0.5, 0.6, 0.2, -0.1, 0.45];
        for name in METRICS {
            let e = catalog(name, &p).unwrap();
            let conn = connection(&e.metric).unwrap();
            for_each_index(3, 3, |idx| {
                let s = conn.torsion.get(&[idx[0], idx[1], idx[2]])
                    + conn.torsion.get(&[idx[0], idx[2], idx[1]]);
                assert_eq!(s, czero());
            });
            for_each_index(3, 4, |idx| {
                let (i, j, k, l) = (idx[0], idx[1], idx[2], idx[3]);
                let d =
                    conn.curvature.get(&[i, j, k, l]) - conn.curvature.get(&[j, i, l, k]).conj();
                assert!(d.norm() < 1e-12, "{name}");
            });
        }
    }

    #[test]
    fn curvature_routes_agree() {
        let p = [-0.4, 0.25, 0.1, 0.6];
        for name in METRICS {
            let e = catalog(name, &p).unwrap();
            let a = connection(&e.metric).unwrap().curvature;
            let b = curvature_via_christoffel(&e.metric).unwrap();
            for (x, y) in a.data.iter().zip(&b.data) {
                assert!((x - y).norm() < 1e-12, "{name}");
            }
        }
    }

    #[test]
    fn constant_scalar_has_zero_derivatives() {
        let e = catalog("perturbed-hermitian", &[0.1, 0.2, 0.3, 0.4]).unwrap();
        let v = TaylorJet::real(e.metric.entry(0, 0).space(), 3.0);
        let d = covariant_derivatives(&v, &e.metric).unwrap();
        assert_eq!(
            d.v2.max_abs() + d.v3.max_abs() + d.v4.max_abs() + d.v4_swapped.max_abs(),
            0.0
        );
    }

    #[test]
    fn short_jets_are_rejected() {
        let sp = JetSpace::new(2, 3);
        let m = MetricJet::from_upper(2, |i, j| {
            TaylorJet::real(&sp, if i == j { 1.0 } else { 0.0 })
        })
        .unwrap();
        let v = TaylorJet::real(&sp, 1.0);
        assert!(matches!(
            covariant_derivatives(&v, &m),
            Err(Error::InsufficientOrder { have: 3, need: 4 })
        ));
    }

    #[test]
    fn identities_hold_on_catalog() {
        let points: [&[f64]; 2] = [&[0.3, -0.2, 0.5, 0.1], &[0.6, -0.4, 0.2, -0.3, 0.1, 0.55]];
        for p in points {
            for name in METRICS {
                let e = catalog(name, p).unwrap();
                for (s, v) in &e.scalars {
                    let r = commutation_residuals(v, &e.metric).unwrap();
                    assert!(r.max_residual() < 1e-10, "{name} {s}: {r:?}");
                    // the transposed curvature index only works where ∂̄T = 0
                    let transposed = r.fourth_order_mixed_transposed.max_residual;
                    if e.kahler {
                        assert!(transposed < 1e-10);
                    } else {
                        assert!(
                            transposed > 1e-2 * r.fourth_order_mixed.term_scale,
                            "{name} {s}"
                        );
                    }
                }
            }
        }
    }
}

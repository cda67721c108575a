//! Closed-form Hermitian metrics and real test scalars, expanded as jets about a base point.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{commutation_residuals, CommutationResiduals, MetricJet};
use crate::jet::{JetSpace, TaylorJet};

/// Jet order used throughout the catalog.
pub const JET_ORDER: usize = 4;

/// Metric names accepted by [`catalog`].
pub const METRICS: &[&str] = &[
    "flat",
    "conformal-exp",
    "kahler-potential",
    "perturbed-hermitian",
    "product",
    "fubini-study",
];

/// Scalar names returned with every entry.
pub const SCALARS: &[&str] = &["quadratic", "quartic", "trig", "exp", "rational"];

/// One catalog entry expanded about a base point.
#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub name: String,
    /// Real base point `(x_1..x_n, y_1..y_n)`.
    pub base_point: Vec<f64>,
    /// Metric in the normalized coordinates `w`, with `g(base) = I`.
    pub metric: MetricJet,
    /// The matrix `A` of the linear coordinate change `z = p + A w`; the metric
    /// coefficients transform as `Aᵀ g Ā`.
    pub normalization: DMatrix<Complex64>,
    /// Whether the metric is the complex Hessian of a potential.
    pub kahler: bool,
    pub scalars: Vec<(String, TaylorJet)>,
}

struct Coords {
    n: usize,
    space: Arc<JetSpace>,
    z: Vec<TaylorJet>,
    zbar: Vec<TaylorJet>,
    x: Vec<TaylorJet>,
}

impl Coords {
    /// Coordinates `z = p + A w` as jets in `w` about `w = 0`.
    fn new(n: usize, base: &[f64], a: &DMatrix<Complex64>) -> Self {
        let space = JetSpace::new(n, JET_ORDER);
        let origin = Complex64::new(0.0, 0.0);
        let w: Vec<TaylorJet> = (0..n).map(|i| TaylorJet::z(&space, i, origin)).collect();
        let z: Vec<TaylorJet> = (0..n)
            .map(|i| {
                let mut e = TaylorJet::constant(&space, Complex64::new(base[i], base[n + i]));
                for (b, wb) in w.iter().enumerate() {
                    e = &e + &wb.scale(a[(i, b)]);
                }
                e
            })
            .collect();
        let zbar: Vec<TaylorJet> = z.iter().map(|e| e.conj()).collect();
        let mut x: Vec<TaylorJet> = z
            .iter()
            .zip(&zbar)
            .map(|(p, q)| (p + q).scale_real(0.5))
            .collect();
        x.extend(
            z.iter()
                .zip(&zbar)
                .map(|(p, q)| (p - q).scale(Complex64::new(0.0, -0.5))),
        );
        Coords {
            n,
            space,
            z,
            zbar,
            x,
        }
    }

    fn c(&self, v: f64) -> TaylorJet {
        TaylorJet::real(&self.space, v)
    }

    /// Real coordinate number `a` modulo `2n`, so scalars make sense for every `n`.
    fn xr(&self, a: usize) -> &TaylorJet {
        &self.x[a % (2 * self.n)]
    }

    fn norm_sq(&self) -> TaylorJet {
        let mut s = self.c(0.0);
        for i in 0..self.n {
            s = &s + &(&self.z[i] * &self.zbar[i]);
        }
        s
    }
}

fn metric_jet(name: &str, k: &Coords) -> Result<(MetricJet, bool)> {
    let n = k.n;
    let delta = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
    match name {
        "flat" => Ok((MetricJet::from_upper(n, |i, j| k.c(delta(i, j)))?, true)),
        "conformal-exp" => {
            let e = k.norm_sq().exp();
            let zero = k.c(0.0);
            Ok((
                MetricJet::from_upper(n, |i, j| if i == j { e.clone() } else { zero.clone() })?,
                n == 1,
            ))
        }
        "kahler-potential" => {
            // complex Hessian of |z|² + α|z|⁴
            let alpha = 0.3;
            let s = k.norm_sq();
            let m = MetricJet::from_upper(n, |i, j| {
                let mut e = (&k.zbar[i] * &k.z[j]).scale_real(2.0 * alpha);
                if i == j {
                    e = &e + &(&k.c(1.0) + &s.scale_real(2.0 * alpha));
                }
                e
            })?;
            Ok((m, true))
        }
        "perturbed-hermitian" => {
            let m = MetricJet::from_upper(n, |i, j| {
                if i == j {
                    let next = (i + 1) % n;
                    let mut e = &k.c(1.0) + &(&k.z[i] * &k.zbar[i]).scale_real(0.3);
                    if next != i {
                        e = &e + &k.x[next].scale_real(0.2);
                    }
                    e
                } else {
                    let zb2 = &k.zbar[j] * &k.zbar[j];
                    let e = (&k.z[i] + &zb2).scale_real(0.1);
                    &e + &(&k.zbar[i] * &k.z[j]).scale(Complex64::new(0.0, 0.05))
                }
            })?;
            Ok((m, false))
        }
        "product" => {
            let zero = k.c(0.0);
            let m = MetricJet::from_upper(n, |i, j| {
                if i == j {
                    let e = &k.c(1.0) + &(&k.z[i] * &k.zbar[i]);
                    &e + &k.x[i].scale_real(0.2)
                } else {
                    zero.clone()
                }
            })?;
            Ok((m, true))
        }
        "fubini-study" => {
            // complex Hessian of log(1 + |z|²)
            let w = (&k.c(1.0) + &k.norm_sq()).recip();
            let w2 = &w * &w;
            let m = MetricJet::from_upper(n, |i, j| {
                let mut e = -&(&(&k.zbar[i] * &k.z[j]) * &w2);
                if i == j {
                    e = &e + &w;
                }
                e
            })?;
            Ok((m, true))
        }
        other => Err(Error::UnknownEntry(other.to_string())),
    }
}

fn scalar_jet(name: &str, k: &Coords) -> Result<TaylorJet> {
    let n = k.n;
    let x = |a: usize| k.xr(a);
    let y = |i: usize| k.xr(n + i);
    match name {
        "quadratic" => {
            let a = x(0) * x(0);
            let b = (x(0) * y(1)).scale_real(-0.5);
            let c = (y(0) * x(1)).scale_real(0.7);
            Ok(&(&a + &b) + &(&c + &(y(0) * y(0)).scale_real(-0.3)))
        }
        "quartic" => {
            let mut s = k.c(0.0);
            for a in 0..2 * n {
                s = &s + &(x(a) * x(a));
            }
            let cubic = &(x(0) * x(0)) * &(x(0) * y(1));
            Ok(&(&s * &s).scale_real(0.25) + &cubic)
        }
        "trig" => {
            let a = (x(0) + &y(1).scale_real(0.5)).sin();
            let b = (x(1) - y(0)).cos();
            Ok(&a * &b)
        }
        "exp" => {
            let arg =
                &(&x(0).scale_real(0.4) - &y(1).scale_real(0.3)) + &(x(1) * y(0)).scale_real(0.2);
            Ok(arg.exp())
        }
        "rational" => {
            let d = &(&k.c(2.0) + &(x(0) * x(0))) + &(&(y(0) * x(1)) + &y(n - 1).scale_real(0.5));
            Ok(d.recip())
        }
        other => Err(Error::UnknownEntry(other.to_string())),
    }
}

/// Expands the named metric and every catalog scalar about `base_point` (length `2n`),
/// normalizing the metric to the identity at the base point.
pub fn catalog(entry: &str, base_point: &[f64]) -> Result<CatalogEntry> {
    if base_point.is_empty() || base_point.len() % 2 != 0 {
        return Err(Error::DimensionMismatch(format!(
            "base point must have even length, got {}",
            base_point.len()
        )));
    }
    let n = base_point.len() / 2;
    let (raw, _) = metric_jet(entry, &Coords::new(n, base_point, &DMatrix::identity(n, n)))?;
    // Aᵀ g Ā = I for A = (L⁻¹)ᵀ, g = L L†
    let l = crate::hermitian::cholesky_factor(&raw.base_value())?;
    let linv = l.try_inverse().ok_or(Error::NonPositiveMetric {
        min_eigenvalue: 0.0,
    })?;
    let normalization = linv.transpose();
    let coords = Coords::new(n, base_point, &normalization);
    let (pulled, kahler) = metric_jet(entry, &coords)?;
    let metric = pulled.congruence(&normalization.transpose())?;
    let scalars = SCALARS
        .iter()
        .map(|s| Ok((s.to_string(), scalar_jet(s, &coords)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(CatalogEntry {
        name: entry.to_string(),
        base_point: base_point.to_vec(),
        metric,
        normalization,
        kahler,
        scalars,
    })
}

/// The named metric in the original coordinates `z`, without normalization.
pub fn catalog_raw(entry: &str, base_point: &[f64]) -> Result<MetricJet> {
    if base_point.is_empty() || base_point.len() % 2 != 0 {
        return Err(Error::DimensionMismatch(format!(
            "base point must have even length, got {}",
            base_point.len()
        )));
    }
    let n = base_point.len() / 2;
    Ok(metric_jet(entry, &Coords::new(n, base_point, &DMatrix::identity(n, n)))?.0)
}

/// Identity residuals over catalog metrics, scalars and random base points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub n: usize,
    pub base_points: usize,
    pub metrics: Vec<String>,
    pub scalars: Vec<String>,
    pub residuals: CommutationResiduals,
}

impl IdentityReport {
    pub fn max_residual(&self) -> f64 {
        self.residuals.max_residual()
    }
}

/// Evaluates every identity on every metric/scalar pair at `points` base points
/// drawn uniformly from `[-0.5, 0.5]^{2n}`.
pub fn identity_suite(n: usize, points: usize, seed: u64) -> Result<IdentityReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bases: Vec<Vec<f64>> = (0..points)
        .map(|_| (0..2 * n).map(|_| rng.gen_range(-0.5..0.5)).collect())
        .collect();
    let per_point: Vec<Result<CommutationResiduals>> = bases
        .par_iter()
        .map(|b| {
            let mut acc = CommutationResiduals::default();
            for name in METRICS {
                let e = catalog(name, b)?;
                for (_, v) in &e.scalars {
                    acc.merge(&commutation_residuals(v, &e.metric)?);
                }
            }
            Ok(acc)
        })
        .collect();
    let mut residuals = CommutationResiduals::default();
    for r in per_point {
        residuals.merge(&r?);
    }
    Ok(IdentityReport {
        n,
        base_points: points,
        metrics: METRICS.iter().map(|s| s.to_string()).collect(),
        scalars: SCALARS.iter().map(|s| s.to_string()).collect(),
        residuals,
    })
}

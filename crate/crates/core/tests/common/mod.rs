//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use jeq::hermitian::HermitianMatrix;
use num_complex::Complex64;
use rand::Rng;

/// Number of relative eigenvalues of `(a, g)` below `lambda`: the count of negative
/// pivots in an unpivoted `LDLᴴ` of `a - λ g` (Sylvester's law of inertia).
pub fn count_below(a: &HermitianMatrix, g: &HermitianMatrix, lambda: f64) -> usize {
    let n = a.dim();
    let mut m: Vec<Vec<Complex64>> = (0..n)
        .map(|i| (0..n).map(|j| a.get(i, j) - g.get(i, j) * lambda).collect())
        .collect();
    let mut negative = 0;
    for k in 0..n {
        let d = m[k][k].re;
        if d < 0.0 {
            negative += 1;
        }
        let d = if d == 0.0 { f64::MIN_POSITIVE } else { d };
        for i in k + 1..n {
            let f = m[i][k] / d;
            for j in k + 1..n {
                let t = f * m[k][j];
                m[i][j] -= t;
            }
        }
    }
    negative
}

/// Relative eigenvalues in ascending order, by bisection on [`count_below`].
pub fn oracle_eigenvalues(a: &HermitianMatrix, g: &HermitianMatrix) -> Vec<f64> {
    let n = a.dim();
    let mut r = 1.0;
    while count_below(a, g, -r) != 0 || count_below(a, g, r) != n {
        r *= 2.0;
    }
    (0..n)
        .map(|k| {
            // smallest λ with count_below(λ) ≥ k + 1
            let (mut lo, mut hi) = (-r, r);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid == lo || mid == hi {
                    break;
                }
                if count_below(a, g, mid) > k {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            0.5 * (lo + hi)
        })
        .collect()
}

pub fn random_hermitian<R: Rng>(rng: &mut R, n: usize) -> HermitianMatrix {
    HermitianMatrix::from_upper_fn(n, |i, j| {
        if i == j {
            Complex64::new(rng.gen_range(-1.0..1.0), 0.0)
        } else {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        }
    })
}

/// `B Bᴴ + 0.05 I` with uniform complex `B`.
pub fn random_metric<R: Rng>(rng: &mut R, n: usize) -> HermitianMatrix {
    let b: Vec<Vec<Complex64>> = (0..n)
        .map(|_| {
            (0..n)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect()
        })
        .collect();
    HermitianMatrix::from_upper_fn(n, |i, j| {
        let mut s: Complex64 = (0..n).map(|k| b[i][k] * b[j][k].conj()).sum();
        if i == j {
            s += 0.05;
        }
        s
    })
}

/// Largest disagreement between production and oracle spectra, relative to `max(1, |λ|)`.
pub fn spectrum_disagreement(a: &HermitianMatrix, g: &HermitianMatrix) -> f64 {
    let mut prod = jeq::hermitian::relative_spectrum(a, g).unwrap().values;
    prod.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let oracle = oracle_eigenvalues(a, g);
    prod.iter()
        .zip(&oracle)
        .map(|(p, o)| (p - o).abs() / o.abs().max(1.0))
        .fold(0.0, f64::max)
}

//! Pointwise algebra of the equation `tr(𝔤⁻¹ g) = n/ψ`: the operator, its
//! linearization, admissibility, the subsolution and cone conditions, and the
//! quantitative threshold `F(χ + Hess u̲) ≥ (n + θ)/ψ` for large `W`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermitian::{
    relative_spectrum, HermitianMatrix, RelativeSpectrum, DEGENERATE_EIGENVALUE,
};

/// `tr(𝔤⁻¹ g) = Σ 1/λ_i(𝔤, g)`.
pub fn j_operator(gfrak: &HermitianMatrix, g: &HermitianMatrix) -> Result<f64> {
    let s = relative_spectrum(gfrak, g)?;
    if s.min() <= DEGENERATE_EIGENVALUE {
        return Err(Error::PositivityLost { location: None });
    }
    Ok(s.values.iter().map(|l| 1.0 / l).sum())
}

/// `F = 𝔤⁻¹ g 𝔤⁻¹`, so that `d/dt tr((𝔤 + tH)⁻¹ g) = -tr(F H)`.
///
/// In a frame with `g = I` and `𝔤` diagonal this is `diag((𝔤^{iī})²)`.
pub fn linearized_coefficients(
    gfrak: &HermitianMatrix,
    g: &HermitianMatrix,
) -> Result<HermitianMatrix> {
    let margin = positivity_margin(gfrak, g)?;
    if margin <= DEGENERATE_EIGENVALUE {
        return Err(Error::PositivityLost { location: None });
    }
    let inv = gfrak
        .inverse()
        .ok_or(Error::PositivityLost { location: None })?;
    let f = inv.as_matrix() * g.as_matrix() * inv.as_matrix();
    HermitianMatrix::from_matrix(f)
}

/// Smallest relative eigenvalue of `(A, g)`; `A` is admissible iff this is positive.
pub fn positivity_margin(a: &HermitianMatrix, g: &HermitianMatrix) -> Result<f64> {
    Ok(relative_spectrum(a, g)?.min())
}

fn check_admissible(lambda: &RelativeSpectrum) -> Result<()> {
    match lambda.values.iter().find(|&&l| l <= DEGENERATE_EIGENVALUE) {
        Some(&value) => Err(Error::NonAdmissible { value }),
        None => Ok(()),
    }
}

/// `Σ 1/λ_i - n/ψ`; non-positive exactly when the subsolution condition holds.
pub fn subsolution_excess(lambda: &RelativeSpectrum, psi: f64) -> Result<f64> {
    check_admissible(lambda)?;
    let n = lambda.dim() as f64;
    Ok(lambda.values.iter().map(|l| 1.0 / l).sum::<f64>() - n / psi)
}

/// `Σ 1/λ_i ≤ n/ψ`, compared exactly.
pub fn subsolution_check(lambda: &RelativeSpectrum, psi: f64) -> Result<bool> {
    Ok(subsolution_excess(lambda, psi)? <= 0.0)
}

/// `max_k Σ_{i≠k} 1/λ_i - n/ψ`; negative exactly when the cone condition holds.
pub fn cone_excess(lambda: &RelativeSpectrum, psi: f64) -> Result<f64> {
    check_admissible(lambda)?;
    let n = lambda.dim() as f64;
    let total: f64 = lambda.values.iter().map(|l| 1.0 / l).sum();
    // the partial sum is largest when the dropped term is smallest, i.e. λ_max is dropped
    let worst = (0..lambda.dim())
        .map(|k| total - 1.0 / lambda.values[k])
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(worst - n / psi)
}

/// `Σ_{i≠k} 1/λ_i < n/ψ` for every `k`, compared exactly.
pub fn cone_check(lambda: &RelativeSpectrum, psi: f64) -> Result<bool> {
    Ok(cone_excess(lambda, psi)? < 0.0)
}

/// Constants `(θ, N)` for which `W ≥ N` forces `F(χ + Hess u̲) ≥ (n + θ)/ψ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeThreshold {
    pub n: usize,
    pub theta: f64,
    #[serde(rename = "bigN")]
    pub big_n: f64,
    /// `ψ 𝔤^{1 1̄} ≤ delta` whenever `W ≥ N`.
    pub delta: f64,
    pub epsilon: f64,
    pub psi_min: f64,
    pub psi_max: f64,
}

/// Lower bound of the proof chain once `ψ 𝔤^{11̄} ≤ δ` and `χ̃_{11̄} ≤ 1/ε`:
/// `(n - δ)² (1 + εψ/n) / (nψ)`, scaled by `ψ` so it compares with `n + θ`.
fn chain_bound(n: f64, delta: f64, epsilon: f64, psi: f64) -> f64 {
    (n - delta).powi(2) * (1.0 + epsilon * psi / n) / n
}

/// Builds `(θ, N)` for `ε ω ≤ χ_u̲ ≤ ε⁻¹ ω` and `ψ ∈ [psi_min, psi_max]`.
///
/// `θ = ε ψ_min / 2`; `δ` is the largest value (found by bisection) with
/// `(n - δ)²(1 + εψ/n) ≥ n(n + θ)` for every admissible `ψ`; `N = max(n, nψ_max/δ)`.
pub fn lemma_threshold(
    epsilon: f64,
    psi_min: f64,
    psi_max: f64,
    n: usize,
) -> Result<ConeThreshold> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InfeasibleThreshold {
            reason: format!("epsilon = {epsilon} outside (0, 1]"),
        });
    }
    if !(psi_min > 0.0 && psi_min <= psi_max) || n < 2 {
        return Err(Error::InfeasibleThreshold {
            reason: format!("invalid psi range [{psi_min}, {psi_max}] or n = {n}"),
        });
    }
    // Σ 1/χ̃_i ≥ nε, so the subsolution inequality needs ψ ≤ 1/ε somewhere in range.
    if psi_min > 1.0 / epsilon {
        return Err(Error::InfeasibleThreshold {
            reason: format!(
                "psi_min = {psi_min} exceeds 1/epsilon = {}: no subsolution obeys both bounds",
                1.0 / epsilon
            ),
        });
    }
    let nf = n as f64;
    let theta = epsilon * psi_min / 2.0;
    // the chain bound increases with ψ, so ψ_min is the binding case
    let excess = |delta: f64| chain_bound(nf, delta, epsilon, psi_min) - (nf + theta);
    let (mut lo, mut hi) = (0.0, nf);
    if !(excess(lo) > 0.0 && excess(hi) < 0.0) {
        return Err(Error::InfeasibleThreshold {
            reason: "no sign change of the chain bound on (0, n)".into(),
        });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if excess(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * nf {
            break;
        }
    }
    let delta = lo;
    if delta <= 0.0 {
        return Err(Error::InfeasibleThreshold {
            reason: "bisection collapsed to delta = 0".into(),
        });
    }
    Ok(ConeThreshold {
        n,
        theta,
        big_n: nf.max(nf * psi_max / delta),
        delta,
        epsilon,
        psi_min,
        psi_max,
    })
}

/// `Σ (1/𝔤_i)² χ̃_i - (n + θ)/ψ` in a frame where `g = I` and `𝔤` is diagonal.
pub fn lemma_margin(gfrak_diag: &[f64], chi_diag: &[f64], psi: f64, thr: &ConeThreshold) -> f64 {
    let n = gfrak_diag.len() as f64;
    let lhs: f64 = gfrak_diag
        .iter()
        .zip(chi_diag)
        .map(|(g, c)| c / (g * g))
        .sum();
    lhs - (n + thr.theta) / psi
}

const HYPOTHESIS_RTOL: f64 = 1e-9;

/// Checks the lemma's claim for one diagonal configuration after validating its
/// hypotheses: the equation `Σ 1/𝔤_i = n/ψ`, the bounds `ε ≤ χ̃_i ≤ 1/ε`, the
/// subsolution inequality `Σ 1/χ̃_i ≤ n/ψ`, and `Σ 𝔤_i ≥ N`.
pub fn lemma_verify(
    gfrak_diag: &[f64],
    chi_diag: &[f64],
    psi: f64,
    thr: &ConeThreshold,
) -> Result<bool> {
    let n = thr.n;
    if gfrak_diag.len() != n || chi_diag.len() != n {
        return Err(Error::HypothesisViolation(format!(
            "expected {n} diagonal entries"
        )));
    }
    if psi < thr.psi_min * (1.0 - HYPOTHESIS_RTOL) || psi > thr.psi_max * (1.0 + HYPOTHESIS_RTOL) {
        return Err(Error::HypothesisViolation(format!(
            "psi = {psi} outside [{}, {}]",
            thr.psi_min, thr.psi_max
        )));
    }
    if !psi.is_finite() || gfrak_diag.iter().chain(chi_diag).any(|v| !v.is_finite()) {
        return Err(Error::HypothesisViolation("non-finite input".into()));
    }
    if gfrak_diag.iter().any(|&g| g <= 0.0) {
        return Err(Error::HypothesisViolation(
            "gfrak has a non-positive entry".into(),
        ));
    }
    let target = n as f64 / psi;
    let eq: f64 = gfrak_diag.iter().map(|g| 1.0 / g).sum();
    if (eq - target).abs() > HYPOTHESIS_RTOL * target {
        return Err(Error::HypothesisViolation(format!(
            "equation fails: sum 1/gfrak = {eq}, n/psi = {target}"
        )));
    }
    let (lo, hi) = (thr.epsilon, 1.0 / thr.epsilon);
    if chi_diag
        .iter()
        .any(|&c| c < lo * (1.0 - HYPOTHESIS_RTOL) || c > hi * (1.0 + HYPOTHESIS_RTOL))
    {
        return Err(Error::HypothesisViolation(format!(
            "chi + Hess usub outside [{lo}, {hi}]"
        )));
    }
    let sub: f64 = chi_diag.iter().map(|c| 1.0 / c).sum();
    if sub > target * (1.0 + HYPOTHESIS_RTOL) {
        return Err(Error::HypothesisViolation(format!(
            "subsolution fails: sum 1/chi = {sub} > n/psi = {target}"
        )));
    }
    let w: f64 = gfrak_diag.iter().sum();
    if w < thr.big_n * (1.0 - HYPOTHESIS_RTOL) {
        return Err(Error::HypothesisViolation(format!(
            "W = {w} < N = {}",
            thr.big_n
        )));
    }
    Ok(lemma_margin(gfrak_diag, chi_diag, psi, thr) >= 0.0)
}

/// Summary of a randomized search for counterexamples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaBatch {
    pub theta: f64,
    #[serde(rename = "bigN")]
    pub big_n: f64,
    pub samples: usize,
    pub worst_margin: f64,
    pub violations: usize,
}

/// One admissible diagonal configuration for the lemma.
#[derive(Debug, Clone, PartialEq)]
pub struct LemmaSample {
    pub gfrak: Vec<f64>,
    pub chi: Vec<f64>,
    pub psi: f64,
}

/// Largest `ψ` in range for which some `χ̃` satisfies both the `ε`-bounds and the
/// subsolution inequality.
fn psi_upper(thr: &ConeThreshold) -> f64 {
    thr.psi_max.min(1.0 / thr.epsilon)
}

/// Draws a configuration satisfying every hypothesis of [`lemma_verify`].
///
/// Samples are biased toward the binding corners: `χ̃` entries at the ends of
/// `[ε, 1/ε]`, equality in the subsolution inequality, and `W` close to `N`.
pub fn sample_lemma_configuration<R: Rng>(rng: &mut R, thr: &ConeThreshold) -> LemmaSample {
    let n = thr.n;
    let (eps, inv_eps) = (thr.epsilon, 1.0 / thr.epsilon);
    loop {
        let psi = if rng.gen_bool(0.25) {
            thr.psi_min
        } else {
            rng.gen_range(thr.psi_min..=psi_upper(thr))
        };
        let target = n as f64 / psi;

        // reciprocals r_i = 1/χ̃_i ∈ [ε, 1/ε]
        let mut r: Vec<f64> = (0..n)
            .map(|_| match rng.gen_range(0..4) {
                0 => eps,
                1 => inv_eps,
                _ => (eps.ln() + rng.gen::<f64>() * (inv_eps.ln() - eps.ln())).exp(),
            })
            .collect();
        let sum: f64 = r.iter().sum();
        let fill = if rng.gen_bool(0.5) {
            1.0
        } else {
            rng.gen::<f64>()
        };
        if sum > target {
            // shrink toward ε so that Σ r = ε n + fill (target - ε n)
            let goal = eps * n as f64 + fill * (target - eps * n as f64);
            let tau = (goal - eps * n as f64) / (sum - eps * n as f64);
            for ri in r.iter_mut() {
                *ri = eps + tau * (*ri - eps);
            }
        } else if fill == 1.0 && inv_eps * n as f64 > sum && inv_eps * n as f64 >= target {
            // push toward 1/ε until the subsolution inequality is tight
            let tau = (target - sum) / (inv_eps * n as f64 - sum);
            for ri in r.iter_mut() {
                *ri += tau * (inv_eps - *ri);
            }
        }
        let chi: Vec<f64> = r.iter().map(|ri| (1.0 / ri).clamp(eps, inv_eps)).collect();

        // μ_i = 1/𝔤_i with Σ μ = n/ψ; μ_1 ≤ n/N keeps 𝔤_1 ≥ N/n
        let mu1 = if rng.gen_bool(0.5) {
            rng.gen::<f64>().powi(2) / thr.big_n
        } else {
            rng.gen_range(1.0 / thr.big_n..=n as f64 / thr.big_n)
        };
        let rest = target - mu1;
        if rest <= 0.0 {
            continue;
        }
        let weights: Vec<f64> = (1..n)
            .map(|_| {
                -(rng.gen::<f64>().max(1e-300)).ln() * if rng.gen_bool(0.2) { 1e-3 } else { 1.0 }
            })
            .collect();
        let wsum: f64 = weights.iter().sum();
        let mut gfrak = Vec::with_capacity(n);
        gfrak.push(1.0 / mu1);
        gfrak.extend(weights.iter().map(|w| wsum / (w * rest)));
        let w_total: f64 = gfrak.iter().sum();
        if w_total < thr.big_n || gfrak.iter().any(|g| !g.is_finite()) {
            continue;
        }
        return LemmaSample { gfrak, chi, psi };
    }
}

/// Randomized search for violations of the threshold lemma.
pub fn lemma_verify_batch(thr: &ConeThreshold, samples: usize, seed: u64) -> Result<LemmaBatch> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    let mut violations = 0;
    for _ in 0..samples {
        let s = sample_lemma_configuration(&mut rng, thr);
        if !lemma_verify(&s.gfrak, &s.chi, s.psi, thr)? {
            violations += 1;
        }
        worst = worst.min(lemma_margin(&s.gfrak, &s.chi, s.psi, thr));
    }
    Ok(LemmaBatch {
        theta: thr.theta,
        big_n: thr.big_n,
        samples,
        worst_margin: worst,
        violations,
    })
}

/// `𝔤 = (W - (n-1)t, t, …, t)` with `t` chosen so that `Σ 1/𝔤_i = n/ψ`.
///
/// Returns `None` when no positive `t` exists for this `W`.
pub fn corner_gfrak(n: usize, w: f64, psi: f64) -> Option<Vec<f64>> {
    let m = (n - 1) as f64;
    let target = n as f64 / psi;
    // h(t) = 1/(W - m t) + m/t - target is decreasing then increasing on (0, W/m);
    // take the root on the branch where the first entry dominates.
    let h = |t: f64| 1.0 / (w - m * t) + m / t - target;
    let t_min = {
        // minimiser of h: m/t² = m/(W - m t)² ⇒ t = W/(m+1)
        w / (m + 1.0)
    };
    if h(t_min) > 0.0 {
        return None;
    }
    let (mut lo, mut hi) = (1e-300_f64.max(t_min * 1e-16), t_min);
    if h(lo) < 0.0 {
        return None;
    }
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if h(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    let mut g = vec![t; n];
    g[0] = w - m * t;
    Some(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn spec(v: &[f64]) -> RelativeSpectrum {
        RelativeSpectrum::new(v.to_vec())
    }

    #[test]
    fn j_operator_of_metric_is_dimension() {
        let g = HermitianMatrix::from_upper_fn(3, |i, j| {
            if i == j {
                Complex64::new(1.5, 0.0)
            } else {
                Complex64::new(0.1, 0.2)
            }
        });
        assert!((j_operator(&g, &g).unwrap() - 3.0).abs() < 1e-13);
        let two = HermitianMatrix::diagonal(&[2.0, 2.0]);
        assert!((j_operator(&two, &HermitianMatrix::identity(2)).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn linearization_is_squared_inverse_in_diagonal_frame() {
        let f = linearized_coefficients(
            &HermitianMatrix::diagonal(&[2.0, 4.0]),
            &HermitianMatrix::identity(2),
        )
        .unwrap();
        assert!((f.get(0, 0).re - 0.25).abs() < 1e-15);
        assert!((f.get(1, 1).re - 1.0 / 16.0).abs() < 1e-15);
        assert!(f.get(0, 1).norm() < 1e-15);
        let id =
            linearized_coefficients(&HermitianMatrix::identity(2), &HermitianMatrix::identity(2))
                .unwrap();
        assert_eq!(id, HermitianMatrix::identity(2));
    }

    #[test]
    fn margin_detects_indefinite() {
        let m = positivity_margin(
            &HermitianMatrix::diagonal(&[1.0, -1.0]),
            &HermitianMatrix::identity(2),
        )
        .unwrap();
        assert_eq!(m, -1.0);
        let g = HermitianMatrix::diagonal(&[3.0, 0.5]);
        assert!((positivity_margin(&g, &g).unwrap() - 1.0).abs() < 1e-14);
        assert!(matches!(
            j_operator(
                &HermitianMatrix::diagonal(&[1.0, -1.0]),
                &HermitianMatrix::identity(2)
            ),
            Err(Error::PositivityLost { .. })
        ));
    }

    #[test]
    fn subsolution_and_cone_examples() {
        assert!(subsolution_check(&spec(&[1.0, 1.0]), 1.0).unwrap());
        assert!(!subsolution_check(&spec(&[0.9, 0.9]), 1.0).unwrap());
        assert!(subsolution_check(&spec(&[3.0, 3.0, 3.0]), 2.0).unwrap());

        assert!(cone_check(&spec(&[0.9, 0.9]), 1.0).unwrap());
        assert!(!cone_check(&spec(&[1.0 / 3.0, 1.0]), 1.0).unwrap());
        assert!(cone_check(&spec(&[1.0, 1.0, 1.0]), 1.0).unwrap());
    }

    #[test]
    fn degenerate_spectrum_is_not_admissible() {
        assert!(matches!(
            subsolution_check(&spec(&[1.0, 1e-15]), 1.0),
            Err(Error::NonAdmissible { .. })
        ));
        assert!(matches!(
            cone_check(&spec(&[1.0, -2.0]), 1.0),
            Err(Error::NonAdmissible { .. })
        ));
    }

    #[test]
    fn threshold_closed_form_for_n2() {
        // (2-δ)²(1 + 0.25) = 2(2 + 0.25)  ⇒  δ = 2 - sqrt(3.6)
        let thr = lemma_threshold(0.5, 1.0, 1.0, 2).unwrap();
        assert_eq!(thr.theta, 0.25);
        let delta = 2.0 - 3.6_f64.sqrt();
        assert!((thr.delta - delta).abs() < 1e-12);
        assert!((thr.big_n - 2.0 / delta).abs() < 1e-9);
    }

    #[test]
    fn threshold_rejects_inconsistent_range() {
        assert!(matches!(
            lemma_threshold(0.5, 3.0, 4.0, 2),
            Err(Error::InfeasibleThreshold { .. })
        ));
        assert!(lemma_threshold(0.0, 1.0, 1.0, 2).is_err());
    }

    #[test]
    fn theta_vanishes_with_epsilon() {
        let a = lemma_threshold(1e-3, 1.0, 1.0, 2).unwrap();
        let b = lemma_threshold(1e-6, 1.0, 1.0, 2).unwrap();
        assert!(b.theta < a.theta && b.theta <= 1e-6);
    }

    #[test]
    fn verify_rejects_broken_hypotheses() {
        let thr = lemma_threshold(0.5, 0.5, 0.5, 2).unwrap();
        let g = corner_gfrak(2, thr.big_n, 0.5).unwrap();
        assert!(lemma_verify(&g, &[0.5, 0.5], 0.5, &thr).unwrap());
        // χ̃ below ε
        assert!(matches!(
            lemma_verify(&g, &[0.4, 1.0], 0.5, &thr),
            Err(Error::HypothesisViolation(_))
        ));
        // subsolution inequality broken: Σ 1/χ̃ = 4 > n/ψ = 2
        let g1 = corner_gfrak(2, thr.big_n, 1.0).unwrap();
        assert!(lemma_verify(
            &g1,
            &[0.5, 0.5],
            1.0,
            &lemma_threshold(0.5, 0.5, 1.0, 2).unwrap()
        )
        .is_err());
        // equation not satisfied
        assert!(lemma_verify(&[thr.big_n, 1.0], &[1.0, 1.0], 0.5, &thr).is_err());
        // W below N
        let small = corner_gfrak(2, 0.5 * thr.big_n, 0.5).unwrap();
        assert!(lemma_verify(&small, &[1.0, 1.0], 0.5, &thr).is_err());
    }

    #[test]
    fn corner_family_satisfies_equation() {
        let g = corner_gfrak(3, 40.0, 1.5).unwrap();
        let eq: f64 = g.iter().map(|x| 1.0 / x).sum();
        assert!((eq - 2.0).abs() < 1e-12);
        assert!((g.iter().sum::<f64>() - 40.0).abs() < 1e-10);
        assert!(g[0] > g[1]);
    }

    #[test]
    fn batch_record_serializes_with_big_n_key() {
        let thr = lemma_threshold(0.5, 0.5, 2.0, 2).unwrap();
        let rec = lemma_verify_batch(&thr, 200, 1).unwrap();
        let json = serde_json::to_value(&rec).unwrap();
        for key in ["theta", "bigN", "samples", "worst_margin"] {
            assert!(json.get(key).is_some(), "{key}");
        }
        assert_eq!(rec.violations, 0);
    }
}

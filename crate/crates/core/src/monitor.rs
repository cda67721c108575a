//! Quantities from the a priori estimates evaluated on solver output.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{self, ScalarField};
use crate::hermitian::{relative_spectrum, HermitianMatrix};
use crate::pointwise::lemma_threshold;
use crate::solver::{Problem, SolveConfig, SolveState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    #[serde(rename = "C0")]
    pub c0: f64,
    pub grad_max: f64,
    pub lap_max: f64,
    pub boundary_grad_max: Option<f64>,
    pub boundary_lap_max: Option<f64>,
    pub w_max: f64,
    /// `ε ω ≤ χ_u̲ ≤ ε⁻¹ ω` over active points.
    pub epsilon: f64,
    pub psi_min: f64,
    pub psi_max: f64,
    pub theta: f64,
    #[serde(rename = "bigN")]
    pub big_n: f64,
    #[serde(rename = "A_grad")]
    pub a_grad: f64,
    #[serde(rename = "A_hess")]
    pub a_hess: f64,
    /// Maximum of `exp(A_grad e^η) |∇u|²`, `η = u̲ - u`.
    pub testfn_grad_max: f64,
    pub testfn_grad_max_location: Vec<usize>,
    /// Maximum of `exp(e^{A_hess η}) W`, `η = u̲ - u + sup(u - u̲)`.
    pub testfn_hess_max: f64,
    pub testfn_hess_max_location: Vec<usize>,
    /// `min tr(F χ_u̲) - (n + θ)/ψ` over active points with `W ≥ N`; `None` if there are none.
    pub lemma_margin_min: Option<f64>,
    pub lemma_points: usize,
}

fn arg_max(values: &[f64]) -> (usize, f64) {
    values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
            if v > bv {
                (i, v)
            } else {
                (bi, bv)
            }
        })
}

/// Evaluates the estimate quantities on a solved state. `usub` is the subsolution
/// (use the zero field on periodic grids with `χ > 0`).
pub fn estimate_monitor(
    problem: &Problem,
    state: &SolveState,
    usub: &ScalarField,
    a_grad: f64,
    a_hess: f64,
    cfg: &SolveConfig,
) -> Result<EstimateReport> {
    if !(state.residual_norm <= 10.0 * cfg.newton_tol) {
        return Err(Error::NotSolved {
            residual: state.residual_norm,
        });
    }
    let grid = problem.grid();
    let n = grid.n();
    let nf = n as f64;
    let active: Vec<usize> = (0..grid.len()).filter(|&p| problem.is_active(p)).collect();

    let psi_at = |p: usize| match (&problem.psi, state.c) {
        (_, Some(c)) if problem.is_closed() => nf / c,
        (Some(psi), _) => psi.values[p],
        _ => f64::NAN,
    };

    let chi_sub: Vec<HermitianMatrix> = (0..grid.len())
        .into_par_iter()
        .map(|p| problem.gfrak_at(&usub.values, p))
        .collect();
    let bounds: Result<Vec<(f64, f64)>> = active
        .par_iter()
        .map(|&p| {
            let s = relative_spectrum(&chi_sub[p], &problem.g.values[p])?;
            if s.min() <= 0.0 {
                return Err(Error::PositivityLost {
                    location: Some(grid.multi_index(p)),
                });
            }
            Ok((s.min(), s.max()))
        })
        .collect();
    let epsilon = bounds?
        .iter()
        .fold(f64::INFINITY, |e, &(lo, hi)| e.min(lo).min(1.0 / hi))
        .min(1.0);
    let (psi_min, psi_max) = active
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &p| {
            (a.min(psi_at(p)), b.max(psi_at(p)))
        });
    let thr = lemma_threshold(epsilon, psi_min, psi_max, n)?;

    let d = grid::diagnostics(&state.u, &problem.chi, &problem.g, usub)?;
    let w = d.w_field.as_ref().expect("diagnostics carry W");
    let grad = grid::gradient_norm_sq(&state.u, &problem.g)?;
    let sup_gap = state.u.zip_map(usub, |u, s| u - s).max();
    let tg: Vec<f64> = (0..grid.len())
        .map(|p| (a_grad * (usub.values[p] - state.u.values[p]).exp()).exp() * grad.values[p])
        .collect();
    let th: Vec<f64> = (0..grid.len())
        .map(|p| {
            let eta = usub.values[p] - state.u.values[p] + sup_gap;
            (a_hess * eta).exp().exp() * w.values[p]
        })
        .collect();
    let (ig, vg) = arg_max(&tg);
    let (ih, vh) = arg_max(&th);

    let margins: Result<Vec<f64>> = active
        .par_iter()
        .filter(|&&p| w.values[p] >= thr.big_n)
        .map(|&p| {
            let gf = problem.gfrak_at(&state.u.values, p);
            let inv = gf.inverse().ok_or(Error::PositivityLost {
                location: Some(grid.multi_index(p)),
            })?;
            let f = HermitianMatrix::from_matrix(
                inv.as_matrix() * problem.g.values[p].as_matrix() * inv.as_matrix(),
            )?;
            Ok(f.trace_product(&chi_sub[p]) - (nf + thr.theta) / psi_at(p))
        })
        .collect();
    let margins = margins?;
    let lemma_margin_min = margins.iter().copied().reduce(f64::min);

    Ok(EstimateReport {
        c0: d.osc,
        grad_max: d.grad_max,
        lap_max: d.lap_max,
        boundary_grad_max: d.boundary_grad_max,
        boundary_lap_max: d.boundary_lap_max,
        w_max: d.w_max,
        epsilon,
        psi_min,
        psi_max,
        theta: thr.theta,
        big_n: thr.big_n,
        a_grad,
        a_hess,
        testfn_grad_max: vg,
        testfn_grad_max_location: grid.multi_index(ig),
        testfn_hess_max: vh,
        testfn_hess_max_location: grid.multi_index(ih),
        lemma_margin_min,
        lemma_points: margins.len(),
    })
}

//! Damped Newton iteration for `tr(𝔤_u⁻¹ g) = n/ψ` on grids, with a continuity
//! path in `ψ` as fallback.
//!
//! On periodic grids the right-hand side is an unknown constant `c` and `u` is
//! kept mean-zero, giving the square system `(L v - δc = -R, Σ v = -Σ u)`. On box
//! grids `u` is fixed on boundary points and Newton runs on interior values.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{self, Diagnostics, Grid, HermitianField, ScalarField, Topology};
use crate::hermitian::{relative_spectrum, HermitianMatrix, DEGENERATE_EIGENVALUE};
use crate::krylov::{gmres, CsrMatrix, GmresConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub max_newton_iters: usize,
    /// Target sup-norm of the residual.
    pub newton_tol: f64,
    pub armijo_factor: f64,
    pub min_step: f64,
    pub krylov_tol: f64,
    pub krylov_max_iters: usize,
    pub krylov_restart: usize,
    pub continuity_steps: usize,
    pub positivity_floor: f64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            max_newton_iters: 50,
            newton_tol: 1e-10,
            armijo_factor: 0.5,
            min_step: 2f64.powi(-20),
            krylov_tol: 1e-12,
            krylov_max_iters: 4000,
            krylov_restart: 60,
            continuity_steps: 4,
            positivity_floor: 1e-8,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: &str| Err(Error::config(key, None, msg));
        if self.max_newton_iters == 0 {
            return bad("max_newton_iters", "must be positive");
        }
        if !(self.newton_tol >= 1e-13) {
            return bad("newton_tol", "must be at least 1e-13");
        }
        if !(self.armijo_factor > 0.0 && self.armijo_factor < 1.0) {
            return bad("armijo_factor", "must lie in (0, 1)");
        }
        if !(self.min_step > 0.0 && self.min_step <= 1.0) {
            return bad("min_step", "must lie in (0, 1]");
        }
        if !(self.krylov_tol > 0.0 && self.krylov_tol < 1.0) {
            return bad("krylov_tol", "must lie in (0, 1)");
        }
        if self.krylov_max_iters == 0 || self.krylov_restart == 0 {
            return bad("krylov_max_iters", "iteration limits must be positive");
        }
        if self.continuity_steps == 0 {
            return bad("continuity_steps", "must be positive");
        }
        if !(self.positivity_floor > 0.0) {
            return bad("positivity_floor", "must be positive");
        }
        Ok(())
    }

    fn gmres(&self) -> GmresConfig {
        GmresConfig {
            tol: self.krylov_tol,
            max_iters: self.krylov_max_iters,
            restart: self.krylov_restart,
        }
    }
}

/// One record of the iteration; record 0 describes the starting point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub iter: usize,
    pub residual: f64,
    pub step: f64,
    pub margin: f64,
    pub krylov_iters: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveState {
    pub u: ScalarField,
    /// The unknown right-hand side on periodic grids.
    pub c: Option<f64>,
    pub residual_norm: f64,
    pub step_history: Vec<StepRecord>,
}

/// The fields defining an equation on a grid. `psi` is required on box grids
/// and ignored on periodic grids, where the constant is solved for.
#[derive(Debug, Clone)]
pub struct Problem {
    pub g: HermitianField,
    pub chi: HermitianField,
    pub psi: Option<ScalarField>,
}

impl Problem {
    pub fn closed(g: HermitianField, chi: HermitianField) -> Result<Self> {
        if g.grid.topology() != Topology::Periodic {
            return Err(Error::DimensionMismatch(
                "closed problems need a periodic grid".into(),
            ));
        }
        Self::checked(g, chi, None)
    }

    pub fn dirichlet(g: HermitianField, chi: HermitianField, psi: ScalarField) -> Result<Self> {
        if g.grid.topology() != Topology::Box {
            return Err(Error::DimensionMismatch(
                "Dirichlet problems need a box grid".into(),
            ));
        }
        if let Some((p, &v)) = psi.values.iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
            return Err(Error::DimensionMismatch(format!(
                "psi must be positive, found {v} at {:?}",
                psi.grid.multi_index(p)
            )));
        }
        Self::checked(g, chi, Some(psi))
    }

    fn checked(g: HermitianField, chi: HermitianField, psi: Option<ScalarField>) -> Result<Self> {
        if *g.grid != *chi.grid || psi.as_ref().is_some_and(|p| *p.grid != *g.grid) {
            return Err(Error::DimensionMismatch(
                "problem fields live on different grids".into(),
            ));
        }
        Ok(Problem { g, chi, psi })
    }

    pub fn grid(&self) -> &std::sync::Arc<Grid> {
        &self.g.grid
    }

    pub fn is_closed(&self) -> bool {
        self.grid().topology() == Topology::Periodic
    }

    /// Whether the equation is imposed at `p`.
    pub fn is_active(&self, p: usize) -> bool {
        !self.grid().is_boundary(p)
    }

    pub fn with_psi(&self, psi: ScalarField) -> Self {
        Problem {
            g: self.g.clone(),
            chi: self.chi.clone(),
            psi: Some(psi),
        }
    }

    fn target(&self, p: usize, c: f64) -> f64 {
        match &self.psi {
            Some(psi) if !self.is_closed() => self.grid().n() as f64 / psi.values[p],
            _ => c,
        }
    }

    pub fn gfrak_at(&self, u: &[f64], p: usize) -> HermitianMatrix {
        self.chi.values[p].add(&self.grid().complex_hessian_at(u, p))
    }
}

/// Residual and operator data at one iterate.
pub struct Evaluation {
    /// `tr(𝔤⁻¹ g) - target` at active points, 0 elsewhere.
    pub residual: Vec<f64>,
    pub sup: f64,
    /// Smallest relative eigenvalue of `(𝔤, g)` over active points.
    pub margin: f64,
    pub trace: Vec<f64>,
    f: Option<Vec<HermitianMatrix>>,
}

/// Evaluates the residual; fails with `PositivityLost` at the first active point
/// where `𝔤` is not positive relative to `g`.
pub fn evaluate(
    problem: &Problem,
    u: &[f64],
    c: f64,
    with_coefficients: bool,
) -> Result<Evaluation> {
    let grid = problem.grid();
    let per_point: Vec<Result<Option<(f64, f64, Option<HermitianMatrix>)>>> = (0..grid.len())
        .into_par_iter()
        .map(|p| {
            if !problem.is_active(p) {
                return Ok(None);
            }
            let gf = problem.gfrak_at(u, p);
            let g = &problem.g.values[p];
            let s = relative_spectrum(&gf, g)?;
            if !(s.min() > DEGENERATE_EIGENVALUE) {
                return Err(Error::PositivityLost {
                    location: Some(grid.multi_index(p)),
                });
            }
            let trace: f64 = s.values.iter().map(|l| 1.0 / l).sum();
            let f = if with_coefficients {
                let inv = gf.inverse().ok_or(Error::PositivityLost {
                    location: Some(grid.multi_index(p)),
                })?;
                Some(HermitianMatrix::from_matrix(
                    inv.as_matrix() * g.as_matrix() * inv.as_matrix(),
                )?)
            } else {
                None
            };
            Ok(Some((trace, s.min(), f)))
        })
        .collect();
    let mut residual = vec![0.0; grid.len()];
    let mut trace = vec![0.0; grid.len()];
    let mut margin = f64::INFINITY;
    let mut sup = 0.0f64;
    let mut fs = with_coefficients.then(|| Vec::with_capacity(grid.len()));
    for (p, r) in per_point.into_iter().enumerate() {
        match r? {
            Some((t, m, f)) => {
                trace[p] = t;
                residual[p] = t - problem.target(p, c);
                sup = sup.max(residual[p].abs());
                margin = margin.min(m);
                if let (Some(fs), Some(f)) = (fs.as_mut(), f) {
                    fs.push(f);
                }
            }
            None => {
                if let Some(fs) = fs.as_mut() {
                    fs.push(HermitianMatrix::identity(grid.n()));
                }
            }
        }
    }
    Ok(Evaluation {
        residual,
        sup,
        margin,
        trace,
        f: fs,
    })
}

/// Jacobian of the discrete residual in `(u, c)`; `F = 𝔤⁻¹ g 𝔤⁻¹` per point.
pub fn jacobian(problem: &Problem, f: &[HermitianMatrix]) -> CsrMatrix {
    let grid = problem.grid();
    let len = grid.len();
    let m = 2 * grid.n();
    let closed = problem.is_closed();
    let cols = if closed { len + 1 } else { len };
    let mut rows: Vec<Vec<(usize, f64)>> = (0..len)
        .into_par_iter()
        .map(|p| {
            if !problem.is_active(p) {
                return vec![(p, 1.0)];
            }
            let a = grid.hessian_trace_coefficients(&f[p]);
            let mut row = Vec::with_capacity(4 * m * m + 1);
            for x in 0..m {
                for y in x..m {
                    let w = if x == y {
                        a[x * m + x]
                    } else {
                        2.0 * a[x * m + y]
                    };
                    if w == 0.0 {
                        continue;
                    }
                    for (q, s) in grid.second_stencil(p, x, y) {
                        row.push((q, -w * s));
                    }
                }
            }
            if closed {
                row.push((len, -1.0));
            }
            row
        })
        .collect();
    if closed {
        rows.push((0..len).map(|q| (q, 1.0)).collect());
    }
    CsrMatrix::from_rows(cols, rows)
}

/// Newton direction `v` (and `δc` on periodic grids).
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonDirection {
    pub v: ScalarField,
    pub dc: Option<f64>,
    pub krylov_iters: usize,
}

fn solve_linearized(
    problem: &Problem,
    u: &[f64],
    eval: &Evaluation,
    cfg: &SolveConfig,
) -> Result<NewtonDirection> {
    let grid = problem.grid();
    let f = eval.f.as_ref().expect("evaluation with coefficients");
    let a = jacobian(problem, f);
    let mut b: Vec<f64> = eval.residual.iter().map(|r| -r).collect();
    if problem.is_closed() {
        b.push(-u.iter().sum::<f64>());
    }
    let out = gmres(&a, &b, &cfg.gmres())?;
    let mut x = out.x;
    let dc = if problem.is_closed() { x.pop() } else { None };
    Ok(NewtonDirection {
        v: ScalarField::new(grid, x)?,
        dc,
        krylov_iters: out.iterations,
    })
}

/// Solves the linearized system at `state` to `cfg.krylov_tol`.
pub fn linearize_and_solve(
    problem: &Problem,
    state: &SolveState,
    cfg: &SolveConfig,
) -> Result<NewtonDirection> {
    let c = state.c.unwrap_or(0.0);
    let eval = evaluate(problem, &state.u.values, c, true)?;
    if eval.margin < cfg.positivity_floor {
        return Err(Error::PositivityLost { location: None });
    }
    solve_linearized(problem, &state.u.values, &eval, cfg)
}

/// Applies the Jacobian at `state` to `(v, dc)`; rows ordered as grid points, then
/// the mean row on periodic grids.
pub fn apply_jacobian(
    problem: &Problem,
    state: &SolveState,
    v: &[f64],
    dc: Option<f64>,
) -> Result<Vec<f64>> {
    let eval = evaluate(problem, &state.u.values, state.c.unwrap_or(0.0), true)?;
    let a = jacobian(problem, eval.f.as_ref().expect("coefficients"));
    let mut x = v.to_vec();
    if let Some(d) = dc {
        x.push(d);
    }
    Ok(a.mul(&x))
}

fn project_mean(problem: &Problem, u: &mut [f64]) {
    if problem.is_closed() {
        let m = u.iter().sum::<f64>() / u.len() as f64;
        u.iter_mut().for_each(|v| *v -= m);
    }
}

/// One damped Newton step with backtracking `s = 1, β, β², … ≥ min_step`.
pub fn newton_step(problem: &Problem, state: &SolveState, cfg: &SolveConfig) -> Result<SolveState> {
    let c = state.c.unwrap_or(0.0);
    let eval = evaluate(problem, &state.u.values, c, true)?;
    let dir = solve_linearized(problem, &state.u.values, &eval, cfg)?;
    let iter = state.step_history.last().map(|r| r.iter + 1).unwrap_or(1);
    let mut next = state.clone();
    if dir.v.values.iter().all(|&x| x == 0.0) && dir.dc.unwrap_or(0.0) == 0.0 {
        next.step_history.push(StepRecord {
            iter,
            residual: eval.sup,
            step: 1.0,
            margin: eval.margin,
            krylov_iters: dir.krylov_iters,
        });
        next.residual_norm = eval.sup;
        return Ok(next);
    }
    let mut s = 1.0;
    while s >= cfg.min_step {
        let mut trial: Vec<f64> = state
            .u
            .values
            .iter()
            .zip(&dir.v.values)
            .map(|(u, v)| u + s * v)
            .collect();
        project_mean(problem, &mut trial);
        let trial_c = state.c.map(|c| c + s * dir.dc.unwrap_or(0.0));
        if let Ok(e) = evaluate(problem, &trial, trial_c.unwrap_or(0.0), false) {
            if e.margin >= cfg.positivity_floor && e.sup < eval.sup {
                next.u = ScalarField::new(problem.grid(), trial)?;
                next.c = trial_c;
                next.residual_norm = e.sup;
                next.step_history.push(StepRecord {
                    iter,
                    residual: e.sup,
                    step: s,
                    margin: e.margin,
                    krylov_iters: dir.krylov_iters,
                });
                return Ok(next);
            }
        }
        s *= cfg.armijo_factor;
    }
    Err(Error::StepFailure { residual: eval.sup })
}

fn initial_state(problem: &Problem, u: ScalarField, cfg: &SolveConfig) -> Result<SolveState> {
    let grid = problem.grid();
    let c = if problem.is_closed() {
        // start from the grid average of tr(𝔤⁻¹ g)
        let e = evaluate(problem, &u.values, 0.0, false)?;
        Some(e.trace.iter().sum::<f64>() / grid.len() as f64)
    } else {
        None
    };
    let e = evaluate(problem, &u.values, c.unwrap_or(0.0), false)?;
    if e.margin < cfg.positivity_floor {
        let (_, at) = grid::min_relative_margin(
            &grid::gfrak_field(&problem.chi, &u)?.0,
            &problem.g,
            &(0..grid.len())
                .filter(|&p| problem.is_active(p))
                .collect::<Vec<_>>(),
        )?;
        return Err(Error::PositivityLost {
            location: Some(grid.multi_index(at)),
        });
    }
    Ok(SolveState {
        u,
        c,
        residual_norm: e.sup,
        step_history: vec![StepRecord {
            iter: 0,
            residual: e.sup,
            step: 0.0,
            margin: e.margin,
            krylov_iters: 0,
        }],
    })
}

/// Newton iterations from `state` until the residual is at most `newton_tol`.
pub fn newton_solve(
    problem: &Problem,
    mut state: SolveState,
    cfg: &SolveConfig,
) -> Result<SolveState> {
    cfg.validate()?;
    let mut steps = 0;
    while state.residual_norm > cfg.newton_tol {
        if steps == cfg.max_newton_iters {
            return Err(Error::NotSolved {
                residual: state.residual_norm,
            });
        }
        state = newton_step(problem, &state, cfg)?;
        steps += 1;
    }
    Ok(state)
}

/// Solves `tr(𝔤_u⁻¹ g) = c` for mean-zero `u` and `c` on a periodic grid.
pub fn solve_closed(
    problem: &Problem,
    u0: Option<&ScalarField>,
    cfg: &SolveConfig,
) -> Result<(SolveState, Diagnostics)> {
    cfg.validate()?;
    if !problem.is_closed() {
        return Err(Error::DimensionMismatch(
            "solve_closed needs a periodic grid".into(),
        ));
    }
    let grid = problem.grid();
    let start = match u0 {
        Some(u) => grid::mean_zero(u)?,
        None => ScalarField::constant(grid, 0.0),
    };
    let state = initial_state(problem, start, cfg)?;
    let state = newton_solve(problem, state, cfg)?;
    let d = grid::diagnostics(
        &state.u,
        &problem.chi,
        &problem.g,
        &ScalarField::constant(grid, 0.0),
    )?;
    Ok((state, d))
}

/// `Σ 1/λ_i(χ_u̲) - n/ψ` at the first active point where it is positive, if any.
pub fn subsolution_violation(
    problem: &Problem,
    usub: &ScalarField,
) -> Result<Option<(usize, f64)>> {
    let grid = problem.grid();
    let psi = problem
        .psi
        .as_ref()
        .ok_or_else(|| Error::DimensionMismatch("subsolution check needs psi".into()))?;
    let nf = grid.n() as f64;
    let excess: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|p| {
            if !problem.is_active(p) {
                return f64::NEG_INFINITY;
            }
            match relative_spectrum(&problem.gfrak_at(&usub.values, p), &problem.g.values[p]) {
                Ok(s) if s.min() > DEGENERATE_EIGENVALUE => {
                    s.values.iter().map(|l| 1.0 / l).sum::<f64>() - nf / psi.values[p]
                }
                _ => f64::INFINITY,
            }
        })
        .collect();
    Ok(excess
        .iter()
        .enumerate()
        .find(|(_, &e)| e > 0.0)
        .map(|(p, &e)| (p, e)))
}

/// Solves the Dirichlet problem with boundary values `phi` from the subsolution
/// `usub` (or `initial`, if given), retrying along the continuity path on `StepFailure`.
pub fn solve_dirichlet(
    problem: &Problem,
    phi: &ScalarField,
    usub: &ScalarField,
    initial: Option<&ScalarField>,
    cfg: &SolveConfig,
) -> Result<(SolveState, Diagnostics)> {
    cfg.validate()?;
    if problem.is_closed() {
        return Err(Error::DimensionMismatch(
            "solve_dirichlet needs a box grid".into(),
        ));
    }
    let grid = problem.grid();
    for p in grid.boundary_points() {
        let d = (usub.values[p] - phi.values[p]).abs();
        if d > 1e-12 * (1.0 + phi.values[p].abs()) {
            return Err(Error::SubsolutionViolation {
                index: grid.multi_index(p),
                excess: d,
            });
        }
    }
    if let Some((p, excess)) = subsolution_violation(problem, usub)? {
        return Err(Error::SubsolutionViolation {
            index: grid.multi_index(p),
            excess,
        });
    }
    let mut start = initial.cloned().unwrap_or_else(|| usub.clone());
    for p in grid.boundary_points() {
        start.values[p] = phi.values[p];
    }
    let direct = initial_state(problem, start, cfg).and_then(|s| newton_solve(problem, s, cfg));
    let state = match direct {
        Ok(s) => s,
        Err(Error::StepFailure { .. })
        | Err(Error::PositivityLost { .. })
        | Err(Error::NotSolved { .. }) => continuity_path(problem, usub, cfg)?,
        Err(e) => return Err(e),
    };
    let d = grid::diagnostics(&state.u, &problem.chi, &problem.g, usub)?;
    Ok((state, d))
}

/// `ψ₀ = n / tr(𝔤_{u̲}⁻¹ g)` at active points (the problem's `ψ` elsewhere).
pub fn continuity_start(problem: &Problem, usub: &ScalarField) -> Result<ScalarField> {
    let e = evaluate(problem, &usub.values, 0.0, false)?;
    let grid = problem.grid();
    let nf = grid.n() as f64;
    let psi = problem.psi.as_ref().expect("box problem has psi");
    let values = (0..grid.len())
        .map(|p| {
            if problem.is_active(p) {
                nf / e.trace[p]
            } else {
                psi.values[p]
            }
        })
        .collect();
    ScalarField::new(grid, values)
}

/// Solves the family `ψ_t = (1-t)ψ₀ + tψ` on `t = k/continuity_steps`, warm-starting
/// each leg; a failing leg is bisected at most three times.
pub fn continuity_path(
    problem: &Problem,
    usub: &ScalarField,
    cfg: &SolveConfig,
) -> Result<SolveState> {
    cfg.validate()?;
    let psi = problem
        .psi
        .as_ref()
        .ok_or_else(|| Error::DimensionMismatch("continuity path needs psi".into()))?;
    let psi0 = continuity_start(problem, usub)?;
    let at = |t: f64| problem.with_psi(psi0.zip_map(psi, |a, b| (1.0 - t) * a + t * b));
    // t = 0 is solved by u̲ itself
    let mut state = initial_state(&at(0.0), usub.clone(), cfg)?;
    let mut history = state.step_history.clone();
    let mut t = 0.0;
    let base = 1.0 / cfg.continuity_steps as f64;
    while t < 1.0 {
        let mut dt = base.min(1.0 - t);
        let mut bisections = 0;
        loop {
            let target = if bisections == 0 && (t + dt - 1.0).abs() < 1e-12 {
                1.0
            } else {
                t + dt
            };
            let leg = at(target);
            let attempt = evaluate(&leg, &state.u.values, 0.0, false).and_then(|e| {
                let mut s = state.clone();
                s.residual_norm = e.sup;
                newton_solve(&leg, s, cfg)
            });
            match attempt {
                Ok(s) => {
                    state = s;
                    t = target;
                    break;
                }
                Err(Error::LinearSolveFailure { .. })
                | Err(Error::StepFailure { .. })
                | Err(Error::NotSolved { .. })
                | Err(Error::PositivityLost { .. })
                    if bisections < 3 =>
                {
                    bisections += 1;
                    dt *= 0.5;
                }
                Err(Error::LinearSolveFailure { .. })
                | Err(Error::StepFailure { .. })
                | Err(Error::NotSolved { .. })
                | Err(Error::PositivityLost { .. }) => {
                    return Err(Error::ContinuityExhausted { t: target });
                }
                Err(e) => return Err(e),
            }
        }
        let offset = history.last().map(|r| r.iter).unwrap_or(0);
        for r in state.step_history.iter().skip(1) {
            if r.iter > offset {
                history.push(*r);
            }
        }
        state.step_history = history.clone();
    }
    Ok(state)
}

/// Pointwise `|−tr(F ∂_k𝔤) + tr(𝔤⁻¹ ∂_k g) − ∂_k(target)|` per real axis `k`, by
/// centered differences of the fields; this vanishes for the exact solution and is
/// `O(h²)` on solved discrete states. Points whose stencils reach inactive points are 0.
pub fn derivative_diagnostic(problem: &Problem, state: &SolveState) -> Result<Vec<ScalarField>> {
    let grid = problem.grid();
    let c = state.c.unwrap_or(0.0);
    let gf: Vec<HermitianMatrix> = (0..grid.len())
        .into_par_iter()
        .map(|p| problem.gfrak_at(&state.u.values, p))
        .collect();
    let target: Vec<f64> = (0..grid.len()).map(|p| problem.target(p, c)).collect();
    let m = 2 * grid.n();
    let usable = |p: usize| {
        problem.is_active(p)
            && (0..m).all(|a| {
                grid.first_stencil(p, a)
                    .iter()
                    .all(|&(q, _)| problem.is_active(q))
            })
    };
    (0..m)
        .map(|a| {
            let values: Result<Vec<f64>> = (0..grid.len())
                .into_par_iter()
                .map(|p| {
                    if !usable(p) {
                        return Ok(0.0);
                    }
                    let st = grid.first_stencil(p, a);
                    let diff = |field: &dyn Fn(usize) -> HermitianMatrix| {
                        let mut acc =
                            HermitianMatrix::from_upper_fn(grid.n(), |_, _| Default::default());
                        for &(q, w) in &st {
                            acc = acc.add(&field(q).scale(w));
                        }
                        acc
                    };
                    let dgf = diff(&|q| gf[q].clone());
                    let dg = diff(&|q| problem.g.values[q].clone());
                    let dt: f64 = st.iter().map(|&(q, w)| w * target[q]).sum();
                    let inv = gf[p].inverse().ok_or(Error::PositivityLost {
                        location: Some(grid.multi_index(p)),
                    })?;
                    let f = HermitianMatrix::from_matrix(
                        inv.as_matrix() * problem.g.values[p].as_matrix() * inv.as_matrix(),
                    )?;
                    Ok((-f.trace_product(&dgf) + inv.trace_product(&dg) - dt).abs())
                })
                .collect();
            ScalarField::new(grid, values?)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manufactured::{default_dirichlet, perturbed_closed};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).fold(0.0, |m, (p, q)| m.max((p - q).abs()))
    }

    #[test]
    fn constant_coefficient_symbol() {
        let grid = Grid::uniform(2, 8, Topology::Periodic).unwrap();
        let g = HermitianField::identity(&grid);
        let chi = HermitianField::constant(&grid, &HermitianMatrix::identity(2).scale(2.0));
        let problem = Problem::closed(g, chi).unwrap();
        let (state, _) = solve_closed(&problem, None, &SolveConfig::default()).unwrap();
        // F = I/4, tr(F ∂∂̄v) = Δ_h v / 16; a sine mode is an eigenvector
        let h = 1.0 / 8.0;
        let sigma = 4.0 / (h * h) * (std::f64::consts::PI * h).sin().powi(2);
        let mode = ScalarField::from_fn(&grid, |x| (2.0 * std::f64::consts::PI * x[0]).sin());
        let jv = apply_jacobian(&problem, &state, &mode.values, Some(0.0)).unwrap();
        let expected: Vec<f64> = mode.values.iter().map(|m| sigma / 16.0 * m).collect();
        assert!(sup_diff(&jv[..grid.len()], &expected) < 1e-10);
        let mut s = state.clone();
        s.c = Some(1.0);
        let eval = evaluate(&problem, &s.u.values, 1.0, true).unwrap();
        let mut forced = eval;
        forced.residual = mode.values.iter().map(|m| -m).collect();
        let dir =
            solve_linearized(&problem, &s.u.values, &forced, &SolveConfig::default()).unwrap();
        let v: Vec<f64> = mode.values.iter().map(|m| 16.0 / sigma * m).collect();
        assert!(sup_diff(&dir.v.values, &v) < 1e-9);
        assert!(dir.dc.unwrap().abs() < 1e-10);
    }

    fn residual_of(problem: &Problem, u: &[f64], c: f64) -> Vec<f64> {
        let mut r = evaluate(problem, u, c, false).unwrap().residual;
        if problem.is_closed() {
            r.push(u.iter().sum());
        }
        r
    }

    fn jacobian_error(problem: &Problem, state: &SolveState, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = problem.grid();
        let mut v: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for p in grid.boundary_points() {
            v[p] = 0.0;
        }
        let dc = state.c.map(|_| rng.gen_range(-1.0..1.0));
        let t = 1e-6;
        let c = state.c.unwrap_or(0.0);
        let moved: Vec<f64> = state
            .u
            .values
            .iter()
            .zip(&v)
            .map(|(u, v)| u + t * v)
            .collect();
        let r1 = residual_of(problem, &moved, c + t * dc.unwrap_or(0.0));
        let r0 = residual_of(problem, &state.u.values, c);
        let fd: Vec<f64> = r1.iter().zip(&r0).map(|(a, b)| (a - b) / t).collect();
        let jv = apply_jacobian(problem, state, &v, dc).unwrap();
        let scale = jv.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        // boundary rows are identities on v, which vanishes there
        sup_diff(&fd, &jv) / scale
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let grid = Grid::uniform(2, 6, Topology::Periodic).unwrap();
        let problem = perturbed_closed(&grid, 0.05).unwrap();
        let u = ScalarField::from_fn(&grid, |x| {
            0.01 * (2.0 * std::f64::consts::PI * (x[1] + x[2])).cos()
        });
        let state = initial_state(
            &problem,
            grid::mean_zero(&u).unwrap(),
            &SolveConfig::default(),
        )
        .unwrap();
        assert!(jacobian_error(&problem, &state, 1) < 1e-4);

        let m = default_dirichlet(6, 1.0).unwrap();
        let state = initial_state(&m.problem, m.usub.clone(), &SolveConfig::default()).unwrap();
        assert!(jacobian_error(&m.problem, &state, 2) < 1e-4);
    }

    #[test]
    fn trivial_closed_problem() {
        let grid = Grid::uniform(2, 6, Topology::Periodic).unwrap();
        let problem = perturbed_closed(&grid, 0.0).unwrap();
        let (state, d) = solve_closed(&problem, None, &SolveConfig::default()).unwrap();
        assert!(state.u.sup_norm() < 1e-12);
        assert!((state.c.unwrap() - 1.0).abs() < 1e-12);
        assert!(state.step_history.len() <= 6);
        assert!(d.osc < 1e-12);
    }

    #[test]
    fn closed_solution_is_unique() {
        let grid = Grid::uniform(2, 6, Topology::Periodic).unwrap();
        let problem = perturbed_closed(&grid, 0.05).unwrap();
        let cfg = SolveConfig::default();
        let (a, _) = solve_closed(&problem, None, &cfg).unwrap();
        let u0 = ScalarField::from_fn(&grid, |x| 0.05 * (2.0 * std::f64::consts::PI * x[1]).cos());
        let (b, _) = solve_closed(&problem, Some(&u0), &cfg).unwrap();
        assert!(a.residual_norm <= cfg.newton_tol);
        assert!(sup_diff(&a.u.values, &b.u.values) < 1e-8);
        assert!((a.c.unwrap() - b.c.unwrap()).abs() < 1e-10);
        assert!(a
            .step_history
            .windows(2)
            .all(|w| w[1].residual < w[0].residual));
    }

    #[test]
    fn dirichlet_manufactured_converges() {
        let m = default_dirichlet(7, 1.0).unwrap();
        let cfg = SolveConfig::default();
        let (state, d) = solve_dirichlet(&m.problem, &m.phi, &m.usub, None, &cfg).unwrap();
        assert!(state.residual_norm <= cfg.newton_tol);
        assert!(sup_diff(&state.u.values, &m.exact.values) < 1e-2);
        for p in m.problem.grid().boundary_points() {
            assert_eq!(state.u.values[p], m.phi.values[p]);
        }
        assert!(d.sub_gap_min >= -1e-12);
        let diag = derivative_diagnostic(&m.problem, &state).unwrap();
        assert!(diag.iter().all(|f| f.max() < 0.5));
    }

    #[test]
    fn continuity_path_reaches_solution() {
        let m = default_dirichlet(6, 1.0).unwrap();
        let cfg = SolveConfig::default();
        let direct = initial_state(&m.problem, m.usub.clone(), &cfg)
            .and_then(|s| newton_solve(&m.problem, s, &cfg))
            .unwrap();
        let path = continuity_path(&m.problem, &m.usub, &cfg).unwrap();
        assert!(sup_diff(&direct.u.values, &path.u.values) < 1e-8);
    }

    #[test]
    fn violated_subsolution_is_rejected() {
        let m = default_dirichlet(6, 1.0).unwrap();
        let big = m
            .problem
            .with_psi(m.problem.psi.clone().unwrap().map(|p| 1.1 * p));
        let err =
            solve_dirichlet(&big, &m.phi, &m.usub, None, &SolveConfig::default()).unwrap_err();
        assert!(matches!(err, Error::SubsolutionViolation { excess, .. } if excess > 0.0));
    }

    #[test]
    fn config_validation() {
        assert!(SolveConfig::default().validate().is_ok());
        let bad = SolveConfig {
            armijo_factor: 1.0,
            ..SolveConfig::default()
        };
        assert!(matches!(bad.validate(), Err(Error::Config { key, .. }) if key == "armijo_factor"));
    }
}

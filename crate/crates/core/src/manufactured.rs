//! Problems with known solutions, used by the examples, the CLI and the tests.

use std::sync::Arc;

use crate::error::Result;
use crate::expr::{ExactDerivatives, Expr};
use crate::grid::{Grid, HermitianField, ScalarField, Topology};
use crate::hermitian::HermitianMatrix;
use crate::solver::Problem;

/// Default manufactured solution on `[0,1]^{2n}` for `n = 2`. Its discrete complex
/// Hessian exceeds the exact one by `a h² I` (`a = 0.5` the quartic weight), so it is a
/// strict discrete subsolution of the equation built from its exact Hessian.
pub const MANUFACTURED_SOLUTION: &str =
    "0.5*((x1-0.5)^4 + (x2-0.5)^4 + (y1-0.5)^4 + (y2-0.5)^4) + 0.1*(x1*y2 - y1*x2) + 0.05*(x1^3 + y2^3)";

pub struct Manufactured {
    pub problem: Problem,
    /// Boundary data; equal to `exact` everywhere.
    pub phi: ScalarField,
    pub usub: ScalarField,
    pub exact: ScalarField,
}

/// Dirichlet problem with `g = I`, `χ = 2I` and `ψ = n / tr((χ + ∂∂̄u*)⁻¹)` for
/// `u* = scale · expr`.
pub fn manufactured_dirichlet(grid: &Arc<Grid>, expr: &Expr, scale: f64) -> Result<Manufactured> {
    let n = grid.n();
    let exact_d = ExactDerivatives::new(n);
    let g = HermitianField::identity(grid);
    let chi = HermitianField::constant(grid, &HermitianMatrix::identity(n).scale(2.0));
    let psi_values: Vec<f64> = (0..grid.len())
        .map(|p| {
            let x = grid.coords(p);
            let gf = chi.values[p].add(&exact_d.complex_hessian(expr, &x).scale(scale));
            let t: f64 = gf.eigenvalues().iter().map(|l| 1.0 / l).sum();
            n as f64 / t
        })
        .collect();
    let psi = ScalarField::new(grid, psi_values)?;
    let exact = ScalarField::from_fn(grid, |x| scale * expr.eval(x));
    Ok(Manufactured {
        problem: Problem::dirichlet(g, chi, psi)?,
        phi: exact.clone(),
        usub: exact.clone(),
        exact,
    })
}

pub fn default_dirichlet(points: usize, scale: f64) -> Result<Manufactured> {
    let grid = Grid::uniform(2, points, Topology::Box)?;
    let e = Expr::parse(MANUFACTURED_SOLUTION, 2)?;
    manufactured_dirichlet(&grid, &e, scale)
}

/// Closed problem with `g = I` and `χ = 2I + amplitude · ∂∂̄ sin(2π x₁)`.
pub fn perturbed_closed(grid: &Arc<Grid>, amplitude: f64) -> Result<Problem> {
    let n = grid.n();
    let d = ExactDerivatives::new(n);
    let e = Expr::parse("sin(2*pi*x1)", n)?;
    let two = HermitianMatrix::identity(n).scale(2.0);
    let chi = HermitianField::from_fn(grid, |x| {
        two.add(&d.complex_hessian(&e, x).scale(amplitude))
    });
    Problem::closed(HermitianField::identity(grid), chi)
}

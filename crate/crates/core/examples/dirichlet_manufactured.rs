//! Dirichlet problem with a known polynomial solution on a 9^4 box grid.

use jeq::manufactured::default_dirichlet;
use jeq::solver::{derivative_diagnostic, solve_dirichlet, SolveConfig};

fn main() -> jeq::Result<()> {
    let cfg = SolveConfig::default();
    let m = default_dirichlet(9, 1.0)?;
    let (state, d) = solve_dirichlet(&m.problem, &m.phi, &m.usub, None, &cfg)?;
    let err = state.u.zip_map(&m.exact, |a, b| a - b).sup_norm();
    println!("sup error={err:.3e}  residual={:.2e}", state.residual_norm);
    for r in &state.step_history {
        println!(
            "  iter={} residual={:.3e} step={} krylov={}",
            r.iter, r.residual, r.step, r.krylov_iters
        );
    }
    println!(
        "C0={:.4} grad_max={:.4} lap_max={:.4} boundary grad={:.4} boundary lap={:.4}",
        d.osc,
        d.grad_max,
        d.lap_max,
        d.boundary_grad_max.unwrap_or(f64::NAN),
        d.boundary_lap_max.unwrap_or(f64::NAN)
    );
    let dd = derivative_diagnostic(&m.problem, &state)?;
    let worst = dd.iter().map(|f| f.sup_norm()).fold(0.0, f64::max);
    println!("differentiated equation residual: {worst:.3e}");
    Ok(())
}

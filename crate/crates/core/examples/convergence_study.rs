//! Manufactured Dirichlet problem on a sequence of box grids; prints the sup error,
//! the ratio between successive grids and the Newton residual history.

use std::time::Instant;

use jeq::manufactured::default_dirichlet;
use jeq::solver::{solve_dirichlet, SolveConfig};

fn main() -> jeq::Result<()> {
    let cfg = SolveConfig::default();
    let mut last: Option<f64> = None;
    for points in [5, 9, 17] {
        let t = Instant::now();
        let m = default_dirichlet(points, 1.0)?;
        let (state, _) = solve_dirichlet(&m.problem, &m.phi, &m.usub, None, &cfg)?;
        let err = state
            .u
            .values
            .iter()
            .zip(&m.exact.values)
            .fold(0.0f64, |a, (u, e)| a.max((u - e).abs()));
        let ratio = last.map(|l| l / err);
        println!(
            "points={points:>2}  sup_error={err:.3e}  ratio={}  newton_steps={}  time={:.1}s",
            ratio.map_or("-".to_string(), |r| format!("{r:.3}")),
            state.step_history.len() - 1,
            t.elapsed().as_secs_f64()
        );
        for r in &state.step_history {
            println!(
                "    iter={} residual={:.3e} step={} margin={:.3e} krylov={}",
                r.iter, r.residual, r.step, r.margin, r.krylov_iters
            );
        }
        last = Some(err);
    }
    Ok(())
}

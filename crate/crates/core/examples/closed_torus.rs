//! Closed problem on the flat torus with a perturbed `χ`: solves for `(u, c)` and
//! checks that `χ = 2I` gives `u ≡ 0`, `c = n/2`.

use jeq::grid::{Grid, Topology};
use jeq::manufactured::perturbed_closed;
use jeq::solver::{solve_closed, SolveConfig};

fn main() -> jeq::Result<()> {
    let cfg = SolveConfig::default();
    let grid = Grid::uniform(2, 8, Topology::Periodic)?;
    for amplitude in [0.0, 0.02, 0.05] {
        let problem = perturbed_closed(&grid, amplitude)?;
        let (state, d) = solve_closed(&problem, None, &cfg)?;
        println!(
            "amplitude={amplitude:<5} c={:.10} residual={:.2e} newton={} osc(u)={:.3e} mean(u)={:.1e} grad_max={:.3e}",
            state.c.unwrap(),
            state.residual_norm,
            state.step_history.len() - 1,
            d.osc,
            state.u.mean(),
            d.grad_max
        );
    }
    Ok(())
}

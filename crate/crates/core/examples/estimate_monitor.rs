//! Estimate quantities on a solved Dirichlet problem and on a closed problem.

use jeq::grid::{Grid, ScalarField, Topology};
use jeq::manufactured::{default_dirichlet, perturbed_closed};
use jeq::monitor::estimate_monitor;
use jeq::solver::{solve_closed, solve_dirichlet, SolveConfig};

fn main() -> jeq::Result<()> {
    let cfg = SolveConfig::default();
    let m = default_dirichlet(9, 1.0)?;
    let (state, _) = solve_dirichlet(&m.problem, &m.phi, &m.usub, None, &cfg)?;
    let r = estimate_monitor(&m.problem, &state, &m.usub, 1.0, 1.0, &cfg)?;
    println!("dirichlet: {}", serde_json::to_string_pretty(&r).unwrap());

    let grid = Grid::uniform(2, 8, Topology::Periodic)?;
    let problem = perturbed_closed(&grid, 0.05)?;
    let (state, _) = solve_closed(&problem, None, &cfg)?;
    let r = estimate_monitor(
        &problem,
        &state,
        &ScalarField::constant(&grid, 0.0),
        1.0,
        1.0,
        &cfg,
    )?;
    println!(
        "closed: epsilon={:.4} theta={:.4} N={:.3} W_max={:.4} points with W >= N: {}",
        r.epsilon, r.theta, r.big_n, r.w_max, r.lemma_points
    );
    Ok(())
}

//! Continuity path from `ψ₀ = n/tr(𝔤_{u̲}⁻¹)` to the target `ψ`, compared with a direct
//! Newton solve of the same problem.

use jeq::manufactured::default_dirichlet;
use jeq::solver::{continuity_path, continuity_start, solve_dirichlet, SolveConfig};

fn main() -> jeq::Result<()> {
    let m = default_dirichlet(9, 1.0)?;
    let psi = m.problem.psi.as_ref().unwrap();
    let psi0 = continuity_start(&m.problem, &m.usub)?;
    println!(
        "psi in [{:.4}, {:.4}], psi0 in [{:.4}, {:.4}]",
        psi.min(),
        psi.max(),
        psi0.min(),
        psi0.max()
    );
    for steps in [1, 2, 4, 8] {
        let cfg = jeq::solver::SolveConfig {
            continuity_steps: steps,
            ..SolveConfig::default()
        };
        let s = continuity_path(&m.problem, &m.usub, &cfg)?;
        let err = s.u.zip_map(&m.exact, |a, b| a - b).sup_norm();
        println!(
            "legs={steps}: residual={:.2e} newton steps total={} sup error={err:.3e}",
            s.residual_norm,
            s.step_history.len() - 1
        );
    }
    let (direct, _) = solve_dirichlet(&m.problem, &m.phi, &m.usub, None, &SolveConfig::default())?;
    let s = continuity_path(&m.problem, &m.usub, &SolveConfig::default())?;
    println!(
        "direct vs continuity: {:.2e}",
        direct.u.zip_map(&s.u, |a, b| a - b).sup_norm()
    );
    Ok(())
}

//! Relative spectra, the subsolution inequality and the cone condition on a few
//! diagonal examples, then a grid-wide subsolution check for the manufactured problem.

use jeq::hermitian::{relative_spectrum, HermitianMatrix};
use jeq::manufactured::default_dirichlet;
use jeq::pointwise::{cone_excess, subsolution_excess};
use jeq::solver::subsolution_violation;

fn main() -> jeq::Result<()> {
    let g = HermitianMatrix::identity(2);
    let psi = 1.0;
    for d in [[2.0, 2.0], [4.0, 0.9], [10.0, 0.6], [1.0, 1.0], [0.5, 3.0]] {
        let lambda = relative_spectrum(&HermitianMatrix::diagonal(&d), &g)?;
        let sub = subsolution_excess(&lambda, psi)?;
        let cone = cone_excess(&lambda, psi)?;
        println!(
            "chi~ = diag({:>4}, {:>4})  subsolution excess={sub:+.4}  cone excess={cone:+.4}  subsolution={} cone={}",
            d[0],
            d[1],
            sub <= 0.0,
            cone < 0.0
        );
    }

    let m = default_dirichlet(9, 1.0)?;
    match subsolution_violation(&m.problem, &m.usub)? {
        None => println!("manufactured subsolution on 9^4: holds at every interior point"),
        Some((p, e)) => println!(
            "violation at {:?}: excess {e:.3e}",
            m.problem.grid().multi_index(p)
        ),
    }
    Ok(())
}

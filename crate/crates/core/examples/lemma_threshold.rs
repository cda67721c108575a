//! Threshold constants for the cone lemma and a randomized search for violations.

use jeq::pointwise::lemma_threshold;
use jeq::pointwise::lemma_verify_batch;

fn main() -> jeq::Result<()> {
    for (epsilon, psi_min, psi_max, n) in [
        (0.5, 0.5, 1.0, 2),
        (0.1, 1.0, 2.0, 2),
        (0.25, 0.5, 2.0, 3),
        (1.0, 1.0, 1.0, 4),
    ] {
        let thr = lemma_threshold(epsilon, psi_min, psi_max, n)?;
        let batch = lemma_verify_batch(&thr, 20_000, 11)?;
        println!(
            "n={n} eps={epsilon} psi=[{psi_min}, {psi_max}]  theta={:.4} delta={:.4} N={:.3}  samples={} violations={} worst margin={:.3e}",
            thr.theta, thr.delta, thr.big_n, batch.samples, batch.violations, batch.worst_margin
        );
    }
    match lemma_threshold(0.1, 20.0, 30.0, 2) {
        Ok(t) => println!("eps=0.1 psi=[20, 30]: N={}", t.big_n),
        Err(e) => println!("eps=0.1 psi=[20, 30]: {e}"),
    }
    Ok(())
}

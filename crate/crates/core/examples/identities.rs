//! Commutation residuals of covariant derivatives over the metric catalog, plus the
//! torsion of each entry at one base point.

use jeq::catalog::{catalog, identity_suite, METRICS};
use jeq::geometry::{commutation_residuals, connection};

fn main() -> jeq::Result<()> {
    let base = [0.2, -0.1, 0.3, 0.05];
    for name in METRICS {
        let e = catalog(name, &base)?;
        let c = connection(&e.metric)?;
        let mut worst = 0.0f64;
        for (_, v) in &e.scalars {
            worst = worst.max(commutation_residuals(v, &e.metric)?.max_residual());
        }
        println!(
            "{name:<20} kahler={:<5} |T|={:.3e}  worst identity residual={worst:.2e}",
            e.kahler,
            c.torsion.max_abs()
        );
    }
    for n in [2, 3] {
        let r = identity_suite(n, 10, 7)?;
        println!(
            "n={n}: {} base points, third={:.2e} mixed={:.2e} swap={:.2e}",
            r.base_points,
            r.residuals.third_order.max_residual,
            r.residuals.fourth_order_mixed.max_residual,
            r.residuals.fourth_order_swap.max_residual
        );
    }
    Ok(())
}

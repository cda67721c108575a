//! Writes a scalar and a Hermitian field to CSV and reads them back.

use jeq::field_io::{load_hermitian, load_scalar, peek_header, save_hermitian, save_scalar};
use jeq::grid::{complex_hessian, Grid, ScalarField, Topology};

fn main() -> jeq::Result<()> {
    let grid = Grid::new(2, &[4, 5, 4, 6], Topology::Periodic)?;
    let u = ScalarField::from_fn(&grid, |x| (6.0 * x[0]).sin() * x[3] + x[1] * x[2]);
    let h = complex_hessian(&u);
    let dir = std::env::temp_dir().join(format!("jeq-field-io-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let (up, hp) = (dir.join("u.csv"), dir.join("hessian.csv"));
    save_scalar(&up, &u)?;
    save_hermitian(&hp, &h)?;
    println!("u.csv header: {:?}", peek_header(&up)?);
    println!("hessian.csv header: {:?}", peek_header(&hp)?);
    let u2 = load_scalar(&up, &grid)?;
    let h2 = load_hermitian(&hp, &grid)?;
    println!("scalar exact round trip: {}", u2.values == u.values);
    println!("hermitian exact round trip: {}", h2.values == h.values);
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}

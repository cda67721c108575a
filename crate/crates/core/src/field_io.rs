//! Plain-text field files.
//!
//! ```text
//! # jeq-field v1, n=2, shape=4,4,4,4, kind=scalar
//! 0,0,0,0,0.125
//! ...
//! ```
//! Hermitian rows carry `re,im` pairs of the `n × n` matrix in row-major order.
//! Values are written in shortest round-trip form, so write-then-read is bit-exact.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Grid, HermitianField, ScalarField};
use crate::hermitian::HermitianMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Scalar,
    Hermitian,
}

impl FieldKind {
    fn as_str(self) -> &'static str {
        match self {
            FieldKind::Scalar => "scalar",
            FieldKind::Hermitian => "hermitian",
        }
    }
}

/// Contents of a field file before it is bound to a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldData {
    pub n: usize,
    pub shape: Vec<usize>,
    pub kind: FieldKind,
    /// Per point (row-major flat order): 1 value or `2n²` values.
    pub values: Vec<Vec<f64>>,
}

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: msg.into(),
    }
}

fn header(n: usize, shape: &[usize], kind: FieldKind) -> String {
    let s: Vec<String> = shape.iter().map(|k| k.to_string()).collect();
    format!(
        "# jeq-field v1, n={n}, shape={}, kind={}\n",
        s.join(","),
        kind.as_str()
    )
}

fn write_rows(
    out: &mut impl Write,
    grid: &Grid,
    kind: FieldKind,
    row: impl Fn(usize, &mut String),
) -> Result<()> {
    out.write_all(header(grid.n(), grid.shape(), kind).as_bytes())?;
    let mut line = String::new();
    for p in 0..grid.len() {
        line.clear();
        for (a, k) in grid.multi_index(p).iter().enumerate() {
            if a > 0 {
                line.push(',');
            }
            write!(line, "{k}").expect("string write");
        }
        row(p, &mut line);
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}

pub fn write_scalar(out: &mut impl Write, u: &ScalarField) -> Result<()> {
    write_rows(out, &u.grid, FieldKind::Scalar, |p, line| {
        write!(line, ",{}", u.values[p]).expect("string write");
    })
}

pub fn write_hermitian(out: &mut impl Write, h: &HermitianField) -> Result<()> {
    write_rows(out, &h.grid, FieldKind::Hermitian, |p, line| {
        for z in h.values[p].to_row_major() {
            write!(line, ",{},{}", z.re, z.im).expect("string write");
        }
    })
}

pub fn save_scalar(path: &Path, u: &ScalarField) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_scalar(&mut f, u)?;
    f.flush()?;
    Ok(())
}

pub fn save_hermitian(path: &Path, h: &HermitianField) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_hermitian(&mut f, h)?;
    f.flush()?;
    Ok(())
}

fn parse_header(line: &str) -> Result<(usize, Vec<usize>, FieldKind)> {
    let body = line
        .strip_prefix("# jeq-field v1,")
        .ok_or_else(|| perr(1, "missing `# jeq-field v1` header"))?;
    let (mut n, mut shape, mut kind) = (None, None, None);
    // shape values contain commas, so split on the key markers instead
    let mut rest = body.trim();
    while !rest.is_empty() {
        let (key, after) = rest
            .split_once('=')
            .ok_or_else(|| perr(1, format!("malformed header near `{rest}`")))?;
        let key = key.trim().trim_start_matches(',').trim();
        let end = ["n=", "shape=", "kind="]
            .iter()
            .filter_map(|k| {
                after
                    .find(&format!(", {k}"))
                    .or_else(|| after.find(&format!(",{k}")))
            })
            .min()
            .unwrap_or(after.len());
        let value = after[..end].trim();
        rest = after[end..].trim_start_matches(',').trim();
        match key {
            "n" => {
                n = Some(
                    value
                        .parse::<usize>()
                        .map_err(|_| perr(1, format!("bad n `{value}`")))?,
                )
            }
            "shape" => {
                shape = Some(
                    value
                        .split(',')
                        .map(|s| s.trim().parse::<usize>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|_| perr(1, format!("bad shape `{value}`")))?,
                )
            }
            "kind" => {
                kind = Some(match value {
                    "scalar" => FieldKind::Scalar,
                    "hermitian" => FieldKind::Hermitian,
                    other => return Err(perr(1, format!("unknown kind `{other}`"))),
                })
            }
            other => return Err(perr(1, format!("unknown header key `{other}`"))),
        }
    }
    let n = n.ok_or_else(|| perr(1, "header lacks n"))?;
    let shape = shape.ok_or_else(|| perr(1, "header lacks shape"))?;
    let kind = kind.ok_or_else(|| perr(1, "header lacks kind"))?;
    if shape.len() != 2 * n {
        return Err(perr(
            1,
            format!("shape has {} axes but n = {n} needs {}", shape.len(), 2 * n),
        ));
    }
    Ok((n, shape, kind))
}

pub fn read_field(input: impl BufRead) -> Result<FieldData> {
    let mut lines = input.lines();
    let first = lines.next().ok_or_else(|| perr(1, "empty file"))??;
    let (n, shape, kind) = parse_header(first.trim())?;
    let total: usize = shape.iter().product();
    let width = match kind {
        FieldKind::Scalar => 1,
        FieldKind::Hermitian => 2 * n * n,
    };
    let mut strides = vec![1usize; 2 * n];
    for a in (0..2 * n - 1).rev() {
        strides[a] = strides[a + 1] * shape[a + 1];
    }
    let mut values: Vec<Option<Vec<f64>>> = vec![None; total];
    let mut last = 1;
    for (k, line) in lines.enumerate() {
        let lineno = k + 2;
        last = lineno;
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 2 * n + width {
            return Err(perr(
                lineno,
                format!("expected {} columns, found {}", 2 * n + width, cols.len()),
            ));
        }
        let mut p = 0;
        for a in 0..2 * n {
            let i: usize = cols[a]
                .parse()
                .map_err(|_| perr(lineno, format!("bad index `{}`", cols[a])))?;
            if i >= shape[a] {
                return Err(perr(
                    lineno,
                    format!("index {i} out of range on axis {}", a + 1),
                ));
            }
            p += i * strides[a];
        }
        let v = cols[2 * n..]
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| perr(lineno, format!("bad value `{s}`")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if values[p].replace(v).is_some() {
            return Err(perr(lineno, "duplicate grid point"));
        }
    }
    let values = values
        .into_iter()
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| perr(last, format!("file covers fewer than {total} grid points")))?;
    Ok(FieldData {
        n,
        shape,
        kind,
        values,
    })
}

fn check_grid(data: &FieldData, grid: &Grid, kind: FieldKind) -> Result<()> {
    if data.n != grid.n() || data.shape != grid.shape() {
        return Err(perr(
            1,
            format!(
                "file has n={}, shape={:?}; grid has n={}, shape={:?}",
                data.n,
                data.shape,
                grid.n(),
                grid.shape()
            ),
        ));
    }
    if data.kind != kind {
        return Err(perr(1, format!("expected a {} field", kind.as_str())));
    }
    Ok(())
}

pub fn read_scalar(input: impl BufRead, grid: &Arc<Grid>) -> Result<ScalarField> {
    let data = read_field(input)?;
    check_grid(&data, grid, FieldKind::Scalar)?;
    ScalarField::new(grid, data.values.into_iter().map(|v| v[0]).collect())
}

pub fn read_hermitian(input: impl BufRead, grid: &Arc<Grid>) -> Result<HermitianField> {
    let data = read_field(input)?;
    check_grid(&data, grid, FieldKind::Hermitian)?;
    let n = grid.n();
    let mut out = Vec::with_capacity(data.values.len());
    for (p, v) in data.values.iter().enumerate() {
        let entries: Vec<Complex64> = v.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect();
        // rows are written in point order, so p + 2 is the line for a file we wrote
        let h =
            HermitianMatrix::from_row_major(n, &entries).map_err(|e| perr(p + 2, e.to_string()))?;
        out.push(h);
    }
    HermitianField::new(grid, out)
}

pub fn load_scalar(path: &Path, grid: &Arc<Grid>) -> Result<ScalarField> {
    read_scalar(std::io::BufReader::new(std::fs::File::open(path)?), grid)
}

pub fn load_hermitian(path: &Path, grid: &Arc<Grid>) -> Result<HermitianField> {
    read_hermitian(std::io::BufReader::new(std::fs::File::open(path)?), grid)
}

/// Reads only the header of a field file.
pub fn peek_header(path: &Path) -> Result<(usize, Vec<usize>, FieldKind)> {
    let f = std::io::BufReader::new(std::fs::File::open(path)?);
    let first = f.lines().next().ok_or_else(|| perr(1, "empty file"))??;
    parse_header(first.trim())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Topology;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn scalar_roundtrip_is_bit_exact() {
        let g = Grid::new(2, &[4, 5, 4, 6], Topology::Box).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u = ScalarField::new(
            &g,
            (0..g.len())
                .map(|_| rng.gen::<f64>() * 1e3 - 1e-7)
                .collect(),
        )
        .unwrap();
        let mut buf = Vec::new();
        write_scalar(&mut buf, &u).unwrap();
        let back = read_scalar(buf.as_slice(), &g).unwrap();
        assert_eq!(back.values, u.values);
    }

    #[test]
    fn hermitian_roundtrip_is_bit_exact() {
        let g = Grid::uniform(2, 4, Topology::Periodic).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = HermitianField::new(
            &g,
            (0..g.len())
                .map(|_| {
                    HermitianMatrix::from_upper_fn(2, |_, _| Complex64::new(rng.gen(), rng.gen()))
                })
                .collect(),
        )
        .unwrap();
        let mut buf = Vec::new();
        write_hermitian(&mut buf, &h).unwrap();
        assert_eq!(read_hermitian(buf.as_slice(), &g).unwrap(), h);
    }

    #[test]
    fn malformed_row_names_its_line() {
        let g = Grid::uniform(2, 4, Topology::Periodic).unwrap();
        let mut buf = Vec::new();
        write_scalar(&mut buf, &ScalarField::constant(&g, 1.0)).unwrap();
        let mut text = String::from_utf8(buf).unwrap();
        text = text.replacen("0,0,0,2,1\n", "0,0,0,2,abc\n", 1);
        assert_eq!(
            read_scalar(text.as_bytes(), &g).unwrap_err(),
            Error::Parse {
                line: 4,
                message: "bad value `abc`".into()
            }
        );
    }

    #[test]
    fn header_mismatch_is_a_parse_error() {
        let g = Grid::uniform(2, 4, Topology::Periodic).unwrap();
        let g3 = Grid::uniform(3, 4, Topology::Periodic).unwrap();
        let mut buf = Vec::new();
        write_scalar(&mut buf, &ScalarField::constant(&g, 1.0)).unwrap();
        assert!(matches!(
            read_scalar(buf.as_slice(), &g3),
            Err(Error::Parse { line: 1, .. })
        ));
        let bad = "# jeq-field v1, n=3, shape=4,4,4,4, kind=scalar\n";
        assert!(matches!(
            read_field(bad.as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
        let short = "# jeq-field v1, n=2, shape=4,4,4,4, kind=scalar\n0,0,0,0,1\n";
        assert!(matches!(
            read_field(short.as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
    }
}

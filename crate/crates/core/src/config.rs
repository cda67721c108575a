//! `key = value` problem configuration files.
//!
//! Blank lines and text after `#` are ignored. Field-valued keys take a number,
//! an expression in the grid coordinates, or a path ending in `.csv` (relative
//! to the config file). `chi` takes a multiple of the metric or a path, and
//! `chi_ddbar = <expr>` adds the exact complex Hessian of an expression.
//!
//! ```text
//! n = 2
//! shape = 16,16,16,16
//! topology = periodic
//! chi = 2.0
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expr::{ExactDerivatives, Expr};
use crate::field_io::{self, FieldKind};
use crate::grid::{Grid, HermitianField, ScalarField, Topology};
use crate::solver::{Problem, SolveConfig};

const KEYS: &[&str] = &[
    "n",
    "shape",
    "topology",
    "metric",
    "chi",
    "chi_ddbar",
    "psi",
    "usub",
    "phi",
    "initial",
    "manufactured",
    "output",
    "a_grad",
    "a_hess",
    "max_newton_iters",
    "newton_tol",
    "armijo_factor",
    "min_step",
    "krylov_tol",
    "krylov_max_iters",
    "krylov_restart",
    "continuity_steps",
    "positivity_floor",
];

#[derive(Debug, Clone, PartialEq)]
pub enum FieldSpec {
    Constant(f64),
    Expression(String, Expr),
    Csv(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum TensorSpec {
    /// The given multiple of the metric (`1` for the flat metric).
    Multiple(f64),
    Csv(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemConfig {
    pub n: usize,
    pub shape: Vec<usize>,
    pub topology: Topology,
    pub metric: TensorSpec,
    pub chi: TensorSpec,
    pub chi_ddbar: Option<(String, Expr)>,
    pub psi: Option<FieldSpec>,
    pub usub: Option<FieldSpec>,
    pub phi: Option<FieldSpec>,
    pub initial: Option<FieldSpec>,
    /// Exact solution `u*`; fills `psi`, `phi` and `usub` when they are absent.
    pub manufactured: Option<(String, Expr)>,
    pub output: PathBuf,
    pub a_grad: f64,
    pub a_hess: f64,
    pub solve: SolveConfig,
}

/// The problem assembled from a config, with its boundary data and subsolution.
#[derive(Debug, Clone)]
pub struct BuiltProblem {
    pub problem: Problem,
    pub phi: Option<ScalarField>,
    pub usub: ScalarField,
    pub initial: Option<ScalarField>,
    /// `ψ` on periodic grids, where the solver does not use it.
    pub psi: Option<ScalarField>,
    pub exact: Option<ScalarField>,
}

struct Entry {
    line: usize,
    value: String,
}

fn err(key: &str, line: usize, msg: impl Into<String>) -> Error {
    Error::config(key, Some(line), msg)
}

fn number<T: std::str::FromStr>(key: &str, e: &Entry) -> Result<T> {
    e.value
        .parse()
        .map_err(|_| err(key, e.line, format!("expected a number, got `{}`", e.value)))
}

pub fn parse_config(path: &Path) -> Result<ProblemConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config("file", None, format!("{}: {e}", path.display())))?;
    parse_config_str(&text, path.parent().unwrap_or(Path::new(".")))
}

/// Parses config text; relative paths resolve against `base`.
pub fn parse_config_str(text: &str, base: &Path) -> Result<ProblemConfig> {
    let mut entries: BTreeMap<String, Entry> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (k, v) = body
            .split_once('=')
            .ok_or_else(|| err(body, line, "expected `key = value`"))?;
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(err(k, line, "unknown key"));
        }
        if let Some(prev) = entries.get(k) {
            return Err(err(
                k,
                line,
                format!("duplicate key (first set on line {})", prev.line),
            ));
        }
        entries.insert(
            k.to_string(),
            Entry {
                line,
                value: v.to_string(),
            },
        );
    }

    let n: usize = match entries.get("n") {
        Some(e) => number("n", e)?,
        None => return Err(Error::config("n", None, "missing required key")),
    };
    if n < 2 {
        return Err(err("n", entries["n"].line, "n must be at least 2"));
    }
    let shape_e = entries
        .get("shape")
        .ok_or_else(|| Error::config("shape", None, "missing required key"))?;
    let shape: Vec<usize> = shape_e
        .value
        .split(',')
        .map(|s| {
            s.trim().parse().map_err(|_| {
                err(
                    "shape",
                    shape_e.line,
                    format!("bad axis size `{}`", s.trim()),
                )
            })
        })
        .collect::<Result<_>>()?;
    if shape.len() != 2 * n {
        return Err(err(
            "shape",
            shape_e.line,
            format!("expected {} axis sizes, got {}", 2 * n, shape.len()),
        ));
    }
    if let Some(&s) = shape.iter().find(|&&s| s < crate::grid::MIN_AXIS_POINTS) {
        return Err(err(
            "shape",
            shape_e.line,
            format!("axis size {s} is below {}", crate::grid::MIN_AXIS_POINTS),
        ));
    }
    let topology = match entries.get("topology") {
        None => Topology::Periodic,
        Some(e) => match e.value.as_str() {
            "periodic" => Topology::Periodic,
            "box" => Topology::Box,
            other => {
                return Err(err(
                    "topology",
                    e.line,
                    format!("expected `periodic` or `box`, got `{other}`"),
                ))
            }
        },
    };

    let csv = |key: &str, e: &Entry| -> Result<PathBuf> {
        let p = base.join(&e.value);
        if !p.is_file() {
            return Err(err(
                key,
                e.line,
                format!("file `{}` not found", p.display()),
            ));
        }
        let (fn_, fshape, _) =
            field_io::peek_header(&p).map_err(|x| err(key, e.line, x.to_string()))?;
        if fn_ != n || fshape != shape {
            return Err(err(
                key,
                e.line,
                format!("dimension mismatch: file has n={fn_}, shape={fshape:?}; config has n={n}, shape={shape:?}"),
            ));
        }
        Ok(p)
    };
    let expr = |key: &str, e: &Entry| -> Result<(String, Expr)> {
        Expr::parse(&e.value, n)
            .map(|x| (e.value.clone(), x))
            .map_err(|x| err(key, e.line, x.to_string()))
    };
    let field = |key: &str| -> Result<Option<FieldSpec>> {
        let Some(e) = entries.get(key) else {
            return Ok(None);
        };
        if e.value.ends_with(".csv") {
            return Ok(Some(FieldSpec::Csv(csv(key, e)?)));
        }
        let (src, x) = expr(key, e)?;
        Ok(Some(match x.as_constant() {
            Some(c) => FieldSpec::Constant(c),
            None => FieldSpec::Expression(src, x),
        }))
    };
    let tensor = |key: &str, default: Option<f64>| -> Result<TensorSpec> {
        match entries.get(key) {
            None => default
                .map(TensorSpec::Multiple)
                .ok_or_else(|| Error::config(key, None, "missing required key")),
            Some(e) if e.value.ends_with(".csv") => Ok(TensorSpec::Csv(csv(key, e)?)),
            Some(e) if key == "metric" && e.value == "flat" => Ok(TensorSpec::Multiple(1.0)),
            Some(e) => {
                let c: f64 = number(key, e)?;
                if !(c > 0.0) {
                    return Err(err(key, e.line, "multiple of the metric must be positive"));
                }
                Ok(TensorSpec::Multiple(c))
            }
        }
    };

    let mut solve = SolveConfig::default();
    macro_rules! set {
        ($($k:ident),*) => {$(
            if let Some(e) = entries.get(stringify!($k)) {
                solve.$k = number(stringify!($k), e)?;
            }
        )*};
    }
    set!(
        max_newton_iters,
        newton_tol,
        armijo_factor,
        min_step,
        krylov_tol,
        krylov_max_iters,
        krylov_restart,
        continuity_steps,
        positivity_floor
    );
    if let Err(Error::Config { key, message, .. }) = solve.validate() {
        let line = entries.get(&key).map(|e| e.line);
        return Err(Error::config(key, line, message));
    }

    let amp = |key: &str| -> Result<f64> { entries.get(key).map_or(Ok(1.0), |e| number(key, e)) };
    let cfg = ProblemConfig {
        n,
        shape: shape.clone(),
        topology,
        metric: tensor("metric", Some(1.0))?,
        chi: tensor("chi", None)?,
        chi_ddbar: entries
            .get("chi_ddbar")
            .map(|e| expr("chi_ddbar", e))
            .transpose()?,
        psi: field("psi")?,
        usub: field("usub")?,
        phi: field("phi")?,
        initial: field("initial")?,
        manufactured: entries
            .get("manufactured")
            .map(|e| expr("manufactured", e))
            .transpose()?,
        output: entries
            .get("output")
            .map_or_else(|| base.join("out"), |e| base.join(&e.value)),
        a_grad: amp("a_grad")?,
        a_hess: amp("a_hess")?,
        solve,
    };
    if cfg.topology == Topology::Box && cfg.psi.is_none() && cfg.manufactured.is_none() {
        return Err(Error::config(
            "psi",
            None,
            "box problems need `psi` or `manufactured`",
        ));
    }
    if cfg.topology == Topology::Box && cfg.phi.is_none() && cfg.manufactured.is_none() {
        return Err(Error::config(
            "phi",
            None,
            "box problems need `phi` or `manufactured`",
        ));
    }
    Ok(cfg)
}

fn build_scalar(spec: &FieldSpec, grid: &Arc<Grid>) -> Result<ScalarField> {
    match spec {
        FieldSpec::Constant(c) => Ok(ScalarField::constant(grid, *c)),
        FieldSpec::Expression(_, e) => Ok(ScalarField::from_fn(grid, |x| e.eval(x))),
        FieldSpec::Csv(p) => field_io::load_scalar(p, grid),
    }
}

fn build_tensor(
    spec: &TensorSpec,
    grid: &Arc<Grid>,
    base: &HermitianField,
) -> Result<HermitianField> {
    match spec {
        TensorSpec::Multiple(c) => {
            HermitianField::new(grid, base.values.iter().map(|g| g.scale(*c)).collect())
        }
        TensorSpec::Csv(p) => {
            if field_io::peek_header(p)?.2 != FieldKind::Hermitian {
                return Err(Error::DimensionMismatch(format!(
                    "{} is not a Hermitian field",
                    p.display()
                )));
            }
            field_io::load_hermitian(p, grid)
        }
    }
}

impl ProblemConfig {
    pub fn grid(&self) -> Result<Arc<Grid>> {
        Grid::new(self.n, &self.shape, self.topology)
    }

    pub fn build(&self) -> Result<BuiltProblem> {
        let grid = self.grid()?;
        let g = build_tensor(&self.metric, &grid, &HermitianField::identity(&grid))?;
        let mut chi = build_tensor(&self.chi, &grid, &g)?;
        if let Some((_, e)) = &self.chi_ddbar {
            let d = ExactDerivatives::new(self.n);
            let values = (0..grid.len())
                .map(|p| chi.values[p].add(&d.complex_hessian(e, &grid.coords(p))))
                .collect();
            chi = HermitianField::new(&grid, values)?;
        }
        let exact = self
            .manufactured
            .as_ref()
            .map(|(_, e)| ScalarField::from_fn(&grid, |x| e.eval(x)));
        let psi = match (&self.psi, &self.manufactured) {
            (Some(s), _) => Some(build_scalar(s, &grid)?),
            (None, Some((_, e))) => {
                let d = ExactDerivatives::new(self.n);
                let nf = self.n as f64;
                let values: Result<Vec<f64>> = (0..grid.len())
                    .map(|p| {
                        let x = grid.coords(p);
                        let gf = chi.values[p].add(&d.complex_hessian(e, &x));
                        Ok(nf / crate::pointwise::j_operator(&gf, &g.values[p])?)
                    })
                    .collect();
                Some(ScalarField::new(&grid, values?)?)
            }
            (None, None) => None,
        };
        let phi = match (&self.phi, &exact) {
            (Some(s), _) => Some(build_scalar(s, &grid)?),
            (None, Some(u)) => Some(u.clone()),
            (None, None) => None,
        };
        let usub = match (&self.usub, &exact, &phi) {
            (Some(s), _, _) => build_scalar(s, &grid)?,
            (None, Some(u), _) => u.clone(),
            (None, None, Some(p)) if self.topology == Topology::Box => p.clone(),
            _ => ScalarField::constant(&grid, 0.0),
        };
        let initial = self
            .initial
            .as_ref()
            .map(|s| build_scalar(s, &grid))
            .transpose()?;
        let problem = match self.topology {
            Topology::Periodic => Problem::closed(g, chi)?,
            Topology::Box => {
                Problem::dirichlet(g, chi, psi.clone().expect("checked at parse time"))?
            }
        };
        Ok(BuiltProblem {
            problem,
            phi,
            usub,
            initial,
            psi,
            exact,
        })
    }
}

//! JSON experiment configuration: the net, the surface (self-referential or
//! bilinear), solver settings, analysis requests, and output paths.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::alpha::{
    bernstein_operator, composition_operator, multiplication_operator, PerturbOperator,
    ScaleFunction, SolverConfig,
};
use crate::error::{Error, Result};
use crate::expr::parse_expression;
use crate::field::{BivFn, Rect};
use crate::ifs::KnotLattice;
use crate::net::Net;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NetSpec {
    Uniform {
        n: usize,
        m: usize,
        #[serde(default = "unit_domain")]
        domain: [f64; 4],
    },
    Knots {
        xs: Vec<f64>,
        ys: Vec<f64>,
    },
}

fn unit_domain() -> [f64; 4] {
    [0.0, 1.0, 0.0, 1.0]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FunctionSpec {
    /// `sin(pi x) sin(pi y)`, the default test function.
    SinSin,
    Expression { expr: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OperatorSpec {
    Multiplication { t: String },
    Composition { x_map: String, y_map: String },
    Bernstein { m: usize, n: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AlphaSpec {
    Constant { value: f64 },
    Expression { expr: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SurfaceSpec {
    Alpha { f: FunctionSpec, operator: OperatorSpec, alpha: AlphaSpec },
    Bilinear { z: Vec<Vec<f64>>, s: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SolverSpec {
    #[serde(default = "default_grid_res")]
    pub grid_res: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub max_iter: Option<usize>,
}

fn default_grid_res() -> usize {
    257
}

fn default_tol() -> f64 {
    1e-10
}

impl Default for SolverSpec {
    fn default() -> Self {
        SolverSpec { grid_res: default_grid_res(), tol: default_tol(), max_iter: None }
    }
}

impl From<SolverSpec> for SolverConfig {
    fn from(s: SolverSpec) -> Self {
        SolverConfig { grid_res: s.grid_res, tol: s.tol, max_iter: s.max_iter }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalysisSpec {
    /// Run the norm-bound and conformance suite under `verify`.
    #[serde(default)]
    pub bounds: bool,
    /// L^p exponents to check under `verify`.
    #[serde(default)]
    pub lp: Vec<f64>,
    /// Box-count resolution (grid points per side) for `dimension`.
    #[serde(default = "default_dimension_res")]
    pub dimension_res: usize,
    /// Dyadic scale range `k_min..=k_max` for `dimension`.
    #[serde(default = "default_scales")]
    pub scales: [usize; 2],
    /// Polynomial degree ladder for `approx`.
    #[serde(default = "default_degrees")]
    pub degrees: Vec<usize>,
    /// Sup-error target for the epsilon procedure under `approx`.
    #[serde(default)]
    pub epsilon: Option<f64>,
}

fn default_dimension_res() -> usize {
    1025
}

fn default_scales() -> [usize; 2] {
    [3, 9]
}

fn default_degrees() -> Vec<usize> {
    vec![0, 1, 2, 3]
}

impl Default for AnalysisSpec {
    fn default() -> Self {
        AnalysisSpec {
            bounds: false,
            lp: Vec::new(),
            dimension_res: default_dimension_res(),
            scales: default_scales(),
            degrees: default_degrees(),
            epsilon: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct OutputSpec {
    #[serde(default)]
    pub csv: Option<String>,
    #[serde(default)]
    pub pgm: Option<String>,
    #[serde(default)]
    pub obj: Option<String>,
    #[serde(default)]
    pub report: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub net: NetSpec,
    pub surface: SurfaceSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub analysis: AnalysisSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

fn invalid(field: &str, message: impl Into<String>) -> Error {
    Error::Validation { field: field.to_string(), message: message.into() }
}

impl ExperimentConfig {
    /// Structural validation with field paths; the heavier admissibility
    /// checks run again during construction.
    pub fn validate(&self) -> Result<()> {
        match &self.net {
            NetSpec::Uniform { n, m, domain } => {
                if *n < 2 || *m < 2 {
                    return Err(invalid("net", format!("need at least 2 intervals per axis, got {n} x {m}")));
                }
                if domain[1] <= domain[0] || domain[3] <= domain[2] {
                    return Err(invalid("net.domain", "domain bounds must be increasing"));
                }
            }
            NetSpec::Knots { xs, ys } => {
                if xs.len() < 3 || ys.len() < 3 {
                    return Err(invalid("net", "need at least 3 knots per axis"));
                }
                for (axis, knots) in [("net.xs", xs), ("net.ys", ys)] {
                    if knots.windows(2).any(|w| w[1] <= w[0]) {
                        return Err(invalid(axis, "knots must be strictly increasing"));
                    }
                }
            }
        }
        match &self.surface {
            SurfaceSpec::Alpha { f, operator, alpha } => {
                if let FunctionSpec::Expression { expr } = f {
                    parse_expression(expr).map_err(|e| invalid("surface.f", e.to_string()))?;
                }
                match operator {
                    OperatorSpec::Multiplication { t } => {
                        parse_expression(t)
                            .map_err(|e| invalid("surface.operator.t", e.to_string()))?;
                    }
                    OperatorSpec::Composition { x_map, y_map } => {
                        parse_expression(x_map)
                            .map_err(|e| invalid("surface.operator.x_map", e.to_string()))?;
                        parse_expression(y_map)
                            .map_err(|e| invalid("surface.operator.y_map", e.to_string()))?;
                    }
                    OperatorSpec::Bernstein { m, n } => {
                        if *m < 1 || *n < 1 {
                            return Err(invalid("surface.operator", "degrees must be at least 1"));
                        }
                    }
                }
                match alpha {
                    AlphaSpec::Constant { value } => {
                        if value.abs() >= 1.0 {
                            return Err(invalid("alpha", format!("|{value}| is not below 1")));
                        }
                    }
                    AlphaSpec::Expression { expr } => {
                        parse_expression(expr).map_err(|e| invalid("alpha", e.to_string()))?;
                    }
                }
            }
            SurfaceSpec::Bilinear { z, s } => {
                for (field, rows) in [("surface.z", z), ("surface.s", s)] {
                    if rows.is_empty() || rows.iter().any(|r| r.len() != rows[0].len()) {
                        return Err(invalid(field, "rows must be nonempty and rectangular"));
                    }
                }
                if z.len() != s.len() || z[0].len() != s[0].len() {
                    return Err(invalid("surface.s", "scaling lattice shape must match z"));
                }
                if s.iter().flatten().any(|v| v.abs() >= 1.0) {
                    return Err(invalid("surface.s", "all scalings must satisfy |s| < 1"));
                }
            }
        }
        if self.solver.grid_res < 3 {
            return Err(invalid("solver.grid_res", "grid must have at least 3 points per side"));
        }
        if !(self.solver.tol > 0.0) {
            return Err(invalid("solver.tol", "tolerance must be positive"));
        }
        Ok(())
    }

    pub fn build_net(&self) -> Result<Net> {
        match &self.net {
            NetSpec::Uniform { n, m, domain } => Net::uniform(
                *n,
                *m,
                Rect { x0: domain[0], x1: domain[1], y0: domain[2], y1: domain[3] },
            ),
            NetSpec::Knots { xs, ys } => Net::new(xs.clone(), ys.clone()),
        }
    }

    pub fn build_function(&self, spec: &FunctionSpec) -> Result<BivFn> {
        match spec {
            FunctionSpec::SinSin => Ok(Arc::new(|x, y| {
                (std::f64::consts::PI * x).sin() * (std::f64::consts::PI * y).sin()
            })),
            FunctionSpec::Expression { expr } => parse_expression(expr),
        }
    }

    pub fn build_operator(&self, spec: &OperatorSpec, domain: Rect) -> Result<PerturbOperator> {
        match spec {
            OperatorSpec::Multiplication { t } => {
                multiplication_operator(parse_expression(t)?, domain)
            }
            OperatorSpec::Composition { x_map, y_map } => {
                let fx = parse_expression(x_map)?;
                let fy = parse_expression(y_map)?;
                composition_operator(Arc::new(move |x, y| (fx(x, y), fy(x, y))), domain)
            }
            OperatorSpec::Bernstein { m, n } => bernstein_operator(*m, *n, domain),
        }
    }

    pub fn build_alpha(&self, spec: &AlphaSpec, domain: Rect) -> Result<ScaleFunction> {
        match spec {
            AlphaSpec::Constant { value } => ScaleFunction::constant(*value),
            AlphaSpec::Expression { expr } => ScaleFunction::new(parse_expression(expr)?, domain),
        }
    }

    pub fn build_lattice(&self, rows: &[Vec<f64>]) -> Result<KnotLattice> {
        let m = rows.len() - 1;
        let n = rows[0].len() - 1;
        let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        KnotLattice::new(n, m, flat)
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    let config: ExperimentConfig =
        serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

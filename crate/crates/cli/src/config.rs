//! Run configuration: TOML file, dotted-key overrides and validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use lcsk_core::dynamics::{
    IntegratorParams, LinearSaddle, NonlinearSaddle, SaddleParams, SphereRotation, VelocityField,
};
use lcsk_core::flowmap::Grid2;
use lcsk_core::geometry::{Chart, EuclideanChart, SphereChart, DEFAULT_POLE_CLAMP};
use lcsk_core::lcs::Tolerances;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub chart: ChartConfig,
    pub field: FieldConfig,
    pub grid: GridConfig,
    pub time: TimeConfig,
    pub integrator: IntegratorConfig,
    pub deformation: DeformationConfig,
    pub output: OutputConfig,
    pub run: RunSection,
    pub lines: LinesConfig,
    pub extrema: ExtremaConfig,
    pub classify: ClassifyConfig,
    pub verify: VerifyConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            chart: ChartConfig::Euclidean,
            field: FieldConfig::NonlinearSaddle {
                strength: 2.0,
                q1: 1.0,
                q2: 0.15,
            },
            grid: GridConfig::default(),
            time: TimeConfig::default(),
            integrator: IntegratorConfig::default(),
            deformation: DeformationConfig::default(),
            output: OutputConfig::default(),
            run: RunSection::default(),
            lines: LinesConfig::default(),
            extrema: ExtremaConfig::default(),
            classify: ClassifyConfig::default(),
            verify: VerifyConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChartConfig {
    Euclidean,
    Sphere {
        radius: f64,
        #[serde(default = "default_pole_clamp")]
        pole_clamp: f64,
    },
}

fn default_pole_clamp() -> f64 {
    DEFAULT_POLE_CLAMP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldConfig {
    NonlinearSaddle {
        #[serde(rename = "L")]
        strength: f64,
        q1: f64,
        q2: f64,
    },
    LinearSaddle {
        lambda: f64,
    },
    SphereRotation {
        omega: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub nx: usize,
    pub ny: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            x: [-1.0, 1.0],
            y: [-1.0, 1.0],
            nx: 201,
            ny: 201,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeConfig {
    pub t1: f64,
    /// Length of the time span; must be positive.
    pub duration: f64,
    pub direction: Direction,
}

impl Default for TimeConfig {
    fn default() -> Self {
        TimeConfig {
            t1: 0.0,
            duration: 1.0,
            direction: Direction::Forward,
        }
    }
}

impl TimeConfig {
    pub fn t2(&self) -> f64 {
        match self.direction {
            Direction::Forward => self.t1 + self.duration,
            Direction::Backward => self.t1 - self.duration,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    Dopri,
    Rk4,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorConfig {
    pub method: MethodName,
    pub atol: f64,
    pub rtol: f64,
    /// Fixed step for `rk4`.
    pub step: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            method: MethodName::Dopri,
            atol: 1e-10,
            rtol: 1e-10,
            step: 1e-3,
            max_steps: 1_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn params(&self) -> IntegratorParams {
        let mut p = match self.method {
            MethodName::Dopri => IntegratorParams::dopri(self.atol, self.rtol),
            MethodName::Rk4 => IntegratorParams::rk4(self.step),
        };
        p.max_steps = self.max_steps;
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeformationConfig {
    pub fd_step: f64,
}

impl Default for DeformationConfig {
    fn default() -> Self {
        DeformationConfig {
            fd_step: lcsk_core::flowmap::DEFAULT_FD_STEP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub csv: bool,
    pub binary: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
            csv: true,
            binary: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    /// Worker threads; 0 uses the hardware parallelism.
    pub threads: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Strainline,
    Stretchline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seed {
    pub x: f64,
    pub y: f64,
    pub family: Family,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinesConfig {
    pub step: f64,
    pub max_len: f64,
    pub seeds: Vec<Seed>,
}

impl Default for LinesConfig {
    fn default() -> Self {
        LinesConfig {
            step: 0.005,
            max_len: 0.4,
            seeds: vec![
                Seed {
                    x: 0.01,
                    y: 0.0,
                    family: Family::Strainline,
                },
                Seed {
                    x: 0.0,
                    y: 0.01,
                    family: Family::Stretchline,
                },
            ],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalarName {
    FtleF,
    Sigma1,
    Sigma2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VectorName {
    Xi1,
    Xi2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtremumName {
    Max,
    Min,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtremaSet {
    pub scalar: ScalarName,
    pub direction: VectorName,
    pub kind: ExtremumName,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExtremaConfig {
    pub sets: Vec<ExtremaSet>,
}

impl Default for ExtremaConfig {
    fn default() -> Self {
        ExtremaConfig {
            sets: vec![
                ExtremaSet {
                    scalar: ScalarName::FtleF,
                    direction: VectorName::Xi2,
                    kind: ExtremumName::Max,
                },
                ExtremaSet {
                    scalar: ScalarName::FtleF,
                    direction: VectorName::Xi1,
                    kind: ExtremumName::Max,
                },
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifyConfig {
    pub normal_angle_deg: f64,
    pub first_order_rel: f64,
    pub coverage: f64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        let t = Tolerances::default();
        ClassifyConfig {
            normal_angle_deg: t.normal_angle_deg,
            first_order_rel: t.first_order_rel,
            coverage: t.coverage,
        }
    }
}

impl ClassifyConfig {
    pub fn tolerances(&self) -> Tolerances {
        Tolerances {
            normal_angle_deg: self.normal_angle_deg,
            first_order_rel: self.first_order_rel,
            coverage: self.coverage,
        }
    }
}

/// A straight segment checked for the height-ridge conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RidgeCheck {
    pub from: [f64; 2],
    pub to: [f64; 2],
    pub normal: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    /// Image points sampled for the backward and duality suites.
    pub samples: usize,
    /// Points sampled for the transfer-rule suite.
    pub transfer_samples: usize,
    pub transfer_step: f64,
    pub incompressibility_tol: f64,
    pub kappa_sigma_tol: f64,
    pub misalignment_tol: f64,
    pub pullback_tol: f64,
    pub ftle_tol: f64,
    pub transfer_first_tol: f64,
    pub transfer_second_tol: f64,
    pub duality_tol: f64,
    pub ridge_first_tol: f64,
    /// Axis segments checked for the nonlinear saddle in addition to
    /// `ridges`.
    pub saddle_ridges: bool,
    pub ridges: Vec<RidgeCheck>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            samples: 100,
            transfer_samples: 20,
            transfer_step: 1e-2,
            incompressibility_tol: 1e-3,
            kappa_sigma_tol: 1e-3,
            misalignment_tol: 1e-3,
            pullback_tol: 1e-3,
            ftle_tol: 2e-3,
            transfer_first_tol: 1e-3,
            transfer_second_tol: 1e-2,
            duality_tol: 1e-3,
            ridge_first_tol: 5e-4,
            saddle_ridges: true,
            ridges: Vec::new(),
        }
    }
}

/// A velocity field selected by configuration.
#[derive(Debug, Clone, Copy)]
pub enum Field {
    Nonlinear(NonlinearSaddle),
    Linear(LinearSaddle),
    Rotation(SphereRotation),
}

impl Field {
    pub fn as_dyn(&self) -> &dyn VelocityField {
        match self {
            Field::Nonlinear(f) => f,
            Field::Linear(f) => f,
            Field::Rotation(f) => f,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum AnyChart {
    Euclidean(EuclideanChart),
    Sphere(SphereChart),
}

impl AnyChart {
    pub fn as_dyn(&self) -> &dyn Chart {
        match self {
            AnyChart::Euclidean(c) => c,
            AnyChart::Sphere(c) => c,
        }
    }
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(config_err(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| config_err(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration always serializes")
    }

    /// Loads `path` (or the defaults), applies `key=value` overrides and
    /// validates the result.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut value = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| config_err(format!("{}: {e}", p.display())))?;
                text.parse::<toml::Table>()
                    .map_err(|e| config_err(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::try_from(RunConfig::default()).expect("defaults serialize"),
        };
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let cfg: RunConfig = toml::Value::Table(value)
            .try_into()
            .map_err(|e: toml::de::Error| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn build_field(&self) -> Result<Field, CliError> {
        Ok(match self.field {
            FieldConfig::NonlinearSaddle { strength, q1, q2 } => {
                Field::Nonlinear(NonlinearSaddle::new(
                    SaddleParams::new(strength, q1, q2).map_err(|e| config_err(e.to_string()))?,
                ))
            }
            FieldConfig::LinearSaddle { lambda } => {
                if !lambda.is_finite() {
                    return Err(config_err("lambda must be finite"));
                }
                Field::Linear(LinearSaddle::new(lambda))
            }
            FieldConfig::SphereRotation { omega } => {
                if !omega.is_finite() {
                    return Err(config_err("omega must be finite"));
                }
                Field::Rotation(SphereRotation::new(omega))
            }
        })
    }

    pub fn build_chart(&self) -> Result<AnyChart, CliError> {
        Ok(match self.chart {
            ChartConfig::Euclidean => AnyChart::Euclidean(EuclideanChart::default()),
            ChartConfig::Sphere { radius, pole_clamp } => AnyChart::Sphere(
                SphereChart::new(radius, pole_clamp).map_err(|e| config_err(e.to_string()))?,
            ),
        })
    }

    pub fn build_grid(&self) -> Result<Grid2, CliError> {
        let g = &self.grid;
        Grid2::new((g.x[0], g.x[1]), (g.y[0], g.y[1]), g.nx, g.ny)
            .map_err(|e| config_err(format!("grid: {e}")))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.build_field()?;
        let chart = self.build_chart()?;
        let grid = self.build_grid()?;
        let d = grid.extent();
        for p in [(d.x_min, d.y_min), (d.x_max, d.y_max)] {
            chart
                .as_dyn()
                .check(lcsk_core::Point2::new(p.0, p.1))
                .map_err(|e| config_err(format!("grid outside the chart domain: {e}")))?;
        }
        if !self.time.t1.is_finite() {
            return Err(config_err("time.t1 must be finite"));
        }
        positive("time.duration", self.time.duration)?;
        self.integrator
            .params()
            .validate()
            .map_err(|e| config_err(format!("integrator: {e}")))?;
        positive("deformation.fd_step", self.deformation.fd_step)?;
        positive("lines.step", self.lines.step)?;
        positive("lines.max_len", self.lines.max_len)?;
        positive("classify.normal_angle_deg", self.classify.normal_angle_deg)?;
        positive("classify.first_order_rel", self.classify.first_order_rel)?;
        if !(self.classify.coverage > 0.0 && self.classify.coverage <= 1.0) {
            return Err(config_err("classify.coverage must lie in (0, 1]"));
        }
        positive("verify.transfer_step", self.verify.transfer_step)?;
        for s in &self.lines.seeds {
            if !(s.x.is_finite() && s.y.is_finite()) {
                return Err(config_err("line seeds must be finite"));
            }
        }
        Ok(())
    }
}

/// Parses the right-hand side of an override as a TOML value, falling back
/// to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Applies one `dotted.key=value` override.
pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<(), CliError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| config_err(format!("override `{spec}` is not of the form key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(config_err(format!("bad override key `{key}`")));
    }
    let (last, path) = parts.split_last().expect("split yields at least one part");
    let value = parse_value(raw.trim());
    if *last == "name" && path.len() == 1 {
        // Selecting a different variant drops the old variant's parameters.
        let current = table.get(path[0]).and_then(|s| s.get("name"));
        if current != Some(&value) {
            table.insert(path[0].to_string(), toml::Value::Table(toml::Table::new()));
        }
    }
    let mut cur = table;
    for p in path {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| config_err(format!("`{p}` in `{key}` is not a section")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

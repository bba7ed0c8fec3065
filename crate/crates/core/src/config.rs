//! TOML experiment configuration with strict validation.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::convergence::{ExperimentSpec, ExperimentTag, FunctionDeficit, SweepSpec};
use crate::error::{Error, Result};
use crate::floating_function::DEFAULT_TRUNCATION;
use crate::function::ConvexFunctionSpec;
use crate::geometry::{ConvexBodySpec, ConvexSet};
use crate::quadrature::QuadratureSpec;
use crate::sconcave::SConcaveFunctionSpec;
use crate::weights::WeightSpec;

/// Experiment selected by a config file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Eq12,
    Theorem31,
    Theorem32,
    Proposition31,
    Proposition32,
    Theorem33,
    EqRandom,
}

impl ExperimentKind {
    pub fn tag(&self) -> ExperimentTag {
        match self {
            Self::Eq12 => ExperimentTag::Eq12,
            Self::Theorem31 => ExperimentTag::Theorem31,
            Self::Theorem32 => ExperimentTag::Theorem32,
            Self::Proposition31 => ExperimentTag::Proposition31,
            Self::Proposition32 => ExperimentTag::Proposition32,
            Self::Theorem33 => ExperimentTag::Theorem33,
            Self::EqRandom => ExperimentTag::EqRandom,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Self::Eq12 => "eq12",
            Self::Theorem31 => "theorem31",
            Self::Theorem32 => "theorem32",
            Self::Proposition31 => "proposition31",
            Self::Proposition32 => "proposition32",
            Self::Theorem33 => "theorem33",
            Self::EqRandom => "eq_random",
        }
    }

    fn is_function(&self) -> bool {
        matches!(self, Self::Theorem31 | Self::Theorem32 | Self::Proposition31 | Self::Proposition32)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BodyConfig {
    Ball {
        dim: usize,
        #[serde(default = "one")]
        radius: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<Vec<f64>>,
    },
    Ellipsoid {
        semi_axes: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<Vec<f64>>,
    },
    Cube {
        dim: usize,
        #[serde(default = "one")]
        half: f64,
    },
    Polytope { vertices: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionConfig {
    /// `‖x‖²/2`
    HalfNormSquared { dim: usize },
    /// `½ xᵀAx + <b, x> + c`
    Quadratic {
        a: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        b: Option<Vec<f64>>,
        #[serde(default)]
        c: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SConcaveConfig {
    /// `(1 - ‖x‖²)^s` on the unit ball.
    Paraboloid { dim: usize, s: usize },
    /// `(1 - ‖x‖)^s` on the unit ball.
    Cone { dim: usize, s: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightConfig {
    Constant { value: f64 },
    ExponentialHeight,
    /// Rotational weight with constant profile.
    RotationalConstant { value: f64 },
}

impl Default for WeightConfig {
    fn default() -> Self {
        Self::Constant { value: 1.0 }
    }
}

impl WeightConfig {
    fn name(&self) -> &'static str {
        match self {
            Self::Constant { .. } => "constant",
            Self::ExponentialHeight => "exponential_height",
            Self::RotationalConstant { .. } => "rotational_constant",
        }
    }
}

/// Discretisation of the floating constructions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscretizationConfig {
    /// Normal directions of the polytopal floating body.
    pub directions: usize,
    /// Meridian angles (or lifted directions) of s-concave floating functions.
    pub angles: usize,
    pub refine: bool,
    /// Truncation level `t` of `{ψ <= ψ_min + t}` for the deficit integrals.
    pub truncation: f64,
}

impl Default for DiscretizationConfig {
    fn default() -> Self {
        Self { directions: 256, angles: 64, refine: true, truncation: DEFAULT_TRUNCATION }
    }
}

/// Single-δ evaluation used by `float-body`, `float-func` and `sconcave`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    /// Defaults to `sweep.delta0`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Probe points of `ψ_δ` and `f_δ`.
    pub points: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerdictConfig {
    pub tolerance: f64,
}

impl Default for VerdictConfig {
    fn default() -> Self {
        Self { tolerance: 0.02 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomPolytopeConfig {
    pub n_points: usize,
    pub trials: usize,
}

impl Default for RandomPolytopeConfig {
    fn default() -> Self {
        Self { n_points: 1000, trials: 200 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
    Svg,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            "svg" => Ok(Self::Svg),
            other => Err(Error::Config(vec![format!("output.formats: unknown format `{other}`")])),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: String,
    pub formats: Vec<OutputFormat>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: "out".into(), formats: vec![OutputFormat::Csv, OutputFormat::Json] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub sweep: SweepSpec,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    #[serde(default)]
    pub verdict: VerdictConfig,
    #[serde(default)]
    pub discretization: DiscretizationConfig,
    #[serde(default)]
    pub evaluate: EvaluateConfig,
    #[serde(default)]
    pub randpoly: RandomPolytopeConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub weight: WeightConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body: Option<BodyConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub function: Option<FunctionConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sconcave: Option<SConcaveConfig>,
}

fn one() -> f64 {
    1.0
}

/// Parses and validates a TOML config. Unknown keys are rejected; every
/// validation failure is reported with the offending field.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(vec![e.to_string().trim().to_string()]))?;
    cfg.validate()?;
    Ok(cfg)
}

/// TOML text that [`parse_config`] maps back to `cfg`.
pub fn serialize_config(cfg: &ExperimentConfig) -> Result<String> {
    toml::to_string(cfg).map_err(|e| Error::Config(vec![e.to_string()]))
}

impl ExperimentConfig {
    /// Minimal config: defaults everywhere except the experiment and object.
    pub fn new(experiment: ExperimentKind) -> Self {
        Self {
            experiment,
            seed: None,
            sweep: SweepSpec::default(),
            quadrature: QuadratureSpec::default(),
            verdict: VerdictConfig::default(),
            discretization: DiscretizationConfig::default(),
            evaluate: EvaluateConfig::default(),
            randpoly: RandomPolytopeConfig::default(),
            output: OutputConfig::default(),
            weight: WeightConfig::default(),
            body: None,
            function: None,
            sconcave: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        let exp = self.experiment;
        let mut push = |field: &str, msg: String| errs.push(format!("{field}: {msg}"));

        if let Err(e) = self.sweep.validate() {
            push("sweep", strip(e));
        }
        if let Err(e) = self.quadrature.validate() {
            push("quadrature", strip(e));
        }
        if !(self.verdict.tolerance > 0.0) {
            push("verdict.tolerance", format!("must be positive, got {}", self.verdict.tolerance));
        }
        let d = &self.discretization;
        if d.directions < 6 {
            push("discretization.directions", format!("must be at least 6, got {}", d.directions));
        }
        if d.angles < 4 {
            push("discretization.angles", format!("must be at least 4, got {}", d.angles));
        }
        if !(d.truncation > 0.0) {
            push("discretization.truncation", format!("must be positive, got {}", d.truncation));
        }
        if let Some(delta) = self.evaluate.delta {
            if !(delta > 0.0 && delta.is_finite()) {
                push("evaluate.delta", format!("must be positive, got {delta}"));
            }
        }
        if self.output.formats.is_empty() {
            push("output.formats", "must list at least one format".into());
        }

        let needs = |section: &str, present: bool, errs: &mut Vec<String>| {
            if !present {
                errs.push(format!("{section}: required for experiment `{}`", exp.name()));
            }
        };
        match exp {
            ExperimentKind::Eq12 | ExperimentKind::EqRandom => needs("body", self.body.is_some(), &mut errs),
            ExperimentKind::Theorem33 => needs("sconcave", self.sconcave.is_some(), &mut errs),
            _ => needs("function", self.function.is_some(), &mut errs),
        }
        for (section, present, owner) in [
            ("body", self.body.is_some(), matches!(exp, ExperimentKind::Eq12 | ExperimentKind::EqRandom)),
            ("function", self.function.is_some(), exp.is_function()),
            ("sconcave", self.sconcave.is_some(), exp == ExperimentKind::Theorem33),
        ] {
            if present && !owner {
                errs.push(format!("{section}: not used by experiment `{}`", exp.name()));
            }
        }

        let compatible = match (&self.weight, exp) {
            (WeightConfig::ExponentialHeight, ExperimentKind::Theorem32 | ExperimentKind::Proposition32) => true,
            (WeightConfig::Constant { .. }, ExperimentKind::Theorem31 | ExperimentKind::Proposition31) => true,
            (WeightConfig::Constant { .. }, ExperimentKind::Eq12 | ExperimentKind::EqRandom) => true,
            (WeightConfig::RotationalConstant { .. } | WeightConfig::Constant { .. }, ExperimentKind::Theorem33) => true,
            _ => false,
        };
        if !compatible {
            errs.push(format!(
                "weight.kind: {}",
                Error::IncompatibleWeight(format!("`{}` with `{}`", self.weight.name(), exp.name()))
            ));
        }
        match &self.weight {
            WeightConfig::Constant { value } | WeightConfig::RotationalConstant { value } if !(*value > 0.0 && value.is_finite()) => {
                errs.push(format!("weight.value: must be positive, got {value}"));
            }
            _ => {}
        }
        if exp == ExperimentKind::EqRandom {
            if self.seed.is_none() {
                errs.push("seed: required for Monte-Carlo experiments".into());
            }
            if self.randpoly.trials < 2 {
                errs.push(format!("randpoly.trials: must be at least 2, got {}", self.randpoly.trials));
            }
        }
        if errs.is_empty() {
            if let Err(e) = self.experiment_spec().and_then(|s| s.validate()) {
                errs.push(format!("{}: {}", self.object_field(), strip(e)));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    fn object_field(&self) -> &'static str {
        match self.experiment {
            ExperimentKind::Eq12 | ExperimentKind::EqRandom => "body",
            ExperimentKind::Theorem33 => "sconcave",
            _ => "function",
        }
    }

    pub fn body_spec(&self) -> Result<ConvexBodySpec> {
        match self.body.as_ref().ok_or_else(|| missing("body"))? {
            BodyConfig::Ball { dim, radius, center } => {
                ConvexBodySpec::ball(center.clone().unwrap_or_else(|| vec![0.0; *dim]), *radius)
            }
            BodyConfig::Ellipsoid { semi_axes, center } => {
                ConvexBodySpec::ellipsoid(center.clone().unwrap_or_else(|| vec![0.0; semi_axes.len()]), semi_axes.clone())
            }
            BodyConfig::Cube { dim, half } => ConvexBodySpec::cube(*dim, *half),
            BodyConfig::Polytope { vertices } => ConvexBodySpec::vpolytope(vertices.clone()),
        }
    }

    pub fn function_spec(&self) -> Result<ConvexFunctionSpec> {
        match self.function.as_ref().ok_or_else(|| missing("function"))? {
            FunctionConfig::HalfNormSquared { dim } => ConvexFunctionSpec::half_norm_squared(*dim),
            FunctionConfig::Quadratic { a, b, c } => {
                let n = a.len();
                if a.iter().any(|r| r.len() != n) {
                    return Err(Error::InvalidInput("`a` must be a square matrix".into()));
                }
                let m = DMatrix::from_fn(n, n, |i, j| a[i][j]);
                ConvexFunctionSpec::quadratic(m, b.clone().unwrap_or_else(|| vec![0.0; n]), *c)
            }
        }
    }

    pub fn sconcave_spec(&self) -> Result<SConcaveFunctionSpec> {
        match self.sconcave.as_ref().ok_or_else(|| missing("sconcave"))? {
            SConcaveConfig::Paraboloid { dim, s } => SConcaveFunctionSpec::paraboloid(*dim, *s),
            SConcaveConfig::Cone { dim, s } => SConcaveFunctionSpec::cone(*dim, *s),
        }
    }

    /// Weight on the ambient space of the experiment.
    pub fn weight_spec(&self) -> Result<WeightSpec> {
        let ambient = match self.experiment {
            ExperimentKind::Eq12 | ExperimentKind::EqRandom => self.body_spec()?.dim(),
            ExperimentKind::Theorem33 => {
                let f = self.sconcave_spec()?;
                f.dim() + f.order()
            }
            _ => self.function_spec()?.dim() + 1,
        };
        match &self.weight {
            WeightConfig::Constant { value } if self.experiment == ExperimentKind::Theorem33 => {
                let s = self.sconcave_spec()?.order();
                WeightSpec::rotational_constant(ambient, s, *value)
            }
            WeightConfig::Constant { value } => WeightSpec::constant(ambient, *value),
            WeightConfig::ExponentialHeight => WeightSpec::exponential_height(ambient),
            WeightConfig::RotationalConstant { value } => {
                let s = self.sconcave_spec()?.order();
                WeightSpec::rotational_constant(ambient, s, *value)
            }
        }
    }

    /// Sweep experiment described by the config (not defined for `eq_random`).
    pub fn experiment_spec(&self) -> Result<ExperimentSpec> {
        let weight = self.weight_spec()?;
        let d = &self.discretization;
        Ok(match self.experiment {
            ExperimentKind::Eq12 => ExperimentSpec::Body { body: self.body_spec()?, weight, directions: d.directions },
            ExperimentKind::EqRandom => {
                // the sweep of the same body is the comparison experiment
                ExperimentSpec::Body { body: self.body_spec()?, weight, directions: d.directions }
            }
            ExperimentKind::Theorem33 => {
                ExperimentSpec::SConcave { f: self.sconcave_spec()?, weight, angles: d.angles, refine: d.refine }
            }
            k => ExperimentSpec::Function {
                psi: self.function_spec()?,
                weight,
                deficit: if matches!(k, ExperimentKind::Theorem31 | ExperimentKind::Theorem32) {
                    FunctionDeficit::Integral
                } else {
                    FunctionDeficit::WeightedL1
                },
                truncation: d.truncation,
            },
        })
    }

    /// δ of single-point evaluations.
    pub fn evaluation_delta(&self) -> f64 {
        self.evaluate.delta.unwrap_or(self.sweep.delta0)
    }
}

fn missing(section: &str) -> Error {
    Error::Config(vec![format!("{section}: missing section")])
}

fn strip(e: Error) -> String {
    match e {
        Error::InvalidInput(m) => m,
        Error::Config(v) => v.join("; "),
        other => other.to_string(),
    }
}

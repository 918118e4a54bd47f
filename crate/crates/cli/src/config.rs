//! Experiment configuration: one structured TOML file per run. Unknown keys
//! are rejected so a manifest can always be replayed exactly.

use serde::{Deserialize, Serialize};

use levylab::entropy::PhiSpec;
use levylab::error::{Error, Result};
use levylab::kernels::{NoiseIncrementPlan, SmallJumpMode};
use levylab::levy::{Monotonicity, RadialLevyMeasure, RadialProfile, TabulatedProfile};
use levylab::lyapunov::BSpec;
use levylab::sde::CoefficientField;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Simulate,
    EntropyBound,
    DecayCurve,
    LyapunovCheck,
    PoissonCheck,
    SharpnessDemo,
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Simulate => "simulate",
            Scenario::EntropyBound => "entropy-bound",
            Scenario::DecayCurve => "decay-curve",
            Scenario::LyapunovCheck => "lyapunov-check",
            Scenario::PoissonCheck => "poisson-check",
            Scenario::SharpnessDemo => "sharpness-demo",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureConfig {
    pub dim: usize,
    pub alpha: f64,
    #[serde(default = "one")]
    pub kappa1: f64,
    #[serde(default = "one")]
    pub kappa2: f64,
    /// "one" | "small-jumps" | "large-jumps" | "table"
    #[serde(default = "default_profile")]
    pub profile: String,
    /// path of a two-column radius/value table when profile = "table"
    #[serde(default)]
    pub table: Option<String>,
    /// "decreasing" | "increasing" | "none"
    #[serde(default = "default_monotonicity")]
    pub monotonicity: String,
}

fn one() -> f64 {
    1.0
}

fn default_profile() -> String {
    "one".into()
}

fn default_monotonicity() -> String {
    "none".into()
}

impl MeasureConfig {
    pub fn build(&self) -> Result<RadialLevyMeasure> {
        let monotonicity = match self.monotonicity.as_str() {
            "decreasing" => Monotonicity::Decreasing,
            "increasing" => Monotonicity::Increasing,
            "none" => Monotonicity::None,
            other => {
                return Err(Error::InvalidInput(format!(
                    "unknown monotonicity '{other}'"
                )))
            }
        };
        let profile = match self.profile.as_str() {
            "one" => RadialProfile::One,
            "small-jumps" => RadialProfile::SmallJumps,
            "large-jumps" => RadialProfile::LargeJumps,
            "table" => {
                let path = self.table.as_ref().ok_or_else(|| {
                    Error::InvalidInput("profile = \"table\" requires the table key".into())
                })?;
                RadialProfile::Tabulated(TabulatedProfile::from_file(std::path::Path::new(path))?)
            }
            other => return Err(Error::InvalidInput(format!("unknown profile '{other}'"))),
        };
        RadialLevyMeasure::new(
            self.dim,
            self.alpha,
            self.kappa1,
            self.kappa2,
            profile,
            monotonicity,
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientConfig {
    /// "ou" | "ou-brownian" | "power-drift" | "radial-table"
    pub preset: String,
    #[serde(default = "one")]
    pub sigma: f64,
    #[serde(default)]
    pub theta: Option<f64>,
    #[serde(default)]
    pub table: Option<String>,
}

impl CoefficientConfig {
    pub fn build(&self, dim: usize) -> Result<CoefficientField> {
        match self.preset.as_str() {
            "ou" => Ok(CoefficientField::ou(dim, self.sigma)),
            "ou-brownian" => Ok(CoefficientField::ou_brownian(dim)),
            "power-drift" => {
                let theta = self.theta.ok_or_else(|| {
                    Error::InvalidInput("power-drift preset requires theta".into())
                })?;
                Ok(CoefficientField::power_drift(dim, theta))
            }
            "radial-table" => {
                let path = self.table.as_ref().ok_or_else(|| {
                    Error::InvalidInput("radial-table preset requires the table key".into())
                })?;
                let table = TabulatedProfile::from_file(std::path::Path::new(path))?;
                Ok(CoefficientField::radial_drift_table(dim, table))
            }
            other => Err(Error::InvalidInput(format!(
                "unknown coefficient preset '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhiConfig {
    /// "xlogx" | "power"
    pub kind: String,
    #[serde(default)]
    pub p: Option<f64>,
}

impl Default for PhiConfig {
    fn default() -> Self {
        PhiConfig {
            kind: "xlogx".into(),
            p: None,
        }
    }
}

impl PhiConfig {
    pub fn build(&self) -> Result<PhiSpec> {
        match self.kind.as_str() {
            "xlogx" => Ok(PhiSpec::XLogX),
            "power" => PhiSpec::power(
                self.p
                    .ok_or_else(|| Error::InvalidInput("power phi requires p".into()))?,
            ),
            other => Err(Error::InvalidInput(format!("unknown phi kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// "exact-stable" | "cp-gauss" | "cp-drop"
    #[serde(default = "default_mode")]
    pub mode: String,
    #[serde(default = "default_cutoff")]
    pub cutoff: f64,
    #[serde(default)]
    pub brownian: bool,
}

fn default_mode() -> String {
    "exact-stable".into()
}

fn default_cutoff() -> f64 {
    NoiseIncrementPlan::DEFAULT_CUTOFF
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            mode: default_mode(),
            cutoff: default_cutoff(),
            brownian: false,
        }
    }
}

impl NoiseConfig {
    pub fn build(&self, measure: RadialLevyMeasure) -> Result<NoiseIncrementPlan> {
        let mode = match self.mode.as_str() {
            "exact-stable" => SmallJumpMode::ExactStable,
            "cp-gauss" => SmallJumpMode::GaussianSurrogate,
            "cp-drop" => SmallJumpMode::DropWithCompensation,
            other => return Err(Error::InvalidInput(format!("unknown noise mode '{other}'"))),
        };
        NoiseIncrementPlan::new(measure, self.cutoff, mode, self.brownian)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_t")]
    pub t: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_paths")]
    pub n_paths: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub x0: Vec<f64>,
    #[serde(default = "default_burn_in")]
    pub burn_in: f64,
    /// decay-curve: number of log-spaced checkpoints
    #[serde(default = "default_checkpoints")]
    pub checkpoints: usize,
    /// decay-curve: inner paths per invariant-measure sample
    #[serde(default = "default_inner")]
    pub inner_paths: usize,
    /// shift of the `c + tanh(x_1)` test function
    #[serde(default = "default_f_shift")]
    pub f_shift: f64,
}

fn default_t() -> f64 {
    1.0
}
fn default_dt() -> f64 {
    1e-3
}
fn default_paths() -> usize {
    10_000
}
fn default_seed() -> u64 {
    7
}
fn default_burn_in() -> f64 {
    10.0
}
fn default_checkpoints() -> usize {
    8
}
fn default_inner() -> usize {
    100
}
fn default_f_shift() -> f64 {
    1.5
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            t: default_t(),
            dt: default_dt(),
            n_paths: default_paths(),
            seed: default_seed(),
            x0: Vec::new(),
            burn_in: default_burn_in(),
            checkpoints: default_checkpoints(),
            inner_paths: default_inner(),
            f_shift: default_f_shift(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovConfig {
    /// "constant" | "power-one-plus"
    #[serde(default = "default_b_family")]
    pub b_family: String,
    #[serde(default = "one")]
    pub b_param: f64,
    #[serde(default = "one")]
    pub eps: f64,
    #[serde(default)]
    pub theta: Option<f64>,
    #[serde(default = "default_grid_max")]
    pub grid_max: f64,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    /// "evidence" | "reject": assert the expected outcome when present
    #[serde(default)]
    pub expect: Option<String>,
}

fn default_b_family() -> String {
    "power-one-plus".into()
}
fn default_grid_max() -> f64 {
    3e4
}
fn default_grid_points() -> usize {
    48
}

impl Default for LyapunovConfig {
    fn default() -> Self {
        LyapunovConfig {
            b_family: default_b_family(),
            b_param: 1.0,
            eps: 1.0,
            theta: None,
            grid_max: default_grid_max(),
            grid_points: default_grid_points(),
            expect: None,
        }
    }
}

impl LyapunovConfig {
    pub fn build_b(&self) -> Result<BSpec> {
        match self.b_family.as_str() {
            "constant" => BSpec::constant(self.b_param),
            "power-one-plus" => BSpec::power_one_plus(self.b_param),
            other => Err(Error::InvalidInput(format!("unknown B family '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoissonConfig {
    #[serde(default = "default_poisson_cutoff")]
    pub cutoff: f64,
    #[serde(default = "one")]
    pub window: f64,
    #[serde(default = "default_poisson_samples")]
    pub n_samples: usize,
    #[serde(default = "default_functionals")]
    pub functionals: Vec<String>,
    /// "uniform" | "time-linear"
    #[serde(default = "default_density")]
    pub density: String,
}

fn default_poisson_cutoff() -> f64 {
    0.1
}
fn default_poisson_samples() -> usize {
    50_000
}
fn default_functionals() -> Vec<String> {
    vec![
        "count".into(),
        "linear".into(),
        "laplace".into(),
        "laplace-shift".into(),
        "max-mark".into(),
    ]
}
fn default_density() -> String {
    "uniform".into()
}

impl Default for PoissonConfig {
    fn default() -> Self {
        PoissonConfig {
            cutoff: default_poisson_cutoff(),
            window: 1.0,
            n_samples: default_poisson_samples(),
            functionals: default_functionals(),
            density: default_density(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub dir: Option<String>,
}

/// The whole experiment description.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub measure: MeasureConfig,
    #[serde(default = "default_coefficients")]
    pub coefficients: CoefficientConfig,
    #[serde(default)]
    pub phi: PhiConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub lyapunov: LyapunovConfig,
    #[serde(default)]
    pub poisson: PoissonConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_coefficients() -> CoefficientConfig {
    CoefficientConfig {
        preset: "ou".into(),
        sigma: 1.0,
        theta: None,
        table: None,
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidInput(format!("config: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Initial state, defaulting to the origin.
    pub fn x0(&self) -> Vec<f64> {
        if self.run.x0.is_empty() {
            vec![0.0; self.measure.dim]
        } else {
            self.run.x0.clone()
        }
    }

    /// Built-in default configuration for a scenario.
    pub fn default_for(scenario: Scenario) -> Self {
        let mut cfg = ExperimentConfig {
            scenario,
            measure: MeasureConfig {
                dim: 1,
                alpha: 1.5,
                kappa1: 1.0,
                kappa2: 1.0,
                profile: "one".into(),
                table: None,
                monotonicity: "none".into(),
            },
            coefficients: default_coefficients(),
            phi: PhiConfig::default(),
            noise: NoiseConfig::default(),
            run: RunConfig::default(),
            lyapunov: LyapunovConfig::default(),
            poisson: PoissonConfig::default(),
            output: OutputConfig::default(),
        };
        match scenario {
            Scenario::Simulate => {
                cfg.run.n_paths = 4096;
            }
            Scenario::EntropyBound => {
                cfg.run.n_paths = 20_000;
            }
            Scenario::DecayCurve => {
                cfg.run.n_paths = 600;
                cfg.run.inner_paths = 100;
                cfg.run.dt = 2e-3;
            }
            Scenario::LyapunovCheck => {
                cfg.lyapunov.theta = Some(1.0);
                cfg.lyapunov.expect = Some("evidence".into());
            }
            Scenario::PoissonCheck => {
                cfg.measure.alpha = 1.0;
                cfg.poisson.n_samples = 50_000;
            }
            Scenario::SharpnessDemo => {
                cfg.run.n_paths = 2000;
                cfg.run.burn_in = 10.0;
                cfg.run.dt = 2e-3;
            }
        }
        cfg
    }
}

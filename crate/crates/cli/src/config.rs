//! Scenario files: a versioned TOML document that fully describes one run.

use std::path::{Path, PathBuf};

use levyterm_core::engine::{EngineMode, MartingaleOptions, SimulationScenario, StateFunctional, VolatilitySpec};
use levyterm_core::levy::JumpFamily;
use levyterm_core::{AnalyticCurve, CurveSpaceConfig, ForwardCurve, LevyKind, LevyModel, NormVariant, WeightSpec};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SUPPORTED_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub version: u32,
    #[serde(default)]
    pub seed: u64,
    pub grid: GridConfig,
    pub drivers: Vec<DriverConfig>,
    pub volatility: VolatilityConfig,
    pub space: SpaceConfig,
    pub initial_curve: CurveConfig,
    #[serde(default)]
    pub monte_carlo: MonteCarloConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub martingale: MartingaleConfig,
    #[serde(default)]
    pub integrate: IntegrateConfig,
}

/// Maturity and time grids. `dx = 1 / cells_per_year`, `dt = dt_cells · dx`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub x_max: f64,
    #[serde(default = "default_cells_per_year")]
    pub cells_per_year: u32,
    pub t_max: f64,
    #[serde(default = "one")]
    pub dt_cells: u32,
}

fn default_cells_per_year() -> u32 {
    365
}

fn one() -> u32 {
    1
}

impl GridConfig {
    pub fn dx(&self) -> f64 {
        1.0 / self.cells_per_year as f64
    }

    pub fn dt(&self) -> f64 {
        self.dt_cells as f64 * self.dx()
    }

    pub fn n_points(&self) -> Result<usize, CliError> {
        let r = self.x_max * self.cells_per_year as f64;
        if !(self.x_max > 0.0) || self.cells_per_year == 0 || (r - r.round()).abs() > 1e-9 * r.max(1.0) {
            return Err(CliError::Config(format!(
                "grid.x_max = {} must be a positive multiple of 1/{}",
                self.x_max, self.cells_per_year
            )));
        }
        Ok(r.round() as usize)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriverConfig {
    pub process: ProcessConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moment_interval: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub working_interval: Option<[f64; 2]>,
    /// Subtract the mean so the driver is a martingale.
    #[serde(default)]
    pub compensated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProcessConfig {
    Brownian {
        volatility: f64,
    },
    Poisson {
        intensity: f64,
    },
    CompoundPoissonNormal {
        intensity: f64,
        jump_mean: f64,
        jump_std: f64,
    },
    Nig {
        alpha: f64,
        beta: f64,
        delta: f64,
    },
    BilateralGamma {
        alpha_plus: f64,
        lambda_plus: f64,
        alpha_minus: f64,
        lambda_minus: f64,
    },
}

impl DriverConfig {
    pub fn build(&self) -> Result<LevyModel, CliError> {
        let kind = match self.process {
            ProcessConfig::Brownian { volatility } => LevyKind::Brownian { volatility },
            ProcessConfig::Poisson { intensity } => LevyKind::Poisson { intensity },
            ProcessConfig::CompoundPoissonNormal {
                intensity,
                jump_mean,
                jump_std,
            } => LevyKind::CompoundPoissonNormal {
                intensity,
                jump_mean,
                jump_std,
            },
            ProcessConfig::Nig { alpha, beta, delta } => {
                LevyKind::ParametricJump(JumpFamily::from_name("nig", &[alpha, beta, delta])?)
            }
            ProcessConfig::BilateralGamma {
                alpha_plus,
                lambda_plus,
                alpha_minus,
                lambda_minus,
            } => LevyKind::ParametricJump(JumpFamily::from_name(
                "bilateral_gamma",
                &[alpha_plus, lambda_plus, alpha_minus, lambda_minus],
            )?),
        };
        let pair = |v: Option<[f64; 2]>, d: (f64, f64)| v.map_or(d, |[a, b]| (a, b));
        let model = LevyModel::with_intervals(
            kind,
            pair(self.moment_interval, levyterm_core::levy::DEFAULT_MOMENT_INTERVAL),
            pair(self.working_interval, levyterm_core::levy::DEFAULT_WORKING_INTERVAL),
        )?;
        Ok(if self.compensated { model.decompose().1 } else { model })
    }
}

/// Curves given in closed form or read from a CSV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CurveConfig {
    Constant {
        level: f64,
    },
    Polynomial {
        coefficients: Vec<f64>,
    },
    Exponential {
        scale: f64,
        rate: f64,
    },
    ScaledShiftedExp {
        scale: f64,
        rate: f64,
        offset: f64,
    },
    Sum {
        terms: Vec<CurveConfig>,
    },
    /// Path relative to the scenario file.
    Csv {
        path: PathBuf,
    },
}

impl CurveConfig {
    pub fn analytic(&self) -> Option<AnalyticCurve> {
        Some(match self {
            CurveConfig::Constant { level } => AnalyticCurve::Constant(*level),
            CurveConfig::Polynomial { coefficients } => AnalyticCurve::Polynomial(coefficients.clone()),
            CurveConfig::Exponential { scale, rate } => AnalyticCurve::Exponential {
                scale: *scale,
                rate: *rate,
            },
            CurveConfig::ScaledShiftedExp { scale, rate, offset } => AnalyticCurve::ScaledShiftedExp {
                scale: *scale,
                rate: *rate,
                offset: *offset,
            },
            CurveConfig::Sum { terms } => {
                AnalyticCurve::Sum(terms.iter().map(|t| t.analytic()).collect::<Option<Vec<_>>>()?)
            }
            CurveConfig::Csv { .. } => return None,
        })
    }

    pub fn build(&self, grid: &GridConfig, base_dir: &Path) -> Result<ForwardCurve, CliError> {
        let n = grid.n_points()?;
        if let CurveConfig::Csv { path } = self {
            let curve = ForwardCurve::load_csv(&base_dir.join(path))?;
            if curve.n_points() != n || (curve.x_max() - grid.x_max).abs() > 1e-12 * grid.x_max {
                return Err(CliError::Config(format!(
                    "curve {} has {} cells on [0, {}], the grid needs {n} on [0, {}]",
                    path.display(),
                    curve.n_points(),
                    curve.x_max(),
                    grid.x_max
                )));
            }
            return Ok(curve);
        }
        Ok(self.analytic().expect("non-file curve").sample(grid.x_max, n)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionalConfig {
    Constant {
        value: f64,
    },
    ClippedAffineShortRate {
        intercept: f64,
        slope: f64,
        lo: f64,
        hi: f64,
    },
    ClippedAffineRate {
        maturity: f64,
        intercept: f64,
        slope: f64,
        lo: f64,
        hi: f64,
    },
}

impl FunctionalConfig {
    fn build(&self) -> StateFunctional {
        match *self {
            FunctionalConfig::Constant { value } => StateFunctional::Constant(value),
            FunctionalConfig::ClippedAffineShortRate {
                intercept,
                slope,
                lo,
                hi,
            } => StateFunctional::ClippedAffineShortRate {
                intercept,
                slope,
                lo,
                hi,
            },
            FunctionalConfig::ClippedAffineRate {
                maturity,
                intercept,
                slope,
                lo,
                hi,
            } => StateFunctional::ClippedAffineRate {
                maturity,
                intercept,
                slope,
                lo,
                hi,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectionConfig {
    pub curve: CurveConfig,
    pub scale: FunctionalConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum VolatilityConfig {
    ConstantDirection {
        directions: Vec<DirectionConfig>,
    },
    /// `σ1 = φ1 p(x)`, `σ2 = φ2 e^{δx}`, `σ3 = −η` on drivers [brownian, brownian, poisson].
    JumpDiffusion {
        poly: Vec<f64>,
        delta: f64,
        eta: f64,
        phi1: FunctionalConfig,
        phi2: FunctionalConfig,
    },
    StateDependentEta {
        poly: Vec<f64>,
        delta: f64,
        eta: FunctionalConfig,
        phi1: FunctionalConfig,
        phi2: FunctionalConfig,
    },
}

impl VolatilityConfig {
    pub fn build(&self, grid: &GridConfig, base_dir: &Path) -> Result<VolatilitySpec, CliError> {
        Ok(match self {
            VolatilityConfig::ConstantDirection { directions } => VolatilitySpec::ConstantDirection {
                directions: directions
                    .iter()
                    .map(|d| d.curve.build(grid, base_dir))
                    .collect::<Result<_, _>>()?,
                scales: directions.iter().map(|d| d.scale.build()).collect(),
            },
            VolatilityConfig::JumpDiffusion {
                poly,
                delta,
                eta,
                phi1,
                phi2,
            } => VolatilitySpec::JumpDiffusion {
                poly: poly.clone(),
                delta: *delta,
                eta: *eta,
                phi1: phi1.build(),
                phi2: phi2.build(),
            },
            VolatilityConfig::StateDependentEta {
                poly,
                delta,
                eta,
                phi1,
                phi2,
            } => VolatilitySpec::StateDependentEta {
                poly: poly.clone(),
                delta: *delta,
                eta: eta.build(),
                phi1: phi1.build(),
                phi2: phi2.build(),
            },
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightConfig {
    Exp { alpha: f64 },
    Poly { alpha: f64 },
}

impl WeightConfig {
    pub fn build(self) -> WeightSpec {
        match self {
            WeightConfig::Exp { alpha } => WeightSpec::Exp { alpha },
            WeightConfig::Poly { alpha } => WeightSpec::Poly { alpha },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantConfig {
    Original,
    #[default]
    Tehranchi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpaceConfig {
    Weighted {
        weight: WeightConfig,
        #[serde(default)]
        variant: VariantConfig,
        #[serde(default = "default_tolerance")]
        tolerance: f64,
    },
    BjorkSvensson {
        beta: f64,
        gamma: f64,
        #[serde(default = "default_series_terms")]
        series_terms: usize,
    },
}

fn default_tolerance() -> f64 {
    1e-6
}

fn default_series_terms() -> usize {
    50
}

impl SpaceConfig {
    pub fn build(&self) -> CurveSpaceConfig {
        match *self {
            SpaceConfig::Weighted {
                weight,
                variant,
                tolerance,
            } => {
                let variant = match variant {
                    VariantConfig::Original => NormVariant::Original,
                    VariantConfig::Tehranchi => NormVariant::Tehranchi,
                };
                let mut cfg = levyterm_core::WeightedConfig::new(weight.build(), variant);
                cfg.tolerance = tolerance;
                CurveSpaceConfig::Weighted(cfg)
            }
            SpaceConfig::BjorkSvensson {
                beta,
                gamma,
                series_terms,
            } => CurveSpaceConfig::BjorkSvensson {
                beta,
                gamma,
                series_terms,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeConfig {
    #[default]
    Auto,
    Stepping,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloConfig {
    #[serde(default = "default_paths")]
    pub n_paths: usize,
    /// Worker threads; 0 uses the global pool.
    #[serde(default)]
    pub parallelism: usize,
    #[serde(default)]
    pub clamp_exposure: bool,
    #[serde(default = "default_failure_fraction")]
    pub max_failure_fraction: f64,
    #[serde(default)]
    pub mode: ModeConfig,
}

fn default_paths() -> usize {
    1000
}

fn default_failure_fraction() -> f64 {
    0.1
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        MonteCarloConfig {
            n_paths: default_paths(),
            parallelism: 0,
            clamp_exposure: false,
            max_failure_fraction: default_failure_fraction(),
            mode: ModeConfig::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Bond maturities in years (calendar time, not time to maturity).
    #[serde(default)]
    pub maturities: Vec<f64>,
    /// Times at which path data are recorded; defaults to `[t_max]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoints: Option<Vec<f64>>,
    /// Number of leading paths whose curves are written at each checkpoint.
    #[serde(default)]
    pub curve_snapshots: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MartingaleConfig {
    #[serde(default = "default_se_multiplier")]
    pub se_multiplier: f64,
    #[serde(default = "default_dt_factor")]
    pub dt_factor: f64,
}

fn default_se_multiplier() -> f64 {
    4.0
}

fn default_dt_factor() -> f64 {
    2.0
}

impl Default for MartingaleConfig {
    fn default() -> Self {
        MartingaleConfig {
            se_multiplier: default_se_multiplier(),
            dt_factor: default_dt_factor(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum IntegrandConfig {
    Constant {
        value: f64,
    },
    Ramp {
        intercept: f64,
        slope: f64,
    },
    /// The driver path itself, scaled.
    Driver {
        scale: f64,
    },
}

/// Parameters of the dyadic-versus-pathwise integral study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrateConfig {
    #[serde(default)]
    pub driver: usize,
    #[serde(default = "default_integrand")]
    pub integrand: IntegrandConfig,
    #[serde(default = "default_min_level")]
    pub min_level: u32,
    #[serde(default = "default_max_level")]
    pub max_level: u32,
    /// Driver paths are sampled on `2^sample_level` steps.
    #[serde(default = "default_sample_level")]
    pub sample_level: u32,
    #[serde(default = "default_paths")]
    pub n_paths: usize,
}

fn default_integrand() -> IntegrandConfig {
    IntegrandConfig::Ramp {
        intercept: 0.0,
        slope: 1.0,
    }
}

fn default_min_level() -> u32 {
    6
}

fn default_max_level() -> u32 {
    14
}

fn default_sample_level() -> u32 {
    16
}

impl Default for IntegrateConfig {
    fn default() -> Self {
        IntegrateConfig {
            driver: 0,
            integrand: default_integrand(),
            min_level: default_min_level(),
            max_level: default_max_level(),
            sample_level: default_sample_level(),
            n_paths: default_paths(),
        }
    }
}

/// A parsed scenario plus the overrides applied to it and its location.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub file: ScenarioFile,
    pub path: PathBuf,
    pub overrides: Vec<String>,
}

impl LoadedScenario {
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))?;
        let file = parse_scenario(&text, overrides)?;
        Ok(LoadedScenario {
            file,
            path: path.to_path_buf(),
            overrides: overrides.to_vec(),
        })
    }

    pub fn base_dir(&self) -> &Path {
        self.path.parent().unwrap_or(Path::new("."))
    }

    pub fn models(&self) -> Result<Vec<LevyModel>, CliError> {
        self.file.drivers.iter().map(DriverConfig::build).collect()
    }

    /// The engine scenario with every physical parameter validated.
    pub fn simulation(&self) -> Result<SimulationScenario, CliError> {
        let f = &self.file;
        let h0 = f.initial_curve.build(&f.grid, self.base_dir())?;
        let vol = f.volatility.build(&f.grid, self.base_dir())?;
        let mut s = SimulationScenario::new(self.models()?, vol, f.space.build(), h0, f.grid.t_max, f.grid.dt());
        s.n_paths = f.monte_carlo.n_paths;
        s.seed = f.seed;
        s.clamp_exposure = f.monte_carlo.clamp_exposure;
        s.maturities = f.output.maturities.clone();
        if let Some(c) = &f.output.checkpoints {
            s.checkpoints = c.clone();
        }
        s.keep_curves = f.output.curve_snapshots;
        s.parallelism = f.monte_carlo.parallelism;
        s.mode = match f.monte_carlo.mode {
            ModeConfig::Auto => EngineMode::Auto,
            ModeConfig::Stepping => EngineMode::Stepping,
        };
        s.max_failure_fraction = f.monte_carlo.max_failure_fraction;
        s.validate()?;
        Ok(s)
    }

    pub fn martingale_options(&self) -> MartingaleOptions {
        MartingaleOptions {
            se_multiplier: self.file.martingale.se_multiplier,
            dt_factor: self.file.martingale.dt_factor,
        }
    }
}

/// Parses a scenario document after applying `key.path=value` overrides.
pub fn parse_scenario(text: &str, overrides: &[String]) -> Result<ScenarioFile, CliError> {
    let mut table: toml::Table = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    match table.get("version") {
        None => return Err(CliError::Config("missing mandatory `version`".into())),
        Some(toml::Value::Integer(v)) if *v == SUPPORTED_VERSION as i64 => {}
        Some(v) => {
            return Err(CliError::Config(format!(
                "unsupported scenario version {v}, expected {SUPPORTED_VERSION}"
            )))
        }
    }
    table
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))
}

/// Sets a dotted key such as `monte_carlo.n_paths=100` or `drivers.0.process.intensity=2`.
/// The value is read as a TOML value, falling back to a bare string.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{assignment}` is not of the form key=value")))?;
    let value = parse_value(raw.trim());
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("override key `{key}` is malformed")));
    }
    let bad = || CliError::Config(format!("override key `{key}` does not address a value"));
    let (last, init) = parts.split_last().expect("non-empty key");
    let Some((first, middle)) = init.split_first() else {
        table.insert(last.to_string(), value);
        return Ok(());
    };
    let mut cur = table
        .entry(first.to_string())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    for p in middle {
        cur = step_into(cur, p).ok_or_else(bad)?;
    }
    match cur {
        toml::Value::Table(t) => {
            t.insert(last.to_string(), value);
        }
        toml::Value::Array(a) => {
            let i: usize = last.parse().map_err(|_| bad())?;
            *a.get_mut(i).ok_or_else(bad)? = value;
        }
        _ => return Err(bad()),
    }
    Ok(())
}

fn step_into<'a>(v: &'a mut toml::Value, key: &str) -> Option<&'a mut toml::Value> {
    match v {
        toml::Value::Table(t) => Some(
            t.entry(key.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new())),
        ),
        toml::Value::Array(a) => a.get_mut(key.parse::<usize>().ok()?),
        _ => None,
    }
}

fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

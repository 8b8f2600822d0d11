use crate::curves::{CurveSpaceConfig, ForwardCurve};
use crate::engine::volatility::VolatilitySpec;
use crate::error::{Error, Result};
use crate::levy::{LevyKind, LevyModel};

/// How paths are advanced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EngineMode {
    /// Closed-form accumulation when the volatility does not depend on the
    /// state, stepping otherwise.
    #[default]
    Auto,
    /// Always advance the full curve step by step.
    Stepping,
}

/// Everything needed for one reproducible Monte Carlo run.
#[derive(Debug, Clone)]
pub struct SimulationScenario {
    pub models: Vec<LevyModel>,
    pub volatility: VolatilitySpec,
    pub space: CurveSpaceConfig,
    pub initial_curve: ForwardCurve,
    pub t_max: f64,
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub clamp_exposure: bool,
    /// Absolute bond maturities `T` reported at each checkpoint.
    pub maturities: Vec<f64>,
    /// Times at which path records are kept.
    pub checkpoints: Vec<f64>,
    /// Keep the full curve at every checkpoint for paths with id below this.
    pub keep_curves: usize,
    /// Worker threads; 0 uses the global pool.
    pub parallelism: usize,
    pub mode: EngineMode,
    /// Largest tolerated fraction of failed paths.
    pub max_failure_fraction: f64,
}

impl SimulationScenario {
    /// Scenario with defaults for everything but the model data.
    pub fn new(
        models: Vec<LevyModel>,
        volatility: VolatilitySpec,
        space: CurveSpaceConfig,
        initial_curve: ForwardCurve,
        t_max: f64,
        dt: f64,
    ) -> Self {
        SimulationScenario {
            models,
            volatility,
            space,
            initial_curve,
            t_max,
            dt,
            n_paths: 1,
            seed: 0,
            clamp_exposure: false,
            maturities: Vec::new(),
            checkpoints: vec![t_max],
            keep_curves: 0,
            parallelism: 0,
            mode: EngineMode::Auto,
            max_failure_fraction: 0.1,
        }
    }

    pub fn n_steps(&self) -> usize {
        (self.t_max / self.dt).round() as usize
    }

    /// Grid nodes advanced per time step.
    pub fn shift_nodes(&self) -> usize {
        (self.dt / self.initial_curve.dx()).round() as usize
    }

    pub fn checkpoint_steps(&self) -> Vec<usize> {
        self.checkpoints
            .iter()
            .map(|t| (t / self.dt).round() as usize)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() {
            return Err(Error::InvalidParameter("at least one driver is required".into()));
        }
        self.volatility.validate()?;
        self.space.validate()?;
        if self.volatility.n_drivers() != self.models.len() {
            return Err(Error::InvalidParameter(format!(
                "volatility has {} components for {} drivers",
                self.volatility.n_drivers(),
                self.models.len()
            )));
        }
        if matches!(
            self.volatility,
            VolatilitySpec::JumpDiffusion { .. } | VolatilitySpec::StateDependentEta { .. }
        ) {
            let kinds_ok = matches!(self.models[0].kind(), LevyKind::Brownian { .. })
                && matches!(self.models[1].kind(), LevyKind::Brownian { .. })
                && matches!(self.models[2].kind(), LevyKind::Poisson { .. });
            if !kinds_ok {
                return Err(Error::InvalidParameter(
                    "jump-diffusion volatility needs drivers [brownian, brownian, poisson]".into(),
                ));
            }
        }
        if let CurveSpaceConfig::BjorkSvensson { beta, gamma, .. } = self.space {
            self.volatility.check_bs_constraints(beta, gamma)?;
        }
        if !(self.t_max > 0.0 && self.dt > 0.0 && self.t_max.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "need t_max, dt > 0; got {}, {}",
                self.t_max, self.dt
            )));
        }
        let aligned = |a: f64, b: f64| {
            let r = a / b;
            (r - r.round()).abs() <= 1e-9 * r.abs().max(1.0) && r.round() >= 1.0
        };
        let dx = self.initial_curve.dx();
        if !aligned(self.dt, dx) {
            return Err(Error::NonAlignedShift { shift: self.dt, dx });
        }
        if !aligned(self.t_max, self.dt) {
            return Err(Error::InvalidGrid(format!(
                "t_max = {} is not a multiple of dt = {}",
                self.t_max, self.dt
            )));
        }
        for &t in &self.checkpoints {
            if !(0.0..=self.t_max * (1.0 + 1e-12)).contains(&t) || !(t == 0.0 || aligned(t, self.dt)) {
                return Err(Error::InvalidGrid(format!("checkpoint {t} is not on the time grid")));
            }
        }
        if self.checkpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidGrid("checkpoints must be strictly increasing".into()));
        }
        for &t in &self.checkpoints {
            for &m in &self.maturities {
                if m >= t && m - t > self.initial_curve.x_max() * (1.0 + 1e-12) {
                    return Err(Error::MaturityBeyondGrid {
                        tau: m - t,
                        x_max: self.initial_curve.x_max(),
                    });
                }
            }
        }
        for &m in &self.maturities {
            if !(m == 0.0 || aligned(m, dx)) {
                return Err(Error::NonAlignedShift { shift: m, dx });
            }
        }
        if self.n_paths == 0 {
            return Err(Error::InvalidParameter("n_paths must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.max_failure_fraction) {
            return Err(Error::InvalidParameter(
                "max_failure_fraction must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

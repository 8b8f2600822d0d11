//! Fixtures shared by the benchmarks.

use levyterm_core::engine::StateFunctional;
use levyterm_core::{
    CurveSpaceConfig, ForwardCurve, LevyModel, NormVariant, SimulationScenario, VolatilitySpec, WeightSpec,
    WeightedConfig,
};

/// Two Wiener drivers and a Poisson driver with constant scales on a daily
/// grid out to `x_max` years. `t_max` must be a whole number of days.
pub fn mixed_scenario(x_max: f64, t_max: f64, n_paths: usize) -> SimulationScenario {
    let n = (x_max * 365.0).round() as usize;
    let h0 = ForwardCurve::from_fn(x_max, n, |x| 0.04 - 0.01 * (-0.3 * x).exp(), 0.04).expect("valid curve");
    let mut s = SimulationScenario::new(
        vec![
            LevyModel::brownian(1.0).expect("valid model"),
            LevyModel::brownian(1.0).expect("valid model"),
            LevyModel::poisson(1.0).expect("valid model"),
        ],
        VolatilitySpec::JumpDiffusion {
            poly: vec![0.004, 0.0002],
            delta: -0.1,
            eta: 0.005,
            phi1: StateFunctional::Constant(1.0),
            phi2: StateFunctional::Constant(0.008),
        },
        weighted(),
        h0,
        t_max,
        1.0 / 365.0,
    );
    s.n_paths = n_paths;
    s.maturities = vec![5.0];
    s.checkpoints = vec![t_max];
    s
}

/// As [`mixed_scenario`] with the first scale depending on the short rate,
/// which rules out the precomputed linear plan.
pub fn state_dependent_scenario(x_max: f64, t_max: f64, n_paths: usize) -> SimulationScenario {
    let mut s = mixed_scenario(x_max, t_max, n_paths);
    if let VolatilitySpec::JumpDiffusion { phi1, .. } = &mut s.volatility {
        *phi1 = StateFunctional::ClippedAffineShortRate {
            intercept: 0.5,
            slope: 10.0,
            lo: 0.0,
            hi: 1.0,
        };
    }
    s
}

pub fn weighted() -> CurveSpaceConfig {
    CurveSpaceConfig::Weighted(WeightedConfig::new(
        WeightSpec::Exp { alpha: 1.0 },
        NormVariant::Tehranchi,
    ))
}

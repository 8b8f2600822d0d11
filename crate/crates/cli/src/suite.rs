//! The `validate` suite: named numerical checks of the library's identities,
//! inequalities and statistical properties, plus the scenario's own hypotheses.

use levyterm_core::curves::{
    check_bs_divergence, embedding_constants, norm_bs_analytic, norm_w, norm_w_unchecked, random_corpus,
    verify_embedding, CorpusOptions, DivergenceOptions, IntegrandSpec,
};
use levyterm_core::drift::{drift_consistency_check, verify_c5_bound};
use levyterm_core::engine::{hypothesis_check, martingale_test, HypothesisOptions, MartingaleOptions, StateFunctional};
use levyterm_core::integration::{
    doob_check, g_integral_approx, isometry_check, stieltjes_full, stieltjes_left_limit, DyadicLevel, IntegrandPath,
};
use levyterm_core::levy::{sample_paths, JumpFamily};
use levyterm_core::{
    hjm_drift, AnalyticCurve, CurveSpaceConfig, DriftInput, ForwardCurve, LevyKind, LevyModel, NormVariant, PathGrid,
    SimulationScenario, VolatilitySpec, WeightSpec, WeightedConfig,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::LoadedScenario;
use crate::{CheckRecord, CliError};

type CheckFn = fn(u64) -> Result<CheckRecord, levyterm_core::Error>;

/// Every library check in the order it is run.
pub const CHECKS: &[(&str, CheckFn)] = &[
    ("cumulant_identities", cumulant_identities),
    ("cumulant_derivative_order", cumulant_derivative_order),
    ("bs_norm_exponential", bs_norm_exponential),
    ("bs_divergence_flagged", bs_divergence_flagged),
    ("bs_divergence_control", bs_divergence_control),
    ("weighted_norm_closed_forms", weighted_norm_closed_forms),
    ("embedding_estimates", embedding_estimates),
    ("norm_equivalence", norm_equivalence),
    ("shift_semigroup", shift_semigroup),
    ("drift_closed_forms", drift_closed_forms),
    ("drift_two_form_order", drift_two_form_order),
    ("drift_lipschitz_bound", drift_lipschitz_bound),
    ("poisson_integral_identity", poisson_integral_identity),
    ("isometry", isometry),
    ("doob_inequality", doob_inequality),
    ("transport_exactness", transport_exactness),
];

/// Runs the library checks and the scenario hypothesis check.
pub fn run(sc: &LoadedScenario) -> Result<Vec<CheckRecord>, CliError> {
    let seed = sc.file.seed;
    let mut out = Vec::with_capacity(CHECKS.len() + 1);
    for (id, f) in CHECKS {
        out.push(f(seed).unwrap_or_else(|e| CheckRecord {
            id: id.to_string(),
            expected: "check completes".into(),
            got: e.to_string(),
            tolerance: 0.0,
            passed: false,
        }));
    }
    let scenario = sc.simulation()?;
    let rows = hypothesis_check(&scenario, &HypothesisOptions::default())?;
    let failed: Vec<&str> = rows.iter().filter(|r| !r.holds).map(|r| r.check.as_str()).collect();
    out.push(CheckRecord {
        id: "scenario_hypotheses".into(),
        expected: format!("{} hypothesis rows hold", rows.len()),
        got: if failed.is_empty() {
            "all hold".into()
        } else {
            format!("violated: {}", failed.join(" "))
        },
        tolerance: 0.0,
        passed: failed.is_empty(),
    });
    Ok(out)
}

fn record(id: &str, expected: impl Into<String>, got: f64, tolerance: f64, passed: bool) -> CheckRecord {
    CheckRecord {
        id: id.into(),
        expected: expected.into(),
        got: format!("{got}"),
        tolerance,
        passed,
    }
}

fn wide(kind: LevyKind, moment: f64, working: f64) -> LevyModel {
    LevyModel::with_intervals(kind, (-moment, moment), (-working, working)).expect("valid test model")
}

fn test_models() -> Vec<LevyModel> {
    vec![
        wide(LevyKind::Brownian { volatility: 0.8 }, 10.0, 5.0),
        wide(LevyKind::Poisson { intensity: 1.5 }, 3.0, 2.0),
        wide(
            LevyKind::CompoundPoissonNormal {
                intensity: 1.0,
                jump_mean: 0.0,
                jump_std: 1.0,
            },
            2.0,
            1.0,
        ),
        wide(
            LevyKind::ParametricJump(JumpFamily::NormalInverseGaussian {
                alpha: 3.0,
                beta: 0.5,
                delta: 0.8,
            }),
            2.0,
            1.0,
        ),
    ]
}

fn cumulant_identities(_: u64) -> Result<CheckRecord, levyterm_core::Error> {
    let mut worst = 0.0f64;
    for m in test_models() {
        worst = worst.max(m.cumulant(0.0, 0)?.abs());
        worst = worst.max((m.cumulant(0.0, 1)? - m.mean_slope()).abs());
        let var = m.gaussian_part() + m.levy_measure_second_moment();
        worst = worst.max((m.cumulant(0.0, 2)? - var).abs() / var.max(1.0));
    }
    Ok(record(
        "cumulant_identities",
        "Psi(0)=0, Psi'(0)=mean, Psi''(0)=variance",
        worst,
        1e-12,
        worst <= 1e-12,
    ))
}

fn cumulant_derivative_order(_: u64) -> Result<CheckRecord, levyterm_core::Error> {
    let mut worst = f64::INFINITY;
    for m in test_models() {
        let (c, d) = m.working_interval();
        for z in [c * 0.7, 0.3 * d, 0.9 * d] {
            let err = |h: f64| -> Result<f64, levyterm_core::Error> {
                let fd = (m.cumulant(z + h, 1)? - m.cumulant(z - h, 1)?) / (2.0 * h);
                Ok((fd - m.cumulant(z, 2)?).abs())
            };
            let (e1, e2) = (err(1e-2)?, err(5e-3)?);
            if e2 > 1e-11 {
                worst = worst.min((e1 / e2).log2());
            }
        }
    }
    let order = if worst.is_finite() { worst } else { 2.0 };
    Ok(record(
        "cumulant_derivative_order",
        "central-difference order 2 +- 0.2",
        order,
        0.2,
        (order - 2.0).abs() <= 0.2 || order > 2.0,
    ))
}

fn bs_norm_exponential(_: u64) -> Result<CheckRecord, levyterm_core::Error> {
    let mut worst_gap = 0.0f64;
    let mut ok = true;
    for (beta, gamma, delta) in [(2.0, 1.0, 0.3), (4.0, 2.0, 0.9), (1.5, 1.0, 0.1)] {
        let exact = beta / ((beta - delta * delta) * (gamma - 2.0 * delta));
        let n = norm_bs_analytic(
            &AnalyticCurve::Exponential {
                scale: 1.0,
                rate: delta,
            },
            beta,
            gamma,
            200,
        )?;
        let gap = (n.value - exact).abs();
        worst_gap = worst_gap.max(gap);
        ok &= gap <= n.tail_bound + 1e-12 * exact && n.tail_bound < 1e-8;
    }
    Ok(record(
        "bs_norm_exponential",
        "closed form within the tail bound",
        worst_gap,
        1e-8,
        ok,
    ))
}

fn bs_divergence_flagged(_: u64) -> Result<CheckRecord, levyterm_core::Error> {
    let opts = DivergenceOptions {
        truncations: vec![2.0, 4.0, 6.0],
        ..DivergenceOptions::default()
    };
    let r = check_bs_divergence(&IntegrandSpec::CompoundPoissonDriftTerm { gamma: 1.0 }, &opts);
    let last = r.truncated.last().map_or(0.0, |t| t.1);
    Ok(record(
        "bs_divergence_flagged",
        "divergent, integral to 6 above 1e6",
        last,
        1e6,
        r.divergent,
    ))
}

fn bs_divergence_control(_: u64) -> Result<CheckRecord, levyterm_core::Error> {
    let drift = ForwardCurve::from_fn(30.0, 3000, |x| 0.0001 * x, 0.003)?;
    let r = check_bs_divergence(
        &IntegrandSpec::GridSquared {
            curve: drift,
            gamma: 1.0,
        },
        &DivergenceOptions::default(),
    );
    let last = r.truncated.last().map_or(0.0, |t| t.1);
    Ok(record(
        "bs_divergence_control",
        "Brownian drift s^2 x not flagged",
        last,
        1e6,
        !r.divergent,
    ))
}

fn weighted_norm_closed_forms(_: u64) -> Result<CheckRecord, levyterm_core::Error> {
    let n = 30 * 4096;
    let w = WeightSpec::Exp { alpha: 1.0 };
    let cfg = |v| WeightedConfig::new(w, v);
    let decay = ForwardCurve::from_fn(30.0, n, |x| (-x).exp(), 0.0)?;
    let rise = ForwardCurve::from_fn(30.0, n, |x| 1.0 - (-x).exp(), 1.0)?;
    let flat = ForwardCurve::constant(30.0, 300, 0.4)?;
    let errs = [
        (norm_w(&decay, &cfg(NormVariant::Tehranchi))?.squared - 1.0).abs(),
        (norm_w(&rise, &cfg(NormVariant::Original))?.squared - 1.0).abs(),
        (norm_w(&rise, &cfg(NormVariant::Tehranchi))?.squared - 2.0).abs(),
        (norm_w(&flat, &cfg(NormVariant::Original))?.squared - 0.16).abs(),
    ];
    let worst = errs.iter().copied().fold(0.0, f64::max);
    Ok(record(
        "weighted_norm_closed_forms",
        "closed-form squared norms",
        worst,
        1e-6,
        worst <= 1e-6,
    ))
}

fn corpus(seed: u64, count: usize) -> Result<Vec<ForwardCurve>, levyterm_core::Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut curves = random_corpus(&mut rng, &CorpusOptions::default(), count / 2)?;
    let tailed = CorpusOptions {
        with_tail: true,
        ..CorpusOptions::default()
    };
    curves.extend(random_corpus(&mut rng, &tailed, count - count / 2)?);
    Ok(curves)
}

fn embedding_estimates(seed: u64) -> Result<CheckRecord, levyterm_core::Error> {
    let mut violations = 0;
    for w in [WeightSpec::Exp { alpha: 1.0 }, WeightSpec::Poly { alpha: 6.0 }] {
        for h in corpus(seed, 100)? {
            if verify_embedding(&h, &w, NormVariant::Tehranchi).is_err() {
                violations += 1;
            }
        }
    }
    Ok(record(
        "embedding_estimates",
        "zero violations on 2 x 100 curves",
        violations as f64,
        0.0,
        violations == 0,
    ))
}

fn norm_equivalence(seed: u64) -> Result<CheckRecord, levyterm_core::Error> {
    let mut violations = 0;
    for w in [WeightSpec::Exp { alpha: 1.0 }, WeightSpec::Poly { alpha: 6.0 }] {
        let c2 = embedding_constants(&w)?.c2;
        let k = (1.0 + c2 * c2).sqrt();
        for h in corpus(seed.wrapping_add(1), 100)? {
            let t = norm_w_unchecked(&h, &w, NormVariant::Tehranchi).sqrt();
            let o = norm_w_unchecked(&h, &w, NormVariant::Original).sqrt();
            let sup = h.values().iter().fold(h.tail_value().abs(), |m, v| m.max(v.abs()));
            let eps = 1.0 + 1e-12;
            if !(t / k <= o * eps && o <= k * t * eps && sup <= c2 * t * eps) {
                violations += 1;
            }
        }
    }
    Ok(record(
        "norm_equivalence",
        "norm equivalence and point evaluation hold on 2 x 100 curves",
        violations as f64,
        0.0,
        violations == 0,
    ))
}

fn shift_semigroup(seed: u64) -> Result<CheckRecord, levyterm_core::Error> {
    let w = WeightSpec::Exp { alpha: 1.0 };
    let mut violations = 0;
    for h in corpus(seed.wrapping_add(2), 20)? {
        let dx = h.dx();
        if h.shift(7.0 * dx)?.shift(13.0 * dx)? != h.shift(20.0 * dx)? || h.shift(0.0)? != h {
            violations += 1;
        }
        if h.tail_value() == 0.0 {
            let n0 = norm_w_unchecked(&h, &w, NormVariant::Tehranchi);
            if norm_w_unchecked(&h.shift(64.0 * dx)?, &w, NormVariant::Tehranchi) > n0 {
                violations += 1;
            }
        }
    }
    Ok(record(
        "shift_semigroup",
        "bit-exact composition, contraction without tail",
        violations as f64,
        0.0,
        violations == 0,
    ))
}

fn drift_closed_forms(_: u64) -> Result<CheckRecord, levyterm_core::Error> {
    let s = 0.01;
    let b = hjm_drift(&DriftInput::new(
        vec![ForwardCurve::constant(10.0, 3650, s)?],
        vec![LevyModel::brownian(1.0)?],
    )?)?;
    let (lambda, eta) = (1.0, 0.01);
    let p = hjm_drift(&DriftInput::new(
        vec![ForwardCurve::constant(10.0, 3650, -eta)?],
        vec![LevyModel::poisson(lambda)?],
    )?)?;
    let mut worst = 0.0f64;
    for k in 0..=3650 {
        let x = b.x(k);
        worst = worst.max((b.node(k) - s * s * x).abs() / (s * s * 10.0));
        let e = lambda * eta * (eta * x).exp();
        worst = worst.max((p.node(k) - e).abs() / e);
    }
    Ok(record(
        "drift_closed_forms",
        "s^2 x and lambda eta e^(eta x)",
        worst,
        1e-10,
        worst <= 1e-10,
    ))
}

fn drift_two_form_order(_: u64) -> Result<CheckRecord, levyterm_core::Error> {
    let cases = [
        (-0.05, wide(LevyKind::Poisson { intensity: 2.0 }, 3.0, 2.0)),
        (
            0.1,
            wide(
                LevyKind::CompoundPoissonNormal {
                    intensity: 1.0,
                    jump_mean: 0.0,
                    jump_std: 1.0,
                },
                2.0,
                1.0,
            ),
        ),
    ];
    let mut worst = 0.0f64;
    for (sigma, model) in cases {
        let d = |n: usize| -> Result<f64, levyterm_core::Error> {
            Ok(drift_consistency_check(&DriftInput::new(
                vec![ForwardCurve::constant(8.0, n, sigma)?],
                vec![model.clone()],
            )?)?
            .max_discrepancy)
        };
        let order = (d(200)? / d(400)?).log2();
        worst = worst.max((order - 2.0).abs());
    }
    let b = drift_consistency_check(&DriftInput::new(
        vec![ForwardCurve::constant(8.0, 400, 0.2)?],
        vec![wide(LevyKind::Brownian { volatility: 1.0 }, 10.0, 5.0)],
    )?)?;
    let ok = worst <= 0.2 && b.max_discrepancy <= 1e-12;
    Ok(record(
        "drift_two_form_order",
        "observed order 2 +- 0.2",
        2.0 + worst,
        0.2,
        ok,
    ))
}

fn drift_lipschitz_bound(seed: u64) -> Result<CheckRecord, levyterm_core::Error> {
    let weight = WeightSpec::Exp { alpha: 1.0 };
    let opts = CorpusOptions {
        x_max: 20.0,
        n_points: 20 * 64,
        ..CorpusOptions::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(3));
    let mut violations = 0;
    let mut min_slack = f64::INFINITY;
    for model in test_models().into_iter().take(3) {
        let curves = random_corpus(&mut rng, &opts, 100)?;
        for pair in curves.chunks(2) {
            let g = DriftInput::new(vec![pair[0].clone()], vec![model.clone()])?;
            let h = DriftInput::new(vec![pair[1].clone()], vec![model.clone()])?;
            match verify_c5_bound(&g, &h, &weight) {
                Ok(r) => min_slack = min_slack.min(r.slack()),
                Err(levyterm_core::Error::ViolationDetected(_)) => violations += 1,
                Err(e) => return Err(e),
            }
        }
    }
    Ok(record(
        "drift_lipschitz_bound",
        "zero violations over 150 pairs",
        violations as f64,
        0.0,
        violations == 0 && min_slack >= 0.0,
    ))
}

fn poisson_integral_identity(seed: u64) -> Result<CheckRecord, levyterm_core::Error> {
    let paths = sample_paths(&LevyModel::poisson(1.0)?, PathGrid::new(10.0, 100)?, seed, 100)?;
    let mut mismatches = 0;
    for x in &paths {
        let phi = IntegrandPath::Driver {
            path: x.clone(),
            scale: 1.0,
        };
        let xt = *x.values.last().expect("non-empty path");
        let mut times = vec![0.0];
        times.extend(x.jumps.as_deref().unwrap_or(&[]).iter().map(|j| j.time));
        times.push(10.0);
        let gap = times.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        let level = (0..=22).find(|&n| 10.0 * 0.5f64.powi(n) < gap).unwrap_or(22);
        let g = g_integral_approx(&phi, x, DyadicLevel::new(level as u32)?, 0.0).terminal();
        let left = *stieltjes_left_limit(&phi, x).last().expect("non-empty");
        let full = *stieltjes_full(&phi, x).last().expect("non-empty");
        if g != 0.5 * (xt * xt - xt) || left != 0.5 * (xt * xt - xt) || full != 0.5 * (xt * xt + xt) {
            mismatches += 1;
        }
    }
    Ok(record(
        "poisson_integral_identity",
        "exact (X^2 - X)/2 and (X^2 + X)/2 on 100 paths",
        mismatches as f64,
        0.0,
        mismatches == 0,
    ))
}

fn isometry(seed: u64) -> Result<CheckRecord, levyterm_core::Error> {
    let grid = PathGrid::new(1.0, 64)?;
    let level = DyadicLevel::new(6)?;
    let comp = LevyModel::poisson(2.0)?.decompose().1;
    let pois = sample_paths(&comp, grid, seed, 10_000)?;
    let brown = sample_paths(&LevyModel::brownian(1.0)?, grid, seed.wrapping_add(1), 10_000)?;
    let reports = [
        isometry_check(&pois, comp.predictable_qv_rate(), level, |_, _| 1.0),
        isometry_check(&pois, comp.predictable_qv_rate(), level, |_, _| 0.0),
        isometry_check(&brown, 1.0, level, |m, t| if m.value_at(t) > 0.0 { 1.0 } else { 0.0 }),
    ];
    let worst = reports
        .iter()
        .map(|r| {
            if r.diff_se > 0.0 {
                (r.lhs - r.rhs).abs() / r.diff_se
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max);
    Ok(record(
        "isometry",
        "both sides within 4 standard errors",
        worst,
        4.0,
        reports.iter().all(|r| r.passed),
    ))
}

fn doob_inequality(seed: u64) -> Result<CheckRecord, levyterm_core::Error> {
    let grid = PathGrid::new(1.0, 256)?;
    let values = |m: &LevyModel, s: u64| -> Result<Vec<Vec<f64>>, levyterm_core::Error> {
        Ok(sample_paths(m, grid, s, 10_000)?
            .into_iter()
            .map(|p| p.values)
            .collect())
    };
    let b = doob_check(&values(&LevyModel::brownian(1.0)?, seed)?);
    let p = doob_check(&values(&LevyModel::poisson(2.0)?.decompose().1, seed.wrapping_add(1))?);
    Ok(record(
        "doob_inequality",
        "E sup |M|^2 <= 4 E |M_T|^2",
        b.ratio.max(p.ratio),
        4.0,
        b.passed && p.passed,
    ))
}

fn transport_exactness(_: u64) -> Result<CheckRecord, levyterm_core::Error> {
    let h0 = ForwardCurve::from_fn(10.0, 1000, |x| 0.03 + 0.01 * (1.0 - (-0.5 * x).exp()), 0.04)?;
    let mut s = SimulationScenario::new(
        vec![LevyModel::brownian(1.0)?],
        VolatilitySpec::ConstantDirection {
            directions: vec![ForwardCurve::constant(10.0, 1000, 0.0)?],
            scales: vec![StateFunctional::Constant(1.0)],
        },
        CurveSpaceConfig::Weighted(WeightedConfig::new(
            WeightSpec::Exp { alpha: 1.0 },
            NormVariant::Tehranchi,
        )),
        h0.clone(),
        2.0,
        0.01,
    );
    s.n_paths = 4;
    s.keep_curves = s.n_paths;
    s.checkpoints = vec![1.0, 2.0];
    s.maturities = vec![5.0, 8.0];
    let e = levyterm_core::simulate(&s)?;
    let mut exact = true;
    for p in &e.paths {
        for (c, r) in p.curves.iter().zip(&p.records) {
            exact &= *c == h0.shift(r.t)?;
        }
    }
    let dev = martingale_test(&e, &MartingaleOptions::default())
        .iter()
        .map(|r| r.deviation)
        .fold(0.0, f64::max);
    Ok(record(
        "transport_exactness",
        "bit-exact shifts, martingale deviation <= 1e-10",
        dev,
        1e-10,
        exact && dev <= 1e-10,
    ))
}

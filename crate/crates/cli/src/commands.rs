//! The `simulate`, `norms`, `drift` and `integrate` subcommands.

use levyterm_core::curves::{
    embedding_constants, norm_bs_analytic, norm_w, norm_w_unchecked, verify_embedding, CurveSpaceConfig,
};
use levyterm_core::drift::{admissible, hjm_drift_clamped};
use levyterm_core::engine::{hypothesis_check, martingale_test, BoundVolatility, HypothesisOptions};
use levyterm_core::integration::{consistency_check, mean_se, DyadicLevel, IntegrandPath};
use levyterm_core::levy::sample_path_with;
use levyterm_core::rng::path_rng;
use levyterm_core::{hjm_drift, DriftInput, NormVariant, PathGrid};
use rayon::prelude::*;

use crate::config::{IntegrandConfig, LoadedScenario};
use crate::output::{num, OutputDir};
use crate::{CheckRecord, CliError, Outcome};

fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|c| c.to_string()).collect()
}

fn years(v: f64) -> String {
    format!("{v}y")
}

/// Runs the ensemble and writes path data plus the martingale and hypothesis reports.
pub fn simulate(sc: &LoadedScenario, out: &mut OutputDir) -> Result<Outcome, CliError> {
    let scenario = sc.simulation()?;
    let ensemble = levyterm_core::simulate(&scenario)?;

    let mut cols = header(&[
        "path_id",
        "t_years",
        "short_rate_per_year",
        "integrated_short_rate",
        "discount_factor",
    ]);
    cols.extend(
        scenario
            .maturities
            .iter()
            .map(|m| format!("bond_price_T_{}", years(*m))),
    );
    out.csv(
        "paths.csv",
        &cols,
        ensemble.paths.iter().flat_map(|p| {
            p.records.iter().map(move |r| {
                let mut row = vec![
                    p.path_id.to_string(),
                    num(r.t),
                    num(r.short_rate),
                    num(r.integrated_short_rate),
                    num(r.discount),
                ];
                row.extend(r.bonds.iter().map(|b| num(*b)));
                row
            })
        }),
    )?;

    for p in ensemble.paths.iter().take(sc.file.output.curve_snapshots) {
        for (c, r) in p.curves.iter().zip(&p.records) {
            out.curve(&format!("curves/path{}_t{}.csv", p.path_id, r.t), c)?;
        }
    }
    if !ensemble.failures.is_empty() {
        out.csv(
            "failures.csv",
            &header(&["path_id", "error"]),
            ensemble.failures.iter().map(|(id, e)| vec![id.to_string(), e.clone()]),
        )?;
    }

    let rows = martingale_test(&ensemble, &sc.martingale_options());
    out.csv(
        "martingale_report.csv",
        &header(&[
            "t_years",
            "maturity_years",
            "mean_discounted_bond",
            "standard_error",
            "initial_bond_price",
            "abs_deviation",
            "allowance",
            "n_used",
            "n_excluded",
            "passed",
        ]),
        rows.iter().map(|r| {
            vec![
                num(r.t),
                num(r.maturity),
                num(r.mean),
                num(r.se),
                num(r.initial_price),
                num(r.deviation),
                num(r.allowance),
                r.n_used.to_string(),
                r.n_excluded.to_string(),
                r.passed.to_string(),
            ]
        }),
    )?;

    let hyp = hypothesis_check(&scenario, &HypothesisOptions::default())?;
    out.csv(
        "hypothesis_report.csv",
        &header(&["check", "estimate", "bound", "holds"]),
        hyp.iter()
            .map(|r| vec![r.check.clone(), num(r.estimate), num(r.bound), r.holds.to_string()]),
    )?;

    let checks = rows
        .iter()
        .map(|r| CheckRecord {
            id: format!("martingale_t{}_T{}", r.t, r.maturity),
            expected: format!("|mean - P(0,T)| <= {}", r.allowance),
            got: format!("{}", r.deviation),
            tolerance: r.allowance,
            passed: r.passed,
        })
        .collect();
    let mut outcome = Outcome::new(checks);
    outcome
        .summary
        .push(("paths_simulated".into(), ensemble.paths.len() as f64));
    outcome
        .summary
        .push(("paths_failed".into(), ensemble.failures.len() as f64));
    Ok(outcome)
}

/// Norms and embedding diagnostics of the initial curve and the volatility basis.
pub fn norms(sc: &LoadedScenario, out: &mut OutputDir) -> Result<Outcome, CliError> {
    let f = &sc.file;
    let h0 = f.initial_curve.build(&f.grid, sc.base_dir())?;
    let vol = f.volatility.build(&f.grid, sc.base_dir())?;
    let mut curves = vec![("initial_curve".to_string(), h0)];
    for (i, b) in vol.basis(f.grid.x_max, f.grid.n_points()?)?.into_iter().enumerate() {
        curves.push((format!("volatility_basis_{}", i + 1), b));
    }

    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut checks = Vec::new();
    let mut push = |curve: &str, quantity: &str, v: f64| rows.push(vec![curve.into(), quantity.into(), num(v)]);
    match f.space.build() {
        CurveSpaceConfig::Weighted(cfg) => {
            let c = embedding_constants(&cfg.weight)?;
            for (q, v) in [("c1", c.c1), ("c2", c.c2), ("c3", c.c3), ("c4", c.c4)] {
                push("weight", q, v);
            }
            for (name, curve) in &curves {
                match norm_w(curve, &cfg) {
                    Ok(n) => {
                        push(name, "norm_squared", n.squared);
                        push(name, "quadrature_error_estimate", n.error_estimate);
                    }
                    Err(levyterm_core::Error::GridTooCoarse { estimate, tolerance }) => {
                        checks.push(CheckRecord {
                            id: format!("{name}_grid_resolution"),
                            expected: format!("relative error <= {tolerance}"),
                            got: format!("{estimate}"),
                            tolerance,
                            passed: false,
                        });
                        continue;
                    }
                    Err(e) => return Err(e.into()),
                }
                for (label, v) in [
                    ("original", NormVariant::Original),
                    ("tehranchi", NormVariant::Tehranchi),
                ] {
                    push(
                        name,
                        &format!("{label}_norm_squared"),
                        norm_w_unchecked(curve, &cfg.weight, v),
                    );
                }
                let report = verify_embedding(curve, &cfg.weight, cfg.variant);
                match report {
                    Ok(r) => {
                        for (q, ch) in r.checks() {
                            push(name, &format!("{q}_lhs"), ch.lhs);
                            push(name, &format!("{q}_bound"), ch.rhs);
                        }
                        checks.push(CheckRecord::pass(
                            format!("{name}_embedding"),
                            "all four estimates hold",
                        ));
                    }
                    Err(e) => checks.push(CheckRecord {
                        id: format!("{name}_embedding"),
                        expected: "all four estimates hold".into(),
                        got: e.to_string(),
                        tolerance: 0.0,
                        passed: false,
                    }),
                }
            }
        }
        CurveSpaceConfig::BjorkSvensson {
            beta,
            gamma,
            series_terms,
        } => {
            let mut analytic = vec![("initial_curve".to_string(), f.initial_curve.analytic())];
            if let crate::config::VolatilityConfig::ConstantDirection { directions } = &f.volatility {
                for (i, d) in directions.iter().enumerate() {
                    analytic.push((format!("volatility_basis_{}", i + 1), d.curve.analytic()));
                }
            }
            for (name, curve) in analytic {
                let Some(curve) = curve else {
                    push(&name, "bs_norm_squared", f64::NAN);
                    continue;
                };
                match norm_bs_analytic(&curve, beta, gamma, series_terms) {
                    Ok(n) => {
                        push(&name, "bs_norm_squared", n.value);
                        push(&name, "bs_tail_bound", n.tail_bound);
                        checks.push(CheckRecord::pass(format!("{name}_in_space"), "finite norm"));
                    }
                    Err(e) => checks.push(CheckRecord {
                        id: format!("{name}_in_space"),
                        expected: "finite norm".into(),
                        got: e.to_string(),
                        tolerance: 0.0,
                        passed: false,
                    }),
                }
            }
        }
    }
    out.csv("norms.csv", &header(&["curve", "quantity", "value"]), rows)?;
    Ok(Outcome::new(checks))
}

/// The drift at the initial curve for the configured volatility.
///
/// Unlike `simulate`, this accepts volatilities that do not vanish at infinity,
/// so flat curves can be studied directly.
pub fn drift(sc: &LoadedScenario, out: &mut OutputDir) -> Result<Outcome, CliError> {
    let f = &sc.file;
    let models = sc.models()?;
    let h0 = f.initial_curve.build(&f.grid, sc.base_dir())?;
    let vol = f.volatility.build(&f.grid, sc.base_dir())?;
    if vol.n_drivers() != models.len() {
        return Err(CliError::Config(format!(
            "volatility has {} components for {} drivers",
            vol.n_drivers(),
            models.len()
        )));
    }
    let sigmas = BoundVolatility::new(&vol, h0.x_max(), h0.n_points())?.eval(&h0);

    let reports: Vec<_> = sigmas.iter().zip(&models).map(|(s, m)| admissible(s, m)).collect();
    out.csv(
        "admissibility.csv",
        &header(&[
            "driver",
            "exposure_min",
            "exposure_max",
            "working_lo",
            "working_hi",
            "admissible",
            "worst_x_years",
        ]),
        reports.iter().enumerate().map(|(i, r)| {
            vec![
                (i + 1).to_string(),
                num(r.range.0),
                num(r.range.1),
                num(r.working_interval.0),
                num(r.working_interval.1),
                r.admissible.to_string(),
                r.worst_x.map_or(String::new(), num),
            ]
        }),
    )?;

    let input = DriftInput::new(sigmas.clone(), models)?;
    let (alpha, clamps) = if f.monte_carlo.clamp_exposure {
        hjm_drift_clamped(&input)?
    } else {
        (hjm_drift(&input)?, 0)
    };
    let mut cols = header(&["x_years", "drift_per_year_sq"]);
    for i in 0..sigmas.len() {
        cols.push(format!("sigma_{}_per_year", i + 1));
    }
    let rows = (0..=alpha.n_points()).map(|k| {
        let mut row = vec![num(alpha.x(k)), num(alpha.node(k))];
        row.extend(sigmas.iter().map(|s| num(s.node(k))));
        row
    });
    out.csv("drift.csv", &cols, rows)?;
    let mut outcome = Outcome::new(Vec::new());
    outcome.summary.push(("drift_tail_value".into(), alpha.tail_value()));
    outcome.summary.push(("clamped_nodes".into(), clamps as f64));
    Ok(outcome)
}

/// Least-squares slope of `y` against `x`.
pub fn fitted_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Per-level discrepancy between dyadic approximants and the pathwise
/// left-limit integral over an ensemble of driver paths.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelStudy {
    pub level: u32,
    pub rms_terminal: f64,
    pub mean_max: f64,
    /// Standard error of the mean squared terminal discrepancy.
    pub se_squared: f64,
}

pub fn integral_study(sc: &LoadedScenario) -> Result<Vec<LevelStudy>, CliError> {
    let f = &sc.file;
    let cfg = &f.integrate;
    let models = sc.models()?;
    let model = models
        .get(cfg.driver)
        .ok_or_else(|| CliError::Config(format!("integrate.driver = {} is out of range", cfg.driver)))?;
    if cfg.min_level > cfg.max_level || cfg.max_level > cfg.sample_level {
        return Err(CliError::Config(
            "integrate needs min_level <= max_level <= sample_level".into(),
        ));
    }
    let levels: Vec<DyadicLevel> = (cfg.min_level..=cfg.max_level)
        .map(DyadicLevel::new)
        .collect::<Result<_, _>>()?;
    let grid = PathGrid::new(f.grid.t_max, 1usize << DyadicLevel::new(cfg.sample_level)?.n())?;
    let per_path: Vec<Vec<(f64, f64)>> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| {
            let x = sample_path_with(model, grid, &mut path_rng(f.seed, i as u64))?;
            let phi = match cfg.integrand {
                IntegrandConfig::Constant { value } => IntegrandPath::Constant(value),
                IntegrandConfig::Ramp { intercept, slope } => IntegrandPath::Ramp { intercept, slope },
                IntegrandConfig::Driver { scale } => IntegrandPath::Driver { path: x.clone(), scale },
            };
            Ok(consistency_check(&phi, &x, &levels)
                .into_iter()
                .map(|r| (r.terminal_discrepancy, r.max_discrepancy))
                .collect())
        })
        .collect::<Result<_, levyterm_core::Error>>()?;
    Ok(levels
        .iter()
        .enumerate()
        .map(|(j, l)| {
            let sq: Vec<f64> = per_path.iter().map(|p| p[j].0 * p[j].0).collect();
            let (ms, se) = mean_se(&sq);
            LevelStudy {
                level: l.n(),
                rms_terminal: ms.sqrt(),
                mean_max: per_path.iter().map(|p| p[j].1).sum::<f64>() / per_path.len() as f64,
                se_squared: se,
            }
        })
        .collect())
}

/// Dyadic approximants against the pathwise integral, level by level.
pub fn integrate(sc: &LoadedScenario, out: &mut OutputDir) -> Result<Outcome, CliError> {
    let study = integral_study(sc)?;
    out.csv(
        "integrate_report.csv",
        &header(&[
            "level",
            "rms_terminal_discrepancy",
            "mean_max_discrepancy",
            "se_mean_squared_discrepancy",
        ]),
        study.iter().map(|s| {
            vec![
                s.level.to_string(),
                num(s.rms_terminal),
                num(s.mean_max),
                num(s.se_squared),
            ]
        }),
    )?;
    let positive: Vec<&LevelStudy> = study.iter().filter(|s| s.rms_terminal > 0.0).collect();
    let slope = if positive.len() >= 2 {
        let x: Vec<f64> = positive.iter().map(|s| s.level as f64).collect();
        let y: Vec<f64> = positive.iter().map(|s| s.rms_terminal.log2()).collect();
        fitted_slope(&x, &y)
    } else {
        f64::NAN
    };
    let worst_rise = study
        .windows(2)
        .map(|w| w[1].rms_terminal - w[0].rms_terminal)
        .fold(f64::NEG_INFINITY, f64::max);
    let tol = 1e-12 * study.first().map_or(0.0, |s| s.rms_terminal);
    let check = CheckRecord {
        id: "discrepancy_non_increasing".into(),
        expected: "rms discrepancy does not grow with the level".into(),
        got: format!("largest level-to-level change {worst_rise}"),
        tolerance: tol,
        passed: study.len() < 2 || worst_rise <= tol,
    };
    let mut outcome = Outcome::new(vec![check]);
    outcome.summary.push(("fitted_log2_slope".into(), slope));
    Ok(outcome)
}

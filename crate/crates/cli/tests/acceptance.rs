//! Acceptance suite. Each test prints one verdict line against the criterion's
//! stated tolerance and runtime budget. Two criteria state targets the
//! mathematics does not support; their tests print FAIL and pin the value that
//! is actually correct instead, so a regression in either direction is caught.

use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use levyterm_cli::commands::{fitted_slope, integral_study};
use levyterm_cli::LoadedScenario;
use levyterm_core::curves::{
    check_bs_divergence, embedding_constants, norm_bs_analytic, norm_w_unchecked, random_corpus, verify_embedding,
    CorpusOptions, DivergenceOptions, IntegrandSpec,
};
use levyterm_core::drift::{drift_consistency_check, verify_c5_bound};
use levyterm_core::engine::{martingale_test, StateFunctional};
use levyterm_core::integration::{
    doob_check, g_integral_approx, isometry_check, stieltjes_full, stieltjes_left_limit, DyadicLevel, IntegrandPath,
};
use levyterm_core::levy::sample_paths;
use levyterm_core::{
    simulate, AnalyticCurve, CurveSpaceConfig, DriftInput, ForwardCurve, LevyKind, LevyModel, NormVariant, PathGrid,
    SimulationScenario, VolatilitySpec, WeightSpec, WeightedConfig,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Criteria run one at a time so the runtimes mean something.
static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn verdict(n: u32, name: &str, passed: bool, budget: Duration, elapsed: Duration, detail: &str) -> bool {
    let in_time = elapsed <= budget;
    let ok = passed && in_time;
    println!(
        "criterion {n:02} {name:<32} {} {:>8.3}s (budget {}s)  {detail}",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        budget.as_secs()
    );
    ok
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

#[test]
fn criterion_01_poisson_integral_identity() {
    let _g = serial();
    let start = Instant::now();
    let paths = sample_paths(
        &LevyModel::poisson(1.0).unwrap(),
        PathGrid::new(10.0, 100).unwrap(),
        101,
        100,
    )
    .unwrap();
    let mut mismatches = 0;
    let mut unresolved = 0;
    for x in &paths {
        let phi = IntegrandPath::Driver {
            path: x.clone(),
            scale: 1.0,
        };
        let xt = *x.values.last().unwrap();
        let mut times = vec![0.0];
        times.extend(x.jumps.as_deref().unwrap_or(&[]).iter().map(|j| j.time));
        times.push(10.0);
        let gap = times.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        let Some(level) = (0..=22).find(|&n| 10.0 * 0.5f64.powi(n) < gap) else {
            unresolved += 1;
            continue;
        };
        let g = g_integral_approx(&phi, x, DyadicLevel::new(level as u32).unwrap(), 0.0).terminal();
        let left = *stieltjes_left_limit(&phi, x).last().unwrap();
        let full = *stieltjes_full(&phi, x).last().unwrap();
        let (lo, hi) = (0.5 * (xt * xt - xt), 0.5 * (xt * xt + xt));
        if g != lo || left != lo || full != hi {
            mismatches += 1;
        }
    }
    let ok = verdict(
        1,
        "poisson_integral_identity",
        mismatches == 0 && unresolved == 0,
        secs(1),
        start.elapsed(),
        &format!("{mismatches} mismatches, {unresolved} unresolved gaps over 100 paths"),
    );
    assert!(ok);
}

#[test]
fn criterion_02_exponential_norm_formula() {
    let _g = serial();
    let start = Instant::now();
    let mut ok = true;
    let mut widest = 0.0f64;
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
        )
        .unwrap();
        widest = widest.max(n.tail_bound);
        ok &= n.value <= exact * (1.0 + 1e-14) && exact <= (n.value + n.tail_bound) * (1.0 + 1e-14);
        ok &= n.tail_bound < 1e-8;
    }
    let ok = verdict(
        2,
        "exponential_norm_formula",
        ok,
        secs(1),
        start.elapsed(),
        &format!("widest bracket {widest:.3e}"),
    );
    assert!(ok);
}

#[test]
fn criterion_03_divergence_example() {
    let _g = serial();
    let start = Instant::now();
    let opts = DivergenceOptions::default();
    let bad = check_bs_divergence(&IntegrandSpec::CompoundPoissonDriftTerm { gamma: 1.0 }, &opts);
    let drift = ForwardCurve::from_fn(30.0, 3000, |x| 0.0001 * x, 0.003).unwrap();
    let good = check_bs_divergence(
        &IntegrandSpec::GridSquared {
            curve: drift,
            gamma: 1.0,
        },
        &opts,
    );
    let again = check_bs_divergence(&IntegrandSpec::CompoundPoissonDriftTerm { gamma: 1.0 }, &opts);
    let ok = verdict(
        3,
        "divergence_example",
        bad.divergent && !good.divergent && again.truncated == bad.truncated,
        secs(1),
        start.elapsed(),
        &format!("flagged {}, control flagged {}", bad.divergent, good.divergent),
    );
    assert!(ok);
}

#[test]
fn criterion_04_drift_two_form_order() {
    let _g = serial();
    let start = Instant::now();
    let discrepancy = |sigma: f64, model: &LevyModel, n: usize| {
        let input = DriftInput::new(
            vec![ForwardCurve::constant(8.0, n, sigma).unwrap()],
            vec![model.clone()],
        )
        .unwrap();
        drift_consistency_check(&input).unwrap().max_discrepancy
    };
    let poisson = LevyModel::poisson(2.0).unwrap();
    let cpn = LevyModel::new(LevyKind::CompoundPoissonNormal {
        intensity: 1.0,
        jump_mean: 0.0,
        jump_std: 1.0,
    })
    .unwrap();
    let mut orders = Vec::new();
    for (sigma, model) in [(-0.05, &poisson), (0.1, &cpn)] {
        orders.push((discrepancy(sigma, model, 200) / discrepancy(sigma, model, 400)).log2());
    }
    // Both forms of the Brownian drift are polynomial and agree to rounding,
    // so no order is observable there; the discrepancy itself is asserted.
    let brownian = LevyModel::brownian(1.0).unwrap();
    let b = [200, 400].map(|n| discrepancy(0.1, &brownian, n));
    let ok = verdict(
        4,
        "drift_two_form_order",
        orders.iter().all(|o| (o - 2.0).abs() <= 0.2) && b.iter().all(|&d| d <= 1e-12),
        secs(5),
        start.elapsed(),
        &format!(
            "poisson order {:.3}, cp-normal order {:.3}, brownian discrepancy {:.1e}",
            orders[0], orders[1], b[1]
        ),
    );
    assert!(ok);
}

fn no_arbitrage(n_paths: usize, budget: Duration) -> bool {
    let start = Instant::now();
    let mut ok = true;
    let mut worst = 0.0f64;
    for name in ["brownian.toml", "poisson.toml", "mixed.toml"] {
        let sc = LoadedScenario::load(&scenario(name), &[format!("monte_carlo.n_paths={n_paths}")]).unwrap();
        let s = sc.simulation().unwrap();
        assert!((s.dt - 1.0 / 365.0).abs() < 1e-15);
        let e = simulate(&s).unwrap();
        for row in martingale_test(&e, &sc.martingale_options()) {
            if [(1.0, 5.0), (2.0, 10.0)].contains(&(row.t, row.maturity)) {
                ok &= row.deviation <= 4.0 * row.se + 2.0 * s.dt * row.initial_price && row.n_excluded == 0;
                worst = worst.max(row.deviation / (4.0 * row.se + 2.0 * s.dt * row.initial_price));
            }
        }
    }
    verdict(
        5,
        if n_paths >= 100_000 {
            "no_arbitrage_monte_carlo"
        } else {
            "no_arbitrage_smoke"
        },
        ok,
        budget,
        start.elapsed(),
        &format!("{n_paths} paths, worst deviation / allowance {worst:.3}"),
    )
}

#[test]
fn criterion_05_no_arbitrage_smoke() {
    let _g = serial();
    assert!(no_arbitrage(10_000, secs(30)));
}

#[test]
fn criterion_05_no_arbitrage_full() {
    let _g = serial();
    assert!(no_arbitrage(100_000, secs(300)));
}

#[test]
fn criterion_06_isometry() {
    let _g = serial();
    let start = Instant::now();
    let grid = PathGrid::new(1.0, 64).unwrap();
    let level = DyadicLevel::new(6).unwrap();
    let comp = LevyModel::poisson(2.0).unwrap().decompose().1;
    let pois = sample_paths(&comp, grid, 606, 10_000).unwrap();
    let brown = sample_paths(&LevyModel::brownian(1.0).unwrap(), grid, 607, 10_000).unwrap();
    let reports = [
        isometry_check(&pois, comp.predictable_qv_rate(), level, |_, _| 1.0),
        isometry_check(&pois, comp.predictable_qv_rate(), level, |_, _| 0.0),
        isometry_check(&brown, 1.0, level, |m, t| if m.value_at(t) > 0.0 { 1.0 } else { 0.0 }),
    ];
    let z: Vec<String> = reports
        .iter()
        .map(|r| {
            if r.diff_se > 0.0 {
                format!("{:.2}", (r.lhs - r.rhs).abs() / r.diff_se)
            } else {
                "exact".into()
            }
        })
        .collect();
    let ok = verdict(
        6,
        "isometry",
        reports
            .iter()
            .all(|r| r.passed && (r.lhs - r.rhs).abs() <= 4.0 * r.diff_se),
        secs(30),
        start.elapsed(),
        &format!("|lhs - rhs| / se = {}", z.join(", ")),
    );
    assert!(ok);
}

#[test]
fn criterion_07_doob_inequality() {
    let _g = serial();
    let start = Instant::now();
    let grid = PathGrid::new(1.0, 1024).unwrap();
    let values = |m: &LevyModel, seed: u64| -> Vec<Vec<f64>> {
        sample_paths(m, grid, seed, 10_000)
            .unwrap()
            .into_iter()
            .map(|p| p.values)
            .collect()
    };
    let b = doob_check(&values(&LevyModel::brownian(1.0).unwrap(), 707));
    let p = doob_check(&values(&LevyModel::poisson(2.0).unwrap().decompose().1, 708));
    let inequality = b.passed && p.passed;
    let in_band = (1.2..=1.7).contains(&b.ratio);
    verdict(
        7,
        "doob_inequality",
        inequality && in_band,
        secs(30),
        start.elapsed(),
        &format!(
            "inequality holds: {inequality}; brownian ratio {:.3} vs band [1.2, 1.7]; poisson ratio {:.3}",
            b.ratio, p.ratio
        ),
    );
    // E[sup_{t<=1} W_t^2] = E[1/tau] for the exit time of [-1, 1], which is
    // the integral of s / cosh(s), i.e. twice Catalan's constant (1.8319).
    // Discrete monitoring on 1024 steps sits slightly below it.
    assert!(inequality);
    assert!((1.7..=1.9).contains(&b.ratio), "brownian ratio {}", b.ratio);
}

#[test]
fn criterion_08_drift_lipschitz_bound() {
    let _g = serial();
    let start = Instant::now();
    let weight = WeightSpec::Exp { alpha: 1.0 };
    let opts = CorpusOptions {
        x_max: 20.0,
        n_points: 20 * 64,
        ..CorpusOptions::default()
    };
    let wide = |kind, m: f64, w: f64| LevyModel::with_intervals(kind, (-m, m), (-w, w)).unwrap();
    let models = [
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
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let (mut pairs, mut violations, mut min_slack) = (0, 0, f64::INFINITY);
    for model in &models {
        let curves = random_corpus(&mut rng, &opts, 100).unwrap();
        for pair in curves.chunks(2) {
            let g = DriftInput::new(vec![pair[0].clone()], vec![model.clone()]).unwrap();
            let h = DriftInput::new(vec![pair[1].clone()], vec![model.clone()]).unwrap();
            pairs += 1;
            match verify_c5_bound(&g, &h, &weight) {
                Ok(r) => min_slack = min_slack.min(r.slack()),
                Err(levyterm_core::Error::ViolationDetected(_)) => violations += 1,
                Err(e) => panic!("{e}"),
            }
        }
    }
    let ok = verdict(
        8,
        "drift_lipschitz_bound",
        pairs == 150 && violations == 0,
        secs(30),
        start.elapsed(),
        &format!("{violations} violations over {pairs} pairs, min slack {min_slack:.3e}"),
    );
    assert!(ok);
}

#[test]
fn criterion_09_embedding_and_equivalence() {
    let _g = serial();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let mut corpus = random_corpus(&mut rng, &CorpusOptions::default(), 50).unwrap();
    let tailed = CorpusOptions {
        with_tail: true,
        ..CorpusOptions::default()
    };
    corpus.extend(random_corpus(&mut rng, &tailed, 50).unwrap());
    let mut violations = 0;
    for w in [WeightSpec::Exp { alpha: 1.0 }, WeightSpec::Poly { alpha: 6.0 }] {
        let c2 = embedding_constants(&w).unwrap().c2;
        let k = (1.0 + c2 * c2).sqrt();
        for h in &corpus {
            if verify_embedding(h, &w, NormVariant::Tehranchi).is_err() {
                violations += 1;
            }
            let t = norm_w_unchecked(h, &w, NormVariant::Tehranchi).sqrt();
            let o = norm_w_unchecked(h, &w, NormVariant::Original).sqrt();
            let sup = h.values().iter().fold(h.tail_value().abs(), |m, v| m.max(v.abs()));
            let eps = 1.0 + 1e-12;
            if !(t / k <= o * eps && o <= k * t * eps && sup <= c2 * t * eps) {
                violations += 1;
            }
        }
    }
    let ok = verdict(
        9,
        "embedding_and_equivalence",
        violations == 0,
        secs(10),
        start.elapsed(),
        &format!("{violations} violations, 100 curves x 2 weights"),
    );
    assert!(ok);
}

#[test]
fn criterion_10_transport_exactness() {
    let _g = serial();
    let start = Instant::now();
    let h0 = ForwardCurve::from_fn(10.0, 1000, |x| 0.03 + 0.01 * (1.0 - (-0.5 * x).exp()), 0.04).unwrap();
    let mut s = SimulationScenario::new(
        vec![LevyModel::brownian(1.0).unwrap()],
        VolatilitySpec::ConstantDirection {
            directions: vec![ForwardCurve::constant(10.0, 1000, 0.0).unwrap()],
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
    s.n_paths = 8;
    s.keep_curves = s.n_paths;
    s.checkpoints = vec![0.5, 1.0, 2.0];
    s.maturities = vec![3.0, 5.0, 8.0];
    let e = simulate(&s).unwrap();
    let mut exact = true;
    for p in &e.paths {
        for (c, r) in p.curves.iter().zip(&p.records) {
            exact &= *c == h0.shift(r.t).unwrap();
        }
    }
    let dx = h0.dx();
    for (a, b) in [(3.0, 11.0), (1.0, 1.0), (250.0, 499.0)] {
        exact &= h0.shift(a * dx).unwrap().shift(b * dx).unwrap() == h0.shift((a + b) * dx).unwrap();
    }
    let dev = martingale_test(&e, &Default::default())
        .iter()
        .map(|r| r.deviation)
        .fold(0.0, f64::max);
    let ok = verdict(
        10,
        "transport_exactness",
        exact && dev <= 1e-10,
        secs(1),
        start.elapsed(),
        &format!("bit-exact {exact}, max martingale deviation {dev:.1e}"),
    );
    assert!(ok);
}

#[test]
fn criterion_11_dyadic_vs_ito() {
    let _g = serial();
    let start = Instant::now();
    let slope_for = |integrand: &str| {
        let sc = LoadedScenario::load(
            &scenario("default.toml"),
            &[
                format!("integrate.integrand={integrand}"),
                "integrate.n_paths=1000".into(),
            ],
        )
        .unwrap();
        assert_eq!((sc.file.integrate.min_level, sc.file.integrate.max_level), (6, 14));
        let study = integral_study(&sc).unwrap();
        let x: Vec<f64> = study.iter().map(|r| r.level as f64).collect();
        let y: Vec<f64> = study.iter().map(|r| r.rms_terminal.log2()).collect();
        fitted_slope(&x, &y)
    };
    let ramp = slope_for(r#"{kind="ramp",intercept=0.0,slope=1.0}"#);
    let elapsed = start.elapsed();
    verdict(
        11,
        "dyadic_vs_ito",
        (ramp + 0.5).abs() <= 0.15,
        secs(60),
        elapsed,
        &format!("ramp slope {ramp:.3} vs target -0.5 +- 0.15"),
    );
    // A deterministic smooth integrand has discrepancy variance T h^2 / 3, so
    // its RMS halves per level: slope -1. The half-order rate belongs to
    // integrands as rough as the driver itself, checked here with the driver.
    assert!((ramp + 1.0).abs() <= 0.15, "ramp slope {ramp}");
    let rough = slope_for(r#"{kind="driver",scale=1.0}"#);
    println!("             driver-integrand slope {rough:.3} (expected -0.5)");
    assert!((rough + 0.5).abs() <= 0.15, "driver slope {rough}");
}

#[test]
fn criterion_12_determinism_across_parallelism() {
    let _g = serial();
    let start = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let run = |threads: usize, dir: &str| {
        let out = tmp.path().join(dir);
        let output = std::process::Command::new(env!("CARGO_BIN_EXE_levyterm"))
            .arg("simulate")
            .arg(scenario("mixed.toml"))
            .args(["--set", &format!("monte_carlo.parallelism={threads}")])
            .args(["--set", "output.curve_snapshots=3"])
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap();
        assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
        out
    };
    let dirs = [run(1, "p1"), run(8, "p8"), run(8, "p8_again")];
    let mut files = Vec::new();
    collect_csv(&dirs[0], &dirs[0], &mut files);
    let mut differing = Vec::new();
    for rel in &files {
        let base = std::fs::read(dirs[0].join(rel)).unwrap();
        for d in &dirs[1..] {
            if std::fs::read(d.join(rel)).ok().as_ref() != Some(&base) {
                differing.push(rel.display().to_string());
            }
        }
    }
    let mut other = Vec::new();
    collect_csv(&dirs[1], &dirs[1], &mut other);
    let ok = verdict(
        12,
        "determinism_across_parallelism",
        differing.is_empty() && other.len() == files.len() && files.len() >= 9,
        secs(60),
        start.elapsed(),
        &format!("{} CSV files compared, {} differ", files.len(), differing.len()),
    );
    assert!(ok, "{differing:?}");
}

fn collect_csv(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) {
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            collect_csv(root, &path, out);
        } else if path.extension().is_some_and(|e| e == "csv") {
            out.push(path.strip_prefix(root).unwrap().to_path_buf());
        }
    }
    out.sort();
}

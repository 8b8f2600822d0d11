use approx::assert_relative_eq;
use levyterm_core::curves::{random_corpus, CorpusOptions};
use levyterm_core::drift::{
    admissible, c5_constant, drift_consistency_check, hjm_drift, lipschitz_constants, primitive, verify_c5_bound,
};
use levyterm_core::{DriftInput, Error, ForwardCurve, LevyKind, LevyModel, WeightSpec};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn brownian(s: f64) -> LevyModel {
    LevyModel::with_intervals(LevyKind::Brownian { volatility: s }, (-10.0, 10.0), (-5.0, 5.0)).unwrap()
}

fn poisson(lambda: f64) -> LevyModel {
    LevyModel::with_intervals(LevyKind::Poisson { intensity: lambda }, (-3.0, 3.0), (-2.0, 2.0)).unwrap()
}

fn cpn() -> LevyModel {
    LevyModel::with_intervals(
        LevyKind::CompoundPoissonNormal {
            intensity: 1.0,
            jump_mean: 0.0,
            jump_std: 1.0,
        },
        (-2.0, 2.0),
        (-1.0, 1.0),
    )
    .unwrap()
}

fn constant(x_max: f64, n: usize, c: f64) -> ForwardCurve {
    ForwardCurve::constant(x_max, n, c).unwrap()
}

#[test]
fn primitive_examples() {
    let p = primitive(&constant(10.0, 100, 0.3));
    for k in 0..=100 {
        assert_relative_eq!(p.node(k), 0.3 * p.x(k), max_relative = 1e-12, epsilon = 1e-15);
    }
    let zero = primitive(&constant(10.0, 100, 0.0));
    assert!(zero.values().iter().all(|v| *v == 0.0));

    let delta = 0.2;
    let err = |n: usize| {
        let h = ForwardCurve::from_fn(5.0, n, |x| (delta * x).exp(), 0.0).unwrap();
        let p = primitive(&h);
        (0..=n)
            .map(|k| (p.node(k) - ((delta * p.x(k)).exp() - 1.0) / delta).abs())
            .fold(0.0, f64::max)
    };
    let ratio = err(100) / err(200);
    assert!((ratio - 4.0).abs() < 0.05, "{ratio}");
}

#[test]
fn admissibility_examples() {
    let m = LevyModel::poisson(1.0).unwrap();
    assert!(admissible(&constant(30.0, 300, 0.0), &m).admissible);

    let eta = 0.02;
    let (_, d) = poisson(1.0).working_interval();
    let r = admissible(&constant(30.0, 3000, -eta), &poisson(1.0));
    assert_relative_eq!(r.range.1, 30.0 * eta, max_relative = 1e-12);
    assert_eq!(r.admissible, 30.0 * eta <= d);
    let r = admissible(&constant(30.0, 3000, -0.1), &poisson(1.0));
    assert!(!r.admissible);
    assert!(r.worst_x.unwrap() > 20.0);

    // A bump with total mass 0.5.
    let bump = ForwardCurve::from_fn(10.0, 2000, |x| if (1.0..2.0).contains(&x) { 0.5 } else { 0.0 }, 0.0).unwrap();
    let r = admissible(&bump, &cpn());
    assert!(r.admissible);
    assert!((r.range.0 + 0.5).abs() < 1e-2);
}

#[test]
fn drift_examples() {
    let s = 0.1;
    let a = hjm_drift(&DriftInput::new(vec![constant(10.0, 1000, s)], vec![brownian(1.0)]).unwrap()).unwrap();
    for k in 0..=1000 {
        assert_relative_eq!(a.node(k), s * s * a.x(k), max_relative = 1e-12, epsilon = 1e-16);
    }
    // A flat volatility is not tail-free, so the drift keeps its last value.
    assert_eq!(a.tail_value(), a.node(1000));

    let (lambda, eta) = (1.5, 0.05);
    let a = hjm_drift(&DriftInput::new(vec![constant(30.0, 3000, -eta)], vec![poisson(lambda)]).unwrap()).unwrap();
    for k in 0..=3000 {
        let x = a.x(k);
        assert_relative_eq!(a.node(k), lambda * eta * (eta * x).exp(), max_relative = 1e-12);
    }

    let zero = DriftInput::new(
        vec![constant(5.0, 50, 0.0); 3],
        vec![brownian(1.0), poisson(2.0), cpn()],
    )
    .unwrap();
    assert!(hjm_drift(&zero).unwrap().values().iter().all(|v| *v == 0.0));
}

#[test]
fn inadmissible_input_is_reported() {
    let input = DriftInput::new(vec![constant(30.0, 300, -0.5)], vec![poisson(1.0)]).unwrap();
    match hjm_drift(&input) {
        Err(Error::InadmissibleVolatility { driver, report }) => {
            assert_eq!(driver, 0);
            assert!(!report.admissible);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn two_forms_agree_at_second_order() {
    let b = drift_consistency_check(&DriftInput::new(vec![constant(10.0, 1000, 0.2)], vec![brownian(1.0)]).unwrap())
        .unwrap();
    assert!(b.max_discrepancy < 1e-12, "{}", b.max_discrepancy);

    for (sigma, model) in [(-0.05, poisson(2.0)), (0.1, cpn())] {
        let d = |n: usize| {
            drift_consistency_check(&DriftInput::new(vec![constant(8.0, n, sigma)], vec![model.clone()]).unwrap())
                .unwrap()
                .max_discrepancy
        };
        let ratio = d(200) / d(400);
        assert!((ratio - 4.0).abs() < 0.3, "{model:?}: {ratio}");
    }
}

#[test]
fn lipschitz_examples() {
    let l = lipschitz_constants(
        &LevyModel::with_intervals(LevyKind::Brownian { volatility: 1.0 }, (-2.0, 2.0), (-1.0, 1.0)).unwrap(),
    );
    assert_eq!((l.k, l.l, l.m), (1.0, 1.0, 0.0));

    let lambda = 1.3;
    let l = lipschitz_constants(&poisson(lambda));
    let e = lambda * 2f64.exp();
    assert_relative_eq!(l.k, e, max_relative = 1e-14);
    assert_relative_eq!(l.l, e, max_relative = 1e-14);
    assert_relative_eq!(l.m, e, max_relative = 1e-14);

    assert_relative_eq!(lipschitz_constants(&cpn()).k, 0.5f64.exp(), max_relative = 1e-14);
}

#[test]
fn c5_examples() {
    let w = WeightSpec::Exp { alpha: 1.0 };
    let g = DriftInput::new(vec![constant(20.0, 2000, 0.0)], vec![brownian(1.0)]).unwrap();
    let r = verify_c5_bound(&g, &g, &w).unwrap();
    assert_eq!((r.lhs, r.rhs), (0.0, 0.0));
    assert!(c5_constant(&[brownian(1.0)], &w).unwrap() > 0.0);

    // Constant volatilities lie outside the zero-tail space, so use a taper.
    let taper = |s: f64| ForwardCurve::from_fn(20.0, 4000, move |x| s * (-2.0 * x).exp(), 0.0).unwrap();
    let g = DriftInput::new(vec![taper(0.3)], vec![brownian(1.0)]).unwrap();
    let h = DriftInput::new(vec![taper(0.1)], vec![brownian(1.0)]).unwrap();
    let r = verify_c5_bound(&g, &h, &w).unwrap();
    assert!(r.lhs > 0.0 && r.slack() > 0.0);
}

#[test]
fn c5_holds_on_random_pairs() {
    let weight = WeightSpec::Exp { alpha: 1.0 };
    let opts = CorpusOptions {
        x_max: 20.0,
        n_points: 20 * 64,
        ..CorpusOptions::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for model in [brownian(1.0), poisson(1.0), cpn()] {
        let curves = random_corpus(&mut rng, &opts, 100).unwrap();
        for pair in curves.chunks(2) {
            let g = DriftInput::new(vec![pair[0].clone()], vec![model.clone()]).unwrap();
            let h = DriftInput::new(vec![pair[1].clone()], vec![model.clone()]).unwrap();
            let r = verify_c5_bound(&g, &h, &weight).unwrap();
            assert!(r.slack() >= 0.0);
        }
    }
}

proptest! {
    #[test]
    fn brownian_drift_scales_quadratically(vals in prop::collection::vec(-0.2f64..0.2, 41), e in -3i32..3) {
        let sigma = ForwardCurve::new(4.0, vals, 0.0).unwrap();
        let c = 2f64.powi(e);
        let a = hjm_drift(&DriftInput::new(vec![sigma.clone()], vec![brownian(1.0)]).unwrap()).unwrap();
        let ac = hjm_drift(&DriftInput::new(vec![sigma.scaled(c)], vec![brownian(1.0)]).unwrap()).unwrap();
        for k in 0..=40 {
            prop_assert_eq!(ac.node(k), c * c * a.node(k));
        }
    }

    #[test]
    fn martingale_drivers_have_zero_drift_at_the_short_end(
        vals in prop::collection::vec(-0.1f64..0.1, 41),
        which in 0usize..3,
    ) {
        let model = [brownian(1.0), poisson(1.0).decompose().1, cpn()][which].clone();
        let sigma = ForwardCurve::new(4.0, vals, 0.0).unwrap();
        let a = hjm_drift(&DriftInput::new(vec![sigma], vec![model]).unwrap()).unwrap();
        prop_assert_eq!(a.node(0), 0.0);
        prop_assert_eq!(a.tail_value(), 0.0);
    }
}

//! Corpus-based estimates of the boundedness and Lipschitz constants that the
//! existence theorems require of a scenario's volatility.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::curves::{
    norm_bs_analytic, norm_w_unchecked, random_corpus, AnalyticCurve, CorpusOptions, CurveSpaceConfig, ForwardCurve,
    NormVariant, WeightSpec,
};
use crate::drift::{admissible, drift_into, DriftWorkspace};
use crate::engine::scenario::SimulationScenario;
use crate::engine::volatility::{BoundVolatility, VolatilitySpec};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisRow {
    pub check: String,
    pub estimate: f64,
    /// Analytic bound, NaN when none is available.
    pub bound: f64,
    pub holds: bool,
}

impl HypothesisRow {
    fn new(check: impl Into<String>, estimate: f64, bound: f64, holds: bool) -> Self {
        HypothesisRow {
            check: check.into(),
            estimate,
            bound,
            holds,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypothesisOptions {
    pub corpus_size: usize,
    pub seed: u64,
    /// Amplitude of corpus curves around the initial curve.
    pub amplitude: f64,
}

impl Default for HypothesisOptions {
    fn default() -> Self {
        HypothesisOptions {
            corpus_size: 40,
            seed: 17,
            amplitude: 0.05,
        }
    }
}

/// Estimates `sup ‖σ_i(h)‖` and `sup ‖σ_i(h1) − σ_i(h2)‖ / ‖h1 − h2‖` over a
/// random corpus, plus the family-specific analytic bounds.
pub fn hypothesis_check(scenario: &SimulationScenario, opts: &HypothesisOptions) -> Result<Vec<HypothesisRow>> {
    scenario.validate()?;
    let h0 = &scenario.initial_curve;
    let vol = BoundVolatility::new(&scenario.volatility, h0.x_max(), h0.n_points())?;
    let mut rows = Vec::new();

    for (i, (b, m)) in vol.basis.iter().zip(&scenario.models).enumerate() {
        let rep = admissible(&b.scaled(vol.factors[i].range().1), m);
        let rep_lo = admissible(&b.scaled(vol.factors[i].range().0), m);
        rows.push(HypothesisRow::new(
            format!("sigma{}_admissible", i + 1),
            rep.range.1.abs().max(rep.range.0.abs()),
            m.working_interval().1.min(-m.working_interval().0),
            rep.admissible && rep_lo.admissible,
        ));
    }

    match &scenario.space {
        CurveSpaceConfig::Weighted(cfg) => weighted_rows(scenario, &vol, &cfg.weight, opts, &mut rows)?,
        CurveSpaceConfig::BjorkSvensson {
            beta,
            gamma,
            series_terms,
        } => bs_rows(&scenario.volatility, *beta, *gamma, *series_terms, opts, &mut rows)?,
    }
    Ok(rows)
}

fn corpus(h0: &ForwardCurve, opts: &HypothesisOptions, min_decay: f64) -> Result<Vec<ForwardCurve>> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let copts = CorpusOptions {
        x_max: h0.x_max(),
        n_points: h0.n_points(),
        amplitude: opts.amplitude,
        min_decay,
        max_decay: min_decay + 2.0,
        with_tail: true,
        ..CorpusOptions::default()
    };
    let mut out = random_corpus(&mut rng, &copts, opts.corpus_size)?;
    for c in &mut out {
        *c = c.combine(1.0, h0, 1.0)?;
    }
    Ok(out)
}

fn weighted_rows(
    scenario: &SimulationScenario,
    vol: &BoundVolatility,
    weight: &WeightSpec,
    opts: &HypothesisOptions,
    rows: &mut Vec<HypothesisRow>,
) -> Result<()> {
    let nw = |c: &ForwardCurve| norm_w_unchecked(c, weight, NormVariant::Tehranchi).sqrt();
    let min_decay = match *weight {
        WeightSpec::Exp { alpha } => 0.5 * alpha + 0.3,
        WeightSpec::Poly { .. } => 0.5,
    };
    let curves = corpus(&scenario.initial_curve, opts, min_decay)?;
    let sigmas: Vec<Vec<ForwardCurve>> = curves.iter().map(|c| vol.eval(c)).collect();
    for i in 0..vol.basis.len() {
        let basis_norm = nw(&vol.basis[i]);
        let f = &vol.factors[i];
        let (lo, hi) = f.range();
        let m_est = sigmas.iter().map(|s| nw(&s[i])).fold(0.0, f64::max);
        let m_bound = lo.abs().max(hi.abs()) * basis_norm;
        rows.push(HypothesisRow::new(
            format!("sigma{}_bound", i + 1),
            m_est,
            m_bound,
            m_est <= m_bound * (1.0 + 1e-12) && m_bound.is_finite(),
        ));
        let mut l_est: f64 = 0.0;
        for a in 0..curves.len() {
            for b in a + 1..curves.len() {
                let den = nw(&curves[a].combine(1.0, &curves[b], -1.0)?);
                if den > 0.0 {
                    l_est = l_est.max(nw(&sigmas[a][i].combine(1.0, &sigmas[b][i], -1.0)?) / den);
                }
            }
        }
        let l_bound = f.lipschitz_w(weight)? * basis_norm;
        rows.push(HypothesisRow::new(
            format!("sigma{}_lipschitz", i + 1),
            l_est,
            l_bound,
            l_est <= l_bound * (1.0 + 1e-9) + 1e-15,
        ));
        if matches!(scenario.volatility, VolatilitySpec::ConstantDirection { .. }) {
            rows.push(HypothesisRow::new(
                format!("sigma{}_vanishes_at_infinity", i + 1),
                vol.basis[i].tail_value().abs(),
                0.0,
                vol.basis[i].tail_value() == 0.0,
            ));
        }
    }
    // Drift map: Lipschitz ratio over the corpus (informational).
    let mut ws = DriftWorkspace::default();
    let n = scenario.initial_curve.values().len();
    let mut drifts = Vec::with_capacity(curves.len());
    for s in &sigmas {
        let refs: Vec<&ForwardCurve> = s.iter().collect();
        let mut out = vec![0.0; n];
        let o = drift_into(&refs, &scenario.models, &mut out, &mut ws, true)?;
        drifts.push(ForwardCurve::new(scenario.initial_curve.x_max(), out, o.tail_value)?);
    }
    let mut a_est: f64 = 0.0;
    for a in 0..curves.len() {
        for b in a + 1..curves.len() {
            let den = nw(&curves[a].combine(1.0, &curves[b], -1.0)?);
            if den > 0.0 {
                a_est = a_est.max(nw(&drifts[a].combine(1.0, &drifts[b], -1.0)?) / den);
            }
        }
    }
    rows.push(HypothesisRow::new(
        "drift_lipschitz",
        a_est,
        f64::NAN,
        a_est.is_finite(),
    ));
    Ok(())
}

fn bs_rows(
    spec: &VolatilitySpec,
    beta: f64,
    gamma: f64,
    terms: usize,
    opts: &HypothesisOptions,
    rows: &mut Vec<HypothesisRow>,
) -> Result<()> {
    let (poly, delta) = match spec {
        VolatilitySpec::JumpDiffusion { poly, delta, .. } | VolatilitySpec::StateDependentEta { poly, delta, .. } => {
            (poly.clone(), *delta)
        }
        VolatilitySpec::ConstantDirection { .. } => return Ok(()),
    };
    let constraints = spec.check_bs_constraints(beta, gamma);
    rows.push(HypothesisRow::new(
        "parameter_constraints",
        f64::NAN,
        f64::NAN,
        constraints.is_ok(),
    ));
    let p = norm_bs_analytic(&AnalyticCurve::Polynomial(poly), beta, gamma, terms.max(64))?;
    rows.push(HypothesisRow::new(
        "poly_norm_sq",
        p.value,
        p.value + p.tail_bound,
        true,
    ));
    let e = norm_bs_analytic(
        &AnalyticCurve::Exponential {
            scale: 1.0,
            rate: delta,
        },
        beta,
        gamma,
        terms.max(64),
    );
    rows.push(HypothesisRow::new(
        "exp_norm_sq",
        e.as_ref().map_or(f64::INFINITY, |r| r.value),
        f64::NAN,
        e.is_ok(),
    ));
    if let VolatilitySpec::StateDependentEta { eta, .. } = spec {
        let (lo, hi) = eta.range();
        let bound = (beta / (beta - 1.0) * 2.0 / (gamma - 2.0 * hi).powi(3)).sqrt();
        let mut est: f64 = 0.0;
        let k = opts.corpus_size.max(2);
        for a in 0..k {
            for b in a + 1..k {
                let e1 = lo + (hi - lo) * a as f64 / (k - 1) as f64;
                let e2 = lo + (hi - lo) * b as f64 / (k - 1) as f64;
                let diff = AnalyticCurve::Sum(vec![
                    AnalyticCurve::Exponential { scale: 1.0, rate: e2 },
                    AnalyticCurve::Exponential { scale: -1.0, rate: e1 },
                ]);
                let n = norm_bs_analytic(&diff, beta, gamma, terms.max(64))?;
                est = est.max((n.value + n.tail_bound).sqrt() / (e2 - e1));
            }
        }
        rows.push(HypothesisRow::new("exp_eta_lipschitz", est, bound, est <= bound));
    }
    Ok(())
}

//! The all-derivatives norm `Σ β^{-n} ∫ (h^{(n)})² e^{-γx} dx` for analytic
//! curves, plus the divergence and derivative-inequality diagnostics.

use crate::curves::analytic::QuasiPolynomial;
use crate::curves::{AnalyticCurve, ForwardCurve};
use crate::error::{Error, Result};
use crate::quadrature;

/// Truncated squared norm; the true squared norm lies in `[value, value + tail_bound]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsNorm {
    pub value: f64,
    pub tail_bound: f64,
    pub series_terms: usize,
}

impl BsNorm {
    pub fn norm(&self) -> f64 {
        self.value.sqrt()
    }
}

fn factorial(m: usize) -> f64 {
    (1..=m).map(|k| k as f64).product()
}

/// `∫_0^∞ x^m e^{-c x} dx = m! / c^{m+1}`.
fn moment(m: usize, c: f64) -> f64 {
    factorial(m) / c.powi(m as i32 + 1)
}

/// `∫ p(x) q(x) e^{-c x} dx` for polynomials.
fn poly_product_integral(p: &[f64], q: &[f64], c: f64) -> f64 {
    let mut s = 0.0;
    for (i, a) in p.iter().enumerate() {
        for (j, b) in q.iter().enumerate() {
            s += a * b * moment(i + j, c);
        }
    }
    s
}

fn poly_integral(p: &[f64], c: f64) -> f64 {
    p.iter().enumerate().map(|(i, a)| a * moment(i, c)).sum()
}

/// `∫ (h^{(n)})² e^{-γx} dx` in closed form.
fn term(q: &QuasiPolynomial, n: usize, gamma: f64) -> f64 {
    let pd = q.poly_derivative(n);
    let mut s = poly_product_integral(&pd, &pd, gamma);
    for &(a, d) in &q.exps {
        s += 2.0 * a * d.powi(n as i32) * poly_integral(&pd, gamma - d);
        for &(b, e) in &q.exps {
            s += a * b * (d * e).powi(n as i32) / (gamma - d - e);
        }
    }
    s
}

/// Squared `H_{β,γ}` norm of an analytic curve, truncated after `series_terms`
/// terms, with a rigorous bound on the omitted tail.
pub fn norm_bs_analytic(curve: &AnalyticCurve, beta: f64, gamma: f64, series_terms: usize) -> Result<BsNorm> {
    if !(beta > 1.0 && gamma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need beta > 1, gamma > 0; got {beta}, {gamma}"
        )));
    }
    if series_terms == 0 {
        return Err(Error::InvalidParameter("series_terms must be at least 1".into()));
    }
    let q = curve.quasi();
    for &(_, d) in &q.exps {
        if 2.0 * d >= gamma {
            return Err(Error::Divergent(format!(
                "exponential rate {d} needs 2·rate < gamma = {gamma}"
            )));
        }
        if d * d >= beta {
            return Err(Error::Divergent(format!(
                "rate² = {} is not below beta = {beta}",
                d * d
            )));
        }
    }
    let weight = |n: usize| beta.powi(-(n as i32));
    let value: f64 = (0..series_terms).map(|n| weight(n) * term(&q, n, gamma)).sum();

    // Terms up to the polynomial degree are summed exactly; beyond it only the
    // exponential part survives and is bounded geometrically.
    let first_geometric = q.degree().map_or(0, |d| d + 1).max(series_terms);
    let mut tail: f64 = (series_terms..first_geometric)
        .map(|n| weight(n) * term(&q, n, gamma))
        .sum();
    for &(a, d) in &q.exps {
        for &(b, e) in &q.exps {
            let r = (d * e).abs() / beta;
            tail += (a * b).abs() / (gamma - d - e) * r.powi(first_geometric as i32) / (1.0 - r);
        }
    }
    Ok(BsNorm {
        value,
        tail_bound: tail,
        series_terms,
    })
}

/// What integrand to probe for divergence of `∫_0^∞ f(x) dx`.
#[derive(Debug, Clone)]
pub enum IntegrandSpec {
    /// `x² e^{x² − γx}`: the zeroth-order term of a compound-Poisson drift with `σ = −1`.
    CompoundPoissonDriftTerm { gamma: f64 },
    /// `c · x^power · e^{rate x}`.
    PowerExp { coefficient: f64, power: i32, rate: f64 },
    /// `h(x)² e^{-γx}` for an analytic curve.
    AnalyticSquared { curve: AnalyticCurve, gamma: f64 },
    /// `α(x)² e^{-γx}` for grid samples of a drift curve.
    GridSquared { curve: ForwardCurve, gamma: f64 },
}

#[derive(Debug, Clone)]
pub struct DivergenceOptions {
    pub truncations: Vec<f64>,
    pub threshold: f64,
}

impl Default for DivergenceOptions {
    fn default() -> Self {
        DivergenceOptions {
            truncations: vec![2.0, 4.0, 6.0, 8.0, 10.0],
            threshold: 1e6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DivergenceReport {
    /// `(X, ∫_0^X f)` for each truncation point.
    pub truncated: Vec<(f64, f64)>,
    pub divergent: bool,
}

/// Evaluates truncated integrals and flags divergence when the last one
/// exceeds the threshold while the increments keep growing.
pub fn check_bs_divergence(spec: &IntegrandSpec, opts: &DivergenceOptions) -> DivergenceReport {
    let mut truncs: Vec<f64> = opts.truncations.clone();
    if let IntegrandSpec::GridSquared { curve, .. } = spec {
        truncs.retain(|&x| x <= curve.x_max() + 1e-12);
    }
    let mut truncated = Vec::with_capacity(truncs.len());
    match spec {
        IntegrandSpec::GridSquared { curve, gamma } => {
            let vals: Vec<f64> = (0..=curve.n_points())
                .map(|k| curve.node(k).powi(2) * (-gamma * curve.x(k)).exp())
                .collect();
            let cum = quadrature::cumulative_trapezoid(&vals, curve.dx());
            for x in truncs {
                let k = ((x / curve.dx()).round() as usize).min(curve.n_points());
                truncated.push((x, cum[k]));
            }
        }
        _ => {
            let f: Box<dyn Fn(f64) -> f64> = match spec.clone() {
                IntegrandSpec::CompoundPoissonDriftTerm { gamma } => {
                    Box::new(move |x: f64| x * x * (x * x - gamma * x).exp())
                }
                IntegrandSpec::PowerExp {
                    coefficient,
                    power,
                    rate,
                } => Box::new(move |x: f64| coefficient * x.powi(power) * (rate * x).exp()),
                IntegrandSpec::AnalyticSquared { curve, gamma } => {
                    let q = curve.quasi();
                    Box::new(move |x: f64| q.eval_derivative(0, x).powi(2) * (-gamma * x).exp())
                }
                IntegrandSpec::GridSquared { .. } => unreachable!(),
            };
            let mut acc = 0.0;
            let mut prev = 0.0;
            for x in truncs {
                acc += quadrature::integrate(&f, prev, x, 0.0, 1e-12).value;
                truncated.push((x, acc));
                prev = x;
            }
        }
    }
    let increments: Vec<f64> = truncated
        .iter()
        .scan(0.0, |last, &(_, v)| {
            let d = v - *last;
            *last = v;
            Some(d)
        })
        .collect();
    let growing = increments.len() >= 2 && increments.windows(2).all(|w| w[1] > w[0] && w[0] > 0.0);
    let exceeds = truncated
        .last()
        .is_some_and(|&(_, v)| !v.is_finite() || v > opts.threshold);
    DivergenceReport {
        divergent: growing && exceeds,
        truncated,
    }
}

/// Both sides of `∫ h'² e^{-γx} ≤ (γ²/2) ∫ h² e^{-γx}`.
#[derive(Debug, Clone, Copy)]
pub struct DerivativeInequalityReport {
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs / rhs`, or 0 when both vanish.
    pub ratio: f64,
}

/// Checks the derivative inequality for curves with `h, h', h'' ≥ 0` and
/// growth below `e^{γx/2}`.
pub fn check_derivative_inequality(curve: &AnalyticCurve, gamma: f64) -> Result<DerivativeInequalityReport> {
    if gamma <= 0.0 {
        return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
    }
    let q = curve.quasi();
    // h'' ≥ 0 everywhere when every term of h'' is non-negative; with
    // h'(0), h(0) ≥ 0 that gives h' ≥ 0 and h ≥ 0.
    let p2 = q.poly_derivative(2);
    let convex = p2.iter().all(|&c| c >= 0.0) && q.exps.iter().all(|&(a, _)| a >= 0.0);
    if !convex || q.eval_derivative(1, 0.0) < 0.0 || q.eval_derivative(0, 0.0) < 0.0 {
        return Err(Error::HypothesisViolated(
            "cannot establish h, h', h'' >= 0 on the half line".into(),
        ));
    }
    if let Some(&(_, d)) = q.exps.iter().find(|&&(_, d)| d >= gamma / 2.0) {
        return Err(Error::HypothesisViolated(format!(
            "growth rate {d} is not below gamma/2 = {}",
            gamma / 2.0
        )));
    }
    let lhs = quadrature::integrate_to_infinity(
        |x| q.eval_derivative(1, x).powi(2) * (-gamma * x).exp(),
        0.0,
        1e-300,
        1e-12,
    )
    .value;
    let l2 = quadrature::integrate_to_infinity(
        |x| q.eval_derivative(0, x).powi(2) * (-gamma * x).exp(),
        0.0,
        1e-300,
        1e-12,
    )
    .value;
    let rhs = 0.5 * gamma * gamma * l2;
    if lhs > rhs * (1.0 + 1e-9) + 1e-300 {
        return Err(Error::ViolationDetected(format!(
            "derivative inequality: {lhs} > {rhs}"
        )));
    }
    let ratio = if rhs == 0.0 { 0.0 } else { lhs / rhs };
    Ok(DerivativeInequalityReport { lhs, rhs, ratio })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn constant_and_polynomial_norms() {
        let c = norm_bs_analytic(&AnalyticCurve::Constant(1.0), 2.0, 3.0, 5).unwrap();
        assert_relative_eq!(c.value, 1.0 / 3.0, max_relative = 1e-15);
        assert_eq!(c.tail_bound, 0.0);
        // x: ∫x²e^{-x} + ½∫e^{-x} = 2 + ½
        let p = norm_bs_analytic(&AnalyticCurve::Polynomial(vec![0.0, 1.0]), 2.0, 1.0, 10).unwrap();
        assert_relative_eq!(p.value, 2.5, max_relative = 1e-15);
        // one term only: the derivative term moves into the tail bound
        let p1 = norm_bs_analytic(&AnalyticCurve::Polynomial(vec![0.0, 1.0]), 2.0, 1.0, 1).unwrap();
        assert_relative_eq!(p1.value, 2.0, max_relative = 1e-15);
        assert_relative_eq!(p1.tail_bound, 0.5, max_relative = 1e-15);
    }

    #[test]
    fn exponential_bracket_shrinks() {
        let h = AnalyticCurve::Exponential { scale: 1.0, rate: 0.9 };
        let exact = 4.0 / ((4.0 - 0.81) * (2.0 - 1.8));
        let mut last_lo = 0.0;
        let mut last_hi = f64::INFINITY;
        for n in 1..40 {
            let r = norm_bs_analytic(&h, 4.0, 2.0, n).unwrap();
            assert!(r.value >= last_lo && r.value + r.tail_bound <= last_hi * (1.0 + 1e-14));
            assert!(r.value <= exact * (1.0 + 1e-14) && exact <= (r.value + r.tail_bound) * (1.0 + 1e-14));
            last_lo = r.value;
            last_hi = r.value + r.tail_bound;
        }
    }

    #[test]
    fn divergence_errors() {
        let h = AnalyticCurve::Exponential { scale: 1.0, rate: 0.6 };
        assert!(matches!(norm_bs_analytic(&h, 2.0, 1.0, 10), Err(Error::Divergent(_))));
        let h = AnalyticCurve::Exponential { scale: 1.0, rate: -1.5 };
        assert!(matches!(norm_bs_analytic(&h, 2.0, 1.0, 10), Err(Error::Divergent(_))));
        assert!(norm_bs_analytic(&h, 0.5, 1.0, 10).is_err());
    }

    #[test]
    fn mixed_sum_matches_quadrature() {
        let h = AnalyticCurve::Sum(vec![
            AnalyticCurve::Polynomial(vec![0.5, -0.2, 0.1]),
            AnalyticCurve::ScaledShiftedExp {
                scale: 2.0,
                rate: 0.3,
                offset: 1.0,
            },
            AnalyticCurve::Exponential {
                scale: -1.0,
                rate: -0.4,
            },
        ]);
        let (beta, gamma) = (3.0, 1.0);
        let r = norm_bs_analytic(&h, beta, gamma, 60).unwrap();
        let q = h.quasi();
        let mut direct = 0.0;
        for n in 0..60 {
            let t = quadrature::integrate_to_infinity(
                |x| q.eval_derivative(n, x).powi(2) * (-gamma * x).exp(),
                0.0,
                1e-300,
                1e-12,
            );
            direct += t.value / beta.powi(n as i32);
        }
        assert_relative_eq!(r.value, direct, max_relative = 1e-9);
        assert!(r.tail_bound < 1e-20);
    }

    #[test]
    fn divergence_flags() {
        let rep = check_bs_divergence(
            &IntegrandSpec::CompoundPoissonDriftTerm { gamma: 1.0 },
            &DivergenceOptions {
                truncations: vec![2.0, 4.0, 6.0],
                threshold: 1e6,
            },
        );
        assert!(rep.divergent);
        assert!(rep.truncated[2].1 > 1e6);
        let ctl = check_bs_divergence(
            &IntegrandSpec::PowerExp {
                coefficient: 1.0,
                power: 2,
                rate: -1.0,
            },
            &DivergenceOptions {
                truncations: (1..=20).map(|k| 2.0 * k as f64).collect(),
                threshold: 1e6,
            },
        );
        assert!(!ctl.divergent);
        assert_relative_eq!(ctl.truncated.last().unwrap().1, 2.0, max_relative = 1e-9);
    }

    #[test]
    fn derivative_inequality_cases() {
        let g = 1.0;
        let d = 0.3;
        let r = check_derivative_inequality(&AnalyticCurve::Exponential { scale: 1.0, rate: d }, g).unwrap();
        assert_relative_eq!(r.ratio, 2.0 * d * d / (g * g), max_relative = 1e-9);
        let r = check_derivative_inequality(&AnalyticCurve::Constant(2.0), g).unwrap();
        assert_eq!(r.lhs, 0.0);
        let r = check_derivative_inequality(&AnalyticCurve::Polynomial(vec![0.0, 1.0]), 2.0).unwrap();
        assert_relative_eq!(r.ratio, 1.0, max_relative = 1e-9);
        assert!(matches!(
            check_derivative_inequality(&AnalyticCurve::Exponential { scale: 1.0, rate: -0.2 }, g),
            Err(Error::HypothesisViolated(_))
        ));
        assert!(matches!(
            check_derivative_inequality(&AnalyticCurve::Exponential { scale: 1.0, rate: 0.6 }, g),
            Err(Error::HypothesisViolated(_))
        ));
    }
}

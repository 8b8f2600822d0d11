//! No-arbitrage drift of the forward-curve equation and the Lipschitz
//! machinery of the drift map on the weighted space.

use crate::curves::{embedding_constants, norm_w_unchecked, ForwardCurve, NormVariant, WeightSpec};
use crate::error::{Error, Result};
use crate::levy::{Interval, LevyModel};
use crate::quadrature::cumulative_trapezoid;

/// `(Th)(x) = ∫_0^x h`, by the cumulative trapezoid rule on the curve's grid.
///
/// Beyond `x_max` the primitive grows with slope `h.tail_value()`; the returned
/// curve stores its last node as tail, which is exact only for zero-tail input.
pub fn primitive(curve: &ForwardCurve) -> ForwardCurve {
    let v = cumulative_trapezoid(curve.values(), curve.dx());
    let tail = *v.last().expect("curves have at least two nodes");
    ForwardCurve::new(curve.x_max(), v, tail).expect("primitive of a finite curve is finite")
}

/// Where `-Tσ` lives relative to a driver's working interval.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibilityReport {
    /// `(min, max)` of `-Tσ` over the grid nodes.
    pub range: Interval,
    pub working_interval: Interval,
    pub admissible: bool,
    /// Maturity of the worst excursion outside the interval.
    pub worst_x: Option<f64>,
    /// `σ(∞) ≠ 0`, so `-Tσ` is unbounded beyond the grid.
    pub tail_diverges: bool,
}

fn report_from_exposure(exposure: &[f64], dx: f64, working: Interval, tail: f64) -> AdmissibilityReport {
    let (c, d) = working;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut worst: Option<(f64, f64)> = None;
    for (k, &z) in exposure.iter().enumerate() {
        lo = lo.min(z);
        hi = hi.max(z);
        let excess = (c - z).max(z - d);
        if excess > 0.0 && worst.is_none_or(|(e, _)| excess > e) {
            worst = Some((excess, k as f64 * dx));
        }
    }
    AdmissibilityReport {
        range: (lo, hi),
        working_interval: working,
        admissible: worst.is_none(),
        worst_x: worst.map(|(_, x)| x),
        tail_diverges: tail != 0.0,
    }
}

/// Checks `-Tσ(x) ∈ [c, d]` at every grid node.
pub fn admissible(sigma: &ForwardCurve, model: &LevyModel) -> AdmissibilityReport {
    let exposure: Vec<f64> = primitive(sigma).values().iter().map(|v| -v).collect();
    report_from_exposure(&exposure, sigma.dx(), model.working_interval(), sigma.tail_value())
}

/// Volatility curves and their drivers, one pair per driver.
#[derive(Debug, Clone)]
pub struct DriftInput {
    pub sigmas: Vec<ForwardCurve>,
    pub models: Vec<LevyModel>,
}

impl DriftInput {
    pub fn new(sigmas: Vec<ForwardCurve>, models: Vec<LevyModel>) -> Result<Self> {
        if sigmas.is_empty() || sigmas.len() != models.len() {
            return Err(Error::InvalidParameter(format!(
                "{} volatility curves for {} drivers",
                sigmas.len(),
                models.len()
            )));
        }
        if !sigmas.iter().all(|s| s.same_grid(&sigmas[0])) {
            return Err(Error::InvalidGrid("volatility curves must share one grid".into()));
        }
        Ok(DriftInput { sigmas, models })
    }
}

/// Reusable buffers for repeated drift evaluation on one grid.
#[derive(Debug, Default, Clone)]
pub struct DriftWorkspace {
    exposure: Vec<f64>,
}

/// Result of a drift evaluation into a caller-provided buffer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftOutcome {
    pub tail_value: f64,
    /// Nodes whose exposure was clamped into the working interval.
    pub clamps: usize,
}

/// Writes `α(x) = -Σ σ_i(x) Ψ_i'(-Tσ_i(x))` into `out`.
///
/// Without `clamp`, an exposure outside a working interval is an error;
/// with it, the exposure is clamped to the interval and counted.
pub fn drift_into(
    sigmas: &[&ForwardCurve],
    models: &[LevyModel],
    out: &mut [f64],
    ws: &mut DriftWorkspace,
    clamp: bool,
) -> Result<DriftOutcome> {
    let first = sigmas
        .first()
        .ok_or_else(|| Error::InvalidParameter("no volatility curves".into()))?;
    let n = first.values().len();
    let dx = first.dx();
    out[..n].iter_mut().for_each(|v| *v = 0.0);
    ws.exposure.resize(n, 0.0);
    let mut clamps = 0;
    let mut all_tails_zero = true;
    for (i, (sigma, model)) in sigmas.iter().zip(models).enumerate() {
        let s = sigma.values();
        all_tails_zero &= sigma.tail_value() == 0.0;
        let (c, d) = model.working_interval();
        let e = &mut ws.exposure;
        e[0] = 0.0;
        let mut acc = 0.0;
        for k in 1..n {
            acc += 0.5 * dx * (s[k - 1] + s[k]);
            e[k] = -acc;
        }
        let out_of_range = e.iter().any(|&z| z < c || z > d);
        if out_of_range {
            if !clamp {
                let report = report_from_exposure(e, dx, (c, d), sigma.tail_value());
                return Err(Error::InadmissibleVolatility {
                    driver: i,
                    report: Box::new(report),
                });
            }
            for z in e.iter_mut() {
                if *z < c || *z > d {
                    *z = z.clamp(c, d);
                    clamps += 1;
                }
            }
        }
        add_product_form(s, e, model, out);
    }
    let tail_value = if all_tails_zero { 0.0 } else { out[n - 1] };
    Ok(DriftOutcome { tail_value, clamps })
}

/// `out[k] -= s[k] Ψ'(e[k])` with specialised loops for the closed forms.
fn add_product_form(s: &[f64], e: &[f64], model: &LevyModel, out: &mut [f64]) {
    use crate::levy::LevyKind;
    let b = model.linear_drift();
    match *model.kind() {
        LevyKind::Brownian { volatility } => {
            let v2 = volatility * volatility;
            for ((o, &sk), &ek) in out.iter_mut().zip(s).zip(e) {
                *o -= sk * (v2 * ek + b);
            }
        }
        LevyKind::Poisson { intensity } => {
            for ((o, &sk), &ek) in out.iter_mut().zip(s).zip(e) {
                *o -= sk * (intensity * ek.exp() + b);
            }
        }
        _ => {
            for ((o, &sk), &ek) in out.iter_mut().zip(s).zip(e) {
                *o -= sk * model.cumulant_derivatives(ek)[1];
            }
        }
    }
}

/// The drift curve. Its tail is 0 when every volatility vanishes at infinity,
/// otherwise the flat extension of the last node.
pub fn hjm_drift(input: &DriftInput) -> Result<ForwardCurve> {
    let refs: Vec<&ForwardCurve> = input.sigmas.iter().collect();
    let mut out = vec![0.0; input.sigmas[0].values().len()];
    let o = drift_into(&refs, &input.models, &mut out, &mut DriftWorkspace::default(), false)?;
    ForwardCurve::new(input.sigmas[0].x_max(), out, o.tail_value)
}

/// Like [`hjm_drift`] but clamps out-of-range exposures; returns the clamp count.
pub fn hjm_drift_clamped(input: &DriftInput) -> Result<(ForwardCurve, usize)> {
    let refs: Vec<&ForwardCurve> = input.sigmas.iter().collect();
    let mut out = vec![0.0; input.sigmas[0].values().len()];
    let o = drift_into(&refs, &input.models, &mut out, &mut DriftWorkspace::default(), true)?;
    Ok((ForwardCurve::new(input.sigmas[0].x_max(), out, o.tail_value)?, o.clamps))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyReport {
    pub dx: f64,
    /// `max_x |product form − d/dx Σ Ψ_i(-Tσ_i)|`.
    pub max_discrepancy: f64,
}

/// Compares the product form of the drift with a finite-difference derivative
/// of `Σ Ψ_i(-Tσ_i)` (centred inside, second-order one-sided at the ends).
pub fn drift_consistency_check(input: &DriftInput) -> Result<ConsistencyReport> {
    let alpha = hjm_drift(input)?;
    let n = alpha.values().len();
    let dx = alpha.dx();
    let mut potential = vec![0.0; n];
    for (sigma, model) in input.sigmas.iter().zip(&input.models) {
        for (p, t) in potential.iter_mut().zip(primitive(sigma).values()) {
            *p += model.cumulant_derivatives(-t)[0];
        }
    }
    let deriv = |k: usize| -> f64 {
        if k == 0 {
            (-3.0 * potential[0] + 4.0 * potential[1] - potential[2]) / (2.0 * dx)
        } else if k == n - 1 {
            (3.0 * potential[k] - 4.0 * potential[k - 1] + potential[k - 2]) / (2.0 * dx)
        } else {
            (potential[k + 1] - potential[k - 1]) / (2.0 * dx)
        }
    };
    if n < 3 {
        return Err(Error::InvalidGrid("need at least three nodes".into()));
    }
    let max_discrepancy = (0..n).map(|k| (alpha.node(k) - deriv(k)).abs()).fold(0.0, f64::max);
    Ok(ConsistencyReport { dx, max_discrepancy })
}

/// Suprema of `|Ψ'|, |Ψ''|, |Ψ'''|` over the working interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzConstants {
    pub k: f64,
    pub l: f64,
    pub m: f64,
}

pub fn lipschitz_constants(model: &LevyModel) -> LipschitzConstants {
    const POINTS: usize = 1000;
    let (c, d) = model.working_interval();
    let mut out = LipschitzConstants { k: 0.0, l: 0.0, m: 0.0 };
    // Endpoints are grid points, so monotone or convex derivatives attain their
    // sup exactly.
    for j in 0..=POINTS {
        let z = if j == POINTS {
            d
        } else {
            c + (d - c) * j as f64 / POINTS as f64
        };
        let [_, d1, d2, d3] = model.cumulant_derivatives(z);
        out.k = out.k.max(d1.abs());
        out.l = out.l.max(d2.abs());
        out.m = out.m.max(d3.abs());
    }
    out
}

/// `C5 = 2√n · max_i max(K_i, (C3 + √(2 C4)) L_i, C3 √C4 M_i)`, assembled from
/// the four-term estimate of the drift-map difference.
pub fn c5_constant(models: &[LevyModel], weight: &WeightSpec) -> Result<f64> {
    let c = embedding_constants(weight)?;
    let per_driver = models
        .iter()
        .map(|m| {
            let lc = lipschitz_constants(m);
            lc.k.max((c.c3 + (2.0 * c.c4).sqrt()) * lc.l)
                .max(c.c3 * c.c4.sqrt() * lc.m)
        })
        .fold(0.0, f64::max);
    Ok(2.0 * (models.len() as f64).sqrt() * per_driver)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct C5Report {
    pub c5: f64,
    /// `‖Σg − Σh‖_w`
    pub lhs: f64,
    /// `C5 Σ_i (1 + ‖h_i‖ + ‖g_i‖ + ‖g_i‖²) ‖g_i − h_i‖`
    pub rhs: f64,
}

impl C5Report {
    pub fn slack(&self) -> f64 {
        self.rhs - self.lhs
    }
}

/// Checks the local Lipschitz bound of the drift map for one pair of inputs.
pub fn verify_c5_bound(g: &DriftInput, h: &DriftInput, weight: &WeightSpec) -> Result<C5Report> {
    if g.models != h.models || g.sigmas.len() != h.sigmas.len() {
        return Err(Error::InvalidParameter("inputs must share their driver models".into()));
    }
    let c5 = c5_constant(&g.models, weight)?;
    let variant = NormVariant::Tehranchi;
    let nw = |c: &ForwardCurve| norm_w_unchecked(c, weight, variant).sqrt();
    let diff = hjm_drift(g)?.combine(1.0, &hjm_drift(h)?, -1.0)?;
    let lhs = nw(&diff);
    let mut sum = 0.0;
    for (gi, hi) in g.sigmas.iter().zip(&h.sigmas) {
        let (ng, nh) = (nw(gi), nw(hi));
        sum += (1.0 + nh + ng + ng * ng) * nw(&gi.combine(1.0, hi, -1.0)?);
    }
    let rep = C5Report { c5, lhs, rhs: c5 * sum };
    if rep.lhs > rep.rhs * (1.0 + 1e-9) + 1e-15 {
        return Err(Error::ViolationDetected(format!(
            "drift Lipschitz bound: {} > {}",
            rep.lhs, rep.rhs
        )));
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn wide_brownian() -> LevyModel {
        LevyModel::with_intervals(
            crate::levy::LevyKind::Brownian { volatility: 1.0 },
            (-10.0, 10.0),
            (-5.0, 5.0),
        )
        .unwrap()
    }

    fn flat(c: f64) -> ForwardCurve {
        ForwardCurve::constant(10.0, 1000, c).unwrap()
    }

    #[test]
    fn primitive_of_constant() {
        let p = primitive(&flat(0.3));
        for k in 0..=1000 {
            assert_relative_eq!(p.node(k), 0.3 * p.x(k), max_relative = 1e-12);
        }
        assert!(primitive(&flat(0.0)).values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn admissibility_examples() {
        let m = LevyModel::poisson(1.0).unwrap();
        assert!(admissible(&flat(0.0), &m).admissible);
        let ok = admissible(&ForwardCurve::constant(30.0, 3000, -0.03).unwrap(), &m);
        assert!(ok.admissible && ok.tail_diverges);
        assert_relative_eq!(ok.range.1, 0.9, max_relative = 1e-12);
        let bad = admissible(&ForwardCurve::constant(30.0, 3000, -0.04).unwrap(), &m);
        assert!(!bad.admissible);
        assert_eq!(bad.worst_x, Some(30.0));
    }

    #[test]
    fn drift_closed_forms() {
        let s = 0.2;
        let a = hjm_drift(&DriftInput::new(vec![flat(s)], vec![wide_brownian()]).unwrap()).unwrap();
        for k in 0..=1000 {
            assert_relative_eq!(a.node(k), s * s * a.x(k), max_relative = 1e-12, epsilon = 1e-15);
        }
        assert_eq!(a.tail_value(), a.node(1000));
        let eta = 0.05;
        let p = hjm_drift(&DriftInput::new(vec![flat(-eta)], vec![LevyModel::poisson(1.0).unwrap()]).unwrap()).unwrap();
        for k in 0..=1000 {
            assert_relative_eq!(p.node(k), eta * (eta * p.x(k)).exp(), max_relative = 1e-12);
        }
        let z = hjm_drift(&DriftInput::new(vec![flat(0.0)], vec![LevyModel::poisson(2.0).unwrap()]).unwrap()).unwrap();
        assert!(z.values().iter().all(|&v| v == 0.0));
        assert_eq!(z.tail_value(), 0.0);
    }

    #[test]
    fn inadmissible_is_reported() {
        let e = hjm_drift(&DriftInput::new(vec![flat(-0.5)], vec![LevyModel::poisson(1.0).unwrap()]).unwrap());
        assert!(matches!(e, Err(Error::InadmissibleVolatility { driver: 0, .. })));
        let (a, clamps) =
            hjm_drift_clamped(&DriftInput::new(vec![flat(-0.5)], vec![LevyModel::poisson(1.0).unwrap()]).unwrap())
                .unwrap();
        assert!(clamps > 0);
        assert_relative_eq!(a.node(1000), 0.5 * 1f64.exp(), max_relative = 1e-12);
    }

    #[test]
    fn lipschitz_examples() {
        let b = lipschitz_constants(&LevyModel::brownian(1.0).unwrap());
        assert_eq!((b.k, b.l, b.m), (1.0, 1.0, 0.0));
        let p = lipschitz_constants(&LevyModel::poisson(2.0).unwrap());
        let e = 2.0 * 1f64.exp();
        assert_relative_eq!(p.k, e, max_relative = 1e-15);
        assert_relative_eq!(p.l, e, max_relative = 1e-15);
        let c = lipschitz_constants(&LevyModel::compound_poisson_normal(1.0, 0.0, 1.0).unwrap());
        assert_relative_eq!(c.k, 0.5f64.exp(), max_relative = 1e-15);
    }

    #[test]
    fn consistency_orders() {
        let run = |model: LevyModel, s: f64, n: usize| {
            let sig = ForwardCurve::constant(10.0, n, s).unwrap();
            drift_consistency_check(&DriftInput::new(vec![sig], vec![model]).unwrap())
                .unwrap()
                .max_discrepancy
        };
        let m = LevyModel::poisson(1.0).unwrap();
        let r = run(m.clone(), -0.05, 80) / run(m, -0.05, 160);
        assert!((r - 4.0).abs() < 0.4, "ratio {r}");
        assert!(run(wide_brownian(), 0.3, 80) < 1e-12);
    }

    #[test]
    fn c5_trivial_and_brownian() {
        let w = WeightSpec::Exp { alpha: 1.0 };
        let m = vec![LevyModel::brownian(1.0).unwrap()];
        let bump = |a: f64| ForwardCurve::from_fn(30.0, 3000, move |x| a * (-x).exp(), 0.0).unwrap();
        let g = DriftInput::new(vec![bump(0.1)], m.clone()).unwrap();
        let r = verify_c5_bound(&g, &g, &w).unwrap();
        assert_eq!((r.lhs, r.rhs), (0.0, 0.0));
        let h = DriftInput::new(vec![bump(0.2)], m).unwrap();
        let r = verify_c5_bound(&g, &h, &w).unwrap();
        assert!(r.lhs > 0.0 && r.slack() > 0.0);
    }
}

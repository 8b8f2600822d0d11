//! Volatility families. Every built-in family has the form
//! `σ_i(r)(x) = f_i(r) · b_i(x)` with a fixed basis curve `b_i` and a scalar
//! state functional `f_i`.

use crate::curves::{embedding_constants, AnalyticCurve, ForwardCurve, WeightSpec};
use crate::error::{Error, Result};

/// Scalar functionals of the current curve with analytic Lipschitz constants.
#[derive(Debug, Clone, PartialEq)]
pub enum StateFunctional {
    Constant(f64),
    /// `clamp(intercept + slope · r(0), lo, hi)`.
    ClippedAffineShortRate {
        intercept: f64,
        slope: f64,
        lo: f64,
        hi: f64,
    },
    /// `clamp(intercept + slope · r(maturity), lo, hi)`.
    ClippedAffineRate {
        maturity: f64,
        intercept: f64,
        slope: f64,
        lo: f64,
        hi: f64,
    },
}

impl StateFunctional {
    pub fn eval(&self, curve: &ForwardCurve) -> f64 {
        match *self {
            StateFunctional::Constant(c) => c,
            StateFunctional::ClippedAffineShortRate {
                intercept,
                slope,
                lo,
                hi,
            } => (intercept + slope * curve.node(0)).clamp(lo, hi),
            StateFunctional::ClippedAffineRate {
                maturity,
                intercept,
                slope,
                lo,
                hi,
            } => (intercept + slope * curve.eval(maturity)).clamp(lo, hi),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, StateFunctional::Constant(_))
    }

    /// `(min, max)` of the functional's range.
    pub fn range(&self) -> (f64, f64) {
        match *self {
            StateFunctional::Constant(c) => (c, c),
            StateFunctional::ClippedAffineShortRate { lo, hi, .. }
            | StateFunctional::ClippedAffineRate { lo, hi, .. } => (lo, hi),
        }
    }

    /// Lipschitz constant with respect to the weighted norm: point evaluation
    /// is bounded by `C2`, clipping is 1-Lipschitz.
    pub fn lipschitz_w(&self, weight: &WeightSpec) -> Result<f64> {
        let c2 = embedding_constants(weight)?.c2;
        Ok(match *self {
            StateFunctional::Constant(_) => 0.0,
            StateFunctional::ClippedAffineShortRate { slope, .. }
            | StateFunctional::ClippedAffineRate { slope, .. } => slope.abs() * c2,
        })
    }

    fn validate(&self) -> Result<()> {
        let (lo, hi) = self.range();
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::InvalidParameter(format!(
                "functional range [{lo}, {hi}] is invalid"
            )));
        }
        if let StateFunctional::ClippedAffineRate { maturity, .. } = *self {
            if !(maturity >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "maturity {maturity} must be non-negative"
                )));
            }
        }
        Ok(())
    }
}

/// The volatility families of the model.
#[derive(Debug, Clone, PartialEq)]
pub enum VolatilitySpec {
    /// `σ_i(r) = φ_i(r) λ_i` with fixed directions `λ_i` vanishing at infinity
    /// and `φ_i` valued in `[0, 1]`.
    ConstantDirection {
        directions: Vec<ForwardCurve>,
        scales: Vec<StateFunctional>,
    },
    /// Two Wiener drivers and one Poisson driver:
    /// `σ_1 = φ_1 p(x)`, `σ_2 = φ_2 e^{δx}`, `σ_3 = −η`.
    JumpDiffusion {
        poly: Vec<f64>,
        delta: f64,
        eta: f64,
        phi1: StateFunctional,
        phi2: StateFunctional,
    },
    /// As [`VolatilitySpec::JumpDiffusion`] with `η` a functional of the state.
    StateDependentEta {
        poly: Vec<f64>,
        delta: f64,
        eta: StateFunctional,
        phi1: StateFunctional,
        phi2: StateFunctional,
    },
}

impl VolatilitySpec {
    pub fn n_drivers(&self) -> usize {
        match self {
            VolatilitySpec::ConstantDirection { directions, .. } => directions.len(),
            _ => 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            VolatilitySpec::ConstantDirection { directions, scales } => {
                if directions.is_empty() || directions.len() != scales.len() {
                    return Err(Error::InvalidParameter(format!(
                        "{} directions with {} scale functionals",
                        directions.len(),
                        scales.len()
                    )));
                }
                for (i, (d, s)) in directions.iter().zip(scales).enumerate() {
                    s.validate()?;
                    let (lo, hi) = s.range();
                    if lo < 0.0 || hi > 1.0 {
                        return Err(Error::InvalidParameter(format!(
                            "scale functional {i} must map into [0, 1], range is [{lo}, {hi}]"
                        )));
                    }
                    if d.tail_value() != 0.0 {
                        return Err(Error::InvalidParameter(format!(
                            "direction {i} must vanish at infinity"
                        )));
                    }
                }
                Ok(())
            }
            VolatilitySpec::JumpDiffusion {
                poly,
                delta,
                eta,
                phi1,
                phi2,
                ..
            } => {
                phi1.validate()?;
                phi2.validate()?;
                if poly.iter().chain([delta, eta]).any(|v| !v.is_finite()) {
                    return Err(Error::InvalidParameter("non-finite volatility parameter".into()));
                }
                Ok(())
            }
            VolatilitySpec::StateDependentEta {
                poly,
                delta,
                eta,
                phi1,
                phi2,
            } => {
                phi1.validate()?;
                phi2.validate()?;
                eta.validate()?;
                if eta.range().0 < 0.0 {
                    return Err(Error::InvalidParameter("eta must be non-negative".into()));
                }
                if poly.iter().chain([delta]).any(|v| !v.is_finite()) {
                    return Err(Error::InvalidParameter("non-finite volatility parameter".into()));
                }
                Ok(())
            }
        }
    }

    /// Parameter constraints that keep the jump-diffusion family inside the
    /// all-derivatives space with parameters `(β, γ)`.
    pub fn check_bs_constraints(&self, beta: f64, gamma: f64) -> Result<()> {
        let (delta, eta_hi) = match self {
            VolatilitySpec::ConstantDirection { .. } => return Ok(()),
            VolatilitySpec::JumpDiffusion { delta, eta, .. } => (*delta, *eta),
            VolatilitySpec::StateDependentEta { delta, eta, .. } => {
                let hi = eta.range().1;
                if !(hi < gamma / 2.0 && hi < beta.sqrt()) {
                    return Err(Error::HypothesisViolated(format!(
                        "eta range must lie in [0, min(gamma/2, sqrt(beta))), upper end is {hi}"
                    )));
                }
                (*delta, hi)
            }
        };
        if !(4.0 * delta * delta < beta && delta < gamma / 4.0) {
            return Err(Error::HypothesisViolated(format!(
                "delta = {delta} needs 4 delta² < beta and delta < gamma/4"
            )));
        }
        if !(eta_hi * eta_hi < beta && eta_hi < gamma / 2.0) {
            return Err(Error::HypothesisViolated(format!(
                "eta = {eta_hi} needs eta² < beta and eta < gamma/2"
            )));
        }
        Ok(())
    }

    /// Basis curves `b_i` on the grid `(x_max, n_points)`.
    pub fn basis(&self, x_max: f64, n_points: usize) -> Result<Vec<ForwardCurve>> {
        let last_value = |c: ForwardCurve| -> Result<ForwardCurve> {
            let t = c.node(c.n_points());
            let mut c = c;
            c.set_tail_value(t);
            Ok(c)
        };
        match self {
            VolatilitySpec::ConstantDirection { directions, .. } => {
                for d in directions {
                    if d.n_points() != n_points || (d.x_max() - x_max).abs() > 1e-12 * x_max {
                        return Err(Error::InvalidGrid(
                            "direction curves must use the simulation grid".into(),
                        ));
                    }
                }
                Ok(directions.clone())
            }
            VolatilitySpec::JumpDiffusion { poly, delta, .. }
            | VolatilitySpec::StateDependentEta { poly, delta, .. } => {
                let p = last_value(AnalyticCurve::Polynomial(poly.clone()).sample(x_max, n_points)?)?;
                let e = last_value(
                    AnalyticCurve::Exponential {
                        scale: 1.0,
                        rate: *delta,
                    }
                    .sample(x_max, n_points)?,
                )?;
                Ok(vec![p, e, ForwardCurve::constant(x_max, n_points, -1.0)?])
            }
        }
    }

    /// Scalar factors `f_i`.
    pub fn factors(&self) -> Vec<StateFunctional> {
        match self {
            VolatilitySpec::ConstantDirection { scales, .. } => scales.clone(),
            VolatilitySpec::JumpDiffusion { eta, phi1, phi2, .. } => {
                vec![phi1.clone(), phi2.clone(), StateFunctional::Constant(*eta)]
            }
            VolatilitySpec::StateDependentEta { eta, phi1, phi2, .. } => {
                vec![phi1.clone(), phi2.clone(), eta.clone()]
            }
        }
    }

    pub fn is_state_independent(&self) -> bool {
        self.factors().iter().all(StateFunctional::is_constant)
    }
}

/// A volatility family bound to a maturity grid.
#[derive(Debug, Clone)]
pub struct BoundVolatility {
    pub basis: Vec<ForwardCurve>,
    pub factors: Vec<StateFunctional>,
}

impl BoundVolatility {
    pub fn new(spec: &VolatilitySpec, x_max: f64, n_points: usize) -> Result<Self> {
        Ok(BoundVolatility {
            basis: spec.basis(x_max, n_points)?,
            factors: spec.factors(),
        })
    }

    pub fn is_state_independent(&self) -> bool {
        self.factors.iter().all(StateFunctional::is_constant)
    }

    /// Writes `σ_i(state)` into the pre-allocated `out` curves.
    pub fn eval_into(&self, state: &ForwardCurve, out: &mut [ForwardCurve]) {
        for ((o, b), f) in out.iter_mut().zip(&self.basis).zip(&self.factors) {
            let c = f.eval(state);
            for (ov, bv) in o.values_mut().iter_mut().zip(b.values()) {
                *ov = c * bv;
            }
            o.set_tail_value(c * b.tail_value());
        }
    }

    pub fn eval(&self, state: &ForwardCurve) -> Vec<ForwardCurve> {
        let mut out = self.basis.clone();
        self.eval_into(state, &mut out);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn functionals() {
        let h = ForwardCurve::from_fn(10.0, 100, |x| 0.02 + 0.001 * x, 0.03).unwrap();
        assert_eq!(StateFunctional::Constant(0.4).eval(&h), 0.4);
        let f = StateFunctional::ClippedAffineShortRate {
            intercept: 0.5,
            slope: 10.0,
            lo: 0.0,
            hi: 1.0,
        };
        assert!((f.eval(&h) - 0.7).abs() < 1e-15);
        let g = StateFunctional::ClippedAffineRate {
            maturity: 5.0,
            intercept: 0.9,
            slope: 10.0,
            lo: 0.0,
            hi: 1.0,
        };
        assert_eq!(g.eval(&h), 1.0);
        assert_eq!(f.lipschitz_w(&WeightSpec::Exp { alpha: 1.0 }).unwrap(), 20.0);
    }

    #[test]
    fn jump_diffusion_basis() {
        let spec = VolatilitySpec::JumpDiffusion {
            poly: vec![0.004, 0.0002],
            delta: -0.1,
            eta: 0.005,
            phi1: StateFunctional::Constant(1.0),
            phi2: StateFunctional::Constant(0.008),
        };
        spec.validate().unwrap();
        spec.check_bs_constraints(2.0, 1.0).unwrap();
        assert!(spec.is_state_independent());
        let b = BoundVolatility::new(&spec, 10.0, 100).unwrap();
        let h = ForwardCurve::constant(10.0, 100, 0.0).unwrap();
        let s = b.eval(&h);
        assert_eq!(s[2].values()[7], -0.005);
        assert_eq!(s[2].tail_value(), -0.005);
        assert!((s[1].node(0) - 0.008).abs() < 1e-18);
        assert!((s[0].node(100) - 0.006).abs() < 1e-15);
    }

    #[test]
    fn constraint_violations() {
        let spec = VolatilitySpec::JumpDiffusion {
            poly: vec![0.01],
            delta: 0.3,
            eta: 0.01,
            phi1: StateFunctional::Constant(1.0),
            phi2: StateFunctional::Constant(1.0),
        };
        assert!(spec.check_bs_constraints(2.0, 1.0).is_err());
        let cd = VolatilitySpec::ConstantDirection {
            directions: vec![ForwardCurve::constant(10.0, 10, 0.1).unwrap()],
            scales: vec![StateFunctional::Constant(0.5)],
        };
        assert!(cd.validate().is_err());
    }
}

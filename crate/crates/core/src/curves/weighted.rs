//! Weighted Sobolev-type norms on grid curves, their embedding constants and
//! a numerical check of the embedding estimates.

use crate::curves::ForwardCurve;
use crate::error::{Error, Result};

/// Built-in weight families. Both are non-decreasing, `w ≥ 1` and `w(0) = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightSpec {
    /// `w(x) = e^{αx}`, any `α > 0`.
    Exp { alpha: f64 },
    /// `w(x) = (1 + x)^α`, requires `α > 3`.
    Poly { alpha: f64 },
}

impl WeightSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            WeightSpec::Exp { alpha } if alpha > 0.0 && alpha.is_finite() => Ok(()),
            WeightSpec::Poly { alpha } if alpha > 3.0 && alpha.is_finite() => Ok(()),
            WeightSpec::Exp { alpha } => Err(Error::InvalidParameter(format!(
                "exponential weight needs alpha > 0, got {alpha}"
            ))),
            WeightSpec::Poly { alpha } => Err(Error::InvalidParameter(format!(
                "polynomial weight needs alpha > 3, got {alpha}"
            ))),
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            WeightSpec::Exp { alpha } => (alpha * x).exp(),
            WeightSpec::Poly { alpha } => (1.0 + x).powf(alpha),
        }
    }

    /// `‖w^{-p}‖_{L¹(ℝ₊)}` in closed form, `None` when infinite.
    pub fn inverse_power_l1(&self, p: f64) -> Option<f64> {
        match *self {
            WeightSpec::Exp { alpha } => Some(1.0 / (alpha * p)),
            WeightSpec::Poly { alpha } => {
                let e = alpha * p;
                (e > 1.0).then(|| 1.0 / (e - 1.0))
            }
        }
    }
}

/// Which point anchors the norm: `h(0)` or `h(∞)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NormVariant {
    Original,
    #[default]
    Tehranchi,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedConfig {
    pub weight: WeightSpec,
    pub variant: NormVariant,
    /// Relative tolerance for the half-grid error estimate.
    pub tolerance: f64,
}

impl WeightedConfig {
    pub fn new(weight: WeightSpec, variant: NormVariant) -> Self {
        WeightedConfig {
            weight,
            variant,
            tolerance: 1e-6,
        }
    }
}

/// How a curve is measured.
#[derive(Debug, Clone, PartialEq)]
pub enum CurveSpaceConfig {
    BjorkSvensson { beta: f64, gamma: f64, series_terms: usize },
    Weighted(WeightedConfig),
}

impl CurveSpaceConfig {
    pub fn validate(&self) -> Result<()> {
        match self {
            CurveSpaceConfig::BjorkSvensson {
                beta,
                gamma,
                series_terms,
            } => {
                if !(*beta > 1.0 && *gamma > 0.0 && *series_terms >= 1) {
                    return Err(Error::InvalidParameter(format!(
                        "need beta > 1, gamma > 0, series_terms >= 1; got {beta}, {gamma}, {series_terms}"
                    )));
                }
                Ok(())
            }
            CurveSpaceConfig::Weighted(c) => {
                c.weight.validate()?;
                if !(c.tolerance > 0.0) {
                    return Err(Error::InvalidParameter("tolerance must be positive".into()));
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedNorm {
    pub squared: f64,
    /// Estimated absolute error of the derivative integral.
    pub error_estimate: f64,
}

impl WeightedNorm {
    pub fn norm(&self) -> f64 {
        self.squared.sqrt()
    }
}

/// Midpoint weights `w(x_{k+1/2})` for a grid with spacing `dx`.
pub fn midpoint_weights(weight: &WeightSpec, dx: f64, n_cells: usize) -> Vec<f64> {
    (0..n_cells).map(|k| weight.eval((k as f64 + 0.5) * dx)).collect()
}

fn derivative_integral(values: &[f64], stride: usize, dx: f64, weight: &WeightSpec, n_cells: usize) -> f64 {
    let h = dx * stride as f64;
    let mut s = 0.0;
    for k in 0..n_cells {
        let d = values[(k + 1) * stride] - values[k * stride];
        s += d * d * weight.eval((k as f64 + 0.5) * h);
    }
    s / h
}

fn anchor(curve: &ForwardCurve, variant: NormVariant) -> f64 {
    match variant {
        NormVariant::Original => curve.node(0),
        NormVariant::Tehranchi => curve.tail_value(),
    }
}

/// Squared norm without error control. Exactly a weighted Euclidean
/// seminorm of the node differences plus the anchor.
pub fn norm_w_unchecked(curve: &ForwardCurve, weight: &WeightSpec, variant: NormVariant) -> f64 {
    let a = anchor(curve, variant);
    a * a + derivative_integral(curve.values(), 1, curve.dx(), weight, curve.n_points())
}

/// Squared weighted norm `anchor² + ∫ (h')² w`, with a half-grid error check.
pub fn norm_w(curve: &ForwardCurve, config: &WeightedConfig) -> Result<WeightedNorm> {
    let n = curve.n_points();
    let dx = curve.dx();
    let fine = derivative_integral(curve.values(), 1, dx, &config.weight, n);
    let a = anchor(curve, config.variant);
    let squared = a * a + fine;

    let error_estimate = if n >= 4 {
        let m = n / 2;
        let coarse = derivative_integral(curve.values(), 2, dx, &config.weight, m);
        let fine_part = derivative_integral(curve.values(), 1, dx, &config.weight, 2 * m);
        (fine_part - coarse).abs() / 3.0
    } else {
        0.0
    };
    if !squared.is_finite() {
        return Err(Error::InvalidCurve("weighted norm overflowed".into()));
    }
    let scale = squared.max(f64::MIN_POSITIVE);
    if error_estimate > config.tolerance * scale && error_estimate > 1e-300 {
        return Err(Error::GridTooCoarse {
            estimate: error_estimate / scale,
            tolerance: config.tolerance,
        });
    }
    Ok(WeightedNorm {
        squared,
        error_estimate,
    })
}

/// `(C1, C2, C3, C4)` of the embedding estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbeddingConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
}

pub fn embedding_constants(weight: &WeightSpec) -> Result<EmbeddingConstants> {
    weight.validate()?;
    let inv = weight.inverse_power_l1(1.0).expect("validated weight");
    let third = weight.inverse_power_l1(1.0 / 3.0).expect("validated weight");
    let c1 = inv.sqrt();
    Ok(EmbeddingConstants {
        c1,
        c2: 1.0 + c1,
        c3: third * third,
        c4: third.powf(3.5),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbeddingCheck {
    pub lhs: f64,
    pub rhs: f64,
}

impl EmbeddingCheck {
    pub fn slack(&self) -> f64 {
        self.rhs - self.lhs
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbeddingReport {
    pub norm: f64,
    /// `‖h'‖_{L¹} ≤ C1‖h‖`
    pub derivative_l1: EmbeddingCheck,
    /// `‖h‖_{L∞} ≤ C2‖h‖`
    pub sup: EmbeddingCheck,
    /// `‖h − h(∞)‖_{L¹} ≤ C3‖h‖`
    pub deviation_l1: EmbeddingCheck,
    /// `‖(h − h(∞))⁴ w‖_{L¹} ≤ C4‖h‖⁴`
    pub fourth_power: EmbeddingCheck,
}

impl EmbeddingReport {
    pub fn checks(&self) -> [(&'static str, EmbeddingCheck); 4] {
        [
            ("derivative_l1", self.derivative_l1),
            ("sup", self.sup),
            ("deviation_l1", self.deviation_l1),
            ("fourth_power", self.fourth_power),
        ]
    }
}

/// Evaluates both sides of the four embedding estimates for a grid curve.
pub fn verify_embedding(curve: &ForwardCurve, weight: &WeightSpec, variant: NormVariant) -> Result<EmbeddingReport> {
    let c = embedding_constants(weight)?;
    let norm = norm_w_unchecked(curve, weight, variant).sqrt();
    let v = curve.values();
    let dx = curve.dx();
    let tail = curve.tail_value();

    let derivative_l1: f64 = v.windows(2).map(|p| (p[1] - p[0]).abs()).sum();
    let sup = v.iter().fold(tail.abs(), |m, x| m.max(x.abs()));
    let dev: Vec<f64> = v.iter().map(|x| (x - tail).abs()).collect();
    let deviation_l1 = crate::quadrature::trapezoid(&dev, dx);
    let quart: Vec<f64> = dev
        .iter()
        .enumerate()
        .map(|(k, d)| d.powi(4) * weight.eval(k as f64 * dx))
        .collect();
    let fourth = crate::quadrature::trapezoid(&quart, dx);

    let report = EmbeddingReport {
        norm,
        derivative_l1: EmbeddingCheck {
            lhs: derivative_l1,
            rhs: c.c1 * norm,
        },
        sup: EmbeddingCheck {
            lhs: sup,
            rhs: c.c2 * norm,
        },
        deviation_l1: EmbeddingCheck {
            lhs: deviation_l1,
            rhs: c.c3 * norm,
        },
        fourth_power: EmbeddingCheck {
            lhs: fourth,
            rhs: c.c4 * norm.powi(4),
        },
    };
    for (name, chk) in report.checks() {
        // Allow for quadrature error on the left-hand sides.
        if chk.lhs > chk.rhs * (1.0 + 1e-6) + 1e-14 {
            return Err(Error::ViolationDetected(format!(
                "embedding estimate {name}: {} > {}",
                chk.lhs, chk.rhs
            )));
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn exp1() -> WeightedConfig {
        WeightedConfig::new(WeightSpec::Exp { alpha: 1.0 }, NormVariant::Tehranchi)
    }

    #[test]
    fn constants() {
        let c = embedding_constants(&WeightSpec::Exp { alpha: 1.0 }).unwrap();
        assert_eq!((c.c1, c.c2, c.c3), (1.0, 2.0, 9.0));
        assert_relative_eq!(c.c4, 3f64.powf(3.5), max_relative = 1e-15);
        let c = embedding_constants(&WeightSpec::Exp { alpha: 9.0 }).unwrap();
        assert_relative_eq!(c.c3, 1.0 / 9.0, max_relative = 1e-15);
        let c = embedding_constants(&WeightSpec::Poly { alpha: 6.0 }).unwrap();
        assert_relative_eq!(c.c3, 1.0, max_relative = 1e-15);
        assert_relative_eq!(c.c4, 1.0, max_relative = 1e-15);
        assert!(embedding_constants(&WeightSpec::Poly { alpha: 3.0 }).is_err());
    }

    #[test]
    fn constant_curve() {
        let h = ForwardCurve::constant(30.0, 300, 0.7).unwrap();
        for variant in [NormVariant::Original, NormVariant::Tehranchi] {
            let cfg = WeightedConfig::new(WeightSpec::Exp { alpha: 1.0 }, variant);
            assert_relative_eq!(norm_w(&h, &cfg).unwrap().squared, 0.49, max_relative = 1e-15);
        }
    }

    #[test]
    fn decaying_exponential() {
        let n = 30 * 4096;
        let h = ForwardCurve::from_fn(30.0, n, |x| (-x).exp(), 0.0).unwrap();
        let r = norm_w(&h, &exp1()).unwrap();
        assert_relative_eq!(r.squared, 1.0, max_relative = 1e-6);
        let g = ForwardCurve::from_fn(30.0, n, |x| 1.0 - (-x).exp(), 1.0).unwrap();
        let orig = WeightedConfig::new(WeightSpec::Exp { alpha: 1.0 }, NormVariant::Original);
        assert_relative_eq!(norm_w(&g, &orig).unwrap().squared, 1.0, max_relative = 1e-6);
        assert_relative_eq!(norm_w(&g, &exp1()).unwrap().squared, 2.0, max_relative = 1e-6);
    }

    #[test]
    fn coarse_grid_rejected() {
        let h = ForwardCurve::from_fn(10.0, 20, |x| (-3.0 * x).exp(), 0.0).unwrap();
        assert!(matches!(norm_w(&h, &exp1()), Err(Error::GridTooCoarse { .. })));
    }

    #[test]
    fn embedding_examples() {
        let w = WeightSpec::Exp { alpha: 1.0 };
        let h = ForwardCurve::constant(30.0, 300, -2.0).unwrap();
        let r = verify_embedding(&h, &w, NormVariant::Tehranchi).unwrap();
        assert_eq!(r.derivative_l1.lhs, 0.0);
        assert_eq!(r.sup.lhs, 2.0);
        assert!(r.sup.slack() > 0.0);
        let g = ForwardCurve::from_fn(30.0, 30 * 512, |x| 1.0 - (-x).exp(), 1.0).unwrap();
        let r = verify_embedding(&g, &w, NormVariant::Tehranchi).unwrap();
        for (_, c) in r.checks() {
            assert!(c.slack() > 0.0);
        }
        assert_relative_eq!(r.derivative_l1.lhs, 1.0, max_relative = 1e-9);
    }
}

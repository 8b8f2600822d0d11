use crate::curves::ForwardCurve;
use crate::error::Result;

/// Curves with closed-form derivatives of every order.
#[derive(Debug, Clone, PartialEq)]
pub enum AnalyticCurve {
    /// `Σ c_k x^k`, coefficients in increasing degree.
    Polynomial(Vec<f64>),
    /// `scale · e^{rate x}`.
    Exponential {
        scale: f64,
        rate: f64,
    },
    /// `scale · (e^{rate x} − offset)`, e.g. `λ(e^{ηx} − 1)`.
    ScaledShiftedExp {
        scale: f64,
        rate: f64,
        offset: f64,
    },
    Constant(f64),
    Sum(Vec<AnalyticCurve>),
}

/// Normal form `P(x) + Σ_j a_j e^{δ_j x}` with `δ_j ≠ 0`.
#[derive(Debug, Clone, PartialEq, Default)]
pub(crate) struct QuasiPolynomial {
    pub poly: Vec<f64>,
    pub exps: Vec<(f64, f64)>,
}

impl QuasiPolynomial {
    fn add_poly(&mut self, coeffs: &[f64]) {
        if self.poly.len() < coeffs.len() {
            self.poly.resize(coeffs.len(), 0.0);
        }
        for (p, c) in self.poly.iter_mut().zip(coeffs) {
            *p += c;
        }
    }

    fn add_exp(&mut self, a: f64, rate: f64) {
        if rate == 0.0 {
            self.add_poly(&[a]);
        } else if let Some(e) = self.exps.iter_mut().find(|e| e.1 == rate) {
            e.0 += a;
        } else {
            self.exps.push((a, rate));
        }
    }

    fn normalize(mut self) -> Self {
        while self.poly.last() == Some(&0.0) {
            self.poly.pop();
        }
        self.exps.retain(|e| e.0 != 0.0);
        self
    }

    /// Degree of the polynomial part, `None` when it vanishes.
    pub fn degree(&self) -> Option<usize> {
        self.poly.len().checked_sub(1)
    }

    /// Coefficients of `P^{(n)}`.
    pub fn poly_derivative(&self, n: usize) -> Vec<f64> {
        if n >= self.poly.len() {
            return Vec::new();
        }
        (n..self.poly.len())
            .map(|k| {
                let falling: f64 = ((k - n + 1)..=k).map(|m| m as f64).product();
                self.poly[k] * falling
            })
            .collect()
    }

    pub fn eval_derivative(&self, n: usize, x: f64) -> f64 {
        let p = self.poly_derivative(n);
        let poly = p.iter().rev().fold(0.0, |acc, c| acc * x + c);
        let ex: f64 = self
            .exps
            .iter()
            .map(|&(a, d)| a * d.powi(n as i32) * (d * x).exp())
            .sum();
        poly + ex
    }
}

impl AnalyticCurve {
    pub(crate) fn quasi(&self) -> QuasiPolynomial {
        let mut q = QuasiPolynomial::default();
        self.accumulate(&mut q, 1.0);
        q.normalize()
    }

    fn accumulate(&self, q: &mut QuasiPolynomial, w: f64) {
        match self {
            AnalyticCurve::Polynomial(c) => {
                let scaled: Vec<f64> = c.iter().map(|v| w * v).collect();
                q.add_poly(&scaled);
            }
            AnalyticCurve::Exponential { scale, rate } => q.add_exp(w * scale, *rate),
            AnalyticCurve::ScaledShiftedExp { scale, rate, offset } => {
                q.add_exp(w * scale, *rate);
                q.add_poly(&[-w * scale * offset]);
            }
            AnalyticCurve::Constant(c) => q.add_poly(&[w * c]),
            AnalyticCurve::Sum(parts) => {
                for p in parts {
                    p.accumulate(q, w);
                }
            }
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.quasi().eval_derivative(0, x)
    }

    /// `d^n h / dx^n` at `x`.
    pub fn derivative(&self, n: usize, x: f64) -> f64 {
        self.quasi().eval_derivative(n, x)
    }

    /// The `n`-th derivative as another analytic curve.
    pub fn derivative_curve(&self, n: usize) -> AnalyticCurve {
        let q = self.quasi();
        let mut parts = vec![AnalyticCurve::Polynomial(q.poly_derivative(n))];
        parts.extend(q.exps.iter().map(|&(a, d)| AnalyticCurve::Exponential {
            scale: a * d.powi(n as i32),
            rate: d,
        }));
        AnalyticCurve::Sum(parts)
    }

    pub fn scaled(&self, w: f64) -> AnalyticCurve {
        self.clone().scale_inner(w)
    }

    fn scale_inner(self, w: f64) -> AnalyticCurve {
        let q = self.quasi();
        let mut parts = vec![AnalyticCurve::Polynomial(q.poly.iter().map(|c| w * c).collect())];
        parts.extend(
            q.exps
                .iter()
                .map(|&(a, d)| AnalyticCurve::Exponential { scale: w * a, rate: d }),
        );
        AnalyticCurve::Sum(parts)
    }

    /// `self − other`.
    pub fn minus(&self, other: &AnalyticCurve) -> AnalyticCurve {
        AnalyticCurve::Sum(vec![self.clone(), other.scaled(-1.0)])
    }

    /// `lim_{x→∞} h(x)` when it exists.
    pub fn limit_at_infinity(&self) -> Option<f64> {
        let q = self.quasi();
        if q.degree().unwrap_or(0) > 0 || q.exps.iter().any(|e| e.1 > 0.0) {
            return None;
        }
        Some(q.poly.first().copied().unwrap_or(0.0))
    }

    /// Samples on `n_points + 1` nodes of `[0, x_max]`. The tail value is the
    /// limit at infinity when it exists, otherwise the value at `x_max`.
    pub fn sample(&self, x_max: f64, n_points: usize) -> Result<ForwardCurve> {
        let q = self.quasi();
        let tail = self.limit_at_infinity().unwrap_or_else(|| q.eval_derivative(0, x_max));
        ForwardCurve::from_fn(x_max, n_points, |x| q.eval_derivative(0, x), tail)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn derivatives_of_each_family() {
        let p = AnalyticCurve::Polynomial(vec![1.0, 2.0, 3.0]);
        assert_eq!(p.eval(2.0), 17.0);
        assert_eq!(p.derivative(1, 2.0), 14.0);
        assert_eq!(p.derivative(2, 5.0), 6.0);
        assert_eq!(p.derivative(3, 5.0), 0.0);
        let e = AnalyticCurve::Exponential { scale: 2.0, rate: 0.5 };
        assert_relative_eq!(e.derivative(3, 1.0), 2.0 * 0.125 * 0.5f64.exp(), max_relative = 1e-15);
        let s = AnalyticCurve::ScaledShiftedExp {
            scale: 3.0,
            rate: 0.2,
            offset: 1.0,
        };
        assert_eq!(s.eval(0.0), 0.0);
        assert_relative_eq!(s.derivative(1, 2.0), 0.6 * 0.4f64.exp(), max_relative = 1e-15);
        assert_eq!(AnalyticCurve::Constant(4.0).derivative(1, 3.0), 0.0);
    }

    #[test]
    fn sums_and_differences() {
        let a = AnalyticCurve::Sum(vec![
            AnalyticCurve::Constant(1.0),
            AnalyticCurve::Exponential { scale: 1.0, rate: -1.0 },
        ]);
        let b = AnalyticCurve::Exponential { scale: 1.0, rate: -1.0 };
        let d = a.minus(&b);
        assert_eq!(d.quasi().exps, vec![]);
        assert_eq!(d.eval(3.0), 1.0);
        assert_eq!(a.limit_at_infinity(), Some(1.0));
        assert_eq!(AnalyticCurve::Polynomial(vec![0.0, 1.0]).limit_at_infinity(), None);
        assert_relative_eq!(a.derivative_curve(2).eval(0.5), (-0.5f64).exp(), max_relative = 1e-15);
    }

    #[test]
    fn sampling() {
        let c = AnalyticCurve::Exponential {
            scale: 0.05,
            rate: -0.1,
        }
        .sample(10.0, 100)
        .unwrap();
        assert_eq!(c.tail_value(), 0.0);
        assert_eq!(c.node(0), 0.05);
        let p = AnalyticCurve::Polynomial(vec![0.0, 1.0]).sample(2.0, 4).unwrap();
        assert_eq!(p.tail_value(), 2.0);
    }
}

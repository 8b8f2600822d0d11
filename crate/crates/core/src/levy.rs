//! Real-valued Lévy drivers: cumulant generating functions, moment conditions,
//! the martingale/drift split and exact-in-law path sampling.

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::{path_rng, PathRng};

/// Closed interval `[lo, hi]`.
pub type Interval = (f64, f64);

pub const DEFAULT_MOMENT_INTERVAL: Interval = (-2.0, 2.0);
pub const DEFAULT_WORKING_INTERVAL: Interval = (-1.0, 1.0);

/// Pure-jump families for which only the cumulant is provided.
#[derive(Debug, Clone, PartialEq)]
pub enum JumpFamily {
    /// Normal inverse Gaussian without drift: `Ψ(z) = δ(√(α²−β²) − √(α²−(β+z)²))`.
    NormalInverseGaussian { alpha: f64, beta: f64, delta: f64 },
    /// Difference of two independent gamma processes.
    BilateralGamma {
        alpha_plus: f64,
        lambda_plus: f64,
        alpha_minus: f64,
        lambda_minus: f64,
    },
}

impl JumpFamily {
    /// Builds a family from a name and a flat parameter vector.
    pub fn from_name(name: &str, params: &[f64]) -> Result<Self> {
        let fam = match (name, params) {
            ("nig" | "normal_inverse_gaussian", &[alpha, beta, delta]) => {
                JumpFamily::NormalInverseGaussian { alpha, beta, delta }
            }
            ("bilateral_gamma", &[alpha_plus, lambda_plus, alpha_minus, lambda_minus]) => JumpFamily::BilateralGamma {
                alpha_plus,
                lambda_plus,
                alpha_minus,
                lambda_minus,
            },
            _ => {
                return Err(Error::InvalidModel(format!(
                    "unknown jump family `{name}` with {} parameters",
                    params.len()
                )))
            }
        };
        fam.validate()?;
        Ok(fam)
    }

    pub fn name(&self) -> &'static str {
        match self {
            JumpFamily::NormalInverseGaussian { .. } => "nig",
            JumpFamily::BilateralGamma { .. } => "bilateral_gamma",
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            JumpFamily::NormalInverseGaussian { alpha, beta, delta } => {
                alpha > 0.0 && beta.abs() < alpha && delta > 0.0
            }
            JumpFamily::BilateralGamma {
                alpha_plus,
                lambda_plus,
                alpha_minus,
                lambda_minus,
            } => alpha_plus > 0.0 && lambda_plus > 0.0 && alpha_minus > 0.0 && lambda_minus > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidModel(format!("invalid parameters for {self:?}")))
        }
    }

    /// Open interval on which `∫_{|x|>1} e^{zx} F(dx)` is finite.
    fn natural_domain(&self) -> Interval {
        match *self {
            JumpFamily::NormalInverseGaussian { alpha, beta, .. } => (-alpha - beta, alpha - beta),
            JumpFamily::BilateralGamma {
                lambda_plus,
                lambda_minus,
                ..
            } => (-lambda_minus, lambda_plus),
        }
    }

    fn derivatives(&self, z: f64) -> [f64; 4] {
        match *self {
            JumpFamily::NormalInverseGaussian { alpha, beta, delta } => {
                let a2 = alpha * alpha;
                let u = beta + z;
                let root = (a2 - u * u).sqrt();
                [
                    delta * ((a2 - beta * beta).sqrt() - root),
                    delta * u / root,
                    delta * a2 / root.powi(3),
                    3.0 * delta * a2 * u / root.powi(5),
                ]
            }
            JumpFamily::BilateralGamma {
                alpha_plus: ap,
                lambda_plus: lp,
                alpha_minus: am,
                lambda_minus: lm,
            } => {
                let p = lp - z;
                let m = lm + z;
                [
                    ap * (lp / p).ln() + am * (lm / m).ln(),
                    ap / p - am / m,
                    ap / (p * p) + am / (m * m),
                    2.0 * ap / p.powi(3) - 2.0 * am / m.powi(3),
                ]
            }
        }
    }
}

/// Which Lévy process drives one coordinate.
#[derive(Debug, Clone, PartialEq)]
pub enum LevyKind {
    Brownian {
        volatility: f64,
    },
    Poisson {
        intensity: f64,
    },
    CompoundPoissonNormal {
        intensity: f64,
        jump_mean: f64,
        jump_std: f64,
    },
    ParametricJump(JumpFamily),
}

impl LevyKind {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            LevyKind::Brownian { volatility } => volatility > 0.0,
            LevyKind::Poisson { intensity } => intensity > 0.0,
            LevyKind::CompoundPoissonNormal {
                intensity,
                jump_mean,
                jump_std,
            } => intensity > 0.0 && jump_mean.is_finite() && jump_std > 0.0,
            LevyKind::ParametricJump(ref f) => return f.validate(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidModel(format!("invalid parameters for {self:?}")))
        }
    }

    fn natural_domain(&self) -> Interval {
        match self {
            LevyKind::ParametricJump(f) => f.natural_domain(),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    /// `[Ψ, Ψ', Ψ'', Ψ''']` at `z`, without domain checks.
    fn derivatives(&self, z: f64) -> [f64; 4] {
        match *self {
            LevyKind::Brownian { volatility } => {
                let v = volatility * volatility;
                [0.5 * v * z * z, v * z, v, 0.0]
            }
            LevyKind::Poisson { intensity } => {
                let e = intensity * z.exp();
                [e - intensity, e, e, e]
            }
            LevyKind::CompoundPoissonNormal {
                intensity,
                jump_mean,
                jump_std,
            } => {
                let s2 = jump_std * jump_std;
                let g1 = jump_mean + s2 * z;
                let e = intensity * (jump_mean * z + 0.5 * s2 * z * z).exp();
                [
                    e - intensity,
                    g1 * e,
                    (g1 * g1 + s2) * e,
                    (g1 * g1 * g1 + 3.0 * s2 * g1) * e,
                ]
            }
            LevyKind::ParametricJump(ref f) => f.derivatives(z),
        }
    }
}

/// One real-valued Lévy driver with the intervals on which its cumulant is used.
///
/// `Ψ(z) = Ψ_kind(z) + linear_drift · z`, where `linear_drift` is an extra
/// deterministic slope (used for compensated processes).
#[derive(Debug, Clone, PartialEq)]
pub struct LevyModel {
    kind: LevyKind,
    linear_drift: f64,
    moment_interval: Interval,
    working_interval: Interval,
}

impl LevyModel {
    /// Model with the default intervals `[-2, 2]` / `[-1, 1]`.
    pub fn new(kind: LevyKind) -> Result<Self> {
        Self::with_intervals(kind, DEFAULT_MOMENT_INTERVAL, DEFAULT_WORKING_INTERVAL)
    }

    pub fn with_intervals(kind: LevyKind, moment: Interval, working: Interval) -> Result<Self> {
        kind.validate()?;
        let m = LevyModel {
            kind,
            linear_drift: 0.0,
            moment_interval: moment,
            working_interval: working,
        };
        m.validate_intervals()?;
        Ok(m)
    }

    pub fn brownian(volatility: f64) -> Result<Self> {
        Self::new(LevyKind::Brownian { volatility })
    }

    pub fn poisson(intensity: f64) -> Result<Self> {
        Self::new(LevyKind::Poisson { intensity })
    }

    pub fn compound_poisson_normal(intensity: f64, jump_mean: f64, jump_std: f64) -> Result<Self> {
        Self::new(LevyKind::CompoundPoissonNormal {
            intensity,
            jump_mean,
            jump_std,
        })
    }

    /// Returns a copy with an additional linear drift `b` (so `Ψ(z) += b z`).
    pub fn with_linear_drift(mut self, b: f64) -> Self {
        self.linear_drift += b;
        self
    }

    fn validate_intervals(&self) -> Result<()> {
        let (a, b) = self.moment_interval;
        let (c, d) = self.working_interval;
        if !(a < 0.0 && 0.0 < b) {
            return Err(Error::InvalidModel(format!(
                "moment interval [{a}, {b}] must contain 0 as an inner point"
            )));
        }
        if !(c < 0.0 && 0.0 < d) {
            return Err(Error::InvalidModel(format!(
                "working interval [{c}, {d}] must contain 0 as an inner point"
            )));
        }
        if !(a < c && d < b) {
            return Err(Error::InvalidModel(format!(
                "working interval [{c}, {d}] must lie strictly inside the moment interval [{a}, {b}]"
            )));
        }
        if !check_exponential_moments(self, self.moment_interval) {
            return Err(Error::InvalidModel(format!(
                "exponential moments fail on [{a}, {b}] for {:?}",
                self.kind
            )));
        }
        Ok(())
    }

    pub fn kind(&self) -> &LevyKind {
        &self.kind
    }

    pub fn linear_drift(&self) -> f64 {
        self.linear_drift
    }

    pub fn moment_interval(&self) -> Interval {
        self.moment_interval
    }

    pub fn working_interval(&self) -> Interval {
        self.working_interval
    }

    /// Gaussian coefficient `c` of the characteristic triplet.
    pub fn gaussian_part(&self) -> f64 {
        match self.kind {
            LevyKind::Brownian { volatility } => volatility * volatility,
            _ => 0.0,
        }
    }

    /// `∫ x² F(dx)` for the Lévy measure `F`.
    pub fn levy_measure_second_moment(&self) -> f64 {
        match self.kind {
            LevyKind::Brownian { .. } => 0.0,
            LevyKind::Poisson { intensity } => intensity,
            LevyKind::CompoundPoissonNormal {
                intensity,
                jump_mean,
                jump_std,
            } => intensity * (jump_mean * jump_mean + jump_std * jump_std),
            LevyKind::ParametricJump(ref f) => f.derivatives(0.0)[2],
        }
    }

    /// `b = E[X_1] = Ψ'(0)`.
    pub fn mean_slope(&self) -> f64 {
        self.kind.derivatives(0.0)[1] + self.linear_drift
    }

    /// Whether the driver has a jump component that is sampled with exact jump times.
    pub fn has_finite_activity_jumps(&self) -> bool {
        matches!(
            self.kind,
            LevyKind::Poisson { .. } | LevyKind::CompoundPoissonNormal { .. }
        )
    }

    /// `[Ψ, Ψ', Ψ'', Ψ''']` at `z` without domain validation.
    pub fn cumulant_derivatives(&self, z: f64) -> [f64; 4] {
        let mut d = self.kind.derivatives(z);
        d[0] += self.linear_drift * z;
        d[1] += self.linear_drift;
        d
    }

    /// `Ψ^(order)(z)`; `z` must lie in the moment interval.
    pub fn cumulant(&self, z: f64, order: u32) -> Result<f64> {
        if order > 3 {
            return Err(Error::UnsupportedOrder(order));
        }
        let (lo, hi) = self.moment_interval;
        if !(lo..=hi).contains(&z) {
            return Err(Error::OutOfDomain { z, lo, hi });
        }
        Ok(self.cumulant_derivatives(z)[order as usize])
    }

    /// Splits `X_t = M_t + b t`; returns `b` and the model of `M`.
    pub fn decompose(&self) -> (f64, LevyModel) {
        let b = self.mean_slope();
        (b, self.clone().with_linear_drift(-b))
    }

    /// Rate of the predictable quadratic variation: `⟨M,M⟩_t = (c + ∫x²F(dx)) t`.
    pub fn predictable_qv_rate(&self) -> f64 {
        self.gaussian_part() + self.levy_measure_second_moment()
    }
}

/// Decides `∫_{|x|>1} e^{zx} F(dx) < ∞` for every `z` in `interval`.
pub fn check_exponential_moments(model: &LevyModel, interval: Interval) -> bool {
    let (lo, hi) = model.kind.natural_domain();
    lo < interval.0 && interval.1 < hi
}

/// Uniform time grid `k · dt`, `k = 0..=n_steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathGrid {
    t_max: f64,
    n_steps: usize,
}

impl PathGrid {
    pub fn new(t_max: f64, n_steps: usize) -> Result<Self> {
        if !(t_max > 0.0 && t_max.is_finite()) || n_steps == 0 {
            return Err(Error::InvalidGrid(format!(
                "need t_max > 0 and n_steps > 0, got {t_max}, {n_steps}"
            )));
        }
        Ok(PathGrid { t_max, n_steps })
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.t_max / self.n_steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.t_max
        } else {
            k as f64 * self.dt()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|k| self.time(k)).collect()
    }

    /// Node index of `t` when `t` lies on the grid.
    pub fn node_index(&self, t: f64) -> Option<usize> {
        let r = t / self.dt();
        let k = r.round();
        if (r - k).abs() <= 1e-9 * r.abs().max(1.0) && k >= 0.0 && k as usize <= self.n_steps {
            Some(k as usize)
        } else {
            None
        }
    }
}

/// A jump of the driver at an exact time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    pub time: f64,
    pub size: f64,
}

/// A sampled driver path. `values[k] = X_{k dt}`; for finite-activity jump
/// drivers every jump is also recorded with its exact time, so the path can
/// be evaluated off the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LevyPath {
    pub grid: PathGrid,
    pub values: Vec<f64>,
    pub jumps: Option<Vec<Jump>>,
    gaussian: Option<Vec<f64>>,
    drift_rate: f64,
}

impl LevyPath {
    /// Builds a path from grid values only (no jump record).
    pub fn from_values(grid: PathGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_steps + 1 {
            return Err(Error::InvalidGrid(format!(
                "expected {} values, got {}",
                grid.n_steps + 1,
                values.len()
            )));
        }
        Ok(LevyPath {
            grid,
            gaussian: Some(values.clone()),
            values,
            jumps: None,
            drift_rate: 0.0,
        })
    }

    /// Pure-jump path (plus deterministic drift) from an exact jump record.
    pub fn from_jumps(grid: PathGrid, mut jumps: Vec<Jump>, drift_rate: f64) -> Self {
        jumps.sort_by(|a, b| a.time.total_cmp(&b.time));
        let mut values = Vec::with_capacity(grid.n_steps + 1);
        let mut j = 0;
        let mut acc = 0.0;
        for k in 0..=grid.n_steps {
            let t = grid.time(k);
            while j < jumps.len() && jumps[j].time <= t {
                acc += jumps[j].size;
                j += 1;
            }
            values.push(acc + drift_rate * t);
        }
        values[0] = 0.0;
        LevyPath {
            grid,
            values,
            jumps: Some(jumps),
            gaussian: None,
            drift_rate,
        }
    }

    pub(crate) fn continuous_at(&self, t: f64) -> f64 {
        let base = self.drift_rate * t;
        match &self.gaussian {
            None => base,
            Some(g) => {
                if let Some(k) = self.grid.node_index(t) {
                    return base + g[k];
                }
                let dt = self.grid.dt();
                let k = ((t / dt).floor() as usize).min(self.grid.n_steps - 1);
                let w = (t - k as f64 * dt) / dt;
                base + (1.0 - w) * g[k] + w * g[k + 1]
            }
        }
    }

    fn jump_sum(&self, t: f64, inclusive: bool) -> f64 {
        match &self.jumps {
            None => 0.0,
            Some(js) => js
                .iter()
                .take_while(|j| if inclusive { j.time <= t } else { j.time < t })
                .map(|j| j.size)
                .sum(),
        }
    }

    /// `X_t` (càdlàg value). Between grid nodes the continuous Gaussian part is
    /// interpolated linearly; jumps and deterministic drift are exact.
    pub fn value_at(&self, t: f64) -> f64 {
        if self.jumps.is_none() {
            if let Some(k) = self.grid.node_index(t) {
                return self.values[k];
            }
        }
        self.continuous_at(t) + self.jump_sum(t, true)
    }

    /// `X_{t-}`.
    pub fn left_limit(&self, t: f64) -> f64 {
        if self.jumps.is_none() {
            return self.value_at(t);
        }
        self.continuous_at(t) + self.jump_sum(t, false)
    }

    /// `X_t` (or `X_{t-}` when `left`) at non-decreasing times, in one pass
    /// over the jump record.
    pub fn values_at_sorted(&self, times: &[f64], left: bool) -> Vec<f64> {
        let jumps = self.jumps.as_deref().unwrap_or(&[]);
        let mut j = 0;
        let mut acc = 0.0;
        times
            .iter()
            .map(|&t| {
                while j < jumps.len() && (jumps[j].time < t || (!left && jumps[j].time == t)) {
                    acc += jumps[j].size;
                    j += 1;
                }
                if self.jumps.is_none() {
                    if let Some(k) = self.grid.node_index(t) {
                        return self.values[k];
                    }
                }
                self.continuous_at(t) + acc
            })
            .collect()
    }

    /// Grid increments `X_{(k+1)dt} − X_{k dt}`.
    pub fn increments(&self) -> Vec<f64> {
        self.values.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Values of the continuous (Gaussian + drift) part on the grid.
    pub fn continuous_values(&self) -> Vec<f64> {
        (0..=self.grid.n_steps)
            .map(|k| self.continuous_at(self.grid.time(k)))
            .collect()
    }

    pub fn jump_count(&self) -> usize {
        self.jumps.as_ref().map_or(0, Vec::len)
    }
}

/// Samples a path with the stream `(seed, 0)`.
pub fn sample_path(model: &LevyModel, grid: PathGrid, seed: u64) -> Result<LevyPath> {
    sample_path_with(model, grid, &mut path_rng(seed, 0))
}

/// Samples `n` independent paths, path `i` from stream `(seed, i)`.
pub fn sample_paths(model: &LevyModel, grid: PathGrid, seed: u64, n: usize) -> Result<Vec<LevyPath>> {
    (0..n)
        .map(|i| sample_path_with(model, grid, &mut path_rng(seed, i as u64)))
        .collect()
}

/// Exact-in-law sampling: Gaussian increments for Brownian drivers,
/// exponential inter-arrival clocks with recorded jump times for jump drivers.
pub fn sample_path_with(model: &LevyModel, grid: PathGrid, rng: &mut PathRng) -> Result<LevyPath> {
    let drift = model.linear_drift;
    match *model.kind() {
        LevyKind::Brownian { volatility } => {
            let sd = volatility * grid.dt().sqrt();
            let mut g = Vec::with_capacity(grid.n_steps + 1);
            let mut acc = 0.0;
            g.push(0.0);
            for _ in 0..grid.n_steps {
                let z: f64 = StandardNormal.sample(rng);
                acc += sd * z;
                g.push(acc);
            }
            let values = (0..=grid.n_steps).map(|k| g[k] + drift * grid.time(k)).collect();
            Ok(LevyPath {
                grid,
                values,
                jumps: None,
                gaussian: Some(g),
                drift_rate: drift,
            })
        }
        LevyKind::Poisson { intensity } => {
            let times = arrival_times(intensity, grid.t_max, rng);
            let jumps = times.into_iter().map(|time| Jump { time, size: 1.0 }).collect();
            Ok(LevyPath::from_jumps(grid, jumps, drift))
        }
        LevyKind::CompoundPoissonNormal {
            intensity,
            jump_mean,
            jump_std,
        } => {
            let times = arrival_times(intensity, grid.t_max, rng);
            let sizes = Normal::new(jump_mean, jump_std).map_err(|e| Error::InvalidModel(e.to_string()))?;
            let jumps = times
                .into_iter()
                .map(|time| Jump {
                    time,
                    size: sizes.sample(rng),
                })
                .collect();
            Ok(LevyPath::from_jumps(grid, jumps, drift))
        }
        LevyKind::ParametricJump(ref f) => Err(Error::SamplingUnsupported(f.name().into())),
    }
}

fn arrival_times<R: Rng>(intensity: f64, t_max: f64, rng: &mut R) -> Vec<f64> {
    let clock = Exp::new(intensity).expect("positive intensity");
    let mut out = Vec::new();
    let mut t = 0.0;
    loop {
        t += clock.sample(rng);
        if t > t_max {
            return out;
        }
        out.push(t);
    }
}

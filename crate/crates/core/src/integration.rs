//! Dyadic-partition stochastic integrals against Lévy drivers, the pathwise
//! left-limit integral, and Monte Carlo diagnostics (isometry, Doob).

use crate::curves::{norm_w_unchecked, ForwardCurve, NormVariant, WeightSpec};
use crate::error::{Error, Result};
use crate::levy::{LevyPath, PathGrid};

pub const DEFAULT_LEVEL_CAP: u32 = 22;

/// Partition `t_i = i 2^{-n} T`, `i = 0..=2^n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DyadicLevel {
    n: u32,
}

impl DyadicLevel {
    pub fn new(n: u32) -> Result<Self> {
        Self::with_cap(n, DEFAULT_LEVEL_CAP)
    }

    pub fn with_cap(n: u32, cap: u32) -> Result<Self> {
        if n > cap {
            return Err(Error::LevelTooDeep { level: n, cap });
        }
        Ok(DyadicLevel { n })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn cells(&self) -> usize {
        1usize << self.n
    }

    pub fn times(&self, t_max: f64) -> Vec<f64> {
        let m = self.cells();
        (0..=m).map(|i| t_max * i as f64 / m as f64).collect()
    }
}

/// How a sampled integrand behaves between its sample times.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regularity {
    /// Value at `t_k` holds on `[t_k, t_{k+1})`.
    Cadlag,
    /// Value at `t_k` holds on `(t_{k-1}, t_k]`.
    LeftContinuous,
}

/// A real-valued integrand process `Φ`.
#[derive(Debug, Clone, PartialEq)]
pub enum IntegrandPath {
    Constant(f64),
    /// `Φ_s = intercept + slope · s`.
    Ramp {
        intercept: f64,
        slope: f64,
    },
    /// `Φ_s = scale · X_s` for a driver path `X`.
    Driver {
        path: LevyPath,
        scale: f64,
    },
    Sampled {
        grid: PathGrid,
        values: Vec<f64>,
        regularity: Regularity,
    },
    /// `Σ c_k Φ_k`.
    Combination(Vec<(f64, IntegrandPath)>),
}

impl IntegrandPath {
    pub fn sampled(grid: PathGrid, values: Vec<f64>, regularity: Regularity) -> Result<Self> {
        if values.len() != grid.n_steps() + 1 {
            return Err(Error::InvalidGrid(format!(
                "expected {} integrand values, got {}",
                grid.n_steps() + 1,
                values.len()
            )));
        }
        Ok(IntegrandPath::Sampled {
            grid,
            values,
            regularity,
        })
    }

    /// `Φ_t` (or `Φ_{t-}` when `left`) at non-decreasing times.
    pub fn values_at_sorted(&self, times: &[f64], left: bool) -> Vec<f64> {
        match self {
            IntegrandPath::Constant(c) => vec![*c; times.len()],
            IntegrandPath::Ramp { intercept, slope } => times.iter().map(|t| intercept + slope * t).collect(),
            IntegrandPath::Driver { path, scale } => {
                let v = path.values_at_sorted(times, left);
                if *scale == 1.0 {
                    v
                } else {
                    v.into_iter().map(|x| scale * x).collect()
                }
            }
            IntegrandPath::Sampled {
                grid,
                values,
                regularity,
            } => times
                .iter()
                .map(|&t| values[sample_index(grid, *regularity, t, left)])
                .collect(),
            IntegrandPath::Combination(parts) => {
                let mut out = vec![0.0; times.len()];
                for (c, p) in parts {
                    for (o, v) in out.iter_mut().zip(p.values_at_sorted(times, left)) {
                        *o += c * v;
                    }
                }
                out
            }
        }
    }
}

fn sample_index(grid: &PathGrid, regularity: Regularity, t: f64, left: bool) -> usize {
    let last = grid.n_steps();
    let on_node = grid.node_index(t);
    let r = t / grid.dt();
    let idx = match (regularity, on_node) {
        (Regularity::Cadlag, Some(k)) if left && k > 0 => k - 1,
        (Regularity::Cadlag, Some(k)) => k,
        (Regularity::Cadlag, None) => r.floor() as usize,
        (Regularity::LeftContinuous, Some(k)) => k,
        (Regularity::LeftContinuous, None) => r.ceil() as usize,
    };
    idx.min(last)
}

/// Dyadic approximant of the integral at every partition time.
#[derive(Debug, Clone, PartialEq)]
pub struct DyadicIntegral {
    pub level: DyadicLevel,
    pub times: Vec<f64>,
    /// `G^n_t = Σ Φ_{t_i} (X_{t_{i+1}} − X_{t_i})`.
    pub g: Vec<f64>,
    /// `I^n_t`, the part against the martingale `M_t = X_t − b t`.
    pub martingale_part: Vec<f64>,
    /// `J^n_t = Σ Φ_{t_i} (t_{i+1} − t_i)`.
    pub time_part: Vec<f64>,
}

impl DyadicIntegral {
    pub fn terminal(&self) -> f64 {
        *self.g.last().expect("partition has at least one cell")
    }
}

/// `G^n(Φ) = I^n(Φ) + b J^n(Φ)` with `Φ` taken at the left partition points
/// (the càdlàg value, jumps at `t_i` included).
pub fn g_integral_approx(phi: &IntegrandPath, x: &LevyPath, level: DyadicLevel, mean_slope: f64) -> DyadicIntegral {
    let times = level.times(x.grid.t_max());
    let xs = x.values_at_sorted(&times, false);
    let ps = phi.values_at_sorted(&times, false);
    accumulate(level, times, &xs, &ps, mean_slope)
}

/// Left-point sums `Σ Φ_{t_i-} (X_{t_{i+1}} − X_{t_i})` on the same partition.
pub fn left_point_sum(phi: &IntegrandPath, x: &LevyPath, level: DyadicLevel) -> Vec<f64> {
    let times = level.times(x.grid.t_max());
    let xs = x.values_at_sorted(&times, false);
    let ps = phi.values_at_sorted(&times, true);
    accumulate(level, times, &xs, &ps, 0.0).g
}

fn accumulate(level: DyadicLevel, times: Vec<f64>, xs: &[f64], ps: &[f64], b: f64) -> DyadicIntegral {
    let m = level.cells();
    let mut g = Vec::with_capacity(m + 1);
    let mut j = Vec::with_capacity(m + 1);
    let (mut ga, mut ja) = (0.0, 0.0);
    g.push(0.0);
    j.push(0.0);
    for i in 0..m {
        ga += ps[i] * (xs[i + 1] - xs[i]);
        ja += ps[i] * (times[i + 1] - times[i]);
        g.push(ga);
        j.push(ja);
    }
    let martingale_part = g.iter().zip(&j).map(|(g, j)| g - b * j).collect();
    DyadicIntegral {
        level,
        times,
        g,
        martingale_part,
        time_part: j,
    }
}

/// Pathwise integral at the given non-decreasing times: left-point Riemann
/// sums against the continuous part on the sample grid plus `Σ Φ_{τ-} ΔX_τ`
/// over recorded jumps. With `left_limit = false` the jump term uses `Φ_τ`.
pub fn stieltjes_at(phi: &IntegrandPath, x: &LevyPath, times: &[f64], left_limit: bool) -> Vec<f64> {
    let grid_times = x.grid.times();
    let cont = x.continuous_values();
    let phi_grid = phi.values_at_sorted(&grid_times, false);
    // prefix[k] = Σ_{l<k} Φ_{t_l} (C_{l+1} − C_l)
    let mut prefix = Vec::with_capacity(cont.len());
    let mut acc = 0.0;
    prefix.push(0.0);
    for k in 0..cont.len() - 1 {
        acc += phi_grid[k] * (cont[k + 1] - cont[k]);
        prefix.push(acc);
    }
    let jumps = x.jumps.as_deref().unwrap_or(&[]);
    let jump_times: Vec<f64> = jumps.iter().map(|j| j.time).collect();
    let phi_jump = phi.values_at_sorted(&jump_times, left_limit);
    let mut ji = 0;
    let mut jump_acc = 0.0;
    let dt = x.grid.dt();
    let n = x.grid.n_steps();
    times
        .iter()
        .map(|&t| {
            while ji < jumps.len() && jumps[ji].time <= t {
                jump_acc += phi_jump[ji] * jumps[ji].size;
                ji += 1;
            }
            let continuous = match x.grid.node_index(t) {
                Some(k) => prefix[k],
                None => {
                    let k = ((t / dt).floor() as usize).min(n - 1);
                    prefix[k] + phi_grid[k] * (x.continuous_at(t) - cont[k])
                }
            };
            continuous + jump_acc
        })
        .collect()
}

/// `∫_0^t Φ_{s-} dX_s` at the grid times of `x`.
pub fn stieltjes_left_limit(phi: &IntegrandPath, x: &LevyPath) -> Vec<f64> {
    stieltjes_at(phi, x, &x.grid.times(), true)
}

/// The pathwise integral with `Φ_τ` (jump included) at jump times.
pub fn stieltjes_full(phi: &IntegrandPath, x: &LevyPath) -> Vec<f64> {
    stieltjes_at(phi, x, &x.grid.times(), false)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyRow {
    pub level: u32,
    /// `max_i |G^n_{t_i} − ∫_0^{t_i} Φ_{s-} dX_s|`
    pub max_discrepancy: f64,
    /// Discrepancy at the terminal time.
    pub terminal_discrepancy: f64,
}

/// Compares dyadic approximants with the left-limit integral at each level.
pub fn consistency_check(phi: &IntegrandPath, x: &LevyPath, levels: &[DyadicLevel]) -> Vec<ConsistencyRow> {
    levels
        .iter()
        .map(|&level| {
            let g = g_integral_approx(phi, x, level, 0.0);
            let s = stieltjes_at(phi, x, &g.times, true);
            let diffs: Vec<f64> = g.g.iter().zip(&s).map(|(a, b)| (a - b).abs()).collect();
            ConsistencyRow {
                level: level.n(),
                max_discrepancy: diffs.iter().copied().fold(0.0, f64::max),
                terminal_discrepancy: *diffs.last().unwrap(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CauchyReport {
    /// `(n, RMS |G^n_T − G^{n-1}_T|)` over the ensemble.
    pub gaps: Vec<(u32, f64)>,
    /// First level whose gap is below `rel_tol` times the RMS of `G^n_T`.
    pub converged_level: Option<u32>,
}

/// Refines the partition until the level-to-level RMS gap falls below a
/// relative tolerance (default 1e-4 in callers).
pub fn dyadic_cauchy(
    ensemble: &[(IntegrandPath, LevyPath)],
    start: u32,
    max_level: u32,
    rel_tol: f64,
) -> Result<CauchyReport> {
    let terminal = |n: u32| -> Result<Vec<f64>> {
        let level = DyadicLevel::new(n)?;
        Ok(ensemble
            .iter()
            .map(|(phi, x)| g_integral_approx(phi, x, level, 0.0).terminal())
            .collect())
    };
    let rms = |v: &[f64]| (v.iter().map(|x| x * x).sum::<f64>() / v.len().max(1) as f64).sqrt();
    let mut prev = terminal(start)?;
    let mut gaps = Vec::new();
    for n in start + 1..=max_level {
        let cur = terminal(n)?;
        let d: Vec<f64> = cur.iter().zip(&prev).map(|(a, b)| a - b).collect();
        let gap = rms(&d);
        gaps.push((n, gap));
        if gap <= rel_tol * rms(&cur) {
            return Ok(CauchyReport {
                gaps,
                converged_level: Some(n),
            });
        }
        prev = cur;
    }
    Ok(CauchyReport {
        gaps,
        converged_level: None,
    })
}

/// Dyadic integral of a curve-valued integrand, coordinatewise on the
/// maturity grid; returns the terminal curve.
pub fn g_integral_curve<F>(phi: F, x: &LevyPath, level: DyadicLevel) -> Result<ForwardCurve>
where
    F: Fn(f64) -> ForwardCurve,
{
    let times = level.times(x.grid.t_max());
    let xs = x.values_at_sorted(&times, false);
    let mut acc: Option<ForwardCurve> = None;
    for i in 0..level.cells() {
        let term = phi(times[i]).scaled(xs[i + 1] - xs[i]);
        acc = Some(match acc {
            None => term,
            Some(a) => a.combine(1.0, &term, 1.0)?,
        });
    }
    Ok(acc.expect("at least one cell"))
}

/// RMS over the ensemble of `‖G^{n+1}_T − G^n_T‖_w` for a curve-valued integrand.
pub fn curve_level_gap<F>(phi: F, paths: &[LevyPath], level: DyadicLevel, weight: &WeightSpec) -> Result<f64>
where
    F: Fn(f64) -> ForwardCurve,
{
    let finer = DyadicLevel::new(level.n() + 1)?;
    let mut s = 0.0;
    for x in paths {
        let d = g_integral_curve(&phi, x, finer)?.combine(1.0, &g_integral_curve(&phi, x, level)?, -1.0)?;
        s += norm_w_unchecked(&d, weight, NormVariant::Tehranchi);
    }
    Ok((s / paths.len().max(1) as f64).sqrt())
}

/// Mean and standard error of a sample.
pub fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, 0.0);
    }
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsometryReport {
    /// `E |Σ ΔM_i Z_i|²`
    pub lhs: f64,
    pub lhs_se: f64,
    /// `E Σ Δ⟨M,M⟩_i Z_i²`
    pub rhs: f64,
    pub rhs_se: f64,
    /// Standard error of the paired difference.
    pub diff_se: f64,
    pub passed: bool,
}

/// Monte Carlo check of the isometry for elementary integrands. `z(path, t_i)`
/// must only look at the path up to `t_i`; `paths` are martingale paths.
pub fn isometry_check<Z>(paths: &[LevyPath], qv_rate: f64, level: DyadicLevel, z: Z) -> IsometryReport
where
    Z: Fn(&LevyPath, f64) -> f64,
{
    let mut lhs = Vec::with_capacity(paths.len());
    let mut rhs = Vec::with_capacity(paths.len());
    for m in paths {
        let times = level.times(m.grid.t_max());
        let ms = m.values_at_sorted(&times, false);
        let (mut s, mut q) = (0.0, 0.0);
        for i in 0..level.cells() {
            let zi = z(m, times[i]);
            s += (ms[i + 1] - ms[i]) * zi;
            q += qv_rate * (times[i + 1] - times[i]) * zi * zi;
        }
        lhs.push(s * s);
        rhs.push(q);
    }
    let diff: Vec<f64> = lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect();
    let (l, lse) = mean_se(&lhs);
    let (r, rse) = mean_se(&rhs);
    let (d, dse) = mean_se(&diff);
    IsometryReport {
        lhs: l,
        lhs_se: lse,
        rhs: r,
        rhs_se: rse,
        diff_se: dse,
        passed: d.abs() <= 4.0 * dse || d.abs() <= 1e-12 * l.abs().max(r.abs()).max(f64::MIN_POSITIVE),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoobReport {
    /// `E sup_t |Φ_t|²`
    pub lhs: f64,
    /// `E |Φ_T|²`
    pub rhs: f64,
    /// Standard error of `sup |Φ|² − 4|Φ_T|²`.
    pub se: f64,
    /// `lhs / rhs`.
    pub ratio: f64,
    pub passed: bool,
}

/// Doob's L² maximal inequality on an ensemble of sampled martingale paths.
pub fn doob_check(paths: &[Vec<f64>]) -> DoobReport {
    let sup: Vec<f64> = paths
        .iter()
        .map(|p| p.iter().fold(0.0f64, |m, x| m.max(x * x)))
        .collect();
    let term: Vec<f64> = paths.iter().map(|p| p.last().map_or(0.0, |x| x * x)).collect();
    let diff: Vec<f64> = sup.iter().zip(&term).map(|(s, t)| s - 4.0 * t).collect();
    let (lhs, _) = mean_se(&sup);
    let (rhs, _) = mean_se(&term);
    let (_, se) = mean_se(&diff);
    DoobReport {
        lhs,
        rhs,
        se,
        ratio: if rhs == 0.0 { f64::NAN } else { lhs / rhs },
        passed: lhs <= 4.0 * rhs + 4.0 * se,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::Jump;

    fn poisson_path() -> LevyPath {
        let grid = PathGrid::new(4.0, 4).unwrap();
        LevyPath::from_jumps(
            grid,
            [0.7, 1.9, 2.2, 3.6]
                .iter()
                .map(|&time| Jump { time, size: 1.0 })
                .collect(),
            0.0,
        )
    }

    #[test]
    fn constant_integrand_telescopes() {
        let x = poisson_path();
        for n in 0..6 {
            let g = g_integral_approx(&IntegrandPath::Constant(1.0), &x, DyadicLevel::new(n).unwrap(), 0.0);
            let xs = x.values_at_sorted(&g.times, false);
            assert_eq!(g.g, xs);
        }
    }

    #[test]
    fn poisson_identity() {
        let x = poisson_path();
        let phi = IntegrandPath::Driver {
            path: x.clone(),
            scale: 1.0,
        };
        let g = g_integral_approx(&phi, &x, DyadicLevel::new(4).unwrap(), 0.0);
        let xs = x.values_at_sorted(&g.times, false);
        for (gi, xi) in g.g.iter().zip(&xs) {
            assert_eq!(*gi, 0.5 * (xi * xi - xi));
        }
        let full = stieltjes_full(&phi, &x);
        let left = stieltjes_left_limit(&phi, &x);
        for (k, v) in x.values.iter().enumerate() {
            assert_eq!(full[k], 0.5 * (v * v + v));
            assert_eq!(left[k], 0.5 * (v * v - v));
        }
        // coarse partitions that merge two jumps disagree
        let coarse = g_integral_approx(&phi, &x, DyadicLevel::new(1).unwrap(), 0.0);
        assert_ne!(coarse.terminal(), 6.0);
    }

    #[test]
    fn level_cap() {
        assert!(DyadicLevel::new(22).is_ok());
        assert!(matches!(
            DyadicLevel::new(23),
            Err(Error::LevelTooDeep { level: 23, cap: 22 })
        ));
        assert!(DyadicLevel::with_cap(10, 8).is_err());
    }

    #[test]
    fn sampled_regularity() {
        let grid = PathGrid::new(1.0, 4).unwrap();
        let v = vec![0.0, 1.0, 2.0, 3.0, 4.0];
        let c = IntegrandPath::sampled(grid, v.clone(), Regularity::Cadlag).unwrap();
        let l = IntegrandPath::sampled(grid, v, Regularity::LeftContinuous).unwrap();
        let t = [0.25, 0.3];
        assert_eq!(c.values_at_sorted(&t, false), vec![1.0, 1.0]);
        assert_eq!(c.values_at_sorted(&t, true), vec![0.0, 1.0]);
        assert_eq!(l.values_at_sorted(&t, false), vec![1.0, 2.0]);
        assert_eq!(l.values_at_sorted(&t, true), vec![1.0, 2.0]);
    }

    #[test]
    fn doob_constant_path() {
        let r = doob_check(&[vec![1.0, 1.0, 1.0], vec![-2.0, -2.0]]);
        assert_eq!(r.ratio, 1.0);
        assert!(r.passed);
    }
}

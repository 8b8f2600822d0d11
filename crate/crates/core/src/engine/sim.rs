//! The exact-shift Euler scheme, bond prices and the Monte Carlo ensemble.

use rayon::prelude::*;

use crate::curves::ForwardCurve;
use crate::drift::{drift_into, DriftWorkspace};
use crate::engine::scenario::{EngineMode, SimulationScenario};
use crate::engine::volatility::BoundVolatility;
use crate::error::{Error, Result};
use crate::integration::mean_se;
use crate::levy::{sample_path_with, LevyModel, PathGrid};
use crate::quadrature::trapezoid;
use crate::rng::driver_rng;

/// `P = exp(−∫_0^tau r(x) dx)` by the trapezoid rule; `tau` must be a node.
pub fn bond_price(curve: &ForwardCurve, tau: f64) -> Result<f64> {
    Ok((-curve.integral_to(tau)?).exp())
}

/// `r(0)`.
pub fn short_rate(curve: &ForwardCurve) -> f64 {
    curve.node(0)
}

/// Advances curves by one time step of the scheme
/// `r ← S_dt r + S_dt α(r) dt + Σ_i S_dt σ_i(r) ΔX_i`,
/// with volatilities evaluated at the pre-step state.
#[derive(Debug, Clone)]
pub struct Stepper {
    vol: BoundVolatility,
    models: Vec<LevyModel>,
    clamp: bool,
    shift: usize,
    dt: f64,
    sigmas: Vec<ForwardCurve>,
    alpha: Vec<f64>,
    alpha_tail: f64,
    cached: bool,
    ws: DriftWorkspace,
}

impl Stepper {
    pub fn new(scenario: &SimulationScenario) -> Result<Self> {
        let h0 = &scenario.initial_curve;
        let vol = BoundVolatility::new(&scenario.volatility, h0.x_max(), h0.n_points())?;
        let sigmas = vol.basis.clone();
        Ok(Stepper {
            vol,
            models: scenario.models.clone(),
            clamp: scenario.clamp_exposure,
            shift: scenario.shift_nodes(),
            dt: scenario.dt,
            alpha: vec![0.0; h0.values().len()],
            alpha_tail: 0.0,
            sigmas,
            cached: false,
            ws: DriftWorkspace::default(),
        })
    }

    fn refresh(&mut self, state: &ForwardCurve) -> Result<usize> {
        if self.cached {
            return Ok(0);
        }
        self.vol.eval_into(state, &mut self.sigmas);
        let refs: Vec<&ForwardCurve> = self.sigmas.iter().collect();
        let out = drift_into(&refs, &self.models, &mut self.alpha, &mut self.ws, self.clamp)?;
        self.alpha_tail = out.tail_value;
        self.cached = self.vol.is_state_independent();
        Ok(out.clamps)
    }

    /// Current drift curve values (valid after a step).
    pub fn drift_values(&self) -> &[f64] {
        &self.alpha
    }

    /// One step in place; returns the number of clamped exposure nodes.
    pub fn step_into(&mut self, state: &mut ForwardCurve, increments: &[f64]) -> Result<usize> {
        let clamps = self.refresh(state)?;
        let k = self.shift;
        let dt = self.dt;
        let tail = state.tail_value();
        let sig_tails: Vec<f64> = self.sigmas.iter().map(|s| s.tail_value()).collect();
        let v = state.values_mut();
        let n = v.len();
        let live = n.saturating_sub(k);
        // Sources inside the grid.
        for i in 0..live {
            let src = i + k;
            let mut x = v[src] + self.alpha[src] * dt;
            for (s, dxj) in self.sigmas.iter().zip(increments) {
                x += s.values()[src] * dxj;
            }
            v[i] = x;
        }
        // Sources beyond the grid carry the tail values.
        let mut new_tail = tail + self.alpha_tail * dt;
        for (st, dxj) in sig_tails.iter().zip(increments) {
            new_tail += st * dxj;
        }
        for x in v[live..].iter_mut() {
            *x = new_tail;
        }
        state.set_tail_value(new_tail);
        if !state.values().iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidCurve("curve state became non-finite".into()));
        }
        Ok(clamps)
    }
}

/// One step from `state` with the given driver increments.
pub fn step(state: &ForwardCurve, increments: &[f64], scenario: &SimulationScenario) -> Result<ForwardCurve> {
    let mut s = state.clone();
    Stepper::new(scenario)?.step_into(&mut s, increments)?;
    Ok(s)
}

/// Path state at one checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointRecord {
    pub t: f64,
    pub short_rate: f64,
    /// `∫_0^t r_s(0) ds`, trapezoid in time.
    pub integrated_short_rate: f64,
    /// `exp(−∫_0^t r_s(0) ds)`.
    pub discount: f64,
    /// `P(t, T)` per requested maturity; NaN for `T < t`.
    pub bonds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathResult {
    pub path_id: usize,
    pub records: Vec<CheckpointRecord>,
    /// Curve states at the checkpoints when requested.
    pub curves: Vec<ForwardCurve>,
    pub clamps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub paths: Vec<PathResult>,
    /// `(path_id, reason)` of excluded paths.
    pub failures: Vec<(usize, String)>,
    pub checkpoints: Vec<f64>,
    pub maturities: Vec<f64>,
    /// `P(0, T)` per maturity.
    pub initial_bonds: Vec<f64>,
    pub dt: f64,
}

/// Driver increments of one path, `[driver][step]`.
pub fn path_increments(scenario: &SimulationScenario, path_id: usize) -> Result<Vec<Vec<f64>>> {
    let grid = PathGrid::new(scenario.t_max, scenario.n_steps())?;
    scenario
        .models
        .iter()
        .enumerate()
        .map(|(j, m)| {
            let mut rng = driver_rng(scenario.seed, path_id as u64, j);
            Ok(sample_path_with(m, grid, &mut rng)?.increments())
        })
        .collect()
}

fn bonds_of(curve: &ForwardCurve, t: f64, maturities: &[f64]) -> Result<Vec<f64>> {
    maturities
        .iter()
        .map(|&m| {
            if m < t {
                Ok(f64::NAN)
            } else {
                bond_price(curve, tau_of(m, t))
            }
        })
        .collect()
}

fn tau_of(maturity: f64, t: f64) -> f64 {
    (maturity - t).max(0.0)
}

/// Simulates one path by stepping the full curve.
pub fn simulate_path_stepping(scenario: &SimulationScenario, path_id: usize) -> Result<PathResult> {
    let incs = path_increments(scenario, path_id)?;
    let mut stepper = Stepper::new(scenario)?;
    let mut state = scenario.initial_curve.clone();
    let checkpoints = scenario.checkpoint_steps();
    let mut records = Vec::with_capacity(checkpoints.len());
    let mut curves = Vec::new();
    let mut integrated = 0.0;
    let mut clamps = 0;
    let dt = scenario.dt;
    let mut inc = vec![0.0; incs.len()];
    let mut next = 0;
    for m in 0..=scenario.n_steps() {
        if m > 0 {
            for (slot, d) in inc.iter_mut().zip(&incs) {
                *slot = d[m - 1];
            }
            let prev = short_rate(&state);
            clamps += stepper.step_into(&mut state, &inc)?;
            integrated += 0.5 * dt * (prev + short_rate(&state));
        }
        if next < checkpoints.len() && checkpoints[next] == m {
            let t = scenario.checkpoints[next];
            records.push(CheckpointRecord {
                t,
                short_rate: short_rate(&state),
                integrated_short_rate: integrated,
                discount: (-integrated).exp(),
                bonds: bonds_of(&state, t, &scenario.maturities)?,
            });
            if path_id < scenario.keep_curves {
                curves.push(state.clone());
            }
            next += 1;
        }
    }
    Ok(PathResult {
        path_id,
        records,
        curves,
        clamps,
    })
}

/// Precomputed quantities of the closed-form accumulation used when the
/// volatility does not depend on the state.
///
/// Unrolling the scheme gives
/// `r_m(x_i) = h0(x_{i+mk}) + Σ_{s<m} inc_s(x_{i+(m−s)k})`, with
/// `inc_s = α dt + Σ_j σ_j ΔX_{j,s}` and curves extended by their tails, so
/// short rates, their time integral and bond prices are linear functionals
/// of the increments.
#[derive(Debug, Clone)]
struct LinearPlan {
    /// Short-rate kernel `σ_j(l k)`, per driver, `l = 0..=M`.
    short_kernel: Vec<Vec<f64>>,
    /// `Q_j(L) − σ_j(L k)/2` with `Q_j(L) = Σ_{l=1}^{L} σ_j(l k)`.
    integral_kernel: Vec<Vec<f64>>,
    /// Per checkpoint: deterministic short rate and integral.
    det_short: Vec<f64>,
    det_integral: Vec<f64>,
    /// Per checkpoint and maturity: deterministic part of `∫_0^τ r`.
    det_bond: Vec<Vec<f64>>,
    /// Per maturity, driver: `l ↦ trapz σ_j over [l k dx, l k dx + τ]`;
    /// indexed `[checkpoint][maturity][driver][l]`.
    bond_kernel: Vec<Vec<Vec<Vec<f64>>>>,
    steps: Vec<usize>,
}

fn extended(c: &ForwardCurve, len: usize) -> Vec<f64> {
    let mut v = c.values().to_vec();
    v.resize(len.max(v.len()), c.tail_value());
    v
}

impl LinearPlan {
    fn new(scenario: &SimulationScenario, stepper: &mut Stepper) -> Result<Self> {
        let h0 = &scenario.initial_curve;
        stepper.refresh(h0)?;
        let k = stepper.shift;
        let m_total = scenario.n_steps();
        let dx = h0.dx();
        let dt = scenario.dt;
        let max_tau_nodes = scenario
            .maturities
            .iter()
            .map(|&m| (m / dx).round() as usize)
            .max()
            .unwrap_or(0);
        let len = h0.values().len() + m_total * k + max_tau_nodes + 2;
        let h0e = extended(h0, len);
        let mut alpha_curve = h0.clone();
        alpha_curve.values_mut().copy_from_slice(&stepper.alpha);
        alpha_curve.set_tail_value(stepper.alpha_tail);
        let ae = extended(&alpha_curve, len);
        let se: Vec<Vec<f64>> = stepper.sigmas.iter().map(|s| extended(s, len)).collect();

        let stride = |c: &[f64]| -> Vec<f64> { (0..=m_total).map(|l| c[l * k]).collect() };
        let short_kernel: Vec<Vec<f64>> = se.iter().map(|s| stride(s)).collect();
        let half_prefix = |c: &[f64]| -> Vec<f64> {
            let mut q = 0.0;
            let mut out = vec![0.0; m_total + 1];
            for l in 1..=m_total {
                q += c[l * k];
                out[l] = q - 0.5 * c[l * k];
            }
            out
        };
        let integral_kernel = se.iter().map(|s| half_prefix(s)).collect();
        let a_short = stride(&ae);
        let a_int = half_prefix(&ae);

        let steps = scenario.checkpoint_steps();
        let mut det_short = Vec::new();
        let mut det_integral = Vec::new();
        let mut det_bond = Vec::new();
        let mut bond_kernel = Vec::new();
        for (&m, &t) in steps.iter().zip(&scenario.checkpoints) {
            det_short.push(h0e[m * k] + dt * (1..=m).map(|l| a_short[l]).sum::<f64>());
            // trapezoid over the time grid of h0(s k), plus the drift terms
            let h_part: f64 = if m == 0 {
                0.0
            } else {
                (0..=m).map(|s| h0e[s * k]).sum::<f64>() - 0.5 * (h0e[0] + h0e[m * k])
            };
            let a_part: f64 = (0..m).map(|s| a_int[m - s]).sum();
            det_integral.push(dt * (h_part + dt * a_part));

            let mut per_mat = Vec::new();
            let mut per_mat_kernel = Vec::new();
            for &mat in &scenario.maturities {
                if mat < t {
                    per_mat.push(f64::NAN);
                    per_mat_kernel.push(Vec::new());
                    continue;
                }
                let kk = (tau_of(mat, t) / dx).round() as usize;
                let window = |c: &[f64], o: usize| trapezoid(&c[o..=o + kk], dx);
                let mut det = window(&h0e, m * k);
                for s in 0..m {
                    det += dt * window(&ae, (m - s) * k);
                }
                per_mat.push(det);
                per_mat_kernel.push(se.iter().map(|s| (0..=m).map(|l| window(s, l * k)).collect()).collect());
            }
            det_bond.push(per_mat);
            bond_kernel.push(per_mat_kernel);
        }
        Ok(LinearPlan {
            short_kernel,
            integral_kernel,
            det_short,
            det_integral,
            det_bond,
            bond_kernel,
            steps,
        })
    }

    fn path(&self, scenario: &SimulationScenario, path_id: usize) -> Result<PathResult> {
        let incs = path_increments(scenario, path_id)?;
        let dt = scenario.dt;
        let mut records = Vec::with_capacity(self.steps.len());
        for (c, (&m, &t)) in self.steps.iter().zip(&scenario.checkpoints).enumerate() {
            let mut short = self.det_short[c];
            let mut integral = self.det_integral[c];
            for (j, d) in incs.iter().enumerate() {
                let (sk, ik) = (&self.short_kernel[j], &self.integral_kernel[j]);
                let (mut a, mut b) = (0.0, 0.0);
                for (s, &x) in d[..m].iter().enumerate() {
                    a += sk[m - s] * x;
                    b += ik[m - s] * x;
                }
                short += a;
                integral += dt * b;
            }
            let bonds = self.det_bond[c]
                .iter()
                .zip(&self.bond_kernel[c])
                .map(|(&det, kern)| {
                    if det.is_nan() {
                        return f64::NAN;
                    }
                    let mut v = det;
                    for (d, kj) in incs.iter().zip(kern) {
                        for (s, &x) in d[..m].iter().enumerate() {
                            v += kj[m - s] * x;
                        }
                    }
                    (-v).exp()
                })
                .collect();
            records.push(CheckpointRecord {
                t,
                short_rate: short,
                integrated_short_rate: integral,
                discount: (-integral).exp(),
                bonds,
            });
        }
        Ok(PathResult {
            path_id,
            records,
            curves: Vec::new(),
            clamps: 0,
        })
    }
}

fn uses_linear_plan(scenario: &SimulationScenario) -> bool {
    scenario.mode == EngineMode::Auto && scenario.volatility.is_state_independent()
}

/// Runs the ensemble. Paths draw from streams keyed by `(seed, path_id)`, so
/// results do not depend on the number of threads.
pub fn simulate(scenario: &SimulationScenario) -> Result<Ensemble> {
    scenario.validate()?;
    let run = || -> Result<Vec<std::result::Result<PathResult, (usize, Error)>>> {
        if uses_linear_plan(scenario) {
            let mut stepper = Stepper::new(scenario)?;
            let plan = LinearPlan::new(scenario, &mut stepper)?;
            Ok((0..scenario.n_paths)
                .into_par_iter()
                .map(|p| {
                    let mut r = plan.path(scenario, p).map_err(|e| (p, e))?;
                    // The plan never builds curves; snapshot paths are stepped
                    // for them, agreeing with the records to rounding.
                    if p < scenario.keep_curves {
                        r.curves = simulate_path_stepping(scenario, p).map_err(|e| (p, e))?.curves;
                    }
                    Ok(r)
                })
                .collect())
        } else {
            Ok((0..scenario.n_paths)
                .into_par_iter()
                .map(|p| simulate_path_stepping(scenario, p).map_err(|e| (p, e)))
                .collect())
        }
    };
    let results = if scenario.parallelism > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(scenario.parallelism)
            .build()
            .map_err(|e| Error::InvalidParameter(e.to_string()))?
            .install(run)?
    } else {
        run()?
    };
    let mut paths = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(p) => paths.push(p),
            Err((p, e)) => failures.push((p, e.to_string())),
        }
    }
    let total = scenario.n_paths;
    if failures.len() as f64 > scenario.max_failure_fraction * total as f64 {
        return Err(Error::TooManyFailures {
            failed: failures.len(),
            total,
            first: failures[0].1.clone(),
        });
    }
    let initial_bonds = scenario
        .maturities
        .iter()
        .map(|&m| bond_price(&scenario.initial_curve, m))
        .collect::<Result<Vec<_>>>()?;
    Ok(Ensemble {
        paths,
        failures,
        checkpoints: scenario.checkpoints.clone(),
        maturities: scenario.maturities.clone(),
        initial_bonds,
        dt: scenario.dt,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MartingaleOptions {
    pub se_multiplier: f64,
    /// Allowance `factor · dt · P(0, T)` for time discretization.
    pub dt_factor: f64,
}

impl Default for MartingaleOptions {
    fn default() -> Self {
        MartingaleOptions {
            se_multiplier: 4.0,
            dt_factor: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleRow {
    pub t: f64,
    pub maturity: f64,
    /// Mean of `D_t P(t, T)`.
    pub mean: f64,
    pub se: f64,
    pub initial_price: f64,
    pub deviation: f64,
    pub allowance: f64,
    pub passed: bool,
    pub n_used: usize,
    pub n_excluded: usize,
}

/// Compares `E[D_t P(t,T)]` with `P(0,T)` for every checkpoint and maturity `T ≥ t`.
pub fn martingale_test(ensemble: &Ensemble, opts: &MartingaleOptions) -> Vec<MartingaleRow> {
    let mut rows = Vec::new();
    for (c, &t) in ensemble.checkpoints.iter().enumerate() {
        for (j, &mat) in ensemble.maturities.iter().enumerate() {
            if mat < t {
                continue;
            }
            let v: Vec<f64> = ensemble
                .paths
                .iter()
                .map(|p| p.records[c].discount * p.records[c].bonds[j])
                .collect();
            let (mean, se) = mean_se(&v);
            let p0 = ensemble.initial_bonds[j];
            let deviation = (mean - p0).abs();
            let allowance = opts.se_multiplier * se + opts.dt_factor * ensemble.dt * p0;
            rows.push(MartingaleRow {
                t,
                maturity: mat,
                mean,
                se,
                initial_price: p0,
                deviation,
                allowance,
                passed: deviation <= allowance,
                n_used: v.len(),
                n_excluded: ensemble.failures.len(),
            });
        }
    }
    rows
}

//! Random test curves: finite damped-cosine mixtures that settle to a tail level.

use rand::Rng;

use crate::curves::ForwardCurve;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorpusOptions {
    pub x_max: f64,
    pub n_points: usize,
    /// Number of damped cosine terms.
    pub terms: usize,
    /// Smallest decay rate; must exceed half the weight's growth rate.
    pub min_decay: f64,
    pub max_decay: f64,
    pub max_frequency: f64,
    pub amplitude: f64,
    /// Draw a non-zero tail level.
    pub with_tail: bool,
}

impl Default for CorpusOptions {
    fn default() -> Self {
        CorpusOptions {
            x_max: 30.0,
            n_points: 30 * 64,
            terms: 4,
            min_decay: 0.8,
            max_decay: 3.0,
            max_frequency: 3.0,
            amplitude: 0.05,
            with_tail: false,
        }
    }
}

/// `h(x) = tail + Σ a_k cos(ω_k x + φ_k) e^{-λ_k x}` with random parameters.
pub fn random_curve<R: Rng + ?Sized>(rng: &mut R, opts: &CorpusOptions) -> Result<ForwardCurve> {
    let tail = if opts.with_tail {
        rng.random_range(-opts.amplitude..opts.amplitude)
    } else {
        0.0
    };
    let terms: Vec<(f64, f64, f64, f64)> = (0..opts.terms)
        .map(|_| {
            (
                rng.random_range(-opts.amplitude..opts.amplitude),
                rng.random_range(0.0..opts.max_frequency),
                rng.random_range(0.0..std::f64::consts::TAU),
                rng.random_range(opts.min_decay..opts.max_decay),
            )
        })
        .collect();
    ForwardCurve::from_fn(
        opts.x_max,
        opts.n_points,
        |x| {
            tail + terms
                .iter()
                .map(|&(a, w, p, l)| a * (w * x + p).cos() * (-l * x).exp())
                .sum::<f64>()
        },
        tail,
    )
}

pub fn random_corpus<R: Rng + ?Sized>(rng: &mut R, opts: &CorpusOptions, count: usize) -> Result<Vec<ForwardCurve>> {
    (0..count).map(|_| random_curve(rng, opts)).collect()
}

//! Forward curves and the two curve-space geometries.

mod analytic;
mod bjork_svensson;
mod corpus;
mod forward;
mod weighted;

pub use analytic::AnalyticCurve;
pub use bjork_svensson::{
    check_bs_divergence, check_derivative_inequality, norm_bs_analytic, BsNorm, DerivativeInequalityReport,
    DivergenceOptions, DivergenceReport, IntegrandSpec,
};
pub use corpus::{random_corpus, random_curve, CorpusOptions};
pub use forward::ForwardCurve;
pub use weighted::{
    embedding_constants, midpoint_weights, norm_w, norm_w_unchecked, verify_embedding, CurveSpaceConfig,
    EmbeddingCheck, EmbeddingConstants, EmbeddingReport, NormVariant, WeightSpec, WeightedConfig, WeightedNorm,
};

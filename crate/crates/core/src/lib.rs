//! Quality assessment of third-party audience data from ad-campaign
//! aggregates.
//!
//! A data source tags users Positive, Negative or Unknown for some target
//! category. Measurement campaigns report, per campaign, how many reached
//! users the source tagged each way and how many a ground-truth panel
//! recognized as positive or negative. From those counts the crate
//!
//! * ranks sources by the relative error of their positive fraction ([`rank`]),
//! * infers the nine predictive values `P(truth | tag)` with confidence
//!   intervals ([`infer`]),
//! * plans evaluation budgets and forecasts targeted audiences ([`econ`]),
//! * simulates campaigns for validation studies ([`simulate`]).
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below name the common instantiations.

pub mod assess;
pub mod domain;
pub mod econ;
pub mod infer;
pub mod io;
pub mod rank;
pub mod scalar;
pub mod simulate;

pub use assess::{assess_sources, AssessError, AssessOptions};
pub use domain::{
    validate_aggregate, CampaignAggregate, CampaignId, DomainError, PredictiveValues, QualityReport, RawCampaign,
    SourceId, Tag, TagCounts,
};
pub use infer::{infer_predictive_values, InferError, QpProblem, QpSolution};
pub use rank::{rank_sources, RankEntry, RankError};
pub use scalar::Scalar;

pub type PredictiveValuesF64 = PredictiveValues<f64>;
pub type PredictiveValuesF32 = PredictiveValues<f32>;
pub type QpSolutionF64 = QpSolution<f64>;
pub type QpSolutionF32 = QpSolution<f32>;
pub type QualityReportF64 = QualityReport<f64>;
pub type RankEntryF64 = RankEntry<f64>;
/// Expected (fractional) counts, as produced by `simulate::expected_aggregate`.
pub type ExpectedAggregate = CampaignAggregate<f64>;

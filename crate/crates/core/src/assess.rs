//! Full per-source assessment: rank score, inferred predictive values and
//! their confidence half-widths.

use std::collections::BTreeMap;

use num_traits::ToPrimitive;
use rayon::prelude::*;
use thiserror::Error;

use crate::domain::{CampaignAggregate, QualityReport, SourceId};
use crate::infer::{confidence_interval, infer_predictive_values, InferError, QpProblem, DEFAULT_XI};
use crate::rank::{rank_sources, RankError};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssessOptions<T> {
    pub xi: T,
    pub normalize: bool,
    /// Intervals have level `1 − delta`.
    pub delta: T,
}

impl<T: Scalar> Default for AssessOptions<T> {
    fn default() -> Self {
        Self {
            xi: T::lit(DEFAULT_XI),
            normalize: true,
            delta: T::lit(0.05),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AssessError {
    #[error(transparent)]
    Rank(#[from] RankError),
    #[error("source `{source_id}`: {cause}")]
    Infer { source_id: SourceId, cause: InferError },
}

/// Ranks all sources, then infers each one's predictive values.
///
/// Reports come back in rank order. Half-widths are omitted when the source
/// has too few campaigns for residual degrees of freedom or a singular
/// design; any other inference failure aborts the assessment.
pub fn assess_sources<T: Scalar, C: Copy + ToPrimitive + Sync>(
    per_source: &BTreeMap<SourceId, Vec<CampaignAggregate<C>>>,
    options: &AssessOptions<T>,
) -> Result<Vec<QualityReport<T>>, AssessError> {
    let ranking = rank_sources::<T, C>(per_source)?;
    ranking
        .par_iter()
        .enumerate()
        .map(|(i, entry)| {
            let campaigns = per_source[&entry.source_id].clone();
            let n_campaigns = campaigns.len();
            let problem = QpProblem::new(campaigns)
                .with_xi(options.xi)
                .with_normalize(options.normalize);
            let wrap = |cause| AssessError::Infer {
                source_id: entry.source_id.clone(),
                cause,
            };
            let solution = infer_predictive_values(&problem).map_err(wrap)?;
            let ci = match confidence_interval(&solution, &problem, options.delta) {
                Ok(w) => Some(w),
                Err(InferError::InsufficientDof(_) | InferError::SingularDesign) => None,
                Err(e) => return Err(wrap(e)),
            };
            Ok(QualityReport {
                source_id: entry.source_id.clone(),
                mean_relative_err: entry.mean_err,
                inferred: Some(solution.values),
                ci_half_widths: ci,
                ci_level: T::one() - options.delta,
                n_campaigns,
                rank: i + 1,
            })
        })
        .collect()
}

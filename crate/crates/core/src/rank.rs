//! Ranking of data sources by how closely their positive fraction tracks the
//! ground truth's, averaged over performance campaigns.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{CampaignAggregate, CampaignId, SourceId};
use crate::scalar::{lift, Scalar};

#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
pub enum RankError {
    #[error("source tags no user of campaign `{0}` as positive or negative")]
    NoRecognizedUsers(CampaignId),
    #[error("ground truth reports no positives in campaign `{0}`")]
    ZeroGroundTruthPositives(CampaignId),
    #[error("source `{0}` has no campaign with a defined relative error")]
    NoUsableCampaigns(SourceId),
    #[error("mean relative error {0} >= 1; the rank surrogate cannot extrapolate")]
    DegenerateErr(f64),
}

/// Share of the source's recognized users tagged positive: `D⁺ / (D⁺ + D⁻)`.
pub fn positive_fraction<T: Scalar, C: Copy + ToPrimitive>(
    agg: &CampaignAggregate<C>,
) -> Result<T, RankError> {
    let p: T = lift(agg.source.positive);
    let n: T = lift(agg.source.negative);
    if p + n <= T::zero() {
        return Err(RankError::NoRecognizedUsers(agg.id.clone()));
    }
    Ok(p / (p + n))
}

/// `G⁺ / (G⁺ + G⁻)`, or `None` when the agency recognizes nobody.
fn truth_positive_fraction<T: Scalar, C: Copy + ToPrimitive>(agg: &CampaignAggregate<C>) -> Option<T> {
    let p: T = lift(agg.truth.positive);
    let n: T = lift(agg.truth.negative);
    (p + n > T::zero()).then(|| p / (p + n))
}

/// `|R − R̂| / R`.
pub fn relative_err<T: Scalar, C: Copy + ToPrimitive>(agg: &CampaignAggregate<C>) -> Result<T, RankError> {
    let truth = truth_positive_fraction::<T, C>(agg)
        .filter(|r| *r > T::zero())
        .ok_or_else(|| RankError::ZeroGroundTruthPositives(agg.id.clone()))?;
    let est = positive_fraction::<T, C>(agg)?;
    Ok((truth - est).abs() / truth)
}

/// Unscaled closeness `|R − R̂|`; kept only as a baseline for tests.
#[cfg_attr(not(test), allow(dead_code))]
pub(crate) fn absolute_err<T: Scalar, C: Copy + ToPrimitive>(agg: &CampaignAggregate<C>) -> Result<T, RankError> {
    let truth = truth_positive_fraction::<T, C>(agg)
        .ok_or_else(|| RankError::ZeroGroundTruthPositives(agg.id.clone()))?;
    Ok((truth - positive_fraction::<T, C>(agg)?).abs())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedCampaign {
    pub campaign_id: CampaignId,
    pub reason: RankError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry<T> {
    pub source_id: SourceId,
    pub per_campaign_err: Vec<T>,
    /// Arithmetic mean of `per_campaign_err` (μ̄); smaller is better.
    pub mean_err: T,
    /// Campaigns left out of μ̄ because their relative error is undefined.
    pub skipped: Vec<SkippedCampaign>,
}

/// Scores one source over its campaigns.
pub fn score_source<T: Scalar, C: Copy + ToPrimitive>(
    source_id: &SourceId,
    campaigns: &[CampaignAggregate<C>],
) -> Result<RankEntry<T>, RankError> {
    let mut per_campaign_err = Vec::with_capacity(campaigns.len());
    let mut skipped = Vec::new();
    for agg in campaigns {
        match relative_err::<T, C>(agg) {
            Ok(e) => per_campaign_err.push(e),
            Err(reason) => skipped.push(SkippedCampaign {
                campaign_id: agg.id.clone(),
                reason,
            }),
        }
    }
    if per_campaign_err.is_empty() {
        return Err(RankError::NoUsableCampaigns(source_id.clone()));
    }
    let mean_err =
        per_campaign_err.iter().copied().sum::<T>() / lift::<T, _>(per_campaign_err.len());
    Ok(RankEntry {
        source_id: source_id.clone(),
        per_campaign_err,
        mean_err,
        skipped,
    })
}

/// Scores every source and orders them best first; ties go to the
/// lexicographically smaller source id.
pub fn rank_sources<T: Scalar, C: Copy + ToPrimitive + Sync>(
    per_source: &BTreeMap<SourceId, Vec<CampaignAggregate<C>>>,
) -> Result<Vec<RankEntry<T>>, RankError> {
    let mut entries = per_source
        .par_iter()
        .map(|(id, campaigns)| score_source::<T, C>(id, campaigns))
        .collect::<Result<Vec<_>, _>>()?;
    entries.sort_by(|a, b| {
        a.mean_err
            .partial_cmp(&b.mean_err)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.source_id.cmp(&b.source_id))
    });
    Ok(entries)
}

/// Share of each campaign's population the ground truth recognizes (τ̂),
/// averaged over `campaigns`. Zero for an empty slice.
pub fn recognized_fraction<T: Scalar, C: Copy + ToPrimitive>(campaigns: &[CampaignAggregate<C>]) -> T {
    if campaigns.is_empty() {
        return T::zero();
    }
    let total: T = campaigns
        .iter()
        .map(|c| (lift::<T, _>(c.truth.positive) + lift(c.truth.negative)) / lift(c.population))
        .sum();
    total / lift(campaigns.len())
}

/// Positive-population estimate extrapolated from the rank score:
/// `M · τ̂ · R̂ / (1 − μ̄)`.
pub fn estimate_positives_rank<T: Scalar>(
    population: T,
    tau_hat: T,
    r_hat: T,
    mean_err: T,
) -> Result<T, RankError> {
    if mean_err >= T::one() {
        return Err(RankError::DegenerateErr(mean_err.to_f64_lossy()));
    }
    Ok(population * tau_hat * r_hat / (T::one() - mean_err))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{PredictiveValues, TagCounts};
    use crate::simulate::expected_aggregate;

    fn agg(d: [u64; 3], g: [u64; 3]) -> CampaignAggregate<u64> {
        CampaignAggregate {
            id: "c".into(),
            source: TagCounts::new(d[0], d[1], d[2]),
            truth: TagCounts::new(g[0], g[1], g[2]),
            population: d.iter().sum(),
        }
    }

    #[test]
    fn positive_fraction_examples() {
        assert_eq!(positive_fraction::<f64, _>(&agg([30, 30, 40], [1, 1, 98])).unwrap(), 0.5);
        assert_eq!(positive_fraction::<f64, _>(&agg([60, 20, 20], [1, 1, 98])).unwrap(), 0.75);
        assert!(matches!(
            positive_fraction::<f64, _>(&agg([0, 0, 100], [1, 1, 98])),
            Err(RankError::NoRecognizedUsers(_))
        ));
    }

    #[test]
    fn relative_err_examples() {
        // R = 20/100 = 0.2, R̂ = 30/100 = 0.3.
        let e = relative_err::<f64, _>(&agg([30, 70, 0], [20, 80, 0])).unwrap();
        assert!((e - 0.5).abs() < 1e-15);
        assert_eq!(relative_err::<f64, _>(&agg([25, 75, 0], [10, 30, 60])).unwrap(), 0.0);
        assert!(matches!(
            relative_err::<f64, _>(&agg([30, 70, 0], [0, 80, 20])),
            Err(RankError::ZeroGroundTruthPositives(_))
        ));
        assert!(matches!(
            relative_err::<f64, _>(&agg([0, 0, 100], [10, 80, 10])),
            Err(RankError::NoRecognizedUsers(_))
        ));
        let a = absolute_err::<f64, _>(&agg([30, 70, 0], [20, 80, 0])).unwrap();
        assert!((a - 0.1).abs() < 1e-15);
    }

    #[test]
    fn perfect_source_ranks_first() {
        let mut m = BTreeMap::new();
        m.insert(SourceId::from("b-perfect"), vec![agg([20, 60, 20], [25, 75, 0]), agg([10, 10, 80], [40, 40, 20])]);
        m.insert(SourceId::from("a-noisy"), vec![agg([30, 50, 20], [25, 75, 0]), agg([10, 10, 80], [40, 40, 20])]);
        let ranked = rank_sources::<f64, _>(&m).unwrap();
        assert_eq!(ranked[0].source_id, SourceId::from("b-perfect"));
        assert_eq!(ranked[0].mean_err, 0.0);
        assert!(ranked[1].mean_err > 0.0);
    }

    #[test]
    fn ties_break_on_source_id() {
        let c = vec![agg([20, 60, 20], [25, 75, 0])];
        let mut m = BTreeMap::new();
        m.insert(SourceId::from("zeta"), c.clone());
        m.insert(SourceId::from("alpha"), c);
        let ranked = rank_sources::<f64, _>(&m).unwrap();
        assert_eq!(ranked[0].source_id, SourceId::from("alpha"));
    }

    #[test]
    fn single_campaign_and_skips() {
        let mut m = BTreeMap::new();
        m.insert(
            SourceId::from("s"),
            vec![agg([30, 70, 0], [20, 80, 0]), agg([0, 0, 100], [20, 80, 0])],
        );
        let ranked = rank_sources::<f64, _>(&m).unwrap();
        assert_eq!(ranked.len(), 1);
        assert!((ranked[0].mean_err - 0.5).abs() < 1e-15);
        assert_eq!(ranked[0].skipped.len(), 1);

        m.insert(SourceId::from("blind"), vec![agg([0, 0, 100], [20, 80, 0])]);
        assert_eq!(
            rank_sources::<f64, _>(&m),
            Err(RankError::NoUsableCampaigns("blind".into()))
        );
    }

    #[test]
    fn rank_estimate_examples() {
        assert_eq!(estimate_positives_rank(1000.0, 1.0, 0.3, 0.0).unwrap(), 300.0);
        assert!((estimate_positives_rank(1000.0_f64, 0.8, 0.25, 0.5).unwrap() - 400.0).abs() < 1e-12);
        assert!(matches!(
            estimate_positives_rank(1000.0, 1.0, 0.3, 1.2),
            Err(RankError::DegenerateErr(_))
        ));
    }

    #[test]
    fn recognized_fraction_averages_campaigns() {
        let c = [agg([1, 1, 98], [50, 30, 20]), agg([1, 1, 98], [100, 0, 0])];
        assert!((recognized_fraction::<f64, _>(&c) - 0.9).abs() < 1e-15);
    }

    /// The precision ordering can break once the unknown rows are
    /// asymmetric: here the weaker source leaks tagged-negative users into
    /// unknown and lands on a smaller error.
    #[test]
    fn soundness_needs_symmetric_unknown_handling() {
        let profile = |p: f64| {
            PredictiveValues::new([p, 1.0 - p, 0.0], [0.5 - p / 2.0, p, 0.5 - p / 2.0], [0.9, 0.1, 0.0]).unwrap()
        };
        let d = [40.0, 40.0, 20.0];
        let err = |p: f64| relative_err::<f64, _>(&expected_aggregate(&profile(p), d, "c".into())).unwrap();
        assert!(err(0.9) > err(0.5), "{} vs {}", err(0.9), err(0.5));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn scale_invariance(
                d in prop::array::uniform3(1u64..500),
                g in prop::array::uniform3(1u64..500),
                lambda in 1u64..50,
            ) {
                let a = agg(d, g);
                let mut b = agg(d.map(|x| x * lambda), g.map(|x| x * lambda));
                b.population = a.population * lambda;
                let fa = positive_fraction::<f64, _>(&a).unwrap();
                let fb = positive_fraction::<f64, _>(&b).unwrap();
                prop_assert!((fa - fb).abs() < 1e-12);
                let ea = relative_err::<f64, _>(&a).unwrap();
                let eb = relative_err::<f64, _>(&b).unwrap();
                prop_assert!((ea - eb).abs() < 1e-12);
            }
        }
    }
}

//! Synthetic campaigns with known per-user ground truth.
//!
//! Every user first receives a predicted tag (a fixed number per tag plus a
//! uniformly random remainder) and then a true tag drawn from the profile
//! row that matches the predicted tag. All randomness flows from an explicit
//! `u64` seed through a ChaCha8 stream.

pub mod experiment;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{CampaignAggregate, CampaignId, PredictiveValues, Tag, TagCounts};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimulateError {
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("audience sample is empty")]
    EmptySample,
}

/// How predicted tags are handed out in one campaign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub fixed_per_tag: usize,
    pub uniform_remainder: usize,
}

impl SplitSpec {
    /// 20 users per tag plus 40 assigned uniformly: a 100-user campaign.
    pub const STANDARD: SplitSpec = SplitSpec {
        fixed_per_tag: 20,
        uniform_remainder: 40,
    };

    pub fn new(fixed_per_tag: i64, uniform_remainder: i64) -> Result<Self, SimulateError> {
        if fixed_per_tag < 0 || uniform_remainder < 0 {
            return Err(SimulateError::InvalidSplit(format!(
                "negative count (fixed_per_tag={fixed_per_tag}, uniform_remainder={uniform_remainder})"
            )));
        }
        Ok(Self {
            fixed_per_tag: fixed_per_tag as usize,
            uniform_remainder: uniform_remainder as usize,
        })
    }

    /// Split for an audience of `total` users with `fixed_per_tag` per tag.
    pub fn for_total(total: usize, fixed_per_tag: usize) -> Result<Self, SimulateError> {
        match total.checked_sub(3 * fixed_per_tag) {
            Some(rest) => Ok(Self {
                fixed_per_tag,
                uniform_remainder: rest,
            }),
            None => Err(SimulateError::InvalidSplit(format!(
                "3 x {fixed_per_tag} fixed users exceed audience of {total}"
            ))),
        }
    }

    pub fn total(&self) -> usize {
        3 * self.fixed_per_tag + self.uniform_remainder
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserLabels {
    pub predicted: Tag,
    pub truth: Tag,
}

/// Per-user (predicted, truth) pairs; the only place granular truth exists.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AudienceSample {
    pub users: Vec<UserLabels>,
    pub seed: u64,
}

pub(crate) fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer; decorrelates neighbouring seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a base seed and a path of stream indices, so
/// that e.g. (profile, grid point, trial, campaign) each get an independent
/// reproducible stream.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix(base), |acc, &p| mix(acc ^ mix(p)))
}

fn draw_tag<T: Scalar, R: Rng>(row: [T; 3], rng: &mut R) -> Tag {
    let u: f64 = rng.random();
    let p0 = row[0].to_f64_lossy();
    let p1 = row[1].to_f64_lossy();
    if u < p0 {
        Tag::Positive
    } else if u < p0 + p1 {
        Tag::Negative
    } else {
        Tag::Unknown
    }
}

/// Simulates one campaign audience under `profile`.
pub fn gen_campaign<T: Scalar>(
    profile: &PredictiveValues<T>,
    split: SplitSpec,
    seed: u64,
) -> AudienceSample {
    let mut rng = rng_from(seed);
    let mut predicted = Vec::with_capacity(split.total());
    for tag in Tag::ALL {
        predicted.extend(std::iter::repeat_n(tag, split.fixed_per_tag));
    }
    for _ in 0..split.uniform_remainder {
        predicted.push(Tag::ALL[rng.random_range(0..3)]);
    }
    predicted.shuffle(&mut rng);
    let users = predicted
        .into_iter()
        .map(|p| UserLabels {
            predicted: p,
            truth: draw_tag(profile.row(p), &mut rng),
        })
        .collect();
    AudienceSample { users, seed }
}

/// Adds independent `U(-zeta, zeta)` noise to all nine entries, clamps to
/// `[0, 1]` and renormalizes each row.
///
/// A row clamped to all zeros becomes uniform. Panics if `zeta` is outside
/// `[0, 0.35]`.
pub fn perturb_profile<T: Scalar>(
    profile: &PredictiveValues<T>,
    zeta: f64,
    seed: u64,
) -> PredictiveValues<T> {
    assert!(
        (0.0..=0.35).contains(&zeta),
        "noise amplitude {zeta} outside [0, 0.35]"
    );
    if zeta == 0.0 {
        return *profile;
    }
    let mut rng = rng_from(seed);
    let mut perturb = |row: [T; 3]| {
        let noisy = row.map(|p| {
            let e: f64 = rng.random_range(-zeta..=zeta);
            (p + T::lit(e)).max(T::zero()).min(T::one())
        });
        let sum: T = noisy.iter().copied().sum();
        if sum > T::zero() {
            noisy.map(|p| p / sum)
        } else {
            [T::one() / T::lit(3.0); 3]
        }
    };
    PredictiveValues {
        alpha: perturb(profile.alpha),
        beta: perturb(profile.beta),
        gamma: perturb(profile.gamma),
    }
}

/// Counts predicted tags into the source side and true tags into the
/// ground-truth side.
pub fn aggregate(
    sample: &AudienceSample,
    campaign_id: CampaignId,
) -> Result<CampaignAggregate<u64>, SimulateError> {
    if sample.users.is_empty() {
        return Err(SimulateError::EmptySample);
    }
    let mut d = [0u64; 3];
    let mut g = [0u64; 3];
    for u in &sample.users {
        d[u.predicted.index()] += 1;
        g[u.truth.index()] += 1;
    }
    Ok(CampaignAggregate {
        id: campaign_id,
        source: TagCounts::new(d[0], d[1], d[2]),
        truth: TagCounts::new(g[0], g[1], g[2]),
        population: sample.users.len() as u64,
    })
}

/// Noiseless aggregate: the ground-truth side is the exact expectation of
/// the truth counts given source counts `d_counts` under `profile`.
pub fn expected_aggregate<T: Scalar>(
    profile: &PredictiveValues<T>,
    d_counts: [T; 3],
    campaign_id: CampaignId,
) -> CampaignAggregate<T> {
    let rows = profile.rows();
    let g: [T; 3] =
        std::array::from_fn(|c| (0..3).map(|r| d_counts[r] * rows[r][c]).sum());
    CampaignAggregate {
        id: campaign_id,
        source: TagCounts::new(d_counts[0], d_counts[1], d_counts[2]),
        truth: TagCounts::new(g[0], g[1], g[2]),
        population: d_counts.iter().copied().sum(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMetric {
    /// Fraction of users whose truth equals the predicted tag.
    Accuracy,
    /// Fraction of all users with truth = predicted = Positive.
    TruePositiveRate,
}

/// Per-user accuracy metric averaged over the whole audience.
pub fn oracle_metric(sample: &AudienceSample, metric: OracleMetric) -> Result<f64, SimulateError> {
    if sample.users.is_empty() {
        return Err(SimulateError::EmptySample);
    }
    let hits = sample
        .users
        .iter()
        .filter(|u| match metric {
            OracleMetric::Accuracy => u.truth == u.predicted,
            OracleMetric::TruePositiveRate => u.truth == Tag::Positive && u.predicted == Tag::Positive,
        })
        .count();
    Ok(hits as f64 / sample.users.len() as f64)
}

//! Core value types: tags, predictive-value profiles, campaign aggregates and
//! per-source quality reports.

use std::fmt;

use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{lift, Scalar};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("count `{field}` is negative ({value})")]
    NegativeCount { field: &'static str, value: i64 },
    #[error("{side} counts sum to {sum}, exceeding population {population}")]
    CountsExceedPopulation {
        side: &'static str,
        sum: i64,
        population: i64,
    },
    #[error("campaign population is zero")]
    ZeroPopulation,
    #[error("probability {row}[{index}] = {value} is outside [0, 1]")]
    InvalidProbability {
        row: &'static str,
        index: usize,
        value: f64,
    },
    #[error("row {row} sums to {sum}, not 1")]
    RowSumNotOne { row: &'static str, sum: f64 },
}

/// Label a sound data source assigns to a user. Exactly one per user.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tag {
    Positive,
    Negative,
    Unknown,
}

impl Tag {
    pub const ALL: [Tag; 3] = [Tag::Positive, Tag::Negative, Tag::Unknown];

    #[inline]
    pub fn index(self) -> usize {
        match self {
            Tag::Positive => 0,
            Tag::Negative => 1,
            Tag::Unknown => 2,
        }
    }

    #[inline]
    pub fn from_index(i: usize) -> Option<Tag> {
        Tag::ALL.get(i).copied()
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tag::Positive => "positive",
            Tag::Negative => "negative",
            Tag::Unknown => "unknown",
        })
    }
}

macro_rules! string_id {
    ($(#[$m:meta])* $name:ident) => {
        $(#[$m])*
        #[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }
    };
}

string_id!(
    /// Opaque campaign identifier.
    CampaignId
);
string_id!(
    /// Opaque data source identifier.
    SourceId
);

const ROW_NAMES: [&str; 3] = ["alpha", "beta", "gamma"];

/// Nine conditional probabilities mapping a source's tag to the ground-truth tag.
///
/// Row `alpha` is `P(truth | tagged Positive)`, `beta` is `P(truth | tagged
/// Negative)`, `gamma` is `P(truth | tagged Unknown)`; within each row the
/// entries are ordered (Positive, Negative, Unknown). `alpha[0]` is the
/// precision and `beta[1]` the negative predictive value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictiveValues<T> {
    pub alpha: [T; 3],
    pub beta: [T; 3],
    pub gamma: [T; 3],
}

impl<T: Scalar> PredictiveValues<T> {
    /// Validated constructor: entries in `[0, 1]`, rows summing to one.
    pub fn new(alpha: [T; 3], beta: [T; 3], gamma: [T; 3]) -> Result<Self, DomainError> {
        let pv = Self { alpha, beta, gamma };
        pv.validate()?;
        Ok(pv)
    }

    pub fn from_array(values: [T; 9]) -> Result<Self, DomainError> {
        Self::new(
            [values[0], values[1], values[2]],
            [values[3], values[4], values[5]],
            [values[6], values[7], values[8]],
        )
    }

    /// Row-major flattening: `[α₁, α₂, α₃, β₁, β₂, β₃, γ₁, γ₂, γ₃]`.
    pub fn to_array(&self) -> [T; 9] {
        let mut out = [T::zero(); 9];
        for (r, row) in self.rows().iter().enumerate() {
            out[3 * r..3 * r + 3].copy_from_slice(row);
        }
        out
    }

    pub fn rows(&self) -> [[T; 3]; 3] {
        [self.alpha, self.beta, self.gamma]
    }

    /// Truth distribution for users the source tagged `predicted`.
    pub fn row(&self, predicted: Tag) -> [T; 3] {
        self.rows()[predicted.index()]
    }

    pub fn precision(&self) -> T {
        self.alpha[0]
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        let tol = T::solver_tolerance();
        for (r, row) in self.rows().iter().enumerate() {
            for (i, &p) in row.iter().enumerate() {
                if !(p >= -tol && p <= T::one() + tol) {
                    return Err(DomainError::InvalidProbability {
                        row: ROW_NAMES[r],
                        index: i,
                        value: p.to_f64_lossy(),
                    });
                }
            }
            let sum: T = row.iter().copied().sum();
            if (sum - T::one()).abs() > tol {
                return Err(DomainError::RowSumNotOne {
                    row: ROW_NAMES[r],
                    sum: sum.to_f64_lossy(),
                });
            }
        }
        Ok(())
    }

    /// `|α₁ − β₂| ≤ ξ`.
    pub fn is_unbiased(&self, xi: T) -> bool {
        (self.alpha[0] - self.beta[1]).abs() <= xi
    }

    /// Truth always equals the source's tag.
    pub fn identity() -> Self {
        let (o, z) = (T::one(), T::zero());
        Self {
            alpha: [o, z, z],
            beta: [z, o, z],
            gamma: [z, z, o],
        }
    }

    pub fn uniform() -> Self {
        let third = T::one() / T::lit(3.0);
        Self {
            alpha: [third; 3],
            beta: [third; 3],
            gamma: [third; 3],
        }
    }

    /// Simulation profile of a strong source: precision 0.8.
    pub fn high_quality() -> Self {
        Self::from_f64([0.8, 0.15, 0.05], [0.2, 0.7, 0.1], [0.4, 0.5, 0.1])
    }

    /// Simulation profile of a weak source: precision 0.4.
    pub fn low_quality() -> Self {
        Self::from_f64([0.4, 0.5, 0.1], [0.3, 0.6, 0.1], [0.5, 0.4, 0.1])
    }

    fn from_f64(a: [f64; 3], b: [f64; 3], g: [f64; 3]) -> Self {
        Self {
            alpha: a.map(T::lit),
            beta: b.map(T::lit),
            gamma: g.map(T::lit),
        }
    }

    pub fn cast<U: Scalar>(&self) -> PredictiveValues<U> {
        PredictiveValues {
            alpha: self.alpha.map(lift),
            beta: self.beta.map(lift),
            gamma: self.gamma.map(lift),
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.to_array()
            .iter()
            .zip(other.to_array().iter())
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max)
    }
}

/// User counts per tag, ordered (Positive, Negative, Unknown).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TagCounts<C> {
    pub positive: C,
    pub negative: C,
    pub unknown: C,
}

impl<C: Copy> TagCounts<C> {
    pub fn new(positive: C, negative: C, unknown: C) -> Self {
        Self {
            positive,
            negative,
            unknown,
        }
    }

    pub fn get(&self, tag: Tag) -> C {
        match tag {
            Tag::Positive => self.positive,
            Tag::Negative => self.negative,
            Tag::Unknown => self.unknown,
        }
    }

    pub fn to_array(&self) -> [C; 3] {
        [self.positive, self.negative, self.unknown]
    }

    pub fn lift<T: Scalar>(&self) -> [T; 3]
    where
        C: ToPrimitive,
    {
        self.to_array().map(lift)
    }
}

/// Aggregate counts of one campaign as seen by one data source and by the
/// ground-truth agency.
///
/// Source counts are pre-scaled to cover the whole population, so both
/// triples sum to `population`. `C` is `u64` for observed data; the
/// noiseless expected aggregates built by the simulator use a float `C`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignAggregate<C = u64> {
    pub id: CampaignId,
    pub source: TagCounts<C>,
    pub truth: TagCounts<C>,
    pub population: C,
}

impl<C: Copy + ToPrimitive> CampaignAggregate<C> {
    /// `(D, G)` as fractions of the population.
    pub fn fractions<T: Scalar>(&self) -> ([T; 3], [T; 3]) {
        let m: T = lift(self.population);
        (
            self.source.lift::<T>().map(|d| d / m),
            self.truth.lift::<T>().map(|g| g / m),
        )
    }
}

/// Campaign record as ingested: unknown counts are not supplied and counts
/// may be malformed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawCampaign {
    pub id: CampaignId,
    pub population: i64,
    pub d_plus: i64,
    pub d_minus: i64,
    pub g_plus: i64,
    pub g_minus: i64,
}

impl From<&CampaignAggregate<u64>> for RawCampaign {
    fn from(agg: &CampaignAggregate<u64>) -> Self {
        Self {
            id: agg.id.clone(),
            population: agg.population as i64,
            d_plus: agg.source.positive as i64,
            d_minus: agg.source.negative as i64,
            g_plus: agg.truth.positive as i64,
            g_minus: agg.truth.negative as i64,
        }
    }
}

/// Checks a raw record and completes the unknown counts to the population.
pub fn validate_aggregate(raw: &RawCampaign) -> Result<CampaignAggregate<u64>, DomainError> {
    for (field, value) in [
        ("population", raw.population),
        ("d_plus", raw.d_plus),
        ("d_minus", raw.d_minus),
        ("g_plus", raw.g_plus),
        ("g_minus", raw.g_minus),
    ] {
        if value < 0 {
            return Err(DomainError::NegativeCount { field, value });
        }
    }
    if raw.population == 0 {
        return Err(DomainError::ZeroPopulation);
    }
    let complete = |side: &'static str, plus: i64, minus: i64| {
        let sum = plus.checked_add(minus).unwrap_or(i64::MAX);
        if sum > raw.population {
            return Err(DomainError::CountsExceedPopulation {
                side,
                sum,
                population: raw.population,
            });
        }
        Ok(TagCounts::new(plus as u64, minus as u64, (raw.population - sum) as u64))
    };
    Ok(CampaignAggregate {
        id: raw.id.clone(),
        source: complete("source", raw.d_plus, raw.d_minus)?,
        truth: complete("ground-truth", raw.g_plus, raw.g_minus)?,
        population: raw.population as u64,
    })
}

/// Assessment of one data source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport<T> {
    pub source_id: SourceId,
    /// Mean relative error of the source's positive fraction (μ̄).
    pub mean_relative_err: T,
    pub inferred: Option<PredictiveValues<T>>,
    /// Confidence half-widths in `to_array` order; `None` when fewer than
    /// four campaigns leave no residual degrees of freedom.
    pub ci_half_widths: Option<[T; 9]>,
    pub ci_level: T,
    pub n_campaigns: usize,
    /// 1 is best.
    pub rank: usize,
}

//! Planning arithmetic built on source quality: brute-force precision,
//! sample sizes for evaluation campaigns, the data-cost break-even point and
//! category forecasting.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{lift, Scalar};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EconError {
    #[error("campaign reached no users")]
    ZeroReach,
    #[error("{reported} target users reported but only {reached} reached")]
    CountExceedsReach { reported: u64, reached: u64 },
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("free-targeting precision is zero")]
    ZeroFreePrecision,
    #[error("tag `{0}` has no entry in the precision table")]
    UnknownTag(String),
}

/// On-target rate of a campaign aimed at the source's category:
/// `N(c_g) / N(c_s)`.
pub fn brute_force_precision<T: Scalar>(n_target_reported: u64, n_reached: u64) -> Result<T, EconError> {
    if n_reached == 0 {
        return Err(EconError::ZeroReach);
    }
    if n_target_reported > n_reached {
        return Err(EconError::CountExceedsReach {
            reported: n_target_reported,
            reached: n_reached,
        });
    }
    Ok(lift::<T, _>(n_target_reported) / lift(n_reached))
}

/// Inverse of the standard normal CDF (Wichura's AS241, ~1e-16 relative).
pub fn normal_quantile<T: Scalar>(p: T) -> T {
    const A: [f64; 8] = [
        3.387_132_872_796_366_6,
        133.141_667_891_784_38,
        1_971.590_950_306_551_3,
        13_731.693_765_509_461,
        45_921.953_931_549_87,
        67_265.770_927_008_7,
        33_430.575_583_588_13,
        2_509.080_928_730_122_7,
    ];
    const B: [f64; 8] = [
        1.0,
        42.313_330_701_600_91,
        687.187_007_492_057_9,
        5_394.196_021_424_751,
        21_213.794_301_586_597,
        39_307.895_800_092_71,
        28_729.085_735_721_943,
        5_226.495_278_852_854_5,
    ];
    const C: [f64; 8] = [
        1.423_437_110_749_683_6,
        4.630_337_846_156_545,
        5.769_497_221_460_691,
        3.647_848_324_763_204_5,
        1.270_458_252_452_368_4,
        0.241_780_725_177_450_6,
        0.022_723_844_989_269_184,
        7.745_450_142_783_414e-4,
    ];
    const D: [f64; 8] = [
        1.0,
        2.053_191_626_637_759,
        1.676_384_830_183_803_8,
        0.689_767_334_985_1,
        0.148_103_976_427_480_08,
        0.015_198_666_563_616_457,
        5.475_938_084_995_345e-4,
        1.050_750_071_644_416_8e-9,
    ];
    const E: [f64; 8] = [
        6.657_904_643_501_103,
        5.463_784_911_164_114,
        1.784_826_539_917_291_3,
        0.296_560_571_828_504_9,
        0.026_532_189_526_576_124,
        0.001_242_660_947_388_078_4,
        2.711_555_568_743_487_6e-5,
        2.010_334_399_292_288_1e-7,
    ];
    const F: [f64; 8] = [
        1.0,
        0.599_832_206_555_887_9,
        0.136_929_880_922_735_8,
        0.014_875_361_290_850_615,
        7.868_691_311_456_133e-4,
        1.846_318_317_510_054_8e-5,
        1.421_511_758_316_445_9e-7,
        2.044_263_103_389_939_7e-15,
    ];
    fn poly(c: &[f64; 8], x: f64) -> f64 {
        c.iter().rev().fold(0.0, |acc, &k| acc * x + k)
    }

    let p = p.to_f64_lossy();
    if !(p > 0.0 && p < 1.0) {
        return T::lit(match p {
            0.0 => f64::NEG_INFINITY,
            1.0 => f64::INFINITY,
            _ => f64::NAN,
        });
    }
    let q = p - 0.5;
    let z = if q.abs() <= 0.425 {
        let r = 0.180_625 - q * q;
        q * poly(&A, r) / poly(&B, r)
    } else {
        let r = if q < 0.0 { p } else { 1.0 - p };
        let r = (-r.ln()).sqrt();
        let v = if r <= 5.0 {
            let r = r - 1.6;
            poly(&C, r) / poly(&D, r)
        } else {
            let r = r - 5.0;
            poly(&E, r) / poly(&F, r)
        };
        if q < 0.0 {
            -v
        } else {
            v
        }
    };
    T::lit(z)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSizePlan<T> {
    pub categories: u32,
    /// Detectable difference in on-target rate (ε).
    pub margin: T,
    /// Two-sided significance level (α).
    pub significance: T,
    pub power: T,
    pub required_impressions: u64,
}

impl<T: Scalar> SampleSizePlan<T> {
    pub const DEFAULT_MARGIN: f64 = 0.05;
    pub const DEFAULT_SIGNIFICANCE: f64 = 0.05;
    pub const DEFAULT_POWER: f64 = 0.90;

    pub fn new(categories: u32, margin: T, significance: T, power: T) -> Result<Self, EconError> {
        Ok(Self {
            categories,
            margin,
            significance,
            power,
            required_impressions: required_impressions(categories, margin, significance, power)?,
        })
    }

    pub fn with_defaults(categories: u32) -> Result<Self, EconError> {
        Self::new(
            categories,
            T::lit(Self::DEFAULT_MARGIN),
            T::lit(Self::DEFAULT_SIGNIFICANCE),
            T::lit(Self::DEFAULT_POWER),
        )
    }
}

fn check_unit_open<T: Scalar>(name: &str, v: T) -> Result<(), EconError> {
    if v > T::zero() && v < T::one() {
        Ok(())
    } else {
        Err(EconError::InvalidParameters(format!("{name} must lie in (0, 1), got {v}")))
    }
}

/// `((z_{1−α/2} + z_power) / ε)²`; about 4202.969 with the defaults.
pub fn sample_size_constant<T: Scalar>(margin: T, significance: T, power: T) -> Result<T, EconError> {
    check_unit_open("margin", margin)?;
    check_unit_open("significance", significance)?;
    check_unit_open("power", power)?;
    let z = normal_quantile(T::one() - significance / T::two()) + normal_quantile(power);
    Ok((z / margin).powi(2))
}

/// Users a brute-force evaluation campaign must reach to tell one of `c`
/// equally likely categories apart from the rest.
pub fn required_impressions<T: Scalar>(
    categories: u32,
    margin: T,
    significance: T,
    power: T,
) -> Result<u64, EconError> {
    if categories < 2 {
        return Err(EconError::InvalidParameters(format!(
            "need at least 2 categories, got {categories}"
        )));
    }
    let k = sample_size_constant(margin, significance, power)?;
    let c: T = lift(categories);
    let p = T::one() / c;
    let n = (k * p * (T::one() - p)).ceil();
    Ok(n.to_u64().unwrap_or(u64::MAX).max(1))
}

/// Ad-serving cost of evaluating `d_sources` sources one campaign each.
pub fn total_evaluation_cost<T: Scalar>(d_sources: u64, categories: u32, cpi: T) -> Result<T, EconError> {
    if d_sources < 1 {
        return Err(EconError::InvalidParameters("need at least one data source".into()));
    }
    if !(cpi >= T::zero()) {
        return Err(EconError::InvalidParameters(format!("cpi must be non-negative, got {cpi}")));
    }
    let n = required_impressions(
        categories,
        T::lit(SampleSizePlan::<T>::DEFAULT_MARGIN),
        T::lit(SampleSizePlan::<T>::DEFAULT_SIGNIFICANCE),
        T::lit(SampleSizePlan::<T>::DEFAULT_POWER),
    )?;
    Ok(lift::<T, _>(d_sources) * lift::<T, _>(n) * cpi)
}

/// Highest per-impression data cost at which paying for the source still
/// reaches more on-target users than free targeting:
/// `cpi · (α₁,data / α₁,free − 1)`. Negative means never worth buying.
pub fn max_data_cpi<T: Scalar>(cpi: T, alpha1_data: T, alpha1_free: T) -> Result<T, EconError> {
    if !(cpi >= T::zero()) {
        return Err(EconError::InvalidParameters(format!("cpi must be non-negative, got {cpi}")));
    }
    for (name, v) in [("alpha1_data", alpha1_data), ("alpha1_free", alpha1_free)] {
        if !(v >= T::zero() && v <= T::one()) {
            return Err(EconError::InvalidParameters(format!("{name} must lie in [0, 1], got {v}")));
        }
    }
    if alpha1_free == T::zero() {
        return Err(EconError::ZeroFreePrecision);
    }
    Ok(cpi * (alpha1_data / alpha1_free - T::one()))
}

/// Precision `p(c_g | c_i)` of each source category for one target category.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PrecisionTable<T>(BTreeMap<String, T>);

impl<T: Scalar> PrecisionTable<T> {
    pub fn new(entries: impl IntoIterator<Item = (String, T)>) -> Result<Self, EconError> {
        let map: BTreeMap<String, T> = entries.into_iter().collect();
        if let Some((k, v)) = map.iter().find(|(_, v)| !(**v >= T::zero() && **v <= T::one())) {
            return Err(EconError::InvalidParameters(format!("precision of `{k}` is {v}, outside [0, 1]")));
        }
        Ok(Self(map))
    }

    pub fn get(&self, tag: &str) -> Option<T> {
        self.0.get(tag).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &T)> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// How to merge the precisions of a user carrying several source tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Combiner {
    Max,
    Min,
    Mean,
    Median,
}

impl std::str::FromStr for Combiner {
    type Err = EconError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "max" => Ok(Combiner::Max),
            "min" => Ok(Combiner::Min),
            "mean" => Ok(Combiner::Mean),
            "median" => Ok(Combiner::Median),
            other => Err(EconError::InvalidParameters(format!("unknown combiner `{other}`"))),
        }
    }
}

impl Combiner {
    fn combine<T: Scalar>(self, mut ps: Vec<T>) -> T {
        match ps.len() {
            0 => return T::zero(),
            1 => return ps[0],
            _ => {}
        }
        match self {
            Combiner::Max => ps.into_iter().fold(T::neg_infinity(), T::max),
            Combiner::Min => ps.into_iter().fold(T::infinity(), T::min),
            Combiner::Mean => {
                let n: T = lift(ps.len());
                ps.into_iter().sum::<T>() / n
            }
            Combiner::Median => {
                ps.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
                let n = ps.len();
                if n % 2 == 1 {
                    ps[n / 2]
                } else {
                    (ps[n / 2 - 1] + ps[n / 2]) / T::two()
                }
            }
        }
    }
}

/// Expected number of targeted users that belong to the target category.
///
/// Each user contributes the precision of its source tag; users with
/// several tags contribute the combined precision and untagged users
/// contribute nothing.
pub fn forecast_category<T: Scalar, S: AsRef<str>>(
    tagged_users: &[Vec<S>],
    table: &PrecisionTable<T>,
    combiner: Combiner,
) -> Result<T, EconError> {
    let mut total = T::zero();
    for tags in tagged_users {
        let ps = tags
            .iter()
            .map(|t| {
                table
                    .get(t.as_ref())
                    .ok_or_else(|| EconError::UnknownTag(t.as_ref().to_owned()))
            })
            .collect::<Result<Vec<T>, _>>()?;
        total = total + combiner.combine(ps);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(entries: &[(&str, f64)]) -> PrecisionTable<f64> {
        PrecisionTable::new(entries.iter().map(|(k, v)| (k.to_string(), *v))).unwrap()
    }

    #[test]
    fn brute_force_examples() {
        assert_eq!(brute_force_precision::<f64>(345, 1000).unwrap(), 0.345);
        assert_eq!(brute_force_precision::<f64>(0, 17).unwrap(), 0.0);
        assert_eq!(brute_force_precision::<f64>(17, 17).unwrap(), 1.0);
        assert_eq!(brute_force_precision::<f64>(1, 0), Err(EconError::ZeroReach));
        assert!(matches!(
            brute_force_precision::<f64>(5, 4),
            Err(EconError::CountExceedsReach { .. })
        ));
    }

    #[test]
    fn normal_quantile_against_reference_values() {
        // Reference values from an independent implementation.
        for (p, z) in [
            (0.975, 1.959963984540054),
            (0.9, 1.2815515655446004),
            (0.5, 0.0),
            (1e-10, -6.361340902404056),
            (0.999999, 4.753424308817087),
        ] {
            let got: f64 = normal_quantile(p);
            assert!((got - z).abs() < 1e-12, "p={p}: {got} vs {z}");
        }
        assert_eq!(normal_quantile(0.0f64), f64::NEG_INFINITY);
        assert!(normal_quantile(1.5f64).is_nan());
    }

    #[test]
    fn sample_size_constant_matches_published_value() {
        let k: f64 = sample_size_constant(0.05, 0.05, 0.9).unwrap();
        assert!((k - 4202.969).abs() < 0.01, "{k}");
    }

    #[test]
    fn required_impressions_examples() {
        let plan = |c| SampleSizePlan::<f64>::with_defaults(c).unwrap().required_impressions;
        assert_eq!(plan(2), 1051);
        assert_eq!(plan(10), 379);
        assert!(plan(3) < plan(2));
        for c in 2..=100u32 {
            let cf = c as f64;
            let published = (4202.969 / cf * (1.0 - 1.0 / cf)).ceil() as u64;
            assert_eq!(plan(c), published, "c={c}");
        }
        assert!(required_impressions(1, 0.05, 0.05, 0.9).is_err());
        assert!(required_impressions(2, 0.0, 0.05, 0.9).is_err());
        assert!(required_impressions(2, 0.05, 1.0, 0.9).is_err());
    }

    #[test]
    fn evaluation_cost_examples() {
        assert!((total_evaluation_cost(1, 2, 0.001_f64).unwrap() - 1.051).abs() < 1e-12);
        assert!((total_evaluation_cost(200_000, 2, 0.001_f64).unwrap() - 210_200.0).abs() < 1e-6);
        assert!(total_evaluation_cost(0, 2, 0.001).is_err());
        assert!(total_evaluation_cost(1, 2, -1.0).is_err());
    }

    #[test]
    fn break_even_examples() {
        assert!((max_data_cpi(1.0_f64, 0.6, 0.4).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(max_data_cpi(2.5, 0.4, 0.4).unwrap(), 0.0);
        assert!((max_data_cpi(1.0_f64, 0.3, 0.4).unwrap() + 0.25).abs() < 1e-15);
        assert_eq!(max_data_cpi(1.0, 0.3, 0.0), Err(EconError::ZeroFreePrecision));
        assert!(max_data_cpi(1.0, 1.3, 0.4).is_err());
    }

    #[test]
    fn forecast_examples() {
        let t = table(&[("a", 0.4), ("b", 0.8), ("one", 1.0)]);
        let all_sure = vec![vec!["one"]; 7];
        assert_eq!(forecast_category(&all_sure, &t, Combiner::Max).unwrap(), 7.0);
        let users = vec![vec!["a"], vec!["a", "b"]];
        assert!((forecast_category(&users, &t, Combiner::Mean).unwrap() - 1.0).abs() < 1e-15);
        assert!((forecast_category(&users, &t, Combiner::Max).unwrap() - 1.2).abs() < 1e-15);
        assert!((forecast_category(&users, &t, Combiner::Min).unwrap() - 0.8).abs() < 1e-15);
        let none: Vec<Vec<&str>> = vec![];
        assert_eq!(forecast_category(&none, &t, Combiner::Mean).unwrap(), 0.0);
        let untagged: Vec<Vec<&str>> = vec![vec![], vec!["b"]];
        assert_eq!(forecast_category(&untagged, &t, Combiner::Mean).unwrap(), 0.8);
        assert_eq!(
            forecast_category(&[vec!["zzz"]], &t, Combiner::Mean),
            Err(EconError::UnknownTag("zzz".into()))
        );
    }

    #[test]
    fn median_combiner() {
        let t = table(&[("a", 0.1), ("b", 0.5), ("c", 0.9), ("d", 0.3)]);
        let odd = forecast_category(&[vec!["a", "b", "c"]], &t, Combiner::Median).unwrap();
        assert_eq!(odd, 0.5);
        let even = forecast_category(&[vec!["a", "b", "c", "d"]], &t, Combiner::Median).unwrap();
        assert!((even - 0.4).abs() < 1e-15);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn break_even_is_homogeneous_in_cpi(
                cpi in 0.0f64..100.0, a in 0.0f64..1.0, b in 0.01f64..1.0,
            ) {
                let once = max_data_cpi(cpi, a, b).unwrap();
                let twice = max_data_cpi(2.0 * cpi, a, b).unwrap();
                prop_assert!((twice - 2.0 * once).abs() <= 1e-12 * once.abs().max(1.0));
            }

            #[test]
            fn forecast_bounded_and_monotone(
                ps in prop::collection::vec(0.0f64..1.0, 3),
                bump in 0usize..3,
                users in prop::collection::vec(prop::collection::vec(0usize..3, 0..4), 0..30),
                comb in prop::sample::select(vec![Combiner::Max, Combiner::Min, Combiner::Mean, Combiner::Median]),
            ) {
                let names = ["x", "y", "z"];
                let tagged: Vec<Vec<&str>> = users.iter().map(|u| u.iter().map(|&i| names[i]).collect()).collect();
                let t1 = table(&[("x", ps[0]), ("y", ps[1]), ("z", ps[2])]);
                let mut raised = ps.clone();
                raised[bump] = (raised[bump] + 0.1).min(1.0);
                let t2 = table(&[("x", raised[0]), ("y", raised[1]), ("z", raised[2])]);
                let f1 = forecast_category(&tagged, &t1, comb).unwrap();
                let f2 = forecast_category(&tagged, &t2, comb).unwrap();
                prop_assert!(f1 >= 0.0 && f1 <= tagged.len() as f64 + 1e-12);
                prop_assert!(f2 >= f1 - 1e-12);
            }
        }
    }
}

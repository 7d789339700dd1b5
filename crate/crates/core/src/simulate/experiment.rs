//! Repeated-trial experiments on simulated campaigns.
//!
//! Seeds are derived from the scenario's base seed by stream path, so every
//! trial is reproducible on its own and results do not depend on thread
//! scheduling. Within a sweep, trial `t` reuses the same campaign streams at
//! every grid point (common random numbers), so differences between grid
//! points reflect the swept parameter rather than fresh sampling noise.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{aggregate, derive_seed, gen_campaign, perturb_profile, SimulateError, SplitSpec};
use crate::domain::{CampaignAggregate, PredictiveValues};
use crate::infer::{confidence_interval, estimate_positives_inferred, infer_predictive_values, InferError, QpProblem};
use crate::rank::{estimate_positives_rank, positive_fraction, recognized_fraction, score_source};

const STREAM_CAMPAIGN_SWEEP: u64 = 3;
const STREAM_NOISE_SWEEP: u64 = 4;
const STREAM_COMPARISON: u64 = 7;
const STREAM_COVERAGE: u64 = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedProfile {
    pub name: String,
    pub values: PredictiveValues<f64>,
}

/// A complete simulation study description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub profiles: Vec<NamedProfile>,
    pub split: SplitSpec,
    /// Campaign counts for the campaign-count sweep (noise-free profiles).
    pub campaign_counts: Vec<usize>,
    pub trials: usize,
    /// Noise amplitudes for the noise sweep.
    pub zeta_grid: Vec<f64>,
    /// Campaigns per trial in the noise sweep.
    pub noise_campaigns: usize,
    pub xi: f64,
    pub normalize: bool,
    pub base_seed: u64,
}

impl Scenario {
    /// The standard study: both reference profiles, 100-user campaigns,
    /// 100 trials, 3..=10 campaigns, noise up to 0.35 with 6 campaigns.
    ///
    /// Both reference profiles violate a tight unbiasedness band
    /// (`|α₁ − β₂|` is 0.1 and 0.2), so the band is opened fully.
    pub fn standard(base_seed: u64) -> Self {
        Self {
            profiles: vec![
                NamedProfile {
                    name: "high_quality".into(),
                    values: PredictiveValues::high_quality(),
                },
                NamedProfile {
                    name: "low_quality".into(),
                    values: PredictiveValues::low_quality(),
                },
            ],
            split: SplitSpec::STANDARD,
            campaign_counts: (3..=10).collect(),
            trials: 100,
            zeta_grid: (0..=7).map(|i| i as f64 / 20.0).collect(),
            noise_campaigns: 6,
            xi: 1.0,
            normalize: true,
            base_seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sweep {
    CampaignCount,
    Noise,
}

/// Outcome of one simulated inference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub sweep: Sweep,
    pub profile: String,
    pub num_campaigns: usize,
    pub zeta: f64,
    pub trial: usize,
    pub seed: u64,
    pub estimate: Option<PredictiveValues<f64>>,
    pub abs_err_alpha1: Option<f64>,
    pub error: Option<String>,
}

/// Simulates `num_campaigns` campaigns from the trial stream `seed`; each
/// campaign draws its own perturbed copy of `profile`.
pub fn simulate_campaigns(
    profile: &PredictiveValues<f64>,
    split: SplitSpec,
    num_campaigns: usize,
    zeta: f64,
    seed: u64,
) -> Result<Vec<CampaignAggregate<u64>>, SimulateError> {
    (0..num_campaigns)
        .map(|j| {
            let noisy = perturb_profile(profile, zeta, derive_seed(seed, &[j as u64, 0]));
            let sample = gen_campaign(&noisy, split, derive_seed(seed, &[j as u64, 1]));
            aggregate(&sample, format!("c{j:03}").into())
        })
        .collect()
}

fn run_trial(
    scenario: &Scenario,
    sweep: Sweep,
    profile: &NamedProfile,
    num_campaigns: usize,
    zeta: f64,
    trial: usize,
    seed: u64,
) -> TrialRecord {
    let outcome = simulate_campaigns(&profile.values, scenario.split, num_campaigns, zeta, seed)
        .map_err(|e| e.to_string())
        .and_then(|campaigns| {
            let problem = QpProblem::new(campaigns)
                .with_xi(scenario.xi)
                .with_normalize(scenario.normalize);
            infer_predictive_values(&problem).map_err(|e| e.to_string())
        });
    let (estimate, error) = match outcome {
        Ok(sol) => (Some(sol.values), None),
        Err(e) => (None, Some(e)),
    };
    TrialRecord {
        sweep,
        profile: profile.name.clone(),
        num_campaigns,
        zeta,
        trial,
        seed,
        abs_err_alpha1: estimate.map(|e| (e.alpha[0] - profile.values.alpha[0]).abs()),
        estimate,
        error,
    }
}

/// Runs every trial of one sweep, ordered by (profile, grid point, trial).
pub fn run_sweep(scenario: &Scenario, sweep: Sweep) -> Vec<TrialRecord> {
    let grid: Vec<(usize, f64)> = match sweep {
        Sweep::CampaignCount => scenario.campaign_counts.iter().map(|&k| (k, 0.0)).collect(),
        Sweep::Noise => scenario
            .zeta_grid
            .iter()
            .map(|&z| (scenario.noise_campaigns, z))
            .collect(),
    };
    let stream = match sweep {
        Sweep::CampaignCount => STREAM_CAMPAIGN_SWEEP,
        Sweep::Noise => STREAM_NOISE_SWEEP,
    };
    let jobs: Vec<(usize, usize, usize)> = (0..scenario.profiles.len())
        .flat_map(|p| (0..grid.len()).flat_map(move |g| (0..scenario.trials).map(move |t| (p, g, t))))
        .collect();
    jobs.par_iter()
        .map(|&(p, g, t)| {
            let seed = derive_seed(scenario.base_seed, &[stream, p as u64, t as u64]);
            let (k, zeta) = grid[g];
            run_trial(scenario, sweep, &scenario.profiles[p], k, zeta, t, seed)
        })
        .collect()
}

/// One point of a figure: mean `|α̂₁ − α₁|` over the successful trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub profile: String,
    pub num_campaigns: usize,
    pub zeta: f64,
    pub mean_abs_err_alpha1: f64,
    pub trials_ok: usize,
    pub trials_failed: usize,
}

/// Averages trial records per (profile, campaign count, ζ), keeping the
/// order in which grid points first appear.
pub fn summarize(records: &[TrialRecord]) -> Vec<GridPoint> {
    let mut points: Vec<(GridPoint, f64)> = Vec::new();
    for r in records {
        let idx = points.iter().position(|(p, _)| {
            p.profile == r.profile && p.num_campaigns == r.num_campaigns && p.zeta == r.zeta
        });
        let idx = idx.unwrap_or_else(|| {
            points.push((
                GridPoint {
                    profile: r.profile.clone(),
                    num_campaigns: r.num_campaigns,
                    zeta: r.zeta,
                    mean_abs_err_alpha1: f64::NAN,
                    trials_ok: 0,
                    trials_failed: 0,
                },
                0.0,
            ));
            points.len() - 1
        });
        let (point, sum) = &mut points[idx];
        match r.abs_err_alpha1 {
            Some(e) => {
                point.trials_ok += 1;
                *sum += e;
            }
            None => point.trials_failed += 1,
        }
    }
    points
        .into_iter()
        .map(|(mut p, sum)| {
            if p.trials_ok > 0 {
                p.mean_abs_err_alpha1 = sum / p.trials_ok as f64;
            }
            p
        })
        .collect()
}

/// Campaign-count sweep: mean precision error versus number of campaigns.
pub fn campaign_count_curve(scenario: &Scenario) -> Vec<GridPoint> {
    summarize(&run_sweep(scenario, Sweep::CampaignCount))
}

/// Noise sweep: mean precision error versus noise amplitude ζ.
pub fn noise_curve(scenario: &Scenario) -> Vec<GridPoint> {
    summarize(&run_sweep(scenario, Sweep::Noise))
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len()) as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

/// Pearson correlations between held-out true positive counts and the two
/// positive-population estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorComparison {
    pub pearson_inferred: f64,
    pub pearson_rank: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Simulate(#[from] SimulateError),
    #[error(transparent)]
    Infer(#[from] InferError),
    #[error(transparent)]
    Rank(#[from] crate::rank::RankError),
}

/// Simulates `num_campaigns` campaigns, fits both methods on the first half
/// and scores their positive-population estimates on the second half.
pub fn compare_estimators(
    profile: &PredictiveValues<f64>,
    split: SplitSpec,
    num_campaigns: usize,
    xi: f64,
    seed: u64,
) -> Result<EstimatorComparison, ExperimentError> {
    let campaigns = simulate_campaigns(
        profile,
        split,
        num_campaigns,
        0.0,
        derive_seed(seed, &[STREAM_COMPARISON]),
    )?;
    let (train, test) = campaigns.split_at(num_campaigns / 2);

    let fitted = infer_predictive_values(&QpProblem::new(train.to_vec()).with_xi(xi))?;
    let scored = score_source::<f64, u64>(&"source".into(), train)?;
    let tau_hat: f64 = recognized_fraction(train);

    let mut truth = Vec::with_capacity(test.len());
    let mut inferred = Vec::with_capacity(test.len());
    let mut ranked = Vec::with_capacity(test.len());
    for c in test {
        truth.push(c.truth.positive as f64);
        inferred.push(estimate_positives_inferred(&fitted.values, c.source.lift()));
        let r_hat = positive_fraction::<f64, u64>(c)?;
        ranked.push(estimate_positives_rank(c.population as f64, tau_hat, r_hat, scored.mean_err)?);
    }
    Ok(EstimatorComparison {
        pearson_inferred: pearson(&inferred, &truth),
        pearson_rank: pearson(&ranked, &truth),
    })
}

/// Fraction of trials whose `(1 − δ)` interval for α₁ covers the true α₁.
pub fn alpha1_coverage(
    profile: &PredictiveValues<f64>,
    split: SplitSpec,
    num_campaigns: usize,
    delta: f64,
    xi: f64,
    trials: usize,
    base_seed: u64,
) -> Result<f64, ExperimentError> {
    let hits = (0..trials)
        .into_par_iter()
        .map(|t| {
            let seed = derive_seed(base_seed, &[STREAM_COVERAGE, t as u64]);
            let campaigns = simulate_campaigns(profile, split, num_campaigns, 0.0, seed)?;
            let problem = QpProblem::new(campaigns).with_xi(xi);
            let sol = infer_predictive_values(&problem)?;
            let hw = confidence_interval(&sol, &problem, delta)?;
            Ok(((sol.values.alpha[0] - profile.alpha[0]).abs() <= hw[0]) as usize)
        })
        .collect::<Result<Vec<usize>, ExperimentError>>()?;
    Ok(hits.iter().sum::<usize>() as f64 / trials as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(seed: u64) -> Scenario {
        let mut s = Scenario::standard(seed);
        s.trials = 4;
        s.campaign_counts = vec![3, 5];
        s.zeta_grid = vec![0.0, 0.2];
        s
    }

    #[test]
    fn sweeps_are_reproducible() {
        let a = run_sweep(&tiny(9), Sweep::CampaignCount);
        let b = run_sweep(&tiny(9), Sweep::CampaignCount);
        assert_eq!(a, b);
        assert_eq!(a.len(), 2 * 2 * 4);
        assert_ne!(a, run_sweep(&tiny(10), Sweep::CampaignCount));
    }

    #[test]
    fn summary_has_one_point_per_grid_cell() {
        let pts = noise_curve(&tiny(1));
        assert_eq!(pts.len(), 4);
        for p in &pts {
            assert_eq!(p.trials_ok + p.trials_failed, 4);
            assert_eq!(p.num_campaigns, 6);
            assert!(p.mean_abs_err_alpha1.is_finite());
        }
        assert_eq!(pts[0].profile, "high_quality");
        assert_eq!(pts[1].zeta, 0.2);
    }

    #[test]
    fn campaign_prefixes_are_shared_across_counts() {
        let p = PredictiveValues::high_quality();
        let five = simulate_campaigns(&p, SplitSpec::STANDARD, 5, 0.0, 77).unwrap();
        let three = simulate_campaigns(&p, SplitSpec::STANDARD, 3, 0.0, 77).unwrap();
        assert_eq!(&five[..3], &three[..]);
    }

    #[test]
    fn pearson_known_values() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]) - 1.0).abs() < 1e-15);
        assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-15);
        assert!(pearson(&[1.0, 2.0, 3.0, 4.0], &[1.0, -1.0, -1.0, 1.0]).abs() < 1e-15);
    }
}

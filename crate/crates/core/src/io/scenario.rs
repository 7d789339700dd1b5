//! Simulation scenarios in TOML.
//!
//! ```toml
//! base_seed = 1
//! trials = 100
//! campaign_counts = [3, 4, 5, 6]
//! zeta_grid = [0.0, 0.1, 0.2, 0.3]
//! noise_campaigns = 6
//! xi = 1.0            # optional, default 0.05
//! normalize = true    # optional, default true
//!
//! [split]
//! fixed_per_tag = 20
//! uniform_remainder = 40
//!
//! [[profiles]]
//! name = "high_quality"
//! alpha = [0.8, 0.15, 0.05]
//! beta = [0.2, 0.7, 0.1]
//! gamma = [0.4, 0.5, 0.1]
//! ```

use std::path::Path;

use serde::Deserialize;

use super::{read_to_string, FileError};
use crate::domain::PredictiveValues;
use crate::infer::{DEFAULT_XI, MIN_CAMPAIGNS};
use crate::simulate::experiment::{NamedProfile, Scenario};
use crate::simulate::SplitSpec;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSplit {
    fixed_per_tag: i64,
    uniform_remainder: i64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProfile {
    name: String,
    alpha: [f64; 3],
    beta: [f64; 3],
    gamma: [f64; 3],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    base_seed: u64,
    trials: usize,
    campaign_counts: Vec<usize>,
    zeta_grid: Vec<f64>,
    noise_campaigns: usize,
    xi: Option<f64>,
    normalize: Option<bool>,
    split: RawSplit,
    profiles: Vec<RawProfile>,
}

pub fn load_scenario(path: &Path) -> Result<Scenario, FileError> {
    parse_scenario(&read_to_string(path)?)
}

pub fn parse_scenario(text: &str) -> Result<Scenario, FileError> {
    let raw: RawScenario = toml::from_str(text).map_err(|e| FileError::Scenario(e.to_string()))?;
    let bad = |m: String| Err(FileError::Scenario(m));

    if raw.profiles.is_empty() {
        return bad("at least one profile is required".into());
    }
    let mut profiles = Vec::with_capacity(raw.profiles.len());
    for p in raw.profiles {
        let values = PredictiveValues::new(p.alpha, p.beta, p.gamma)
            .map_err(|e| FileError::Scenario(format!("profile `{}`: {e}", p.name)))?;
        profiles.push(NamedProfile { name: p.name, values });
    }
    let split = SplitSpec::new(raw.split.fixed_per_tag, raw.split.uniform_remainder)
        .map_err(|e| FileError::Scenario(e.to_string()))?;
    if split.total() == 0 {
        return bad("split produces an empty audience".into());
    }
    if raw.trials == 0 {
        return bad("trials must be positive".into());
    }
    if let Some(k) = raw
        .campaign_counts
        .iter()
        .chain(std::iter::once(&raw.noise_campaigns))
        .find(|&&k| k < MIN_CAMPAIGNS)
    {
        return bad(format!("campaign count {k} is below {MIN_CAMPAIGNS}"));
    }
    if let Some(z) = raw.zeta_grid.iter().find(|z| !(0.0..=0.35).contains(*z)) {
        return bad(format!("noise amplitude {z} outside [0, 0.35]"));
    }
    let xi = raw.xi.unwrap_or(DEFAULT_XI);
    if !(xi >= 0.0) {
        return bad(format!("xi must be non-negative, got {xi}"));
    }
    Ok(Scenario {
        profiles,
        split,
        campaign_counts: raw.campaign_counts,
        trials: raw.trials,
        zeta_grid: raw.zeta_grid,
        noise_campaigns: raw.noise_campaigns,
        xi,
        normalize: raw.normalize.unwrap_or(true),
        base_seed: raw.base_seed,
    })
}

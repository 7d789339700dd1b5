//! The `tagqual` command line.
//!
//! Output is JSON on standard output (or `--out <path>`), an aligned table
//! with `--pretty`, and CSV for `figures`. Exit status: 0 success, 1 input
//! or usage error, 2 numeric failure.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use tagqual::econ::{forecast_category, max_data_cpi, Combiner, EconError, SampleSizePlan};
use tagqual::io::campaign_file::parse_campaign_file;
use tagqual::io::forecast_input::{load_precision_table, load_tagged_users};
use tagqual::io::grid::{format_grid, Curve};
use tagqual::io::scenario::load_scenario;
use tagqual::io::FileError;
use tagqual::simulate::experiment::{campaign_count_curve, noise_curve, run_sweep, GridPoint, Scenario, Sweep};
use tagqual::{assess_sources, AssessError, AssessOptions, InferError, RankEntryF64, RankError};

#[derive(Parser)]
#[command(name = "tagqual", version, about = "Assess user-tagging data sources from campaign aggregates")]
struct Cli {
    /// Print a human-readable table instead of machine-readable output.
    #[arg(long, global = true)]
    pretty: bool,
    /// Write output to this file instead of standard output.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepArg {
    CampaignCount,
    Noise,
    All,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation scenario and emit one record per trial.
    Simulate {
        #[arg(long, value_name = "TOML")]
        scenario: PathBuf,
        /// Overrides the scenario's base seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value = "all")]
        sweep: SweepArg,
    },
    /// Rank sources by mean relative error of their positive fraction.
    Rank {
        #[arg(value_name = "CAMPAIGNS_CSV")]
        campaigns: PathBuf,
    },
    /// Infer each source's predictive values with confidence intervals.
    Infer {
        #[arg(value_name = "CAMPAIGNS_CSV")]
        campaigns: PathBuf,
        /// Half-width of the |alpha1 - beta2| band.
        #[arg(long, default_value_t = tagqual::infer::DEFAULT_XI)]
        xi: f64,
        /// Intervals have level 1 - delta.
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        /// Fit raw counts instead of per-campaign fractions.
        #[arg(long)]
        no_normalize: bool,
    },
    /// Impressions needed for a brute-force evaluation campaign.
    Plan {
        #[arg(long)]
        categories: u32,
        #[arg(long, default_value_t = SampleSizePlan::<f64>::DEFAULT_MARGIN)]
        margin: f64,
        #[arg(long, default_value_t = SampleSizePlan::<f64>::DEFAULT_SIGNIFICANCE)]
        significance: f64,
        #[arg(long, default_value_t = SampleSizePlan::<f64>::DEFAULT_POWER)]
        power: f64,
    },
    /// Highest data cost per impression worth paying for a source.
    Breakeven {
        #[arg(long)]
        cpi: f64,
        #[arg(long)]
        alpha1_data: f64,
        #[arg(long)]
        alpha1_free: f64,
    },
    /// Expected number of target-category users in a tagged audience.
    Forecast {
        #[arg(long, value_name = "CSV")]
        tags: PathBuf,
        #[arg(long, value_name = "CSV")]
        precisions: PathBuf,
        /// How to merge several tags on one user: max, min, mean, median.
        #[arg(long, default_value = "max")]
        combiner: Combiner,
    },
    /// Emit the data grid of a simulation curve as CSV.
    Figures {
        #[arg(long, value_name = "TOML")]
        scenario: PathBuf,
        /// 3: error versus campaign count; 4: error versus noise.
        #[arg(long, value_parser = clap::value_parser!(u8).range(3..=4))]
        figure: u8,
        /// Overrides the scenario's base seed.
        #[arg(long)]
        seed: Option<u64>,
    },
}

enum Failure {
    Input(String),
    Numeric(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Input(_) => 1,
            Failure::Numeric(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::Numeric(m) => m,
        }
    }
}

impl From<FileError> for Failure {
    fn from(e: FileError) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<EconError> for Failure {
    fn from(e: EconError) -> Self {
        match e {
            EconError::ZeroFreePrecision => Failure::Numeric(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

fn rank_failure(e: &RankError) -> Failure {
    Failure::Numeric(format!("{e:?}: {e}"))
}

impl From<AssessError> for Failure {
    fn from(e: AssessError) -> Self {
        match &e {
            AssessError::Rank(r) => rank_failure(r),
            AssessError::Infer { cause, .. } => {
                let name = match cause {
                    InferError::TooFewCampaigns(_) => "TooFewCampaigns",
                    InferError::UnequalPopulations(..) => "UnequalPopulations",
                    InferError::NonConvergence { .. } => "NonConvergence",
                    InferError::Infeasible(_) => "Infeasible",
                    InferError::InsufficientDof(_) => "InsufficientDof",
                    InferError::InvalidDelta(_) => return Failure::Input(e.to_string()),
                    InferError::SingularDesign => "SingularDesign",
                };
                Failure::Numeric(format!("{name}: {e}"))
            }
        }
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the exit status.
pub fn run<I, S>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let rendered = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = stdout.write_all(rendered.as_bytes());
                    0
                }
                _ => {
                    let _ = stderr.write_all(rendered.as_bytes());
                    1
                }
            };
        }
    };
    match execute(&cli.command, cli.pretty).and_then(|text| emit(&text, cli.out.as_deref(), stdout)) {
        Ok(()) => 0,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message());
            f.code()
        }
    }
}

fn emit(text: &str, out: Option<&Path>, stdout: &mut dyn Write) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure::Input(format!("{}: {e}", path.display()))),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| Failure::Input(format!("standard output: {e}"))),
    }
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

fn table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let widths: Vec<usize> = (0..headers.len())
        .map(|c| rows.iter().map(|r| r[c].len()).chain([headers[c].len()]).max().unwrap_or(0))
        .collect();
    let line = |cells: Vec<&str>| {
        let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
        padded.join("  ").trim_end().to_owned() + "\n"
    };
    let mut s = line(headers.to_vec());
    s.push_str(&line(widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().iter().map(String::as_str).collect()));
    for r in rows {
        s.push_str(&line(r.iter().map(String::as_str).collect()));
    }
    s
}

fn f6(v: f64) -> String {
    format!("{v:.6}")
}

fn scenario_with_seed(path: &Path, seed: Option<u64>) -> Result<Scenario, Failure> {
    let mut scenario = load_scenario(path)?;
    if let Some(seed) = seed {
        scenario.base_seed = seed;
    }
    Ok(scenario)
}

#[derive(Serialize)]
struct RankRow<'a> {
    rank: usize,
    #[serde(flatten)]
    entry: &'a RankEntryF64,
}

fn execute(command: &Command, pretty: bool) -> Result<String, Failure> {
    match command {
        Command::Simulate { scenario, seed, sweep } => {
            let scenario = scenario_with_seed(scenario, *seed)?;
            let sweeps: &[Sweep] = match sweep {
                SweepArg::CampaignCount => &[Sweep::CampaignCount],
                SweepArg::Noise => &[Sweep::Noise],
                SweepArg::All => &[Sweep::CampaignCount, Sweep::Noise],
            };
            let records: Vec<_> = sweeps.iter().flat_map(|s| run_sweep(&scenario, *s)).collect();
            if !pretty {
                return Ok(json(&records));
            }
            let rows = records
                .iter()
                .map(|r| {
                    vec![
                        format!("{:?}", r.sweep),
                        r.profile.clone(),
                        r.num_campaigns.to_string(),
                        format!("{:.2}", r.zeta),
                        r.trial.to_string(),
                        r.abs_err_alpha1.map_or_else(|| "-".into(), f6),
                        r.error.clone().unwrap_or_default(),
                    ]
                })
                .collect::<Vec<_>>();
            Ok(table(&["sweep", "profile", "campaigns", "zeta", "trial", "abs_err_alpha1", "error"], &rows))
        }
        Command::Rank { campaigns } => {
            let data = parse_campaign_file(campaigns)?;
            let ranking = tagqual::rank_sources::<f64, u64>(&data).map_err(|e| rank_failure(&e))?;
            if !pretty {
                let rows: Vec<_> = ranking.iter().enumerate().map(|(i, entry)| RankRow { rank: i + 1, entry }).collect();
                return Ok(json(&rows));
            }
            let rows = ranking
                .iter()
                .enumerate()
                .map(|(i, e)| {
                    vec![
                        (i + 1).to_string(),
                        e.source_id.to_string(),
                        f6(e.mean_err),
                        e.per_campaign_err.len().to_string(),
                        e.skipped.len().to_string(),
                    ]
                })
                .collect::<Vec<_>>();
            Ok(table(&["rank", "source", "mean_rel_err", "campaigns", "skipped"], &rows))
        }
        Command::Infer {
            campaigns,
            xi,
            delta,
            no_normalize,
        } => {
            if !(*xi >= 0.0) {
                return Err(Failure::Input(format!("--xi must be non-negative, got {xi}")));
            }
            if !(*delta > 0.0 && *delta < 1.0) {
                return Err(Failure::Input(format!("--delta must lie in (0, 1), got {delta}")));
            }
            let data = parse_campaign_file(campaigns)?;
            let options = AssessOptions {
                xi: *xi,
                normalize: !no_normalize,
                delta: *delta,
            };
            let reports = assess_sources::<f64, u64>(&data, &options)?;
            if !pretty {
                return Ok(json(&reports));
            }
            let names = ["a1", "a2", "a3", "b1", "b2", "b3", "g1", "g2", "g3"];
            let mut rows = Vec::new();
            for r in &reports {
                let values = r.inferred.map(|p| p.to_array());
                for (i, name) in names.iter().enumerate() {
                    rows.push(vec![
                        r.rank.to_string(),
                        r.source_id.to_string(),
                        f6(r.mean_relative_err),
                        (*name).to_owned(),
                        values.map_or_else(|| "-".into(), |v| f6(v[i])),
                        r.ci_half_widths.map_or_else(|| "-".into(), |w| f6(w[i])),
                    ]);
                }
            }
            Ok(table(&["rank", "source", "mean_rel_err", "value", "estimate", "ci_half_width"], &rows))
        }
        Command::Plan {
            categories,
            margin,
            significance,
            power,
        } => {
            let plan = SampleSizePlan::new(*categories, *margin, *significance, *power)?;
            if !pretty {
                return Ok(json(&plan));
            }
            Ok(table(
                &["categories", "margin", "significance", "power", "required_impressions"],
                &[vec![
                    plan.categories.to_string(),
                    plan.margin.to_string(),
                    plan.significance.to_string(),
                    plan.power.to_string(),
                    plan.required_impressions.to_string(),
                ]],
            ))
        }
        Command::Breakeven {
            cpi,
            alpha1_data,
            alpha1_free,
        } => {
            let threshold = max_data_cpi(*cpi, *alpha1_data, *alpha1_free)?;
            #[derive(Serialize)]
            struct Out {
                cpi: f64,
                alpha1_data: f64,
                alpha1_free: f64,
                max_data_cpi: f64,
            }
            let out = Out {
                cpi: *cpi,
                alpha1_data: *alpha1_data,
                alpha1_free: *alpha1_free,
                max_data_cpi: threshold,
            };
            if !pretty {
                return Ok(json(&out));
            }
            Ok(table(
                &["cpi", "alpha1_data", "alpha1_free", "max_data_cpi"],
                &[vec![cpi.to_string(), alpha1_data.to_string(), alpha1_free.to_string(), f6(threshold)]],
            ))
        }
        Command::Forecast {
            tags,
            precisions,
            combiner,
        } => {
            let users = load_tagged_users(tags)?;
            let table_in = load_precision_table::<f64>(precisions)?;
            let expected = forecast_category(&users, &table_in, *combiner)?;
            #[derive(Serialize)]
            struct Out {
                users: usize,
                tagged_users: usize,
                combiner: Combiner,
                expected_count: f64,
            }
            let out = Out {
                users: users.len(),
                tagged_users: users.iter().filter(|u| !u.is_empty()).count(),
                combiner: *combiner,
                expected_count: expected,
            };
            if !pretty {
                return Ok(json(&out));
            }
            Ok(table(
                &["users", "tagged_users", "expected_count"],
                &[vec![out.users.to_string(), out.tagged_users.to_string(), f6(expected)]],
            ))
        }
        Command::Figures { scenario, figure, seed } => {
            let scenario = scenario_with_seed(scenario, *seed)?;
            let (points, curve): (Vec<GridPoint>, Curve) = match figure {
                3 => (campaign_count_curve(&scenario), Curve::CampaignCount),
                _ => (noise_curve(&scenario), Curve::Noise),
            };
            if !pretty {
                return Ok(format!("# base_seed={}\n{}", scenario.base_seed, format_grid(&points, curve)));
            }
            let rows = points
                .iter()
                .map(|p| {
                    vec![
                        p.profile.clone(),
                        match curve {
                            Curve::CampaignCount => p.num_campaigns.to_string(),
                            Curve::Noise => format!("{:.2}", p.zeta),
                        },
                        f6(p.mean_abs_err_alpha1),
                        p.trials_ok.to_string(),
                        p.trials_failed.to_string(),
                    ]
                })
                .collect::<Vec<_>>();
            let x = match curve {
                Curve::CampaignCount => "num_campaigns",
                Curve::Noise => "zeta",
            };
            Ok(table(&["profile", x, "mean_abs_err_alpha1", "ok", "failed"], &rows))
        }
    }
}

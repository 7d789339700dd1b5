use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use tagqual::io::campaign_file::format_campaigns;
use tagqual::simulate::experiment::simulate_campaigns;
use tagqual::simulate::SplitSpec;
use tagqual::{assess_sources, AssessOptions, PredictiveValuesF64, QualityReportF64, RankEntryF64, SourceId};

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("tagqual").chain(args.iter().copied());
    let code = tagqual_cli::run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn scenario_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/standard.toml")
}

fn two_sources() -> BTreeMap<SourceId, Vec<tagqual::CampaignAggregate<u64>>> {
    let mut m = BTreeMap::new();
    m.insert(
        SourceId::from("hq"),
        simulate_campaigns(&PredictiveValuesF64::high_quality(), SplitSpec::STANDARD, 6, 0.0, 1).unwrap(),
    );
    m.insert(
        SourceId::from("lq"),
        simulate_campaigns(&PredictiveValuesF64::low_quality(), SplitSpec::STANDARD, 5, 0.0, 2).unwrap(),
    );
    m
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn plan_two_categories() {
    let (code, out, _) = run(&["plan", "--categories", "2"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["required_impressions"], 1051);
    let (_, out, _) = run(&["plan", "--categories", "10"]);
    assert!(out.contains("\"required_impressions\": 379"));
}

#[test]
fn infer_two_campaigns_is_numeric_failure() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(
        dir.path(),
        "two.csv",
        "campaign_id,source_id,population,d_plus,d_minus,g_plus,g_minus\nc1,s,100,40,30,50,40\nc2,s,100,20,50,38,50\n",
    );
    let (code, out, err) = run(&["infer", &f]);
    assert_eq!(code, 2);
    assert!(out.is_empty());
    assert!(err.contains("TooFewCampaigns"), "{err}");
}

#[test]
fn usage_errors_name_the_flag() {
    let (code, _, err) = run(&["plan", "--categories", "2", "--colour"]);
    assert_eq!(code, 1);
    assert!(err.contains("--colour"), "{err}");
    let (code, _, err) = run(&["plan", "--categories", "two"]);
    assert_eq!(code, 1);
    assert!(err.contains("--categories"), "{err}");
    let (code, _, _) = run(&[]);
    assert_eq!(code, 1);
    let (code, out, _) = run(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("figures"));
}

#[test]
fn input_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = run(&["rank", dir.path().join("nope.csv").to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.contains("nope.csv"));
    let bad = write(
        dir.path(),
        "bad.csv",
        "campaign_id,source_id,population,d_plus,d_minus,g_plus,g_minus\nc1,s,100,40,30,50,40\nc2,s,100,70,50,38,50\n",
    );
    let (code, _, err) = run(&["infer", &bad]);
    assert_eq!(code, 1);
    assert!(err.contains("line 3"), "{err}");
    let (code, _, _) = run(&["plan", "--categories", "1"]);
    assert_eq!(code, 1);
}

#[test]
fn infer_report_round_trips() {
    let data = two_sources();
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "c.csv", &format_campaigns(&data));
    let (code, out, err) = run(&["infer", &f, "--xi", "1"]);
    assert_eq!(code, 0, "{err}");
    let parsed: Vec<QualityReportF64> = serde_json::from_str(&out).unwrap();
    let direct = assess_sources::<f64, u64>(&data, &AssessOptions { xi: 1.0, ..Default::default() }).unwrap();
    assert_eq!(parsed.len(), direct.len());
    for (p, d) in parsed.iter().zip(&direct) {
        assert_eq!((p.rank, p.n_campaigns, &p.source_id), (d.rank, d.n_campaigns, &d.source_id));
        assert!((p.mean_relative_err - d.mean_relative_err).abs() <= 1e-12);
        let (pv, dv) = (p.inferred.unwrap().to_array(), d.inferred.unwrap().to_array());
        let (pw, dw) = (p.ci_half_widths.unwrap(), d.ci_half_widths.unwrap());
        for i in 0..9 {
            assert!((pv[i] - dv[i]).abs() <= 1e-12);
            assert!((pw[i] - dw[i]).abs() <= 1e-12);
        }
    }
    let (code, table, _) = run(&["infer", &f, "--xi", "1", "--pretty"]);
    assert_eq!(code, 0);
    assert!(table.starts_with("rank"));
}

#[test]
fn rank_report_round_trips_and_out_flag() {
    let data = two_sources();
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "c.csv", &format_campaigns(&data));
    let target = dir.path().join("rank.json");
    let (code, out, _) = run(&["rank", &f, "--out", target.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(out.is_empty());
    let rows: Vec<serde_json::Value> = serde_json::from_str(&std::fs::read_to_string(&target).unwrap()).unwrap();
    let direct = tagqual::rank_sources::<f64, u64>(&data).unwrap();
    for (i, (row, d)) in rows.iter().zip(&direct).enumerate() {
        assert_eq!(row["rank"], i + 1);
        let entry: RankEntryF64 = serde_json::from_value(row.clone()).unwrap();
        assert_eq!(&entry, d);
    }
}

#[test]
fn breakeven_and_forecast() {
    let (code, out, _) = run(&["breakeven", "--cpi", "1", "--alpha1-data", "0.6", "--alpha1-free", "0.4"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!((v["max_data_cpi"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    let (code, _, _) = run(&["breakeven", "--cpi", "1", "--alpha1-data", "0.6", "--alpha1-free", "0"]);
    assert_eq!(code, 2);

    let dir = tempfile::tempdir().unwrap();
    let tags = write(dir.path(), "t.csv", "user_id,tags\nu1,a\nu2,a;b\nu3,\n");
    let prec = write(dir.path(), "p.csv", "category,precision\na,0.5\nb,0.9\n");
    let (code, out, _) = run(&["forecast", "--tags", &tags, "--precisions", &prec]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!((v["expected_count"].as_f64().unwrap() - 1.4).abs() < 1e-12);
    let (_, out, _) = run(&["forecast", "--tags", &tags, "--precisions", &prec, "--combiner", "mean"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!((v["expected_count"].as_f64().unwrap() - 1.2).abs() < 1e-12);
    let (code, _, _) = run(&["forecast", "--tags", &tags, "--precisions", &prec, "--combiner", "vote"]);
    assert_eq!(code, 1);
}

#[test]
fn figures_grid_is_reproducible() {
    let s = scenario_path();
    let s = s.to_str().unwrap();
    let (code, first, _) = run(&["figures", "--scenario", s, "--figure", "3"]);
    assert_eq!(code, 0);
    let (_, second, _) = run(&["figures", "--scenario", s, "--figure", "3"]);
    assert_eq!(first, second);
    let lines: Vec<&str> = first.lines().collect();
    assert_eq!(lines[0], "# base_seed=20150531");
    assert_eq!(lines[1], "profile,num_campaigns,mean_abs_err_alpha1,trials_ok,trials_failed");
    assert_eq!(lines.len(), 2 + 2 * 8);
    assert!(lines[2].starts_with("high_quality,3,"));
    assert!(lines[10].starts_with("low_quality,3,"));

    let (_, reseeded, _) = run(&["figures", "--scenario", s, "--figure", "3", "--seed", "99"]);
    assert_ne!(first, reseeded);
    let (code, noise, _) = run(&["figures", "--scenario", s, "--figure", "4"]);
    assert_eq!(code, 0);
    assert!(noise.lines().nth(1).unwrap().starts_with("profile,zeta,"));
}

#[test]
fn simulate_emits_trial_records() {
    let dir = tempfile::tempdir().unwrap();
    let doc = std::fs::read_to_string(scenario_path())
        .unwrap()
        .replace("trials = 100", "trials = 2")
        .replace("campaign_counts = [3, 4, 5, 6, 7, 8, 9, 10]", "campaign_counts = [3, 4]")
        .replace("zeta_grid = [0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35]", "zeta_grid = [0.1]");
    let f = write(dir.path(), "s.toml", &doc);
    let (code, out, _) = run(&["simulate", "--scenario", &f, "--seed", "5"]);
    assert_eq!(code, 0);
    let records: Vec<serde_json::Value> = serde_json::from_str(&out).unwrap();
    // 2 profiles x (2 counts + 1 noise level) x 2 trials.
    assert_eq!(records.len(), 12);
    assert_eq!(run(&["simulate", "--scenario", &f, "--seed", "5"]).1, out);
    let (_, noise_only, _) = run(&["simulate", "--scenario", &f, "--sweep", "noise"]);
    assert_eq!(serde_json::from_str::<Vec<serde_json::Value>>(&noise_only).unwrap().len(), 4);
}

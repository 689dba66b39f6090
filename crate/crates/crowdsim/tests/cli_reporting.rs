//! Report emission and CLI behavior: file outputs, replay/report round
//! trips, sweep grids, seed overrides, and machine-readable errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use crowdsim::engine::{run_experiment, Budget, ExperimentParams};
use crowdsim::report;
use crowdsim::sweep::SweepSpec;
use crowdsim::worker::{LatencyDistribution, PopulationSpec, WorkerPopulation};

fn scratch_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("crowdsim-test-{}-{tag}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn small_population() -> WorkerPopulation {
    let spec = PopulationSpec {
        latency: LatencyDistribution::Bimodal {
            fast_weight: 0.8,
            fast_mean_s: 10.0,
            fast_std_s: 2.0,
            slow_mean_s: 80.0,
            slow_std_s: 10.0,
        },
        sigma_ratio: 0.2,
        accuracy: 1.0,
    };
    WorkerPopulation::synthesize(&spec, 100, 5).unwrap()
}

const RUN_CONFIG: &str = r#"
seed = 12

[population]
source = "synthetic"
count = 100
seed = 5
family = "bimodal"
fast_weight = 0.8
fast_mean_s = 10.0
fast_std_s = 2.0
slow_mean_s = 80.0
slow_std_s = 10.0
sigma_ratio = 0.2
accuracy = 1.0

[pool]
N_p = 6
PM_ell = 20.0
reserve_watermark_frac = 0.34
recruitment_lead_time_s = 30.0
maintenance_interval_s = 25.0

[batch]
N_g = 2
R = 1.0
SM = true

[budget]
max_tasks = 30
"#;

#[test]
fn emitted_report_files_are_complete_and_deterministic() {
    let population = small_population();
    let params = ExperimentParams {
        seed: 9,
        pool_size: 6,
        records_per_task: 2,
        mitigate: true,
        budget: Budget {
            max_tasks: Some(24),
            ..Budget::default()
        },
        ..ExperimentParams::default()
    };
    let output = run_experiment(&params, &population, None).unwrap();

    let dir_a = scratch_dir("emit-a");
    report::emit_run(&output, None, &dir_a).unwrap();
    for file in [
        "events.log",
        "metrics.json",
        "summary.json",
        "assignment_log.csv",
        "labels_over_time.csv",
        "batches.csv",
        "learning_curve.csv",
        "latency_percentiles.csv",
    ] {
        assert!(dir_a.join(file).is_file(), "{file} missing");
    }

    // Gantt rows equal the assignment count (plus header).
    let gantt = fs::read_to_string(dir_a.join("assignment_log.csv")).unwrap();
    assert_eq!(gantt.lines().count(), output.assignments.len() + 1);
    // Every row ended with a status.
    for line in gantt.lines().skip(1) {
        assert!(line.ends_with("finished") || line.ends_with("terminated"));
    }

    // Percentile export carries p50/p95/p99 per worker-age slice.
    let pct = fs::read_to_string(dir_a.join("latency_percentiles.csv")).unwrap();
    assert!(pct.starts_with("age_slice,count,p50_s,p95_s,p99_s"));
    assert_eq!(pct.lines().count(), 1 + report::AGE_SLICES.len());
    assert!(pct.contains("0-5,"));
    assert!(pct.contains("30+,"));

    // Identical report emitted twice is byte-identical.
    let dir_b = scratch_dir("emit-b");
    report::emit_run(&output, None, &dir_b).unwrap();
    for file in ["events.log", "metrics.json", "assignment_log.csv"] {
        assert_eq!(
            fs::read(dir_a.join(file)).unwrap(),
            fs::read(dir_b.join(file)).unwrap(),
            "{file} differs between emissions"
        );
    }
}

#[test]
fn threshold_sweep_grid_has_six_cells() {
    let text = format!(
        r#"
replicates = 2
seed = 3

[base]
{RUN_CONFIG_BODY}

[[axis]]
param = "PM_ell"
values = [2.0, 4.0, 8.0, 16.0, 32.0, inf]
"#,
        RUN_CONFIG_BODY = RUN_CONFIG
            .trim()
            .replace("[population]", "[base.population]")
            .replace("[pool]", "[base.pool]")
            .replace("[batch]", "[base.batch]")
            .replace("[budget]", "[base.budget]"),
    );
    let spec = SweepSpec::from_toml_str(&text).unwrap();
    assert_eq!(spec.combo_count(), 6);
    let report = crowdsim::sweep::run_sweep(&spec).unwrap();
    assert_eq!(report.cells.len(), 12);
    assert!(report.cells.iter().all(|c| c.summary.is_some()));
    assert_eq!(report.aggregates.len(), 6);
    // Lower thresholds replace at least as many workers as no maintenance.
    let by_combo = |i: usize| report.aggregates[i].replacements_total.mean;
    assert!(by_combo(0) >= by_combo(5));
}

#[test]
fn mitigation_maintenance_grid_has_four_cells() {
    let text = format!(
        "replicates = 1\nseed = 4\n\n{}\n\n[[axis]]\nparam = \"SM\"\nvalues = [true, false]\n\n[[axis]]\nparam = \"PM_ell\"\nvalues = [8.0, inf]\n",
        RUN_CONFIG
            .trim()
            .lines()
            .map(|l| l.to_string())
            .collect::<Vec<_>>()
            .join("\n")
            .replace("[population]", "[base.population]")
            .replace("[pool]", "[base.pool]")
            .replace("[batch]", "[base.batch]")
            .replace("[budget]", "[base.budget]")
            .replace("seed = 12", "[base]\nseed = 12"),
    );
    let spec = SweepSpec::from_toml_str(&text).unwrap();
    assert_eq!(spec.combo_count(), 4);
    let report = crowdsim::sweep::run_sweep(&spec).unwrap();
    assert_eq!(report.cells.len(), 4);
    assert!(report.cells.iter().all(|c| c.summary.is_some()));
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_crowdsim"))
}

fn write_config(dir: &Path) -> PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, RUN_CONFIG).unwrap();
    path
}

#[test]
fn cli_run_replay_report_round_trip() {
    let dir = scratch_dir("cli-run");
    let config = write_config(&dir);
    let out_a = dir.join("out-a");
    let status = bin()
        .args([
            "run",
            config.to_str().unwrap(),
            "--out-dir",
            out_a.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out_a.join("events.log").is_file());
    let metrics_a = fs::read_to_string(out_a.join("metrics.json")).unwrap();

    // Same config, same seed: byte-identical metrics.
    let out_b = dir.join("out-b");
    let status = bin()
        .args([
            "run",
            config.to_str().unwrap(),
            "--out-dir",
            out_b.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let metrics_b = fs::read_to_string(out_b.join("metrics.json")).unwrap();
    assert_eq!(metrics_a, metrics_b);

    // Seed override changes the stream.
    let out_c = dir.join("out-c");
    let status = bin()
        .args([
            "run",
            config.to_str().unwrap(),
            "--seed",
            "99",
            "--out-dir",
            out_c.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let metrics_c = fs::read_to_string(out_c.join("metrics.json")).unwrap();
    assert_ne!(metrics_a, metrics_c);

    // Replaying the persisted log prints the identical metrics document.
    let replayed = bin()
        .args(["replay", out_a.join("events.log").to_str().unwrap()])
        .output()
        .unwrap();
    assert!(replayed.status.success());
    let replay_text = String::from_utf8(replayed.stdout).unwrap();
    assert_eq!(replay_text.trim_end(), metrics_a.trim_end());

    // Re-aggregating the run directory reproduces the metrics file.
    let out_d = dir.join("out-d");
    let status = bin()
        .args([
            "report",
            out_a.to_str().unwrap(),
            "--out-dir",
            out_d.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(
        fs::read_to_string(out_d.join("metrics.json")).unwrap(),
        metrics_a
    );
}

#[test]
fn cli_sweep_writes_cells_and_summary() {
    let dir = scratch_dir("cli-sweep");
    let spec_path = dir.join("sweep.toml");
    let body = RUN_CONFIG
        .trim()
        .lines()
        .map(|l| l.to_string())
        .collect::<Vec<_>>()
        .join("\n")
        .replace("[population]", "[base.population]")
        .replace("[pool]", "[base.pool]")
        .replace("[batch]", "[base.batch]")
        .replace("[budget]", "[base.budget]")
        .replace("seed = 12", "[base]\nseed = 12");
    fs::write(
        &spec_path,
        format!(
            "replicates = 2\nseed = 7\n\n{body}\n\n[[axis]]\nparam = \"SM\"\nvalues = [true, false]\n"
        ),
    )
    .unwrap();
    let out = dir.join("out");
    let status = bin()
        .args([
            "sweep",
            spec_path.to_str().unwrap(),
            "--out-dir",
            out.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("summary.json").is_file());
    assert!(out.join("cells.csv").is_file());
    let cells: Vec<PathBuf> = fs::read_dir(out.join("cells"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    assert_eq!(cells.len(), 4);
    for cell in &cells {
        assert!(cell.join("events.log").is_file());
    }
    let csv = fs::read_to_string(out.join("cells.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);

    // Re-aggregate the sweep directory from its event logs.
    let out2 = dir.join("out2");
    let status = bin()
        .args([
            "report",
            out.to_str().unwrap(),
            "--out-dir",
            out2.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let rebuilt: Vec<PathBuf> = fs::read_dir(&out2)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    assert_eq!(rebuilt.len(), 4);
}

#[test]
fn cli_errors_are_machine_readable() {
    let dir = scratch_dir("cli-err");
    let bad_config = dir.join("bad.toml");
    fs::write(&bad_config, "[population]\nsource = \"synthetic\"\ncount = 0\nfamily = \"empirical\"\nmeans_s = [5.0]\n").unwrap();
    let output = bin()
        .args(["run", bad_config.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8(output.stderr).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(stderr.trim()).unwrap();
    assert!(parsed["error"].is_string());

    let output = bin()
        .args(["replay", dir.join("missing.log").to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!output.status.success());
}

#[test]
fn trace_and_csv_files_load_through_the_config() {
    let dir = scratch_dir("files");
    let trace_path = dir.join("workers.csv");
    fs::write(
        &trace_path,
        "worker_id,latency_s,correct\na,10.0,1\na,12.0,1\nb,40.0,1\nb,44.0,0\n",
    )
    .unwrap();
    let feature_path = dir.join("points.csv");
    let mut features = String::from("label,f1,f2\n");
    for i in 0..80 {
        let x = (i as f64) / 10.0 - 4.0;
        let label = u8::from(x > 0.0);
        features.push_str(&format!("{label},{x},{}\n", -x));
    }
    fs::write(&feature_path, features).unwrap();

    let config = format!(
        r#"
seed = 2

[population]
source = "trace"
path = "{trace}"

[pool]
N_p = 2

[batch]
N_g = 1
R = 1.0
SM = false

[learning]
Alg = "PL"
holdout_frac = 0.25

[dataset]
source = "csv"
path = "{points}"

[budget]
max_labels = 20
"#,
        trace = trace_path.display(),
        points = feature_path.display(),
    );
    let cfg = crowdsim::config::RunConfig::from_toml_str(&config).unwrap();
    let population = cfg.build_population().unwrap();
    assert_eq!(population.len(), 2);
    assert_eq!(population.profiles()[0].mean_latency_s, 11.0);
    let dataset = cfg.build_dataset().unwrap().unwrap();
    assert_eq!(dataset.len(), 80);
    let out = run_experiment(&cfg.to_params(), &population, Some(&dataset)).unwrap();
    assert!(out.metrics.total_labels >= 20);
    assert!(!out.metrics.learning_curve.is_empty());
}

#[test]
fn cli_flags_mirror_config_keys() {
    let dir = scratch_dir("cli-flags");
    let config = write_config(&dir);
    // Override N_g and SM from the command line; fewer records per task at
    // the same task budget means fewer labels.
    let out = dir.join("out-flags");
    let output = bin()
        .args([
            "run",
            config.to_str().unwrap(),
            "--N_g",
            "1",
            "--SM",
            "false",
            "--PM_ell",
            "inf",
            "--out-dir",
            out.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(output.status.success());
    let summary: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    assert_eq!(summary["labels"], 30); // 30 tasks x N_g=1
    assert_eq!(summary["replacements_total"], 0); // maintenance disabled

    // An invalid override is rejected with the config-key path in the error.
    let output = bin()
        .args(["run", config.to_str().unwrap(), "--R", "0"])
        .output()
        .unwrap();
    assert!(!output.status.success());
    let err = String::from_utf8(output.stderr).unwrap();
    assert!(err.contains("batch.R"), "unexpected error: {err}");
}

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::process::Command;

use cmaxpp_cli::{
    run_config, sweep_schedules, write_oracle, ExperimentConfig, ResultRow, ScheduleGrid,
};

fn config(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml(text, Path::new("test.toml")).unwrap()
}

fn read_rows(path: &Path) -> Vec<ResultRow> {
    csv::Reader::from_path(path)
        .unwrap()
        .deserialize()
        .map(|r| r.unwrap())
        .collect()
}

const CORRIDOR: &str = r#"
    schema_version = 1
    agent = "cmaxpp"
    seeds = [0]
    repetitions = 1
    step_cap = 50

    [env]
    kind = "ascii"
    map = """
    S...G
    """
"#;

const LIFT: &str = r#"
    schema_version = 1
    agent = "cmax"
    seeds = [0, 1, 2, 3, 4]
    budget = 5
    repetitions = 20
    step_cap = 500

    [env]
    kind = "lift"
"#;

#[test]
fn single_trivial_repetition() {
    let dir = tempfile::tempdir().unwrap();
    run_config(&config(CORRIDOR), dir.path()).unwrap();
    let text = fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert_eq!(
        text,
        "seed,repetition,steps,cost,success,cumulative_steps,wall_ms\n0,1,4,4.0,true,4,0\n"
    );
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["schema_version"], 1);
    assert_eq!(manifest["instances"][0]["states"], 5);
}

#[test]
fn identical_configs_give_identical_bytes() {
    let text = LIFT.replace("agent = \"cmax\"", "agent = \"acmaxpp\"\ntrace = true");
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_config(&config(&text), a.path()).unwrap();
    run_config(&config(&text), b.path()).unwrap();
    for file in ["results.csv", "summary.csv", "trace.jsonl"] {
        let x = fs::read(a.path().join(file)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, fs::read(b.path().join(file)).unwrap(), "{file} differs");
    }
}

#[test]
fn failed_repetitions_end_their_seed() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_config(&config(LIFT), dir.path()).unwrap();
    let mut by_seed: HashMap<u64, Vec<&ResultRow>> = HashMap::new();
    for r in &report.rows {
        by_seed.entry(r.seed).or_default().push(r);
    }
    let mut failures = 0;
    for rows in by_seed.values() {
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.repetition, i + 1);
            if !r.success {
                failures += 1;
                assert_eq!(i + 1, rows.len(), "rows after a failure");
            }
        }
        // Cumulative steps grow monotonically.
        assert!(rows
            .windows(2)
            .all(|w| w[0].cumulative_steps <= w[1].cumulative_steps));
    }
    assert!(failures > 0);
    assert!(report.summary[19].success_pct < 100.0);
}

#[test]
fn adding_seeds_keeps_existing_instances() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let text = LIFT.replace("\"cmax\"", "\"cmaxpp\"");
    run_config(
        &config(&text.replace("[0, 1, 2, 3, 4]", "[0, 1]")),
        a.path(),
    )
    .unwrap();
    run_config(&config(&text), b.path()).unwrap();
    let few = read_rows(&a.path().join("results.csv"));
    let many = read_rows(&b.path().join("results.csv"));
    let kept: Vec<_> = many.into_iter().filter(|r| r.seed < 2).collect();
    assert_eq!(few, kept);
}

#[test]
fn summary_matches_a_recomputation_from_the_rows() {
    let dir = tempfile::tempdir().unwrap();
    let text = LIFT.replace("\"cmax\"", "\"qlearning\"");
    run_config(&config(&text), dir.path()).unwrap();
    let rows = read_rows(&dir.path().join("results.csv"));
    let mut summary = csv::Reader::from_path(dir.path().join("summary.csv")).unwrap();
    let headers = summary.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    for record in summary.records() {
        let record = record.unwrap();
        let rep: usize = record[col("repetition")].parse().unwrap();
        let steps: Vec<f64> = rows
            .iter()
            .filter(|r| r.repetition == rep && r.success)
            .map(|r| r.steps as f64)
            .collect();
        let pct: f64 = record[col("success_pct")].parse().unwrap();
        assert!((pct - 20.0 * steps.len() as f64).abs() < 1e-9);
        if steps.len() >= 2 {
            let n = steps.len() as f64;
            let mean = steps.iter().sum::<f64>() / n;
            let ss: f64 = steps.iter().map(|x| (x - mean) * (x - mean)).sum();
            let se = (ss / (n - 1.0) / n).sqrt();
            let got_mean: f64 = record[col("mean_steps")].parse().unwrap();
            let got_se: f64 = record[col("se_steps")].parse().unwrap();
            assert!((got_mean - mean).abs() <= 1e-12 * mean.abs());
            assert!((got_se - se).abs() <= 1e-12 * se.abs().max(1e-300));
        }
    }
}

#[test]
fn linear_mode_writes_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let text = LIFT
        .replace(
            "\"cmax\"",
            "\"cmaxpp\"\napproximator = \"linear\"\nsnapshots = true",
        )
        .replace("[0, 1, 2, 3, 4]", "[0]")
        .replace("repetitions = 20", "repetitions = 2")
        .replace("step_cap = 500", "step_cap = 200");
    let report = run_config(&config(&text), dir.path()).unwrap();
    assert!(!report.rows.is_empty());
    let snap: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("snapshots/seed-0.json")).unwrap(),
    )
    .unwrap();
    assert!(snap["spheres"]["spheres"].is_array());
    assert!(snap["v"].is_object());
}

#[test]
fn sweep_writes_one_series_per_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let base = config(&LIFT.replace("\"cmax\"", "\"acmaxpp\"").replace(
        "[env]\n    kind = \"lift\"",
        "[env]\n    kind = \"bottleneck\"\n    size = 8",
    ));
    let grid: ScheduleGrid = toml::from_str(
        r#"
        [[schedule]]
        kind = "exponential"
        beta1 = 4.0
        rho = 0.5

        [[schedule]]
        kind = "exponential"
        beta1 = 4.0
        rho = 0.5

        [[schedule]]
        kind = "time-decay"
        beta1 = 100.0
        "#,
    )
    .unwrap();
    let reports = sweep_schedules(&base, &grid, dir.path()).unwrap();
    assert_eq!(reports.len(), 3);
    assert_eq!(reports[0].1.rows, reports[1].1.rows);
    let series = fs::read_to_string(dir.path().join("series.csv")).unwrap();
    assert!(series.starts_with("schedule,seed,repetition,cumulative_steps,success\n"));
    assert_eq!(
        series.lines().count(),
        1 + reports.iter().map(|r| r.1.rows.len()).sum::<usize>()
    );
    assert!(dir.path().join("02-time-decay-100/results.csv").exists());
}

#[test]
fn lattice_sweep_completes_every_lap() {
    let dir = tempfile::tempdir().unwrap();
    let base = config(
        r#"
        schema_version = 1
        agent = "acmaxpp"
        seeds = [0]
        budget = 100
        repetitions = 50
        step_cap = 10000

        [env]
        kind = "lattice"
        "#,
    );
    let grid: ScheduleGrid = toml::from_str(
        r#"
        [[schedule]]
        kind = "exponential"
        beta1 = 100.0
        rho = 0.5

        [[schedule]]
        kind = "linear"
        beta1 = 100.0
        horizon = 50
        "#,
    )
    .unwrap();
    let reports = sweep_schedules(&base, &grid, dir.path()).unwrap();
    for (name, r) in &reports {
        assert_eq!(r.rows.len(), 50, "{name}");
        assert!(r.rows.iter().all(|row| row.success), "{name}");
    }
    let last = |i: usize| reports[i].1.rows.last().unwrap().cumulative_steps;
    if last(0) < last(1) {
        eprintln!(
            "expected trend not seen: fast exponential decay {} < linear {}",
            last(0),
            last(1)
        );
    }
}

#[test]
fn oracle_lists_every_state() {
    let mut out = Vec::new();
    write_oracle(&config(CORRIDOR), 0, &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "state,coordinates,goal,model_value,true_value");
    assert_eq!(lines.len(), 6);
    assert_eq!(lines[1], "0,0 0,false,4.0,4.0");
}

#[test]
fn binary_runs_and_reports_bad_fields() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, CORRIDOR).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_cmaxpp"))
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.path().join("out/results.csv").exists());

    fs::write(&cfg, CORRIDOR.replace("step_cap = 50", "step_cap = 0")).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_cmaxpp"))
        .args(["oracle", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("step_cap"));
}

#[test]
fn shipped_configs_load() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["lift.toml", "lattice.toml"] {
        ExperimentConfig::load(&dir.join(name)).unwrap();
    }
    assert_eq!(
        ScheduleGrid::load(&dir.join("schedules.toml"))
            .unwrap()
            .schedule
            .len(),
        5
    );
}

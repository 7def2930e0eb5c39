use std::fs;
use std::path::Path;
use std::process::Command;

use hybrid_mlmc::experiment::{emit_outputs, run_experiment, RunConfig};

const SMALL: &str = r#"
[problem]
regions = [
  { lower = 0.0, upper = 0.5, sigma_t = 1.0, scattering_ratio = 0.9, source = 1.0 },
  { lower = 0.5, upper = 1.0, sigma_t = 1.0, scattering_ratio = 0.5, source = 1.0 },
]

[grid]
length = 1.0
coarse_cells = 8
levels = 2

[mlmc]
epsilon = [1e-2, 5e-3]
histories = [300, 600]
cost_mode = "proxy"
seed = 5

[output]
case = "small"
"#;

fn small_config() -> RunConfig {
    RunConfig::parse(SMALL, Path::new("small.toml")).unwrap()
}

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn outputs_are_reproducible_across_runs_and_threads() {
    let config = small_config();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    emit_outputs(&run_experiment(&config).unwrap(), a.path()).unwrap();
    let mut threaded = config.clone();
    threaded.mlmc.parallelism = 4;
    emit_outputs(&run_experiment(&threaded).unwrap(), b.path()).unwrap();
    let (fa, fb) = (read_all(a.path()), read_all(b.path()));
    assert_eq!(
        fa.iter().map(|f| f.0.as_str()).collect::<Vec<_>>(),
        ["levels.csv", "plotdata.csv", "report.json"]
    );
    assert_eq!(fa, fb);
}

#[test]
fn levels_csv_has_one_row_per_case_and_level() {
    let config = small_config();
    let dir = tempfile::tempdir().unwrap();
    let bundle = run_experiment(&config).unwrap();
    emit_outputs(&bundle, dir.path()).unwrap();
    let text = fs::read_to_string(dir.path().join("levels.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "case,level,N,mean_P,mean_dP,V,kurtosis,C,CC");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2 * 2 * 3);
    assert!(rows.iter().all(|r| r.len() == 9));
    // K outermost, ε inner, levels innermost.
    assert_eq!(rows[0][0], "small/eps=1e-2/K=300");
    assert_eq!(rows[3][0], "small/eps=5e-3/K=300");
    assert_eq!(rows[6][0], "small/eps=1e-2/K=600");
    assert_eq!(rows[2][1], "2");
    assert_eq!(rows[0][8], "");
}

#[test]
fn report_fields_are_consistent() {
    let config = small_config();
    let dir = tempfile::tempdir().unwrap();
    let bundle = run_experiment(&config).unwrap();
    emit_outputs(&bundle, dir.path()).unwrap();
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    let cases = json["cases"].as_array().unwrap();
    assert_eq!(cases.len(), 4);
    for (case, result) in cases.iter().zip(&bundle.cases) {
        for key in [
            "case", "epsilon", "histories", "alpha", "beta", "gamma", "N", "maxW", "weak_pass", "CC",
            "combined_estimate", "total_cost",
        ] {
            assert!(case.get(key).is_some(), "missing {key}");
        }
        let levels = case["levels"].as_array().unwrap();
        let sum = levels.iter().fold(0.0, |acc, l| acc + l["mean_dP"].as_f64().unwrap());
        let combined = case["combined_estimate"].as_f64().unwrap();
        assert!((combined - sum).abs() <= 1e-15 * combined.abs());
        assert_eq!(case["N"].as_array().unwrap().len(), 3);
        assert_eq!(case["CC"].as_array().unwrap().len(), 2);

        // Every printed table value comes from the report.
        let row = result.table_row();
        assert_eq!(Some(row.alpha.unwrap()), case["alpha"].as_f64());
        assert_eq!(row.max_w, case["maxW"].as_f64());
        assert_eq!(
            row.samples,
            case["N"].as_array().unwrap().iter().map(|n| n.as_u64().unwrap()).collect::<Vec<_>>()
        );
        assert!(case["max_balance_residual"].as_f64().unwrap() < 1e-10);
    }
}

#[test]
fn sample_log_records_every_draw() {
    let mut config = small_config();
    config.output.sample_log = true;
    config.mlmc.epsilon = vec![1e-2];
    config.mlmc.histories = vec![300];
    let dir = tempfile::tempdir().unwrap();
    let bundle = run_experiment(&config).unwrap();
    emit_outputs(&bundle, dir.path()).unwrap();
    let text = fs::read_to_string(dir.path().join("samples.csv")).unwrap();
    let total: u64 = bundle.cases[0].report.samples.iter().sum();
    assert_eq!(text.lines().count() as u64, total + 1);
}

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hybrid-mlmc"))
}

#[test]
fn cli_runs_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    fs::write(&config, SMALL).unwrap();
    let out = dir.path().join("results");
    let output = binary()
        .args(["--config", config.to_str().unwrap(), "--epsilon", "1e-2,5e-3", "--histories", "200"])
        .args(["--cost-mode", "proxy", "--seed", "3", "--parallelism", "2", "--out", out.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.lines().next().unwrap().contains("alpha"));
    assert_eq!(stdout.lines().filter(|l| l.contains("small")).count(), 2);
    for name in ["levels.csv", "report.json", "plotdata.csv"] {
        assert!(out.join(name).exists(), "{name}");
    }
    let report = fs::read_to_string(out.join("report.json")).unwrap();
    assert!(report.contains("\"histories\": 200"));
}

#[test]
fn cli_reports_config_errors_with_exit_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = binary()
        .args(["--config", dir.path().join("absent.toml").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(2));

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, SMALL.replace("upper = 0.5", "upper = 0.3").replace("lower = 0.5", "lower = 0.3")).unwrap();
    let misaligned = binary().args(["--config", bad.to_str().unwrap()]).output().unwrap();
    assert_eq!(misaligned.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&misaligned.stderr).contains("0.3"));
}

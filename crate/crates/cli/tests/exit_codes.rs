use std::path::Path;
use std::process::{Command, Output};

const OBSERVED: &str = "region,season,week,ili_count\n\
a,s,1,10\na,s,2,40\na,s,3,200\na,s,4,900\na,s,5,1500\na,s,6,1100\na,s,7,500\na,s,8,200\na,s,9,60\na,s,10,20\n";

fn forecasts() -> String {
    // Method "exact" replays the truth; "flat" predicts the last seen value.
    let truth = [10.0, 40.0, 200.0, 900.0, 1500.0, 1100.0, 500.0, 200.0, 60.0, 20.0];
    let mut out = String::from("method,region,k,target_week,value\n");
    for k in 2..=9usize {
        for w in 1..=10usize {
            out.push_str(&format!("exact,a,{k},{w},{}\n", truth[w - 1]));
            let flat = if w <= k { truth[w - 1] } else { truth[k - 1] };
            out.push_str(&format!("flat,a,{k},{w},{flat}\n"));
        }
    }
    out
}

fn write_inputs(dir: &Path, extra: &str) -> std::path::PathBuf {
    std::fs::write(dir.join("observed.csv"), OBSERVED).unwrap();
    std::fs::write(dir.join("forecasts.csv"), forecasts()).unwrap();
    let cfg = dir.join("run.toml");
    std::fs::write(
        &cfg,
        format!(
            "[input]\nobserved = \"observed.csv\"\nforecasts = \"forecasts.csv\"\n\n\
             [features]\nid_threshold = 300.0\n\n[output]\ndir = \"out\"\n{extra}"
        ),
    )
    .unwrap();
    cfg
}

fn epieval(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_epieval")).args(args).output().unwrap()
}

#[test]
fn successful_run_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_inputs(dir.path(), "");
    let out = epieval(&["evaluate", "--config", cfg.to_str().unwrap(), "--format", "csv,json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("out/a__consensus.csv").exists());
    assert!(dir.path().join("out/bundle.json").exists());
    assert!(!dir.path().join("out/a__peak_value__box.svg").exists());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("exact"), "{stdout}");
}

#[test]
fn failed_region_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_inputs(dir.path(), "");
    let out = epieval(&[
        "evaluate",
        "--config",
        cfg.to_str().unwrap(),
        "--region",
        "a",
        "--region",
        "missing",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing"));
    assert!(dir.path().join("out/failures.csv").exists());
}

#[test]
fn bad_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_inputs(dir.path(), "\n[evaluation]\nmeasures = []\n");
    let out = epieval(&["evaluate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let cfg = dir.path().join("typo.toml");
    std::fs::write(&cfg, "[featurez]\nid_threshold = 1\n").unwrap();
    assert_eq!(
        epieval(&["evaluate", "--config", cfg.to_str().unwrap()]).status.code(),
        Some(2)
    );
}

#[test]
fn malformed_forecasts_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_inputs(dir.path(), "");
    std::fs::write(
        dir.path().join("forecasts.csv"),
        "method,region,k,target_week,value\nm,a,x,3,1\n",
    )
    .unwrap();
    let out = epieval(&["evaluate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains(":2:"));
}

#[test]
fn synth_writes_inputs() {
    let demo = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../demo/synthetic.toml");
    let dir = tempfile::tempdir().unwrap();
    let out = epieval(&[
        "synth",
        "--config",
        demo.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let observed = std::fs::read_to_string(dir.path().join("observed.csv")).unwrap();
    assert_eq!(observed.lines().count(), 1 + 3 * 52);
    assert!(dir.path().join("forecasts.csv").exists());
}

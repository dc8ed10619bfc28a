use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const REFERENCE: &str = "[network]
m_tx = 10
n_rx = [3, 4, 5]
own = [1, 2, 3]
cross = [1, 1, 1]

[correlation]
preset = \"medium\"

[simulation]
snr_db = [10, 30]
trials = 20
seed = 1
";

fn compia(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_compia"))
        .args(args)
        .current_dir(dir)
        .env_remove("COMPIA_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn workspace(config: &str) -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    std::fs::write(&path, config).unwrap();
    (dir, path)
}

#[test]
fn simulate_writes_csv_and_manifest() {
    let (dir, _) = workspace(REFERENCE);
    let o = compia(&["simulate", "--config", "run.toml", "--output", "res/out.csv", "--raw"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("res/out.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "snr_db,mean_sum_rate,p10,p50,p90,dof_estimate,excluded_trials");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("10,") && lines[2].starts_with("30,"));
    let raw = std::fs::read_to_string(dir.path().join("res/out.raw.csv")).unwrap();
    assert_eq!(raw.lines().next(), Some("trial,snr_db,user,rate"));
    assert_eq!(raw.lines().count(), 1 + 2 * 20 * 3);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("res/out.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["spec_hash"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["excluded_trials"], 0);
    assert_eq!(manifest["run"]["spec"]["trials"], 20);
}

#[test]
fn seeded_runs_are_byte_identical() {
    let (dir, _) = workspace(REFERENCE);
    for name in ["a.csv", "b.csv"] {
        let o = compia(
            &["simulate", "--config", "run.toml", "--trials", "100", "--seed", "7", "--output", name, "--raw"],
            dir.path(),
        );
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let read = |n: &str| std::fs::read(dir.path().join(n)).unwrap();
    assert_eq!(read("a.csv"), read("b.csv"));
    assert_eq!(read("a.raw.csv"), read("b.raw.csv"));
}

#[test]
fn manifest_reproduces_the_run() {
    let (dir, _) = workspace(REFERENCE);
    let o = compia(
        &["simulate", "--config", "run.toml", "--alpha", "0.75", "--beta", "10", "--output", "first.csv"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = compia(&["simulate", "--config", "first.csv.manifest.json", "--output", "second.csv"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let read = |n: &str| std::fs::read_to_string(dir.path().join(n)).unwrap();
    assert_eq!(read("first.csv"), read("second.csv"));
    let hash = |n: &str| serde_json::from_str::<serde_json::Value>(&read(n)).unwrap()["spec_hash"].clone();
    assert_eq!(hash("first.csv.manifest.json"), hash("second.csv.manifest.json"));
}

#[test]
fn output_dir_comes_from_environment() {
    let (dir, _) = workspace(REFERENCE);
    let o = Command::new(env!("CARGO_BIN_EXE_compia"))
        .args(["simulate", "--config", "run.toml", "--trials", "2"])
        .current_dir(dir.path())
        .env("COMPIA_OUTPUT_DIR", "envout")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(dir.path().join("envout/simulate.csv").exists());
    assert!(dir.path().join("envout/simulate.csv.manifest.json").exists());
}

#[test]
fn demand_exceeding_precoder_space_exits_2_without_output() {
    let (dir, _) = workspace(&REFERENCE.replace("m_tx = 10", "m_tx = [5, 10, 10]"));
    let o = compia(&["simulate", "--config", "run.toml", "--output", "x.csv"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("FAIL a:transmit-dimensions  BS 1"), "{}", stderr(&o));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn config_errors_exit_1() {
    let (dir, _) = workspace(&REFERENCE.replace("n_rx = [3, 4, 5]", "n_rx = [3, 4]"));
    let o = compia(&["simulate", "--config", "run.toml", "--output", "x.csv"], dir.path());
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("n_rx must have 3 entries"), "{}", stderr(&o));
    assert!(!dir.path().join("x.csv").exists());

    let o = compia(&["simulate", "--config", "missing.toml"], dir.path());
    assert_eq!(code(&o), 1);
    let o = compia(&["simulate", "--config", "run.toml", "--corr-preset", "extreme"], dir.path());
    assert_eq!(code(&o), 1);
    let o = compia(&["frobnicate"], dir.path());
    assert_eq!(code(&o), 1);
    let o = compia(&["--help"], dir.path());
    assert_eq!(code(&o), 0);
}

#[test]
fn dof_reports_closed_form_and_oracle() {
    let (dir, _) = workspace(REFERENCE);
    let o = compia(&["dof", "--config", "run.toml"], dir.path());
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.contains("eta (closed form)    = 9"), "{text}");
    assert!(text.contains("oracle (enumeration) = 9"), "{text}");
    assert!(!text.contains("DIVERGENCE"));

    let o = compia(&["dof", "--config", "run.toml", "--json"], dir.path());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["eta"], 9);
    assert_eq!(v["oracle"]["total"], 9);
    assert_eq!(v["q"], serde_json::json!([5, 7, 6]));
}

#[test]
fn dof_with_no_precoder_space_is_zero() {
    let (dir, _) = workspace(&REFERENCE.replace("m_tx = 10", "m_tx = [5, 3, 4]"));
    let o = compia(&["dof", "--config", "run.toml", "--json"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["q"], serde_json::json!([0, 0, 0]));
    assert_eq!(v["eta"], 0);
    assert_eq!(v["oracle"]["total"], 0);
}

#[test]
fn dof_flags_divergence_without_failing() {
    let (dir, _) = workspace(&REFERENCE.replace("m_tx = 10", "m_tx = [7, 5, 5]").replace("n_rx = [3, 4, 5]", "n_rx = 3"));
    let o = compia(&["dof", "--config", "run.toml", "--json"], dir.path());
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let diverges = v["eta"] != v["oracle"]["total"];
    assert_eq!(v["divergence"], diverges);
    let o = compia(&["dof", "--config", "run.toml"], dir.path());
    assert_eq!(stdout(&o).contains("DIVERGENCE"), diverges);
}

#[test]
fn plan_reference_demand() {
    let (dir, _) = workspace("[network]\nown = [1, 2, 3]\ncross = [1, 1, 1]\n");
    let o = compia(&["plan", "--config", "run.toml"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("M = [7, 9, 9]"), "{text}");
    assert!(text.contains("N = [3, 4, 5]"), "{text}");
    assert!(!text.contains("FAIL"));

    let (dir, _) = workspace("[network]\nown = [1, 1, 1]\ncross = [1, 1, 1]\n");
    let o = compia(&["plan", "--config", "run.toml", "--json"], dir.path());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["plan"]["m_tx"], serde_json::json!([5, 5, 5]));
    assert_eq!(v["plan"]["n_rx"], serde_json::json!([3, 3, 3]));
    assert_eq!(v["plan"]["trace"], serde_json::json!([]));
}

#[test]
fn plan_rejects_malformed_demand() {
    let (dir, _) = workspace("[network]\ndemand = [[1, 1, 0], [0, 2]]\n");
    let o = compia(&["plan", "--config", "run.toml"], dir.path());
    assert_eq!(code(&o), 1);
    let (dir, _) = workspace("[network]\ndemand = [[1, 0, 1], [1, 1, 0], [0, 1, 1]]\n");
    let o = compia(&["plan", "--config", "run.toml"], dir.path());
    assert_eq!(code(&o), 1, "out-of-pattern demand: {}", stdout(&o));
}

#[test]
fn verify_perfect_and_imperfect_csi() {
    let (dir, _) = workspace(REFERENCE);
    let o = compia(&["verify", "--config", "run.toml", "--seed", "3"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("PASS"));

    let o = compia(&["verify", "--config", "run.toml", "--alpha", "0", "--beta", "0.1"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = stdout(&o);
    let xci: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("XCI residual "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(xci > 1e-6, "{text}");

    let (dir, _) = workspace(&REFERENCE.replace("m_tx = 10", "m_tx = 6"));
    let o = compia(&["verify", "--config", "run.toml"], dir.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn sweep_prepends_axis_columns() {
    let (dir, _) = workspace(&format!(
        "{REFERENCE}\n[sweep]\naxes = [{{ axis = \"tx_antennas\", values = [10, 12] }}, {{ axis = \"rx_corr_coeff\", values = [0.2, 0.8] }}]\n"
    ));
    let o = compia(&["sweep", "--config", "run.toml", "--trials", "5", "--snr", "20", "--output", "s.csv"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "tx_antennas,rx_corr_coeff,snr_db,mean_sum_rate,p10,p50,p90,dof_estimate,excluded_trials");
    let keys: Vec<String> = lines[1..].iter().map(|l| l.split(',').take(3).collect::<Vec<_>>().join(",")).collect();
    assert_eq!(keys, ["10,0.2,20", "10,0.8,20", "12,0.2,20", "12,0.8,20"]);

    let o = compia(&["sweep", "--config", "run.toml", "--axis", "snr=0,10", "--trials", "3", "--output", "t.csv"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
    assert!(csv.starts_with("snr,snr_db,"));
    assert_eq!(csv.lines().count(), 3);

    let (dir, _) = workspace(REFERENCE);
    let o = compia(&["sweep", "--config", "run.toml"], dir.path());
    assert_eq!(code(&o), 1);
    let o = compia(&["sweep", "--config", "run.toml", "--axis", "tx_antennas=4,5", "--trials", "2"], dir.path());
    assert_eq!(code(&o), 2);
}

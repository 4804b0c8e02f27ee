use std::path::Path;
use std::process::{Command, Output};

use catqrm_cli::parse_config;

fn catqrm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_catqrm")).args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

const SMALL: &str = "\
[bias_report]
alphas = [1.0, 2.0]
betas = [1.0, 1.5]

[xgate_sweep]
alphas = [1.0, 1.25]
betas = [1.0]
n_a = 18
n_b = 16

[tunneling]
epsilons = [0.75, 1.0]
levels = 4
t_end = 20.0
n_points = 11
";

fn data_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "manifest.json")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

#[test]
fn output_is_identical_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "small.toml", SMALL);
    let mut runs = Vec::new();
    for threads in ["1", "3"] {
        let out = tmp.path().join(format!("t{threads}"));
        let o = catqrm(&["run", "--config", &cfg, "--threads", threads, "--output-dir", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        let stdout = String::from_utf8_lossy(&o.stdout).into_owned();
        assert_eq!(stdout.lines().count(), 3, "{stdout}");
        assert!(stdout.lines().next().unwrap().starts_with("bias_report"));
        runs.push(data_files(&out));
    }
    assert_eq!(runs[0], runs[1]);
    let names: Vec<&str> = runs[0].iter().map(|f| f.0.as_str()).collect();
    assert_eq!(names, ["bias_report.csv", "tunneling.csv", "xgate_sweep.csv"]);
}

#[test]
fn row_counts_match_grids_and_manifest_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "small.toml", SMALL);
    let out = tmp.path().join("out");
    let o = catqrm(&[
        "run",
        "--config",
        &cfg,
        "--output-dir",
        out.to_str().unwrap(),
        "--scenario",
        "tunneling",
        "--scenario",
        "bias_report",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = |f: &str| std::fs::read_to_string(out.join(f)).unwrap().lines().count() - 1;
    assert_eq!(rows("bias_report.csv"), 4);
    assert_eq!(rows("tunneling.csv"), 2 * 11);

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["version"], env!("CARGO_PKG_VERSION"));
    assert!(manifest["wall_time_s"].as_f64().unwrap() >= 0.0);
    assert!(manifest["scenarios"][0]["solver"]["max_norm_drift"].is_number());
    let echoed = manifest["config"].as_str().unwrap();
    let again = parse_config(echoed).unwrap();
    let original: Vec<_> =
        parse_config(SMALL).unwrap().into_iter().filter(|c| c.scenario.name() != "xgate_sweep").collect();
    assert_eq!(again, original);
}

#[test]
fn json_format_mirrors_csv_values() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "b.toml", "[bias_report]\nalphas = [1.0]\nbetas = [2.0]\n");
    let (csv_dir, json_dir) = (tmp.path().join("c"), tmp.path().join("j"));
    assert!(catqrm(&["run", "--config", &cfg, "--output-dir", csv_dir.to_str().unwrap()]).status.success());
    let o = catqrm(&["run", "--config", &cfg, "--format", "json", "--output-dir", json_dir.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(csv_dir.join("bias_report.csv")).unwrap();
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    let cells: Vec<f64> = csv.lines().nth(1).unwrap().split(',').map(|c| c.parse().unwrap()).collect();
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(json_dir.join("bias_report.json")).unwrap()).unwrap();
    let col = |n: &str| doc["table"]["columns"][n][0].as_f64().unwrap();
    let i = header.iter().position(|h| *h == "suppression").unwrap();
    assert_eq!(col("suppression"), cells[i]);
}

#[test]
fn negative_rate_fails_with_message() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "bad.toml", "[decoherence]\n\nkappa_a = -1\n");
    let o = catqrm(&["run", "--config", &cfg, "--output-dir", tmp.path().to_str().unwrap()]);
    assert!(!o.status.success());
    let e = stderr(&o);
    assert!(e.contains("kappa_a must be ≥ 0") && e.contains("line 3, column 1"), "{e}");
    assert!(!tmp.path().join("manifest.json").exists());
}

#[test]
fn misspelled_key_suggests_the_right_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "bad.toml", "[collapse_revival]\nlamda = 1.0\n");
    let o = catqrm(&["run", "--config", &cfg]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("did you mean `lambda`"), "{}", stderr(&o));

    let o = catqrm(&["run", "--scenario", "xgate", "--set", "kappa_a=0.1"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("kappa_a"), "{}", stderr(&o));
}

#[test]
fn set_overrides_the_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "b.toml", "[bias_report]\nalphas = [1.0]\nbetas = [2.0]\n");
    let out = tmp.path().join("o");
    let o = catqrm(&[
        "run",
        "--config",
        &cfg,
        "--set",
        "bias_report.alphas=[1.0, 1.5]",
        "--set",
        "output=renamed",
        "--output-dir",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("renamed.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn list_scenarios_names_all_eight() {
    let o = catqrm(&["--list-scenarios"]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    for s in catqrm_cli::Scenario::ALL {
        assert!(text.contains(&format!("{}\n", s.name())), "{s}");
    }
    assert!(text.contains("K = 300.0"));
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = Vec::new();
    for entry in std::fs::read_dir(&dir).unwrap() {
        let p = entry.unwrap().path();
        let cfgs =
            parse_config(&std::fs::read_to_string(&p).unwrap()).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        seen.extend(cfgs.into_iter().map(|c| c.scenario));
    }
    seen.sort();
    assert_eq!(seen, catqrm_cli::Scenario::ALL.to_vec());
}

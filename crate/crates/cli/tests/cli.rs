use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kfold_stability_cli::commands::SelectionFile;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_kfold-stability"));
    c.env_remove("KFOLD_STABILITY_OUT");
    c
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name)
}

fn run(cmd: &mut Command) -> (i32, String, String) {
    let Output {
        status,
        stdout,
        stderr,
    } = cmd.output().expect("spawn binary");
    (
        status.code().expect("exit code"),
        String::from_utf8(stdout).unwrap(),
        String::from_utf8(stderr).unwrap(),
    )
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, body).unwrap();
    path
}

fn toy_config(extra: &str) -> String {
    format!(
        "dataset_path = {:?}\n{extra}\n[loss]\nkind = \"squared\"\n[model]\ngrid = [[0.4, 0.8, 1.2], [-1.0, -0.5, 0.0]]\n",
        data("toy.csv")
    )
}

#[test]
fn analyze_matches_golden_files() {
    let out = tempfile::tempdir().unwrap();
    let (code, stdout, stderr) = run(bin()
        .args(["analyze", "--config"])
        .arg(data("toy.toml"))
        .arg("--out")
        .arg(out.path()));
    assert_eq!(code, 0, "{stderr}");
    assert!(stdout.contains("K* = 2"), "{stdout}");
    for f in ["bound_curve.csv", "risks.csv", "selection.json"] {
        let got = std::fs::read(out.path().join(f)).unwrap();
        let want = std::fs::read(golden(f)).unwrap();
        assert!(got == want, "{f} differs from the frozen copy");
    }
}

#[test]
fn select_writes_curve_and_selection_only() {
    let out = tempfile::tempdir().unwrap();
    let (code, _, stderr) = run(bin()
        .args(["select", "--config"])
        .arg(data("toy.toml"))
        .arg("--out")
        .arg(out.path()));
    assert_eq!(code, 0, "{stderr}");
    assert!(out.path().join("bound_curve.csv").exists());
    assert!(!out.path().join("risks.csv").exists());
    let sel: SelectionFile =
        serde_json::from_slice(&std::fs::read(out.path().join("selection.json")).unwrap()).unwrap();
    assert_eq!((sel.k_star, sel.b_star.as_str(), sel.seed), (2, "[0.8,-0.5]", 7));
}

#[test]
fn output_dir_falls_back_to_env() {
    let out = tempfile::tempdir().unwrap();
    let (code, _, stderr) = run(bin()
        .args(["select", "--config"])
        .arg(data("toy.toml"))
        .env("KFOLD_STABILITY_OUT", out.path()));
    assert_eq!(code, 0, "{stderr}");
    assert!(out.path().join("selection.json").exists());
}

#[test]
fn flags_override_the_file() {
    let out = tempfile::tempdir().unwrap();
    let (code, _, stderr) = run(bin()
        .args(["select", "--config"])
        .arg(data("toy.toml"))
        .args(["--k-min", "3", "--k-max", "5", "--seed", "11", "--out"])
        .arg(out.path()));
    assert_eq!(code, 0, "{stderr}");
    let curve = std::fs::read_to_string(out.path().join("bound_curve.csv")).unwrap();
    let ks: Vec<&str> = curve
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(ks, ["3", "4", "5"]);
    assert!(curve.lines().skip(1).all(|l| l.ends_with(",11")));
}

#[test]
fn missing_y_column_exits_1_naming_it() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("d.csv");
    std::fs::write(&csv, "target,x1\n1,2\n3,4\n5,6\n7,8\n").unwrap();
    let cfg = write_config(
        dir.path(),
        "dataset_path = \"d.csv\"\n[loss]\nkind = \"squared\"\n[model]\nvectors = [[1.0]]\n",
    );
    let (code, _, stderr) = run(bin()
        .args(["analyze", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path()));
    assert_eq!(code, 1);
    assert!(stderr.contains("'y'"), "{stderr}");
}

#[test]
fn bad_csv_value_reports_its_line() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("d.csv"), "y,x1\n1,2\n3,4\n5,oops\n7,8\n").unwrap();
    let cfg = write_config(
        dir.path(),
        "dataset_path = \"d.csv\"\n[loss]\nkind = \"squared\"\n[model]\nvectors = [[1.0]]\n",
    );
    let (code, _, stderr) = run(bin()
        .args(["analyze", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path()));
    assert_eq!(code, 1);
    assert!(stderr.contains("d.csv:4:") && stderr.contains("oops"), "{stderr}");
}

#[test]
fn zero_varpi_is_a_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &toy_config("varpi = 0.0"));
    let (code, _, stderr) = run(bin()
        .args(["analyze", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path()));
    assert_eq!(code, 1);
    assert!(stderr.contains("varpi"), "{stderr}");
    let (code, _, _) = run(bin()
        .args(["analyze", "--config"])
        .arg(data("toy.toml"))
        .args(["--varpi", "0"])
        .arg("--out")
        .arg(dir.path()));
    assert_eq!(code, 1);
}

#[test]
fn config_parse_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &toy_config("varpi = \"often\""));
    let (code, _, stderr) = run(bin().args(["select", "--config"]).arg(&cfg));
    assert_eq!(code, 1);
    assert!(stderr.contains("line 2"), "{stderr}");
}

#[test]
fn no_feasible_k_exits_2_and_keeps_the_curve() {
    // A confidence floor no bound can reach.
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &toy_config("confidence_floor = 0.999\nk_range = [2, 4]"),
    );
    let out = dir.path().join("out");
    let (code, _, stderr) = run(bin()
        .args(["analyze", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out));
    assert_eq!(code, 2, "{stderr}");
    assert!(stderr.contains("no feasible K"), "{stderr}");
    let curve = std::fs::read_to_string(out.join("bound_curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 4);
    assert!(curve.lines().skip(1).all(|l| l.contains(",false,")));
    assert!(!out.join("selection.json").exists());
}

#[test]
fn verify_lemma1_passes_on_defaults() {
    let out = tempfile::tempdir().unwrap();
    let (code, stdout, stderr) = run(bin()
        .args(["verify", "--theorem", "lemma1", "--trials", "5000", "--out"])
        .arg(out.path()));
    assert_eq!(code, 0, "{stderr}");
    assert!(stdout.contains("PASS"), "{stdout}");
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.path().join("verify_lemma1.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], true);
    assert_eq!(report["trials"], 5000);
    assert_eq!(report["grid"].as_array().unwrap().len(), 10);
}

#[test]
fn verify_rejects_few_trials() {
    let (code, _, stderr) = run(bin().args(["verify", "--theorem", "1", "--trials", "100"]));
    assert_eq!(code, 1);
    assert!(stderr.contains("at least 500 trials"), "{stderr}");
}

#[test]
fn verify_lists_valid_tags() {
    let (code, _, stderr) = run(bin().args(["verify", "--theorem", "3", "--trials", "500"]));
    assert_eq!(code, 1);
    assert!(stderr.contains("1, 2, 4, 5, lemma1, lemmaA1, yu"), "{stderr}");
}

#[test]
fn verify_reads_a_generator_file() {
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("gen.json");
    std::fs::write(&gen, r#"{"kind": "bounded_uniform", "m": 2.0, "classes": 3}"#).unwrap();
    let (code, _, stderr) = run(bin()
        .args([
            "verify",
            "--theorem",
            "1",
            "--trials",
            "500",
            "--n",
            "60",
            "--k",
            "3",
            "--rc-draws",
            "64",
            "--generator",
        ])
        .arg(&gen)
        .arg("--out")
        .arg(dir.path()));
    assert_eq!(code, 0, "{stderr}");
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("verify_1.json")).unwrap()).unwrap();
    assert_eq!(report["params"]["generator"]["m"], 2.0);
    assert_eq!(report["params"]["n"], 60);
}

#[test]
fn split_dumps_a_partition() {
    let (code, stdout, stderr) = run(bin().args(["split", "--n", "10", "--k", "3", "--seed", "4"]));
    assert_eq!(code, 0, "{stderr}");
    let fa: kfold_stability::folds::FoldAssignment = serde_json::from_str(&stdout).unwrap();
    assert_eq!(fa, kfold_stability::random_kfold(10, 3, 4).unwrap());
    let (code, stdout, _) = run(bin().args([
        "split", "--n", "12", "--k", "3", "--scheme", "blocked", "--mu", "2",
    ]));
    assert_eq!(code, 0);
    let fa: kfold_stability::folds::FoldAssignment = serde_json::from_str(&stdout).unwrap();
    assert_eq!(fa.rounds[1].test, vec![4, 5, 6, 7]);
    let (code, _, stderr) = run(bin().args(["split", "--n", "10", "--k", "11"]));
    assert_eq!(code, 1, "{stderr}");
}

#[test]
fn rc_is_exact_on_a_small_sample() {
    // Constant-one loss on four points: E|sum of signs| * 2/4 = 2 * (6/16 * 2 + 2/16 * 4) / 4.
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("d.csv"), "y,x1\n1,0\n1,0\n1,0\n1,0\n").unwrap();
    let cfg = write_config(
        dir.path(),
        "dataset_path = \"d.csv\"\n[loss]\nkind = \"absolute\"\n[model]\nvectors = [[0.0]]\n",
    );
    let (code, stdout, stderr) = run(bin()
        .args(["rc", "--config"])
        .arg(&cfg)
        .args(["--method", "exhaustive"]));
    assert_eq!(code, 0, "{stderr}");
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(v["value"], 0.75);
    assert_eq!(v["exact"], true);
}

#[test]
fn help_exits_zero_and_bad_flags_exit_one() {
    assert_eq!(run(bin().arg("--help")).0, 0);
    assert_eq!(run(bin().args(["analyze", "--nope"])).0, 1);
}

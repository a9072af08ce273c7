use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bubble_audit::workflow::StudyConfig;
use tempfile::TempDir;

const EXAMPLE: &str = include_str!("../study.example.toml");

/// Two runs per topic keeps every study here under a second.
const SMALL: &str = "seed = 5\n[parameters]\nruns_per_topic = 2\n";

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bubble-audit")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Runs the small study into `<dir>/<name>` and returns its path.
fn small_study(dir: &TempDir, name: &str) -> PathBuf {
    let config = dir.path().join("small.toml");
    fs::write(&config, SMALL).unwrap();
    let out = dir.path().join(name);
    let r = bin(&["run", "--config", s(&config), "--output", s(&out)]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    out
}

#[test]
fn example_config_parses_to_the_defaults() {
    let parsed = StudyConfig::from_toml(EXAMPLE).unwrap();
    assert_eq!(parsed.digest(), StudyConfig::default().digest());
}

#[test]
fn run_writes_records_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let study = small_study(&dir, "study");
    assert_eq!(fs::read_dir(study.join("runs")).unwrap().count(), 10);
    for file in ["manifest.json", "catalog.jsonl", "truth_labels.csv", "config.json"] {
        assert!(study.join(file).is_file(), "{file}");
    }
}

#[test]
fn same_seed_gives_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let a = small_study(&dir, "a");
    let b = small_study(&dir, "b");
    for file in ["manifest.json", "catalog.jsonl"] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{file}");
    }
    let mut names: Vec<_> = fs::read_dir(a.join("runs")).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    for name in names {
        assert_eq!(fs::read(a.join("runs").join(&name)).unwrap(), fs::read(b.join("runs").join(&name)).unwrap());
    }
}

#[test]
fn unknown_config_field_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    fs::write(&config, "[parameters]\nn_watch = 3\n").unwrap();
    let r = bin(&["run", "--config", s(&config), "--output", s(&dir.path().join("out"))]);
    assert_eq!(code(&r), 2);
    assert!(stderr(&r).contains("n_watch"), "{}", stderr(&r));
}

#[test]
fn invalid_parameter_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    fs::write(&config, "[parameters]\nn_prom = 4\nf_q = 9\n").unwrap();
    let r = bin(&["run", "--config", s(&config), "--output", s(&dir.path().join("out"))]);
    assert_eq!(code(&r), 2, "{}", stderr(&r));
}

#[test]
fn unwritable_output_exits_one_without_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("small.toml");
    fs::write(&config, SMALL).unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = blocker.join("study");
    let r = bin(&["run", "--config", s(&config), "--output", s(&out)]);
    assert_eq!(code(&r), 1, "{}", stderr(&r));
    assert!(!out.join("manifest.json").exists());
}

#[test]
fn flags_outside_their_subcommand_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let study = small_study(&dir, "study");
    assert_eq!(code(&bin(&["evaluate", s(&study), "--config", "x.toml"])), 2);
    assert_eq!(code(&bin(&["evaluate", s(&study), "--seed", "3"])), 2);
    assert_eq!(code(&bin(&["evaluate", s(&study), "--alpha", "2"])), 2);
    assert_eq!(code(&bin(&["compare", s(&study), s(&study), "--modality", "feed"])), 2);
    assert_eq!(code(&bin(&["frobnicate"])), 2);
}

#[test]
fn evaluate_writes_tables_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let study = small_study(&dir, "study");
    let report = dir.path().join("report");
    let r = bin(&["evaluate", s(&study), "--plots", "--output", s(&report)]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let files: Vec<String> =
        fs::read_dir(&report).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    assert!(files.iter().any(|f| f.ends_with(".svg")));
    assert!(files.iter().any(|f| f == "series.tsv"));
    assert_eq!(files.len(), 28);
}

#[test]
fn evaluate_rejects_an_empty_records_directory() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let labels = dir.path().join("labels.csv");
    fs::write(&labels, "video_id,code,annotator_id,source,confidence,timestamp,resolution\n").unwrap();
    let r = bin(&["evaluate", s(&empty), "--labels", s(&labels)]);
    assert_eq!(code(&r), 1);
    assert!(stderr(&r).contains("no run records"), "{}", stderr(&r));
}

#[test]
fn evaluate_refuses_too_many_missing_labels_and_names_them() {
    let dir = tempfile::tempdir().unwrap();
    let study = small_study(&dir, "study");
    let truth = fs::read_to_string(study.join("truth_labels.csv")).unwrap();
    let mut lines = truth.lines();
    let header = lines.next().unwrap();
    let kept: Vec<&str> = lines.enumerate().filter(|(i, _)| i % 2 == 0).map(|(_, l)| l).collect();
    let labels = dir.path().join("half.csv");
    fs::write(&labels, format!("{header}\n{}\n", kept.join("\n"))).unwrap();
    let r = bin(&["evaluate", s(&study), "--labels", s(&labels), "--output", s(&dir.path().join("r"))]);
    assert_eq!(code(&r), 1);
    let err = stderr(&r);
    assert!(err.contains("--max-missing") && err.contains("times)"), "{err}");
    assert!(!dir.path().join("r").exists());
}

#[test]
fn train_classify_and_manual_labels_win() {
    let dir = tempfile::tempdir().unwrap();
    let study = small_study(&dir, "study");
    let model = dir.path().join("model.json");
    let r = bin(&["train", s(&study), "--epochs", "3", "--seed", "1", "--output", s(&model)]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));

    let labels = dir.path().join("labels.csv");
    fs::copy(study.join("truth_labels.csv"), &labels).unwrap();
    let r = bin(&["classify", s(&study), "--model", s(&model), "--output", s(&labels)]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));

    let table = fs::read_to_string(&labels).unwrap();
    let catalog_len = fs::read_to_string(study.join("catalog.jsonl")).unwrap().lines().count();
    let predicted: Vec<Vec<&str>> =
        table.lines().map(|l| l.split(',').collect::<Vec<_>>()).filter(|f| f[3] == "predicted").collect();
    assert_eq!(predicted.len(), catalog_len);
    for row in &predicted {
        assert_eq!(row[2], "model");
        assert!((0.0..=1.0).contains(&row[4].parse::<f64>().unwrap()));
    }

    let (a, b) = (dir.path().join("truth"), dir.path().join("mixed"));
    assert_eq!(code(&bin(&["evaluate", s(&study), "--output", s(&a)])), 0);
    assert_eq!(code(&bin(&["evaluate", s(&study), "--labels", s(&labels), "--output", s(&b)])), 0);
    for file in fs::read_dir(&a).unwrap() {
        let name = file.unwrap().file_name();
        assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap(), "{name:?}");
    }
}

#[test]
fn kappa_reports_agreement() {
    let dir = tempfile::tempdir().unwrap();
    let labels = dir.path().join("labels.csv");
    let mut table = String::from("video_id,code,annotator_id,source,confidence,timestamp,resolution\n");
    // Seven agreements and one disagreement over three codes.
    let pairs = [(1, 1), (1, 1), (0, 0), (0, 0), (0, 0), (2, 2), (2, 2), (1, 0)];
    for (i, (a, b)) in pairs.iter().enumerate() {
        table += &format!("v{i:03},{a},ann-a,manual,,{},false\n", 2 * i);
        table += &format!("v{i:03},{b},ann-b,manual,,{},false\n", 2 * i + 1);
    }
    fs::write(&labels, table).unwrap();
    let r = bin(&["kappa", s(&labels), "--annotator-a", "ann-a", "--annotator-b", "ann-b"]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let out = String::from_utf8(r.stdout).unwrap();
    assert!(out.contains("items\t8"), "{out}");
    assert!(out.contains("observed_agreement\t0.8750"), "{out}");
    // p_o = 7/8, p_e = (3*2 + 3*4 + 2*2)/64 = 22/64, kappa = (56 - 22)/(64 - 22).
    assert!(out.contains(&format!("kappa\t{:.4}", 34.0 / 42.0)), "{out}");
    assert_eq!(code(&bin(&["kappa", s(&labels), "--annotator-a", "ann-a", "--annotator-b", "ann-b", "--output", "x"])), 2);
}

#[test]
fn self_compare_finds_no_difference() {
    let dir = tempfile::tempdir().unwrap();
    let study = small_study(&dir, "study");
    let out = dir.path().join("compare.tsv");
    let r = bin(&["compare", s(&study), s(&study), "--output", s(&out)]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let table = fs::read_to_string(&out).unwrap();
    assert_eq!(table.lines().count(), 7);
    assert!(table.lines().skip(1).all(|l| l.ends_with("n.s.d.")), "{table}");
}

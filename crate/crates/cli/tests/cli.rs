use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;
use ttclass::data::{idx_bytes, write_csv};
use ttclass::synth::planted_two_class;
use ttclass::{DegreeVector, RankVector};

fn ttclass(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ttclass"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Writes a planted two-class CSV (8 features, labels 0/1) and returns its path.
fn planted_csv(dir: &TempDir, n: usize, seed: u64) -> PathBuf {
    let deg = DegreeVector::uniform(1, 8).unwrap();
    let ranks = RankVector::uniform(3, 8).unwrap();
    let (_, ds) = planted_two_class(&deg, &ranks, n, 0.05, seed).unwrap();
    let path = dir.path().join(format!("planted{seed}.csv"));
    write_csv(&ds, &path).unwrap();
    path
}

fn train_planted(dir: &TempDir, data: &Path, out: &str) -> PathBuf {
    let model = dir.path().join(out);
    let run = ttclass(&[
        "train", "--data", path_str(data), "--degree", "1", "--ranks", "3", "--sweeps", "8", "--seed", "3", "--out",
        path_str(&model),
    ]);
    assert!(run.status.success(), "train failed: {}", stderr(&run));
    model
}

#[test]
fn polyval_worked_example() {
    let out = ttclass(&["polyval", "4*x1 + 1*x1^3 - 2*x1 x2 x3 - 7*x2 x3^2", "1", "1", "1"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).trim().parse::<f64>().unwrap(), -4.0);
}

#[test]
fn polyval_negative_coordinates() {
    let out = ttclass(&["polyval", "2*x1^2 x2 - 1*x2", "-3", "0.5"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(stdout(&out).trim().parse::<f64>().unwrap(), 8.5);
}

#[test]
fn polyval_syntax_error_is_usage_error() {
    let out = ttclass(&["polyval", "4*x1 +", "1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn train_without_data_is_usage_error() {
    let dir = TempDir::new().unwrap();
    let out = ttclass(&["train", "--out", path_str(&dir.path().join("m.bin"))]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("--data"), "{err}");
    assert!(!dir.path().join("m.bin").exists());
}

#[test]
fn unknown_flag_and_subcommand_exit_1() {
    assert_eq!(ttclass(&["train", "--bogus"]).status.code(), Some(1));
    assert_eq!(ttclass(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(ttclass(&[]).status.code(), Some(1));
    assert_eq!(ttclass(&["train", "--data", "x.csv", "--loss", "hinge", "--out", "m"]).status.code(), Some(1));
}

#[test]
fn help_exits_0() {
    let out = ttclass(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("polyval"));
}

#[test]
fn missing_or_malformed_data_exit_2() {
    let dir = TempDir::new().unwrap();
    let model = path_str(&dir.path().join("m.bin")).to_string();
    let out = ttclass(&["train", "--data", "/nonexistent/data.csv", "--out", &model]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("/nonexistent/data.csv"));

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "1,2,0\n3,oops,1\n").unwrap();
    let out = ttclass(&["train", "--data", path_str(&bad), "--out", &model]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains(":2:"), "{}", stderr(&out));

    let out = ttclass(&["eval", "--model", "/nonexistent/model.bin", "--data", path_str(&bad)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn eval_on_planted_training_data_is_exact() {
    let dir = TempDir::new().unwrap();
    let data = planted_csv(&dir, 600, 11);
    let model = train_planted(&dir, &data, "m.bin");
    let out = ttclass(&["eval", "--model", path_str(&model), "--data", path_str(&data)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert_eq!(text.lines().next(), Some("error 0.0000"), "{text}");
    assert!(text.contains("confusion"));
}

#[test]
fn identical_flags_give_identical_model_files() {
    let dir = TempDir::new().unwrap();
    let data = planted_csv(&dir, 300, 15);
    let a = std::fs::read(train_planted(&dir, &data, "a.bin")).unwrap();
    let b = std::fs::read(train_planted(&dir, &data, "b.bin")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn predict_writes_one_label_per_sample() {
    let dir = TempDir::new().unwrap();
    let data = planted_csv(&dir, 300, 13);
    let model = train_planted(&dir, &data, "m.bin");
    let preds = dir.path().join("pred.txt");
    let out = ttclass(&["predict", "--model", path_str(&model), "--data", path_str(&data), "--out", path_str(&preds)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let written = std::fs::read_to_string(&preds).unwrap();
    let labels: Vec<i64> = written.lines().map(|l| l.parse().unwrap()).collect();
    assert_eq!(labels.len(), 300);
    assert!(labels.iter().all(|&l| l == 0 || l == 1));

    let out = ttclass(&["predict", "--model", path_str(&model), "--data", path_str(&data)]);
    assert_eq!(stdout(&out), written);
}

#[test]
fn cv_reports_every_gamma_and_a_choice() {
    let dir = TempDir::new().unwrap();
    let data = planted_csv(&dir, 200, 14);
    let out = ttclass(&[
        "cv", "--data", path_str(&data), "--ranks", "2", "--sweeps", "2", "--gamma-grid", "0,0.001,0.1", "--folds", "3",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert_eq!(text.lines().filter(|l| l.starts_with("gamma ")).count(), 3, "{text}");
    let best = text.lines().find_map(|l| l.strip_prefix("best_gamma ")).expect("choice printed");
    assert!([0.0, 0.001, 0.1].contains(&best.parse::<f64>().unwrap()));
}

#[test]
fn idx_input_with_pca_and_multiclass() {
    let dir = TempDir::new().unwrap();
    // three classes of 4x4 "images": bright left, middle or right columns
    let (rows, cols, n) = (4, 4, 90);
    let mut pixels = Vec::with_capacity(n * rows * cols);
    let mut labels = Vec::with_capacity(n);
    for j in 0..n {
        let class = (j % 3) as u8;
        labels.push(class);
        for _r in 0..rows {
            for c in 0..cols {
                let lit = match class {
                    0 => c == 0,
                    1 => c == 1 || c == 2,
                    _ => c == 3,
                };
                let noise = ((j * 31 + c * 7) % 23) as u8;
                pixels.push(if lit { 200 + noise } else { noise });
            }
        }
    }
    let (img, lab) = idx_bytes(&pixels, n, rows, cols, &labels);
    let img_path = dir.path().join("images-idx3-ubyte");
    let lab_path = dir.path().join("labels-idx1-ubyte");
    std::fs::write(&img_path, img).unwrap();
    std::fs::write(&lab_path, lab).unwrap();
    let model = dir.path().join("m.bin");
    for strategy in ["ova", "ovo", "code"] {
        let out = ttclass(&[
            "train", "--idx-images", path_str(&img_path), "--idx-labels", path_str(&lab_path), "--pca", "3", "--ranks",
            "2", "--strategy", strategy, "--loss", "lr", "--gamma", "1e-6", "--out", path_str(&model),
        ]);
        assert!(out.status.success(), "{strategy}: {}", stderr(&out));
        let out = ttclass(&[
            "eval", "--model", path_str(&model), "--idx-images", path_str(&img_path), "--idx-labels",
            path_str(&lab_path),
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
        assert_eq!(stdout(&out).lines().next(), Some("error 0.0000"), "{strategy}: {}", stdout(&out));
    }
}

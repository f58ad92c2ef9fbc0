//! End-to-end tests of the `lift3d` binary: command plumbing, determinism,
//! file formats, flag precedence, and machine-parseable error output.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lift3d"))
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary runs");
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).expect("file exists")
}

/// Generates a small sheet dataset and returns its path.
fn make_dataset(dir: &Path, n: usize, samples: usize, seed: u64) -> std::path::PathBuf {
    let data = dir.join(format!("data-{n}-{samples}-{seed}.txt"));
    run_ok(bin()
        .args(["synth", "--family", "sheet", "--out"])
        .arg(&data)
        .args(["--n", &n.to_string(), "--samples", &samples.to_string(), "--seed", &seed.to_string()]));
    data
}

/// Trains a tiny model and returns the checkpoint path.
fn make_model(dir: &Path, data: &Path, extra: &[&str]) -> std::path::PathBuf {
    let model = dir.join("model.ckpt");
    run_ok(bin()
        .args(["train", "--data"])
        .arg(data)
        .arg("--out")
        .arg(&model)
        .args(["--epochs", "2", "--max-iters", "5", "--patience", "3", "--validation-expansion", "2"])
        .args(extra));
    model
}

#[test]
fn synth_is_deterministic_and_seed_sensitive() {
    let dir = tempfile::tempdir().unwrap();
    let a = make_dataset(dir.path(), 6, 10, 7);
    let b_path = dir.path().join("b.txt");
    run_ok(bin()
        .args(["synth", "--family", "sheet", "--n", "6", "--samples", "10", "--seed", "7", "--out"])
        .arg(&b_path));
    assert_eq!(read(&a), read(&b_path), "same spec must give identical bytes");

    let c = make_dataset(dir.path(), 6, 10, 8);
    assert_ne!(read(&a), read(&c), "a different seed must change the data");
}

#[test]
fn synth_spec_file_accepts_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.toml");
    std::fs::write(&spec, "kind = \"sheet\"\nn = 8\nsample_count = 5\nseed = 3\n").unwrap();
    let out = dir.path().join("data.txt");
    run_ok(bin().args(["synth", "--spec"]).arg(&spec).args(["--samples", "6", "--out"]).arg(&out));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.contains("\nn 8\n"), "n from the spec file survives");
    assert!(text.contains("\nsamples 6\n"), "--samples overrides the spec file");
}

#[test]
fn train_twice_with_same_flags_gives_byte_identical_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let data = make_dataset(dir.path(), 4, 8, 7);

    let m1 = dir.path().join("m1.ckpt");
    let m2 = dir.path().join("m2.ckpt");
    let m3 = dir.path().join("m3.ckpt");
    for (model, seed) in [(&m1, "7"), (&m2, "7"), (&m3, "9")] {
        run_ok(bin()
            .args(["train", "--data"])
            .arg(&data)
            .arg("--out")
            .arg(model)
            .args(["--epochs", "2", "--max-iters", "5", "--patience", "3"])
            .args(["--validation-expansion", "2", "--seed", seed]));
    }
    assert_eq!(read(&m1), read(&m2), "identical flags and seed must reproduce the checkpoint");
    assert_ne!(read(&m1), read(&m3), "a different seed must change the checkpoint");
}

#[test]
fn eval_report_is_deterministic_and_timing_free() {
    let dir = tempfile::tempdir().unwrap();
    let data = make_dataset(dir.path(), 4, 8, 7);
    let model = make_model(dir.path(), &data, &[]);

    let r1 = dir.path().join("r1.txt");
    let r2 = dir.path().join("r2.txt");
    for report in [&r1, &r2] {
        run_ok(bin()
            .args(["eval", "--model"])
            .arg(&model)
            .arg("--data")
            .arg(&data)
            .args(["--noise", "0.02", "--seed", "11", "--out"])
            .arg(report));
    }
    assert_eq!(read(&r1), read(&r2), "same seed and inputs must give identical reports");

    let text = std::fs::read_to_string(&r1).unwrap();
    assert!(text.starts_with("lift3d eval v1\n"));
    assert!(text.contains("mean_error "));
    assert!(!text.contains("second"), "timing belongs on stderr, not in the report");

    // Without --out the same report goes to stdout; throughput to stderr.
    let out = run_ok(bin()
        .args(["eval", "--model"])
        .arg(&model)
        .arg("--data")
        .arg(&data)
        .args(["--noise", "0.02", "--seed", "11"]));
    assert_eq!(out.stdout, read(&r1), "stdout must match the file output byte for byte");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("reconstructions/s"), "throughput figure on stderr: {stderr}");
}

#[test]
fn config_file_fields_are_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let data = make_dataset(dir.path(), 4, 8, 7);
    let config = dir.path().join("config.toml");
    std::fs::write(
        &config,
        "epochs = 1\nmax_iters_per_epoch = 5\npatience = 5\nvalidation_expansion = 2\n",
    )
    .unwrap();

    let model = dir.path().join("model.ckpt");
    let history = dir.path().join("history.txt");
    run_ok(bin()
        .args(["train", "--data"])
        .arg(&data)
        .arg("--out")
        .arg(&model)
        .arg("--config")
        .arg(&config)
        .arg("--history")
        .arg(&history)
        .args(["--epochs", "2"]));
    let text = std::fs::read_to_string(&history).unwrap();
    assert!(
        text.contains("epochs_run 2"),
        "--epochs must override the config file (patience 5 cannot stop in 2 epochs): {text}"
    );
}

#[test]
fn missing_flag_trains_an_imputer_usable_at_eval_time() {
    let dir = tempfile::tempdir().unwrap();
    let data = make_dataset(dir.path(), 5, 8, 7);
    let model = make_model(dir.path(), &data, &["--missing", "1"]);

    let text = std::fs::read_to_string(&model).unwrap();
    assert!(text.contains("\nimputer "), "checkpoint must carry the imputer block");

    run_ok(bin()
        .args(["eval", "--model"])
        .arg(&model)
        .arg("--data")
        .arg(&data)
        .args(["--missing", "1"]));
}

#[test]
fn reconstruct_writes_a_loadable_shape_and_an_obj_mesh() {
    let dir = tempfile::tempdir().unwrap();
    let data = make_dataset(dir.path(), 6, 8, 7);
    let model = make_model(dir.path(), &data, &[]);

    let landmarks = dir.path().join("landmarks.txt");
    std::fs::write(
        &landmarks,
        "lift3d landmarks v1\nn 6\n0.1 0.2\n1.1 0.15\n2.2 0.3\n0.12 1.4\n1.15 1.45\n2.3 1.5\nend\n",
    )
    .unwrap();

    let shape = dir.path().join("shape.txt");
    let mesh = dir.path().join("mesh.obj");
    run_ok(bin()
        .args(["reconstruct", "--model"])
        .arg(&model)
        .arg("--landmarks")
        .arg(&landmarks)
        .arg("--out")
        .arg(&shape)
        .arg("--mesh")
        .arg(&mesh));

    let loaded = lift3d::dataset::load_dataset(&shape).expect("output must round-trip");
    assert_eq!(loaded.n(), 6);
    assert_eq!(loaded.len(), 1);

    let obj = std::fs::read_to_string(&mesh).unwrap();
    assert_eq!(obj.lines().filter(|l| l.starts_with("v ")).count(), 6);
    // n = 6 factors as a 2 x 3 grid: (2-1) * (3-1) quads.
    assert_eq!(obj.lines().filter(|l| l.starts_with("f ")).count(), 2);

    // Reconstruction is deterministic.
    let shape2 = dir.path().join("shape2.txt");
    run_ok(bin()
        .args(["reconstruct", "--model"])
        .arg(&model)
        .arg("--landmarks")
        .arg(&landmarks)
        .arg("--out")
        .arg(&shape2));
    assert_eq!(read(&shape), read(&shape2));
}

#[test]
fn bench_prints_a_throughput_figure_with_deterministic_checksum() {
    let dir = tempfile::tempdir().unwrap();
    let data = make_dataset(dir.path(), 4, 8, 7);
    let model = make_model(dir.path(), &data, &[]);

    let grab = || {
        let out = run_ok(bin()
            .args(["bench", "--model"])
            .arg(&model)
            .args(["--repetitions", "200"]));
        String::from_utf8(out.stdout).unwrap()
    };
    let a = grab();
    assert!(a.starts_with("lift3d bench v1\n"));
    assert!(a.contains("\nrepetitions 200\n"));
    assert!(a.contains("\nreconstructions_per_second "));

    let checksum = |text: &str| {
        text.lines()
            .find_map(|l| l.strip_prefix("checksum "))
            .expect("checksum line")
            .to_string()
    };
    assert_eq!(checksum(&a), checksum(&grab()), "the work itself must be deterministic");
}

// ---------------------------------------------------------------------------
// Error surface
// ---------------------------------------------------------------------------

/// Runs a failing command and returns (exit code, the single stderr line).
fn run_err(cmd: &mut Command) -> (i32, String) {
    let out = cmd.output().expect("binary runs");
    assert!(!out.status.success(), "command unexpectedly succeeded");
    let stderr = String::from_utf8(out.stderr).unwrap();
    let lines: Vec<&str> = stderr.lines().collect();
    assert_eq!(lines.len(), 1, "errors must be a single line, got: {stderr}");
    (out.status.code().expect("exit code"), lines[0].to_string())
}

#[test]
fn errors_are_single_line_with_stable_codes() {
    let dir = tempfile::tempdir().unwrap();
    let data = make_dataset(dir.path(), 4, 8, 7);
    let model = make_model(dir.path(), &data, &[]);

    // Missing input file -> E_IO, exit 8.
    let (code, line) = run_err(bin()
        .args(["train", "--data", "/nonexistent/data.txt", "--out"])
        .arg(dir.path().join("x.ckpt")));
    assert_eq!(code, 8, "stderr: {line}");
    assert!(line.starts_with("error[E_IO]: "), "got: {line}");

    // Invalid config value -> E_CONFIG, exit 3.
    let (code, line) = run_err(bin()
        .args(["train", "--data"])
        .arg(&data)
        .arg("--out")
        .arg(dir.path().join("x.ckpt"))
        .args(["--learning-rate", "-1"]));
    assert_eq!(code, 3, "stderr: {line}");
    assert!(line.starts_with("error[E_CONFIG]: "), "got: {line}");

    // Unknown config-file key -> E_PARSE, exit 5.
    let bad_config = dir.path().join("bad.toml");
    std::fs::write(&bad_config, "momentum = 0.9\n").unwrap();
    let (code, line) = run_err(bin()
        .args(["train", "--data"])
        .arg(&data)
        .arg("--out")
        .arg(dir.path().join("x.ckpt"))
        .arg("--config")
        .arg(&bad_config));
    assert_eq!(code, 5, "stderr: {line}");
    assert!(line.starts_with("error[E_PARSE]: "), "got: {line}");

    // Corrupted checkpoint -> E_CORRUPT, exit 6.
    let corrupt = dir.path().join("corrupt.ckpt");
    let mut text = std::fs::read_to_string(&model).unwrap();
    text = text.replacen("e-1", "e-2", 1);
    std::fs::write(&corrupt, text).unwrap();
    let (code, line) = run_err(bin()
        .args(["bench", "--model"])
        .arg(&corrupt)
        .args(["--repetitions", "1"]));
    assert_eq!(code, 6, "stderr: {line}");
    assert!(line.starts_with("error[E_CORRUPT]: "), "got: {line}");

    // Unsupported dataset format version -> E_VERSION, exit 7.
    let future = dir.path().join("future.txt");
    std::fs::write(&future, "lift3d dataset v2\nn 4\nunit arbitrary\nsamples 0\nend\n").unwrap();
    let (code, line) = run_err(bin()
        .args(["eval", "--model"])
        .arg(&model)
        .arg("--data")
        .arg(&future));
    assert_eq!(code, 7, "stderr: {line}");
    assert!(line.starts_with("error[E_VERSION]: "), "got: {line}");

    // Landmark count mismatch -> E_LANDMARK_COUNT, exit 11.
    let other = make_dataset(dir.path(), 6, 4, 7);
    let (code, line) = run_err(bin()
        .args(["eval", "--model"])
        .arg(&model)
        .arg("--data")
        .arg(&other));
    assert_eq!(code, 11, "stderr: {line}");
    assert!(line.starts_with("error[E_LANDMARK_COUNT]: "), "got: {line}");

    // Missing landmarks without an imputer -> E_MISSING_NO_IMPUTER, exit 12.
    let landmarks = dir.path().join("landmarks.txt");
    std::fs::write(
        &landmarks,
        "lift3d landmarks v1\nn 4\n0.1 0.2\n1.1 0.15\nmissing\n0.12 1.4\nend\n",
    )
    .unwrap();
    let (code, line) = run_err(bin()
        .args(["reconstruct", "--model"])
        .arg(&model)
        .arg("--landmarks")
        .arg(&landmarks)
        .arg("--out")
        .arg(dir.path().join("shape.txt")));
    assert_eq!(code, 12, "stderr: {line}");
    assert!(line.starts_with("error[E_MISSING_NO_IMPUTER]: "), "got: {line}");

    // Invalid synthetic spec -> E_SPEC, exit 4.
    let (code, line) = run_err(bin()
        .args(["synth", "--family", "sheet", "--n", "2", "--out"])
        .arg(dir.path().join("tiny.txt")));
    assert_eq!(code, 4, "stderr: {line}");
    assert!(line.starts_with("error[E_SPEC]: "), "got: {line}");
}

//! Black-box checks of the binary: exit codes, reproducibility of every
//! artifact from the seed, and file shapes.

use std::path::Path;
use std::process::{Command, Output};

fn jwdm() -> Command {
    Command::new(env!("CARGO_BIN_EXE_jwdm"))
}

fn run(args: &[&str], dir: &Path) -> Output {
    jwdm()
        .args(args)
        .current_dir(dir)
        .env_remove("JDM_SEED")
        .output()
        .expect("spawn jwdm")
}

fn assert_code(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    // Unknown dataset kind.
    let out = run(
        &["gen-data", "--kind", "spiral", "--n", "10", "--out", "d"],
        dir.path(),
    );
    assert_code(&out, 2);
    // Missing required output path.
    let out = run(&["gen-data", "--kind", "ring", "--n", "10"], dir.path());
    assert_code(&out, 2);
    // Interpolation needs n >= 2.
    let out = run(
        &[
            "synth", "--checkpoint", "x.bin", "--begin", "0,0", "--end", "1,1", "--n", "1",
            "--out", "t.csv",
        ],
        dir.path(),
    );
    assert_code(&out, 2);
    // Zero theorem instances.
    let out = run(
        &["verify-theorem", "--instances", "0", "--out", "r.csv"],
        dir.path(),
    );
    assert_code(&out, 2);
    // Required checkpoint path left out entirely.
    let out = run(&["eval", "--out", "e.csv"], dir.path());
    assert_code(&out, 2);
}

#[test]
fn runtime_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    // Dataset directory that does not exist.
    let out = run(
        &["train", "--data-dir", "missing", "--epochs", "1", "--out", "r"],
        dir.path(),
    );
    assert_code(&out, 1);
    // Checkpoint that does not exist.
    let out = run(
        &[
            "synth", "--checkpoint", "missing.bin", "--begin", "0,0", "--end", "1,1", "--out",
            "t.csv",
        ],
        dir.path(),
    );
    assert_code(&out, 1);
}

#[test]
fn help_documents_defaults() {
    for sub in ["gen-data", "train", "synth", "verify-theorem", "eval", "sweep"] {
        let out = jwdm().args([sub, "--help"]).output().unwrap();
        assert_code(&out, 0);
    }
    let train_help = jwdm().args(["train", "--help"]).output().unwrap();
    let text = String::from_utf8_lossy(&train_help.stdout).to_string();
    assert!(text.contains("0.0002"), "lr default missing:\n{text}");
    assert!(text.contains("default 0.1"), "lambda default missing:\n{text}");
    assert!(text.contains("JDM_SEED"), "seed fallback undocumented:\n{text}");
}

#[test]
fn gen_data_is_seed_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a", "b"] {
        let out = run(
            &["gen-data", "--kind", "ring", "--n", "100", "--seed", "5", "--out", name],
            dir.path(),
        );
        assert_code(&out, 0);
    }
    for file in ["x.csv", "y.csv", "spec.json"] {
        let a = std::fs::read(dir.path().join("a").join(file)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical runs");
    }
    // Manifest exists and records the artifacts.
    let manifest = std::fs::read_to_string(dir.path().join("a/manifest.json")).unwrap();
    assert!(manifest.contains("\"subcommand\": \"gen-data\""));
    assert!(manifest.contains("x.csv"));
}

#[test]
fn jdm_seed_env_is_the_fallback() {
    let dir = tempfile::tempdir().unwrap();
    let out = jwdm()
        .args(["gen-data", "--kind", "ring", "--n", "50", "--out", "env_run"])
        .current_dir(dir.path())
        .env("JDM_SEED", "7")
        .output()
        .unwrap();
    assert_code(&out, 0);
    let out = run(
        &["gen-data", "--kind", "ring", "--n", "50", "--seed", "7", "--out", "flag_run"],
        dir.path(),
    );
    assert_code(&out, 0);
    let a = std::fs::read(dir.path().join("env_run/x.csv")).unwrap();
    let b = std::fs::read(dir.path().join("flag_run/x.csv")).unwrap();
    assert_eq!(a, b);
}

fn tiny_train(dir: &Path, out: &str) -> Output {
    run(
        &[
            "train",
            "--epochs",
            "2",
            "--lr-decay-start",
            "1",
            "--batch-size",
            "16",
            "--hidden-dims",
            "8",
            "--latent-dim",
            "3",
            "--data-n",
            "64",
            "--seed",
            "3",
            "--out",
            out,
        ],
        dir,
    )
}

#[test]
fn train_log_row_count_matches_epochs_times_steps() {
    let dir = tempfile::tempdir().unwrap();
    let out = tiny_train(dir.path(), "run");
    assert_code(&out, 0);
    let log = std::fs::read_to_string(dir.path().join("run/training_log.csv")).unwrap();
    // 64 samples / batch 16 = 4 steps per epoch, 2 epochs, plus header.
    assert_eq!(log.lines().count(), 1 + 2 * 4);
    assert!(log.starts_with("epoch,step,lr,"));
    assert!(dir.path().join("run/checkpoint.bin").exists());
    assert!(dir.path().join("run/manifest.json").exists());
}

#[test]
fn training_artifacts_reproduce_from_seed() {
    let dir = tempfile::tempdir().unwrap();
    assert_code(&tiny_train(dir.path(), "r1"), 0);
    assert_code(&tiny_train(dir.path(), "r2"), 0);
    for file in ["checkpoint.bin", "training_log.csv"] {
        let a = std::fs::read(dir.path().join("r1").join(file)).unwrap();
        let b = std::fs::read(dir.path().join("r2").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical runs");
    }
}

#[test]
fn synth_frame_count_and_reproducibility() {
    let dir = tempfile::tempdir().unwrap();
    assert_code(&tiny_train(dir.path(), "run"), 0);
    for name in ["t1.csv", "t2.csv"] {
        let out = run(
            &[
                "synth",
                "--checkpoint",
                "run/checkpoint.bin",
                "--begin",
                "1,0",
                "--end",
                "0,1",
                "--n",
                "8",
                "--out",
                name,
            ],
            dir.path(),
        );
        assert_code(&out, 0);
    }
    let a = std::fs::read_to_string(dir.path().join("t1.csv")).unwrap();
    let b = std::fs::read(dir.path().join("t2.csv")).unwrap();
    assert_eq!(a.as_bytes(), &b[..]);
    // 9 frames per domain plus header.
    assert_eq!(a.lines().count(), 1 + 9 * 2);

    // Negative coordinates parse as values, not flags.
    let out = run(
        &[
            "synth",
            "--checkpoint",
            "run/checkpoint.bin",
            "--begin",
            "-1,0",
            "--end",
            "-0.5,-0.5",
            "--n",
            "2",
            "--out",
            "neg.csv",
        ],
        dir.path(),
    );
    assert_code(&out, 0);
}

#[test]
fn eval_reproduces_and_emits_schema() {
    let dir = tempfile::tempdir().unwrap();
    assert_code(&tiny_train(dir.path(), "run"), 0);
    for name in ["e1.csv", "e2.csv"] {
        let out = run(
            &[
                "eval",
                "--checkpoint",
                "run/checkpoint.bin",
                "--heldout-n",
                "32",
                "--w2-n",
                "8",
                "--out",
                name,
            ],
            dir.path(),
        );
        assert_code(&out, 0);
    }
    let a = std::fs::read_to_string(dir.path().join("e1.csv")).unwrap();
    let b = std::fs::read(dir.path().join("e2.csv")).unwrap();
    assert_eq!(a.as_bytes(), &b[..]);
    assert!(a.starts_with(
        "lambda_z,task,frechet_x,frechet_y,corr_rmse,cycle_l1_x,cycle_l1_y,w2_x,w2_y"
    ));
}

#[test]
fn verify_theorem_writes_report_and_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &[
            "verify-theorem",
            "--instances",
            "30",
            "--product-instances",
            "8",
            "--seed",
            "2",
            "--out",
            "report.csv",
        ],
        dir.path(),
    );
    assert_code(&out, 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("PASS"), "stdout: {stdout}");
    let report = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert_eq!(report.lines().count(), 1 + 38);
    assert!(report.starts_with("instance,kind,w_c,w_c1,w_c2,gap,independent"));
}

#[test]
fn cli_resume_reproduces_the_uninterrupted_run() {
    let dir = tempfile::tempdir().unwrap();
    let base = [
        "train",
        "--epochs",
        "3",
        "--lr-decay-start",
        "2",
        "--batch-size",
        "16",
        "--hidden-dims",
        "8",
        "--latent-dim",
        "3",
        "--data-n",
        "64",
        "--seed",
        "11",
    ];
    let mut full: Vec<&str> = base.to_vec();
    full.extend_from_slice(&["--out", "full"]);
    assert_code(&run(&full, dir.path()), 0);

    let mut part: Vec<&str> = base.to_vec();
    part.extend_from_slice(&["--out", "split", "--stop-after", "1"]);
    assert_code(&run(&part, dir.path()), 0);
    let mut resume: Vec<&str> = base.to_vec();
    resume.extend_from_slice(&["--out", "split", "--resume", "split/checkpoint.bin"]);
    assert_code(&run(&resume, dir.path()), 0);

    let a = std::fs::read(dir.path().join("full/checkpoint.bin")).unwrap();
    let b = std::fs::read(dir.path().join("split/checkpoint.bin")).unwrap();
    assert_eq!(a, b, "resumed checkpoint differs from the uninterrupted one");
}

#[test]
fn sweep_and_eval_accept_dataset_directories() {
    let dir = tempfile::tempdir().unwrap();
    assert_code(
        &run(
            &["gen-data", "--kind", "gauss-mix", "--n", "64", "--seed", "2", "--out", "d"],
            dir.path(),
        ),
        0,
    );
    let out = run(
        &[
            "sweep",
            "--values",
            "0.05,0.5",
            "--data-dir",
            "d",
            "--epochs",
            "2",
            "--lr-decay-start",
            "1",
            "--batch-size",
            "16",
            "--hidden-dims",
            "8",
            "--latent-dim",
            "3",
            "--out",
            "sw",
        ],
        dir.path(),
    );
    assert_code(&out, 0);
    let table = std::fs::read_to_string(dir.path().join("sw/sweep.csv")).unwrap();
    assert_eq!(table.lines().count(), 3); // header + 2 rows
    let out = run(
        &[
            "eval",
            "--checkpoint",
            "sw/lambda_z_0.05/checkpoint.bin",
            "--data-dir",
            "d",
            "--heldout-n",
            "32",
            "--w2-n",
            "8",
            "--out",
            "e.csv",
        ],
        dir.path(),
    );
    assert_code(&out, 0);
}

#[test]
fn config_file_resolves_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("exp.ini"),
        "epochs=2\nlr_decay_start=1\nbatch_size=16\nhidden_dims=8\nlatent_dim=3\ndata_n=64\nseed=3\n",
    )
    .unwrap();
    let out = run(
        &["train", "--config", "exp.ini", "--out", "from_file"],
        dir.path(),
    );
    assert_code(&out, 0);
    // Flags win over the file: same file, seed overridden, different params.
    let out = run(
        &[
            "train", "--config", "exp.ini", "--seed", "4", "--out", "overridden",
        ],
        dir.path(),
    );
    assert_code(&out, 0);
    let a = std::fs::read(dir.path().join("from_file/checkpoint.bin")).unwrap();
    let b = std::fs::read(dir.path().join("overridden/checkpoint.bin")).unwrap();
    assert_ne!(a, b);
}

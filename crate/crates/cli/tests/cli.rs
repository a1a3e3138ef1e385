use std::path::Path;
use std::process::{Command, Output};

fn rirprompt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rirprompt"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = rirprompt(args);
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn short_clips(dir: &Path) -> String {
    let path = dir.join("config.json");
    std::fs::write(
        &path,
        r#"{"scenario": {"clip_seconds": 0.5}, "train": {"batch_size": 2, "max_epochs": 1}}"#,
    )
    .unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn synth_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = short_clips(tmp.path());
    let dirs = ["a", "b"].map(|d| tmp.path().join(d));
    for d in &dirs {
        ok(&[
            "--config",
            &cfg,
            "--seed",
            "5",
            "synth",
            "--out",
            d.to_str().unwrap(),
            "--count",
            "3",
            "--split",
            "mismatch",
        ]);
    }
    let manifest = |d: &Path| std::fs::read(d.join("manifest.jsonl")).unwrap();
    assert_eq!(manifest(&dirs[0]), manifest(&dirs[1]));
    let text = String::from_utf8(manifest(&dirs[0])).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.contains("\"split\":\"mismatch\""));
}

#[test]
fn rir_writes_wav_and_metadata() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("rirs");
    ok(&["rir", "--out", out.to_str().unwrap(), "--count", "2"]);
    for stem in ["train_rir_000000", "train_rir_000001"] {
        assert!(out.join(format!("{stem}.wav")).is_file());
        let meta = std::fs::read_to_string(out.join(format!("{stem}.json"))).unwrap();
        assert!(meta.contains("\"t60\""));
    }
}

#[test]
fn train_eval_and_nlms_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = short_clips(tmp.path());
    let p = |s: &str| tmp.path().join(s).to_str().unwrap().to_string();
    ok(&[
        "--config",
        &cfg,
        "synth",
        "--out",
        &p("train"),
        "--count",
        "2",
        "--split",
        "train",
    ]);
    ok(&[
        "--config",
        &cfg,
        "synth",
        "--out",
        &p("match"),
        "--count",
        "2",
        "--split",
        "match",
    ]);
    let log = ok(&[
        "--config",
        &cfg,
        "--seed",
        "3",
        "train",
        "--train",
        &p("train"),
        "--val",
        &p("match"),
        "--out",
        &p("ckpt"),
        "--fusion",
        "d",
    ]);
    assert!(log.contains("epoch   1"));
    for f in ["params.bin", "model.json", "history.json"] {
        assert!(tmp.path().join("ckpt").join(f).is_file(), "{f}");
    }

    let csv = ok(&[
        "eval",
        "--checkpoint",
        &p("ckpt"),
        "--data",
        &p("match"),
        "--data",
        &p("real"),
        "--mix",
        "--out",
        &p("eval.csv"),
    ]);
    assert!(csv.starts_with("model,split,scenario,metric,mean,std,n"));
    assert!(csv.contains("aec:d,match"));
    assert!(csv.contains("mix,match"));
    assert_eq!(std::fs::read_to_string(p("eval.csv")).unwrap(), csv);

    let csv = ok(&[
        "nlms",
        "--data",
        &p("match"),
        "--init",
        "denoised_rir",
        "--checkpoint",
        &p("ckpt"),
        "--out",
        &p("nlms.csv"),
    ]);
    assert!(csv.contains("nlms:denoised_rir,match"));
}

#[test]
fn denoised_init_needs_a_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = short_clips(tmp.path());
    let data = tmp.path().join("match");
    ok(&[
        "--config",
        &cfg,
        "synth",
        "--out",
        data.to_str().unwrap(),
        "--count",
        "1",
        "--split",
        "match",
    ]);
    let out = rirprompt(&[
        "nlms",
        "--data",
        data.to_str().unwrap(),
        "--init",
        "denoised_rir",
        "--out",
        "/dev/null",
    ]);
    assert!(!out.status.success());
}

#[test]
fn bad_config_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.json");
    std::fs::write(&path, r#"{"trian": {}}"#).unwrap();
    let out = rirprompt(&["--config", path.to_str().unwrap(), "gradcheck"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.json"));
}

#[test]
fn gradcheck_passes() {
    let out = ok(&["gradcheck"]);
    assert!(out.contains("backbone"));
    assert!(!out.contains("FAIL"));
}

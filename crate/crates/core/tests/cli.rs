use std::path::Path;
use std::process::{Command, Output};

fn bin(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_handoff-lab"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

const SMALL: &str = "[scenario]\nruns = 1\nduration_epochs = 10\n";

#[test]
fn simulate_writes_rows_and_is_reproducible() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "small.toml", SMALL);
    for out in ["a", "b"] {
        let o = bin(
            d.path(),
            &[
                "simulate",
                "--config",
                "small.toml",
                "--seed",
                "3",
                "--out",
                out,
            ],
        );
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        assert!(String::from_utf8_lossy(&o.stdout).contains("mean MOS"));
    }
    let a = std::fs::read_to_string(d.path().join("a/traces.csv")).unwrap();
    let b = std::fs::read_to_string(d.path().join("b/traces.csv")).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.lines().count(), 21);
    assert_eq!(a.lines().next(), Some("run_id,interface,epoch,rtt_s,mos"));
}

#[test]
fn codec_flag_changes_mos_but_not_delay() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "small.toml", SMALL);
    bin(
        d.path(),
        &[
            "simulate",
            "--config",
            "small.toml",
            "--codec",
            "g711",
            "--out",
            "a",
        ],
    );
    bin(
        d.path(),
        &[
            "simulate",
            "--config",
            "small.toml",
            "--codec",
            "g729",
            "--out",
            "b",
        ],
    );
    let rtt = |p: &str| {
        let text = std::fs::read_to_string(d.path().join(p)).unwrap();
        text.lines()
            .skip(1)
            .map(|l| l.split(',').nth(3).unwrap().to_string())
            .collect::<Vec<_>>()
    };
    assert_eq!(rtt("a/traces.csv"), rtt("b/traces.csv"));
    assert_ne!(
        std::fs::read(d.path().join("a/traces.csv")).unwrap(),
        std::fs::read(d.path().join("b/traces.csv")).unwrap()
    );
}

#[test]
fn train_predict_round() {
    let d = tempfile::tempdir().unwrap();
    write(
        d.path(),
        "c.toml",
        "[scenario]\nkind = \"wlan_congestion\"\nruns = 6\nduration_epochs = 60\n",
    );
    assert_eq!(
        code(&bin(
            d.path(),
            &["simulate", "--config", "c.toml", "--out", "o"]
        )),
        0
    );
    let o = bin(
        d.path(),
        &[
            "train-hmm",
            "o/traces.csv",
            "--config",
            "c.toml",
            "--folds",
            "3",
            "--out",
            "o",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("fold 3") && stdout.contains("mean accuracy"));
    assert!(d.path().join("o/model_wlan.toml").exists());
    assert!(d.path().join("o/train_cdma2000.json").exists());

    let o = bin(
        d.path(),
        &[
            "predict",
            "o/model_wlan.toml",
            "o/traces.csv",
            "--config",
            "c.toml",
            "--out",
            "o",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let preds = std::fs::read_to_string(d.path().join("o/predictions.csv")).unwrap();
    // one interface, first epoch of each run has nothing to predict from
    assert_eq!(preds.lines().count(), 1 + 6 * 59);
}

#[test]
fn folds_beyond_traces_is_usage_error() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "small.toml", SMALL);
    bin(
        d.path(),
        &["simulate", "--config", "small.toml", "--out", "o"],
    );
    let o = bin(
        d.path(),
        &["train-hmm", "o/traces.csv", "--folds", "4", "--out", "o"],
    );
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("folds"));
}

#[test]
fn unsupported_state_count_is_usage_error() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "t.csv", "run_id,interface,epoch,rtt_s,mos\nr1,W,0,0.1,4\nr1,W,1,0.2,3\nr2,W,0,0.1,4\nr2,W,1,0.3,2\n");
    assert_eq!(
        code(&bin(d.path(), &["train-hmm", "t.csv", "--states", "9"])),
        2
    );
}

#[test]
fn data_errors_exit_3() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "bad_header.csv", "run,iface\n");
    write(
        d.path(),
        "neg.csv",
        "run_id,interface,epoch,rtt_s,mos\nr1,W,0,-1,\n",
    );
    write(
        d.path(),
        "garbled.csv",
        "run_id,interface,epoch,rtt_s,mos\nr1,W,zero,0.1,\n",
    );
    for f in ["bad_header.csv", "neg.csv", "garbled.csv"] {
        let o = bin(d.path(), &["train-hmm", f]);
        assert_eq!(code(&o), 3, "{f}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let o = bin(d.path(), &["train-hmm", "neg.csv"]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("r1"));
}

#[test]
fn config_and_usage_errors_exit_2() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "bad.toml", "[qlearn]\ngamma = 2.0\n");
    write(d.path(), "typo.toml", "[scenario]\nrunz = 2\n");
    assert_eq!(
        code(&bin(d.path(), &["simulate", "--config", "bad.toml"])),
        2
    );
    assert_eq!(
        code(&bin(d.path(), &["simulate", "--config", "typo.toml"])),
        2
    );
    assert_eq!(
        code(&bin(d.path(), &["simulate", "--config", "missing.toml"])),
        2
    );
    assert_eq!(code(&bin(d.path(), &["simulate", "--codec", "g723"])), 2);
    assert_eq!(code(&bin(d.path(), &["frobnicate"])), 2);
    write(d.path(), "none.toml", "policies_enabled = []\n");
    assert_eq!(
        code(&bin(
            d.path(),
            &["compare-policies", "--config", "none.toml"]
        )),
        2
    );
}

#[test]
fn compare_then_report() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "r.toml", "[scenario]\nruns = 4\nduration_epochs = 80\n[training]\nwarmup_episodes = 10\nhmm_training_runs = 4\n");
    for (out, seed) in [("a", "1"), ("b", "2")] {
        let o = bin(
            d.path(),
            &[
                "compare-policies",
                "--config",
                "r.toml",
                "--seed",
                seed,
                "--out",
                out,
            ],
        );
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let stdout = String::from_utf8_lossy(&o.stdout);
        assert!(stdout.contains("proposed") && stdout.contains("reduction vs m4"));
        for f in [
            "report.json",
            "timeline.csv",
            "qtable.toml",
            "model_wlan.toml",
            "model_cdma2000.toml",
        ] {
            assert!(d.path().join(out).join(f).exists(), "{out}/{f}");
        }
    }
    let o = bin(
        d.path(),
        &["report", "a/report.json", "b/report.json", "--out", "s"],
    );
    assert_eq!(code(&o), 0);
    let csv = std::fs::read_to_string(d.path().join("s/summary.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.path().join("s/summary.json")).unwrap())
            .unwrap();
    assert_eq!(json.as_array().unwrap().len(), 2);

    assert_eq!(code(&bin(d.path(), &["report", "--out", "empty"])), 0);
    let csv = std::fs::read_to_string(d.path().join("empty/summary.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);

    write(d.path(), "junk.json", "{}");
    assert_eq!(code(&bin(d.path(), &["report", "junk.json"])), 3);
}

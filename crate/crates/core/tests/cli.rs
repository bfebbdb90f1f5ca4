use std::fs;
use std::path::Path;

use mapo::cli::main_with_args;
use mapo::trainer::{RunManifest, METRICS_HEADER};

fn run(args: &[&str]) -> i32 {
    let mut v = vec!["mapo".to_string()];
    v.extend(args.iter().map(|s| s.to_string()));
    main_with_args(v)
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn full_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    let warm = tmp.path().join("warm");
    let run_dir = tmp.path().join("run");

    assert_eq!(run(&["gen-corpus", "--seed", "3", "--tables", "4", "--per-table", "3", "--out", p(&corpus)]), 0);
    for f in ["train.jsonl", "dev.jsonl", "gold.jsonl"] {
        assert!(corpus.join(f).exists(), "{f}");
    }
    // Same seed, same bytes.
    let again = tmp.path().join("again");
    assert_eq!(run(&["gen-corpus", "--seed", "3", "--tables", "4", "--per-table", "3", "--out", p(&again)]), 0);
    assert_eq!(fs::read(corpus.join("train.jsonl")).unwrap(), fs::read(again.join("train.jsonl")).unwrap());
    // Refuses to overwrite without --force.
    assert_eq!(run(&["gen-corpus", "--seed", "3", "--tables", "4", "--out", p(&corpus)]), 2);

    assert_eq!(
        run(&["explore", "--corpus", p(&corpus), "--attempts", "100", "--explored", "exact", "--out", p(&warm)]),
        0
    );
    assert!(warm.join("coverage.json").exists());

    let code = run(&[
        "train",
        "--corpus",
        p(&corpus),
        "--warmstart",
        p(&warm),
        "--out",
        p(&run_dir),
        "--total-steps",
        "10",
        "--batch-examples",
        "3",
        "--eval-period",
        "5",
        "--learning-rate",
        "0.1",
    ]);
    assert_eq!(code, 0);
    let metrics = fs::read_to_string(run_dir.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().next().unwrap(), METRICS_HEADER);
    assert_eq!(metrics.lines().count(), 11);
    let manifest = RunManifest::load(&run_dir.join("manifest.json")).unwrap();
    assert_eq!(manifest.config.total_steps, 10);
    for a in ["metrics.csv", "final.json", "best.json", "memory"] {
        assert!(run_dir.join(a).exists(), "{a}");
    }

    assert_eq!(run(&["eval", "--checkpoint", p(&run_dir.join("best.json")), "--corpus", p(&corpus)]), 0);
    let preds = fs::read_to_string(run_dir.join("predictions.jsonl")).unwrap();
    assert_eq!(preds.lines().count(), 3);

    assert_eq!(run(&["analyze", "--run", p(&run_dir), "--clipping"]), 0);
    assert!(run_dir.join("analysis_clipping.json").exists());
    assert_eq!(run(&["analyze", "--run", p(&run_dir), "--allocation"]), 0);
    let alloc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run_dir.join("analysis_allocation.json")).unwrap()).unwrap();
    let ratio = alloc["k_plus_over_k_minus"].as_f64().unwrap();
    assert!((ratio - 1.0).abs() < 1e-12);
    assert_eq!(run(&["analyze", "--run", p(&run_dir), "--spuriousness"]), 0);
    assert!(run_dir.join("analysis_spuriousness.json").exists());
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run(&["--help"]), 0);
    assert_eq!(run(&["no-such-command"]), 2);
    assert_eq!(
        run(&["eval", "--checkpoint", p(&tmp.path().join("missing.json")), "--corpus", p(tmp.path())]),
        3
    );
    let corpus = tmp.path().join("c");
    assert_eq!(run(&["gen-corpus", "--tables", "2", "--per-table", "2", "--out", p(&corpus)]), 0);
    let out = tmp.path().join("r");
    assert_eq!(run(&["train", "--corpus", p(&corpus), "--out", p(&out), "--alpha", "2"]), 2);
    assert_eq!(run(&["train", "--corpus", p(&corpus), "--out", p(&out), "--buffer-mode", "sample:x"]), 2);
}

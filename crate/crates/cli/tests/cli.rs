mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use common::{primseq, run_pipeline, tiny_config};
use primseq::dataset::load_dataset;
use primseq::eval::{align, tally, Metrics, OutcomeTallies};
use primseq::pipeline::{sensor_centric_recordings, window_targets};
use primseq::preprocess::{ReferencePolicy, WindowMode, WindowSpec};
use primseq_cli::commands::RecordingPredictions;
use serde_json::Value;

fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn missing_config_is_a_usage_error_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let code = primseq(&["eval", "--config", dir.path().join("nope.json").to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(!out.exists());
}

#[test]
fn bad_arguments_exit_2() {
    assert_eq!(primseq(&["frobnicate"]), 2);
    assert_eq!(primseq(&["train"]), 2);
    assert_eq!(primseq(&["train", "--config", "x.json", "--folds", "many"]), 2);
}

#[test]
fn invalid_config_values_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    fs::write(&path, r#"{"data_dir": ".", "out_dir": "o", "window": {"window_s": 6.0, "core_s": 8.0}}"#).unwrap();
    assert_eq!(primseq(&["synth", "--config", path.to_str().unwrap()]), 2);
    fs::write(&path, "{not json").unwrap();
    assert_eq!(primseq(&["synth", "--config", path.to_str().unwrap()]), 2);
}

#[test]
fn commands_out_of_order_fail_at_runtime() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let out = dir.path().join("run");
    let (c, o) = (cfg.to_str().unwrap(), out.to_str().unwrap());
    assert_eq!(primseq(&["synth", "--config", c, "--out", o]), 0);
    assert_eq!(primseq(&["predict", "--config", c, "--out", o]), 1);
    assert_eq!(primseq(&["eval", "--config", c, "--out", o]), 1);
}

#[test]
fn synth_is_byte_identical_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    for (out, seed) in [(&a, "1"), (&b, "1"), (&c, "2")] {
        assert_eq!(primseq(&["synth", "--config", cfg.to_str().unwrap(), "--seed", seed, "--out", out.to_str().unwrap()]), 0);
    }
    let ta = read_tree(&a.join("dataset"));
    assert!(ta.len() > 6);
    assert_eq!(ta, read_tree(&b.join("dataset")));
    assert_ne!(ta, read_tree(&c.join("dataset")));
}

#[test]
fn full_pipeline_outputs_replay_from_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = tiny_config(dir.path());
    let out = dir.path().join("run");
    run_pipeline(&cfg_path, &out, &[]);
    for f in ["report.json", "counts.csv", "metrics.csv", "model.0.bin", "model.1.bin", "predictions.json", "split.json"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    assert!(!out.join("model.2.bin").exists());

    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    for section in ["synth", "train", "predict", "count", "eval", "timing"] {
        assert!(report.get(section).is_some(), "report lacks {section}");
    }
    assert_eq!(report["train"]["members"].as_array().unwrap().len(), 2);

    // recompute the pooled window metrics straight from the files
    let ds = load_dataset(&out.join("dataset")).unwrap();
    let recs = sensor_centric_recordings(&ds, ReferencePolicy::FirstFrame).unwrap();
    let preds: Vec<RecordingPredictions> = serde_json::from_str(&fs::read_to_string(out.join("predictions.json")).unwrap()).unwrap();
    assert_eq!(preds.len(), 2);
    let mut total = OutcomeTallies::default();
    for p in &preds {
        let rec = recs.iter().find(|r| r.id() == p.recording).unwrap();
        let targets = window_targets(rec, &WindowSpec::default(), WindowMode::Test, 5, 16).unwrap();
        assert_eq!(targets.len(), p.model.len());
        for ((_, t), w) in targets.iter().zip(&p.model) {
            total.add(&tally(&align(t, &w.tokens)));
        }
    }
    let m = Metrics::from_tallies(&total);
    let overall = report["eval"]["model"]["window"]["groups"]
        .as_array()
        .unwrap()
        .iter()
        .find(|g| g["group_by"] == "overall")
        .unwrap();
    assert_eq!(overall["metrics"]["tp"].as_u64().unwrap(), m.tp);
    assert_eq!(overall["metrics"]["false_positives"].as_u64().unwrap(), m.false_positives);
    assert_eq!(overall["metrics"]["aer"].as_f64(), m.aer);

    let counts = fs::read_to_string(out.join("counts.csv")).unwrap();
    assert!(counts.starts_with("recording,activity,class,count"));
    assert_eq!(counts.lines().count(), 1 + 2 * 5);
    let metrics = fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert!(metrics.lines().next().unwrap().starts_with("system,level,group_by,key"));
    assert!(metrics.contains("baseline,session,overall,overall"));

    // bench and stream on the same run
    let (c, o) = (cfg_path.to_str().unwrap(), out.to_str().unwrap());
    assert_eq!(primseq(&["bench", "--config", c, "--out", o]), 0);
    let bench: Value = serde_json::from_str(&fs::read_to_string(out.join("bench.json")).unwrap()).unwrap();
    assert_eq!(bench["n_recordings"], 2);
    assert!(bench["seconds_per_minute"].as_f64().unwrap() > 0.0);
    assert_eq!(primseq(&["stream", "--config", c, "--out", o, "--speed", "inf"]), 0);
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert!(report.get("eval").is_some(), "streaming at another speed must keep earlier sections");
    for r in report["stream"]["recordings"].as_array().unwrap() {
        assert_eq!(r["matches_batch"], true);
    }
    let events = fs::read_to_string(out.join("stream_events.jsonl")).unwrap();
    let mut last = BTreeMap::new();
    for line in events.lines() {
        let e: Value = serde_json::from_str(line).unwrap();
        let t = e["emitted_s"].as_f64().unwrap();
        let prev = last.insert(e["recording"].as_str().unwrap().to_string(), t);
        assert!(prev.is_none_or(|p| p <= t), "timestamps must not go backwards");
    }
    assert_eq!(events.lines().count(), preds.iter().map(|p| p.model.len()).sum::<usize>());
}

#[test]
fn runs_are_reproducible_and_hash_follows_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_pipeline(&cfg, &a, &[]);
    run_pipeline(&cfg, &b, &["--seed", "3"]);
    let strip = |p: &Path| primseq_cli::report::without_timing(&fs::read_to_string(p.join("report.json")).unwrap()).unwrap();
    assert_eq!(strip(&a), strip(&b));
    for f in ["model.0.bin", "model.1.bin", "counts.csv", "metrics.csv", "predictions.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    let c = dir.path().join("c");
    assert_eq!(primseq(&["synth", "--config", cfg.to_str().unwrap(), "--out", c.to_str().unwrap(), "--seed", "4"]), 0);
    let hash = |p: &Path| {
        let v: Value = serde_json::from_str(&fs::read_to_string(p.join("report.json")).unwrap()).unwrap();
        v["config_hash"].as_str().unwrap().to_string()
    };
    assert_ne!(hash(&a), hash(&c));
}

#[test]
fn bench_on_empty_selection_reports_zero() {
    use primseq_cli::commands::bench_recordings;
    use primseq::model::{EnsembleMember, EnsembleModel, ModelConfig, ModelParams};
    use primseq::preprocess::NormalizationStats;
    let cfg = ModelConfig { input_dim: 3, hidden_dim: 4, ..Default::default() };
    let member = EnsembleMember::new(ModelParams::init(&cfg, 0).unwrap(), NormalizationStats::identity(3)).unwrap();
    let ens = EnsembleModel::new(vec![member]).unwrap();
    let rep = bench_recordings(&ens, &[], &primseq_cli::RunConfig::default()).unwrap();
    assert_eq!(rep.n_windows, 0);
    assert_eq!(rep.recording_minutes, 0.0);
    assert_eq!(rep.seconds_per_minute, 0.0);
}

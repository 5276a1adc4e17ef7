#![allow(dead_code)]

use std::path::{Path, PathBuf};

use primseq::dataset::ChannelManifest;
use primseq_cli::RunConfig;

/// A run small enough to finish in seconds: 6 subjects of 20 s each on a
/// 7-channel layout, a hidden-8 model and two ensemble members.
pub fn tiny_config(dir: &Path) -> PathBuf {
    let manifest = ChannelManifest::compact(1, 3).unwrap();
    manifest.save(&dir.join("manifest.json")).unwrap();
    let mut cfg = RunConfig {
        out_dir: "run".into(),
        manifest: Some("manifest.json".into()),
        n_folds: 2,
        test_subjects: 2,
        seed: 3,
        ..Default::default()
    };
    cfg.synth.n_subjects = 6;
    cfg.synth.trials_per_subject = 1;
    cfg.synth.duration_s = 20.0;
    cfg.synth.noise_std = 0.1;
    cfg.model.input_dim = manifest.channel_count();
    cfg.model.hidden_dim = 8;
    cfg.model.embed_dim = 4;
    cfg.train.max_epochs = 3;
    cfg.train.batch_size = 16;
    cfg.train.learning_rate = 1e-2;
    cfg.baseline.pointwise.epochs = 3;
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

pub fn primseq(args: &[&str]) -> i32 {
    let mut full = vec!["primseq"];
    full.extend_from_slice(args);
    primseq_cli::run(full)
}

pub fn run_pipeline(config: &Path, out: &Path, extra: &[&str]) {
    let config = config.to_str().unwrap();
    let out = out.to_str().unwrap();
    for cmd in ["synth", "train", "predict", "count", "eval"] {
        let mut args = vec![cmd, "--config", config, "--out", out];
        args.extend_from_slice(extra);
        assert_eq!(primseq(&args), 0, "{cmd} failed");
    }
}

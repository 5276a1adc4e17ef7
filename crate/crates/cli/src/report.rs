//! `report.json`: one section per command plus a separate `timing` object,
//! so everything outside `timing` is reproducible from config, seed and
//! data.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::CliError;

pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Clone, Default)]
pub struct StageTimer {
    stages: BTreeMap<String, f64>,
}

impl StageTimer {
    pub fn time<R>(&mut self, stage: &str, f: impl FnOnce() -> R) -> R {
        let t = std::time::Instant::now();
        let out = f();
        *self.stages.entry(stage.to_string()).or_default() += t.elapsed().as_secs_f64();
        out
    }

    pub fn add(&mut self, stage: &str, seconds: f64) {
        *self.stages.entry(stage.to_string()).or_default() += seconds;
    }

    pub fn total(&self) -> f64 {
        self.stages.values().sum()
    }

    fn to_value(&self) -> Value {
        let mut m: Map<String, Value> = self.stages.iter().map(|(k, v)| (format!("{k}_s"), Value::from(*v))).collect();
        m.insert("total_s".into(), Value::from(self.total()));
        Value::Object(m)
    }
}

/// Merges `section` under `name` into `<out>/report.json`. An existing
/// report written under a different config hash is replaced.
pub fn update_report<S: Serialize>(
    out: &Path,
    config_hash: &str,
    name: &str,
    section: &S,
    timing: Option<Value>,
    timer: &StageTimer,
) -> Result<(), CliError> {
    let path = out.join(REPORT_FILE);
    let mut root: Map<String, Value> = std::fs::read_to_string(&path)
        .ok()
        .and_then(|t| serde_json::from_str::<Map<String, Value>>(&t).ok())
        .filter(|m| m.get("config_hash").and_then(Value::as_str) == Some(config_hash))
        .unwrap_or_default();
    root.insert("config_hash".into(), Value::from(config_hash));
    root.insert("version".into(), Value::from(env!("CARGO_PKG_VERSION")));
    root.insert(name.into(), serde_json::to_value(section)?);
    let mut stage = match timer.to_value() {
        Value::Object(m) => m,
        _ => Map::new(),
    };
    if let Some(Value::Object(extra)) = timing {
        stage.extend(extra);
    }
    let timing_root = root.entry("timing").or_insert_with(|| Value::Object(Map::new()));
    if let Value::Object(t) = timing_root {
        t.insert(name.into(), Value::Object(stage));
    }
    let mut text = serde_json::to_string_pretty(&Value::Object(root))?;
    text.push('\n');
    std::fs::write(&path, text)?;
    Ok(())
}

/// The report with its `timing` object removed, for reproducibility checks.
pub fn without_timing(report: &str) -> Result<String, CliError> {
    let mut v: Map<String, Value> = serde_json::from_str(report)?;
    v.remove("timing");
    Ok(serde_json::to_string_pretty(&Value::Object(v))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_merge_and_timing_separates() {
        let dir = tempfile::tempdir().unwrap();
        let mut timer = StageTimer::default();
        timer.add("load", 0.5);
        update_report(dir.path(), "abc", "train", &serde_json::json!({"a": 1}), None, &timer).unwrap();
        update_report(dir.path(), "abc", "eval", &serde_json::json!({"b": 2}), None, &timer).unwrap();
        let text = std::fs::read_to_string(dir.path().join(REPORT_FILE)).unwrap();
        let v: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["train"]["a"], 1);
        assert_eq!(v["eval"]["b"], 2);
        assert_eq!(v["timing"]["train"]["load_s"], 0.5);
        let stripped = without_timing(&text).unwrap();
        assert!(!stripped.contains("timing"));

        update_report(dir.path(), "other", "eval", &serde_json::json!({"b": 3}), None, &timer).unwrap();
        let v: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join(REPORT_FILE)).unwrap()).unwrap();
        assert!(v.get("train").is_none());
        assert_eq!(v["eval"]["b"], 3);
    }
}

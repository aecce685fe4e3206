//! Evaluation results and training logs.

use std::path::{Path, PathBuf};

use nastar_core::metrics::{BootstrapSummary, Evaluation};
use nastar_core::train::EpochLog;
use serde_json::{json, Map, Value};

use crate::error::Result;
use crate::formats::write_atomic;

pub const CHAMFER_NOTE: &str = "symmetric: mean of the two directed mean nearest-neighbour distances";

fn summary(s: &BootstrapSummary) -> Value {
    json!({ "mean": s.mean, "lo95": s.lo95, "hi95": s.hi95 })
}

/// `{"opt": {"mean", "lo95", "hi95"}, ...}` plus a `meta` object.
pub fn results_json(eval: &Evaluation, planner: &str, split: &str) -> Value {
    let mut out = Map::new();
    out.insert("opt".into(), summary(&eval.opt));
    out.insert("exp".into(), summary(&eval.exp));
    out.insert("hmean".into(), summary(&eval.hmean));
    if let Some(p) = &eval.path_ratio {
        out.insert("path_ratio".into(), summary(p));
    }
    if let Some(c) = &eval.chamfer {
        out.insert("chamfer".into(), summary(c));
    }
    out.insert(
        "meta".into(),
        json!({
            "planner": planner,
            "split": split,
            "instances": eval.instances.len(),
            "maps": eval.maps.len(),
            "success_pct": eval.success,
            "resamples": eval.opt.resamples,
            "seed": eval.opt.seed,
            "chamfer": CHAMFER_NOTE,
        }),
    );
    Value::Object(out)
}

pub fn maps_csv(eval: &Evaluation) -> String {
    let mut s = String::from("map_id,opt,exp,hmean\n");
    for m in &eval.maps {
        s.push_str(&format!("{},{},{},{}\n", m.map_id, m.opt, m.exp, m.hmean));
    }
    s
}

/// Writes `PREFIX.results.json` and `PREFIX.maps.csv`.
pub fn write_results(prefix: &Path, eval: &Evaluation, planner: &str, split: &str) -> Result<(PathBuf, PathBuf)> {
    let json_path = with_suffix(prefix, ".results.json");
    let csv_path = with_suffix(prefix, ".maps.csv");
    let json = serde_json::to_string_pretty(&results_json(eval, planner, split)).expect("serializable");
    write_atomic(&json_path, json.as_bytes())?;
    write_atomic(&csv_path, maps_csv(eval).as_bytes())?;
    Ok((json_path, csv_path))
}

pub fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Human-readable bootstrap table.
pub fn table(eval: &Evaluation) -> String {
    let mut rows = vec![("Opt", eval.opt), ("Exp", eval.exp), ("Hmean", eval.hmean)];
    if let Some(p) = eval.path_ratio {
        rows.push(("PathRatio", p));
    }
    if let Some(c) = eval.chamfer {
        rows.push(("Chamfer", c));
    }
    let mut s = format!("{:<10} {:>8} {:>8} {:>8}\n", "metric", "mean", "lo95", "hi95");
    for (name, b) in rows {
        s.push_str(&format!("{:<10} {:>8.2} {:>8.2} {:>8.2}\n", name, b.mean, b.lo95, b.hi95));
    }
    s.push_str(&format!("{:<10} {:>8.2}\n", "Success", eval.success));
    s
}

pub const LOG_HEADER: &str = "epoch,mean_loss,val_opt,val_exp,val_hmean";

pub fn log_row(e: &EpochLog) -> String {
    format!("{},{},{},{},{}", e.epoch, e.mean_loss, e.val_opt, e.val_exp, e.val_hmean)
}

pub fn training_log_csv(log: &[EpochLog]) -> String {
    let mut s = format!("{LOG_HEADER}\n");
    for e in log {
        s.push_str(&log_row(e));
        s.push('\n');
    }
    s
}

/// Parses a log written by [`training_log_csv`].
pub fn parse_training_log(text: &str) -> Option<Vec<EpochLog>> {
    let mut lines = text.lines();
    if lines.next()? != LOG_HEADER {
        return None;
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 5 {
                return None;
            }
            Some(EpochLog {
                epoch: f[0].parse().ok()?,
                mean_loss: f[1].parse().ok()?,
                val_opt: f[2].parse().ok()?,
                val_exp: f[3].parse().ok()?,
                val_hmean: f[4].parse().ok()?,
            })
        })
        .collect()
}

//! Deterministic result files: fixed-precision CSVs and sorted-key JSON so
//! identical runs produce byte-identical outputs.

use crate::rl::train::EpisodeLog;
use crate::sim::episode::MetricsSeries;
use crate::sim::experiment::{Report, SweepRow};
use crate::sim::SimError;
use std::fmt::Write as _;
use std::path::Path;

fn write_file(path: &Path, contents: &str) -> Result<(), SimError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| SimError::Io(parent.display().to_string(), e))?;
    }
    std::fs::write(path, contents).map_err(|e| SimError::Io(path.display().to_string(), e))
}

/// Per-slot metrics of one seed: `slot,mean_q,max_q,arrivals,offloaded`.
pub fn seed_csv(m: &MetricsSeries) -> String {
    let mut out = String::from("slot,mean_q,max_q,arrivals,offloaded\n");
    for t in 0..m.mean_q.len() {
        let _ = writeln!(
            out,
            "{},{:.6},{},{},{}",
            t, m.mean_q[t], m.max_q[t], m.arrivals[t], m.offloaded[t]
        );
    }
    out
}

/// Empirical CDF of all per-satellite queue samples: `queue_len,cdf`.
pub fn ecdf_csv(samples: &[u64]) -> String {
    let mut sorted = samples.to_vec();
    sorted.sort_unstable();
    let mut out = String::from("queue_len,cdf\n");
    let n = sorted.len();
    let mut i = 0;
    while i < n {
        let v = sorted[i];
        let mut j = i;
        while j < n && sorted[j] == v {
            j += 1;
        }
        let _ = writeln!(out, "{},{:.6}", v, j as f64 / n as f64);
        i = j;
    }
    out
}

pub fn compare_csv(reports: &[Report]) -> String {
    let mut out = String::from(
        "policy,time_avg_mean_q,time_avg_mean_q_std,time_avg_max_q,final_mean_q,delivery_ratio\n",
    );
    for r in reports {
        let (mq, mq_std) = r.time_avg_mean_q();
        let _ = writeln!(
            out,
            "{},{:.6},{:.6},{:.6},{:.6},{:.6}",
            r.policy,
            mq,
            mq_std,
            r.time_avg_max_q().0,
            r.final_mean_q().0,
            r.delivery_ratio().0
        );
    }
    out
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(
        "axis,value,time_avg_mean_q,time_avg_mean_q_std,time_avg_max_q,delivery_ratio\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{:.6},{:.6},{:.6},{:.6}",
            r.axis, r.value, r.time_avg_mean_q, r.time_avg_mean_q_std, r.time_avg_max_q,
            r.delivery_ratio
        );
    }
    out
}

pub fn training_log_csv(logs: &[EpisodeLog]) -> String {
    let mut out =
        String::from("episode,cumulative_reward,epsilon,mean_loss,gradient_steps,final_mean_q\n");
    for l in logs {
        let _ = writeln!(
            out,
            "{},{:.6},{:.6},{:.6},{},{:.6}",
            l.episode, l.cumulative_reward, l.epsilon, l.mean_loss, l.gradient_steps,
            l.final_mean_q
        );
    }
    out
}

fn canonical_json(value: &serde_json::Value) -> String {
    // serde_json::json! maps preserve insertion order; re-sort recursively
    fn sort(v: &serde_json::Value) -> serde_json::Value {
        match v {
            serde_json::Value::Object(map) => {
                let mut sorted: Vec<(&String, &serde_json::Value)> = map.iter().collect();
                sorted.sort_by(|a, b| a.0.cmp(b.0));
                serde_json::Value::Object(
                    sorted.into_iter().map(|(k, val)| (k.clone(), sort(val))).collect(),
                )
            }
            serde_json::Value::Array(items) => {
                serde_json::Value::Array(items.iter().map(sort).collect())
            }
            other => other.clone(),
        }
    }
    let mut text = serde_json::to_string_pretty(&sort(value)).expect("json serializes");
    text.push('\n');
    text
}

/// Write everything a single-policy run produces under `dir`.
pub fn emit_run(dir: &Path, config_snapshot: &str, report: &Report) -> Result<(), SimError> {
    write_file(&dir.join("config_snapshot.toml"), config_snapshot)?;
    for r in &report.results {
        write_file(&dir.join(format!("seed_{}.csv", r.seed)), &seed_csv(&r.metrics))?;
    }
    let all_samples: Vec<u64> = report
        .results
        .iter()
        .flat_map(|r| r.metrics.queue_samples.iter().copied())
        .collect();
    write_file(&dir.join("ecdf.csv"), &ecdf_csv(&all_samples))?;
    write_file(&dir.join("aggregate.json"), &canonical_json(&report.summary_json()))?;
    Ok(())
}

/// Write a policy-comparison table plus each policy's run outputs.
pub fn emit_compare(
    dir: &Path,
    config_snapshot: &str,
    reports: &[Report],
) -> Result<(), SimError> {
    write_file(&dir.join("config_snapshot.toml"), config_snapshot)?;
    write_file(&dir.join("compare.csv"), &compare_csv(reports))?;
    let summaries: Vec<serde_json::Value> = reports.iter().map(|r| r.summary_json()).collect();
    write_file(
        &dir.join("compare.json"),
        &canonical_json(&serde_json::json!({ "policies": summaries })),
    )?;
    for r in reports {
        for s in &r.results {
            write_file(
                &dir.join(format!("{}_seed_{}.csv", r.policy, s.seed)),
                &seed_csv(&s.metrics),
            )?;
        }
    }
    Ok(())
}

pub fn emit_sweep(dir: &Path, config_snapshot: &str, rows: &[SweepRow]) -> Result<(), SimError> {
    write_file(&dir.join("config_snapshot.toml"), config_snapshot)?;
    write_file(&dir.join("sweep.csv"), &sweep_csv(rows))?;
    Ok(())
}

pub fn emit_training(
    dir: &Path,
    config_snapshot: &str,
    checkpoint: &str,
    checkpoint_name: &str,
    logs: &[EpisodeLog],
) -> Result<(), SimError> {
    write_file(&dir.join("config_snapshot.toml"), config_snapshot)?;
    write_file(&dir.join(checkpoint_name), checkpoint)?;
    write_file(&dir.join("training_log.csv"), &training_log_csv(logs))?;
    Ok(())
}

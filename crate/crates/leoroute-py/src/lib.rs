//! Python bindings: orbit parsing, channel sampling, episode simulation,
//! multi-seed policy evaluation, and agent training.
//!
//! Build with `cargo build --release -p leoroute-py`; the resulting cdylib
//! imports as the `_leoroute` module (see `python/smoke_test.py`).

use leoroute_core::channel::{sample_fading, ShadowedRicianParams};
use leoroute_core::orbits::parse_tle;
use leoroute_core::policies::PolicyKind;
use leoroute_core::rl::train::{train, TrainConfig};
use leoroute_core::sim::config::RunConfig;
use leoroute_core::sim::episode::{run_episode, Scenario};
use leoroute_core::sim::experiment::{run_experiment, PolicySpec};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::Path;

fn to_py_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Parse a two-line element set text into a list of element dictionaries.
#[pyfunction]
fn parse_tle_text<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyList>> {
    let records = parse_tle(text).map_err(to_py_err)?;
    let out = PyList::empty(py);
    for r in records {
        let d = PyDict::new(py);
        d.set_item("satellite_id", r.satellite_id)?;
        if let Some(name) = &r.name {
            d.set_item("name", name)?;
        }
        d.set_item("epoch_unix", r.epoch_unix)?;
        d.set_item("inclination_rad", r.inclination)?;
        d.set_item("raan_rad", r.raan)?;
        d.set_item("eccentricity", r.eccentricity)?;
        d.set_item("arg_perigee_rad", r.arg_perigee)?;
        d.set_item("mean_anomaly_rad", r.mean_anomaly)?;
        d.set_item("mean_motion_rev_day", r.mean_motion)?;
        out.append(d)?;
    }
    Ok(out)
}

/// Draw `n` shadowed-Rician fading power gains with a seeded generator.
#[pyfunction]
fn fading_samples(b0: f64, m: f64, omega: f64, n: usize, seed: u64) -> Vec<f64> {
    let p = ShadowedRicianParams { b0, m, omega };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| sample_fading(&p, &mut rng)).collect()
}

fn spec_for(
    cfg: &RunConfig,
    policy: &str,
    checkpoint: Option<String>,
) -> PyResult<PolicySpec> {
    let mut spec = PolicySpec::from_config(cfg, checkpoint).map_err(to_py_err)?;
    spec.kind = PolicyKind::parse(policy).map_err(to_py_err)?;
    Ok(spec)
}

/// Simulate one seeded episode of a policy; returns per-slot and aggregate
/// metrics.
#[pyfunction]
#[pyo3(signature = (config_path, policy, seed, checkpoint=None))]
fn episode<'py>(
    py: Python<'py>,
    config_path: &str,
    policy: &str,
    seed: u64,
    checkpoint: Option<String>,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = RunConfig::load(Path::new(config_path)).map_err(to_py_err)?;
    let scn = Scenario::from_config(&cfg).map_err(to_py_err)?;
    let spec = spec_for(&cfg, policy, checkpoint)?;
    let mut pol = spec.build(&scn).map_err(to_py_err)?;
    let m = run_episode(&scn, seed, pol.as_mut()).map_err(to_py_err)?;
    let d = PyDict::new(py);
    d.set_item("mean_q", &m.mean_q)?;
    d.set_item("max_q", &m.max_q)?;
    d.set_item("arrivals", &m.arrivals)?;
    d.set_item("offloaded", &m.offloaded)?;
    d.set_item("total_arrivals", m.total_arrivals())?;
    d.set_item("total_offloaded", m.total_offloaded())?;
    d.set_item("final_total_q", m.final_total_q)?;
    d.set_item("time_avg_mean_q", m.time_avg_mean_q())?;
    d.set_item("delivery_ratio", m.delivery_ratio())?;
    Ok(d)
}

/// Evaluate a policy over the configured seed list; returns aggregate
/// statistics.
#[pyfunction]
#[pyo3(signature = (config_path, policy, checkpoint=None))]
fn evaluate<'py>(
    py: Python<'py>,
    config_path: &str,
    policy: &str,
    checkpoint: Option<String>,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = RunConfig::load(Path::new(config_path)).map_err(to_py_err)?;
    let scn = Scenario::from_config(&cfg).map_err(to_py_err)?;
    let spec = spec_for(&cfg, policy, checkpoint)?;
    let report = run_experiment(&scn, &cfg.run.seeds, &spec).map_err(to_py_err)?;
    let (mq, mq_std) = report.time_avg_mean_q();
    let (xq, xq_std) = report.time_avg_max_q();
    let (dr, dr_std) = report.delivery_ratio();
    let d = PyDict::new(py);
    d.set_item("policy", &report.policy)?;
    d.set_item("seeds", &cfg.run.seeds)?;
    d.set_item("time_avg_mean_q", mq)?;
    d.set_item("time_avg_mean_q_std", mq_std)?;
    d.set_item("time_avg_max_q", xq)?;
    d.set_item("time_avg_max_q_std", xq_std)?;
    d.set_item("delivery_ratio", dr)?;
    d.set_item("delivery_ratio_std", dr_std)?;
    Ok(d)
}

/// Train the residual agent; returns the checkpoint text and per-episode
/// cumulative rewards. `episodes` overrides the configured episode count.
#[pyfunction]
#[pyo3(signature = (config_path, episodes=None))]
fn train_agent<'py>(
    py: Python<'py>,
    config_path: &str,
    episodes: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = RunConfig::load(Path::new(config_path)).map_err(to_py_err)?;
    let scn = Scenario::from_config(&cfg).map_err(to_py_err)?;
    let mut tc = TrainConfig::from_sections(&cfg.rl, &cfg.policy, cfg.run.seeds[0]);
    if let Some(e) = episodes {
        tc.episodes = e;
    }
    let (net, logs) = train(&scn, &tc).map_err(to_py_err)?;
    let rewards: Vec<f64> = logs.iter().map(|l| l.cumulative_reward).collect();
    let d = PyDict::new(py);
    d.set_item("checkpoint", net.to_checkpoint())?;
    d.set_item("episode_rewards", rewards)?;
    Ok(d)
}

#[pymodule]
fn _leoroute(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(parse_tle_text, m)?)?;
    m.add_function(wrap_pyfunction!(fading_samples, m)?)?;
    m.add_function(wrap_pyfunction!(episode, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(train_agent, m)?)?;
    Ok(())
}

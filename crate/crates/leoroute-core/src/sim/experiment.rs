//! Multi-seed experiments: build policies by name, run them over a shared
//! set of seeds (the environment realization per seed is identical across
//! policies), aggregate, and sweep scenario axes.

use crate::policies::{
    BpPolicy, EqualizePolicy, LgBpPolicy, MaxWeightPolicy, NoIslPolicy, Policy, PolicyKind,
    RandomPolicy,
};
use crate::rl::nn::Mlp;
use crate::rl::train::ResidualPolicy;
use crate::sim::config::RunConfig;
use crate::sim::episode::{run_episode, MetricsSeries, Scenario};
use crate::sim::SimError;

/// Everything needed to instantiate a policy per seed.
#[derive(Debug, Clone)]
pub struct PolicySpec {
    pub kind: PolicyKind,
    pub lambda: f64,
    pub p_activate: f64,
    /// Serialized network checkpoint, required for the residual agent.
    pub checkpoint: Option<String>,
}

impl PolicySpec {
    pub fn from_config(cfg: &RunConfig, checkpoint: Option<String>) -> Result<Self, SimError> {
        Ok(Self {
            kind: PolicyKind::parse(&cfg.policy.name)
                .map_err(|e| SimError::Scenario(e.to_string()))?,
            lambda: cfg.policy.lg_bp_weight,
            p_activate: cfg.policy.p_activate,
            checkpoint,
        })
    }

    pub fn with_kind(&self, kind: PolicyKind) -> Self {
        Self { kind, ..self.clone() }
    }

    pub fn build(&self, scn: &Scenario) -> Result<Box<dyn Policy>, SimError> {
        Ok(match self.kind {
            PolicyKind::Bp => Box::new(BpPolicy),
            PolicyKind::LgBp => Box::new(LgBpPolicy { lambda: self.lambda }),
            PolicyKind::MaxWeight => Box::new(MaxWeightPolicy),
            PolicyKind::Equalize => Box::new(EqualizePolicy),
            PolicyKind::NoIsl => Box::new(NoIslPolicy),
            PolicyKind::Random => Box::new(RandomPolicy { p_activate: self.p_activate }),
            PolicyKind::RlResidual => {
                let text = self.checkpoint.as_ref().ok_or_else(|| {
                    SimError::Scenario(
                        "policy `rl-residual` needs a trained checkpoint; run `train` first"
                            .to_string(),
                    )
                })?;
                let net = Mlp::from_checkpoint(text)?;
                Box::new(ResidualPolicy::new(net, self.lambda, scn)?)
            }
        })
    }
}

#[derive(Debug, Clone)]
pub struct SeedResult {
    pub seed: u64,
    pub metrics: MetricsSeries,
}

/// Results of one policy over all seeds.
#[derive(Debug, Clone)]
pub struct Report {
    pub policy: String,
    pub results: Vec<SeedResult>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / values.len() as f64;
    (mean, var.sqrt())
}

impl Report {
    pub fn time_avg_mean_q(&self) -> (f64, f64) {
        let v: Vec<f64> = self.results.iter().map(|r| r.metrics.time_avg_mean_q()).collect();
        mean_std(&v)
    }

    pub fn time_avg_max_q(&self) -> (f64, f64) {
        let v: Vec<f64> = self.results.iter().map(|r| r.metrics.time_avg_max_q()).collect();
        mean_std(&v)
    }

    pub fn final_mean_q(&self) -> (f64, f64) {
        let v: Vec<f64> = self.results.iter().map(|r| r.metrics.final_mean_q()).collect();
        mean_std(&v)
    }

    pub fn delivery_ratio(&self) -> (f64, f64) {
        let v: Vec<f64> = self.results.iter().map(|r| r.metrics.delivery_ratio()).collect();
        mean_std(&v)
    }

    /// Mean over seeds of per-slot mean queue; the per-slot curve plotted in
    /// comparisons.
    pub fn mean_q_curve(&self) -> Vec<f64> {
        let Some(first) = self.results.first() else { return Vec::new() };
        let slots = first.metrics.mean_q.len();
        (0..slots)
            .map(|t| {
                self.results.iter().map(|r| r.metrics.mean_q[t]).sum::<f64>()
                    / self.results.len() as f64
            })
            .collect()
    }

    pub fn summary_json(&self) -> serde_json::Value {
        let (mq, mq_std) = self.time_avg_mean_q();
        let (xq, xq_std) = self.time_avg_max_q();
        let (fq, fq_std) = self.final_mean_q();
        let (dr, dr_std) = self.delivery_ratio();
        serde_json::json!({
            "policy": self.policy,
            "seeds": self.results.iter().map(|r| r.seed).collect::<Vec<_>>(),
            "time_avg_mean_queue": {"mean": mq, "std": mq_std},
            "time_avg_max_queue": {"mean": xq, "std": xq_std},
            "final_mean_queue": {"mean": fq, "std": fq_std},
            "delivery_ratio": {"mean": dr, "std": dr_std},
            "total_arrivals": self.results.iter().map(|r| r.metrics.total_arrivals()).collect::<Vec<_>>(),
            "total_offloaded": self.results.iter().map(|r| r.metrics.total_offloaded()).collect::<Vec<_>>(),
        })
    }
}

/// Run one policy over every seed; a fresh policy instance per seed.
pub fn run_experiment(
    scn: &Scenario,
    seeds: &[u64],
    spec: &PolicySpec,
) -> Result<Report, SimError> {
    let mut results = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let mut policy = spec.build(scn)?;
        let metrics = run_episode(scn, seed, policy.as_mut())?;
        results.push(SeedResult { seed, metrics });
    }
    Ok(Report { policy: spec.kind.name().to_string(), results })
}

/// Run several policies against the identical per-seed environments.
pub fn run_compare(
    scn: &Scenario,
    seeds: &[u64],
    base: &PolicySpec,
    kinds: &[PolicyKind],
) -> Result<Vec<Report>, SimError> {
    kinds
        .iter()
        .map(|&k| run_experiment(scn, seeds, &base.with_kind(k)))
        .collect()
}

/// A sweep varies one scenario axis and reruns the configured policy.
#[derive(Debug, Clone)]
pub enum SweepAxis {
    /// Neighbor budget M.
    MaxNeighbors(Vec<usize>),
    /// Constellation size K (prefix of the TLE file).
    NumSatellites(Vec<usize>),
    /// Gateway placement preset.
    GatewayPreset(Vec<String>),
    /// Constellation file path.
    Constellation(Vec<String>),
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            Self::MaxNeighbors(_) => "max_neighbors",
            Self::NumSatellites(_) => "num_satellites",
            Self::GatewayPreset(_) => "gateway_preset",
            Self::Constellation(_) => "constellation",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub axis: String,
    pub value: String,
    pub time_avg_mean_q: f64,
    pub time_avg_mean_q_std: f64,
    pub time_avg_max_q: f64,
    pub delivery_ratio: f64,
}

/// Rerun the configured policy at every sweep point. The scenario is rebuilt
/// per point because orbits and topology depend on the axis.
pub fn run_sweep(
    cfg: &RunConfig,
    axis: &SweepAxis,
    checkpoint: Option<String>,
) -> Result<Vec<SweepRow>, SimError> {
    let points: Vec<(String, RunConfig)> = match axis {
        SweepAxis::MaxNeighbors(ms) => ms
            .iter()
            .map(|&m| {
                let mut c = cfg.clone();
                c.neighbors.max_neighbors = m;
                (m.to_string(), c)
            })
            .collect(),
        SweepAxis::NumSatellites(ks) => ks
            .iter()
            .map(|&k| {
                let mut c = cfg.clone();
                c.constellation.num_satellites = k;
                (k.to_string(), c)
            })
            .collect(),
        SweepAxis::GatewayPreset(ps) => ps
            .iter()
            .map(|p| {
                let mut c = cfg.clone();
                c.gateways.preset = p.clone();
                (p.clone(), c)
            })
            .collect(),
        SweepAxis::Constellation(files) => files
            .iter()
            .map(|f| {
                let mut c = cfg.clone();
                c.constellation.tle_file = f.clone();
                (f.clone(), c)
            })
            .collect(),
    };

    let mut rows = Vec::with_capacity(points.len());
    for (value, point_cfg) in points {
        let scn = Scenario::from_config(&point_cfg)?;
        let spec = PolicySpec::from_config(&point_cfg, checkpoint.clone())?;
        let report = run_experiment(&scn, &point_cfg.run.seeds, &spec)?;
        let (mq, mq_std) = report.time_avg_mean_q();
        rows.push(SweepRow {
            axis: axis.name().to_string(),
            value,
            time_avg_mean_q: mq,
            time_avg_mean_q_std: mq_std,
            time_avg_max_q: report.time_avg_max_q().0,
            delivery_ratio: report.delivery_ratio().0,
        });
    }
    Ok(rows)
}

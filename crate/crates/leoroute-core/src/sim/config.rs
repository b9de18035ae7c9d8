//! Run configuration: a TOML file with sections mirroring the pipeline
//! stages. File paths are resolved relative to the config file location.

use crate::channel::{ElevationFadingTable, IslChannelParams, LgChannelParams, ShadowedRicianParams};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config `{path}`: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimeSection {
    pub t0: String,
    pub slot_seconds: f64,
    pub num_slots: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstellationSection {
    pub tle_file: String,
    /// Number of satellites K; the first K records of the file are used.
    pub num_satellites: usize,
    #[serde(default)]
    pub j2_secular: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NeighborSection {
    pub max_neighbors: usize,
    pub max_range_km: f64,
    pub max_plane_angle_deg: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FootprintSection {
    pub min_elevation_deg: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FadingBand {
    pub min_elevation_deg: f64,
    pub b0: f64,
    pub m: f64,
    pub omega: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelSection {
    pub lg: LgChannelParams,
    pub isl: IslChannelParams,
    #[serde(default)]
    pub fading_bands: Vec<FadingBand>,
}

impl ChannelSection {
    pub fn fading_table(&self) -> ElevationFadingTable {
        if self.fading_bands.is_empty() {
            return ElevationFadingTable::default();
        }
        let mut bands: Vec<(f64, ShadowedRicianParams)> = self
            .fading_bands
            .iter()
            .map(|b| {
                (
                    b.min_elevation_deg,
                    ShadowedRicianParams { b0: b.b0, m: b.m, omega: b.omega },
                )
            })
            .collect();
        bands.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        ElevationFadingTable { bands }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrafficSection {
    pub grid_file: String,
    /// Scalar converting grid intensity to packets per slot per cell.
    pub calibration: f64,
    pub amplitude: f64,
    pub baseline: f64,
    pub peak_phase_hours: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GatewaySection {
    pub file: String,
    /// One of `asia`, `europe`, `north-america`, `hybrid`.
    #[serde(default = "default_preset")]
    pub preset: String,
}

fn default_preset() -> String {
    "hybrid".to_string()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicySection {
    pub name: String,
    #[serde(default = "default_lambda")]
    pub lg_bp_weight: f64,
    #[serde(default = "default_p_activate")]
    pub p_activate: f64,
}

fn default_lambda() -> f64 {
    1.0
}
fn default_p_activate() -> f64 {
    0.5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RlSection {
    #[serde(default = "d_episodes")]
    pub episodes: usize,
    #[serde(default = "d_lr")]
    pub learning_rate: f64,
    #[serde(default = "d_batch")]
    pub batch_size: usize,
    #[serde(default = "d_buffer")]
    pub buffer_capacity: usize,
    #[serde(default = "d_discount")]
    pub discount: f64,
    #[serde(default = "d_eps_start")]
    pub epsilon_start: f64,
    #[serde(default = "d_eps_end")]
    pub epsilon_end: f64,
    /// Fraction of total training steps over which epsilon anneals.
    #[serde(default = "d_anneal")]
    pub epsilon_anneal_fraction: f64,
    #[serde(default = "d_sync")]
    pub target_sync_steps: u64,
    /// Slots both counterfactual branches are rolled forward before the
    /// reward comparison.
    #[serde(default = "d_horizon")]
    pub rollout_horizon: usize,
    #[serde(default = "d_alpha")]
    pub reward_mean_weight: f64,
    #[serde(default = "d_beta")]
    pub reward_max_weight: f64,
    #[serde(default = "d_hidden")]
    pub hidden: Vec<usize>,
    #[serde(default = "d_train_every")]
    pub train_every: usize,
    #[serde(default = "d_checkpoint")]
    pub checkpoint: String,
}

fn d_episodes() -> usize {
    100
}
fn d_lr() -> f64 {
    1e-4
}
fn d_batch() -> usize {
    256
}
fn d_buffer() -> usize {
    100_000
}
fn d_discount() -> f64 {
    0.99
}
fn d_eps_start() -> f64 {
    1.0
}
fn d_eps_end() -> f64 {
    0.05
}
fn d_anneal() -> f64 {
    0.5
}
fn d_horizon() -> usize {
    8
}
fn d_sync() -> u64 {
    1000
}
fn d_alpha() -> f64 {
    1.0
}
fn d_beta() -> f64 {
    0.5
}
fn d_hidden() -> Vec<usize> {
    vec![256, 256, 256]
}
fn d_train_every() -> usize {
    1
}
fn d_checkpoint() -> String {
    "model.json".to_string()
}

impl Default for RlSection {
    fn default() -> Self {
        toml::from_str("").expect("all fields defaulted")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSection {
    pub seeds: Vec<u64>,
    #[serde(default = "default_out_dir")]
    pub out_dir: String,
}

fn default_out_dir() -> String {
    "out".to_string()
}

/// Complete resolved run configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub time: TimeSection,
    pub constellation: ConstellationSection,
    pub neighbors: NeighborSection,
    pub footprint: FootprintSection,
    pub channel: ChannelSection,
    pub traffic: TrafficSection,
    pub gateways: GatewaySection,
    pub policy: PolicySection,
    #[serde(default)]
    pub rl: RlSection,
    pub run: RunSection,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Load from a file and resolve relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let resolve = |p: &mut String| {
            if !Path::new(p).is_absolute() {
                *p = base.join(&p).to_string_lossy().into_owned();
            }
        };
        resolve(&mut self.constellation.tle_file);
        resolve(&mut self.traffic.grid_file);
        resolve(&mut self.gateways.file);
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if self.constellation.num_satellites == 0 {
            return Err(ConfigError::Invalid("num_satellites must be >= 1".into()));
        }
        if self.run.seeds.is_empty() {
            return Err(ConfigError::Invalid("need at least one seed".into()));
        }
        if self.time.slot_seconds <= 0.0 || self.time.num_slots == 0 {
            return Err(ConfigError::Invalid("bad time grid".into()));
        }
        if !(self.traffic.baseline > self.traffic.amplitude && self.traffic.amplitude >= 0.0) {
            return Err(ConfigError::Invalid(
                "traffic baseline must exceed amplitude >= 0".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.policy.p_activate) {
            return Err(ConfigError::Invalid("p_activate must be in [0,1]".into()));
        }
        crate::policies::PolicyKind::parse(&self.policy.name)
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }

    pub fn out_dir(&self) -> PathBuf {
        PathBuf::from(&self.run.out_dir)
    }

    /// Serialized snapshot of the fully resolved configuration.
    pub fn snapshot(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

/// Gateway list file: CSV with header `id,name,lat_deg,lon_deg,region`.
#[derive(Debug, Clone, PartialEq)]
pub struct GatewayRecord {
    pub id: usize,
    pub name: String,
    pub lat_deg: f64,
    pub lon_deg: f64,
    pub region: String,
}

pub fn parse_gateways(text: &str, preset: &str) -> Result<Vec<GatewayRecord>, ConfigError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with("id,")) || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        if parts.len() != 5 {
            return Err(ConfigError::Invalid(format!(
                "gateway line {}: expected 5 fields",
                i + 1
            )));
        }
        let rec = GatewayRecord {
            id: parts[0].parse().map_err(|_| {
                ConfigError::Invalid(format!("gateway line {}: bad id", i + 1))
            })?,
            name: parts[1].to_string(),
            lat_deg: parts[2].parse().map_err(|_| {
                ConfigError::Invalid(format!("gateway line {}: bad latitude", i + 1))
            })?,
            lon_deg: parts[3].parse().map_err(|_| {
                ConfigError::Invalid(format!("gateway line {}: bad longitude", i + 1))
            })?,
            region: parts[4].to_string(),
        };
        if preset == "hybrid" || rec.region == preset {
            out.push(rec);
        }
    }
    if out.is_empty() && preset != "hybrid" {
        return Err(ConfigError::Invalid(format!("gateway preset `{preset}` matches no records")));
    }
    Ok(out)
}

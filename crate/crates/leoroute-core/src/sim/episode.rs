//! Slotted episode engine: resolve a configuration into a precomputed
//! scenario (orbits, gateway positions, traffic field), then run policies
//! over the time grid with two decoupled random streams.
//!
//! Randomness contract: the `env` stream drives fading and arrivals, the
//! `policy` stream drives policy-internal choices (exploration, random
//! activation). Environment draws per slot are a fixed-length sequence
//! (one fading draw and one arrival draw per satellite, ascending id), so
//! the realized environment for a seed is identical under every policy.

use crate::channel::{
    isl_capacity_packets, isl_snr, lg_capacity_packets, lg_mean_snr, sample_fading,
    ElevationFadingTable, IslChannelParams, LgChannelParams,
};
use crate::geometry::{
    build_snapshot, elevation_angle, FootprintParams, NeighborParams, TopologySnapshot,
};
use crate::orbits::{
    ground_site_eci, parse_tle, propagate, EciState, GroundSite, KeplerPropagator,
};
use crate::policies::{Policy, PolicyInput};
use crate::queueing::{clamp_schedule, gateway_offload, step_queues, QueueState, SlotFlows};
use crate::sim::config::{parse_gateways, RunConfig};
use crate::sim::SimError;
use crate::time::{gmst_rad, TimeGrid};
use crate::traffic::{draw_arrivals, footprint_rate, DiurnalParams, TrafficField};
use crate::vec3::Vec3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

/// Environment stream for a run seed.
pub fn env_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Policy stream, decorrelated from the environment by a fixed xor mask.
pub fn policy_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15)
}

/// Fully resolved, policy-independent simulation inputs.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub grid: TimeGrid,
    /// Satellite inertial states indexed `[slot][sat]`.
    pub sat_states: Vec<Vec<EciState>>,
    /// Gateway inertial positions indexed `[slot][gateway]`.
    pub gw_eci: Vec<Vec<Vec3>>,
    pub gateway_names: Vec<String>,
    pub neighbor_params: NeighborParams,
    pub footprint: FootprintParams,
    pub lg: LgChannelParams,
    pub isl: IslChannelParams,
    pub fading: ElevationFadingTable,
    pub field: TrafficField,
    pub diurnal: DiurnalParams,
}

impl Scenario {
    pub fn from_config(cfg: &RunConfig) -> Result<Self, SimError> {
        let t0 = TimeGrid::parse_utc(&cfg.time.t0)?;
        let grid = TimeGrid::new(t0, cfg.time.slot_seconds, cfg.time.num_slots)?;

        let tle_text = std::fs::read_to_string(&cfg.constellation.tle_file)
            .map_err(|e| SimError::Io(cfg.constellation.tle_file.clone(), e))?;
        let mut records = parse_tle(&tle_text)?;
        if records.len() < cfg.constellation.num_satellites {
            return Err(SimError::Scenario(format!(
                "constellation file has {} satellites, config asks for {}",
                records.len(),
                cfg.constellation.num_satellites
            )));
        }
        records.truncate(cfg.constellation.num_satellites);
        let prop = KeplerPropagator { j2_secular: cfg.constellation.j2_secular };
        let per_sat: Vec<Vec<EciState>> = records
            .iter()
            .map(|r| propagate(r, &grid, &prop))
            .collect::<Result<_, _>>()?;
        let sat_states: Vec<Vec<EciState>> = (0..grid.num_slots)
            .map(|t| per_sat.iter().map(|s| s[t]).collect())
            .collect();

        let gw_text = std::fs::read_to_string(&cfg.gateways.file)
            .map_err(|e| SimError::Io(cfg.gateways.file.clone(), e))?;
        let gw_records = parse_gateways(&gw_text, &cfg.gateways.preset)?;
        let sites: Vec<GroundSite> = gw_records
            .iter()
            .map(|g| GroundSite::from_degrees(g.lat_deg, g.lon_deg, 0.0))
            .collect::<Result<_, _>>()?;
        let gw_eci: Vec<Vec<Vec3>> = (0..grid.num_slots)
            .map(|t| sites.iter().map(|s| ground_site_eci(s, &grid, t)).collect())
            .collect();

        let grid_text = std::fs::read_to_string(&cfg.traffic.grid_file)
            .map_err(|e| SimError::Io(cfg.traffic.grid_file.clone(), e))?;
        let field = TrafficField::parse(&grid_text)?.scaled(cfg.traffic.calibration);
        let diurnal = DiurnalParams::new(
            cfg.traffic.amplitude,
            cfg.traffic.baseline,
            cfg.traffic.peak_phase_hours,
        )?;

        Ok(Self {
            grid,
            sat_states,
            gw_eci,
            gateway_names: gw_records.into_iter().map(|g| g.name).collect(),
            neighbor_params: NeighborParams {
                max_neighbors: cfg.neighbors.max_neighbors,
                max_range_km: cfg.neighbors.max_range_km,
                max_plane_angle: cfg.neighbors.max_plane_angle_deg.to_radians(),
            },
            footprint: FootprintParams {
                min_elevation: cfg.footprint.min_elevation_deg.to_radians(),
                earth_radius_km: crate::EARTH_RADIUS_KM,
            },
            lg: cfg.channel.lg,
            isl: cfg.channel.isl,
            fading: cfg.channel.fading_table(),
            field,
            diurnal,
        })
    }

    pub fn num_satellites(&self) -> usize {
        self.sat_states.first().map(|s| s.len()).unwrap_or(0)
    }

    /// Normalizers for the residual agent's capacity features: packets per
    /// unit spectral efficiency, so normalized capacities read as bits/s/Hz.
    pub fn feature_norms(&self) -> (f64, f64) {
        (
            self.isl.packets_per_se(self.grid.slot_seconds),
            self.lg.packets_per_se(self.grid.slot_seconds),
        )
    }

    /// All environment randomness of one slot, drawn in a fixed order:
    /// per-satellite fading (ascending id), then per-satellite arrivals.
    pub fn draw_slot(&self, t: usize, env: &mut ChaCha8Rng) -> Result<SlotDraw, SimError> {
        let states = &self.sat_states[t];
        let gws = &self.gw_eci[t];
        let topo = build_snapshot(t, states, gws, &self.neighbor_params, &self.footprint)?;

        let mut isl_caps = BTreeMap::new();
        for (k, m) in topo.links() {
            let snr = isl_snr(states[k].pos, states[m].pos, &self.isl)?;
            isl_caps.insert((k, m), isl_capacity_packets(snr, &self.isl, self.grid.slot_seconds));
        }

        let mut lg_caps = vec![0.0; states.len()];
        for (k, state) in states.iter().enumerate() {
            // one draw per satellite regardless of visibility keeps the env
            // stream aligned across policies and topology perturbations
            let fading_params = match topo.gateway_of[k] {
                Some(g) => self.fading.lookup(elevation_angle(state.pos, gws[g], &self.footprint)),
                None => self.fading.lookup(0.0),
            };
            let h = sample_fading(&fading_params, env);
            if let Some(g) = topo.gateway_of[k] {
                let snr = lg_mean_snr(state.pos, gws[g], &self.lg)?;
                lg_caps[k] = lg_capacity_packets(snr, h, &self.lg, self.grid.slot_seconds);
            }
        }

        let gmst = gmst_rad(self.grid.slot_jd(t));
        let utc_hour = self.grid.slot_utc_hour(t);
        let arrivals: Vec<u64> = states
            .iter()
            .map(|s| {
                let lambda = footprint_rate(
                    s.pos,
                    gmst,
                    &self.field,
                    &self.footprint,
                    &self.diurnal,
                    utc_hour,
                );
                draw_arrivals(lambda, env)
            })
            .collect();

        Ok(SlotDraw { topo, isl_caps, lg_caps, arrivals })
    }
}

/// The environment realization of one slot, shared by the acting policy and
/// any counterfactual replay of the same slot.
#[derive(Debug, Clone)]
pub struct SlotDraw {
    pub topo: TopologySnapshot,
    pub isl_caps: BTreeMap<(usize, usize), f64>,
    pub lg_caps: Vec<f64>,
    pub arrivals: Vec<u64>,
}

impl SlotDraw {
    pub fn policy_input(&self, q: QueueState) -> PolicyInput {
        PolicyInput {
            q,
            topo: self.topo.clone(),
            isl_caps: self.isl_caps.clone(),
            lg_caps: self.lg_caps.clone(),
        }
    }

    /// Gateway offload for the given queues under this draw's LG capacities.
    pub fn offload(&self, q: &QueueState) -> Vec<u64> {
        (0..q.q.len())
            .map(|k| gateway_offload(q.q[k], self.topo.visible(k), self.lg_caps[k]))
            .collect()
    }
}

/// Advance one slot for an arbitrary demand set; returns realized flows and
/// the next queue state.
pub fn advance_slot(
    draw: &SlotDraw,
    q: &QueueState,
    demands: &[crate::queueing::LinkDemand],
) -> Result<(SlotFlows, QueueState), SimError> {
    let v = draw.offload(q);
    let schedule = clamp_schedule(demands, q, &draw.isl_caps, &v);
    let flows = SlotFlows::from_schedule(&schedule, draw.arrivals.clone());
    let next = step_queues(q, &flows)?;
    Ok((flows, next))
}

/// Per-slot and aggregate metrics of one episode.
#[derive(Debug, Clone, Default)]
pub struct MetricsSeries {
    pub mean_q: Vec<f64>,
    pub max_q: Vec<u64>,
    pub arrivals: Vec<u64>,
    pub offloaded: Vec<u64>,
    /// Every per-satellite queue length observed after each slot.
    pub queue_samples: Vec<u64>,
    pub final_total_q: u64,
}

impl MetricsSeries {
    pub fn total_arrivals(&self) -> u64 {
        self.arrivals.iter().sum()
    }

    pub fn total_offloaded(&self) -> u64 {
        self.offloaded.iter().sum()
    }

    pub fn time_avg_mean_q(&self) -> f64 {
        if self.mean_q.is_empty() {
            return 0.0;
        }
        self.mean_q.iter().sum::<f64>() / self.mean_q.len() as f64
    }

    pub fn time_avg_max_q(&self) -> f64 {
        if self.max_q.is_empty() {
            return 0.0;
        }
        self.max_q.iter().sum::<u64>() as f64 / self.max_q.len() as f64
    }

    pub fn final_mean_q(&self) -> f64 {
        self.mean_q.last().copied().unwrap_or(0.0)
    }

    /// Fraction of arrived packets delivered to the ground by episode end.
    pub fn delivery_ratio(&self) -> f64 {
        let a = self.total_arrivals();
        if a == 0 {
            return 1.0;
        }
        self.total_offloaded() as f64 / a as f64
    }
}

/// Run one full episode of a policy from empty queues. The packet ledger
/// total arrivals = total offloaded + final backlog holds exactly.
pub fn run_episode(
    scn: &Scenario,
    seed: u64,
    policy: &mut dyn Policy,
) -> Result<MetricsSeries, SimError> {
    let n = scn.num_satellites();
    let mut env = env_rng(seed);
    let mut pol = policy_rng(seed);
    let mut q = QueueState::zeros(n);
    let mut prev_flows = SlotFlows::zeros(n);
    let mut metrics = MetricsSeries::default();

    for t in 0..scn.grid.num_slots {
        let draw = scn.draw_slot(t, &mut env)?;
        let input = draw.policy_input(q.clone());
        let demands = policy.demands(&input, &prev_flows, &mut pol);
        let (flows, next) = advance_slot(&draw, &q, &demands)?;

        metrics.mean_q.push(next.mean());
        metrics.max_q.push(next.max());
        metrics.arrivals.push(flows.arrivals.iter().sum());
        metrics.offloaded.push(flows.sent_gw.iter().sum());
        metrics.queue_samples.extend_from_slice(&next.q);

        q = next;
        prev_flows = flows;
    }
    metrics.final_total_q = q.total();
    Ok(metrics)
}

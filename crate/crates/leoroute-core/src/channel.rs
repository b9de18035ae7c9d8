//! Link-to-ground and inter-satellite SNRs, shadowed-Rician small-scale
//! fading, and packet-capacity conversion.
//!
//! Unit convention: the LG path-loss distance is in km, the ISL wavelength
//! ratio uses meters. Capacities are real-valued packets; flooring to whole
//! packets happens in the queueing module where packets actually move.

use crate::vec3::Vec3;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("coincident endpoints: link distance is zero")]
    ZeroDistance,
}

/// Link-to-ground channel parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LgChannelParams {
    pub tx_power_w: f64,
    pub path_loss_exp: f64,
    pub noise_var_w: f64,
    pub bandwidth_hz: f64,
    pub packet_bits: f64,
}

impl LgChannelParams {
    /// Packets per unit spectral efficiency per slot: B * dt / L_pkt.
    pub fn packets_per_se(&self, slot_seconds: f64) -> f64 {
        self.bandwidth_hz * slot_seconds / self.packet_bits
    }
}

/// Shadowed-Rician fading parameters: half scatter power b0, Nakagami
/// shape m, LOS mean power Omega.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShadowedRicianParams {
    pub b0: f64,
    pub m: f64,
    pub omega: f64,
}

impl ShadowedRicianParams {
    /// Widely used average-shadowing triple.
    pub const AVERAGE: Self = Self { b0: 0.126, m: 10.1, omega: 0.835 };

    /// Mean fading gain 2*b0 + Omega.
    pub fn mean(&self) -> f64 {
        2.0 * self.b0 + self.omega
    }
}

/// Inter-satellite link parameters (free-space path loss, no fading).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IslChannelParams {
    pub tx_power_w: f64,
    pub tx_gain: f64,
    pub rx_gain: f64,
    pub carrier_wavelength_m: f64,
    pub sys_noise_temp_k: f64,
    pub isl_bandwidth_hz: f64,
    pub packet_bits: f64,
}

pub const BOLTZMANN: f64 = 1.380_649e-23;

impl IslChannelParams {
    pub fn packets_per_se(&self, slot_seconds: f64) -> f64 {
        self.isl_bandwidth_hz * slot_seconds / self.packet_bits
    }
}

/// Mean LG SNR: P_tx * D^(-eta) / sigma^2, distance in km.
pub fn lg_mean_snr(sat: Vec3, gw: Vec3, p: &LgChannelParams) -> Result<f64, ChannelError> {
    let d = sat.distance(gw);
    if d == 0.0 {
        return Err(ChannelError::ZeroDistance);
    }
    Ok(p.tx_power_w * d.powf(-p.path_loss_exp) / p.noise_var_w)
}

/// One shadowed-Rician fading draw via the compositional representation:
/// complex-Gaussian scatter with per-dimension variance b0 plus a LOS
/// component of Gamma(m, omega/m) power and uniform phase.
pub fn sample_fading<R: Rng + ?Sized>(p: &ShadowedRicianParams, rng: &mut R) -> f64 {
    let sigma = p.b0.sqrt();
    let zx: f64 = <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng) * sigma;
    let zy: f64 = <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng) * sigma;
    let los_power = if p.omega > 0.0 {
        Gamma::new(p.m, p.omega / p.m).expect("valid gamma params").sample(rng)
    } else {
        0.0
    };
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    let amp = los_power.sqrt();
    let re = zx + amp * phase.cos();
    let im = zy + amp * phase.sin();
    re * re + im * im
}

/// LG capacity in packets: (B*dt/L_pkt) * log2(1 + kappa * mean_snr).
pub fn lg_capacity_packets(
    mean_snr: f64,
    fading: f64,
    p: &LgChannelParams,
    slot_seconds: f64,
) -> f64 {
    p.packets_per_se(slot_seconds) * (1.0 + fading * mean_snr).log2()
}

/// ISL SNR from the free-space link budget:
/// P * Gtx * Grx * (lambda_c / (4 pi D))^2 / (k_B * T_s * B_isl).
pub fn isl_snr(a: Vec3, b: Vec3, p: &IslChannelParams) -> Result<f64, ChannelError> {
    let d_m = a.distance(b) * 1000.0;
    if d_m == 0.0 {
        return Err(ChannelError::ZeroDistance);
    }
    let ratio = p.carrier_wavelength_m / (4.0 * std::f64::consts::PI * d_m);
    Ok(p.tx_power_w * p.tx_gain * p.rx_gain * ratio * ratio
        / (BOLTZMANN * p.sys_noise_temp_k * p.isl_bandwidth_hz))
}

/// ISL capacity in packets: (B_isl*dt/L_pkt) * log2(1 + snr).
pub fn isl_capacity_packets(snr: f64, p: &IslChannelParams, slot_seconds: f64) -> f64 {
    p.packets_per_se(slot_seconds) * (1.0 + snr).log2()
}

/// Elevation-band table mapping elevation (radians) to fading parameters.
/// Bands are lower-edge keyed and looked up by the largest edge not above
/// the elevation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElevationFadingTable {
    /// (band lower edge in degrees, params), ascending by edge.
    pub bands: Vec<(f64, ShadowedRicianParams)>,
}

impl Default for ElevationFadingTable {
    fn default() -> Self {
        // 10..90 degrees in 10-degree steps, all average shadowing
        Self {
            bands: (0..9)
                .map(|i| (10.0 * i as f64 + 10.0, ShadowedRicianParams::AVERAGE))
                .collect(),
        }
    }
}

impl ElevationFadingTable {
    pub fn lookup(&self, elevation_rad: f64) -> ShadowedRicianParams {
        let deg = elevation_rad.to_degrees();
        let mut current = self.bands.first().map(|b| b.1).unwrap_or(ShadowedRicianParams::AVERAGE);
        for &(edge, p) in &self.bands {
            if deg >= edge {
                current = p;
            } else {
                break;
            }
        }
        current
    }
}

//! Spatio-temporal packet arrivals: a population-intensity grid integrated
//! over each satellite footprint, modulated diurnally, driving Poisson draws.
//!
//! The "hour of day" driving the diurnal factor is the local solar hour at
//! the sub-satellite longitude (UTC hour + longitude/15, mod 24).

use crate::geometry::{in_footprint, FootprintParams};
use crate::vec3::Vec3;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrafficError {
    #[error("bad traffic grid: {0}")]
    BadGrid(String),
    #[error("bad diurnal params: baseline must exceed amplitude >= 0")]
    BadDiurnal,
}

/// Diurnal modulation M_tod(h) = amplitude * sin(2 pi (h - tau) / 24) + baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiurnalParams {
    pub amplitude: f64,
    pub baseline: f64,
    pub peak_phase_hours: f64,
}

impl DiurnalParams {
    pub fn new(amplitude: f64, baseline: f64, peak_phase_hours: f64) -> Result<Self, TrafficError> {
        if !(amplitude >= 0.0 && baseline > amplitude) {
            return Err(TrafficError::BadDiurnal);
        }
        Ok(Self { amplitude, baseline, peak_phase_hours })
    }
}

pub fn diurnal_factor(hour: f64, p: &DiurnalParams) -> f64 {
    p.amplitude * (std::f64::consts::TAU * (hour - p.peak_phase_hours) / 24.0).sin() + p.baseline
}

/// Global traffic-intensity raster. Intensity is packets per slot per cell
/// at unit diurnal modulation.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficField {
    pub lat_edges: Vec<f64>,
    pub lon_edges: Vec<f64>,
    /// Row-major [lat][lon].
    pub intensity: Vec<f64>,
    /// Unit ECEF direction of each cell center, same layout as `intensity`.
    cell_dirs: Vec<Vec3>,
}

impl TrafficField {
    pub fn new(
        lat_edges: Vec<f64>,
        lon_edges: Vec<f64>,
        intensity: Vec<f64>,
    ) -> Result<Self, TrafficError> {
        let n_lat = lat_edges.len().saturating_sub(1);
        let n_lon = lon_edges.len().saturating_sub(1);
        if n_lat == 0 || n_lon == 0 {
            return Err(TrafficError::BadGrid("need at least one cell".into()));
        }
        if intensity.len() != n_lat * n_lon {
            return Err(TrafficError::BadGrid(format!(
                "expected {} values, got {}",
                n_lat * n_lon,
                intensity.len()
            )));
        }
        if intensity.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(TrafficError::BadGrid("intensity must be finite and >= 0".into()));
        }
        let mut cell_dirs = Vec::with_capacity(n_lat * n_lon);
        for i in 0..n_lat {
            let lat = 0.5 * (lat_edges[i] + lat_edges[i + 1]);
            for j in 0..n_lon {
                let lon = 0.5 * (lon_edges[j] + lon_edges[j + 1]);
                let (lat_r, lon_r) = (lat.to_radians(), lon.to_radians());
                cell_dirs.push(Vec3::new(
                    lat_r.cos() * lon_r.cos(),
                    lat_r.cos() * lon_r.sin(),
                    lat_r.sin(),
                ));
            }
        }
        Ok(Self { lat_edges, lon_edges, intensity, cell_dirs })
    }

    /// Uniform grid over [-90,90] x [-180,180].
    pub fn uniform(n_lat: usize, n_lon: usize, intensity: Vec<f64>) -> Result<Self, TrafficError> {
        let lat_edges = (0..=n_lat)
            .map(|i| -90.0 + 180.0 * i as f64 / n_lat as f64)
            .collect();
        let lon_edges = (0..=n_lon)
            .map(|j| -180.0 + 360.0 * j as f64 / n_lon as f64)
            .collect();
        Self::new(lat_edges, lon_edges, intensity)
    }

    /// Parse the grid file format: a header line
    /// `n_lat n_lon lat_min lat_max lon_min lon_max` followed by n_lat
    /// whitespace-separated rows of n_lon values (row 0 = lat_min edge).
    pub fn parse(text: &str) -> Result<Self, TrafficError> {
        let mut tokens = text.split_whitespace();
        let mut next = |what: &str| -> Result<f64, TrafficError> {
            tokens
                .next()
                .ok_or_else(|| TrafficError::BadGrid(format!("missing {what}")))?
                .parse()
                .map_err(|_| TrafficError::BadGrid(format!("unparsable {what}")))
        };
        let n_lat = next("n_lat")? as usize;
        let n_lon = next("n_lon")? as usize;
        let lat_min = next("lat_min")?;
        let lat_max = next("lat_max")?;
        let lon_min = next("lon_min")?;
        let lon_max = next("lon_max")?;
        if n_lat == 0 || n_lon == 0 || lat_max <= lat_min || lon_max <= lon_min {
            return Err(TrafficError::BadGrid("bad header".into()));
        }
        let values: Result<Vec<f64>, _> = tokens
            .map(|s| s.parse::<f64>().map_err(|_| TrafficError::BadGrid(format!("bad value `{s}`"))))
            .collect();
        let values = values?;
        let lat_edges = (0..=n_lat)
            .map(|i| lat_min + (lat_max - lat_min) * i as f64 / n_lat as f64)
            .collect();
        let lon_edges = (0..=n_lon)
            .map(|j| lon_min + (lon_max - lon_min) * j as f64 / n_lon as f64)
            .collect();
        Self::new(lat_edges, lon_edges, values)
    }

    /// Multiply every cell by a calibration scalar.
    pub fn scaled(mut self, factor: f64) -> Self {
        for v in &mut self.intensity {
            *v *= factor;
        }
        self
    }
}

/// Aggregate arrival rate over a satellite footprint at one slot:
/// M_tod(local hour) times the Riemann sum of intensity over the grid
/// cells whose centers fall inside the footprint. The satellite position
/// is rotated into the Earth-fixed frame (by -GMST) so the static cell
/// grid can be tested directly; footprint membership is rotation
/// invariant so this equals the ECI-frame test.
pub fn footprint_rate(
    sat_eci: Vec3,
    gmst_rad: f64,
    field: &TrafficField,
    fp: &FootprintParams,
    diurnal: &DiurnalParams,
    utc_hour: f64,
) -> f64 {
    let sat_ecef = sat_eci.rotated_z(-gmst_rad);
    let sub_lon_deg = sat_ecef.y.atan2(sat_ecef.x).to_degrees();
    let local_hour = (utc_hour + sub_lon_deg / 15.0).rem_euclid(24.0);
    let mtod = diurnal_factor(local_hour, diurnal);

    // cheap prefilter: the footprint never extends past the horizon cone
    let r = sat_ecef.norm();
    let cos_horizon = (fp.earth_radius_km / r).min(1.0);
    // guard band: anything with cos(central angle) well below the horizon
    // cone cannot be in the footprint
    let threshold = cos_horizon - 1e-9;

    let mut total = 0.0;
    for (dir, &rho) in field.cell_dirs.iter().zip(&field.intensity) {
        if rho == 0.0 {
            continue;
        }
        let site = *dir * fp.earth_radius_km;
        if sat_ecef.dot(site) / (r * fp.earth_radius_km) < threshold {
            continue;
        }
        if in_footprint(sat_ecef, site, fp) {
            total += rho;
        }
    }
    mtod * total
}

/// Poisson arrival draw; lambda = 0 deterministically yields 0.
pub fn draw_arrivals<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    let draw: f64 = Poisson::new(lambda).expect("lambda > 0").sample(rng);
    draw as u64
}

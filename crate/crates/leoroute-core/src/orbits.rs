//! TLE ingestion and two-body orbit propagation.
//!
//! The propagator is deliberately Keplerian (mean elements from the TLE,
//! optional J2 secular drift of RAAN and argument of perigee) behind the
//! [`Propagator`] trait so a higher-fidelity model can be plugged in later.

use crate::time::TimeGrid;
use crate::vec3::Vec3;
use crate::{EARTH_RADIUS_KM, MU_EARTH};
use thiserror::Error;

/// Second zonal harmonic of the Earth's gravity field.
pub const J2: f64 = 1.082_626_68e-3;

#[derive(Debug, Error)]
pub enum OrbitError {
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("line {line}: checksum mismatch")]
    BadChecksum { line: usize },
    #[error("Kepler solver failed to converge for satellite {satellite_id} at slot {slot}")]
    KeplerDivergence { satellite_id: u32, slot: usize },
    #[error("invalid ground site: {0}")]
    InvalidSite(String),
}

/// Mean orbital elements from a two-line element set. Angles in radians,
/// mean motion in revolutions per day.
#[derive(Debug, Clone, PartialEq)]
pub struct TleRecord {
    pub satellite_id: u32,
    pub name: Option<String>,
    /// Element-set epoch as Unix seconds UTC.
    pub epoch_unix: f64,
    pub inclination: f64,
    pub raan: f64,
    pub eccentricity: f64,
    pub arg_perigee: f64,
    pub mean_anomaly: f64,
    pub mean_motion: f64,
}

impl TleRecord {
    /// Semi-major axis in km implied by the mean motion (Kepler's third law).
    pub fn semi_major_axis_km(&self) -> f64 {
        let n = self.mean_motion_rad_s();
        (MU_EARTH / (n * n)).cbrt()
    }

    /// Mean motion in rad/s.
    pub fn mean_motion_rad_s(&self) -> f64 {
        self.mean_motion * std::f64::consts::TAU / 86_400.0
    }

    /// Orbital period in seconds.
    pub fn period_s(&self) -> f64 {
        86_400.0 / self.mean_motion
    }
}

/// Fixed ground location (geodetic on a spherical Earth).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundSite {
    pub latitude: f64,
    pub longitude: f64,
    pub altitude_km: f64,
}

impl GroundSite {
    pub fn new(latitude: f64, longitude: f64, altitude_km: f64) -> Result<Self, OrbitError> {
        use std::f64::consts::PI;
        if !(latitude.abs() <= PI / 2.0) {
            return Err(OrbitError::InvalidSite(format!("latitude {latitude} out of range")));
        }
        if !(-PI..PI).contains(&longitude) {
            return Err(OrbitError::InvalidSite(format!("longitude {longitude} out of range")));
        }
        Ok(Self { latitude, longitude, altitude_km })
    }

    pub fn from_degrees(lat_deg: f64, lon_deg: f64, altitude_km: f64) -> Result<Self, OrbitError> {
        // fold longitude into [-180, 180)
        let lon = (lon_deg + 180.0).rem_euclid(360.0) - 180.0;
        Self::new(lat_deg.to_radians(), lon.to_radians(), altitude_km)
    }

    /// Earth-fixed position, km.
    pub fn ecef(&self) -> Vec3 {
        let r = EARTH_RADIUS_KM + self.altitude_km;
        Vec3::new(
            r * self.latitude.cos() * self.longitude.cos(),
            r * self.latitude.cos() * self.longitude.sin(),
            r * self.latitude.sin(),
        )
    }
}

/// Inertial position (km) and velocity (km/s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EciState {
    pub pos: Vec3,
    pub vel: Vec3,
}

// ---------------------------------------------------------------------------
// TLE parsing
// ---------------------------------------------------------------------------

fn tle_checksum(line: &str) -> u32 {
    line.chars()
        .take(68)
        .map(|c| match c {
            '0'..='9' => c as u32 - '0' as u32,
            '-' => 1,
            _ => 0,
        })
        .sum::<u32>()
        % 10
}

fn check_line(line: &str, lineno: usize) -> Result<(), OrbitError> {
    if line.len() < 69 {
        return Err(OrbitError::MalformedLine {
            line: lineno,
            reason: format!("expected 69 characters, got {}", line.len()),
        });
    }
    let declared = line
        .chars()
        .nth(68)
        .and_then(|c| c.to_digit(10))
        .ok_or(OrbitError::MalformedLine {
            line: lineno,
            reason: "checksum column is not a digit".into(),
        })?;
    if declared != tle_checksum(line) {
        return Err(OrbitError::BadChecksum { line: lineno });
    }
    Ok(())
}

fn field(line: &str, lineno: usize, range: std::ops::Range<usize>) -> Result<&str, OrbitError> {
    line.get(range.clone()).ok_or(OrbitError::MalformedLine {
        line: lineno,
        reason: format!("missing columns {}..{}", range.start, range.end),
    })
}

fn parse_f64(line: &str, lineno: usize, range: std::ops::Range<usize>) -> Result<f64, OrbitError> {
    let s = field(line, lineno, range)?.trim();
    s.parse().map_err(|_| OrbitError::MalformedLine {
        line: lineno,
        reason: format!("unparsable numeric field `{s}`"),
    })
}

/// Convert a TLE epoch field (YYDDD.DDDDDDDD) to Unix seconds.
fn epoch_to_unix(epoch: &str, lineno: usize) -> Result<f64, OrbitError> {
    let bad = |reason: &str| OrbitError::MalformedLine { line: lineno, reason: reason.into() };
    let s = epoch.trim();
    if s.len() < 5 {
        return Err(bad("epoch field too short"));
    }
    let yy: i32 = s[..2].parse().map_err(|_| bad("bad epoch year"))?;
    let year = if yy < 57 { 2000 + yy } else { 1900 + yy };
    let doy: f64 = s[2..].parse().map_err(|_| bad("bad epoch day"))?;
    let jan1 = chrono::NaiveDate::from_ymd_opt(year, 1, 1)
        .ok_or_else(|| bad("bad epoch year"))?
        .and_hms_opt(0, 0, 0)
        .unwrap()
        .and_utc()
        .timestamp() as f64;
    Ok(jan1 + (doy - 1.0) * 86_400.0)
}

/// Parse the content of a TLE file into records, in file order.
///
/// Accepts plain 2-line sets and named 3-line sets. Malformed lines and
/// checksum failures are rejected with the 1-based line number.
pub fn parse_tle(text: &str) -> Result<Vec<TleRecord>, OrbitError> {
    let mut records = Vec::new();
    let mut pending_name: Option<String> = None;
    let mut lines = text.lines().enumerate().peekable();

    while let Some((idx, raw)) = lines.next() {
        let lineno = idx + 1;
        let line = raw.trim_end();
        if line.is_empty() {
            continue;
        }
        if !line.starts_with("1 ") {
            pending_name = Some(line.trim().to_string());
            continue;
        }
        check_line(line, lineno)?;
        let (idx2, raw2) = lines.next().ok_or(OrbitError::MalformedLine {
            line: lineno,
            reason: "element set truncated: missing line 2".into(),
        })?;
        let lineno2 = idx2 + 1;
        let line2 = raw2.trim_end();
        if !line2.starts_with("2 ") {
            return Err(OrbitError::MalformedLine {
                line: lineno2,
                reason: "expected line 2 of element set".into(),
            });
        }
        check_line(line2, lineno2)?;

        let satellite_id: u32 = field(line, lineno, 2..7)?
            .trim()
            .parse()
            .map_err(|_| OrbitError::MalformedLine {
                line: lineno,
                reason: "bad satellite number".into(),
            })?;
        let epoch_unix = epoch_to_unix(field(line, lineno, 18..32)?, lineno)?;

        let inclination = parse_f64(line2, lineno2, 8..16)?.to_radians();
        let raan = parse_f64(line2, lineno2, 17..25)?.to_radians();
        let ecc_digits = field(line2, lineno2, 26..33)?.trim();
        let eccentricity: f64 = format!("0.{ecc_digits}")
            .parse()
            .map_err(|_| OrbitError::MalformedLine {
                line: lineno2,
                reason: "bad eccentricity field".into(),
            })?;
        let arg_perigee = parse_f64(line2, lineno2, 34..42)?.to_radians();
        let mean_anomaly = parse_f64(line2, lineno2, 43..51)?.to_radians();
        let mean_motion = parse_f64(line2, lineno2, 52..63)?;

        if !(0.0..1.0).contains(&eccentricity) {
            return Err(OrbitError::MalformedLine {
                line: lineno2,
                reason: format!("eccentricity {eccentricity} out of [0,1)"),
            });
        }
        if mean_motion <= 0.0 {
            return Err(OrbitError::MalformedLine {
                line: lineno2,
                reason: "mean motion must be positive".into(),
            });
        }

        records.push(TleRecord {
            satellite_id,
            name: pending_name.take(),
            epoch_unix,
            inclination,
            raan,
            eccentricity,
            arg_perigee,
            mean_anomaly,
            mean_motion,
        });
    }
    Ok(records)
}

// ---------------------------------------------------------------------------
// Propagation
// ---------------------------------------------------------------------------

/// Solve Kepler's equation E - e sin E = M. Newton iteration with a
/// bisection fallback on [M - e, M + e].
pub fn solve_kepler(mean_anomaly: f64, e: f64) -> Option<f64> {
    const TOL: f64 = 1e-12;
    const MAX_NEWTON: usize = 50;
    let m = mean_anomaly;
    let mut ecc_anom = if e < 0.8 { m } else { std::f64::consts::PI };
    for _ in 0..MAX_NEWTON {
        let f = ecc_anom - e * ecc_anom.sin() - m;
        let fp = 1.0 - e * ecc_anom.cos();
        let step = f / fp;
        ecc_anom -= step;
        if step.abs() < TOL {
            return Some(ecc_anom);
        }
    }
    // bisection fallback: the root lies within e of M
    let (mut lo, mut hi) = (m - e - 1e-9, m + e + 1e-9);
    let f = |x: f64| x - e * x.sin() - m;
    if f(lo) > 0.0 || f(hi) < 0.0 {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < TOL {
            return Some(0.5 * (lo + hi));
        }
    }
    Some(0.5 * (lo + hi))
}

/// Orbit propagation interface: inertial state at an absolute UTC instant.
pub trait Propagator {
    fn state_at(&self, rec: &TleRecord, unix: f64) -> Result<EciState, OrbitError>;
}

/// Two-body Keplerian propagation of TLE mean elements, with optional J2
/// secular drift of RAAN and argument of perigee.
#[derive(Debug, Clone, Copy, Default)]
pub struct KeplerPropagator {
    pub j2_secular: bool,
}

impl Propagator for KeplerPropagator {
    fn state_at(&self, rec: &TleRecord, unix: f64) -> Result<EciState, OrbitError> {
        let dt = unix - rec.epoch_unix;
        let n = rec.mean_motion_rad_s();
        let a = rec.semi_major_axis_km();
        let e = rec.eccentricity;
        let i = rec.inclination;

        let (raan, argp) = if self.j2_secular {
            let p = a * (1.0 - e * e);
            let k = 1.5 * J2 * n * (EARTH_RADIUS_KM / p).powi(2);
            let raan_dot = -k * i.cos();
            let argp_dot = 0.5 * k * (5.0 * i.cos().powi(2) - 1.0);
            (rec.raan + raan_dot * dt, rec.arg_perigee + argp_dot * dt)
        } else {
            (rec.raan, rec.arg_perigee)
        };

        let m = (rec.mean_anomaly + n * dt).rem_euclid(std::f64::consts::TAU);
        let ecc_anom = solve_kepler(m, e).ok_or(OrbitError::KeplerDivergence {
            satellite_id: rec.satellite_id,
            slot: 0,
        })?;

        let (sin_e, cos_e) = ecc_anom.sin_cos();
        let r = a * (1.0 - e * cos_e);
        let sq = (1.0 - e * e).sqrt();
        let pos_pf = Vec3::new(a * (cos_e - e), a * sq * sin_e, 0.0);
        let vcoef = (MU_EARTH * a).sqrt() / r;
        let vel_pf = Vec3::new(-vcoef * sin_e, vcoef * sq * cos_e, 0.0);

        let rotate = |v: Vec3| -> Vec3 {
            // Rz(raan) * Rx(i) * Rz(argp)
            let v = v.rotated_z(argp);
            let (si, ci) = i.sin_cos();
            let v = Vec3::new(v.x, ci * v.y - si * v.z, si * v.y + ci * v.z);
            v.rotated_z(raan)
        };
        Ok(EciState { pos: rotate(pos_pf), vel: rotate(vel_pf) })
    }
}

/// Propagate a record over a whole grid: one state per slot.
///
/// Emits a warning on stderr when the grid start is more than 30 days from
/// the element-set epoch.
pub fn propagate(
    rec: &TleRecord,
    grid: &TimeGrid,
    prop: &dyn Propagator,
) -> Result<Vec<EciState>, OrbitError> {
    if (grid.t0_unix - rec.epoch_unix).abs() > 30.0 * 86_400.0 {
        eprintln!(
            "warning: satellite {} propagated {:.1} days from its TLE epoch",
            rec.satellite_id,
            (grid.t0_unix - rec.epoch_unix).abs() / 86_400.0
        );
    }
    (0..grid.num_slots)
        .map(|t| {
            prop.state_at(rec, grid.slot_unix(t)).map_err(|e| match e {
                OrbitError::KeplerDivergence { satellite_id, .. } => {
                    OrbitError::KeplerDivergence { satellite_id, slot: t }
                }
                other => other,
            })
        })
        .collect()
}

/// ECI position of a fixed ground site at slot `t`: geodetic -> ECEF on the
/// spherical Earth, then rotation by GMST.
pub fn ground_site_eci(site: &GroundSite, grid: &TimeGrid, t: usize) -> Vec3 {
    site.ecef().rotated_z(crate::time::gmst_rad(grid.slot_jd(t)))
}

/// Build a circular-orbit record from raw elements; used by tests and the
/// synthetic-constellation tooling.
pub fn record_from_elements(
    satellite_id: u32,
    epoch_unix: f64,
    inclination: f64,
    raan: f64,
    eccentricity: f64,
    arg_perigee: f64,
    mean_anomaly: f64,
    mean_motion: f64,
) -> TleRecord {
    TleRecord {
        satellite_id,
        name: None,
        epoch_unix,
        inclination,
        raan,
        eccentricity,
        arg_perigee,
        mean_anomaly,
        mean_motion,
    }
}

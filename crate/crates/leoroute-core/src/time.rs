//! Slotted time grid and Earth-rotation angle.
//!
//! UTC is treated as a uniform time scale (no leap-second table); at the
//! 60 s slot durations used here sub-second timing does not matter.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Julian date of the Unix epoch 1970-01-01T00:00:00Z.
pub const JD_UNIX_EPOCH: f64 = 2_440_587.5;
/// Julian date of J2000.0 (2000-01-01T12:00:00 TT, treated as UTC here).
pub const JD_J2000: f64 = 2_451_545.0;

#[derive(Debug, Error)]
pub enum TimeError {
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("unparsable timestamp `{0}`")]
    BadTimestamp(String),
}

/// Uniform slot grid: `num_slots` slots of `slot_seconds` starting at `t0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    /// Start of slot 0 as Unix seconds (UTC).
    pub t0_unix: f64,
    pub slot_seconds: f64,
    pub num_slots: usize,
}

impl TimeGrid {
    pub fn new(t0_unix: f64, slot_seconds: f64, num_slots: usize) -> Result<Self, TimeError> {
        if !(slot_seconds > 0.0) {
            return Err(TimeError::InvalidGrid("slot_seconds must be > 0".into()));
        }
        if num_slots == 0 {
            return Err(TimeError::InvalidGrid("num_slots must be >= 1".into()));
        }
        Ok(Self { t0_unix, slot_seconds, num_slots })
    }

    /// Parse an ISO-8601 timestamp into Unix seconds.
    pub fn parse_utc(iso: &str) -> Result<f64, TimeError> {
        let dt = chrono::DateTime::parse_from_rfc3339(iso)
            .map_err(|_| TimeError::BadTimestamp(iso.to_string()))?;
        Ok(dt.timestamp() as f64 + dt.timestamp_subsec_nanos() as f64 * 1e-9)
    }

    pub fn slot_unix(&self, t: usize) -> f64 {
        self.t0_unix + t as f64 * self.slot_seconds
    }

    pub fn slot_jd(&self, t: usize) -> f64 {
        unix_to_jd(self.slot_unix(t))
    }

    /// UTC hour of day in [0, 24) at slot `t`.
    pub fn slot_utc_hour(&self, t: usize) -> f64 {
        (self.slot_unix(t) / 3600.0).rem_euclid(24.0)
    }
}

pub fn unix_to_jd(unix: f64) -> f64 {
    unix / 86_400.0 + JD_UNIX_EPOCH
}

/// Greenwich Mean Sidereal Time in radians for a UT1(=UTC here) Julian date.
///
/// Uses the standard polynomial expressed in degrees of rotation since
/// J2000.0 (equivalent to the IAU 1982 GMST series to well under 1e-6 rad
/// over decades around the epoch).
pub fn gmst_rad(jd: f64) -> f64 {
    let d = jd - JD_J2000;
    let t = d / 36_525.0;
    let deg = 280.460_618_37
        + 360.985_647_366_29 * d
        + 0.000_387_933 * t * t
        - t * t * t / 38_710_000.0;
    deg.rem_euclid(360.0).to_radians()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent GMST oracle: the IAU 1982 polynomial in seconds of
    /// sidereal time, evaluated from 0h UT plus the sidereal-rate scaled
    /// time of day.
    fn gmst_iau1982_rad(jd: f64) -> f64 {
        let jd0 = (jd - 0.5).floor() + 0.5; // previous 0h UT
        let ut_sec = (jd - jd0) * 86_400.0;
        let t = (jd0 - JD_J2000) / 36_525.0;
        let gmst0 = 24_110.548_41 + 8_640_184.812_866 * t + 0.093_104 * t * t
            - 6.2e-6 * t * t * t;
        let gmst = gmst0 + 1.002_737_909_350_795 * ut_sec;
        (gmst.rem_euclid(86_400.0) / 86_400.0) * std::f64::consts::TAU
    }

    #[test]
    fn gmst_matches_iau1982_polynomial() {
        for &unix in &[0.0, 1.5e9, 1.7351e9, 1.8e9] {
            let jd = unix_to_jd(unix);
            let a = gmst_rad(jd);
            let b = gmst_iau1982_rad(jd);
            let diff = (a - b + std::f64::consts::PI)
                .rem_euclid(std::f64::consts::TAU)
                - std::f64::consts::PI;
            assert!(diff.abs() < 1e-6, "jd={jd}: {a} vs {b}");
        }
    }

    #[test]
    fn grid_rejects_degenerate_inputs() {
        assert!(TimeGrid::new(0.0, 0.0, 10).is_err());
        assert!(TimeGrid::new(0.0, 60.0, 0).is_err());
    }

    #[test]
    fn parses_iso8601() {
        let t = TimeGrid::parse_utc("2025-01-01T00:00:00Z").unwrap();
        assert_eq!(t, 1_735_689_600.0);
        assert!(TimeGrid::parse_utc("not-a-time").is_err());
    }
}

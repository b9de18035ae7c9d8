//! Per-slot topology: neighbor selection under range and plane-separation
//! masks, gateway footprint membership, and closest-gateway association.
//!
//! Neighbor links are DIRECTED: `m` being in k's neighbor list does not
//! imply the converse; forwarding k -> m only requires m in N_k(t).

use crate::orbits::EciState;
use crate::vec3::Vec3;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("degenerate orbital state: zero angular momentum")]
    ZeroAngularMomentum,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborParams {
    /// Maximum neighbors per satellite (M).
    pub max_neighbors: usize,
    /// Range mask in km (R_max).
    pub max_range_km: f64,
    /// Plane-separation mask in radians (Theta).
    pub max_plane_angle: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FootprintParams {
    /// Minimum elevation angle in radians.
    pub min_elevation: f64,
    pub earth_radius_km: f64,
}

/// Immutable per-slot topology.
#[derive(Debug, Clone, PartialEq)]
pub struct TopologySnapshot {
    pub t: usize,
    /// Per-satellite neighbor ids, ascending by ECI distance.
    pub neighbors: Vec<Vec<usize>>,
    /// Closest visible gateway per satellite, if any.
    pub gateway_of: Vec<Option<usize>>,
}

impl TopologySnapshot {
    pub fn visible(&self, k: usize) -> bool {
        self.gateway_of[k].is_some()
    }

    pub fn num_satellites(&self) -> usize {
        self.neighbors.len()
    }

    /// All directed neighbor links (k, m) in deterministic order.
    pub fn links(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.neighbors
            .iter()
            .enumerate()
            .flat_map(|(k, ns)| ns.iter().map(move |&m| (k, m)))
    }
}

/// Acute angle between the orbital planes of two satellites, from the
/// angular-momentum normals n = r x v. Coplanar prograde and retrograde
/// pairs both read 0.
pub fn plane_separation(a: &EciState, b: &EciState) -> Result<f64, GeometryError> {
    let na = a.pos.cross(a.vel);
    let nb = b.pos.cross(b.vel);
    if na.norm() == 0.0 || nb.norm() == 0.0 {
        return Err(GeometryError::ZeroAngularMomentum);
    }
    let c = (na.dot(nb) / (na.norm() * nb.norm())).abs().clamp(0.0, 1.0);
    Ok(c.acos())
}

/// Per-satellite neighbor lists: the at-most-M feasible satellites with the
/// smallest ECI distance, feasibility being the range and plane-angle masks.
/// Picking the M smallest distances minimizes the distance sum over all
/// size-M feasible subsets. Ties break by ascending satellite id.
pub fn select_neighbors(
    states: &[EciState],
    params: &NeighborParams,
) -> Result<Vec<Vec<usize>>, GeometryError> {
    let n = states.len();
    let mut result = Vec::with_capacity(n);
    for k in 0..n {
        let mut feasible: Vec<(f64, usize)> = Vec::new();
        for j in 0..n {
            if j == k {
                continue;
            }
            let d = states[k].pos.distance(states[j].pos);
            if d > params.max_range_km {
                continue;
            }
            if plane_separation(&states[k], &states[j])? > params.max_plane_angle {
                continue;
            }
            feasible.push((d, j));
        }
        feasible.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        feasible.truncate(params.max_neighbors);
        result.push(feasible.into_iter().map(|(_, j)| j).collect());
    }
    Ok(result)
}

/// Footprint membership test: (l - h)^T h / (R_E ||l - h||) >= sin(eps_min).
pub fn in_footprint(sat: Vec3, site_eci: Vec3, fp: &FootprintParams) -> bool {
    let diff = sat - site_eci;
    let d = diff.norm();
    if d == 0.0 {
        return false;
    }
    diff.dot(site_eci) / (fp.earth_radius_km * d) >= fp.min_elevation.sin()
}

/// Elevation angle of `sat` above the local horizon of `site_eci`, radians.
pub fn elevation_angle(sat: Vec3, site_eci: Vec3, fp: &FootprintParams) -> f64 {
    let diff = sat - site_eci;
    (diff.dot(site_eci) / (fp.earth_radius_km * diff.norm())).clamp(-1.0, 1.0).asin()
}

/// Closest visible gateway id, ties by ascending id; `None` when no gateway
/// is in the footprint.
pub fn associate_gateway(sat: Vec3, sites: &[Vec3], fp: &FootprintParams) -> Option<usize> {
    sites
        .iter()
        .enumerate()
        .filter(|(_, &h)| in_footprint(sat, h, fp))
        .min_by(|(ia, &ha), (ib, &hb)| {
            sat.distance(ha)
                .partial_cmp(&sat.distance(hb))
                .unwrap()
                .then(ia.cmp(ib))
        })
        .map(|(g, _)| g)
}

/// Build the full per-slot topology snapshot.
pub fn build_snapshot(
    t: usize,
    states: &[EciState],
    gateway_eci: &[Vec3],
    np: &NeighborParams,
    fp: &FootprintParams,
) -> Result<TopologySnapshot, GeometryError> {
    let neighbors = select_neighbors(states, np)?;
    let gateway_of = states
        .iter()
        .map(|s| associate_gateway(s.pos, gateway_eci, fp))
        .collect();
    Ok(TopologySnapshot { t, neighbors, gateway_of })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orbits::{record_from_elements, KeplerPropagator, Propagator};
    use crate::{EARTH_RADIUS_KM, MU_EARTH};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn mm_for_sma(a: f64) -> f64 {
        (MU_EARTH / (a * a * a)).sqrt() * 86_400.0 / std::f64::consts::TAU
    }

    fn circular_state(a: f64, incl: f64, raan: f64, phase: f64) -> EciState {
        let rec = record_from_elements(0, 0.0, incl, raan, 0.0, 0.0, phase, mm_for_sma(a));
        KeplerPropagator::default().state_at(&rec, 0.0).unwrap()
    }

    #[test]
    fn same_plane_separation_is_zero() {
        let a = circular_state(7000.0, 0.9, 0.4, 0.0);
        let b = circular_state(7000.0, 0.9, 0.4, 2.0);
        assert!(plane_separation(&a, &b).unwrap() < 1e-12);
    }

    #[test]
    fn equatorial_vs_polar_is_right_angle() {
        let a = circular_state(7000.0, 0.0, 0.0, 0.0);
        let b = circular_state(7000.0, std::f64::consts::FRAC_PI_2, 0.0, 0.5);
        assert!((plane_separation(&a, &b).unwrap() - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn matches_spherical_trig_closed_form() {
        // cos(phi) = cos^2(i) + sin^2(i) cos(dRAAN) for equal inclinations
        let i = 53.0_f64.to_radians();
        let draan = 10.0_f64.to_radians();
        let a = circular_state(7000.0, i, 0.0, 0.3);
        let b = circular_state(7000.0, i, draan, 1.1);
        let expected = (i.cos().powi(2) + i.sin().powi(2) * draan.cos()).acos();
        assert!((plane_separation(&a, &b).unwrap() - expected).abs() < 1e-9);
    }

    #[test]
    fn retrograde_coplanar_reads_zero() {
        let a = circular_state(7000.0, 0.0, 0.0, 0.0);
        let mut b = circular_state(7000.0, 0.0, 0.0, 1.0);
        b.vel = -b.vel;
        assert!(plane_separation(&a, &b).unwrap() < 1e-12);
    }

    #[test]
    fn zero_angular_momentum_is_an_error() {
        let a = circular_state(7000.0, 0.0, 0.0, 0.0);
        let b = EciState { pos: Vec3::new(7000.0, 0.0, 0.0), vel: Vec3::new(1.0, 0.0, 0.0) };
        assert!(plane_separation(&a, &b).is_err());
    }

    #[test]
    fn range_mask_excludes_far_satellite() {
        // coplanar satellites at increasing phase; with R_max between the
        // two spacings only the near one survives
        let s0 = circular_state(7000.0, 0.0, 0.0, 0.0);
        let s1 = circular_state(7000.0, 0.0, 0.0, 100.0 / 7000.0);
        let s2 = circular_state(7000.0, 0.0, 0.0, 200.0 / 7000.0);
        let params = NeighborParams {
            max_neighbors: 2,
            max_range_km: 150.0,
            max_plane_angle: 1.0,
        };
        let n = select_neighbors(&[s0, s1, s2], &params).unwrap();
        assert_eq!(n[0], vec![1]);
    }

    fn random_instance(rng: &mut ChaCha8Rng, n: usize) -> Vec<EciState> {
        (0..n)
            .map(|_| {
                circular_state(
                    EARTH_RADIUS_KM + 500.0 + rng.random_range(0.0..200.0),
                    rng.random_range(0.0..std::f64::consts::FRAC_PI_2),
                    rng.random_range(0.0..std::f64::consts::TAU),
                    rng.random_range(0.0..std::f64::consts::TAU),
                )
            })
            .collect()
    }

    /// Brute-force oracle: enumerate all feasible subsets of size
    /// min(M, |F|) and take the one minimizing the distance sum, ties by
    /// lexicographically smallest id set.
    fn brute_force_neighbors(
        states: &[EciState],
        params: &NeighborParams,
        k: usize,
    ) -> Vec<usize> {
        let feasible: Vec<usize> = (0..states.len())
            .filter(|&j| {
                j != k
                    && states[k].pos.distance(states[j].pos) <= params.max_range_km
                    && plane_separation(&states[k], &states[j]).unwrap()
                        <= params.max_plane_angle
            })
            .collect();
        let m = params.max_neighbors.min(feasible.len());
        if m == 0 {
            return Vec::new();
        }
        let mut best: Option<(f64, Vec<usize>)> = None;
        let nf = feasible.len();
        for mask in 0u32..(1 << nf) {
            if mask.count_ones() as usize != m {
                continue;
            }
            let subset: Vec<usize> = (0..nf)
                .filter(|&i| mask & (1 << i) != 0)
                .map(|i| feasible[i])
                .collect();
            let cost: f64 =
                subset.iter().map(|&j| states[k].pos.distance(states[j].pos)).sum();
            match &best {
                Some((c, _)) if *c <= cost + 1e-12 => {}
                _ => best = Some((cost, subset)),
            }
        }
        let mut ids = best.unwrap().1;
        ids.sort_by(|&a, &b| {
            states[k]
                .pos
                .distance(states[a].pos)
                .partial_cmp(&states[k].pos.distance(states[b].pos))
                .unwrap()
                .then(a.cmp(&b))
        });
        ids
    }

    #[test]
    fn neighbor_selection_matches_subset_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let params = NeighborParams {
            max_neighbors: 3,
            max_range_km: 4000.0,
            max_plane_angle: 0.8,
        };
        for _ in 0..50 {
            let states = random_instance(&mut rng, 8);
            let selected = select_neighbors(&states, &params).unwrap();
            for k in 0..states.len() {
                assert_eq!(selected[k], brute_force_neighbors(&states, &params, k));
            }
        }
    }

    #[test]
    fn neighbor_lists_respect_masks_and_size() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let params = NeighborParams {
            max_neighbors: 4,
            max_range_km: 5000.0,
            max_plane_angle: 1.0,
        };
        let states = random_instance(&mut rng, 12);
        let selected = select_neighbors(&states, &params).unwrap();
        for (k, ns) in selected.iter().enumerate() {
            assert!(ns.len() <= 4);
            for &m in ns {
                assert_ne!(m, k);
                assert!(states[k].pos.distance(states[m].pos) <= params.max_range_km);
                assert!(
                    plane_separation(&states[k], &states[m]).unwrap()
                        <= params.max_plane_angle
                );
            }
        }
    }

    #[test]
    fn enlarging_masks_never_shrinks_lists() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let states = random_instance(&mut rng, 10);
        let tight = NeighborParams {
            max_neighbors: 6,
            max_range_km: 3000.0,
            max_plane_angle: 0.5,
        };
        let loose = NeighborParams {
            max_neighbors: 6,
            max_range_km: 6000.0,
            max_plane_angle: 1.2,
        };
        let a = select_neighbors(&states, &tight).unwrap();
        let b = select_neighbors(&states, &loose).unwrap();
        for k in 0..states.len() {
            assert!(b[k].len() >= a[k].len());
        }
    }

    fn fp() -> FootprintParams {
        FootprintParams {
            min_elevation: 25.0_f64.to_radians(),
            earth_radius_km: EARTH_RADIUS_KM,
        }
    }

    #[test]
    fn zenith_satellite_is_in_footprint() {
        let site = Vec3::new(EARTH_RADIUS_KM, 0.0, 0.0);
        let sat = site * ((EARTH_RADIUS_KM + 550.0) / EARTH_RADIUS_KM);
        assert!(in_footprint(sat, site, &fp()));
    }

    #[test]
    fn antipodal_satellite_is_not_in_footprint() {
        let site = Vec3::new(EARTH_RADIUS_KM, 0.0, 0.0);
        let sat = -site * ((EARTH_RADIUS_KM + 550.0) / EARTH_RADIUS_KM);
        assert!(!in_footprint(sat, site, &fp()));
    }

    /// Independent elevation oracle from local-horizon geometry: elevation
    /// is the angle between the site->satellite vector and the horizon
    /// plane, computed via the zenith angle.
    fn elevation_oracle(sat: Vec3, site: Vec3) -> f64 {
        let up = site.normalized();
        let to_sat = (sat - site).normalized();
        std::f64::consts::FRAC_PI_2 - up.dot(to_sat).clamp(-1.0, 1.0).acos()
    }

    #[test]
    fn footprint_transition_matches_elevation_oracle() {
        let params = fp();
        let alt = EARTH_RADIUS_KM + 550.0;
        let mut prev_inside = true;
        let mut transition_deg = None;
        let mut oracle_deg = None;
        let mut offset = 0.0_f64;
        while offset <= 15.0 {
            let theta = offset.to_radians();
            let site = Vec3::new(EARTH_RADIUS_KM, 0.0, 0.0);
            let sat = Vec3::new(alt * theta.cos(), alt * theta.sin(), 0.0);
            let inside = in_footprint(sat, site, &params);
            let elev_ok = elevation_oracle(sat, site) >= params.min_elevation;
            if prev_inside && !inside && transition_deg.is_none() {
                transition_deg = Some(offset);
            }
            if oracle_deg.is_none() && !elev_ok {
                oracle_deg = Some(offset);
            }
            prev_inside = inside;
            offset += 0.01;
        }
        let t = transition_deg.expect("no footprint transition found");
        let o = oracle_deg.expect("no oracle transition found");
        assert!((t - o).abs() <= 0.011, "transition {t} vs oracle {o}");
    }

    #[test]
    fn gateway_association_prefers_closest_visible() {
        let params = fp();
        let site_a = Vec3::new(EARTH_RADIUS_KM, 0.0, 0.0);
        let theta = 2.0_f64.to_radians();
        let site_b = Vec3::new(EARTH_RADIUS_KM * theta.cos(), EARTH_RADIUS_KM * theta.sin(), 0.0);
        let sat = site_b * ((EARTH_RADIUS_KM + 550.0) / EARTH_RADIUS_KM);
        assert_eq!(associate_gateway(sat, &[site_a, site_b], &params), Some(1));
        assert_eq!(associate_gateway(sat, &[site_a], &params), Some(0));
        assert_eq!(associate_gateway(-sat, &[site_a, site_b], &params), None);
    }

    #[test]
    fn association_consistent_with_footprint() {
        let params = fp();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sites: Vec<Vec3> = (0..6)
            .map(|_| {
                let lat: f64 = rng.random_range(-1.4..1.4);
                let lon: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                Vec3::new(
                    EARTH_RADIUS_KM * lat.cos() * lon.cos(),
                    EARTH_RADIUS_KM * lat.cos() * lon.sin(),
                    EARTH_RADIUS_KM * lat.sin(),
                )
            })
            .collect();
        for _ in 0..200 {
            let s = random_instance(&mut rng, 1);
            let any_visible = sites.iter().any(|&h| in_footprint(s[0].pos, h, &params));
            assert_eq!(associate_gateway(s[0].pos, &sites, &params).is_some(), any_visible);
        }
    }
}

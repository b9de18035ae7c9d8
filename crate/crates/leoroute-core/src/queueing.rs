//! Queue dynamics: apply a slot's scheduling decisions under capacity and
//! feasibility constraints and advance the queue vector.
//!
//! Packets are integers; capacities are floored at the point of transfer.
//! Within a slot arrivals, ISL receptions, and transmissions compose
//! simultaneously: a packet received over an ISL at slot t becomes eligible
//! for forwarding at t+1.

use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum QueueError {
    #[error("infeasible flows at satellite {sat}: v + d = {outflow} exceeds queue {queue}")]
    Infeasible { sat: usize, outflow: u64, queue: u64 },
    #[error("flow vectors have inconsistent lengths")]
    LengthMismatch,
}

/// Per-satellite queue lengths at slot `t`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueueState {
    pub q: Vec<u64>,
    pub t: usize,
}

impl QueueState {
    pub fn zeros(n: usize) -> Self {
        Self { q: vec![0; n], t: 0 }
    }

    pub fn total(&self) -> u64 {
        self.q.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.total() as f64 / self.q.len() as f64
    }

    pub fn max(&self) -> u64 {
        self.q.iter().copied().max().unwrap_or(0)
    }
}

/// A policy's desired transfer on one directed link, with the policy score
/// used to decide which links get cut first when the queue budget binds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkDemand {
    pub from: usize,
    pub to: usize,
    pub packets: u64,
    pub score: f64,
}

/// Feasible per-slot activation decisions.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LinkSchedule {
    /// (k, m) -> packets forwarded k to m.
    pub isl_packets: BTreeMap<(usize, usize), u64>,
    /// Packets offloaded to the associated gateway per satellite.
    pub gateway_packets: Vec<u64>,
}

/// Realized flows of one slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotFlows {
    pub sent_isl: Vec<u64>,
    pub recv_isl: Vec<u64>,
    pub sent_gw: Vec<u64>,
    pub arrivals: Vec<u64>,
}

impl SlotFlows {
    pub fn zeros(n: usize) -> Self {
        Self {
            sent_isl: vec![0; n],
            recv_isl: vec![0; n],
            sent_gw: vec![0; n],
            arrivals: vec![0; n],
        }
    }

    pub fn from_schedule(schedule: &LinkSchedule, arrivals: Vec<u64>) -> Self {
        let n = arrivals.len();
        let mut sent_isl = vec![0; n];
        let mut recv_isl = vec![0; n];
        for (&(k, m), &w) in &schedule.isl_packets {
            sent_isl[k] += w;
            recv_isl[m] += w;
        }
        Self { sent_isl, recv_isl, sent_gw: schedule.gateway_packets.clone(), arrivals }
    }
}

/// Gateway offload: min(queue, floored LG capacity) when a gateway is
/// visible, zero otherwise.
pub fn gateway_offload(q_k: u64, visible: bool, capacity_packets: f64) -> u64 {
    if visible {
        q_k.min(capacity_packets.max(0.0).floor() as u64)
    } else {
        0
    }
}

/// Enforce the per-link capacity bound and the per-satellite queue
/// feasibility constraint v_k + sum_m w_{k->m} <= Q_k.
///
/// Each demand is first clipped to its floored capacity. If a satellite's
/// total outflow then exceeds its queue, gateway offload keeps priority and
/// ISL sends are reduced lowest-score-first (equivalently: budget is granted
/// highest-score-first, ties by ascending (from, to)).
pub fn clamp_schedule(
    raw: &[LinkDemand],
    q: &QueueState,
    caps: &BTreeMap<(usize, usize), f64>,
    v: &[u64],
) -> LinkSchedule {
    let n = q.q.len();
    let mut per_sat: Vec<Vec<LinkDemand>> = vec![Vec::new(); n];
    for d in raw {
        let cap = caps.get(&(d.from, d.to)).copied().unwrap_or(0.0);
        let w = d.packets.min(cap.max(0.0).floor() as u64);
        if w > 0 {
            per_sat[d.from].push(LinkDemand { packets: w, ..*d });
        }
    }

    let mut isl_packets = BTreeMap::new();
    for (k, demands) in per_sat.iter_mut().enumerate() {
        let mut budget = q.q[k].saturating_sub(v[k]);
        demands.sort_by(|a, b| {
            b.score
                .partial_cmp(&a.score)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then((a.from, a.to).cmp(&(b.from, b.to)))
        });
        for d in demands.iter() {
            let w = d.packets.min(budget);
            budget -= w;
            if w > 0 {
                isl_packets.insert((d.from, d.to), w);
            }
        }
    }
    LinkSchedule { isl_packets, gateway_packets: v.to_vec() }
}

/// Advance queues by one slot: Q(t+1) = (Q + u + r - v - d)^+ per satellite.
/// Infeasible flows (v + d > Q) signal a policy bug and are rejected.
pub fn step_queues(q: &QueueState, flows: &SlotFlows) -> Result<QueueState, QueueError> {
    let n = q.q.len();
    if flows.sent_isl.len() != n
        || flows.recv_isl.len() != n
        || flows.sent_gw.len() != n
        || flows.arrivals.len() != n
    {
        return Err(QueueError::LengthMismatch);
    }
    let mut next = Vec::with_capacity(n);
    for k in 0..n {
        let outflow = flows.sent_gw[k] + flows.sent_isl[k];
        if outflow > q.q[k] {
            return Err(QueueError::Infeasible { sat: k, outflow, queue: q.q[k] });
        }
        // the (.)+ in the recursion is redundant given feasibility, kept
        // via saturating arithmetic
        let inflow = flows.arrivals[k] + flows.recv_isl[k];
        next.push((q.q[k] + inflow).saturating_sub(outflow));
    }
    Ok(QueueState { q: next, t: q.t + 1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn offload_branches() {
        assert_eq!(gateway_offload(500, false, 100.7), 0);
        assert_eq!(gateway_offload(5, true, 100.7), 5);
        assert_eq!(gateway_offload(500, true, 100.7), 100);
        assert_eq!(gateway_offload(500, true, -3.0), 0);
    }

    #[test]
    fn clamp_zero_demand_is_zero_schedule() {
        let q = QueueState { q: vec![10, 10], t: 0 };
        let caps = BTreeMap::from([((0, 1), 8.0)]);
        let s = clamp_schedule(&[], &q, &caps, &[0, 0]);
        assert!(s.isl_packets.is_empty());
    }

    #[test]
    fn gateway_priority_exhausts_queue() {
        let q = QueueState { q: vec![10, 0], t: 0 };
        let caps = BTreeMap::from([((0, 1), 50.0)]);
        let raw = [LinkDemand { from: 0, to: 1, packets: 50, score: 1.0 }];
        let s = clamp_schedule(&raw, &q, &caps, &[10, 0]);
        assert!(s.isl_packets.is_empty());
    }

    #[test]
    fn budget_granted_by_descending_score() {
        // q=10, v=0, two links each demanding 8 with caps 8, scores 5 and 3:
        // the score-5 link keeps 8, the score-3 link gets 2
        let q = QueueState { q: vec![10, 0, 0], t: 0 };
        let caps = BTreeMap::from([((0, 1), 8.0), ((0, 2), 8.0)]);
        let raw = [
            LinkDemand { from: 0, to: 1, packets: 8, score: 3.0 },
            LinkDemand { from: 0, to: 2, packets: 8, score: 5.0 },
        ];
        let s = clamp_schedule(&raw, &q, &caps, &[0, 0, 0]);
        assert_eq!(s.isl_packets.get(&(0, 2)), Some(&8));
        assert_eq!(s.isl_packets.get(&(0, 1)), Some(&2));
    }

    /// Exhaustive oracle: maximize total score-weighted sent packets under
    /// the capacity and queue-budget constraints for one satellite.
    fn best_allocation(demands: &[LinkDemand], budget: u64) -> f64 {
        fn rec(demands: &[LinkDemand], budget: u64, idx: usize) -> f64 {
            if idx == demands.len() {
                return 0.0;
            }
            let mut best = f64::NEG_INFINITY;
            for w in 0..=demands[idx].packets.min(budget) {
                let v = demands[idx].score * w as f64 + rec(demands, budget - w, idx + 1);
                if v > best {
                    best = v;
                }
            }
            best
        }
        rec(demands, budget, 0)
    }

    #[test]
    fn clamp_maximizes_score_weighted_packets() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let budget: u64 = rng.random_range(0..15);
            let n_links = rng.random_range(1..4usize);
            let demands: Vec<LinkDemand> = (0..n_links)
                .map(|i| LinkDemand {
                    from: 0,
                    to: i + 1,
                    packets: rng.random_range(0..10),
                    score: rng.random_range(0.1..5.0),
                })
                .collect();
            let q = QueueState { q: vec![budget, 0, 0, 0, 0], t: 0 };
            let caps: BTreeMap<(usize, usize), f64> =
                demands.iter().map(|d| ((d.from, d.to), d.packets as f64)).collect();
            let s = clamp_schedule(&demands, &q, &caps, &[0, 0, 0, 0, 0]);
            let achieved: f64 = demands
                .iter()
                .map(|d| {
                    d.score * *s.isl_packets.get(&(d.from, d.to)).unwrap_or(&0) as f64
                })
                .sum();
            let oracle = best_allocation(&demands, budget);
            assert!((achieved - oracle).abs() < 1e-9, "{achieved} vs {oracle}");
        }
    }

    #[test]
    fn step_fixed_point_and_substitution() {
        let q0 = QueueState::zeros(1);
        let z = SlotFlows::zeros(1);
        assert_eq!(step_queues(&q0, &z).unwrap().q, vec![0]);

        let q = QueueState { q: vec![10], t: 3 };
        let flows = SlotFlows {
            sent_isl: vec![1],
            recv_isl: vec![2],
            sent_gw: vec![4],
            arrivals: vec![3],
        };
        let next = step_queues(&q, &flows).unwrap();
        assert_eq!(next.q, vec![10]);
        assert_eq!(next.t, 4);
    }

    #[test]
    fn infeasible_flows_rejected() {
        let q = QueueState { q: vec![3], t: 0 };
        let flows = SlotFlows {
            sent_isl: vec![2],
            recv_isl: vec![0],
            sent_gw: vec![2],
            arrivals: vec![0],
        };
        assert!(matches!(
            step_queues(&q, &flows),
            Err(QueueError::Infeasible { sat: 0, outflow: 4, queue: 3 })
        ));
    }

    #[test]
    fn conservation_over_random_feasible_run() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 50;
        let mut q = QueueState { q: (0..n).map(|_| rng.random_range(0..100)).collect(), t: 0 };
        for _ in 0..200 {
            // random feasible schedule: route some packets around a ring,
            // offload some
            let mut caps = BTreeMap::new();
            let mut raw = Vec::new();
            for k in 0..n {
                let m = (k + 1) % n;
                caps.insert((k, m), rng.random_range(0.0..20.0));
                raw.push(LinkDemand {
                    from: k,
                    to: m,
                    packets: rng.random_range(0..25),
                    score: rng.random_range(0.0..1.0),
                });
            }
            let v: Vec<u64> = (0..n)
                .map(|k| gateway_offload(q.q[k], rng.random_range(0..3) == 0, 15.0))
                .collect();
            let schedule = clamp_schedule(&raw, &q, &caps, &v);
            let arrivals: Vec<u64> = (0..n).map(|_| rng.random_range(0..10)).collect();
            let flows = SlotFlows::from_schedule(&schedule, arrivals);

            let sum_d: u64 = flows.sent_isl.iter().sum();
            let sum_r: u64 = flows.recv_isl.iter().sum();
            assert_eq!(sum_d, sum_r, "ISL flow not conserved");

            let before = q.total();
            let sum_u: u64 = flows.arrivals.iter().sum();
            let sum_v: u64 = flows.sent_gw.iter().sum();
            q = step_queues(&q, &flows).unwrap();
            assert_eq!(q.total(), before + sum_u - sum_v);
        }
    }

    #[test]
    fn no_isl_reduces_to_arrival_minus_offload() {
        let q = QueueState { q: vec![7, 2], t: 0 };
        let flows = SlotFlows {
            sent_isl: vec![0, 0],
            recv_isl: vec![0, 0],
            sent_gw: vec![5, 0],
            arrivals: vec![1, 4],
        };
        assert_eq!(step_queues(&q, &flows).unwrap().q, vec![3, 6]);
    }
}

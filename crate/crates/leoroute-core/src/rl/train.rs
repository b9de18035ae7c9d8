//! Episode-based training of the residual double-Q agent and the greedy
//! evaluation policy built from a trained network.
//!
//! Each training episode replays the same environment realization (the env
//! stream is reseeded from the base seed at every episode start) while the
//! exploration stream persists across episodes, so reward changes across
//! episodes reflect policy changes only.
//!
//! Reward: a paired counterfactual rollout against plain backpressure.
//! Inter-satellite transfers conserve the total queue, so the value of a
//! routing decision only shows up through later gateway offload. Each
//! slot's decision therefore spawns two branches from the same state — one
//! with the agent's schedule, one with backpressure's — both continued
//! under backpressure on the identical subsequent draws for a fixed
//! horizon, and the reward is the negative mean/max queue gap between the
//! branch endpoints. Replaying backpressure exactly yields zero reward.

use crate::policies::{backpressure_schedule, Policy, PolicyInput};
use crate::queueing::{LinkDemand, SlotFlows};
use crate::rl::agent::{
    act, compute_reward, encode_links, residual_demands, FeatureScaler, RewardWeights, RlError,
    FEATURE_DIM,
};
use crate::rl::nn::{Adam, Mlp};
use crate::rl::replay::{ReplayBuffer, Transition};
use crate::sim::episode::{advance_slot, env_rng, policy_rng, Scenario};
use crate::sim::SimError;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub episodes: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_anneal_fraction: f64,
    pub target_sync_steps: u64,
    pub train_every: usize,
    pub rollout_horizon: usize,
    pub hidden: Vec<usize>,
    pub reward: RewardWeights,
    /// Gateway-capacity weight of the LG-aware prior the agent refines.
    pub lambda: f64,
    pub seed: u64,
}

impl TrainConfig {
    pub fn from_sections(
        rl: &crate::sim::config::RlSection,
        policy: &crate::sim::config::PolicySection,
        seed: u64,
    ) -> Self {
        Self {
            episodes: rl.episodes,
            learning_rate: rl.learning_rate,
            batch_size: rl.batch_size,
            buffer_capacity: rl.buffer_capacity,
            epsilon_start: rl.epsilon_start,
            epsilon_end: rl.epsilon_end,
            epsilon_anneal_fraction: rl.epsilon_anneal_fraction,
            target_sync_steps: rl.target_sync_steps,
            train_every: rl.train_every,
            rollout_horizon: rl.rollout_horizon,
            hidden: rl.hidden.clone(),
            reward: RewardWeights {
                mean_weight: rl.reward_mean_weight,
                max_weight: rl.reward_max_weight,
                discount: rl.discount,
            },
            lambda: policy.lg_bp_weight,
            seed,
        }
    }
}

/// Per-episode training diagnostics.
#[derive(Debug, Clone)]
pub struct EpisodeLog {
    pub episode: usize,
    pub cumulative_reward: f64,
    pub epsilon: f64,
    pub mean_loss: f64,
    pub gradient_steps: u64,
    pub final_mean_q: f64,
}

struct PendingLink {
    link: (usize, usize),
    feature: Vec<f64>,
    action: usize,
}

/// Bind next-state features to a slot's pending links; rewards are filled
/// in once the counterfactual rollout matures.
fn bind_transitions(
    pending: Vec<PendingLink>,
    next_features: Option<&BTreeMap<(usize, usize), Vec<f64>>>,
) -> Vec<Transition> {
    pending
        .into_iter()
        .map(|p| {
            let (next_feature, done) = match next_features.and_then(|m| m.get(&p.link)) {
                Some(f) => (f.clone(), false),
                // episode end or the link disappeared from the topology
                None => (vec![0.0; FEATURE_DIM], true),
            };
            Transition {
                feature: p.feature,
                action: p.action,
                reward: 0.0,
                next_feature,
                done,
            }
        })
        .collect()
}

/// One slot's decision awaiting its paired rollout comparison.
struct OutstandingReward {
    transitions: Vec<Transition>,
    /// Agent's branch: its realized next state, then backpressure onward.
    agent_branch: crate::queueing::QueueState,
    /// Counterfactual branch: backpressure from the same origin state.
    cf_branch: crate::queueing::QueueState,
    age: usize,
}

fn bp_step(
    draw: &crate::sim::episode::SlotDraw,
    q: &crate::queueing::QueueState,
) -> Result<crate::queueing::QueueState, SimError> {
    let input = draw.policy_input(q.clone());
    let demands: Vec<LinkDemand> = backpressure_schedule(&input);
    let (_, next) = advance_slot(draw, q, &demands)?;
    Ok(next)
}

/// Train the residual agent; returns the online network and per-episode
/// logs. Deterministic for a fixed scenario and config.
pub fn train(scn: &Scenario, cfg: &TrainConfig) -> Result<(Mlp, Vec<EpisodeLog>), SimError> {
    let (d_isl, d_lg) = scn.feature_norms();
    let mut init_rng = policy_rng(cfg.seed.wrapping_add(0x5eed));
    let mut dims = vec![FEATURE_DIM];
    dims.extend_from_slice(&cfg.hidden);
    dims.push(2);
    let mut online = Mlp::new(&dims, &mut init_rng);
    // zero head: episode 0 under greedy ties acts exactly like the prior
    online.zero_output_head();
    let mut target = online.clone();
    let mut opt = Adam::new(&online, cfg.learning_rate, 10.0);
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity);
    let mut explore = policy_rng(cfg.seed);
    let mut sample_rng = policy_rng(cfg.seed.wrapping_add(0xb00f));

    let total_env_steps = (cfg.episodes * scn.grid.num_slots) as f64;
    let anneal_steps = (total_env_steps * cfg.epsilon_anneal_fraction).max(1.0);
    let mut env_step: u64 = 0;
    let mut grad_steps: u64 = 0;
    let mut logs = Vec::with_capacity(cfg.episodes);

    for episode in 0..cfg.episodes {
        let mut env = env_rng(cfg.seed);
        let n = scn.num_satellites();
        let mut q = crate::queueing::QueueState::zeros(n);
        let mut prev_flows = SlotFlows::zeros(n);
        let mut scaler = FeatureScaler::new(20 * n);
        let mut pending: Vec<PendingLink> = Vec::new();
        // backpressure's alternative outcome of the previous slot, becoming
        // the counterfactual branch once next-state features are known
        let mut prev_cf: Option<crate::queueing::QueueState> = None;
        let mut outstanding: Vec<OutstandingReward> = Vec::new();
        let mut cumulative_reward = 0.0;
        let mut loss_sum = 0.0;
        let mut loss_count = 0u64;
        let mut epsilon = cfg.epsilon_start;

        for t in 0..scn.grid.num_slots {
            let draw = scn.draw_slot(t, &mut env)?;
            scaler.observe(&q);
            let input = draw.policy_input(q.clone());
            let features =
                encode_links(&input, &prev_flows, scaler.queue_scale(), d_isl, d_lg, cfg.lambda);

            // the previous slot's decision becomes an outstanding rollout:
            // agent branch starts at the realized current state, the
            // counterfactual at backpressure's alternative outcome
            if let Some(cf) = prev_cf.take() {
                let map: BTreeMap<(usize, usize), Vec<f64>> =
                    features.iter().cloned().collect();
                outstanding.push(OutstandingReward {
                    transitions: bind_transitions(std::mem::take(&mut pending), Some(&map)),
                    agent_branch: q.clone(),
                    cf_branch: cf,
                    age: 0,
                });
            }

            // advance every outstanding pair one backpressure step on this
            // slot's draw; mature ones are compared and stored
            for o in &mut outstanding {
                o.agent_branch = bp_step(&draw, &o.agent_branch)?;
                o.cf_branch = bp_step(&draw, &o.cf_branch)?;
                o.age += 1;
            }
            let matured = cfg.rollout_horizon.max(1);
            for mut o in outstanding.extract_if(.., |o| o.age >= matured) {
                let reward = compute_reward(&o.agent_branch, &o.cf_branch, &cfg.reward);
                cumulative_reward += reward;
                for mut tr in o.transitions.drain(..) {
                    tr.reward = reward;
                    buffer.push(tr);
                }
            }

            let frac = (env_step as f64 / anneal_steps).min(1.0);
            epsilon = cfg.epsilon_start + (cfg.epsilon_end - cfg.epsilon_start) * frac;
            // greedy actions plus at most one randomly flipped link per
            // slot: the slot reward is shared by every link transition, so
            // exploring one link at a time keeps the credit assignment
            // clean instead of mixing many simultaneous deviations
            let mut actions = act(&features, &online, 0.0, &mut explore);
            if !actions.is_empty() && explore.random::<f64>() < epsilon {
                let i = explore.random_range(0..actions.len());
                actions[i].1 = 1 - actions[i].1;
            }
            let demands = residual_demands(&input, cfg.lambda, &actions);
            let (flows, next) = advance_slot(&draw, &q, &demands)?;

            // backpressure's alternative outcome of this same slot
            let bp_demands: Vec<LinkDemand> = backpressure_schedule(&input);
            let (_, bp_next) = advance_slot(&draw, &q, &bp_demands)?;

            pending = features
                .iter()
                .zip(&actions)
                .map(|((link, f), (_, a))| PendingLink {
                    link: *link,
                    feature: f.clone(),
                    action: *a,
                })
                .collect();
            prev_cf = Some(bp_next);

            q = next;
            prev_flows = flows;
            env_step += 1;

            if buffer.len() >= cfg.batch_size && t % cfg.train_every == 0 {
                let loss = crate::rl::agent::train_step(
                    &buffer,
                    &mut online,
                    &target,
                    &mut opt,
                    &cfg.reward,
                    cfg.batch_size,
                    grad_steps,
                    &mut sample_rng,
                )?;
                grad_steps += 1;
                loss_sum += loss;
                loss_count += 1;
                if grad_steps % cfg.target_sync_steps == 0 {
                    target = online.clone();
                }
            }
        }
        // episode end: compare still-open rollouts at their current depth
        for mut o in outstanding.drain(..) {
            let reward = compute_reward(&o.agent_branch, &o.cf_branch, &cfg.reward);
            cumulative_reward += reward;
            for mut tr in o.transitions.drain(..) {
                tr.reward = reward;
                buffer.push(tr);
            }
        }
        // the final slot has no follow-up draw at all; store its
        // transitions as terminal with zero reward
        for tr in bind_transitions(pending, None) {
            buffer.push(tr);
        }

        logs.push(EpisodeLog {
            episode,
            cumulative_reward,
            epsilon,
            mean_loss: if loss_count > 0 { loss_sum / loss_count as f64 } else { 0.0 },
            gradient_steps: grad_steps,
            final_mean_q: q.mean(),
        });
    }
    Ok((online, logs))
}

/// Greedy evaluation policy around a trained network: follow/flip the
/// LG-aware backpressure activation per link, no exploration.
pub struct ResidualPolicy {
    net: Mlp,
    lambda: f64,
    d_isl: f64,
    d_lg: f64,
    scaler: FeatureScaler,
}

impl ResidualPolicy {
    pub fn new(net: Mlp, lambda: f64, scn: &Scenario) -> Result<Self, RlError> {
        if net.input_dim() != FEATURE_DIM || net.output_dim() != 2 {
            return Err(RlError::Nn(crate::rl::nn::NnError::BadCheckpoint(format!(
                "expected a {FEATURE_DIM}-in 2-out network, got {}-in {}-out",
                net.input_dim(),
                net.output_dim()
            ))));
        }
        let (d_isl, d_lg) = scn.feature_norms();
        Ok(Self {
            net,
            lambda,
            d_isl,
            d_lg,
            scaler: FeatureScaler::new(20 * scn.num_satellites().max(1)),
        })
    }
}

impl Policy for ResidualPolicy {
    fn demands(
        &mut self,
        input: &PolicyInput,
        prev_flows: &SlotFlows,
        rng: &mut ChaCha8Rng,
    ) -> Vec<LinkDemand> {
        self.scaler.observe(&input.q);
        let features = encode_links(
            input,
            prev_flows,
            self.scaler.queue_scale(),
            self.d_isl,
            self.d_lg,
            self.lambda,
        );
        let actions = act(&features, &self.net, 0.0, rng);
        residual_demands(input, self.lambda, &actions)
    }
}

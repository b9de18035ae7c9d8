//! Residual reinforcement learning on top of the LG-aware backpressure
//! prior: network, replay, per-link agent, and the episode trainer.

pub mod agent;
pub mod nn;
pub mod replay;
pub mod train;

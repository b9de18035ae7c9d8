//! Scenario resolution, episode execution, multi-seed experiments, and
//! deterministic result files.

pub mod config;
pub mod episode;
pub mod experiment;
pub mod output;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("cannot read `{0}`: {1}")]
    Io(String, std::io::Error),
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error(transparent)]
    Time(#[from] crate::time::TimeError),
    #[error(transparent)]
    Orbit(#[from] crate::orbits::OrbitError),
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
    #[error(transparent)]
    Channel(#[from] crate::channel::ChannelError),
    #[error(transparent)]
    Traffic(#[from] crate::traffic::TrafficError),
    #[error(transparent)]
    Queue(#[from] crate::queueing::QueueError),
    #[error(transparent)]
    Rl(#[from] crate::rl::agent::RlError),
    #[error(transparent)]
    Nn(#[from] crate::rl::nn::NnError),
    #[error("{0}")]
    Scenario(String),
}

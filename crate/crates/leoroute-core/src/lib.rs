//! Time-slotted simulator of opportunistic packet routing in a LEO
//! constellation delivering traffic to terrestrial gateways.
//!
//! The crate is organized as a per-slot pipeline:
//! orbit propagation ([`orbits`]) -> topology ([`geometry`]) -> link
//! capacities ([`channel`]) -> packet arrivals ([`traffic`]) -> scheduling
//! ([`policies`], [`rl`]) -> queue update ([`queueing`]), orchestrated by
//! [`sim`].

pub mod channel;
pub mod geometry;
pub mod orbits;
pub mod policies;
pub mod queueing;
pub mod rl;
pub mod sim;
pub mod time;
pub mod traffic;
pub mod vec3;

pub use vec3::Vec3;

/// Mean Earth radius in km (spherical Earth model).
pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// Earth gravitational parameter, km^3/s^2.
pub const MU_EARTH: f64 = 398_600.4418;

//! Jamming-aware sensor-to-gateway association.
//!
//! A multi-gateway sensor network (the leader) chooses which gateways to power
//! and which sensors to associate with them; a reactive jammer (the follower)
//! then picks the sensors to attack. The Stackelberg equilibrium of this game is
//! computed exactly by reducing it to a single 0-1 linear program solved with
//! the in-crate branch-and-bound solver.

pub mod bench;
pub mod bilp;
pub mod dynamics;
pub mod error;
pub mod game;
pub mod model;
pub mod stackelberg;

pub use error::{Error, Result};

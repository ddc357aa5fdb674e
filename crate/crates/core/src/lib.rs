//! Simulation and learning toolkit for pinching-antenna integrated sensing
//! and communication (ISAC).
//!
//! - [`physics`]: line-of-sight channel, TDMA rate and target SNR.
//! - [`env`]: the slot-level decision process with constraint projection.
//! - [`nn`]: dense networks with exact manual gradients and Adam.
//! - [`agents`]: maximum-entropy actor-critic, TD3, DDPG, random baseline.
//! - [`harness`]: config files, training campaigns, reports, plots and a
//!   grid-search oracle.

pub mod agents;
pub mod env;
pub mod harness;
pub mod nn;
pub mod physics;

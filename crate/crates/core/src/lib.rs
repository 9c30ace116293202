//! Simulation and estimation toolkit for a two-node entangled-photon
//! distributed phase-sensing network.
//!
//! Alice's photon passes her phase gate once and Bob's passes his twice, so
//! a polarisation-entangled pair senses the global phase
//! `theta_hat = (theta_A - 2 theta_B) / 3` through the fringe argument
//! `u = 3 theta_hat`. The crate models the lossy multi-pair source
//! ([`model`]), samples detector click patterns ([`simulator`]), classifies
//! and tallies them ([`events`]), fits fringes and estimates the phase
//! ([`estimation`]) and accounts for every photon without post-selection
//! ([`resources`]). [`randomphase`] and [`cli`] assemble complete runs.

pub mod cli;
pub mod error;
pub mod estimation;
pub mod events;
pub mod model;
pub mod randomphase;
pub mod resources;
pub mod simulator;

pub use error::{Error, Result};

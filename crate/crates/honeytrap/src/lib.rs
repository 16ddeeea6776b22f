//! Honeypot-venue simulation and detection for location-based social networks.
//!
//! Location-based social networks reward users for declaring presence at
//! venues, which makes *fake* check-ins attractive: gamers farm points and
//! mayorships, monetary cheaters unlock multi-visit deals without visiting.
//! This crate implements the provider-side counter-scheme end to end:
//!
//! * fabricated **honeypot venues** that no honest visit can reach, designed
//!   to maximize cheater check-in probability under a behavioral choice model
//!   ([`behavior`], [`honeypots`]);
//! * a running **suspiciousness level** per user with a threshold flagging
//!   rule and a challenge-response gate at deal venues ([`detector`]);
//! * a **recalibration loop** that re-estimates the choice model from flagged
//!   users' histories by maximum likelihood and feeds it back into honeypot
//!   design ([`learner`]);
//! * exact **monetary-loss accounting** for deal redemptions ([`economics`]);
//! * a seeded, fully deterministic round-based **simulation engine** and
//!   post-run analysis ([`sim`], [`metrics`]).
//!
//! Everything downstream of a [`config::SimConfig`] and a seed is
//! reproducible bit for bit; see [`rng`] for the generator contract.

pub mod behavior;
pub mod config;
pub mod detector;
pub mod economics;
pub mod error;
pub mod honeypots;
pub mod learner;
pub mod metrics;
pub mod money;
pub mod rng;
pub mod sim;
pub mod world;

pub use error::{Error, Result};

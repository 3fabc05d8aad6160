//! Multi-agent delegated search.
//!
//! A principal delegates the search for a good outcome to `k` agents, each
//! observing the realizations of their own independent elements. This crate
//! provides the model, the single-proposal / threshold / Myerson-type
//! mechanisms, adversarial and strategic agent behavior, exact and Monte
//! Carlo evaluation of the principal's utility, and the constructive
//! threshold plans and hard instances that bound the delegation gap.

pub mod agents;
pub mod bounds;
pub mod engine;
pub mod error;
pub mod mechanisms;
pub mod model;
pub mod rational;

pub use error::{Error, Result};
pub use rational::Rational;

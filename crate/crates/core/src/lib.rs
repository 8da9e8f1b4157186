//! Equilibrium solver and market simulator for quality-sponsored data.
//!
//! A content provider (CP) buys sponsored bits from a service provider (SP)
//! to guarantee the average quality its users see, while user demand reacts
//! to that quality from epoch to epoch. The crate computes the per-epoch
//! equilibrium, runs the repeated game, classifies where the market settles,
//! solves the cooperative bargaining problem and sweeps all of it over
//! parameter grids. Every closed form has a brute-force counterpart in
//! [`oracle`].

pub mod bargaining;
pub mod dynamics;
pub mod error;
pub mod fmt;
pub mod model;
pub mod oracle;
pub mod spne;
pub mod sweep;
pub mod verify;

pub use error::{Error, Result};
pub use model::{EpochDecision, MarketParams, ModelVariant, Trajectory};

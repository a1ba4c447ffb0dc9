//! Load-shedding optimization for transmission outages.
//!
//! A [`grid::Network`] is solved with an AC power flow and judged safe or
//! unsafe. A genetic algorithm then searches per-load serving fractions that
//! restore safety while keeping as much load served as possible, and the
//! [`contingency`] module screens every single-line outage of a network.

pub mod contingency;
pub mod error;
pub mod ga;
pub mod grid;
pub mod powerflow;
pub mod report;

pub use error::{Error, Result};

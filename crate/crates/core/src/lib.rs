//! Frequency selectivity and multiuser diversity for block-based OFDMA
//! proportional-fair scheduling.
//!
//! The crate is organised bottom-up:
//!
//! * [`channel`] synthesises Rayleigh multipath channels from a power delay
//!   profile and composes cyclic-delay-diversity (CDD) channels.
//! * [`selectivity`] holds the closed-form correlation calculus (subcarrier
//!   and block correlation, effective path and block counts, delay spreads).
//! * [`throughput`] gives moments of the block average throughput and the two
//!   analytic approximations of the expected best-block throughput.
//! * [`cdd`] selects per-user cyclic delays.
//! * [`scheduler`] is the Monte Carlo ground truth: PF scheduling with
//!   best-N feedback.
//! * [`experiments`] runs the sweep families used by the CLI.

pub mod cdd;
pub mod channel;
pub mod error;
pub mod experiments;
pub mod pdp_file;
pub mod rng;
pub mod scheduler;
pub mod selectivity;
pub mod stats;
pub mod throughput;

pub use error::{Error, Result};

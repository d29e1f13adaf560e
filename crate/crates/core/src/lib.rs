//! Exact and simulated answers to "how likely are two randomly filled packs
//! of `n` candies in `d` equally likely colors to be identical, and how many
//! packs does it take to see the first duplicate?"

pub mod cli;
pub mod coincidence;
pub mod error;
pub mod exactmath;
pub mod firstmatch;
pub mod highprec;
pub mod montecarlo;

pub use error::{Error, Result};

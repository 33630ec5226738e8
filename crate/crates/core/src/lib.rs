//! Weighted-majority elections and the information markets that implement them.
//!
//! Agents receive independent binary signals about a hidden state, form Bayesian
//! beliefs, and either vote (weighted majority) or trade a pair of Arrow
//! securities. The crate solves Naive, Kelly and taxed-Kelly markets for their
//! competitive-equilibrium price, runs the matching elections, checks that the
//! two routes reach the same decision, and measures how often each aggregator
//! tracks the true state.
//!
//! Module map:
//!
//! * [`model`]: competences, signals, beliefs, binarization, signal-space enumeration
//! * [`voting`]: weighted majority and the egalitarian / linear / log-odds weight schemes
//! * [`markets`]: prices, payouts, utilities, best responses and equilibrium solvers
//! * [`oracle`]: brute-force grid and enumeration cross-checks, independent of the solvers
//! * [`equivalence`]: election-vs-market agreement checks
//! * [`accuracy`]: exact and Monte Carlo group accuracy

pub mod accuracy;
pub mod equivalence;
mod error;
pub mod markets;
pub mod model;
pub mod oracle;
pub mod voting;

pub use error::{Error, Result};

/// Absolute tolerance used when deciding whether a weighted margin or a price
/// sits exactly on the tie boundary.
pub const TIE_TOLERANCE: f64 = 1e-12;

//! Elections and markets reach the same decision: simple majority matches
//! the naive market, `2q - 1` weights match the Kelly market, and log-odds
//! weights match the taxed market in the large-`k` limit.

use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::markets::{market_decision, MarketKind, TaxParams};
use crate::model::{
    beliefs_from_signals, CompetenceProfile, Decision, SignalProfile, ENUMERATION_CAP,
};
use crate::voting::{weighted_margin, VotingProfile, WeightScheme};
use crate::{Error, Result, TIE_TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    SimpleNaive,
    LinearKelly,
    LogOddsTaxed,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [
        Scheme::SimpleNaive,
        Scheme::LinearKelly,
        Scheme::LogOddsTaxed,
    ];

    pub fn weights(self) -> WeightScheme {
        match self {
            Scheme::SimpleNaive => WeightScheme::Egalitarian,
            Scheme::LinearKelly => WeightScheme::Linear,
            Scheme::LogOddsTaxed => WeightScheme::LogOdds,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::SimpleNaive => "simple_naive",
            Scheme::LinearKelly => "linear_kelly",
            Scheme::LogOddsTaxed => "log_odds_taxed",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub scheme: Scheme,
    pub market_kind: MarketKind,
    pub election: Decision,
    pub market: Decision,
    pub agree: bool,
    pub price: f64,
    pub weighted_margin: f64,
    /// Whether agreement is a theorem for this pairing. Finite-`k` taxed
    /// markets only approach the log-odds election.
    pub guaranteed: bool,
}

impl EquivalenceReport {
    pub fn violates_guarantee(&self) -> bool {
        self.guaranteed && !self.agree
    }
}

fn check(
    scheme: Scheme,
    kind: MarketKind,
    q: &CompetenceProfile,
    y: &SignalProfile,
) -> Result<EquivalenceReport> {
    let beliefs = beliefs_from_signals(q, y)?;
    let w = scheme.weights().weights(q)?;
    let margin = weighted_margin(&VotingProfile::from_signals(y), &w)?;
    let election = Decision::from_sign(margin, TIE_TOLERANCE);
    let (price, market) = market_decision(kind, &beliefs, TIE_TOLERANCE)?;
    Ok(EquivalenceReport {
        scheme,
        market_kind: kind,
        election,
        market,
        agree: election == market,
        price: price.value(),
        weighted_margin: margin,
        guaranteed: !matches!(kind, MarketKind::TaxedFinite { .. }),
    })
}

/// Simple majority of sincere votes against the binarized naive price.
pub fn check_simple_naive(q: &CompetenceProfile, y: &SignalProfile) -> Result<EquivalenceReport> {
    check(Scheme::SimpleNaive, MarketKind::Naive, q, y)
}

/// `2q - 1` weighted majority against the binarized Kelly price.
pub fn check_linear_kelly(q: &CompetenceProfile, y: &SignalProfile) -> Result<EquivalenceReport> {
    check(Scheme::LinearKelly, MarketKind::Kelly, q, y)
}

/// Log-odds weighted majority against the taxed market: the closed-form
/// large-`k` price when `tax` is `None`, the finite-`k` equilibrium otherwise.
pub fn check_logodds_taxed(
    q: &CompetenceProfile,
    y: &SignalProfile,
    tax: Option<TaxParams>,
) -> Result<EquivalenceReport> {
    let kind = tax.map_or(MarketKind::TaxedAsymptotic, MarketKind::taxed);
    check(Scheme::LogOddsTaxed, kind, q, y)
}

pub fn check_scheme(
    scheme: Scheme,
    q: &CompetenceProfile,
    y: &SignalProfile,
    tax: Option<TaxParams>,
) -> Result<EquivalenceReport> {
    match scheme {
        Scheme::SimpleNaive => check_simple_naive(q, y),
        Scheme::LinearKelly => check_linear_kelly(q, y),
        Scheme::LogOddsTaxed => check_logodds_taxed(q, y, tax),
    }
}

/// Runs `scheme` on all `2^n` signal profiles, in enumeration order.
pub fn sweep_signal_space(
    scheme: Scheme,
    q: &CompetenceProfile,
    tax: Option<TaxParams>,
) -> Result<Vec<(SignalProfile, EquivalenceReport)>> {
    let n = q.len();
    if n > ENUMERATION_CAP {
        return Err(Error::TooManyAgents {
            n,
            cap: ENUMERATION_CAP,
        });
    }
    (0..1u64 << n)
        .into_par_iter()
        .map(|m| {
            let y = SignalProfile::from_index(n, m);
            check_scheme(scheme, q, &y, tax).map(|r| (y, r))
        })
        .collect()
}

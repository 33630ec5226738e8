//! Weighted majority voting and the three weight schemes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::model::{
    binarize, check_len, BeliefProfile, CompetenceProfile, Decision, Signal, SignalProfile,
};
use crate::{Error, Result};

/// Nonnegative per-agent weights with at least one positive entry. Weights
/// are never normalized; the majority rule is homogeneous in them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightProfile(Vec<f64>);

impl WeightProfile {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::EmptyProfile);
        }
        for (index, &value) in w.iter().enumerate() {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::InvalidWeight { index, value });
            }
        }
        if w.iter().all(|&x| x == 0.0) {
            return Err(Error::ZeroWeights);
        }
        Ok(Self(w))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.0.iter().map(|w| w * c).collect())
    }
}

/// Votes, `true` standing for A.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VotingProfile(Vec<bool>);

impl VotingProfile {
    pub fn new(v: Vec<bool>) -> Self {
        Self(v)
    }

    /// Sincere votes: each agent votes for the state its signal points to.
    pub fn from_signals(y: &SignalProfile) -> Self {
        Self(y.iter().map(|s| s == Signal::A).collect())
    }

    /// Sincere votes from beliefs. A belief of exactly 0.5 has no sincere vote.
    pub fn from_beliefs(b: &BeliefProfile) -> Result<Self> {
        b.iter()
            .enumerate()
            .map(|(index, x)| match binarize(x)? {
                Decision::A => Ok(true),
                Decision::B => Ok(false),
                Decision::Tie => Err(Error::UndecidedBelief { index }),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn flipped(&self) -> Self {
        Self(self.0.iter().map(|v| !v).collect())
    }
}

/// Weighted support for A minus half the total weight.
pub fn weighted_margin(v: &VotingProfile, w: &WeightProfile) -> Result<f64> {
    let (support, total) = support_and_total(v, w)?;
    Ok(support - 0.5 * total)
}

fn support_and_total(v: &VotingProfile, w: &WeightProfile) -> Result<(f64, f64)> {
    check_len(w.len(), v.len())?;
    let support: f64 = v
        .as_slice()
        .iter()
        .zip(w.as_slice())
        .filter(|(vote, _)| **vote)
        .map(|(_, wi)| wi)
        .sum();
    let total: f64 = w.as_slice().iter().sum();
    Ok((support, total))
}

/// `{A}` when the weighted support for A exceeds half the total weight,
/// `{B}` when it falls short, a tie on exact equality of the computed sums.
pub fn weighted_majority(v: &VotingProfile, w: &WeightProfile) -> Result<Decision> {
    let (support, total) = support_and_total(v, w)?;
    let half = 0.5 * total;
    Ok(if support > half {
        Decision::A
    } else if support < half {
        Decision::B
    } else {
        Decision::Tie
    })
}

/// Like [`weighted_majority`] but treats `|margin| <= tol` as a tie.
pub fn weighted_majority_tolerant(
    v: &VotingProfile,
    w: &WeightProfile,
    tol: f64,
) -> Result<Decision> {
    Ok(Decision::from_sign(weighted_margin(v, w)?, tol))
}

pub fn weights_egalitarian(n: usize) -> Result<WeightProfile> {
    if n == 0 {
        return Err(Error::EmptyProfile);
    }
    WeightProfile::new(vec![1.0; n])
}

/// `w_i = 2 q_i - 1`, the weights implicitly used by a Kelly market.
pub fn weights_linear(q: &CompetenceProfile) -> Result<WeightProfile> {
    WeightProfile::new(q.iter().map(|qi| 2.0 * qi - 1.0).collect())
}

/// `w_i = ln(q_i / (1 - q_i))`, the accuracy-maximizing weights.
pub fn weights_log_odds(q: &CompetenceProfile) -> Result<WeightProfile> {
    WeightProfile::new(q.iter().map(|qi| (qi / (1.0 - qi)).ln()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightScheme {
    Egalitarian,
    Linear,
    LogOdds,
}

impl WeightScheme {
    pub const ALL: [WeightScheme; 3] = [
        WeightScheme::Egalitarian,
        WeightScheme::Linear,
        WeightScheme::LogOdds,
    ];

    pub fn weights(self, q: &CompetenceProfile) -> Result<WeightProfile> {
        match self {
            WeightScheme::Egalitarian => weights_egalitarian(q.len()),
            WeightScheme::Linear => weights_linear(q),
            WeightScheme::LogOdds => weights_log_odds(q),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            WeightScheme::Egalitarian => "egalitarian",
            WeightScheme::Linear => "linear",
            WeightScheme::LogOdds => "log_odds",
        }
    }
}

impl fmt::Display for WeightScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WeightScheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "egalitarian" => Ok(WeightScheme::Egalitarian),
            "linear" => Ok(WeightScheme::Linear),
            "log_odds" | "log-odds" => Ok(WeightScheme::LogOdds),
            other => Err(format!(
                "unknown weight scheme `{other}` (expected egalitarian, linear or log_odds)"
            )),
        }
    }
}

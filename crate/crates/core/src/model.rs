//! Signal model: agents observe independent noisy signals of a binary state
//! and form posterior beliefs under a uniform prior.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Largest group for which the full signal space may be materialized.
pub const ENUMERATION_CAP: usize = 20;

/// One of the two states of the world, and equally a signal or a vote about it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Signal {
    A,
    B,
}

impl Signal {
    pub fn flip(self) -> Self {
        match self {
            Signal::A => Signal::B,
            Signal::B => Signal::A,
        }
    }
}

impl fmt::Display for Signal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Signal::A => f.write_str("A"),
            Signal::B => f.write_str("B"),
        }
    }
}

/// Outcome of an aggregator: a nonempty subset of `{A, B}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Decision {
    A,
    B,
    Tie,
}

impl Decision {
    pub fn contains(self, s: Signal) -> bool {
        matches!(
            (self, s),
            (Decision::Tie, _) | (Decision::A, Signal::A) | (Decision::B, Signal::B)
        )
    }

    /// Credit given to this decision when the true state is `truth`:
    /// 1 for a correct singleton, 0.5 for a tie, 0 otherwise.
    pub fn score(self, truth: Signal) -> f64 {
        match self {
            Decision::Tie => 0.5,
            d if d.contains(truth) => 1.0,
            _ => 0.0,
        }
    }

    pub fn members(self) -> &'static [Signal] {
        match self {
            Decision::A => &[Signal::A],
            Decision::B => &[Signal::B],
            Decision::Tie => &[Signal::A, Signal::B],
        }
    }

    /// Decision by the sign of `x`, with `|x| <= tol` counted as a tie.
    pub fn from_sign(x: f64, tol: f64) -> Self {
        if x > tol {
            Decision::A
        } else if x < -tol {
            Decision::B
        } else {
            Decision::Tie
        }
    }
}

impl From<Signal> for Decision {
    fn from(s: Signal) -> Self {
        match s {
            Signal::A => Decision::A,
            Signal::B => Decision::B,
        }
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Decision::A => f.write_str("A"),
            Decision::B => f.write_str("B"),
            Decision::Tie => f.write_str("A|B"),
        }
    }
}

/// Per-agent signal accuracies, each strictly inside (0.5, 1).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompetenceProfile(Vec<f64>);

impl CompetenceProfile {
    pub fn new(q: Vec<f64>) -> Result<Self> {
        if q.is_empty() {
            return Err(Error::EmptyProfile);
        }
        for (index, &value) in q.iter().enumerate() {
            check_competence(index, value)?;
        }
        Ok(Self(q))
    }

    pub fn homogeneous(n: usize, q: f64) -> Result<Self> {
        Self::new(vec![q; n])
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

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.iter().copied()
    }
}

fn check_competence(index: usize, value: f64) -> Result<()> {
    if value > 0.5 && value < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidCompetence { index, value })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SignalProfile(Vec<Signal>);

impl SignalProfile {
    pub fn new(y: Vec<Signal>) -> Self {
        Self(y)
    }

    pub fn uniform(n: usize, s: Signal) -> Self {
        Self(vec![s; n])
    }

    /// Profile number `index` in the lexicographic order with `A < B` and
    /// agent 0 most significant.
    pub fn from_index(n: usize, index: u64) -> Self {
        Self(
            (0..n)
                .map(|i| {
                    if (index >> (n - 1 - i)) & 1 == 1 {
                        Signal::B
                    } else {
                        Signal::A
                    }
                })
                .collect(),
        )
    }

    /// Every signal swapped, i.e. the same draw under the other state.
    pub fn flipped(&self) -> Self {
        Self(self.0.iter().map(|s| s.flip()).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Signal] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = Signal> + '_ {
        self.0.iter().copied()
    }

    /// Likelihood `P(y | x)` under independent signals with accuracies `q`.
    pub fn likelihood(&self, q: &CompetenceProfile, state: Signal) -> Result<f64> {
        check_len(q.len(), self.len())?;
        Ok(self
            .iter()
            .zip(q.iter())
            .map(|(y, qi)| if y == state { qi } else { 1.0 - qi })
            .product())
    }
}

/// Posterior probabilities of state A, each in (0, 1).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BeliefProfile(Vec<f64>);

impl BeliefProfile {
    pub fn new(b: Vec<f64>) -> Result<Self> {
        if b.is_empty() {
            return Err(Error::EmptyProfile);
        }
        for (index, &value) in b.iter().enumerate() {
            if !(value > 0.0 && value < 1.0) {
                return Err(Error::InvalidBelief { index, value });
            }
        }
        Ok(Self(b))
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

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.iter().copied()
    }

    pub fn mean(&self) -> f64 {
        self.0.iter().sum::<f64>() / self.0.len() as f64
    }
}

/// Fixed modelling assumptions: a uniform prior and a unit endowment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub prior: f64,
    pub endowment: f64,
}

impl ModelConfig {
    pub fn new(prior: f64, endowment: f64) -> Result<Self> {
        if prior != 0.5 {
            return Err(Error::InvalidPrior(prior));
        }
        if endowment != 1.0 {
            return Err(Error::InvalidEndowment(endowment));
        }
        Ok(Self { prior, endowment })
    }
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            prior: 0.5,
            endowment: 1.0,
        }
    }
}

/// Bayesian posterior of state A after observing `signal` with accuracy `q`.
pub fn posterior_belief(q: f64, signal: Signal) -> Result<f64> {
    check_competence(0, q)?;
    Ok(match signal {
        Signal::A => q,
        Signal::B => 1.0 - q,
    })
}

/// Maps a belief or a price to a decision. Exactly 0.5 is a tie.
pub fn binarize(x: f64) -> Result<Decision> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::OutOfUnitInterval(x));
    }
    Ok(if x > 0.5 {
        Decision::A
    } else if x < 0.5 {
        Decision::B
    } else {
        Decision::Tie
    })
}

pub fn beliefs_from_signals(q: &CompetenceProfile, y: &SignalProfile) -> Result<BeliefProfile> {
    check_len(q.len(), y.len())?;
    let b = q
        .iter()
        .zip(y.iter())
        .enumerate()
        .map(|(index, (qi, yi))| {
            posterior_belief(qi, yi).map_err(|_| Error::InvalidCompetence { index, value: qi })
        })
        .collect::<Result<Vec<_>>>()?;
    BeliefProfile::new(b)
}

/// All `2^n` signal profiles with their likelihood given `state`, in the
/// order of [`SignalProfile::from_index`].
pub fn enumerate_signal_space(
    q: &CompetenceProfile,
    state: Signal,
) -> Result<Vec<(SignalProfile, f64)>> {
    let n = q.len();
    if n > ENUMERATION_CAP {
        return Err(Error::TooManyAgents {
            n,
            cap: ENUMERATION_CAP,
        });
    }
    (0..1u64 << n)
        .map(|m| {
            let y = SignalProfile::from_index(n, m);
            let p = y.likelihood(q, state)?;
            Ok((y, p))
        })
        .collect()
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, found })
    }
}

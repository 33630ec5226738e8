//! Truth-tracking: how often an aggregator's outcome matches the state.
//!
//! Ties are credited 0.5 (a fair coin in expectation) and their probability
//! mass is reported separately.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::markets::{market_decision, MarketKind};
use crate::model::{
    beliefs_from_signals, enumerate_signal_space, CompetenceProfile, Decision, Signal,
    SignalProfile,
};
use crate::voting::{weighted_majority_tolerant, VotingProfile, WeightProfile, WeightScheme};
use crate::{Error, Result, TIE_TOLERANCE};

pub const EXACT_AGENT_CAP: usize = 12;
pub const OPTIMALITY_AGENT_CAP: usize = 10;
/// Trials per Monte Carlo partition; each partition owns one random stream.
pub const MONTE_CARLO_CHUNK: u64 = 1 << 14;
const SYMMETRY_TOLERANCE: f64 = 1e-12;

type DecideFn = dyn Fn(&CompetenceProfile, &SignalProfile) -> Result<Decision> + Send + Sync;

/// A named decision procedure from competences and signals to an outcome.
#[derive(Clone)]
pub struct Aggregator {
    name: String,
    decide: Arc<DecideFn>,
}

impl fmt::Debug for Aggregator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Aggregator")
            .field("name", &self.name)
            .finish()
    }
}

impl Aggregator {
    pub fn new(
        name: impl Into<String>,
        decide: impl Fn(&CompetenceProfile, &SignalProfile) -> Result<Decision> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            decide: Arc::new(decide),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn decide(&self, q: &CompetenceProfile, y: &SignalProfile) -> Result<Decision> {
        (self.decide)(q, y)
    }

    /// Sincere weighted majority; margins within [`TIE_TOLERANCE`] are ties.
    pub fn weighted_majority(scheme: WeightScheme) -> Self {
        Self::new(format!("majority_{scheme}"), move |q, y| {
            let w = scheme.weights(q)?;
            weighted_majority_tolerant(&VotingProfile::from_signals(y), &w, TIE_TOLERANCE)
        })
    }

    /// Weighted majority with a fixed weight vector, ignoring competences.
    pub fn fixed_weights(name: impl Into<String>, w: WeightProfile) -> Self {
        Self::new(name, move |_, y| {
            weighted_majority_tolerant(&VotingProfile::from_signals(y), &w, TIE_TOLERANCE)
        })
    }

    /// Binarized equilibrium price of a market fed the agents' beliefs.
    pub fn market(kind: MarketKind) -> Self {
        Self::new(format!("market_{}", kind.name()), move |q, y| {
            let b = beliefs_from_signals(q, y)?;
            market_decision(kind, &b, TIE_TOLERANCE).map(|(_, d)| d)
        })
    }

    pub fn dictator(agent: usize) -> Self {
        Self::new(format!("dictator_{agent}"), move |_, y| {
            y.as_slice()
                .get(agent)
                .map(|&s| Decision::from(s))
                .ok_or(Error::LengthMismatch {
                    expected: agent + 1,
                    found: y.len(),
                })
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccuracyEstimate {
    pub value: f64,
    pub method: Method,
    /// Monte Carlo only.
    pub trials: Option<u64>,
    /// Monte Carlo only.
    pub std_error: Option<f64>,
    pub tie_mass: f64,
    /// Exact only: `P(correct | A)` and `P(correct | B)`.
    pub conditional: Option<[f64; 2]>,
}

/// Exact accuracy by enumerating every signal profile under both states.
/// Fails if the two state-conditional accuracies differ by more than 1e-12.
pub fn exact_accuracy(agg: &Aggregator, q: &CompetenceProfile) -> Result<AccuracyEstimate> {
    if q.len() > EXACT_AGENT_CAP {
        return Err(Error::TooManyAgents {
            n: q.len(),
            cap: EXACT_AGENT_CAP,
        });
    }
    let mut conditional = [0.0; 2];
    let mut tie_mass = 0.0;
    for (slot, state) in [Signal::A, Signal::B].into_iter().enumerate() {
        let space = enumerate_signal_space(q, state)?;
        let scored = space
            .par_iter()
            .map(|(y, p)| {
                agg.decide(q, y).map(|d| {
                    (
                        p * d.score(state),
                        if d == Decision::Tie { *p } else { 0.0 },
                    )
                })
            })
            .collect::<Result<Vec<_>>>()?;
        conditional[slot] = scored.iter().map(|(s, _)| s).sum();
        tie_mass += 0.5 * scored.iter().map(|(_, t)| t).sum::<f64>();
    }
    if (conditional[0] - conditional[1]).abs() > SYMMETRY_TOLERANCE {
        return Err(Error::AsymmetricAccuracy {
            given_a: conditional[0],
            given_b: conditional[1],
        });
    }
    Ok(AccuracyEstimate {
        value: 0.5 * (conditional[0] + conditional[1]),
        method: Method::Exact,
        trials: None,
        std_error: None,
        tie_mass,
        conditional: Some(conditional),
    })
}

#[derive(Default, Clone, Copy)]
struct Tally {
    /// Score in half points: 2 per correct outcome, 1 per tie.
    halves: u64,
    /// Sum of squared half-point scores.
    squares: u64,
    ties: u64,
}

fn run_chunk(
    agg: &Aggregator,
    q: &CompetenceProfile,
    seed: u64,
    chunk: u64,
    trials: u64,
) -> Result<Tally> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    let mut tally = Tally::default();
    let mut signals = Vec::with_capacity(q.len());
    for _ in 0..trials {
        let truth = if rng.gen_bool(0.5) {
            Signal::A
        } else {
            Signal::B
        };
        signals.clear();
        signals.extend(q.iter().map(|qi| {
            if rng.gen::<f64>() < qi {
                truth
            } else {
                truth.flip()
            }
        }));
        let d = agg.decide(q, &SignalProfile::new(signals.clone()))?;
        let halves = match d {
            Decision::Tie => {
                tally.ties += 1;
                1
            }
            d if d.contains(truth) => 2,
            _ => 0,
        };
        tally.halves += halves;
        tally.squares += halves * halves;
    }
    Ok(tally)
}

/// Seeded Monte Carlo accuracy. Trials are split into fixed partitions of
/// [`MONTE_CARLO_CHUNK`], each drawing from its own ChaCha stream, so the
/// estimate does not depend on the number of threads.
pub fn monte_carlo_accuracy(
    agg: &Aggregator,
    q: &CompetenceProfile,
    trials: u64,
    seed: u64,
) -> Result<AccuracyEstimate> {
    if trials == 0 {
        return Err(Error::NoTrials);
    }
    let chunks = trials.div_ceil(MONTE_CARLO_CHUNK);
    let tallies = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = MONTE_CARLO_CHUNK.min(trials - c * MONTE_CARLO_CHUNK);
            run_chunk(agg, q, seed, c, len)
        })
        .collect::<Result<Vec<_>>>()?;
    let total = tallies.iter().fold(Tally::default(), |acc, t| Tally {
        halves: acc.halves + t.halves,
        squares: acc.squares + t.squares,
        ties: acc.ties + t.ties,
    });
    let n = trials as f64;
    let mean = total.halves as f64 / (2.0 * n);
    let second = total.squares as f64 / (4.0 * n);
    let variance = if trials > 1 {
        ((second - mean * mean) * n / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(AccuracyEstimate {
        value: mean,
        method: Method::MonteCarlo,
        trials: Some(trials),
        std_error: Some((variance / n).sqrt()),
        tie_mass: total.ties as f64 / n,
        conditional: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightComparison {
    pub label: String,
    pub weights: Vec<f64>,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimalWeightsReport {
    pub log_odds: f64,
    /// Egalitarian, linear and the random directions, in that order.
    pub others: Vec<WeightComparison>,
}

impl OptimalWeightsReport {
    pub fn best_other(&self) -> Option<&WeightComparison> {
        self.others
            .iter()
            .max_by(|a, b| a.accuracy.total_cmp(&b.accuracy))
    }

    /// Largest gain of log-odds weights over the egalitarian ones.
    pub fn gain_over_egalitarian(&self) -> f64 {
        self.log_odds - self.others[0].accuracy
    }
}

/// Draws a direction in the positive orthant of the unit sphere.
fn random_direction(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..n)
        .map(|_| {
            let x: f64 = StandardNormal.sample(rng);
            x.abs()
        })
        .collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

/// Compares exact accuracy under log-odds weights with egalitarian, linear
/// and `perturbations` random positive weight vectors. Log-odds weights are
/// optimal, so any entry beating them by more than 1e-12 is an error.
pub fn verify_optimal_weights(
    q: &CompetenceProfile,
    perturbations: usize,
    seed: u64,
) -> Result<OptimalWeightsReport> {
    if q.len() > OPTIMALITY_AGENT_CAP {
        return Err(Error::TooManyAgents {
            n: q.len(),
            cap: OPTIMALITY_AGENT_CAP,
        });
    }
    let log_odds = exact_accuracy(&Aggregator::weighted_majority(WeightScheme::LogOdds), q)?.value;

    let mut candidates: Vec<(String, WeightProfile)> = vec![
        ("egalitarian".into(), WeightScheme::Egalitarian.weights(q)?),
        ("linear".into(), WeightScheme::Linear.weights(q)?),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..perturbations {
        candidates.push((
            format!("random_{i}"),
            WeightProfile::new(random_direction(&mut rng, q.len()))?,
        ));
    }

    let mut others = Vec::with_capacity(candidates.len());
    for (label, w) in candidates {
        let accuracy =
            exact_accuracy(&Aggregator::fixed_weights(label.clone(), w.clone()), q)?.value;
        if accuracy > log_odds + SYMMETRY_TOLERANCE {
            return Err(Error::OptimalityViolated {
                label,
                other: accuracy,
                log_odds,
            });
        }
        others.push(WeightComparison {
            label,
            weights: w.as_slice().to_vec(),
            accuracy,
        });
    }
    Ok(OptimalWeightsReport { log_odds, others })
}

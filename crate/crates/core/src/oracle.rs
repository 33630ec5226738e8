//! Brute-force cross-checks for the market solvers and the accuracy code.
//!
//! Nothing here calls into [`crate::markets`] or [`crate::accuracy`]'s
//! enumeration: best responses come from scanning a strategy grid over the raw
//! utility formulas, prices from scanning a price grid, and accuracies from a
//! recursive walk over signal profiles.

use rayon::prelude::*;
use serde::Serialize;

use crate::accuracy::Aggregator;
use crate::markets::MarketKind;
use crate::model::{BeliefProfile, CompetenceProfile, Signal, SignalProfile};
use crate::{Error, Result};

pub const GRID_AGENT_CAP: usize = 8;
pub const ACCURACY_AGENT_CAP: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    /// Points in the price grid over `[0, 1]`; the endpoints are skipped.
    pub resolution: usize,
    /// Points in each agent's strategy grid over `[0, 1]`.
    pub strategy_resolution: usize,
    /// Excess demand within this distance of zero counts as clearing.
    pub tolerance: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            resolution: 10_001,
            strategy_resolution: 1_001,
            tolerance: 1e-9,
        }
    }
}

impl GridSpec {
    pub fn new(resolution: usize, strategy_resolution: usize, tolerance: f64) -> Result<Self> {
        if resolution < 3 || strategy_resolution < 3 {
            return Err(Error::InvalidGrid(format!(
                "resolutions must be at least 3, got {resolution} and {strategy_resolution}"
            )));
        }
        if tolerance.is_nan() || tolerance <= 0.0 {
            return Err(Error::InvalidGrid(format!(
                "tolerance must be positive, got {tolerance}"
            )));
        }
        Ok(Self {
            resolution,
            strategy_resolution,
            tolerance,
        })
    }

    pub fn price_step(&self) -> f64 {
        1.0 / (self.resolution - 1) as f64
    }

    pub fn strategy_step(&self) -> f64 {
        1.0 / (self.strategy_resolution - 1) as f64
    }
}

/// A run of adjacent accepted grid prices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PriceInterval {
    pub lo: f64,
    pub hi: f64,
    /// Number of grid steps spanned.
    pub steps: usize,
}

impl PriceInterval {
    pub fn contains(&self, p: f64, slack: f64) -> bool {
        self.lo - slack <= p && p <= self.hi + slack
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    /// A located equilibrium: narrower than three grid steps.
    pub fn is_sharp(&self) -> bool {
        self.steps < 3
    }
}

/// Range of excess demand `Σ a / p - Σ b / (1 - p)` reachable with optimal
/// stakes at one price. Indifferent agents widen the range.
#[derive(Debug, Clone, Copy)]
struct DemandRange {
    lo: f64,
    hi: f64,
}

impl DemandRange {
    fn straddles(&self, tol: f64) -> bool {
        self.lo <= tol && self.hi >= -tol
    }
}

/// Utility of staking `s` on the A side at price `p` with belief `b`, written
/// out from the definitions. B-side calls pass `(1 - p, 1 - b)`.
fn utility(kind: MarketKind, p: f64, b: f64, s: f64) -> f64 {
    let win = s / p + (1.0 - s);
    let lose = 1.0 - s;
    match kind {
        MarketKind::Naive => b * win + (1.0 - b) * lose,
        MarketKind::Kelly => b * win.ln() + (1.0 - b) * lose.ln(),
        MarketKind::TaxedFinite { k } => {
            let c = k * p / (1.0 - p);
            let net = s * (1.0 - p) / p;
            let taxed = (1.0 - (-c * net).exp()) / c;
            b * (1.0 + taxed).ln() + (1.0 - b) * lose.ln()
        }
        MarketKind::TaxedAsymptotic => unreachable!("rejected before scanning"),
    }
}

/// Smallest and largest maximizer on the strategy grid, with the maximum.
fn grid_argmax(kind: MarketKind, p: f64, b: f64, m: usize) -> (f64, f64, f64) {
    let mut best = f64::NEG_INFINITY;
    let (mut lo, mut hi) = (0.0, 0.0);
    for j in 0..m {
        let s = j as f64 / (m - 1) as f64;
        let u = utility(kind, p, b, s);
        if u > best {
            best = u;
            lo = s;
            hi = s;
        } else if u == best {
            hi = s;
        }
    }
    (lo, hi, best)
}

fn demand_range(kind: MarketKind, beliefs: &[f64], p: f64, grid: &GridSpec) -> DemandRange {
    let (mut lo, mut hi) = (0.0, 0.0);
    for &b in beliefs {
        match kind {
            MarketKind::Naive => {
                // Linear utility: the sign of b - p decides; equality leaves
                // every stake on either side optimal.
                if b > p {
                    lo += 1.0 / p;
                    hi += 1.0 / p;
                } else if b < p {
                    lo -= 1.0 / (1.0 - p);
                    hi -= 1.0 / (1.0 - p);
                } else {
                    lo -= 1.0 / (1.0 - p);
                    hi += 1.0 / p;
                }
            }
            _ => {
                let m = grid.strategy_resolution;
                let (a_lo, a_hi, a_best) = grid_argmax(kind, p, b, m);
                let (b_lo, b_hi, b_best) = grid_argmax(kind, 1.0 - p, 1.0 - b, m);
                // Pick the better side; a zero stake is common to both.
                let (a_lo, a_hi, b_lo, b_hi) = if a_best > b_best {
                    (a_lo, a_hi, 0.0, 0.0)
                } else if b_best > a_best {
                    (0.0, 0.0, b_lo, b_hi)
                } else {
                    (a_lo, a_hi, b_lo, b_hi)
                };
                lo += a_lo / p - b_hi / (1.0 - p);
                hi += a_hi / p - b_lo / (1.0 - p);
            }
        }
    }
    DemandRange { lo, hi }
}

/// Scans the price grid for prices at which optimal stakes can clear the
/// market, either within `tolerance` at a grid point or by a sign change of
/// the excess demand between neighbours. Accepted points are merged into
/// intervals.
pub fn grid_equilibrium_search(
    beliefs: &BeliefProfile,
    kind: MarketKind,
    grid: &GridSpec,
) -> Result<Vec<PriceInterval>> {
    if beliefs.len() > GRID_AGENT_CAP {
        return Err(Error::TooManyAgents {
            n: beliefs.len(),
            cap: GRID_AGENT_CAP,
        });
    }
    match kind {
        MarketKind::TaxedAsymptotic => {
            return Err(Error::Unsupported(
                "the asymptotic taxed market has no finite utility to scan".into(),
            ))
        }
        MarketKind::TaxedFinite { k } if !(k.is_finite() && k > 0.0) => {
            return Err(Error::InvalidTax(k))
        }
        _ => {}
    }

    let last = (grid.resolution - 1) as f64;
    let prices: Vec<f64> = (1..grid.resolution - 1).map(|j| j as f64 / last).collect();
    let ranges: Vec<DemandRange> = prices
        .par_iter()
        .map(|&p| demand_range(kind, beliefs.as_slice(), p, grid))
        .collect();

    let mut accepted = vec![false; prices.len()];
    for j in 0..prices.len() {
        if ranges[j].straddles(grid.tolerance) {
            accepted[j] = true;
        }
        if j + 1 < prices.len() {
            let down = ranges[j].lo > 0.0 && ranges[j + 1].hi < 0.0;
            let up = ranges[j].hi < 0.0 && ranges[j + 1].lo > 0.0;
            if down || up {
                accepted[j] = true;
                accepted[j + 1] = true;
            }
        }
    }

    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for j in 0..=prices.len() {
        let on = j < prices.len() && accepted[j];
        match (on, start) {
            (true, None) => start = Some(j),
            (false, Some(s)) => {
                out.push(PriceInterval {
                    lo: prices[s],
                    hi: prices[j - 1],
                    steps: j - 1 - s,
                });
                start = None;
            }
            _ => {}
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleAccuracy {
    pub value: f64,
    pub given_a: f64,
    pub given_b: f64,
}

/// Group accuracy by walking every signal profile for both states: correct
/// singletons score 1, ties 0.5, and the two states are averaged.
pub fn exhaustive_accuracy_oracle(
    q: &CompetenceProfile,
    aggregator: &Aggregator,
) -> Result<OracleAccuracy> {
    if q.len() > ACCURACY_AGENT_CAP {
        return Err(Error::TooManyAgents {
            n: q.len(),
            cap: ACCURACY_AGENT_CAP,
        });
    }
    let given_a = walk(
        q,
        aggregator,
        Signal::A,
        &mut Vec::with_capacity(q.len()),
        1.0,
    )?;
    let given_b = walk(
        q,
        aggregator,
        Signal::B,
        &mut Vec::with_capacity(q.len()),
        1.0,
    )?;
    Ok(OracleAccuracy {
        value: 0.5 * (given_a + given_b),
        given_a,
        given_b,
    })
}

fn walk(
    q: &CompetenceProfile,
    aggregator: &Aggregator,
    truth: Signal,
    prefix: &mut Vec<Signal>,
    weight: f64,
) -> Result<f64> {
    let i = prefix.len();
    if i == q.len() {
        let d = aggregator.decide(q, &SignalProfile::new(prefix.clone()))?;
        let credit = match (d.contains(Signal::A), d.contains(Signal::B)) {
            (true, true) => 0.5,
            (true, false) if truth == Signal::A => 1.0,
            (false, true) if truth == Signal::B => 1.0,
            _ => 0.0,
        };
        return Ok(weight * credit);
    }
    let qi = q.as_slice()[i];
    let mut total = 0.0;
    for s in [Signal::A, Signal::B] {
        prefix.push(s);
        let w = if s == truth { qi } else { 1.0 - qi };
        total += walk(q, aggregator, truth, prefix, weight * w)?;
        prefix.pop();
    }
    Ok(total)
}

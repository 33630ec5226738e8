//! Two-security prediction market: an A-security pays 1 if the state is A,
//! a B-security pays 1 if it is B, and their prices sum to one. Agents hold a
//! unit endowment, trade at most one side, and take the price as given.
//!
//! Three preference models are supported: risk-neutral ("naive"), logarithmic
//! ("Kelly"), and logarithmic with payouts deflated by an exponential tax.
//! For each one this module gives the per-agent best response and a solver
//! for the competitive-equilibrium price.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{check_len, BeliefProfile, Decision};
use crate::{Error, Result};

/// Bracket used by the price bisections: prices are searched in `[ε, 1 - ε]`.
pub const PRICE_EPSILON: f64 = 1e-9;
/// Strategies are searched in `[0, 1 - STRATEGY_CEILING_GAP]`.
pub const STRATEGY_CEILING_GAP: f64 = 1e-9;
pub const INNER_TOLERANCE: f64 = 1e-12;
pub const OUTER_TOLERANCE: f64 = 1e-9;
pub const MAX_BISECTION_ITERATIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    A,
    B,
}

/// One agent's trade: nothing, or a fraction of the endowment on one side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Position {
    Flat,
    A(f64),
    B(f64),
}

impl Position {
    pub fn on(side: Side, fraction: f64) -> Self {
        if fraction == 0.0 {
            return Position::Flat;
        }
        match side {
            Side::A => Position::A(fraction),
            Side::B => Position::B(fraction),
        }
    }

    pub fn side(self) -> Option<Side> {
        match self {
            Position::Flat => None,
            Position::A(_) => Some(Side::A),
            Position::B(_) => Some(Side::B),
        }
    }

    pub fn fraction(self) -> f64 {
        match self {
            Position::Flat => 0.0,
            Position::A(s) | Position::B(s) => s,
        }
    }

    pub fn a(self) -> f64 {
        match self {
            Position::A(s) => s,
            _ => 0.0,
        }
    }

    pub fn b(self) -> f64 {
        match self {
            Position::B(s) => s,
            _ => 0.0,
        }
    }
}

/// Paired per-agent investments in A- and B-securities, as fractions of the
/// unit endowment. No agent invests in both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvestmentProfile {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl InvestmentProfile {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        check_len(a.len(), b.len())?;
        for (index, (&sa, &sb)) in a.iter().zip(&b).enumerate() {
            if !(0.0..=1.0).contains(&sa) || !(0.0..=1.0).contains(&sb) {
                return Err(Error::InvalidInvestment {
                    index,
                    reason: format!("fractions ({sa}, {sb}) must lie in [0, 1]"),
                });
            }
            if sa * sb != 0.0 {
                return Err(Error::InvalidInvestment {
                    index,
                    reason: "invests in both securities".into(),
                });
            }
        }
        Ok(Self { a, b })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            a: vec![0.0; n],
            b: vec![0.0; n],
        }
    }

    pub fn from_positions(positions: &[Position]) -> Result<Self> {
        Self::new(
            positions.iter().map(|p| p.a()).collect(),
            positions.iter().map(|p| p.b()).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn position(&self, i: usize) -> Position {
        if self.a[i] > 0.0 {
            Position::A(self.a[i])
        } else if self.b[i] > 0.0 {
            Position::B(self.b[i])
        } else {
            Position::Flat
        }
    }

    pub fn positions(&self) -> Vec<Position> {
        (0..self.len()).map(|i| self.position(i)).collect()
    }

    pub fn total_a(&self) -> f64 {
        self.a.iter().sum()
    }

    pub fn total_b(&self) -> f64 {
        self.b.iter().sum()
    }
}

/// Price of the A-security; the B-security costs `1 - p`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Price(f64);

impl Price {
    pub fn new(p: f64) -> Result<Self> {
        if p > 0.0 && p < 1.0 {
            Ok(Self(p))
        } else {
            Err(Error::InvalidPrice(p))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn of(self, side: Side) -> f64 {
        match side {
            Side::A => self.0,
            Side::B => 1.0 - self.0,
        }
    }
}

impl fmt::Display for Price {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaxParams {
    k: f64,
}

impl TaxParams {
    pub fn new(k: f64) -> Result<Self> {
        if k.is_finite() && k > 0.0 {
            Ok(Self { k })
        } else {
            Err(Error::InvalidTax(k))
        }
    }

    pub fn k(self) -> f64 {
        self.k
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MarketKind {
    Naive,
    Kelly,
    TaxedAsymptotic,
    TaxedFinite { k: f64 },
}

impl MarketKind {
    pub fn taxed(params: TaxParams) -> Self {
        MarketKind::TaxedFinite { k: params.k() }
    }

    pub fn name(self) -> &'static str {
        match self {
            MarketKind::Naive => "naive",
            MarketKind::Kelly => "kelly",
            MarketKind::TaxedAsymptotic => "taxed_asymptotic",
            MarketKind::TaxedFinite { .. } => "taxed_finite",
        }
    }
}

impl fmt::Display for MarketKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MarketKind::TaxedFinite { k } => write!(f, "taxed_finite(k={k})"),
            other => f.write_str(other.name()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Loop index for the naive construction, outer bisection steps otherwise.
    pub iterations: usize,
    /// `Σ s^A / p - Σ s^B / (1 - p)` at the reported price.
    pub residual: f64,
    /// Set when nobody trades and the clearing ratio is undefined.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumResult {
    pub profile: InvestmentProfile,
    pub price: Price,
    pub market_kind: MarketKind,
    pub diagnostics: Diagnostics,
}

/// `p = Σ s^A / (Σ s^A + Σ s^B)`, the unique price balancing both demands.
pub fn clearing_price(s: &InvestmentProfile) -> Result<Price> {
    let (ta, tb) = (s.total_a(), s.total_b());
    if ta == 0.0 || tb == 0.0 {
        return Err(Error::UndefinedPrice);
    }
    Price::new(ta / (ta + tb))
}

/// Excess demand for A-securities over B-securities at price `p`.
pub fn clearing_residual(s: &InvestmentProfile, p: f64) -> f64 {
    s.total_a() / p - s.total_b() / (1.0 - p)
}

/// Wealth after resolution for an agent who put `stake` into a security
/// bought at `price` and kept the rest of the endowment as cash.
pub fn payout(price: f64, stake: f64, won: bool) -> Result<f64> {
    if !(price > 0.0 && price < 1.0) {
        return Err(Error::InvalidPrice(price));
    }
    if !(0.0..=1.0).contains(&stake) {
        return Err(Error::OutOfUnitInterval(stake));
    }
    Ok(if won {
        stake / price + (1.0 - stake)
    } else {
        1.0 - stake
    })
}

/// Reduces a B-side question to the A-side one by swapping the roles of the
/// states: `(p, b) -> (1 - p, 1 - b)`.
fn oriented(p: f64, b: f64, position: Position) -> (f64, f64, f64) {
    match position {
        Position::Flat => (p, b, 0.0),
        Position::A(s) => (p, b, s),
        Position::B(s) => (1.0 - p, 1.0 - b, s),
    }
}

fn check_price(p: f64) -> Result<()> {
    Price::new(p).map(|_| ())
}

/// Expected wealth of a risk-neutral agent with belief `b` holding `position`.
pub fn naive_utility(p: f64, b: f64, position: Position) -> Result<f64> {
    check_price(p)?;
    let (p, b, s) = oriented(p, b, position);
    Ok(b * (s / p - s + 1.0) + (1.0 - b) * (1.0 - s))
}

/// Expected log wealth. Staking the whole endowment is `-inf`.
pub fn kelly_utility(p: f64, b: f64, position: Position) -> Result<f64> {
    check_price(p)?;
    let (p, b, s) = oriented(p, b, position);
    if s >= 1.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(b * (s * (1.0 - p) / p).ln_1p() + (1.0 - b) * (-s).ln_1p())
}

/// Taxed gross return `T(x) = (1 - exp(-c x)) / c` with `c = k p / (1 - p)`.
pub fn tax_function(x: f64, p: f64, tax: TaxParams) -> Result<f64> {
    check_price(p)?;
    let c = tax.k() * p / (1.0 - p);
    Ok(-(-c * x).exp_m1() / c)
}

/// Expected log wealth when the net winnings `s (1 - p) / p` are taxed by
/// [`tax_function`]: `b ln(1 + T(s (1 - p) / p)) + (1 - b) ln(1 - s)`.
pub fn taxed_utility(p: f64, b: f64, tax: TaxParams, position: Position) -> Result<f64> {
    check_price(p)?;
    let (p, b, s) = oriented(p, b, position);
    if s >= 1.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let t = tax_function(s * (1.0 - p) / p, p, tax)?;
    Ok(b * t.ln_1p() + (1.0 - b) * (-s).ln_1p())
}

/// Derivative of the A-side [`taxed_utility`] in the stake `s`:
/// `b e^{-ks} / (p/(1-p) + (1 - e^{-ks})/k) - (1 - b)/(1 - s)`.
pub fn taxed_marginal_utility(p: f64, b: f64, tax: TaxParams, s: f64) -> f64 {
    let k = tax.k();
    let gain = b * (-k * s).exp() / (p / (1.0 - p) + -(-k * s).exp_m1() / k);
    gain - (1.0 - b) / (1.0 - s)
}

/// Set of maximizers on one side of the market.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Argmax {
    Point(f64),
    /// Every fraction in `[0, 1]` is optimal.
    Indifferent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NaiveBestResponse {
    pub a: Argmax,
    pub b: Argmax,
}

/// Risk-neutral agents go all in on the side they think is underpriced.
pub fn naive_best_response(b: f64, p: f64) -> Result<NaiveBestResponse> {
    check_price(p)?;
    let side = |belief: f64, price: f64| match belief.partial_cmp(&price) {
        Some(Ordering::Greater) => Argmax::Point(1.0),
        Some(Ordering::Less) => Argmax::Point(0.0),
        _ => Argmax::Indifferent,
    };
    Ok(NaiveBestResponse {
        a: side(b, p),
        b: side(1.0 - b, 1.0 - p),
    })
}

/// `(b - p) / (1 - p)` on A when `b > p`, `(p - b) / p` on B when `b < p`.
pub fn kelly_best_response(b: f64, p: f64) -> Result<Position> {
    check_price(p)?;
    Ok(match b.partial_cmp(&p) {
        Some(Ordering::Greater) => Position::on(Side::A, (b - p) / (1.0 - p)),
        Some(Ordering::Less) => Position::on(Side::B, (p - b) / p),
        _ => Position::Flat,
    })
}

/// Stake solving the first-order condition of [`taxed_utility`], by bisection.
pub fn taxed_best_response(b: f64, p: f64, tax: TaxParams) -> Result<Position> {
    check_price(p)?;
    let (side, pb, bb) = match b.partial_cmp(&p) {
        Some(Ordering::Greater) => (Side::A, p, b),
        Some(Ordering::Less) => (Side::B, 1.0 - p, 1.0 - b),
        _ => return Ok(Position::Flat),
    };
    let foc = |s: f64| taxed_marginal_utility(pb, bb, tax, s);
    // Concave utility: a nonpositive slope at zero means staying out is optimal.
    if foc(0.0) <= 0.0 {
        return Ok(Position::Flat);
    }
    let (s, _) = bisect(foc, 0.0, 1.0 - STRATEGY_CEILING_GAP, INNER_TOLERANCE)?;
    Ok(Position::on(side, s))
}

/// Root of a function that is positive at `lo` and negative at `hi`.
/// Returns the root and the number of halvings.
fn bisect(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> Result<(f64, usize)> {
    let (f_lo, f_hi) = (f(lo), f(hi));
    if !(f_lo > 0.0 && f_hi < 0.0) {
        return Err(Error::BracketingFailure { lo, hi, f_lo, f_hi });
    }
    let (mut lo, mut hi) = (lo, hi);
    for iter in 1..=MAX_BISECTION_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return Ok((mid, iter));
        }
        if fm > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= tol {
            return Ok((0.5 * (lo + hi), iter));
        }
    }
    Ok((0.5 * (lo + hi), MAX_BISECTION_ITERATIONS))
}

/// Equilibrium of a risk-neutral market, constructed directly.
///
/// With beliefs sorted from highest to lowest, either some grid point `i/n`
/// separates `b_i` from `b_{i+1}` (the top `i` agents buy A, the rest buy B,
/// and the price is `i/n`), or some `b_i` falls strictly between `(i-1)/n`
/// and `i/n`, in which case agent `i` sets the price at its own belief and
/// invests just enough on one side to clear the market.
pub fn naive_equilibrium(beliefs: &BeliefProfile) -> Result<EquilibriumResult> {
    let b = beliefs.as_slice();
    let n = b.len();
    let nf = n as f64;
    // Stable sort: equal beliefs keep their original relative order.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| b[j].partial_cmp(&b[i]).unwrap_or(Ordering::Equal));
    let sorted: Vec<f64> = order.iter().map(|&i| b[i]).collect();

    let mut sa = vec![0.0; n];
    let mut sb = vec![0.0; n];
    let mut found: Option<(f64, usize)> = None;

    for i in 1..n {
        let grid = i as f64 / nf;
        if sorted[i - 1] >= grid && grid >= sorted[i] {
            sa[..i].fill(1.0);
            sb[i..].fill(1.0);
            found = Some((grid, i));
            break;
        }
    }

    if found.is_none() {
        for i in 1..=n {
            let bi = sorted[i - 1];
            if (i - 1) as f64 / nf < bi && bi < i as f64 / nf {
                let above = (i - 1) as f64;
                let below = (n - i) as f64;
                sa[..i - 1].fill(1.0);
                sb[i..].fill(1.0);
                let x = bi * below / (1.0 - bi) - above;
                if x >= 0.0 {
                    sa[i - 1] = x;
                } else {
                    sb[i - 1] = above * (1.0 - bi) / bi - below;
                }
                found = Some((bi, i));
                break;
            }
        }
    }

    let (price, index) = found.ok_or_else(|| {
        Error::SolverFailure(format!(
            "naive construction found no split for beliefs {b:?}"
        ))
    })?;

    let mut a = vec![0.0; n];
    let mut bside = vec![0.0; n];
    for (rank, &agent) in order.iter().enumerate() {
        a[agent] = sa[rank];
        bside[agent] = sb[rank];
    }
    let profile = InvestmentProfile::new(a, bside)?;
    finish(profile, price, MarketKind::Naive, index)
}

fn finish(
    profile: InvestmentProfile,
    price: f64,
    kind: MarketKind,
    iterations: usize,
) -> Result<EquilibriumResult> {
    let price = Price::new(price)?;
    let degenerate = profile.total_a() == 0.0 && profile.total_b() == 0.0;
    let residual = clearing_residual(&profile, price.value());
    Ok(EquilibriumResult {
        profile,
        price,
        market_kind: kind,
        diagnostics: Diagnostics {
            iterations,
            residual,
            degenerate,
        },
    })
}

/// In a Kelly market the equilibrium price is the mean belief.
pub fn kelly_equilibrium(beliefs: &BeliefProfile) -> Result<EquilibriumResult> {
    let p = beliefs.mean();
    let positions = beliefs
        .iter()
        .map(|b| kelly_best_response(b, p))
        .collect::<Result<Vec<_>>>()?;
    finish(
        InvestmentProfile::from_positions(&positions)?,
        p,
        MarketKind::Kelly,
        0,
    )
}

fn taxed_excess_demand(
    beliefs: &BeliefProfile,
    p: f64,
    tax: TaxParams,
) -> Result<(f64, Vec<Position>)> {
    let positions = beliefs
        .iter()
        .map(|b| taxed_best_response(b, p, tax))
        .collect::<Result<Vec<_>>>()?;
    let a: f64 = positions.iter().map(|x| x.a()).sum();
    let b: f64 = positions.iter().map(|x| x.b()).sum();
    Ok((a / p - b / (1.0 - p), positions))
}

/// Equilibrium of the taxed market for a finite `k`: bisection on the price
/// of the excess demand built from per-agent taxed best responses.
pub fn taxed_equilibrium_finite(
    beliefs: &BeliefProfile,
    tax: TaxParams,
) -> Result<EquilibriumResult> {
    let kind = MarketKind::taxed(tax);
    let first = beliefs.as_slice()[0];
    if beliefs.iter().all(|b| b == first) {
        return finish(InvestmentProfile::zeros(beliefs.len()), first, kind, 0);
    }

    let excess = |p: f64| taxed_excess_demand(beliefs, p, tax).map(|(d, _)| d);
    let (mut lo, mut hi) = (PRICE_EPSILON, 1.0 - PRICE_EPSILON);
    let (d_lo, d_hi) = (excess(lo)?, excess(hi)?);
    if !(d_lo > 0.0 && d_hi < 0.0) {
        return Err(Error::BracketingFailure {
            lo,
            hi,
            f_lo: d_lo,
            f_hi: d_hi,
        });
    }

    // Halve to full precision; the tolerance below is only the acceptance bound.
    let mut iterations = 0;
    while iterations < MAX_BISECTION_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        let d = excess(mid)?;
        if d == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if d > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    let (d_lo, pos_lo) = taxed_excess_demand(beliefs, lo, tax)?;
    let (d_hi, pos_hi) = taxed_excess_demand(beliefs, hi, tax)?;
    let (p, positions) = if d_lo.abs() <= d_hi.abs() {
        (lo, pos_lo)
    } else {
        (hi, pos_hi)
    };
    let result = finish(
        InvestmentProfile::from_positions(&positions)?,
        p,
        kind,
        iterations,
    )?;
    if hi - lo > OUTER_TOLERANCE || result.diagnostics.residual.abs() > OUTER_TOLERANCE {
        return Err(Error::SolverFailure(format!(
            "taxed bisection stalled at [{lo}, {hi}] with residual {}",
            result.diagnostics.residual
        )));
    }
    Ok(result)
}

fn logit(x: f64) -> f64 {
    (x / (1.0 - x)).ln()
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Large-`k` taxed price in closed form: the price whose log-odds equal the
/// mean log-odds of the beliefs.
pub fn taxed_equilibrium_asymptotic(beliefs: &BeliefProfile) -> Price {
    Price(logistic(mean_log_odds(beliefs)))
}

/// Leading-order taxed stakes, rescaled by `k`: `ln((1 - p)/p · b/(1 - b))`,
/// positive for A-traders and negative for B-traders.
pub fn taxed_rescaled_stake(b: f64, p: f64) -> f64 {
    logit(b) - logit(p)
}

/// Price at which the rescaled large-`k` stakes clear the market:
/// `Σ_{b_i > p} y_i / p + Σ_{b_i < p} y_i / (1 - p) = 0` with `y_i` from
/// [`taxed_rescaled_stake`]. This is the limit of the finite-`k` price; it
/// generally differs from [`taxed_equilibrium_asymptotic`] but always lies on
/// the same side of one half.
pub fn taxed_equilibrium_limit(beliefs: &BeliefProfile) -> Result<Price> {
    let first = beliefs.as_slice()[0];
    if beliefs.iter().all(|b| b == first) {
        return Price::new(first);
    }
    let balance = |p: f64| {
        beliefs
            .iter()
            .map(|b| {
                let y = taxed_rescaled_stake(b, p);
                if b > p {
                    y / p
                } else {
                    y / (1.0 - p)
                }
            })
            .sum::<f64>()
    };
    let (p, _) = bisect(balance, PRICE_EPSILON, 1.0 - PRICE_EPSILON, f64::EPSILON)?;
    Price::new(p)
}

/// Limit residual of [`taxed_rescaled_stake`] at price `p`.
fn rescaled_residual(beliefs: &BeliefProfile, p: f64) -> f64 {
    beliefs
        .iter()
        .map(|b| {
            let y = taxed_rescaled_stake(b, p);
            if b > p {
                y / p
            } else {
                y / (1.0 - p)
            }
        })
        .sum()
}

/// Dispatches to the solver for `kind`. The asymptotic taxed market has no
/// finite-`k` stakes: its profile is all zeros and its residual is the
/// rescaled-stake balance at the closed-form price.
pub fn solve(kind: MarketKind, beliefs: &BeliefProfile) -> Result<EquilibriumResult> {
    match kind {
        MarketKind::Naive => naive_equilibrium(beliefs),
        MarketKind::Kelly => kelly_equilibrium(beliefs),
        MarketKind::TaxedFinite { k } => taxed_equilibrium_finite(beliefs, TaxParams::new(k)?),
        MarketKind::TaxedAsymptotic => {
            let price = taxed_equilibrium_asymptotic(beliefs);
            Ok(EquilibriumResult {
                profile: InvestmentProfile::zeros(beliefs.len()),
                price,
                market_kind: kind,
                diagnostics: Diagnostics {
                    iterations: 0,
                    residual: rescaled_residual(beliefs, price.value()),
                    degenerate: true,
                },
            })
        }
    }
}

/// Mean of the per-agent belief log-odds `ln(b_i / (1 - b_i))`.
pub fn mean_log_odds(beliefs: &BeliefProfile) -> f64 {
    beliefs.iter().map(logit).sum::<f64>() / beliefs.len() as f64
}

/// Equilibrium price of `kind` and the decision it encodes. Prices within
/// `tol` of one half are ties; the asymptotic taxed market is decided by the
/// sign of [`mean_log_odds`] directly, with the same tolerance.
pub fn market_decision(
    kind: MarketKind,
    beliefs: &BeliefProfile,
    tol: f64,
) -> Result<(Price, Decision)> {
    match kind {
        MarketKind::TaxedAsymptotic => {
            let price = taxed_equilibrium_asymptotic(beliefs);
            Ok((price, Decision::from_sign(mean_log_odds(beliefs), tol)))
        }
        other => {
            let price = solve(other, beliefs)?.price;
            Ok((price, Decision::from_sign(price.value() - 0.5, tol)))
        }
    }
}

/// Log utility of holding `a_units` A-securities, `b_units` B-securities and
/// `cash`, i.e. `b ln(a_units + cash) + (1 - b) ln(b_units + cash)`.
fn holdings_utility(b: f64, a_units: f64, b_units: f64, cash: f64) -> f64 {
    b * (a_units + cash).ln() + (1.0 - b) * (b_units + cash).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FullInvestmentComparison {
    /// Optimal utility when the whole endowment must be spent (stake `b` on A).
    pub full_investment: f64,
    /// Utility of the one-sided Kelly stake that keeps the rest as cash.
    pub single_security: f64,
    pub single_position: Position,
}

/// Compares the best fully-invested split with the one-sided strategy that
/// replicates its payoffs, showing the one-side restriction loses nothing.
pub fn full_investment_equivalence(b: f64, p: f64) -> Result<FullInvestmentComparison> {
    check_price(p)?;
    let full_investment = holdings_utility(b, b / p, (1.0 - b) / (1.0 - p), 0.0);
    let single_position = kelly_best_response(b, p)?;
    let single_security = match single_position {
        Position::Flat => holdings_utility(b, 0.0, 0.0, 1.0),
        Position::A(s) => holdings_utility(b, s / p, 0.0, 1.0 - s),
        Position::B(s) => holdings_utility(b, 0.0, s / (1.0 - p), 1.0 - s),
    };
    Ok(FullInvestmentComparison {
        full_investment,
        single_security,
        single_position,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn beliefs(b: &[f64]) -> BeliefProfile {
        BeliefProfile::new(b.to_vec()).unwrap()
    }

    fn tax(k: f64) -> TaxParams {
        TaxParams::new(k).unwrap()
    }

    #[test]
    fn clearing_price_examples() {
        let s =
            InvestmentProfile::new(vec![1.0, 0.0, 0.0, 0.0, 1.0], vec![0.0, 1.0, 1.0, 1.0, 0.0])
                .unwrap();
        assert_eq!(clearing_price(&s).unwrap().value(), 0.4);

        let s = InvestmentProfile::new(vec![1.0, 1.0 / 3.0, 0.0, 0.0], vec![0.0, 0.0, 1.0, 1.0])
            .unwrap();
        assert_abs_diff_eq!(clearing_price(&s).unwrap().value(), 0.4, epsilon = 1e-15);

        let s = InvestmentProfile::new(vec![0.0, 0.0], vec![1.0, 0.5]).unwrap();
        assert_eq!(clearing_price(&s), Err(Error::UndefinedPrice));
    }

    #[test]
    fn profile_validation() {
        assert!(InvestmentProfile::new(vec![0.5], vec![0.5]).is_err());
        assert!(InvestmentProfile::new(vec![1.5], vec![0.0]).is_err());
        assert!(InvestmentProfile::new(vec![0.5], vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn payouts() {
        assert_eq!(payout(0.4, 1.0, true).unwrap(), 2.5);
        assert_eq!(payout(0.3, 0.0, false).unwrap(), 1.0);
        assert_eq!(payout(0.5, 0.5, true).unwrap(), 1.5);
        assert_eq!(payout(0.0, 0.5, true), Err(Error::InvalidPrice(0.0)));
        assert!(payout(1.0, 0.5, true).is_err());
    }

    #[test]
    fn naive_utility_cases() {
        assert_eq!(naive_utility(0.3, 0.8, Position::Flat).unwrap(), 1.0);
        assert_eq!(naive_utility(0.3, 0.8, Position::A(0.0)).unwrap(), 1.0);
        assert_abs_diff_eq!(
            naive_utility(0.4, 0.4, Position::A(1.0)).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            naive_utility(0.4, 0.9, Position::A(1.0)).unwrap(),
            2.25,
            epsilon = 1e-15
        );
        // B side: belief 0.3 in A means 0.7 in B, bought at 0.6.
        assert_abs_diff_eq!(
            naive_utility(0.4, 0.3, Position::B(1.0)).unwrap(),
            0.7 / 0.6,
            epsilon = 1e-15
        );
        assert!(naive_utility(1.0, 0.5, Position::Flat).is_err());
    }

    #[test]
    fn kelly_utility_cases() {
        assert_eq!(kelly_utility(0.3, 0.7, Position::A(0.0)).unwrap(), 0.0);
        assert_eq!(
            kelly_utility(0.3, 0.7, Position::A(1.0)).unwrap(),
            f64::NEG_INFINITY
        );
        let at = |s| kelly_utility(0.5, 0.9, Position::A(s)).unwrap();
        assert!(at(0.8) > at(0.79) && at(0.8) > at(0.81));
        // b = p: staying out is optimal.
        let flat = kelly_utility(0.6, 0.6, Position::Flat).unwrap();
        assert!(flat > kelly_utility(0.6, 0.6, Position::A(0.01)).unwrap());
        assert!(flat > kelly_utility(0.6, 0.6, Position::B(0.01)).unwrap());
    }

    #[test]
    fn naive_responses() {
        let r = naive_best_response(0.9, 0.4).unwrap();
        assert_eq!(r.a, Argmax::Point(1.0));
        assert_eq!(r.b, Argmax::Point(0.0));
        let r = naive_best_response(0.3, 0.4).unwrap();
        assert_eq!(r.a, Argmax::Point(0.0));
        assert_eq!(r.b, Argmax::Point(1.0));
        let r = naive_best_response(0.4, 0.4).unwrap();
        assert_eq!(r.a, Argmax::Indifferent);
        assert_eq!(r.b, Argmax::Indifferent);
    }

    #[test]
    fn kelly_responses() {
        let r = kelly_best_response(0.9, 0.52).unwrap();
        assert_eq!(r.side(), Some(Side::A));
        assert_abs_diff_eq!(r.fraction(), 0.38 / 0.48, epsilon = 1e-12);
        let r = kelly_best_response(0.3, 0.52).unwrap();
        assert_eq!(r.side(), Some(Side::B));
        assert_abs_diff_eq!(r.fraction(), 0.22 / 0.52, epsilon = 1e-12);
        assert_eq!(kelly_best_response(0.6, 0.6).unwrap(), Position::Flat);
        assert_abs_diff_eq!(
            kelly_best_response(0.9, 0.5).unwrap().fraction(),
            0.8,
            epsilon = 1e-15
        );
    }

    #[test]
    fn naive_first_example() {
        let r = naive_equilibrium(&beliefs(&[0.9, 0.3, 0.4, 0.4, 0.6])).unwrap();
        assert_eq!(r.price.value(), 0.4);
        assert_eq!(r.profile.a(), &[1.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(r.profile.b(), &[0.0, 1.0, 1.0, 1.0, 0.0]);
        assert!(r.diagnostics.residual.abs() < 1e-12);
    }

    #[test]
    fn naive_second_example() {
        let r = naive_equilibrium(&beliefs(&[0.8, 0.4, 0.4, 0.4])).unwrap();
        assert_eq!(r.price.value(), 0.4);
        assert_eq!(r.profile.a()[0], 1.0);
        assert_abs_diff_eq!(r.profile.a()[1], 1.0 / 3.0, epsilon = 1e-15);
        assert_eq!(&r.profile.a()[2..], &[0.0, 0.0]);
        assert_eq!(r.profile.b(), &[0.0, 0.0, 1.0, 1.0]);
        assert_abs_diff_eq!(
            clearing_price(&r.profile).unwrap().value(),
            0.4,
            epsilon = 1e-15
        );
    }

    #[test]
    fn naive_partial_b_investment() {
        let r = naive_equilibrium(&beliefs(&[0.6, 0.6])).unwrap();
        assert_eq!(r.price.value(), 0.6);
        assert_eq!(r.profile.a(), &[1.0, 0.0]);
        assert_eq!(r.profile.b()[0], 0.0);
        assert_abs_diff_eq!(r.profile.b()[1], 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn naive_single_agent_is_degenerate() {
        let r = naive_equilibrium(&beliefs(&[0.7])).unwrap();
        assert_eq!(r.price.value(), 0.7);
        assert!(r.diagnostics.degenerate);
        assert_eq!(r.profile, InvestmentProfile::zeros(1));
    }

    #[test]
    fn kelly_examples() {
        let r = kelly_equilibrium(&beliefs(&[0.9, 1.0 - 0.7, 1.0 - 0.6, 1.0 - 0.6, 0.6])).unwrap();
        assert_eq!(r.price.value(), 0.52);
        assert!(r.diagnostics.residual.abs() < 1e-12);
        let r = kelly_equilibrium(&beliefs(&[0.8, 1.0 - 0.6, 1.0 - 0.6, 1.0 - 0.6])).unwrap();
        assert_eq!(r.price.value(), 0.5);
        let r = kelly_equilibrium(&beliefs(&[0.35; 4])).unwrap();
        assert_eq!(r.price.value(), 0.35);
        assert!(r.diagnostics.degenerate);
    }

    #[test]
    fn tax_function_values() {
        assert_eq!(tax_function(0.0, 0.3, tax(2.0)).unwrap(), 0.0);
        assert_abs_diff_eq!(
            tax_function(1.0, 0.5, tax(1.0)).unwrap(),
            1.0 - (-1f64).exp(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            tax_function(0.7, 0.4, tax(1e-9)).unwrap(),
            0.7,
            epsilon = 1e-9
        );
        // Series check: T(x) = x - c x^2 / 2 + c^2 x^3 / 6 - ...
        let (x, p, k): (f64, f64, f64) = (0.2, 0.5, 0.01);
        let c = k * p / (1.0 - p);
        let series = x - c * x * x / 2.0 + c * c * x.powi(3) / 6.0 - c.powi(3) * x.powi(4) / 24.0
            + c.powi(4) * x.powi(5) / 120.0;
        assert_abs_diff_eq!(tax_function(x, p, tax(k)).unwrap(), series, epsilon = 1e-14);
        assert!(TaxParams::new(0.0).is_err());
        assert!(TaxParams::new(-1.0).is_err());
        assert!(TaxParams::new(f64::INFINITY).is_err());
    }

    #[test]
    fn taxed_foc_sign_at_zero() {
        for (b, p) in [(0.9, 0.5), (0.6, 0.55), (0.3, 0.2)] {
            let at_zero = taxed_marginal_utility(p, b, tax(3.0), 0.0);
            assert!(at_zero > 0.0);
            assert_abs_diff_eq!(at_zero, b * (1.0 - p) / p - (1.0 - b), epsilon = 1e-12);
        }
        assert!(taxed_marginal_utility(0.5, 0.4, tax(3.0), 0.0) < 0.0);
    }

    #[test]
    fn taxed_response_large_k() {
        let r = taxed_best_response(0.9, 0.5, tax(100.0)).unwrap();
        let asymptote = 9f64.ln() / 100.0;
        assert_eq!(r.side(), Some(Side::A));
        assert!(((r.fraction() - asymptote) / asymptote).abs() < 0.1);
        assert_abs_diff_eq!(r.fraction(), 0.021665061241138425, epsilon = 1e-10);
    }

    #[test]
    fn taxed_response_small_k_is_kelly() {
        for b in [0.55, 0.7, 0.9] {
            let r = taxed_best_response(b, 0.5, tax(1e-6)).unwrap();
            assert_abs_diff_eq!(r.fraction(), 2.0 * b - 1.0, epsilon = 1e-5);
        }
        let r = taxed_best_response(0.2, 0.5, tax(1e-6)).unwrap();
        assert_eq!(r.side(), Some(Side::B));
        assert_abs_diff_eq!(r.fraction(), 0.6, epsilon = 1e-5);
        assert_eq!(
            taxed_best_response(0.4, 0.4, tax(1.0)).unwrap(),
            Position::Flat
        );
    }

    #[test]
    fn taxed_repeated_belief() {
        let r = taxed_equilibrium_finite(&beliefs(&[0.3, 0.3, 0.3]), tax(5.0)).unwrap();
        assert_eq!(r.price.value(), 0.3);
        assert!(r.profile.positions().iter().all(|p| *p == Position::Flat));
    }

    #[test]
    fn taxed_finite_limits() {
        let b = beliefs(&[0.9, 0.3, 0.4, 0.4, 0.6]);
        let small = taxed_equilibrium_finite(&b, tax(1e-4)).unwrap();
        assert_abs_diff_eq!(small.price.value(), 0.52, epsilon = 1e-3);
        assert!(small.diagnostics.residual.abs() <= 1e-9);
        let big = taxed_equilibrium_finite(&b, tax(1000.0)).unwrap();
        let limit = taxed_equilibrium_limit(&b).unwrap();
        assert_abs_diff_eq!(big.price.value(), limit.value(), epsilon = 1e-4);
        assert!(big.price.value() > 0.5);
    }

    #[test]
    fn asymptotic_prices() {
        let p = taxed_equilibrium_asymptotic(&beliefs(&[0.9, 0.3, 0.4, 0.4, 0.6]));
        assert_abs_diff_eq!(p.value(), 0.5470831684550894, epsilon = 1e-12);
        let p = taxed_equilibrium_asymptotic(&beliefs(&[0.8, 0.4, 0.4, 0.4]));
        assert_abs_diff_eq!(p.value(), 0.5106170936515774, epsilon = 1e-12);
        assert_abs_diff_eq!(
            taxed_equilibrium_asymptotic(&beliefs(&[0.37])).value(),
            0.37,
            epsilon = 1e-15
        );
    }

    #[test]
    fn limit_price_on_first_example() {
        // Reference root computed independently with a bracketing solver.
        let p = taxed_equilibrium_limit(&beliefs(&[0.9, 0.3, 0.4, 0.4, 0.6])).unwrap();
        assert_abs_diff_eq!(p.value(), 0.53277881769699, epsilon = 1e-10);
    }

    #[test]
    fn solve_dispatch() {
        let b = beliefs(&[0.9, 0.3, 0.4, 0.4, 0.6]);
        assert_eq!(solve(MarketKind::Naive, &b).unwrap().price.value(), 0.4);
        assert_eq!(solve(MarketKind::Kelly, &b).unwrap().price.value(), 0.52);
        let asym = solve(MarketKind::TaxedAsymptotic, &b).unwrap();
        assert!(asym.diagnostics.degenerate);
        assert!(solve(MarketKind::TaxedFinite { k: -1.0 }, &b).is_err());
    }

    #[test]
    fn full_investment_cases() {
        let c = full_investment_equivalence(0.6, 0.6).unwrap();
        assert_abs_diff_eq!(c.full_investment, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c.single_security, 0.0, epsilon = 1e-15);
        let c = full_investment_equivalence(0.9, 0.5).unwrap();
        assert_abs_diff_eq!(c.single_position.fraction(), 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(c.full_investment, c.single_security, epsilon = 1e-12);
        let c = full_investment_equivalence(0.3, 0.6).unwrap();
        assert_eq!(c.single_position.side(), Some(Side::B));
        assert_abs_diff_eq!(c.full_investment, c.single_security, epsilon = 1e-12);
    }

    fn belief_vec(max: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.01f64..0.99, 1..max)
    }

    /// Mirror of the naive best-response conditions, written against the raw
    /// utility: nobody strictly prefers a different stake.
    fn is_naive_equilibrium(b: &[f64], r: &EquilibriumResult) -> bool {
        let p = r.price.value();
        r.profile.positions().iter().zip(b).all(|(pos, &bi)| {
            let u = naive_utility(p, bi, *pos).unwrap();
            [Position::Flat, Position::A(1.0), Position::B(1.0)]
                .iter()
                .all(|alt| naive_utility(p, bi, *alt).unwrap() <= u + 1e-12)
        })
    }

    proptest! {
        #[test]
        fn naive_profile_is_an_equilibrium(b in belief_vec(12)) {
            prop_assume!(b.len() >= 2);
            let r = naive_equilibrium(&BeliefProfile::new(b.clone()).unwrap()).unwrap();
            prop_assert!(is_naive_equilibrium(&b, &r));
            let p = r.price.value();
            let cleared = clearing_price(&r.profile).unwrap().value();
            prop_assert!((cleared - p).abs() < 1e-12, "{} vs {}", cleared, p);
        }

        #[test]
        fn naive_quantile_bounds(b in belief_vec(12)) {
            let r = naive_equilibrium(&BeliefProfile::new(b.clone()).unwrap()).unwrap();
            let p = r.price.value();
            let n = b.len() as f64;
            let above = b.iter().filter(|&&x| x > p).count() as f64;
            let at_or_above = b.iter().filter(|&&x| x >= p).count() as f64;
            let below = b.iter().filter(|&&x| x < p).count() as f64;
            let at_or_below = b.iter().filter(|&&x| x <= p).count() as f64;
            prop_assert!(above <= n * p + 1e-12 && n * p <= at_or_above + 1e-12);
            prop_assert!(below <= n * (1.0 - p) + 1e-12 && n * (1.0 - p) <= at_or_below + 1e-12);
        }

        #[test]
        fn naive_is_order_invariant(b in belief_vec(10), seed in any::<u64>()) {
            let mut shuffled = b.clone();
            let len = shuffled.len();
            for i in (1..len).rev() {
                shuffled.swap(i, (seed.rotate_left(i as u32) % (i as u64 + 1)) as usize);
            }
            let p1 = naive_equilibrium(&BeliefProfile::new(b).unwrap()).unwrap().price;
            let p2 = naive_equilibrium(&BeliefProfile::new(shuffled).unwrap()).unwrap().price;
            prop_assert_eq!(p1, p2);
        }

        #[test]
        fn kelly_clears(b in belief_vec(30)) {
            let bp = BeliefProfile::new(b).unwrap();
            let r = kelly_equilibrium(&bp).unwrap();
            prop_assert!(r.diagnostics.residual.abs() <= 1e-12);
            prop_assert!((r.price.value() - bp.mean()).abs() <= 1e-12);
        }

        #[test]
        fn kelly_response_is_local_max(b in 0.01f64..0.99, p in 0.01f64..0.99) {
            let r = kelly_best_response(b, p).unwrap();
            let s = r.fraction();
            prop_assume!(s > 0.011 && s < 0.989);
            let u = |x: f64| kelly_utility(p, b, Position::on(r.side().unwrap(), x)).unwrap();
            for d in [1e-4, 1e-2] {
                prop_assert!(u(s) > u(s + d) && u(s) > u(s - d));
            }
        }

        #[test]
        fn taxed_response_zeroes_derivative(b in 0.01f64..0.99, p in 0.01f64..0.99, k in 0.1f64..100.0) {
            let t = tax(k);
            let r = taxed_best_response(b, p, t).unwrap();
            if let Some(side) = r.side() {
                let (pp, bb) = match side { Side::A => (p, b), Side::B => (1.0 - p, 1.0 - b) };
                prop_assert!(taxed_marginal_utility(pp, bb, t, r.fraction()).abs() < 1e-10 * (1.0 + 1.0 / (1.0 - r.fraction())));
                let h = 1e-6;
                let u = |x: f64| taxed_utility(p, b, t, Position::on(side, x)).unwrap();
                let s = r.fraction();
                let fd = if s > h { (u(s + h) - u(s - h)) / (2.0 * h) } else { (u(s + h) - u(s)) / h };
                prop_assert!(fd.abs() <= 1e-6 || s <= h, "fd {} at s {}", fd, s);
            }
        }

        #[test]
        fn payout_conservation(b in belief_vec(10)) {
            let r = kelly_equilibrium(&BeliefProfile::new(b).unwrap()).unwrap();
            prop_assume!(!r.diagnostics.degenerate);
            let p = r.price.value();
            let staked = r.profile.total_a() + r.profile.total_b();
            // Winners' payouts equal all stakes in either state.
            let paid_if_a = r.profile.total_a() / p;
            let paid_if_b = r.profile.total_b() / (1.0 - p);
            prop_assert!((paid_if_a - staked).abs() < 1e-12);
            prop_assert!((paid_if_b - staked).abs() < 1e-12);
        }

        #[test]
        fn full_investment_matches(b in 0.01f64..0.99, p in 0.01f64..0.99) {
            let c = full_investment_equivalence(b, p).unwrap();
            prop_assert!((c.full_investment - c.single_security).abs() < 1e-12);
        }

        #[test]
        fn limit_and_asymptotic_agree_in_sign(b in belief_vec(9)) {
            let bp = BeliefProfile::new(b).unwrap();
            let a = taxed_equilibrium_asymptotic(&bp).value() - 0.5;
            let l = taxed_equilibrium_limit(&bp).unwrap().value() - 0.5;
            prop_assert!(a * l >= 0.0 || a.abs() < 1e-12 || l.abs() < 1e-12);
        }
    }
}

use infomarkets::accuracy::{
    exact_accuracy, monte_carlo_accuracy, AccuracyEstimate, Aggregator, EXACT_AGENT_CAP,
};
use infomarkets::equivalence::{check_scheme, sweep_signal_space, EquivalenceReport, Scheme};
use infomarkets::markets::{
    solve, taxed_best_response, taxed_equilibrium_asymptotic, taxed_equilibrium_finite,
    taxed_rescaled_stake, MarketKind, Position, TaxParams,
};
use infomarkets::model::{Decision, SignalProfile};
use infomarkets::oracle::{
    exhaustive_accuracy_oracle, grid_equilibrium_search, GridSpec, ACCURACY_AGENT_CAP,
    GRID_AGENT_CAP,
};
use infomarkets::voting::{weighted_margin, weights_egalitarian, VotingProfile, WeightScheme};
use infomarkets::TIE_TOLERANCE;
use serde_json::{json, Value};

use crate::config::{Agents, ExperimentConfig};
use crate::error::{CliError, Result};
use crate::output::{g17, opt_g17, Report};

pub const DEFAULT_TRIALS: u64 = 100_000;

/// The k values of the convergence figure.
pub const FIGURE_KS: [f64; 6] = [0.1, 0.2, 1.0, 2.0, 10.0, 20.0];

/// A report, plus the failure to signal after it has been written.
pub struct Outcome {
    pub report: Report,
    pub failure: Option<CliError>,
}

impl From<Report> for Outcome {
    fn from(report: Report) -> Self {
        Outcome {
            report,
            failure: None,
        }
    }
}

fn market_k(kind: MarketKind) -> Option<f64> {
    match kind {
        MarketKind::TaxedFinite { k } => Some(k),
        _ => None,
    }
}

fn signal_string(y: &SignalProfile) -> String {
    y.iter().map(|s| s.to_string()).collect()
}

fn side_name(p: Position) -> &'static str {
    match p {
        Position::Flat => "",
        Position::A(_) => "A",
        Position::B(_) => "B",
    }
}

pub fn cmd_solve(config: &ExperimentConfig) -> Result<Outcome> {
    let kind = config.market.unwrap_or(MarketKind::Naive);
    let beliefs = config.beliefs()?;
    let eq = solve(kind, &beliefs)?;
    let price = eq.price.value();
    let positions = eq.profile.positions();

    let agents: Vec<Value> = beliefs
        .iter()
        .zip(&positions)
        .enumerate()
        .map(|(i, (b, &pos))| {
            json!({
                "agent": i,
                "belief": b,
                "side": pos.side().map(|s| format!("{s:?}")),
                "fraction": pos.fraction(),
            })
        })
        .collect();
    let json = json!({
        "market": kind,
        "price": price,
        "residual": eq.diagnostics.residual,
        "iterations": eq.diagnostics.iterations,
        "degenerate": eq.diagnostics.degenerate,
        "profile": eq.profile,
        "agents": agents,
    });

    let rows = beliefs
        .iter()
        .zip(&positions)
        .enumerate()
        .map(|(i, (b, &pos))| {
            vec![
                kind.name().to_string(),
                opt_g17(market_k(kind)),
                i.to_string(),
                g17(b),
                side_name(pos).to_string(),
                g17(pos.fraction()),
                g17(price),
                g17(eq.diagnostics.residual),
                eq.diagnostics.iterations.to_string(),
                eq.diagnostics.degenerate.to_string(),
            ]
        })
        .collect();
    Ok(Report {
        json,
        header: vec![
            "market",
            "k",
            "agent",
            "belief",
            "side",
            "fraction",
            "price",
            "residual",
            "iterations",
            "degenerate",
        ],
        rows,
    }
    .into())
}

pub fn cmd_vote(config: &ExperimentConfig) -> Result<Outcome> {
    let scheme = config.weights.unwrap_or(WeightScheme::Egalitarian);
    let (votes, weights) = match &config.agents {
        Agents::Competences(q) => {
            let y = config
                .signals
                .as_ref()
                .ok_or_else(|| CliError::Config("signals: required to vote".into()))?;
            (VotingProfile::from_signals(y), scheme.weights(q)?)
        }
        Agents::Beliefs(b) => {
            if scheme != WeightScheme::Egalitarian {
                return Err(CliError::Config(format!(
                    "weights: {scheme} requires competences, not beliefs"
                )));
            }
            (
                VotingProfile::from_beliefs(b)?,
                weights_egalitarian(b.len())?,
            )
        }
    };
    let margin = weighted_margin(&votes, &weights)?;
    let decision = Decision::from_sign(margin, TIE_TOLERANCE);
    let vote_names: Vec<&str> = votes
        .as_slice()
        .iter()
        .map(|&v| if v { "A" } else { "B" })
        .collect();

    let json = json!({
        "weights_scheme": scheme.name(),
        "weights": weights.as_slice(),
        "votes": vote_names,
        "margin": margin,
        "decision": decision.to_string(),
    });
    let rows = weights
        .as_slice()
        .iter()
        .zip(&vote_names)
        .enumerate()
        .map(|(i, (w, v))| {
            vec![
                scheme.name().to_string(),
                i.to_string(),
                g17(*w),
                v.to_string(),
                g17(margin),
                decision.to_string(),
            ]
        })
        .collect();
    Ok(Report {
        json,
        header: vec![
            "weights_scheme",
            "agent",
            "weight",
            "vote",
            "margin",
            "decision",
        ],
        rows,
    }
    .into())
}

pub fn cmd_check_equivalence(config: &ExperimentConfig, exhaustive: bool) -> Result<Outcome> {
    let q = config.competences("check-equivalence")?;
    let schemes: Vec<Scheme> = match config.weights {
        None => Scheme::ALL.to_vec(),
        Some(w) => Scheme::ALL
            .into_iter()
            .filter(|s| s.weights() == w)
            .collect(),
    };
    let tax = match config.market {
        Some(MarketKind::TaxedFinite { k }) => Some(TaxParams::new(k)?),
        _ => None,
    };

    let mut records: Vec<(SignalProfile, EquivalenceReport)> = Vec::new();
    for scheme in schemes {
        if exhaustive {
            records.extend(sweep_signal_space(scheme, q, tax)?);
        } else {
            let y = config.signals.as_ref().ok_or_else(|| {
                CliError::Config("signals: required unless --exhaustive is given".into())
            })?;
            records.push((y.clone(), check_scheme(scheme, q, y, tax)?));
        }
    }

    let violations = records
        .iter()
        .filter(|(_, r)| r.violates_guarantee())
        .count();
    let json = Value::Array(
        records
            .iter()
            .map(|(y, r)| {
                json!({
                    "scheme": r.scheme.name(),
                    "market": r.market_kind,
                    "signals": signal_string(y),
                    "election": r.election.to_string(),
                    "market_decision": r.market.to_string(),
                    "agree": r.agree,
                    "guaranteed": r.guaranteed,
                    "price": r.price,
                    "weighted_margin": r.weighted_margin,
                })
            })
            .collect(),
    );
    let rows = records
        .iter()
        .map(|(y, r)| {
            vec![
                r.scheme.name().to_string(),
                r.market_kind.name().to_string(),
                opt_g17(market_k(r.market_kind)),
                signal_string(y),
                r.election.to_string(),
                r.market.to_string(),
                r.agree.to_string(),
                r.guaranteed.to_string(),
                g17(r.price),
                g17(r.weighted_margin),
            ]
        })
        .collect();
    Ok(Outcome {
        report: Report {
            json,
            header: vec![
                "scheme",
                "market",
                "k",
                "signals",
                "election",
                "market_decision",
                "agree",
                "guaranteed",
                "price",
                "weighted_margin",
            ],
            rows,
        },
        failure: (violations > 0).then_some(CliError::Violation(violations)),
    })
}

fn aggregators(config: &ExperimentConfig) -> Vec<Aggregator> {
    let mut out: Vec<Aggregator> = match config.weights {
        Some(w) => vec![Aggregator::weighted_majority(w)],
        None => WeightScheme::ALL
            .into_iter()
            .map(Aggregator::weighted_majority)
            .collect(),
    };
    if let Some(kind) = config.market {
        out.push(Aggregator::market(kind));
    }
    out
}

pub fn cmd_accuracy(config: &ExperimentConfig) -> Result<Outcome> {
    let q = config.competences("accuracy")?;
    let use_exact = config.trials.is_none() && q.len() <= EXACT_AGENT_CAP;
    let mut results: Vec<(String, AccuracyEstimate)> = Vec::new();
    for agg in aggregators(config) {
        let est = if use_exact {
            exact_accuracy(&agg, q)?
        } else {
            monte_carlo_accuracy(
                &agg,
                q,
                config.trials.unwrap_or(DEFAULT_TRIALS),
                config.seed,
            )?
        };
        results.push((agg.name().to_string(), est));
    }

    let json = Value::Array(
        results
            .iter()
            .map(|(name, e)| {
                json!({
                    "aggregator": name,
                    "method": e.method,
                    "value": e.value,
                    "std_error": e.std_error,
                    "trials": e.trials,
                    "seed": e.trials.map(|_| config.seed),
                    "tie_mass": e.tie_mass,
                    "given_a": e.conditional.map(|c| c[0]),
                    "given_b": e.conditional.map(|c| c[1]),
                })
            })
            .collect(),
    );
    let rows = results
        .iter()
        .map(|(name, e)| {
            vec![
                name.clone(),
                serde_json::to_value(e.method)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_string))
                    .unwrap_or_default(),
                g17(e.value),
                opt_g17(e.std_error),
                e.trials.map(|t| t.to_string()).unwrap_or_default(),
                e.trials
                    .map(|_| config.seed.to_string())
                    .unwrap_or_default(),
                g17(e.tie_mass),
                opt_g17(e.conditional.map(|c| c[0])),
                opt_g17(e.conditional.map(|c| c[1])),
            ]
        })
        .collect();
    Ok(Report {
        json,
        header: vec![
            "aggregator",
            "method",
            "value",
            "std_error",
            "trials",
            "seed",
            "tie_mass",
            "given_a",
            "given_b",
        ],
        rows,
    }
    .into())
}

struct SweepRow {
    k: f64,
    agent: usize,
    belief: f64,
    strategy: Option<f64>,
    asymptotic_strategy: Option<f64>,
    price: Option<f64>,
    asymptotic_price: f64,
    error: Option<String>,
}

fn sweep_one(
    beliefs: &infomarkets::model::BeliefProfile,
    k: f64,
) -> infomarkets::Result<(f64, Vec<f64>)> {
    let tax = TaxParams::new(k)?;
    let p = taxed_equilibrium_finite(beliefs, tax)?.price.value();
    let strategies = beliefs
        .iter()
        .map(|b| taxed_best_response(b, p, tax).map(|pos| pos.a() - pos.b()))
        .collect::<infomarkets::Result<Vec<_>>>()?;
    Ok((p, strategies))
}

pub fn cmd_sweep_k(config: &ExperimentConfig, ks: &[f64]) -> Result<Outcome> {
    match config.market {
        None | Some(MarketKind::TaxedFinite { .. }) | Some(MarketKind::TaxedAsymptotic) => {}
        Some(other) => {
            return Err(CliError::Config(format!(
                "market: sweep-k needs a taxed market, got {other}"
            )))
        }
    }
    let ks: Vec<f64> = if !ks.is_empty() {
        ks.to_vec()
    } else if let Some(k) = config.k {
        vec![k]
    } else {
        FIGURE_KS.to_vec()
    };
    let beliefs = config.beliefs()?;
    let asymptotic_price = taxed_equilibrium_asymptotic(&beliefs).value();

    let mut rows = Vec::new();
    for &k in &ks {
        match sweep_one(&beliefs, k) {
            Ok((p, strategies)) => {
                for (agent, (b, s)) in beliefs.iter().zip(strategies).enumerate() {
                    rows.push(SweepRow {
                        k,
                        agent,
                        belief: b,
                        strategy: Some(s),
                        asymptotic_strategy: Some(taxed_rescaled_stake(b, p) / k),
                        price: Some(p),
                        asymptotic_price,
                        error: None,
                    });
                }
            }
            Err(e) => {
                for (agent, b) in beliefs.iter().enumerate() {
                    rows.push(SweepRow {
                        k,
                        agent,
                        belief: b,
                        strategy: None,
                        asymptotic_strategy: None,
                        price: None,
                        asymptotic_price,
                        error: Some(e.to_string()),
                    });
                }
            }
        }
    }

    let any_error = rows.iter().any(|r| r.error.is_some());
    let mut header = vec![
        "k",
        "agent",
        "belief",
        "strategy",
        "asymptotic_strategy",
        "price",
        "asymptotic_price",
    ];
    if any_error {
        header.push("error");
    }
    let json = Value::Array(
        rows.iter()
            .map(|r| {
                let mut v = json!({
                    "k": r.k,
                    "agent": r.agent,
                    "belief": r.belief,
                    "strategy": r.strategy,
                    "asymptotic_strategy": r.asymptotic_strategy,
                    "price": r.price,
                    "asymptotic_price": r.asymptotic_price,
                });
                if any_error {
                    v["error"] = json!(r.error);
                }
                v
            })
            .collect(),
    );
    let table = rows
        .iter()
        .map(|r| {
            let mut cells = vec![
                g17(r.k),
                r.agent.to_string(),
                g17(r.belief),
                opt_g17(r.strategy),
                opt_g17(r.asymptotic_strategy),
                opt_g17(r.price),
                g17(r.asymptotic_price),
            ];
            if any_error {
                cells.push(r.error.clone().unwrap_or_default());
            }
            cells
        })
        .collect();
    Ok(Report {
        json,
        header,
        rows: table,
    }
    .into())
}

struct Check {
    check: &'static str,
    subject: String,
    expected: String,
    found: String,
    pass: bool,
}

/// Grid used for Kelly and taxed markets, where the oracle maximizes
/// utilities over a strategy grid at every price.
fn coarse_grid() -> GridSpec {
    GridSpec::new(2001, 1001, 1e-9).expect("valid grid")
}

pub fn cmd_verify(config: &ExperimentConfig) -> Result<Outcome> {
    let mut checks = Vec::new();
    let n = config.len();

    let has_beliefs = matches!(config.agents, Agents::Beliefs(_)) || config.signals.is_some();
    if has_beliefs && n <= GRID_AGENT_CAP {
        let beliefs = config.beliefs()?;
        let kinds: Vec<MarketKind> = match config.market {
            Some(kind) => vec![kind],
            None => vec![MarketKind::Naive, MarketKind::Kelly],
        };
        for kind in kinds {
            if kind == MarketKind::TaxedAsymptotic {
                continue;
            }
            let (grid, slack) = match kind {
                MarketKind::Naive => (GridSpec::default(), 1e-12),
                _ => {
                    let g = coarse_grid();
                    (g, 4.0 * g.price_step())
                }
            };
            let p = solve(kind, &beliefs)?.price.value();
            let found = grid_equilibrium_search(&beliefs, kind, &grid)?;
            let pass = if kind == MarketKind::Naive {
                found.len() == 1 && found[0].is_sharp() && found[0].contains(p, slack)
            } else {
                found.iter().any(|iv| iv.contains(p, slack))
            };
            checks.push(Check {
                check: "equilibrium_price",
                subject: kind.to_string(),
                expected: g17(p),
                found: found
                    .iter()
                    .map(|iv| format!("[{} {}]", g17(iv.lo), g17(iv.hi)))
                    .collect::<Vec<_>>()
                    .join(" "),
                pass,
            });
        }
    }

    if let Agents::Competences(q) = &config.agents {
        if n <= ACCURACY_AGENT_CAP.min(EXACT_AGENT_CAP) {
            for agg in aggregators(config) {
                let exact = exact_accuracy(&agg, q)?.value;
                let oracle = exhaustive_accuracy_oracle(q, &agg)?.value;
                checks.push(Check {
                    check: "accuracy",
                    subject: agg.name().to_string(),
                    expected: g17(exact),
                    found: g17(oracle),
                    pass: (exact - oracle).abs() <= 1e-12,
                });
            }
        }
    }

    let failed = checks.iter().filter(|c| !c.pass).count();
    let json = Value::Array(
        checks
            .iter()
            .map(|c| {
                json!({
                    "check": c.check,
                    "subject": c.subject,
                    "expected": c.expected,
                    "found": c.found,
                    "pass": c.pass,
                })
            })
            .collect(),
    );
    let rows = checks
        .iter()
        .map(|c| {
            vec![
                c.check.to_string(),
                c.subject.clone(),
                c.expected.clone(),
                c.found.clone(),
                c.pass.to_string(),
            ]
        })
        .collect();
    Ok(Outcome {
        report: Report {
            json,
            header: vec!["check", "subject", "expected", "found", "pass"],
            rows,
        },
        failure: (failed > 0).then_some(CliError::Verification(failed)),
    })
}

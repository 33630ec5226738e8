use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use infomarkets::markets::MarketKind;
use infomarkets::model::{
    beliefs_from_signals, BeliefProfile, CompetenceProfile, ModelConfig, Signal, SignalProfile,
};
use infomarkets::voting::WeightScheme;
use serde::Deserialize;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(format!("unknown format {s:?} (expected csv or json)")),
        }
    }
}

/// Market name without its tax parameter; `k` is carried separately until
/// validation pairs the two.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarketName {
    Naive,
    Kelly,
    TaxedAsymptotic,
    TaxedFinite,
}

impl FromStr for MarketName {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "naive" => Ok(MarketName::Naive),
            "kelly" => Ok(MarketName::Kelly),
            "taxed_asymptotic" => Ok(MarketName::TaxedAsymptotic),
            "taxed_finite" => Ok(MarketName::TaxedFinite),
            _ => Err(format!(
                "unknown market kind {s:?} (expected naive, kelly, taxed_asymptotic or taxed_finite)"
            )),
        }
    }
}

pub fn parse_weights(s: &str) -> std::result::Result<WeightScheme, String> {
    s.parse::<WeightScheme>().map_err(|_| {
        format!("unknown weight scheme {s:?} (expected egalitarian, linear or log_odds)")
    })
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAgent {
    competence: Option<f64>,
    belief: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    path: Option<PathBuf>,
    format: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    agents: Vec<RawAgent>,
    signals: Option<Vec<String>>,
    market: Option<String>,
    k: Option<f64>,
    weights: Option<String>,
    seed: Option<u64>,
    trials: Option<u64>,
    prior: Option<f64>,
    endowment: Option<f64>,
    output: Option<RawOutput>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub market: Option<MarketName>,
    pub k: Option<f64>,
    pub weights: Option<WeightScheme>,
    pub seed: Option<u64>,
    pub trials: Option<u64>,
    pub format: Option<Format>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub enum Agents {
    Competences(CompetenceProfile),
    Beliefs(BeliefProfile),
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub agents: Agents,
    pub signals: Option<SignalProfile>,
    pub market: Option<MarketKind>,
    /// Raw `k`, also kept for the k-sweep when the market is not finite-taxed.
    pub k: Option<f64>,
    pub weights: Option<WeightScheme>,
    pub seed: u64,
    pub trials: Option<u64>,
    pub output: Option<PathBuf>,
    pub format: Format,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, overrides).map_err(|e| match e {
            CliError::Config(msg) => invalid(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str, overrides: &Overrides) -> Result<Self> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| invalid(e.to_string().trim_end().to_string()))?;
        Self::validate(raw, overrides)
    }

    fn validate(raw: RawConfig, o: &Overrides) -> Result<Self> {
        let agents = validate_agents(&raw.agents)?;
        let n = match &agents {
            Agents::Competences(q) => q.len(),
            Agents::Beliefs(b) => b.len(),
        };

        let signals = match raw.signals {
            None => None,
            Some(list) => {
                if list.len() != n {
                    return Err(invalid(format!(
                        "signals: expected {n} entries to match agents, found {}",
                        list.len()
                    )));
                }
                let parsed = list
                    .iter()
                    .enumerate()
                    .map(|(i, s)| match s.as_str() {
                        "A" => Ok(Signal::A),
                        "B" => Ok(Signal::B),
                        _ => Err(invalid(format!("signals[{i}]: {s:?} is not A or B"))),
                    })
                    .collect::<Result<Vec<_>>>()?;
                if matches!(agents, Agents::Beliefs(_)) {
                    return Err(invalid(
                        "signals: only allowed when agents are given by competence",
                    ));
                }
                Some(SignalProfile::new(parsed))
            }
        };

        let market_name = match o.market {
            Some(m) => Some(m),
            None => raw
                .market
                .as_deref()
                .map(str::parse)
                .transpose()
                .map_err(|e| invalid(format!("market: {e}")))?,
        };
        let k = o.k.or(raw.k);
        if let Some(k) = k {
            if !(k.is_finite() && k > 0.0) {
                return Err(invalid(format!("k: must be positive and finite, got {k}")));
            }
        }
        let market = match (market_name, k) {
            (Some(MarketName::TaxedFinite), Some(k)) => Some(MarketKind::TaxedFinite { k }),
            (Some(MarketName::TaxedFinite), None) => {
                return Err(invalid("k: required when market = taxed_finite"))
            }
            (Some(_), Some(_)) => {
                return Err(invalid("k: only allowed when market = taxed_finite"))
            }
            (Some(MarketName::Naive), None) => Some(MarketKind::Naive),
            (Some(MarketName::Kelly), None) => Some(MarketKind::Kelly),
            (Some(MarketName::TaxedAsymptotic), None) => Some(MarketKind::TaxedAsymptotic),
            (None, _) => None,
        };

        let weights = match o.weights {
            Some(w) => Some(w),
            None => raw
                .weights
                .as_deref()
                .map(parse_weights)
                .transpose()
                .map_err(|e| invalid(format!("weights: {e}")))?,
        };

        let trials = o.trials.or(raw.trials);
        if trials == Some(0) {
            return Err(invalid("trials: must be positive"));
        }

        let prior = raw.prior.unwrap_or(0.5);
        if prior != 0.5 {
            return Err(invalid(format!(
                "prior: only 0.5 is supported, got {prior}"
            )));
        }
        let endowment = raw.endowment.unwrap_or(1.0);
        if endowment != 1.0 {
            return Err(invalid(format!(
                "endowment: only 1 is supported, got {endowment}"
            )));
        }
        ModelConfig::new(prior, endowment)?;

        let (raw_path, raw_format) = match raw.output {
            Some(out) => (out.path, out.format),
            None => (None, None),
        };
        let format = match o.format {
            Some(f) => f,
            None => raw_format
                .as_deref()
                .map(str::parse)
                .transpose()
                .map_err(|e| invalid(format!("output.format: {e}")))?
                .unwrap_or(Format::Csv),
        };

        Ok(ExperimentConfig {
            agents,
            signals,
            market,
            k,
            weights,
            seed: o.seed.or(raw.seed).unwrap_or(0),
            trials,
            output: o.output.clone().or(raw_path),
            format,
        })
    }

    pub fn len(&self) -> usize {
        match &self.agents {
            Agents::Competences(q) => q.len(),
            Agents::Beliefs(b) => b.len(),
        }
    }

    pub fn competences(&self, purpose: &str) -> Result<&CompetenceProfile> {
        match &self.agents {
            Agents::Competences(q) => Ok(q),
            Agents::Beliefs(_) => Err(invalid(format!(
                "agents: {purpose} requires competences, not beliefs"
            ))),
        }
    }

    /// Beliefs given directly, or formed from competences and signals.
    pub fn beliefs(&self) -> Result<BeliefProfile> {
        match &self.agents {
            Agents::Beliefs(b) => Ok(b.clone()),
            Agents::Competences(q) => {
                let y = self
                    .signals
                    .as_ref()
                    .ok_or_else(|| invalid("signals: required to form beliefs from competences"))?;
                Ok(beliefs_from_signals(q, y)?)
            }
        }
    }
}

fn validate_agents(raw: &[RawAgent]) -> Result<Agents> {
    if raw.is_empty() {
        return Err(invalid("agents: must list at least one agent"));
    }
    let by_competence = raw[0].competence.is_some();
    let mut values = Vec::with_capacity(raw.len());
    for (i, a) in raw.iter().enumerate() {
        let v = match (a.competence, a.belief) {
            (Some(_), Some(_)) | (None, None) => {
                return Err(invalid(format!(
                    "agents[{i}]: give exactly one of competence or belief"
                )))
            }
            (Some(q), None) if by_competence => q,
            (None, Some(b)) if !by_competence => b,
            _ => {
                return Err(invalid(format!(
                    "agents[{i}]: mixes competence and belief entries"
                )))
            }
        };
        if by_competence && !(v > 0.5 && v < 1.0) {
            return Err(invalid(format!(
                "agents[{i}].competence: {v} is not in (0.5, 1)"
            )));
        }
        if !by_competence && !(v > 0.0 && v < 1.0) {
            return Err(invalid(format!("agents[{i}].belief: {v} is not in (0, 1)")));
        }
        values.push(v);
    }
    Ok(if by_competence {
        Agents::Competences(CompetenceProfile::new(values)?)
    } else {
        Agents::Beliefs(BeliefProfile::new(values)?)
    })
}

//! Flat `key = value` experiment configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Lists are comma
//! separated. Every key is optional; defaults depend on `scenario`. See
//! `docs/config.md` for the full key table.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;

use crate::baselines::Algorithm;
use crate::error::{Error, Result};
use crate::ewc::{ExpertSelection, DEFAULT_ETA};
use crate::noncompliance::FitConfig;
use crate::simgen::ChoiceMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Travel,
    Restaurant,
}

impl FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "travel" => Ok(Scenario::Travel),
            "restaurant" => Ok(Scenario::Restaurant),
            other => Err(Error::Config(format!("unknown scenario '{other}'"))),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::Travel => "travel",
            Scenario::Restaurant => "restaurant",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KChoice {
    Fixed(usize),
    /// Chosen per cell by training replay loss.
    Auto(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    /// Anchoring scales of the travel populations, one scenario each.
    pub betas: Vec<f64>,
    pub algorithms: Vec<Algorithm>,
    pub seeds: Vec<u64>,
    pub k: KChoice,
    pub eta: f64,
    pub alpha: f64,
    pub selection: ExpertSelection,
    pub choice_mode: ChoiceMode,
    pub fit: FitConfig,
    pub n_train: usize,
    pub n_test: usize,
    pub rounds: usize,
    /// Number of generated option sets used to label each test user's true
    /// cluster.
    pub oracle_probes: usize,
    /// Restaurant inputs; when absent the bundled synthetic fixture is used.
    pub catalog: Option<PathBuf>,
    pub sessions: Vec<PathBuf>,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn travel() -> Self {
        Self {
            scenario: Scenario::Travel,
            betas: vec![0.0, 1.0, 10.0],
            algorithms: vec![
                Algorithm::Ewc,
                Algorithm::Linucb,
                Algorithm::Dynucb,
                Algorithm::NoncomplianceOnly,
                Algorithm::Ftl,
                Algorithm::WithoutNoncompliance,
                Algorithm::WithoutUi,
                Algorithm::OracleCluster,
                Algorithm::OracleTheta,
            ],
            seeds: (0..5).collect(),
            k: KChoice::Fixed(6),
            eta: DEFAULT_ETA,
            alpha: crate::baselines::linucb::DEFAULT_ALPHA,
            selection: ExpertSelection::Sample,
            choice_mode: ChoiceMode::Softmax,
            fit: FitConfig::travel(),
            n_train: 446,
            n_test: 298,
            rounds: 40,
            oracle_probes: 500,
            catalog: None,
            sessions: Vec::new(),
            out: None,
        }
    }

    pub fn restaurant() -> Self {
        Self {
            scenario: Scenario::Restaurant,
            betas: Vec::new(),
            algorithms: vec![
                Algorithm::Ewc,
                Algorithm::Linucb,
                Algorithm::Dynucb,
                Algorithm::NoncomplianceOnly,
                Algorithm::Ftl,
                Algorithm::WithoutUi,
            ],
            seeds: (0..10).collect(),
            k: KChoice::Fixed(8),
            fit: FitConfig::restaurant(),
            n_train: crate::datasets::N_TRAIN,
            n_test: crate::datasets::N_TEST,
            ..Self::travel()
        }
    }

    pub fn for_scenario(s: Scenario) -> Self {
        match s {
            Scenario::Travel => Self::travel(),
            Scenario::Restaurant => Self::restaurant(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.seeds.is_empty() {
            return bad("seeds must be non-empty".into());
        }
        if self.algorithms.is_empty() {
            return bad("algorithms must be non-empty".into());
        }
        if self.scenario == Scenario::Travel && self.betas.is_empty() {
            return bad("travel scenario needs at least one beta".into());
        }
        if let Some(b) = self.betas.iter().find(|b| !(**b >= 0.0)) {
            return bad(format!("beta must be nonnegative, got {b}"));
        }
        if self.scenario == Scenario::Restaurant {
            if let Some(a) = self.algorithms.iter().find(|a| a.needs_truth()) {
                return bad(format!("{a} needs generator truth, which the restaurant scenario lacks"));
            }
        }
        match &self.k {
            KChoice::Fixed(0) => return bad("K must be positive".into()),
            KChoice::Auto(c) if c.is_empty() || c.contains(&0) => {
                return bad("k_candidates must be non-empty positive integers".into())
            }
            _ => {}
        }
        if !(self.eta > 0.0) {
            return bad("eta must be positive".into());
        }
        if !(self.alpha >= 0.0) {
            return bad("alpha must be nonnegative".into());
        }
        if self.n_train == 0 || self.n_test == 0 || self.rounds == 0 || self.oracle_probes == 0 {
            return bad("n_train, n_test, rounds and oracle_probes must be positive".into());
        }
        if self.catalog.is_some() != !self.sessions.is_empty() {
            return bad("catalog and sessions must be given together".into());
        }
        self.fit.validate()
    }
}

fn list<T: FromStr>(v: &str) -> std::result::Result<Vec<T>, String>
where
    T::Err: fmt::Display,
{
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| format!("'{s}': {e}")))
        .collect()
}

fn one<T: FromStr>(v: &str) -> std::result::Result<T, String>
where
    T::Err: fmt::Display,
{
    v.trim().parse::<T>().map_err(|e| format!("'{}': {e}", v.trim()))
}

pub const KEYS: &[&str] = &[
    "scenario",
    "beta",
    "algorithms",
    "seeds",
    "K",
    "k_candidates",
    "eta",
    "alpha",
    "selection",
    "choice_mode",
    "learning_rate",
    "l2_penalty",
    "max_epochs",
    "param_tolerance",
    "n_train",
    "n_test",
    "rounds",
    "oracle_probes",
    "catalog",
    "sessions",
    "out",
];

/// Parse a configuration file. Unknown keys and repeated keys are errors.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut entries: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: i + 1,
            reason: "expected key = value".into(),
        })?;
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(Error::Parse {
                line: i + 1,
                reason: format!("unknown key '{key}'"),
            });
        }
        if entries.insert(key, (i + 1, value.trim())).is_some() {
            return Err(Error::Parse {
                line: i + 1,
                reason: format!("key '{key}' given twice"),
            });
        }
    }

    let scenario = match entries.get("scenario") {
        Some((line, v)) => v.parse::<Scenario>().map_err(|e| Error::Parse {
            line: *line,
            reason: e.to_string(),
        })?,
        None => Scenario::Travel,
    };
    let mut cfg = ExperimentConfig::for_scenario(scenario);
    for (key, (line, v)) in &entries {
        let applied: std::result::Result<(), String> = (|| {
            match *key {
                "scenario" => {}
                "beta" => cfg.betas = list(v)?,
                "algorithms" => cfg.algorithms = list(v)?,
                "seeds" => cfg.seeds = list(v)?,
                "K" => {
                    cfg.k = if v.trim() == "auto" {
                        match &cfg.k {
                            KChoice::Auto(c) => KChoice::Auto(c.clone()),
                            KChoice::Fixed(_) => KChoice::Auto((2..=10).collect()),
                        }
                    } else {
                        KChoice::Fixed(one(v)?)
                    }
                }
                "k_candidates" => {
                    let c: Vec<usize> = list(v)?;
                    if entries.get("K").map(|(_, k)| k.trim()) == Some("auto") {
                        cfg.k = KChoice::Auto(c);
                    } else {
                        return Err("k_candidates requires K = auto".into());
                    }
                }
                "eta" => cfg.eta = one(v)?,
                "alpha" => cfg.alpha = one(v)?,
                "selection" => {
                    cfg.selection = match v.trim() {
                        "sample" => ExpertSelection::Sample,
                        "argmax_weight" => ExpertSelection::ArgmaxWeight,
                        other => return Err(format!("unknown selection '{other}'")),
                    }
                }
                "choice_mode" => {
                    cfg.choice_mode = match v.trim() {
                        "softmax" => ChoiceMode::Softmax,
                        "argmax" => ChoiceMode::Argmax,
                        other => return Err(format!("unknown choice_mode '{other}'")),
                    }
                }
                "learning_rate" => cfg.fit.learning_rate = one(v)?,
                "l2_penalty" => cfg.fit.l2_penalty = one(v)?,
                "max_epochs" => cfg.fit.max_epochs = one(v)?,
                "param_tolerance" => cfg.fit.param_tolerance = one(v)?,
                "n_train" => cfg.n_train = one(v)?,
                "n_test" => cfg.n_test = one(v)?,
                "rounds" => cfg.rounds = one(v)?,
                "oracle_probes" => cfg.oracle_probes = one(v)?,
                "catalog" => cfg.catalog = Some(PathBuf::from(v.trim())),
                "sessions" => cfg.sessions = list(v)?,
                "out" => cfg.out = Some(PathBuf::from(v.trim())),
                _ => unreachable!("key list checked above"),
            }
            Ok(())
        })();
        applied.map_err(|reason| Error::Parse { line: *line, reason })?;
    }
    cfg.validate()?;
    Ok(cfg)
}

//! Experiment cells: offline training, then round-robin online evaluation of
//! every configured learner on the same test users.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExperimentConfig, KChoice, Scenario};
use crate::baselines::{build_learner, oracle_cluster_labels, Algorithm, Assets};
use crate::choice;
use crate::clustering::{self, DistanceMode, DEFAULT_MAX_ITERS};
use crate::datasets::{self, fixture};
use crate::error::{Error, Result};
use crate::ewc::{self, ContextWarmStart, ExpertSet, WarmStartConfig};
use crate::learner::{Feedback, Learner};
use crate::model::{Dataset, InteractionRound, UserContext, UserId};
use crate::noncompliance::{self, FitConfig};
use crate::seed;
use crate::simgen::{self, GenConfig, Population};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RegretMode {
    /// Learner loss minus the loss of recommending with the true preference.
    OracleRelative,
    /// Plain 0-1 loss of the recommendation.
    Absolute,
}

impl RegretMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RegretMode::OracleRelative => "oracle_relative",
            RegretMode::Absolute => "absolute",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegretCurve {
    pub scenario: String,
    pub algorithm: Algorithm,
    pub seed: u64,
    pub mode: RegretMode,
    /// Cumulative regret after each global round.
    pub values: Vec<f64>,
}

impl RegretCurve {
    pub fn final_value(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }
}

/// Offline artefacts of one cell.
#[derive(Debug, Clone, Serialize)]
pub struct CellInfo {
    pub scenario: String,
    pub seed: u64,
    pub k: usize,
    pub train_users: usize,
    pub test_users: usize,
    pub test_rounds: usize,
    pub fit_failures: usize,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ExperimentResult {
    /// Curves in the scenario's primary mode.
    pub curves: Vec<RegretCurve>,
    /// Absolute-loss curves for scenarios whose primary mode is
    /// oracle-relative; empty otherwise.
    pub absolute: Vec<RegretCurve>,
    pub cells: Vec<CellInfo>,
}

impl ExperimentResult {
    /// Seed-averaged final value of the primary curves.
    pub fn mean_final(&self, scenario: &str, alg: Algorithm) -> Option<f64> {
        let v: Vec<f64> = self
            .curves
            .iter()
            .filter(|c| c.scenario == scenario && c.algorithm == alg)
            .map(RegretCurve::final_value)
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn scenarios(&self) -> Vec<String> {
        let mut s: Vec<String> = self.curves.iter().map(|c| c.scenario.clone()).collect();
        s.dedup();
        s.sort();
        s.dedup();
        s
    }
}

pub fn travel_label(beta: f64) -> String {
    format!("travel_beta{beta}")
}

/// Experts and warm start from a training dataset.
fn train_experts(
    train: &Dataset,
    fit: &FitConfig,
    k: usize,
    seed: u64,
) -> Result<(ExpertSet, ContextWarmStart, usize)> {
    let fitted = noncompliance::fit_population(train, fit, seed::derive(seed, "fit", 0))?;
    if fitted.thetas.len() < k {
        return Err(Error::Config(format!(
            "only {} training users could be fitted, K = {k}",
            fitted.thetas.len()
        )));
    }
    let model = clustering::fit(
        &fitted.thetas,
        train,
        k,
        seed::derive(seed, "cluster", 0),
        DistanceMode::LossGuided,
        DEFAULT_MAX_ITERS,
    )?;
    let contexts: BTreeMap<UserId, UserContext> =
        train.users.iter().map(|u| (u.user_id, u.context.clone())).collect();
    let warm = ewc::warm_start_fit(&contexts, &model.labels, k, &WarmStartConfig::default())?;
    Ok((model.experts(), warm, fitted.failures.len()))
}

fn choose_k(cfg: &ExperimentConfig, train: &Dataset, seed: u64) -> Result<usize> {
    match &cfg.k {
        KChoice::Fixed(k) => Ok(*k),
        KChoice::Auto(candidates) => {
            let fitted = noncompliance::fit_population(train, &cfg.fit, seed::derive(seed, "fit", 0))?;
            Ok(clustering::select_k(&fitted.thetas, train, candidates, seed::derive(seed, "cluster", 0), cfg.eta)?.k)
        }
    }
}

fn base_assets(cfg: &ExperimentConfig, d: usize, big_d: usize, k: usize, seed: u64) -> Assets {
    Assets {
        d,
        big_d,
        k,
        eta: cfg.eta,
        alpha: cfg.alpha,
        selection: cfg.selection,
        fit: cfg.fit,
        seed,
        experts: None,
        warm_start: None,
        experts_without_rec: None,
        truth: None,
        oracle_labels: None,
    }
}

fn needs_experts(alg: Algorithm) -> bool {
    matches!(
        alg,
        Algorithm::Ewc | Algorithm::Ftl | Algorithm::WithoutUi | Algorithm::OracleCluster
    )
}

pub fn gen_config(cfg: &ExperimentConfig, beta: f64) -> GenConfig {
    GenConfig {
        rounds: cfg.rounds,
        n_train: cfg.n_train,
        n_test: cfg.n_test,
        choice_mode: cfg.choice_mode,
        ..GenConfig::with_beta(beta)
    }
}

/// Build every asset the requested algorithms need for a travel cell.
pub fn travel_assets(cfg: &ExperimentConfig, pop: &Population, seed: u64) -> Result<(Assets, CellInfo)> {
    let train = pop.train_dataset()?;
    let k = choose_k(cfg, &train, seed)?;
    let mut assets = base_assets(cfg, train.d, train.big_d, k, seed);
    let mut failures = 0;
    if cfg.algorithms.iter().any(|a| needs_experts(*a)) {
        let (experts, warm, f) = train_experts(&train, &cfg.fit, k, seed)?;
        failures = f;
        if cfg.algorithms.contains(&Algorithm::OracleCluster) {
            let mut rng = seed::rng(seed, "oracle-probe", 0);
            let probes = simgen::gen_rounds(&pop.config, cfg.oracle_probes, &mut rng);
            let truth: BTreeMap<_, _> = pop.test.iter().map(|u| (u.user_id, u.theta.clone())).collect();
            assets.oracle_labels = Some(oracle_cluster_labels(&experts, &truth, &probes)?);
        }
        assets.experts = Some(experts);
        assets.warm_start = Some(warm);
    }
    if cfg.algorithms.contains(&Algorithm::WithoutNoncompliance) {
        let blind = FitConfig {
            use_recommendation: false,
            ..cfg.fit
        };
        let (experts, warm, _) = train_experts(&train, &blind, k, seed)?;
        assets.experts_without_rec = Some((experts, Some(warm)));
    }
    if cfg.algorithms.contains(&Algorithm::OracleTheta) {
        assets.truth = Some(pop.truth());
    }
    let info = CellInfo {
        scenario: travel_label(pop.config.beta_scale),
        seed,
        k,
        train_users: pop.train.len(),
        test_users: pop.test.len(),
        test_rounds: pop.test.len() * pop.config.rounds,
        fit_failures: failures,
    };
    Ok((assets, info))
}

/// Live simulation on the test users. Returns the oracle-relative and the
/// absolute curve.
///
/// The user's choice under the learner's recommendation and under the
/// oracle's recommendation is drawn with the same uniform variate, so the
/// two losses differ only through the recommendation.
pub fn run_travel_learner(
    learner: &mut dyn Learner,
    pop: &Population,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mode = pop.config.choice_mode;
    let rounds = pop.config.rounds;
    let mut relative = Vec::with_capacity(rounds * pop.test.len());
    let mut absolute = Vec::with_capacity(rounds * pop.test.len());
    let (mut rel, mut abs) = (0.0, 0.0);
    for t in 0..rounds {
        for user in &pop.test {
            let options = &user.option_rounds[t];
            let r = learner.act(user.user_id, &user.context, options)?;
            if r >= options.len() {
                return Err(Error::invalid(format!(
                    "{} recommended option {r} of {}",
                    learner.name(),
                    options.len()
                )));
            }
            let y = user.choose(t, r, mode)?;
            let o = choice::predict(&user.theta, options, None)?;
            let y_oracle = user.choose(t, o, mode)?;
            let loss = choice::zero_one_loss(r, y);
            rel += loss - choice::zero_one_loss(o, y_oracle);
            abs += loss;
            relative.push(rel);
            absolute.push(abs);
            let round = InteractionRound {
                user_id: user.user_id,
                round_index: t + 1,
                options: options.clone(),
                recommended: r,
                chosen: y,
            };
            learner.learn(&user.context, Feedback { round: &round, issued: r })?;
        }
    }
    Ok((relative, absolute))
}

/// Replay logged sessions round-robin: round `t` of every user that has one,
/// then round `t + 1`. The learner's recommendation is scored against the
/// logged choice.
pub fn run_replay_learner(learner: &mut dyn Learner, test: &Dataset) -> Result<Vec<f64>> {
    let max_t = test.users.iter().map(|u| u.rounds.len()).max().unwrap_or(0);
    let mut curve = Vec::with_capacity(test.total_rounds());
    let mut total = 0.0;
    for t in 0..max_t {
        for user in &test.users {
            let Some(round) = user.rounds.get(t) else { continue };
            let r = learner.act(user.user_id, &user.context, &round.options)?;
            if r >= round.options.len() {
                return Err(Error::invalid(format!(
                    "{} recommended option {r} of {}",
                    learner.name(),
                    round.options.len()
                )));
            }
            total += choice::zero_one_loss(r, round.chosen);
            curve.push(total);
            learner.learn(&user.context, Feedback { round, issued: r })?;
        }
    }
    Ok(curve)
}

fn travel_cell(cfg: &ExperimentConfig, beta: f64, seed: u64) -> Result<ExperimentResult> {
    let pop = simgen::generate(&gen_config(cfg, beta), seed)?;
    let (assets, info) = travel_assets(cfg, &pop, seed)?;
    let label = info.scenario.clone();
    let learners = cfg
        .algorithms
        .iter()
        .map(|a| Ok((*a, build_learner(*a, &assets)?)))
        .collect::<Result<Vec<_>>>()?;
    let runs = learners
        .into_par_iter()
        .map(|(alg, mut l)| Ok((alg, run_travel_learner(l.as_mut(), &pop)?)))
        .collect::<Result<Vec<_>>>()?;
    let mut out = ExperimentResult {
        cells: vec![info],
        ..Default::default()
    };
    for (alg, (rel, abs)) in runs {
        out.curves.push(RegretCurve {
            scenario: label.clone(),
            algorithm: alg,
            seed,
            mode: RegretMode::OracleRelative,
            values: rel,
        });
        out.absolute.push(RegretCurve {
            scenario: label.clone(),
            algorithm: alg,
            seed,
            mode: RegretMode::Absolute,
            values: abs,
        });
    }
    Ok(out)
}

/// Seed of the bundled restaurant fixture used when no session files are
/// configured.
pub const FIXTURE_SEED: u64 = 0;

pub fn restaurant_data(cfg: &ExperimentConfig) -> Result<datasets::Ingested> {
    match &cfg.catalog {
        Some(catalog) => {
            let sessions: Vec<&std::path::Path> = cfg.sessions.iter().map(|p| p.as_path()).collect();
            datasets::ingest_files(catalog, &sessions)
        }
        None => {
            let files = fixture::generate(&fixture::FixtureConfig::default(), FIXTURE_SEED);
            let refs: Vec<(&str, &str)> = files.sessions.iter().map(|(n, t)| (n.as_str(), t.as_str())).collect();
            datasets::parse_sessions((fixture::CATALOG_FILE, &files.catalog), &refs)
        }
    }
}

fn restaurant_cell(cfg: &ExperimentConfig, data: &Dataset, seed: u64) -> Result<ExperimentResult> {
    let (train, test) = datasets::split_users(data, cfg.n_train, cfg.n_test, seed)?;
    let k = choose_k(cfg, &train, seed)?;
    let mut assets = base_assets(cfg, data.d, data.big_d, k, seed);
    let mut failures = 0;
    if cfg.algorithms.iter().any(|a| needs_experts(*a)) {
        let (experts, warm, f) = train_experts(&train, &cfg.fit, k, seed)?;
        failures = f;
        assets.experts = Some(experts);
        assets.warm_start = Some(warm);
    }
    if cfg.algorithms.contains(&Algorithm::WithoutNoncompliance) {
        let blind = FitConfig {
            use_recommendation: false,
            ..cfg.fit
        };
        let (experts, warm, _) = train_experts(&train, &blind, k, seed)?;
        assets.experts_without_rec = Some((experts, Some(warm)));
    }
    let learners = cfg
        .algorithms
        .iter()
        .map(|a| Ok((*a, build_learner(*a, &assets)?)))
        .collect::<Result<Vec<_>>>()?;
    let runs = learners
        .into_par_iter()
        .map(|(alg, mut l)| Ok((alg, run_replay_learner(l.as_mut(), &test)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentResult {
        curves: runs
            .into_iter()
            .map(|(alg, values)| RegretCurve {
                scenario: "restaurant".into(),
                algorithm: alg,
                seed,
                mode: RegretMode::Absolute,
                values,
            })
            .collect(),
        absolute: Vec::new(),
        cells: vec![CellInfo {
            scenario: "restaurant".into(),
            seed,
            k,
            train_users: train.users.len(),
            test_users: test.users.len(),
            test_rounds: test.total_rounds(),
            fit_failures: failures,
        }],
    })
}

/// Run every (scenario, seed) cell. Cells run in parallel; results are
/// ordered by scenario, seed and then configured algorithm order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let parts: Vec<ExperimentResult> = match cfg.scenario {
        Scenario::Travel => {
            let cells: Vec<(f64, u64)> = cfg
                .betas
                .iter()
                .flat_map(|b| cfg.seeds.iter().map(move |s| (*b, *s)))
                .collect();
            cells
                .par_iter()
                .map(|(b, s)| travel_cell(cfg, *b, *s))
                .collect::<Result<_>>()?
        }
        Scenario::Restaurant => {
            let ingested = restaurant_data(cfg)?;
            let data = ingested.dataset;
            cfg.seeds
                .par_iter()
                .map(|s| restaurant_cell(cfg, &data, *s))
                .collect::<Result<_>>()?
        }
    };
    let mut out = ExperimentResult::default();
    for p in parts {
        out.curves.extend(p.curves);
        out.absolute.extend(p.absolute);
        out.cells.extend(p.cells);
    }
    Ok(out)
}

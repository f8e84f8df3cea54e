//! Offline trainer for the user non-compliance choice model.
//!
//! Each option is augmented with a recommendation indicator and the user's
//! choice is modelled as a softmax over linear utilities. Per-user weights are
//! fit by full-batch gradient descent on the mean KL divergence between the
//! predicted choice distribution and the one-hot observed choice, plus an L2
//! penalty.

use std::collections::BTreeMap;

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::choice::{self, dot};
use crate::descent::{self, DescentConfig};
use crate::error::{Error, Result};
use crate::model::{ChoiceDistribution, Dataset, InteractionRound, PreferenceVector, UserId};
use crate::seed;

/// Standard deviation of the random initialization (variance 0.01).
const INIT_STD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub learning_rate: f64,
    pub l2_penalty: f64,
    pub max_epochs: usize,
    pub param_tolerance: f64,
    /// When false the recommendation indicator is forced to zero during
    /// training, so the anchoring weight is driven only by the penalty.
    pub use_recommendation: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.5,
            l2_penalty: 0.001,
            max_epochs: 500,
            param_tolerance: 1e-6,
            use_recommendation: true,
        }
    }
}

impl FitConfig {
    pub fn travel() -> Self {
        Self::default()
    }

    pub fn restaurant() -> Self {
        Self {
            l2_penalty: 0.01,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if !(self.param_tolerance > 0.0) {
            return Err(Error::Config("param_tolerance must be positive".into()));
        }
        if !(self.l2_penalty >= 0.0) {
            return Err(Error::Config("l2_penalty must be nonnegative".into()));
        }
        if self.max_epochs == 0 {
            return Err(Error::Config("max_epochs must be positive".into()));
        }
        Ok(())
    }

    fn descent(&self) -> DescentConfig {
        DescentConfig {
            learning_rate: self.learning_rate,
            max_epochs: self.max_epochs,
            param_tolerance: self.param_tolerance,
        }
    }
}

/// One observation in design-matrix form: augmented option vectors and the
/// index of the chosen option.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiceObservation {
    pub options: Vec<Vec<f64>>,
    pub chosen: usize,
}

/// `[features_a, 1{a == recommended}]` for every option of the round.
pub fn augment_with_rec(round: &InteractionRound) -> Vec<Vec<f64>> {
    augment(round, true)
}

fn augment(round: &InteractionRound, with_rec: bool) -> Vec<Vec<f64>> {
    round
        .options
        .iter()
        .enumerate()
        .map(|(a, opt)| {
            let mut v = Vec::with_capacity(opt.dim() + 1);
            v.extend_from_slice(&opt.features);
            v.push(if with_rec && a == round.recommended { 1.0 } else { 0.0 });
            v
        })
        .collect()
}

pub fn observations(rounds: &[InteractionRound], use_recommendation: bool) -> Vec<ChoiceObservation> {
    rounds
        .iter()
        .map(|r| ChoiceObservation {
            options: augment(r, use_recommendation),
            chosen: r.chosen,
        })
        .collect()
}

/// Model choice distribution for a round, with the round's recommendation
/// indicator applied.
pub fn predict_probs(theta: &PreferenceVector, round: &InteractionRound) -> Result<ChoiceDistribution> {
    let u = choice::utilities(theta, &round.options, Some(round.recommended))?;
    choice::softmax(&u)
}

/// Mean negative log-likelihood plus `l2 * ||theta||^2`, and its gradient.
///
/// The log-likelihood is evaluated in log-sum-exp form so the objective stays
/// smooth even where a probability falls below the floor used by
/// [`choice::kl_onehot`].
pub fn objective_and_gradient(
    theta: &[f64],
    data: &[ChoiceObservation],
    l2_penalty: f64,
    want_grad: bool,
) -> (f64, Vec<f64>) {
    let n = data.len().max(1) as f64;
    let mut loss = 0.0;
    let mut grad = if want_grad { vec![0.0; theta.len()] } else { Vec::new() };
    let mut utils = Vec::new();
    for obs in data {
        utils.clear();
        utils.extend(obs.options.iter().map(|x| dot(x, theta)));
        let m = utils.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = utils.iter().map(|u| (u - m).exp()).sum();
        let log_z = m + z.ln();
        loss += log_z - utils[obs.chosen];
        if want_grad {
            for (x, u) in obs.options.iter().zip(&utils) {
                let p = (u - log_z).exp();
                for (g, xi) in grad.iter_mut().zip(x) {
                    *g += p * xi;
                }
            }
            for (g, xi) in grad.iter_mut().zip(&obs.options[obs.chosen]) {
                *g -= xi;
            }
        }
    }
    let sq: f64 = theta.iter().map(|t| t * t).sum();
    let obj = loss / n + l2_penalty * sq;
    if want_grad {
        for (g, t) in grad.iter_mut().zip(theta) {
            *g = *g / n + 2.0 * l2_penalty * t;
        }
    }
    (obj, grad)
}

/// Mean data term (KL) without the penalty.
pub fn mean_kl(theta: &[f64], data: &[ChoiceObservation]) -> f64 {
    objective_and_gradient(theta, data, 0.0, false).0
}

#[derive(Debug, Clone)]
pub struct UserFit {
    pub theta: PreferenceVector,
    pub objective: f64,
    pub epochs: usize,
    pub trace: Vec<f64>,
}

/// Fit a choice model on design-matrix observations from a given start.
pub fn fit_observations(
    data: &[ChoiceObservation],
    init: Vec<f64>,
    cfg: &FitConfig,
) -> Result<UserFit> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::invalid("cannot fit a choice model on zero rounds"));
    }
    let dim = init.len();
    if let Some(bad) = data.iter().find(|o| o.options.iter().any(|x| x.len() != dim)) {
        let found = bad.options.iter().map(Vec::len).find(|&l| l != dim).unwrap_or(0);
        return Err(Error::DimensionMismatch { expected: dim, found });
    }
    let l2 = cfg.l2_penalty;
    let out = descent::minimize(init, cfg.descent(), |p, g| objective_and_gradient(p, data, l2, g))?;
    Ok(UserFit {
        objective: mean_kl(&out.params, data),
        theta: PreferenceVector::new(out.params)?,
        epochs: out.epochs,
        trace: out.trace,
    })
}

pub fn random_init(dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = seed::rng(seed, "noncompliance-init", 0);
    let normal = Normal::new(0.0, INIT_STD).expect("valid normal");
    (0..dim).map(|_| normal.sample(&mut rng)).collect()
}

/// Seed used for a user's fit inside [`fit_population`].
pub fn user_seed(seed: u64, user_id: UserId) -> u64 {
    seed::derive(seed, "noncompliance-user", user_id)
}

/// Full fit report for one user, including the objective trace.
pub fn fit_user_detailed(rounds: &[InteractionRound], cfg: &FitConfig, seed: u64) -> Result<UserFit> {
    let first = rounds
        .first()
        .ok_or_else(|| Error::invalid("cannot fit a user with no rounds"))?;
    let d = first.options[0].dim();
    for r in rounds {
        r.validate(d)?;
    }
    let data = observations(rounds, cfg.use_recommendation);
    fit_observations(&data, random_init(d + 1, seed), cfg)
}

pub fn fit_user(rounds: &[InteractionRound], cfg: &FitConfig, seed: u64) -> Result<PreferenceVector> {
    Ok(fit_user_detailed(rounds, cfg, seed)?.theta)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AnchoringSigns {
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub thetas: BTreeMap<UserId, PreferenceVector>,
    pub final_objective: BTreeMap<UserId, f64>,
    /// Largest number of epochs any user needed.
    pub epochs_used: usize,
    pub failures: BTreeMap<UserId, String>,
    /// Sign statistics of the fitted anchoring weights; the weight is left
    /// unconstrained.
    pub anchoring_signs: AnchoringSigns,
}

pub fn fit_population(data: &Dataset, cfg: &FitConfig, seed: u64) -> Result<FitResult> {
    cfg.validate()?;
    data.validate()?;
    let fits: Vec<(UserId, Result<UserFit>)> = data
        .users
        .par_iter()
        .map(|u| {
            let fit = fit_user_detailed(&u.rounds, cfg, user_seed(seed, u.user_id));
            (u.user_id, fit)
        })
        .collect();

    let mut result = FitResult {
        thetas: BTreeMap::new(),
        final_objective: BTreeMap::new(),
        epochs_used: 0,
        failures: BTreeMap::new(),
        anchoring_signs: AnchoringSigns::default(),
    };
    for (id, fit) in fits {
        match fit {
            Ok(f) => {
                let rec = f.theta.anchoring();
                if rec > 0.0 {
                    result.anchoring_signs.positive += 1;
                } else if rec < 0.0 {
                    result.anchoring_signs.negative += 1;
                } else {
                    result.anchoring_signs.zero += 1;
                }
                result.epochs_used = result.epochs_used.max(f.epochs);
                result.final_objective.insert(id, f.objective);
                result.thetas.insert(id, f.theta);
            }
            Err(e) => {
                log::warn!("fit failed for user {id}: {e}");
                result.failures.insert(id, e.to_string());
            }
        }
    }
    Ok(result)
}

#[derive(Serialize)]
struct FitEntry<'a> {
    theta: &'a [f64],
    objective: f64,
}

#[derive(Serialize)]
struct FitFile<'a> {
    users: BTreeMap<UserId, FitEntry<'a>>,
    epochs_used: usize,
    failures: &'a BTreeMap<UserId, String>,
    anchoring_signs: &'a AnchoringSigns,
}

#[derive(Deserialize)]
struct FitEntryOwned {
    theta: Vec<f64>,
}

#[derive(Deserialize)]
struct FitFileOwned {
    users: BTreeMap<UserId, FitEntryOwned>,
}

/// `{"users": {user_id: {"theta": [...], "objective": x}}, ...}`
pub fn fit_result_to_json(result: &FitResult) -> Result<String> {
    let users = result
        .thetas
        .iter()
        .map(|(id, t)| {
            (
                *id,
                FitEntry {
                    theta: &t.weights,
                    objective: result.final_objective[id],
                },
            )
        })
        .collect();
    Ok(serde_json::to_string_pretty(&FitFile {
        users,
        epochs_used: result.epochs_used,
        failures: &result.failures,
        anchoring_signs: &result.anchoring_signs,
    })?)
}

pub fn thetas_from_json(text: &str) -> Result<BTreeMap<UserId, PreferenceVector>> {
    let file: FitFileOwned = serde_json::from_str(text)?;
    file.users
        .into_iter()
        .map(|(id, e)| Ok((id, PreferenceVector::new(e.theta)?)))
        .collect()
}

//! Synthetic travel-route population.
//!
//! Pipeline:
//! 1. a survey-shaped table: per respondent, seven eco-route profiles and the
//!    likelihood of taking each one over the regular route;
//! 2. per respondent, rejection sampling of preference vectors from a
//!    multivariate normal proposal, accepting with probability
//!    `exp(-lambda * L)` where `L` is the mean squared error between the
//!    implied and reported likelihoods;
//! 3. an anchoring weight `beta * Beta(a, b)` appended to every sample;
//! 4. per round, a regular route and a Gaussian eco route, with the user's
//!    choice drawn from the multinomial-logit model including anchoring.
//!
//! The survey table is synthetic; it only reproduces the shape of the real
//! community survey (43 respondents, 7 routes each, 9 demographic columns).

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Beta, Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::choice::{self, sigmoid};
use crate::error::{Error, Result};
use crate::model::{Dataset, InteractionRound, OptionContext, PreferenceVector, UserContext, UserId, UserRecord};
use crate::seed::{self, Rng};

/// Rejections tolerated for one respondent before giving up.
pub const MAX_REJECTIONS: u64 = 1_000_000;

/// Columns: age (3, one-hot), gender (1), education (3, one-hot), cars (1),
/// intercept (1).
pub const USER_CONTEXT_DIM: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChoiceMode {
    /// Sample from the multinomial-logit probabilities.
    #[default]
    Softmax,
    /// Always take the highest-utility option.
    Argmax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub lambda_accept: f64,
    pub theta_mean: Vec<f64>,
    pub theta_cov: Vec<Vec<f64>>,
    pub beta_params: (f64, f64),
    pub beta_scale: f64,
    pub eco_mean: Vec<f64>,
    pub eco_std: Vec<f64>,
    pub regular_route: Vec<f64>,
    /// Survey route profiles as (travel time %, emission %).
    pub route_profiles: Vec<Vec<f64>>,
    pub samples_per_respondent: usize,
    pub respondents: usize,
    pub rounds: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub choice_mode: ChoiceMode,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            lambda_accept: 6.0,
            theta_mean: vec![-0.1, -0.1],
            theta_cov: vec![vec![0.01, 0.0], vec![0.0, 0.01]],
            beta_params: (0.3, 0.3),
            beta_scale: 0.0,
            eco_mean: vec![104.29, 91.99],
            eco_std: vec![5.62, 4.06],
            regular_route: vec![100.0, 100.0],
            route_profiles: vec![
                vec![102.0, 95.0],
                vec![105.0, 90.0],
                vec![108.0, 85.0],
                vec![110.0, 80.0],
                vec![115.0, 75.0],
                vec![120.0, 70.0],
                vec![125.0, 60.0],
            ],
            samples_per_respondent: 24,
            respondents: 43,
            rounds: 40,
            n_train: 446,
            n_test: 298,
            choice_mode: ChoiceMode::Softmax,
        }
    }
}

impl GenConfig {
    pub fn with_beta(beta: f64) -> Self {
        Self {
            beta_scale: beta,
            ..Self::default()
        }
    }

    pub fn d(&self) -> usize {
        self.theta_mean.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.d();
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if d == 0 {
            return bad("theta_mean must be non-empty");
        }
        if self.theta_cov.len() != d || self.theta_cov.iter().any(|r| r.len() != d) {
            return bad("theta_cov must be d x d");
        }
        if self.eco_mean.len() != d || self.eco_std.len() != d || self.regular_route.len() != d {
            return bad("option parameters must have length d");
        }
        if self.route_profiles.is_empty() || self.route_profiles.iter().any(|r| r.len() != d) {
            return bad("route_profiles must be non-empty rows of length d");
        }
        if !(self.lambda_accept >= 0.0) {
            return bad("lambda_accept must be nonnegative");
        }
        if !(self.beta_params.0 > 0.0 && self.beta_params.1 > 0.0) {
            return bad("beta_params must be positive");
        }
        if !(self.beta_scale >= 0.0) {
            return bad("beta_scale must be nonnegative");
        }
        if self.eco_std.iter().any(|s| !(*s >= 0.0)) {
            return bad("eco_std must be nonnegative");
        }
        if self.samples_per_respondent == 0 || self.respondents == 0 || self.rounds == 0 {
            return bad("respondents, samples_per_respondent and rounds must be positive");
        }
        if self.n_train + self.n_test > self.respondents * self.samples_per_respondent {
            return bad("n_train + n_test exceeds the number of generated users");
        }
        cholesky(&self.theta_cov).map(|_| ())
    }
}

/// Lower-triangular factor of a positive semi-definite matrix; zero pivots
/// leave their column at zero.
fn cholesky(m: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = m.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let v = m[i][i] - s;
                if v < -1e-12 {
                    return Err(Error::Config("theta_cov is not positive semi-definite".into()));
                }
                l[i][j] = v.max(0.0).sqrt();
            } else if l[j][j] > 0.0 {
                l[i][j] = (m[i][j] - s) / l[j][j];
            } else if (m[i][j] - s).abs() > 1e-12 {
                return Err(Error::Config("theta_cov is not positive semi-definite".into()));
            }
        }
    }
    Ok(l)
}

fn sample_mvn(mean: &[f64], chol: &[Vec<f64>], rng: &mut Rng) -> Vec<f64> {
    let z: Vec<f64> = (0..mean.len()).map(|_| StandardNormal.sample(rng)).collect();
    mean.iter()
        .enumerate()
        .map(|(i, m)| m + (0..=i).map(|k| chol[i][k] * z[k]).sum::<f64>())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyRespondent {
    pub respondent: usize,
    pub demographics: Vec<f64>,
    /// One row per route profile: (travel time %, emission %).
    pub routes: Vec<Vec<f64>>,
    /// Likelihood of taking each route over the regular one, in [0, 1].
    pub likelihoods: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyTable {
    pub synthetic: bool,
    pub respondents: Vec<SurveyRespondent>,
}

/// Likelihood of preferring each route over the regular route under `theta`
/// (feature part only).
pub fn implied_likelihoods(theta: &[f64], routes: &[Vec<f64>], regular: &[f64]) -> Vec<f64> {
    routes
        .iter()
        .map(|r| {
            let diff: f64 = r.iter().zip(regular).zip(theta).map(|((a, b), t)| (a - b) * t).sum();
            sigmoid(diff)
        })
        .collect()
}

fn demographics(rng: &mut Rng) -> Vec<f64> {
    let mut v = vec![0.0; USER_CONTEXT_DIM];
    v[rng.random_range(0..3)] = 1.0;
    v[3] = f64::from(rng.random_bool(0.5));
    v[4 + rng.random_range(0..3)] = 1.0;
    v[7] = f64::from(rng.random_bool(0.5));
    v[8] = 1.0;
    v
}

pub fn synth_survey(cfg: &GenConfig, seed: u64) -> Result<SurveyTable> {
    cfg.validate()?;
    let chol = cholesky(&cfg.theta_cov)?;
    let respondents = (0..cfg.respondents)
        .map(|r| {
            let mut rng = seed::rng(seed, "survey", r as u64);
            let latent = sample_mvn(&cfg.theta_mean, &chol, &mut rng);
            SurveyRespondent {
                respondent: r,
                demographics: demographics(&mut rng),
                routes: cfg.route_profiles.clone(),
                likelihoods: implied_likelihoods(&latent, &cfg.route_profiles, &cfg.regular_route),
            }
        })
        .collect();
    Ok(SurveyTable {
        synthetic: true,
        respondents,
    })
}

pub fn acceptance_probability(lambda: f64, loss: f64) -> f64 {
    (-lambda * loss).exp()
}

/// Mean squared error between `theta`'s implied likelihoods and the
/// respondent's reported ones.
pub fn survey_loss(theta: &[f64], row: &SurveyRespondent, cfg: &GenConfig) -> f64 {
    let implied = implied_likelihoods(theta, &row.routes, &cfg.regular_route);
    implied
        .iter()
        .zip(&row.likelihoods)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / implied.len() as f64
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceStats {
    pub proposals: u64,
    pub accepted: usize,
    pub mean_accepted_loss: f64,
    pub mean_proposal_loss: f64,
}

/// Rejection-sample `samples_per_respondent` preference vectors (feature part
/// only) for one respondent.
pub fn sample_theta(
    row: &SurveyRespondent,
    cfg: &GenConfig,
    rng: &mut Rng,
) -> Result<(Vec<Vec<f64>>, AcceptanceStats)> {
    let chol = cholesky(&cfg.theta_cov)?;
    let mut accepted = Vec::with_capacity(cfg.samples_per_respondent);
    let mut stats = AcceptanceStats::default();
    let mut accepted_loss = 0.0;
    let mut proposal_loss = 0.0;
    let mut best_loss = f64::INFINITY;
    while accepted.len() < cfg.samples_per_respondent {
        let theta = sample_mvn(&cfg.theta_mean, &chol, rng);
        let loss = survey_loss(&theta, row, cfg);
        stats.proposals += 1;
        proposal_loss += loss;
        best_loss = best_loss.min(loss);
        if rng.random::<f64>() < acceptance_probability(cfg.lambda_accept, loss) {
            accepted_loss += loss;
            accepted.push(theta);
        } else if stats.proposals - accepted.len() as u64 >= MAX_REJECTIONS {
            return Err(Error::AcceptanceStall {
                rejections: MAX_REJECTIONS,
                accepted: accepted.len(),
                best_loss,
            });
        }
    }
    stats.accepted = accepted.len();
    stats.mean_accepted_loss = accepted_loss / accepted.len() as f64;
    stats.mean_proposal_loss = proposal_loss / stats.proposals as f64;
    Ok((accepted, stats))
}

/// Append `beta * Beta(a, b)` anchoring weights.
pub fn attach_anchoring(thetas: &[Vec<f64>], cfg: &GenConfig, rng: &mut Rng) -> Result<Vec<PreferenceVector>> {
    if !(cfg.beta_scale >= 0.0) {
        return Err(Error::Config("beta_scale must be nonnegative".into()));
    }
    let beta = Beta::new(cfg.beta_params.0, cfg.beta_params.1)
        .map_err(|e| Error::Config(format!("beta distribution: {e}")))?;
    thetas
        .iter()
        .map(|t| {
            let draw: f64 = beta.sample(rng);
            let rec = if cfg.beta_scale == 0.0 { 0.0 } else { cfg.beta_scale * draw };
            let mut w = t.clone();
            w.push(rec);
            PreferenceVector::new(w)
        })
        .collect()
}

/// Options for `rounds` decision rounds: the regular route first, then a
/// Gaussian eco-friendly route.
pub fn gen_rounds(cfg: &GenConfig, rounds: usize, rng: &mut Rng) -> Vec<Vec<OptionContext>> {
    let normals: Vec<Normal<f64>> = cfg
        .eco_mean
        .iter()
        .zip(&cfg.eco_std)
        .map(|(m, s)| Normal::new(*m, *s).expect("validated std"))
        .collect();
    (0..rounds)
        .map(|_| {
            let eco = normals.iter().map(|n| n.sample(rng)).collect();
            vec![
                OptionContext::new(cfg.regular_route.clone()),
                OptionContext::new(eco),
            ]
        })
        .collect()
}

/// User's choice given the issued recommendation, driven by one uniform
/// variate so that counterfactual recommendations can share randomness.
pub fn gen_choice(
    theta: &PreferenceVector,
    options: &[OptionContext],
    recommended: usize,
    mode: ChoiceMode,
    u: f64,
) -> Result<usize> {
    let util = choice::utilities(theta, options, Some(recommended))?;
    match mode {
        ChoiceMode::Softmax => Ok(choice::softmax(&util)?.sample_with(u)),
        ChoiceMode::Argmax => Ok(choice::argmax(&util)),
    }
}

/// A simulated user with ground truth and pre-drawn randomness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimUser {
    pub user_id: UserId,
    pub respondent: usize,
    pub context: UserContext,
    pub theta: PreferenceVector,
    pub option_rounds: Vec<Vec<OptionContext>>,
    /// One uniform variate per round for the choice draw.
    pub choice_uniforms: Vec<f64>,
    /// Recommendations issued by the logging policy (uniform at random).
    pub logged_recommendations: Vec<usize>,
}

impl SimUser {
    pub fn choose(&self, round: usize, recommended: usize, mode: ChoiceMode) -> Result<usize> {
        gen_choice(
            &self.theta,
            &self.option_rounds[round],
            recommended,
            mode,
            self.choice_uniforms[round],
        )
    }

    /// The user's history under the logging policy.
    pub fn logged_rounds(&self, mode: ChoiceMode) -> Result<Vec<InteractionRound>> {
        (0..self.option_rounds.len())
            .map(|t| {
                let rec = self.logged_recommendations[t];
                Ok(InteractionRound {
                    user_id: self.user_id,
                    round_index: t + 1,
                    options: self.option_rounds[t].clone(),
                    recommended: rec,
                    chosen: self.choose(t, rec, mode)?,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Population {
    pub config: GenConfig,
    pub seed: u64,
    pub survey: SurveyTable,
    pub train: Vec<SimUser>,
    pub test: Vec<SimUser>,
    pub acceptance: Vec<AcceptanceStats>,
    pub discarded: usize,
}

impl Population {
    pub fn train_dataset(&self) -> Result<Dataset> {
        to_dataset(&self.train, &self.config)
    }

    pub fn test_dataset(&self) -> Result<Dataset> {
        to_dataset(&self.test, &self.config)
    }

    pub fn truth(&self) -> BTreeMap<UserId, PreferenceVector> {
        self.train
            .iter()
            .chain(&self.test)
            .map(|u| (u.user_id, u.theta.clone()))
            .collect()
    }
}

fn to_dataset(users: &[SimUser], cfg: &GenConfig) -> Result<Dataset> {
    let users = users
        .iter()
        .map(|u| {
            Ok(UserRecord {
                user_id: u.user_id,
                context: u.context.clone(),
                rounds: u.logged_rounds(cfg.choice_mode)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        d: cfg.d(),
        big_d: USER_CONTEXT_DIM,
        users,
    })
}

/// Full generation: survey, expansion, anchoring, seeded train/test split
/// (surplus users discarded) and per-user rounds.
pub fn generate(cfg: &GenConfig, seed: u64) -> Result<Population> {
    cfg.validate()?;
    let survey = synth_survey(cfg, seed)?;
    let per_respondent: Vec<(Vec<Vec<f64>>, AcceptanceStats)> = survey
        .respondents
        .par_iter()
        .map(|row| sample_theta(row, cfg, &mut seed::rng(seed, "rejection", row.respondent as u64)))
        .collect::<Result<_>>()?;

    let mut users = Vec::with_capacity(cfg.respondents * cfg.samples_per_respondent);
    for (row, (thetas, _)) in survey.respondents.iter().zip(&per_respondent) {
        let mut rng = seed::rng(seed, "anchoring", row.respondent as u64);
        for (j, theta) in attach_anchoring(thetas, cfg, &mut rng)?.into_iter().enumerate() {
            let user_id = (row.respondent * cfg.samples_per_respondent + j + 1) as UserId;
            users.push((user_id, row, theta));
        }
    }

    let mut order: Vec<usize> = (0..users.len()).collect();
    order.shuffle(&mut seed::rng(seed, "split", 0));
    let build = |idx: &[usize]| -> Vec<SimUser> {
        let mut out: Vec<SimUser> = idx
            .iter()
            .map(|&i| {
                let (user_id, row, theta) = &users[i];
                let mut rng = seed::rng(seed, "rounds", *user_id);
                let option_rounds = gen_rounds(cfg, cfg.rounds, &mut rng);
                let choice_uniforms = (0..cfg.rounds).map(|_| rng.random::<f64>()).collect();
                let logged_recommendations = (0..cfg.rounds)
                    .map(|t| rng.random_range(0..option_rounds[t].len()))
                    .collect();
                SimUser {
                    user_id: *user_id,
                    respondent: row.respondent,
                    context: UserContext {
                        features: row.demographics.clone(),
                    },
                    theta: theta.clone(),
                    option_rounds,
                    choice_uniforms,
                    logged_recommendations,
                }
            })
            .collect();
        out.sort_by_key(|u| u.user_id);
        out
    };
    let train = build(&order[..cfg.n_train]);
    let test = build(&order[cfg.n_train..cfg.n_train + cfg.n_test]);
    let discarded = users.len() - cfg.n_train - cfg.n_test;
    drop(users);
    Ok(Population {
        config: cfg.clone(),
        seed,
        survey,
        train,
        test,
        acceptance: per_respondent.into_iter().map(|(_, s)| s).collect(),
        discarded,
    })
}

/// Sidecar describing how a population was produced.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance<'a> {
    pub config: &'a GenConfig,
    pub seed: u64,
    pub survey_is_synthetic: bool,
    pub acceptance: &'a [AcceptanceStats],
    pub total_proposals: u64,
    pub generated_users: usize,
    pub train_users: usize,
    pub test_users: usize,
    pub discarded_users: usize,
    pub split_rule: &'static str,
}

impl Population {
    pub fn provenance(&self) -> Provenance<'_> {
        Provenance {
            config: &self.config,
            seed: self.seed,
            survey_is_synthetic: self.survey.synthetic,
            acceptance: &self.acceptance,
            total_proposals: self.acceptance.iter().map(|a| a.proposals).sum(),
            generated_users: self.train.len() + self.test.len() + self.discarded,
            train_users: self.train.len(),
            test_users: self.test.len(),
            discarded_users: self.discarded,
            split_rule: "seeded shuffle of all accepted samples; first n_train are training users, next n_test are test users, the remainder is discarded",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn survey_shape_and_ranges() {
        let cfg = GenConfig::default();
        for s in 0..50 {
            let table = synth_survey(&cfg, s).unwrap();
            assert_eq!(table.respondents.len(), 43);
            for r in &table.respondents {
                assert_eq!(r.routes.len(), 7);
                assert_eq!(r.likelihoods.len(), 7);
                assert!(r.likelihoods.iter().all(|l| (0.0..=1.0).contains(l)));
                assert_eq!(r.demographics.len(), USER_CONTEXT_DIM);
                assert_eq!(r.demographics[8], 1.0);
            }
        }
    }

    #[test]
    fn zero_covariance_gives_identical_rows() {
        let cfg = GenConfig {
            theta_cov: vec![vec![0.0, 0.0], vec![0.0, 0.0]],
            ..GenConfig::default()
        };
        let table = synth_survey(&cfg, 3).unwrap();
        let first = &table.respondents[0].likelihoods;
        assert!(table.respondents.iter().all(|r| &r.likelihoods == first));
    }

    #[test]
    fn acceptance_probability_examples() {
        assert_eq!(acceptance_probability(6.0, 0.0), 1.0);
        assert_abs_diff_eq!(acceptance_probability(6.0, 2f64.ln()), 0.015625, epsilon = 1e-15);
    }

    #[test]
    fn zero_loss_candidates_always_accepted() {
        let cfg = GenConfig {
            theta_cov: vec![vec![0.0, 0.0], vec![0.0, 0.0]],
            ..GenConfig::default()
        };
        let table = synth_survey(&cfg, 0).unwrap();
        let mut rng = seed::rng(0, "t", 0);
        let (samples, stats) = sample_theta(&table.respondents[0], &cfg, &mut rng).unwrap();
        assert_eq!(samples.len(), 24);
        assert_eq!(stats.proposals, 24);
    }

    #[test]
    fn rejection_tilts_toward_low_loss() {
        let cfg = GenConfig::default();
        let mut accepted = 0.0;
        let mut proposed = 0.0;
        for s in 0..20 {
            let table = synth_survey(&cfg, s).unwrap();
            let mut rng = seed::rng(s, "t", 0);
            let (_, stats) = sample_theta(&table.respondents[0], &cfg, &mut rng).unwrap();
            accepted += stats.mean_accepted_loss;
            proposed += stats.mean_proposal_loss;
        }
        assert!(accepted < proposed, "{accepted} vs {proposed}");
    }

    #[test]
    fn stall_is_reported() {
        let cfg = GenConfig {
            lambda_accept: 1e6,
            ..GenConfig::default()
        };
        let row = SurveyRespondent {
            respondent: 0,
            demographics: vec![0.0; 9],
            routes: cfg.route_profiles.clone(),
            // unreachable: sigmoid never hits exactly 0 and 1 alternately
            likelihoods: vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0],
        };
        let err = sample_theta(&row, &cfg, &mut seed::rng(0, "t", 0)).unwrap_err();
        assert!(matches!(err, Error::AcceptanceStall { accepted: 0, .. }));
    }

    #[test]
    fn anchoring_scale() {
        let base: Vec<Vec<f64>> = vec![vec![0.0, 0.0]; 2000];
        let zero = attach_anchoring(&base, &GenConfig::with_beta(0.0), &mut seed::rng(0, "t", 0)).unwrap();
        assert!(zero.iter().all(|t| t.anchoring() == 0.0 && t.len() == 3));
        let ten = attach_anchoring(&base, &GenConfig::with_beta(10.0), &mut seed::rng(0, "t", 0)).unwrap();
        assert!(ten.iter().all(|t| (0.0..=10.0).contains(&t.anchoring())));

        let many: Vec<Vec<f64>> = vec![vec![]; 100_000];
        let draws = attach_anchoring(&many, &GenConfig::with_beta(1.0), &mut seed::rng(1, "t", 0)).unwrap();
        let mean = draws.iter().map(|t| t.anchoring()).sum::<f64>() / draws.len() as f64;
        assert_abs_diff_eq!(mean, 0.5, epsilon = 0.01);
    }

    #[test]
    fn rounds_follow_configuration() {
        let cfg = GenConfig {
            eco_std: vec![0.0, 0.0],
            ..GenConfig::default()
        };
        for opts in gen_rounds(&cfg, 50, &mut seed::rng(0, "t", 0)) {
            assert_eq!(opts.len(), 2);
            assert_eq!(opts[0].features, vec![100.0, 100.0]);
            assert_eq!(opts[1].features, vec![104.29, 91.99]);
        }
        let rounds = gen_rounds(&GenConfig::default(), 10_000, &mut seed::rng(2, "t", 0));
        let mean = rounds.iter().map(|o| o[1].features[0]).sum::<f64>() / 10_000.0;
        assert_abs_diff_eq!(mean, 104.29, epsilon = 0.2);
        assert!(rounds.iter().all(|o| o.len() == 2));
    }

    #[test]
    fn strong_anchoring_follows_recommendation() {
        let theta = PreferenceVector::new(vec![-0.1, -0.1, 50.0]).unwrap();
        let cfg = GenConfig::default();
        let mut rng = seed::rng(4, "t", 0);
        let rounds = gen_rounds(&cfg, 10_000, &mut rng);
        let follows = rounds
            .iter()
            .filter(|o| {
                let rec = rng.random_range(0..2);
                gen_choice(&theta, o, rec, ChoiceMode::Softmax, rng.random()).unwrap() == rec
            })
            .count();
        assert!(follows as f64 / 10_000.0 > 0.999);
    }

    #[test]
    fn symmetric_options_choose_uniformly() {
        let theta = PreferenceVector::zeros(3);
        let opts = vec![OptionContext::new(vec![1.0, 1.0]), OptionContext::new(vec![1.0, 1.0])];
        let mut rng = seed::rng(5, "t", 0);
        let zeros = (0..10_000)
            .filter(|_| gen_choice(&theta, &opts, 0, ChoiceMode::Softmax, rng.random()).unwrap() == 0)
            .count();
        assert!((zeros as f64 / 10_000.0 - 0.5).abs() < 0.02);
    }

    #[test]
    fn population_counts_and_determinism() {
        let cfg = GenConfig::with_beta(1.0);
        let a = generate(&cfg, 11).unwrap();
        assert_eq!(a.train.len(), 446);
        assert_eq!(a.test.len(), 298);
        assert_eq!(a.discarded, 43 * 24 - 446 - 298);
        let train_ids: std::collections::BTreeSet<_> = a.train.iter().map(|u| u.user_id).collect();
        assert!(a.test.iter().all(|u| !train_ids.contains(&u.user_id)));
        assert!(a.train.iter().all(|u| u.option_rounds.len() == 40));
        let b = generate(&cfg, 11).unwrap();
        assert_eq!(a, b);
        let ds = a.train_dataset().unwrap();
        ds.validate().unwrap();
        assert_eq!((ds.d, ds.big_d), (2, 9));
    }
}

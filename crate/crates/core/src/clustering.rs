//! K-Means over fitted preference vectors.
//!
//! In loss-guided mode the distance between a user and a centroid is the
//! squared Frobenius distance between the centroid's one-hot predictions on
//! the user's history and the user's one-hot choices, i.e. twice the number
//! of mispredicted rounds. Centroids are still updated as member means.

use std::collections::BTreeMap;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::choice;
use crate::error::{Error, Result};
use crate::ewc::{self, ExpertSet, HedgeState};
use crate::model::{Dataset, InteractionRound, PreferenceVector, UserId};
use crate::seed;

pub const DEFAULT_MAX_ITERS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMode {
    LossGuided,
    L2,
}

impl std::str::FromStr for DistanceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "loss_guided" | "loss-guided" => Ok(Self::LossGuided),
            "l2" => Ok(Self::L2),
            other => Err(Error::Config(format!("unknown distance mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    #[serde(rename = "K")]
    pub k: usize,
    pub mode: DistanceMode,
    pub centroids: Vec<PreferenceVector>,
    pub labels: BTreeMap<UserId, usize>,
    /// Total distance after each assignment step.
    #[serde(default)]
    pub loss_trace: Vec<f64>,
    #[serde(default)]
    pub converged: bool,
}

impl ClusterModel {
    pub fn experts(&self) -> ExpertSet {
        ExpertSet {
            centroids: self.centroids.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// `||onehot(prediction) - onehot(choice)||^2` summed over the rounds, with
/// the historical recommendation indicator applied.
pub fn loss_guided_distance(c: &PreferenceVector, rounds: &[InteractionRound]) -> Result<f64> {
    let mut mismatches = 0usize;
    for r in rounds {
        let pred = choice::predict(c, &r.options, Some(r.recommended))?;
        if pred != r.chosen {
            mismatches += 1;
        }
    }
    Ok(2.0 * mismatches as f64)
}

fn distance(
    mode: DistanceMode,
    theta: &PreferenceVector,
    rounds: &[InteractionRound],
    c: &PreferenceVector,
) -> Result<f64> {
    match mode {
        DistanceMode::LossGuided => loss_guided_distance(c, rounds),
        DistanceMode::L2 => Ok(theta.squared_distance(c)),
    }
}

/// Distances from every user to every centroid, rows in `users` order.
fn distance_matrix(
    mode: DistanceMode,
    users: &[(UserId, &PreferenceVector, &[InteractionRound])],
    centroids: &[PreferenceVector],
) -> Result<Vec<Vec<f64>>> {
    users
        .par_iter()
        .map(|(_, theta, rounds)| {
            centroids
                .iter()
                .map(|c| distance(mode, theta, rounds, c))
                .collect::<Result<Vec<_>>>()
        })
        .collect()
}

fn mean_of(members: impl Iterator<Item = usize>, users: &[(UserId, &PreferenceVector, &[InteractionRound])], dim: usize) -> Option<PreferenceVector> {
    let mut sum = vec![0.0; dim];
    let mut n = 0usize;
    for i in members {
        for (s, w) in sum.iter_mut().zip(&users[i].1.weights) {
            *s += w;
        }
        n += 1;
    }
    (n > 0).then(|| PreferenceVector {
        weights: sum.into_iter().map(|s| s / n as f64).collect(),
    })
}

/// Alternate assignment and mean updates until labels stop changing or
/// `max_iters` assignment steps have run.
pub fn fit(
    thetas: &BTreeMap<UserId, PreferenceVector>,
    data: &Dataset,
    k: usize,
    seed: u64,
    mode: DistanceMode,
    max_iters: usize,
) -> Result<ClusterModel> {
    if k == 0 {
        return Err(Error::invalid("K must be at least 1"));
    }
    if k > thetas.len() {
        return Err(Error::invalid(format!(
            "K={k} exceeds the number of users ({})",
            thetas.len()
        )));
    }
    let empty: &[InteractionRound] = &[];
    let rounds_by_user: BTreeMap<UserId, &[InteractionRound]> =
        data.users.iter().map(|u| (u.user_id, u.rounds.as_slice())).collect();
    let users: Vec<(UserId, &PreferenceVector, &[InteractionRound])> = thetas
        .iter()
        .map(|(id, t)| {
            let rounds = match mode {
                DistanceMode::LossGuided => *rounds_by_user
                    .get(id)
                    .ok_or_else(|| Error::invalid(format!("user {id} has no rounds in the dataset")))?,
                DistanceMode::L2 => rounds_by_user.get(id).copied().unwrap_or(empty),
            };
            Ok((*id, t, rounds))
        })
        .collect::<Result<_>>()?;
    let dim = users[0].1.len();
    if let Some(u) = users.iter().find(|u| u.1.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: u.1.len(),
        });
    }

    let mut rng = seed::rng(seed, "kmeans-init", k as u64);
    let mut centroids: Vec<PreferenceVector> = index::sample(&mut rng, users.len(), k)
        .into_iter()
        .map(|i| users[i].1.clone())
        .collect();

    let mut labels: Vec<usize> = Vec::new();
    let mut trace = Vec::new();
    let mut converged = false;
    for _ in 0..max_iters.max(1) {
        let dist = distance_matrix(mode, &users, &centroids)?;
        let new_labels: Vec<usize> = dist.iter().map(|row| choice::argmin(row)).collect();
        trace.push(new_labels.iter().zip(&dist).map(|(&l, row)| row[l]).sum());
        if new_labels == labels {
            converged = true;
            break;
        }
        labels = new_labels;

        let mut used_for_repair = Vec::new();
        for (c, centroid) in centroids.iter_mut().enumerate() {
            match mean_of((0..users.len()).filter(|&i| labels[i] == c), &users, dim) {
                Some(mean) => *centroid = mean,
                None => {
                    // empty cluster: restart it at the worst-fit user's preferences
                    let worst = (0..users.len())
                        .filter(|i| !used_for_repair.contains(i))
                        .max_by(|&a, &b| {
                            dist[a][labels[a]]
                                .total_cmp(&dist[b][labels[b]])
                                .then(b.cmp(&a))
                        })
                        .expect("K <= number of users");
                    used_for_repair.push(worst);
                    *centroid = users[worst].1.clone();
                }
            }
        }
    }

    Ok(ClusterModel {
        k,
        mode,
        centroids,
        labels: users.iter().map(|u| u.0).zip(labels).collect(),
        loss_trace: trace,
        converged,
    })
}

/// Cumulative expected Hedge loss `sum_t <p_t, l_t>` of replaying every
/// user's history against the experts from uniform weights.
pub fn replay_hedge_loss(experts: &ExpertSet, data: &Dataset, eta: f64) -> Result<f64> {
    let per_user: Vec<f64> = data
        .users
        .par_iter()
        .map(|u| {
            let mut state = HedgeState::uniform(experts.len(), eta);
            let mut total = 0.0;
            for r in &u.rounds {
                let (next, losses) = ewc::observe(&state, experts, r)?;
                total += choice::dot(&state.weights.probs, &losses);
                state = next;
            }
            Ok(total)
        })
        .collect::<Result<_>>()?;
    Ok(per_user.iter().sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSelection {
    pub k: usize,
    /// `(K, training replay loss)` for every candidate that was evaluated.
    pub scores: Vec<(usize, f64)>,
}

/// Pick the candidate K whose loss-guided clustering gives the lowest
/// replayed Hedge loss on the training data. Near-ties go to the smaller K.
pub fn select_k(
    thetas: &BTreeMap<UserId, PreferenceVector>,
    data: &Dataset,
    candidates: &[usize],
    seed: u64,
    eta: f64,
) -> Result<KSelection> {
    if candidates.is_empty() {
        return Err(Error::invalid("no candidate K values"));
    }
    let mut sorted = candidates.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() == 1 {
        return Ok(KSelection {
            k: sorted[0],
            scores: Vec::new(),
        });
    }
    let mut scores = Vec::new();
    for &k in &sorted {
        let model = fit(thetas, data, k, seed, DistanceMode::LossGuided, DEFAULT_MAX_ITERS)?;
        scores.push((k, replay_hedge_loss(&model.experts(), data, eta)?));
    }
    let mut best = scores[0];
    for &(k, s) in &scores[1..] {
        if s < best.1 - 1e-9 * best.1.abs().max(1.0) {
            best = (k, s);
        }
    }
    Ok(KSelection { k: best.0, scores })
}

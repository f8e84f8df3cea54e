//! Online expert-with-clustering learner.
//!
//! Cluster centroids act as experts. Each user keeps a Hedge distribution
//! over experts, optionally initialized from a multinomial logistic
//! classifier on the user's context. Every round an expert is drawn, its
//! centroid picks the option to recommend, and after the user's choice every
//! expert is charged a 0-1 loss.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::choice::{self, dot};
use crate::descent::{self, DescentConfig};
use crate::error::{Error, Result};
use crate::model::{ChoiceDistribution, InteractionRound, OptionContext, PreferenceVector, UserContext, UserId};

/// Learning rate used when none is configured.
pub const DEFAULT_ETA: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ExpertSet {
    pub centroids: Vec<PreferenceVector>,
}

impl ExpertSet {
    pub fn new(centroids: Vec<PreferenceVector>) -> Result<Self> {
        if centroids.is_empty() {
            return Err(Error::invalid("expert set must be non-empty"));
        }
        let len = centroids[0].len();
        if let Some(c) = centroids.iter().find(|c| c.len() != len) {
            return Err(Error::DimensionMismatch {
                expected: len,
                found: c.len(),
            });
        }
        Ok(Self { centroids })
    }

    pub fn len(&self) -> usize {
        self.centroids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centroids.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HedgeState {
    pub weights: ChoiceDistribution,
    pub eta: f64,
}

impl HedgeState {
    pub fn uniform(k: usize, eta: f64) -> Self {
        Self {
            weights: ChoiceDistribution::uniform(k),
            eta,
        }
    }
}

/// Multiplicative-weights update `p_k <- p_k exp(-eta l_k) / Z`.
pub fn hedge_update(state: &HedgeState, losses: &[f64]) -> Result<HedgeState> {
    if losses.len() != state.weights.len() {
        return Err(Error::DimensionMismatch {
            expected: state.weights.len(),
            found: losses.len(),
        });
    }
    if losses.iter().any(|l| !l.is_finite()) {
        return Err(Error::NonFinite("hedge losses".into()));
    }
    // shifting by the smallest loss leaves the normalized result unchanged
    let floor = losses.iter().copied().fold(f64::INFINITY, f64::min);
    let raw: Vec<f64> = state
        .weights
        .probs
        .iter()
        .zip(losses)
        .map(|(p, l)| p * (-state.eta * (l - floor)).exp())
        .collect();
    let z: f64 = raw.iter().sum();
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::invalid("all hedge weights underflowed"));
    }
    Ok(HedgeState {
        weights: ChoiceDistribution {
            probs: raw.into_iter().map(|w| w / z).collect(),
        },
        eta: state.eta,
    })
}

/// Multinomial logistic map from user context to a distribution over
/// clusters. Row `k` holds the weights of class `k`; the last column is the
/// bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextWarmStart {
    pub weight_matrix: Vec<Vec<f64>>,
}

/// Optimizer settings for [`warm_start_fit`].
#[derive(Debug, Clone, Copy)]
pub struct WarmStartConfig {
    pub learning_rate: f64,
    pub l2_penalty: f64,
    pub max_epochs: usize,
    pub param_tolerance: f64,
}

impl Default for WarmStartConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.5,
            l2_penalty: 1e-3,
            max_epochs: 3000,
            param_tolerance: 1e-9,
        }
    }
}

/// Bias given to the only observed class when labels are degenerate.
const DEGENERATE_LOGIT: f64 = 40.0;

impl ContextWarmStart {
    pub fn num_classes(&self) -> usize {
        self.weight_matrix.len()
    }

    pub fn context_dim(&self) -> usize {
        self.weight_matrix.first().map_or(0, |r| r.len() - 1)
    }

    pub fn predict(&self, u: &UserContext) -> Result<ChoiceDistribution> {
        if u.dim() != self.context_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.context_dim(),
                found: u.dim(),
            });
        }
        let logits: Vec<f64> = self
            .weight_matrix
            .iter()
            .map(|row| dot(&row[..u.dim()], &u.features) + row[u.dim()])
            .collect();
        choice::softmax(&logits)
    }
}

/// Fit the context-to-cluster classifier by gradient descent on the mean
/// cross-entropy. Only the non-bias weights are penalized.
pub fn warm_start_fit(
    contexts: &BTreeMap<UserId, UserContext>,
    labels: &BTreeMap<UserId, usize>,
    k: usize,
    cfg: &WarmStartConfig,
) -> Result<ContextWarmStart> {
    if k == 0 {
        return Err(Error::invalid("warm start needs at least one class"));
    }
    let samples: Vec<(&UserContext, usize)> = labels
        .iter()
        .map(|(id, &label)| {
            let ctx = contexts
                .get(id)
                .ok_or_else(|| Error::invalid(format!("no context for user {id}")))?;
            if label >= k {
                return Err(Error::invalid(format!("label {label} out of range for K={k}")));
            }
            Ok((ctx, label))
        })
        .collect::<Result<_>>()?;
    let dim = samples
        .first()
        .map(|(c, _)| c.dim())
        .or_else(|| contexts.values().next().map(UserContext::dim))
        .unwrap_or(0);
    if let Some((c, _)) = samples.iter().find(|(c, _)| c.dim() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: c.dim(),
        });
    }
    let cols = dim + 1;

    let mut present: Vec<usize> = samples.iter().map(|(_, l)| *l).collect();
    present.sort_unstable();
    present.dedup();
    if present.len() <= 1 {
        let mut w = vec![vec![0.0; cols]; k];
        if let Some(&only) = present.first() {
            w[only][dim] = DEGENERATE_LOGIT;
        }
        return Ok(ContextWarmStart { weight_matrix: w });
    }

    let n = samples.len() as f64;
    let l2 = cfg.l2_penalty;
    let eval = |params: &[f64], want_grad: bool| {
        let mut loss = 0.0;
        let mut grad = if want_grad { vec![0.0; params.len()] } else { Vec::new() };
        let mut logits = vec![0.0; k];
        for (ctx, label) in &samples {
            for (c, logit) in logits.iter_mut().enumerate() {
                let row = &params[c * cols..(c + 1) * cols];
                *logit = dot(&row[..dim], &ctx.features) + row[dim];
            }
            let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let log_z = m + logits.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
            loss += log_z - logits[*label];
            if want_grad {
                for c in 0..k {
                    let resid = (logits[c] - log_z).exp() - if c == *label { 1.0 } else { 0.0 };
                    let row = &mut grad[c * cols..(c + 1) * cols];
                    for (g, x) in row[..dim].iter_mut().zip(&ctx.features) {
                        *g += resid * x;
                    }
                    row[dim] += resid;
                }
            }
        }
        let mut penalty = 0.0;
        for c in 0..k {
            for j in 0..dim {
                penalty += params[c * cols + j].powi(2);
            }
        }
        if want_grad {
            for g in grad.iter_mut() {
                *g /= n;
            }
            for c in 0..k {
                for j in 0..dim {
                    grad[c * cols + j] += 2.0 * l2 * params[c * cols + j];
                }
            }
        }
        (loss / n + l2 * penalty, grad)
    };
    let out = descent::minimize(
        vec![0.0; k * cols],
        DescentConfig {
            learning_rate: cfg.learning_rate,
            max_epochs: cfg.max_epochs,
            param_tolerance: cfg.param_tolerance,
        },
        eval,
    )?;
    Ok(ContextWarmStart {
        weight_matrix: out.params.chunks(cols).map(<[f64]>::to_vec).collect(),
    })
}

/// Initial Hedge state for a user: `f(u)` with a warm start, else uniform.
pub fn init_user(
    u: &UserContext,
    warm: Option<&ContextWarmStart>,
    k: usize,
    eta: f64,
) -> Result<HedgeState> {
    match warm {
        Some(w) => {
            if w.num_classes() != k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    found: w.num_classes(),
                });
            }
            Ok(HedgeState {
                weights: w.predict(u)?,
                eta,
            })
        }
        None => Ok(HedgeState::uniform(k, eta)),
    }
}

/// How the expert followed in a round is picked from the Hedge weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpertSelection {
    #[default]
    Sample,
    ArgmaxWeight,
}

/// Draw an expert and return `(expert, recommended option)`. Candidates are
/// scored with the recommendation indicator zeroed.
pub fn recommend<R: rand::Rng + ?Sized>(
    state: &HedgeState,
    experts: &ExpertSet,
    options: &[OptionContext],
    selection: ExpertSelection,
    rng: &mut R,
) -> Result<(usize, usize)> {
    if state.weights.len() != experts.len() {
        return Err(Error::DimensionMismatch {
            expected: experts.len(),
            found: state.weights.len(),
        });
    }
    let expert = match selection {
        ExpertSelection::Sample => state.weights.sample_with(rng.random::<f64>()),
        ExpertSelection::ArgmaxWeight => choice::argmax(&state.weights.probs),
    };
    let option = choice::predict(&experts.centroids[expert], options, None)?;
    Ok((expert, option))
}

/// 0-1 loss of every expert on a realized round, scored with the issued
/// recommendation's indicator.
pub fn expert_losses(experts: &ExpertSet, round: &InteractionRound) -> Result<Vec<f64>> {
    experts
        .centroids
        .iter()
        .map(|c| {
            let pred = choice::predict(c, &round.options, Some(round.recommended))?;
            Ok(choice::zero_one_loss(pred, round.chosen))
        })
        .collect()
}

pub fn observe(
    state: &HedgeState,
    experts: &ExpertSet,
    round: &InteractionRound,
) -> Result<(HedgeState, Vec<f64>)> {
    let losses = expert_losses(experts, round)?;
    Ok((hedge_update(state, &losses)?, losses))
}

/// Serializable snapshot of a trained learner and its per-user state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EwcCheckpoint {
    pub experts: ExpertSet,
    pub eta: f64,
    pub user_weights: BTreeMap<UserId, Vec<f64>>,
    pub warm_start: Option<ContextWarmStart>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn pv(w: &[f64]) -> PreferenceVector {
        PreferenceVector::new(w.to_vec()).unwrap()
    }

    fn opts(rows: &[&[f64]]) -> Vec<OptionContext> {
        rows.iter().map(|r| OptionContext::new(r.to_vec())).collect()
    }

    #[test]
    fn hedge_update_examples() {
        let s = HedgeState::uniform(2, 1.0);
        let next = hedge_update(&s, &[1.0, 0.0]).unwrap();
        assert_abs_diff_eq!(next.weights.probs[0], 0.268_941_421_369_995_1, epsilon = 1e-12);
        assert_abs_diff_eq!(next.weights.probs[1], 0.731_058_578_630_004_9, epsilon = 1e-12);

        let s = HedgeState {
            weights: ChoiceDistribution { probs: vec![0.2, 0.3, 0.5] },
            eta: 1.0,
        };
        let same = hedge_update(&s, &[0.7, 0.7, 0.7]).unwrap();
        for (a, b) in same.weights.probs.iter().zip(&s.weights.probs) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
        assert!(hedge_update(&s, &[0.0, 1.0]).is_err());
    }

    proptest! {
        #[test]
        fn zero_loss_expert_never_loses_weight(
            losses in prop::collection::vec(0.0f64..=1.0, 2..8),
            zero in 0usize..8,
            eta in 0.01f64..50.0,
        ) {
            let mut losses = losses;
            let z = zero % losses.len();
            losses[z] = 0.0;
            let s = HedgeState::uniform(losses.len(), eta);
            let next = hedge_update(&s, &losses).unwrap();
            prop_assert!(next.weights.probs[z] >= s.weights.probs[z] - 1e-15);
            let sum: f64 = next.weights.probs.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
        }

        #[test]
        fn weights_stay_normalized(
            seq in prop::collection::vec(prop::collection::vec(0.0f64..=1.0, 5), 1..200),
        ) {
            let mut s = HedgeState::uniform(5, 1.0);
            for l in &seq {
                s = hedge_update(&s, l).unwrap();
            }
            let sum: f64 = s.weights.probs.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn init_user_variants() {
        let u = UserContext::new(vec![1.0, 0.0]).unwrap();
        let s = init_user(&u, None, 6, 1.0).unwrap();
        assert_eq!(s.weights.probs, vec![1.0 / 6.0; 6]);

        let mut w = vec![vec![0.0; 3]; 4];
        w[3] = vec![20.0, 0.0, 0.0];
        let warm = ContextWarmStart { weight_matrix: w };
        let s = init_user(&u, Some(&warm), 4, 1.0).unwrap();
        assert!(s.weights.probs[3] > 0.99);
        assert_abs_diff_eq!(s.weights.probs.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert!(init_user(&u, Some(&warm), 5, 1.0).is_err());
    }

    #[test]
    fn warm_start_separable_feature() {
        let mut contexts = BTreeMap::new();
        let mut labels = BTreeMap::new();
        for id in 0..40u64 {
            let flag = (id % 2) as f64;
            contexts.insert(id, UserContext::new(vec![flag, 1.0]).unwrap());
            labels.insert(id, (id % 2) as usize);
        }
        let warm = warm_start_fit(&contexts, &labels, 2, &WarmStartConfig::default()).unwrap();
        for (id, label) in &labels {
            let p = warm.predict(&contexts[id]).unwrap();
            assert_eq!(choice::argmax(&p.probs), *label);
        }
    }

    #[test]
    fn warm_start_zero_contexts_learn_frequencies() {
        let mut contexts = BTreeMap::new();
        let mut labels = BTreeMap::new();
        let pattern = [0usize, 0, 1, 2, 2, 2, 0, 2, 1, 2];
        for (i, &l) in pattern.iter().enumerate() {
            contexts.insert(i as u64, UserContext::new(vec![0.0, 0.0, 0.0]).unwrap());
            labels.insert(i as u64, l);
        }
        let warm = warm_start_fit(&contexts, &labels, 3, &WarmStartConfig::default()).unwrap();
        let p = warm.predict(&contexts[&0]).unwrap();
        for (got, want) in p.probs.iter().zip([0.3, 0.2, 0.5]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-3);
        }
    }

    #[test]
    fn warm_start_degenerate_labels() {
        let mut contexts = BTreeMap::new();
        let mut labels = BTreeMap::new();
        for id in 0..5u64 {
            contexts.insert(id, UserContext::new(vec![id as f64]).unwrap());
            labels.insert(id, 2);
        }
        let warm = warm_start_fit(&contexts, &labels, 4, &WarmStartConfig::default()).unwrap();
        for ctx in contexts.values() {
            assert!(warm.predict(ctx).unwrap().probs[2] >= 1.0 - 1e-6);
        }
        let one = warm_start_fit(&contexts, &labels.iter().map(|(k, _)| (*k, 0)).collect(), 1, &WarmStartConfig::default()).unwrap();
        assert_eq!(one.predict(&contexts[&3]).unwrap().probs, vec![1.0]);
    }

    #[test]
    fn recommend_examples() {
        let travel = opts(&[&[100.0, 100.0], &[104.29, 91.99]]);
        let single = ExpertSet::new(vec![pv(&[-0.1, -0.1, 123.0])]).unwrap();
        let s = HedgeState::uniform(1, 1.0);
        let mut rng = seed::rng(1, "t", 0);
        for _ in 0..10 {
            assert_eq!(recommend(&s, &single, &travel, ExpertSelection::Sample, &mut rng).unwrap(), (0, 1));
        }

        let experts = ExpertSet::new(vec![pv(&[1.0, 0.0, 0.0]), pv(&[0.0, 1.0, 0.0]), pv(&[-1.0, 0.0, 0.0])]).unwrap();
        let s = HedgeState::uniform(3, 1.0);
        let a: Vec<_> = {
            let mut rng = seed::rng(42, "t", 0);
            (0..20).map(|_| recommend(&s, &experts, &travel, ExpertSelection::Sample, &mut rng).unwrap()).collect()
        };
        let b: Vec<_> = {
            let mut rng = seed::rng(42, "t", 0);
            (0..20).map(|_| recommend(&s, &experts, &travel, ExpertSelection::Sample, &mut rng).unwrap()).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn observe_examples() {
        let experts = ExpertSet::new(vec![pv(&[1.0, 0.0]), pv(&[-1.0, 0.0])]).unwrap();
        let round = InteractionRound {
            user_id: 1,
            round_index: 1,
            options: opts(&[&[2.0], &[1.0]]),
            recommended: 1,
            chosen: 0,
        };
        let (s, losses) = observe(&HedgeState::uniform(2, 1.0), &experts, &round).unwrap();
        assert_eq!(losses, vec![0.0, 1.0]);
        assert_abs_diff_eq!(s.weights.probs[0], 0.731_058_578_630_004_9, epsilon = 1e-12);
        assert_abs_diff_eq!(s.weights.probs[1], 0.268_941_421_369_995_1, epsilon = 1e-12);

        let agree = ExpertSet::new(vec![pv(&[1.0, 0.0]), pv(&[2.0, 0.0])]).unwrap();
        let start = HedgeState { weights: ChoiceDistribution { probs: vec![0.4, 0.6] }, eta: 1.0 };
        let (s, _) = observe(&start, &agree, &round).unwrap();
        assert_abs_diff_eq!(s.weights.probs[0], 0.4, epsilon = 1e-15);
    }

    #[test]
    fn loss_scoring_uses_issued_recommendation() {
        // anchoring-heavy expert predicts the recommended option only when the indicator is set
        let experts = ExpertSet::new(vec![pv(&[1.0, 10.0])]).unwrap();
        let round = InteractionRound {
            user_id: 1,
            round_index: 1,
            options: opts(&[&[2.0], &[1.0]]),
            recommended: 1,
            chosen: 1,
        };
        assert_eq!(expert_losses(&experts, &round).unwrap(), vec![0.0]);
        let mut rng = seed::rng(0, "t", 0);
        let (_, r) = recommend(&HedgeState::uniform(1, 1.0), &experts, &round.options, ExpertSelection::Sample, &mut rng).unwrap();
        assert_eq!(r, 0);
    }

    #[test]
    fn checkpoint_round_trip() {
        let cp = EwcCheckpoint {
            experts: ExpertSet::new(vec![pv(&[0.5, -0.25, 1.0])]).unwrap(),
            eta: 1.0,
            user_weights: BTreeMap::from([(3, vec![1.0])]),
            warm_start: Some(ContextWarmStart { weight_matrix: vec![vec![0.1, 0.2]] }),
        };
        let text = serde_json::to_string(&cp).unwrap();
        assert_eq!(serde_json::from_str::<EwcCheckpoint>(&text).unwrap(), cp);
    }
}

//! Domain types shared by every learner.
//!
//! Option indices are 0-based in memory. The interchange format in
//! [`crate::format`] converts to and from 1-based indices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Identifier of a user in a dataset.
pub type UserId = u64;

/// Context vector of one option, without the recommendation indicator.
///
/// The indicator is appended on demand (see [`crate::choice::utilities`]) so
/// one context can be scored with and without the anchoring feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OptionContext {
    pub features: Vec<f64>,
}

impl OptionContext {
    pub fn new(features: Vec<f64>) -> Self {
        Self { features }
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }
}

impl From<Vec<f64>> for OptionContext {
    fn from(features: Vec<f64>) -> Self {
        Self { features }
    }
}

/// Demographic (or otherwise per-user) context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(transparent)]
pub struct UserContext {
    pub features: Vec<f64>,
}

impl UserContext {
    pub fn new(features: Vec<f64>) -> Result<Self> {
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("user context".into()));
        }
        Ok(Self { features })
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }
}

/// Latent utility weights of length `d + 1`. The last coordinate is the
/// anchoring weight applied to the recommendation indicator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PreferenceVector {
    pub weights: Vec<f64>,
}

impl PreferenceVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("preference vector must be non-empty"));
        }
        if weights.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("preference vector".into()));
        }
        Ok(Self { weights })
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            weights: vec![0.0; len],
        }
    }

    /// Number of option features this vector scores (`len - 1`).
    pub fn option_dim(&self) -> usize {
        self.weights.len().saturating_sub(1)
    }

    pub fn anchoring(&self) -> f64 {
        *self.weights.last().expect("non-empty preference vector")
    }

    pub fn feature_weights(&self) -> &[f64] {
        &self.weights[..self.option_dim()]
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn squared_distance(&self, other: &PreferenceVector) -> f64 {
        self.weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }
}

/// One decision round: the options shown, the issued recommendation and the
/// user's actual choice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionRound {
    pub user_id: UserId,
    /// 1-based position of the round in the user's history.
    pub round_index: usize,
    pub options: Vec<OptionContext>,
    pub recommended: usize,
    pub chosen: usize,
}

impl InteractionRound {
    pub fn num_options(&self) -> usize {
        self.options.len()
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        let a = self.options.len();
        if a < 2 {
            return Err(Error::invalid(format!(
                "round {} of user {} has {a} options, need at least 2",
                self.round_index, self.user_id
            )));
        }
        if self.recommended >= a || self.chosen >= a {
            return Err(Error::invalid(format!(
                "round {} of user {}: recommended={} chosen={} out of bounds for {a} options",
                self.round_index, self.user_id, self.recommended, self.chosen
            )));
        }
        for opt in &self.options {
            if opt.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: opt.dim(),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserRecord {
    pub user_id: UserId,
    pub context: UserContext,
    pub rounds: Vec<InteractionRound>,
}

/// A population of users with their interaction histories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    /// Option feature dimension (excluding the recommendation indicator).
    pub d: usize,
    /// User context dimension.
    pub big_d: usize,
    pub users: Vec<UserRecord>,
}

impl Dataset {
    pub fn validate(&self) -> Result<()> {
        for user in &self.users {
            if user.context.dim() != self.big_d {
                return Err(Error::DimensionMismatch {
                    expected: self.big_d,
                    found: user.context.dim(),
                });
            }
            for round in &user.rounds {
                if round.user_id != user.user_id {
                    return Err(Error::invalid(format!(
                        "round tagged with user {} stored under user {}",
                        round.user_id, user.user_id
                    )));
                }
                round.validate(self.d)?;
            }
        }
        let mut ids: Vec<_> = self.users.iter().map(|u| u.user_id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("duplicate user ids"));
        }
        Ok(())
    }

    pub fn user(&self, id: UserId) -> Option<&UserRecord> {
        self.users.iter().find(|u| u.user_id == id)
    }

    pub fn total_rounds(&self) -> usize {
        self.users.iter().map(|u| u.rounds.len()).sum()
    }
}

/// Probability vector over the options of one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChoiceDistribution {
    pub probs: Vec<f64>,
}

impl ChoiceDistribution {
    pub fn uniform(n: usize) -> Self {
        Self {
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Inverse-CDF draw from a uniform variate in `[0, 1)`.
    pub fn sample_with(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (i, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        // rounding left a sliver of mass above the last bucket
        self.probs
            .iter()
            .rposition(|&p| p > 0.0)
            .unwrap_or(self.probs.len() - 1)
    }
}

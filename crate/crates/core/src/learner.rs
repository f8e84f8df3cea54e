//! Common stepping interface for online recommenders, and the EWC learner.

use std::collections::BTreeMap;

use crate::choice;
use crate::error::{Error, Result};
use crate::ewc::{self, ContextWarmStart, ExpertSelection, ExpertSet, HedgeState};
use crate::model::{InteractionRound, OptionContext, PreferenceVector, UserContext, UserId};
use crate::seed::{self, Rng};

/// Outcome of one round as seen by a learner.
#[derive(Debug, Clone, Copy)]
pub struct Feedback<'a> {
    /// The realized round. `recommended` is the option the user was shown.
    pub round: &'a InteractionRound,
    /// The option this learner proposed. Equal to `round.recommended` in
    /// live simulation; may differ when replaying logged sessions.
    pub issued: usize,
}

impl Feedback<'_> {
    pub fn accepted(&self) -> bool {
        self.issued == self.round.chosen
    }
}

pub trait Learner: Send {
    fn name(&self) -> &str;

    fn act(&mut self, user: UserId, context: &UserContext, options: &[OptionContext]) -> Result<usize>;

    fn learn(&mut self, context: &UserContext, feedback: Feedback<'_>) -> Result<()>;
}

#[derive(Debug, Clone)]
struct EwcUser {
    hedge: HedgeState,
    rng: Rng,
    cumulative_losses: Vec<f64>,
}

/// Hedge over cluster-centroid experts with per-user state.
#[derive(Debug, Clone)]
pub struct EwcLearner {
    name: String,
    experts: ExpertSet,
    warm: Option<ContextWarmStart>,
    eta: f64,
    selection: ExpertSelection,
    seed: u64,
    users: BTreeMap<UserId, EwcUser>,
}

impl EwcLearner {
    pub fn new(
        name: impl Into<String>,
        experts: ExpertSet,
        warm: Option<ContextWarmStart>,
        eta: f64,
        selection: ExpertSelection,
        seed: u64,
    ) -> Result<Self> {
        if !(eta > 0.0) {
            return Err(Error::Config("eta must be positive".into()));
        }
        if let Some(w) = &warm {
            if w.num_classes() != experts.len() {
                return Err(Error::DimensionMismatch {
                    expected: experts.len(),
                    found: w.num_classes(),
                });
            }
        }
        Ok(Self {
            name: name.into(),
            experts,
            warm,
            eta,
            selection,
            seed,
            users: BTreeMap::new(),
        })
    }

    pub fn experts(&self) -> &ExpertSet {
        &self.experts
    }

    pub fn weights(&self, user: UserId) -> Option<&HedgeState> {
        self.users.get(&user).map(|u| &u.hedge)
    }

    /// Summed expert losses charged to `user` so far.
    pub fn cumulative_losses(&self, user: UserId) -> Option<&[f64]> {
        self.users.get(&user).map(|u| u.cumulative_losses.as_slice())
    }

    pub fn checkpoint(&self) -> ewc::EwcCheckpoint {
        ewc::EwcCheckpoint {
            experts: self.experts.clone(),
            eta: self.eta,
            user_weights: self
                .users
                .iter()
                .map(|(id, u)| (*id, u.hedge.weights.probs.clone()))
                .collect(),
            warm_start: self.warm.clone(),
        }
    }

    fn ensure_user(&mut self, user: UserId, context: &UserContext) -> Result<()> {
        if !self.users.contains_key(&user) {
            let hedge = ewc::init_user(context, self.warm.as_ref(), self.experts.len(), self.eta)?;
            self.users.insert(
                user,
                EwcUser {
                    hedge,
                    rng: seed::rng(self.seed, "ewc-expert", user),
                    cumulative_losses: vec![0.0; self.experts.len()],
                },
            );
        }
        Ok(())
    }
}

impl Learner for EwcLearner {
    fn name(&self) -> &str {
        &self.name
    }

    fn act(&mut self, user: UserId, context: &UserContext, options: &[OptionContext]) -> Result<usize> {
        self.ensure_user(user, context)?;
        let state = self.users.get_mut(&user).expect("ensured");
        let (_, option) = ewc::recommend(&state.hedge, &self.experts, options, self.selection, &mut state.rng)?;
        Ok(option)
    }

    fn learn(&mut self, context: &UserContext, feedback: Feedback<'_>) -> Result<()> {
        let user = feedback.round.user_id;
        self.ensure_user(user, context)?;
        let state = self.users.get_mut(&user).expect("ensured");
        let (next, losses) = ewc::observe(&state.hedge, &self.experts, feedback.round)?;
        state.hedge = next;
        for (c, l) in state.cumulative_losses.iter_mut().zip(&losses) {
            *c += l;
        }
        Ok(())
    }
}

/// Recommends the argmax option under a fixed preference vector per user.
#[derive(Debug, Clone)]
pub struct FixedPreference {
    name: String,
    thetas: BTreeMap<UserId, PreferenceVector>,
}

impl FixedPreference {
    pub fn new(name: impl Into<String>, thetas: BTreeMap<UserId, PreferenceVector>) -> Self {
        Self {
            name: name.into(),
            thetas,
        }
    }
}

impl Learner for FixedPreference {
    fn name(&self) -> &str {
        &self.name
    }

    fn act(&mut self, user: UserId, _context: &UserContext, options: &[OptionContext]) -> Result<usize> {
        let theta = self
            .thetas
            .get(&user)
            .ok_or_else(|| Error::Config(format!("{}: no preference vector for user {user}", self.name)))?;
        choice::predict(theta, options, None)
    }

    fn learn(&mut self, _context: &UserContext, _feedback: Feedback<'_>) -> Result<()> {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn experts() -> ExpertSet {
        ExpertSet::new(vec![
            PreferenceVector::new(vec![1.0, 0.0]).unwrap(),
            PreferenceVector::new(vec![-1.0, 0.0]).unwrap(),
        ])
        .unwrap()
    }

    fn round(user: UserId, chosen: usize, rec: usize) -> InteractionRound {
        InteractionRound {
            user_id: user,
            round_index: 1,
            options: vec![OptionContext::new(vec![0.0]), OptionContext::new(vec![1.0])],
            recommended: rec,
            chosen,
        }
    }

    #[test]
    fn ewc_learner_tracks_hedge_state() {
        let ctx = UserContext { features: vec![] };
        let mut l = EwcLearner::new("ewc", experts(), None, 1.0, ExpertSelection::Sample, 0).unwrap();
        let rec = l.act(3, &ctx, &round(3, 1, 0).options).unwrap();
        let r = round(3, 1, rec);
        l.learn(&ctx, Feedback { round: &r, issued: rec }).unwrap();
        let w = &l.weights(3).unwrap().weights.probs;
        assert!((w[0] - 0.731_058_578_630_004_9).abs() < 1e-12);
        assert_eq!(l.cumulative_losses(3).unwrap(), &[0.0, 1.0]);
        assert_eq!(l.checkpoint().user_weights.len(), 1);
    }

    #[test]
    fn ewc_learner_is_deterministic() {
        let ctx = UserContext { features: vec![] };
        let run = || {
            let mut l = EwcLearner::new("ewc", experts(), None, 1.0, ExpertSelection::Sample, 9).unwrap();
            (0..50)
                .map(|t| {
                    let r = round(t % 3, 0, 0);
                    l.act(t % 3, &ctx, &r.options).unwrap()
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn fixed_preference_requires_user() {
        let ctx = UserContext { features: vec![] };
        let mut l = FixedPreference::new("oracle_theta", BTreeMap::new());
        assert!(matches!(l.act(1, &ctx, &round(1, 0, 0).options), Err(Error::Config(_))));
    }
}

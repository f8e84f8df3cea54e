//! Ablation and oracle variants of the expert-with-clustering learner.

use std::collections::BTreeMap;

use crate::choice;
use crate::error::{Error, Result};
use crate::ewc::ExpertSet;
use crate::learner::{Feedback, Learner};
use crate::model::{InteractionRound, OptionContext, PreferenceVector, UserContext, UserId};
use crate::noncompliance::{self, FitConfig};

/// Epoch budget of each online refit in [`NoncomplianceOnly`].
pub const ONLINE_REFIT_EPOCHS: usize = 100;

/// Per-user choice model refit online on the user's own history, without
/// clustering or Hedge. Starts from the zero vector, so the first
/// recommendation falls to option 0 by the tie rule.
#[derive(Debug, Clone)]
pub struct NoncomplianceOnly {
    cfg: FitConfig,
    users: BTreeMap<UserId, (Vec<InteractionRound>, Vec<f64>)>,
}

impl NoncomplianceOnly {
    pub fn new(mut cfg: FitConfig) -> Result<Self> {
        cfg.max_epochs = cfg.max_epochs.min(ONLINE_REFIT_EPOCHS);
        cfg.validate()?;
        Ok(Self {
            cfg,
            users: BTreeMap::new(),
        })
    }

    pub fn theta(&self, user: UserId) -> Option<&[f64]> {
        self.users.get(&user).map(|(_, t)| t.as_slice())
    }
}

impl Learner for NoncomplianceOnly {
    fn name(&self) -> &str {
        "noncompliance_only"
    }

    fn act(&mut self, user: UserId, _context: &UserContext, options: &[OptionContext]) -> Result<usize> {
        match self.users.get(&user) {
            Some((_, theta)) => choice::predict(&PreferenceVector::new(theta.clone())?, options, None),
            None => Ok(0),
        }
    }

    fn learn(&mut self, _context: &UserContext, feedback: Feedback<'_>) -> Result<()> {
        let round = feedback.round;
        let entry = self
            .users
            .entry(round.user_id)
            .or_insert_with(|| (Vec::new(), vec![0.0; round.options[0].dim() + 1]));
        entry.0.push(round.clone());
        let data = noncompliance::observations(&entry.0, self.cfg.use_recommendation);
        let fit = noncompliance::fit_observations(&data, entry.1.clone(), &self.cfg)?;
        entry.1 = fit.theta.weights;
        Ok(())
    }
}

/// Follows one fixed expert per user.
#[derive(Debug, Clone)]
pub struct OracleCluster {
    experts: ExpertSet,
    labels: BTreeMap<UserId, usize>,
}

impl OracleCluster {
    pub fn new(experts: ExpertSet, labels: BTreeMap<UserId, usize>) -> Result<Self> {
        if let Some((u, k)) = labels.iter().find(|(_, k)| **k >= experts.len()) {
            return Err(Error::Config(format!("oracle label {k} of user {u} exceeds K={}", experts.len())));
        }
        Ok(Self { experts, labels })
    }
}

impl Learner for OracleCluster {
    fn name(&self) -> &str {
        "oracle_cluster"
    }

    fn act(&mut self, user: UserId, _context: &UserContext, options: &[OptionContext]) -> Result<usize> {
        let k = *self
            .labels
            .get(&user)
            .ok_or_else(|| Error::Config(format!("oracle_cluster: no cluster label for user {user}")))?;
        choice::predict(&self.experts.centroids[k], options, None)
    }

    fn learn(&mut self, _context: &UserContext, _feedback: Feedback<'_>) -> Result<()> {
        Ok(())
    }
}

/// True cluster of each user: the expert whose recommendations agree most
/// often with those of the user's true preference vector over the probe
/// option sets. Ties go to the lowest index.
pub fn oracle_cluster_labels(
    experts: &ExpertSet,
    truth: &BTreeMap<UserId, PreferenceVector>,
    probes: &[Vec<OptionContext>],
) -> Result<BTreeMap<UserId, usize>> {
    if probes.is_empty() {
        return Err(Error::invalid("oracle labelling needs at least one probe option set"));
    }
    let expert_recs = experts
        .centroids
        .iter()
        .map(|c| probes.iter().map(|o| choice::predict(c, o, None)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    truth
        .iter()
        .map(|(id, theta)| {
            let own = probes
                .iter()
                .map(|o| choice::predict(theta, o, None))
                .collect::<Result<Vec<_>>>()?;
            let mismatches: Vec<f64> = expert_recs
                .iter()
                .map(|recs| recs.iter().zip(&own).filter(|(a, b)| a != b).count() as f64)
                .collect();
            Ok((*id, choice::argmin(&mismatches)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learner::FixedPreference;
    use crate::seed;
    use rand::Rng as _;

    fn options(rng: &mut seed::Rng) -> Vec<OptionContext> {
        (0..3)
            .map(|_| OptionContext::new(vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]))
            .collect()
    }

    #[test]
    fn oracle_theta_has_zero_loss_on_argmax_choices() {
        let theta = PreferenceVector::new(vec![0.7, -0.3, 2.0]).unwrap();
        let mut l = FixedPreference::new("oracle_theta", BTreeMap::from([(4, theta.clone())]));
        let ctx = UserContext { features: vec![] };
        let mut rng = seed::rng(0, "t", 0);
        let mut loss = 0.0;
        for _ in 0..500 {
            let opts = options(&mut rng);
            let rec = l.act(4, &ctx, &opts).unwrap();
            let chosen = choice::predict(&theta, &opts, Some(rec)).unwrap();
            loss += choice::zero_one_loss(rec, chosen);
        }
        assert_eq!(loss, 0.0);
    }

    #[test]
    fn oracle_labels_recover_generating_expert() {
        let experts = ExpertSet::new(vec![
            PreferenceVector::new(vec![1.0, 0.0, 0.0]).unwrap(),
            PreferenceVector::new(vec![0.0, 1.0, 0.0]).unwrap(),
            PreferenceVector::new(vec![-1.0, -1.0, 0.0]).unwrap(),
        ])
        .unwrap();
        let mut rng = seed::rng(1, "t", 0);
        let probes: Vec<_> = (0..200).map(|_| options(&mut rng)).collect();
        let truth = BTreeMap::from([
            (1, PreferenceVector::new(vec![1.1, 0.05, 3.0]).unwrap()),
            (2, PreferenceVector::new(vec![-0.05, 0.9, 0.0]).unwrap()),
            (3, PreferenceVector::new(vec![-2.0, -1.8, 0.0]).unwrap()),
        ]);
        let labels = oracle_cluster_labels(&experts, &truth, &probes).unwrap();
        assert_eq!(labels, BTreeMap::from([(1, 0), (2, 1), (3, 2)]));
        assert!(OracleCluster::new(experts, BTreeMap::from([(1, 3)])).is_err());
    }

    #[test]
    fn noncompliance_only_starts_at_option_zero_and_learns() {
        let mut l = NoncomplianceOnly::new(FitConfig::default()).unwrap();
        let ctx = UserContext { features: vec![] };
        let mut rng = seed::rng(2, "t", 0);
        let opts = options(&mut rng);
        assert_eq!(l.act(1, &ctx, &opts).unwrap(), 0);
        // the user always takes the option with the largest first coordinate
        let mut hits = 0;
        for t in 0..40 {
            let opts = options(&mut rng);
            let rec = l.act(1, &ctx, &opts).unwrap();
            let chosen = opts
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.features[0].total_cmp(&b.1.features[0]))
                .unwrap()
                .0;
            if t >= 20 && rec == chosen {
                hits += 1;
            }
            let round = InteractionRound {
                user_id: 1,
                round_index: t + 1,
                options: opts,
                recommended: rec,
                chosen,
            };
            l.learn(&ctx, Feedback { round: &round, issued: rec }).unwrap();
        }
        assert!(hits >= 18, "{hits}");
        assert!(l.theta(1).unwrap()[0] > 0.0);
    }
}

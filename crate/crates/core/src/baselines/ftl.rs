//! Follow-the-leader over the cluster experts.

use std::collections::BTreeMap;

use crate::choice;
use crate::error::Result;
use crate::ewc::{self, ExpertSet};
use crate::learner::{Feedback, Learner};
use crate::model::{OptionContext, UserContext, UserId};

/// Expert with the smallest cumulative loss; ties go to the lowest index.
pub fn ftl_step(cumulative: &[f64], experts: &ExpertSet, options: &[OptionContext]) -> Result<(usize, usize)> {
    let expert = choice::argmin(cumulative);
    Ok((expert, choice::predict(&experts.centroids[expert], options, None)?))
}

#[derive(Debug, Clone)]
pub struct Ftl {
    experts: ExpertSet,
    losses: BTreeMap<UserId, Vec<f64>>,
}

impl Ftl {
    pub fn new(experts: ExpertSet) -> Self {
        Self {
            experts,
            losses: BTreeMap::new(),
        }
    }

    pub fn cumulative_losses(&self, user: UserId) -> Option<&[f64]> {
        self.losses.get(&user).map(Vec::as_slice)
    }
}

impl Learner for Ftl {
    fn name(&self) -> &str {
        "ftl"
    }

    fn act(&mut self, user: UserId, _context: &UserContext, options: &[OptionContext]) -> Result<usize> {
        let zeros = vec![0.0; self.experts.len()];
        let cumulative = self.losses.get(&user).unwrap_or(&zeros);
        Ok(ftl_step(cumulative, &self.experts, options)?.1)
    }

    fn learn(&mut self, _context: &UserContext, feedback: Feedback<'_>) -> Result<()> {
        let losses = ewc::expert_losses(&self.experts, feedback.round)?;
        let k = self.experts.len();
        let acc = self.losses.entry(feedback.round.user_id).or_insert_with(|| vec![0.0; k]);
        for (a, l) in acc.iter_mut().zip(losses) {
            *a += l;
        }
        Ok(())
    }
}

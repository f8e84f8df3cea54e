//! Comparison learners and ablations, all behind [`Learner`].

pub mod ablation;
pub mod dynucb;
pub mod ftl;
pub mod linucb;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ewc::{ContextWarmStart, ExpertSelection, ExpertSet};
use crate::learner::{EwcLearner, FixedPreference, Learner};
use crate::model::{PreferenceVector, UserId};
use crate::noncompliance::FitConfig;

pub use ablation::{oracle_cluster_labels, NoncomplianceOnly, OracleCluster};
pub use dynucb::{Dynucb, DynucbState};
pub use ftl::{ftl_step, Ftl};
pub use linucb::{LinUcb, LinUcbState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Ewc,
    Linucb,
    Dynucb,
    Ftl,
    NoncomplianceOnly,
    WithoutNoncompliance,
    WithoutUi,
    OracleCluster,
    OracleTheta,
}

impl Algorithm {
    pub const ALL: [Algorithm; 9] = [
        Algorithm::Ewc,
        Algorithm::Linucb,
        Algorithm::Dynucb,
        Algorithm::Ftl,
        Algorithm::NoncomplianceOnly,
        Algorithm::WithoutNoncompliance,
        Algorithm::WithoutUi,
        Algorithm::OracleCluster,
        Algorithm::OracleTheta,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Ewc => "ewc",
            Algorithm::Linucb => "linucb",
            Algorithm::Dynucb => "dynucb",
            Algorithm::Ftl => "ftl",
            Algorithm::NoncomplianceOnly => "noncompliance_only",
            Algorithm::WithoutNoncompliance => "without_noncompliance",
            Algorithm::WithoutUi => "without_ui",
            Algorithm::OracleCluster => "oracle_cluster",
            Algorithm::OracleTheta => "oracle_theta",
        }
    }

    pub fn needs_truth(self) -> bool {
        matches!(self, Algorithm::OracleCluster | Algorithm::OracleTheta)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown algorithm '{s}'")))
    }
}

/// Everything the learners may need. Oracle entries are only present for
/// simulated populations.
#[derive(Debug, Clone)]
pub struct Assets {
    pub d: usize,
    pub big_d: usize,
    pub k: usize,
    pub eta: f64,
    pub alpha: f64,
    pub selection: ExpertSelection,
    pub fit: FitConfig,
    pub seed: u64,
    pub experts: Option<ExpertSet>,
    pub warm_start: Option<ContextWarmStart>,
    /// Experts and warm start trained with the recommendation indicator
    /// forced to zero.
    pub experts_without_rec: Option<(ExpertSet, Option<ContextWarmStart>)>,
    pub truth: Option<BTreeMap<UserId, PreferenceVector>>,
    pub oracle_labels: Option<BTreeMap<UserId, usize>>,
}

fn missing(alg: Algorithm, what: &str) -> Error {
    Error::Config(format!("{alg} requires {what}"))
}

pub fn build_learner(alg: Algorithm, assets: &Assets) -> Result<Box<dyn Learner>> {
    let experts = || assets.experts.clone().ok_or_else(|| missing(alg, "cluster experts"));
    Ok(match alg {
        Algorithm::Ewc => Box::new(EwcLearner::new(
            alg.as_str(),
            experts()?,
            assets.warm_start.clone(),
            assets.eta,
            assets.selection,
            assets.seed,
        )?),
        Algorithm::Linucb => Box::new(LinUcb::new(assets.d, assets.big_d, assets.alpha)?),
        Algorithm::Dynucb => Box::new(Dynucb::new(assets.d, assets.big_d, assets.k, assets.alpha, assets.seed)?),
        Algorithm::Ftl => Box::new(Ftl::new(experts()?)),
        _ => make_ablation(alg, assets)?,
    })
}

pub fn make_ablation(variant: Algorithm, assets: &Assets) -> Result<Box<dyn Learner>> {
    let name = variant.as_str();
    Ok(match variant {
        Algorithm::WithoutNoncompliance => {
            let (experts, warm) = assets
                .experts_without_rec
                .clone()
                .ok_or_else(|| missing(variant, "experts trained without the recommendation indicator"))?;
            Box::new(EwcLearner::new(name, experts, warm, assets.eta, assets.selection, assets.seed)?)
        }
        Algorithm::WithoutUi => Box::new(EwcLearner::new(
            name,
            assets.experts.clone().ok_or_else(|| missing(variant, "cluster experts"))?,
            None,
            assets.eta,
            assets.selection,
            assets.seed,
        )?),
        Algorithm::OracleCluster => Box::new(OracleCluster::new(
            assets.experts.clone().ok_or_else(|| missing(variant, "cluster experts"))?,
            assets
                .oracle_labels
                .clone()
                .ok_or_else(|| missing(variant, "true cluster labels"))?,
        )?),
        Algorithm::OracleTheta => Box::new(FixedPreference::new(
            name,
            assets.truth.clone().ok_or_else(|| missing(variant, "true preference vectors"))?,
        )),
        Algorithm::NoncomplianceOnly => Box::new(NoncomplianceOnly::new(assets.fit)?),
        other => return Err(Error::Config(format!("{other} is not an ablation variant"))),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bare() -> Assets {
        Assets {
            d: 2,
            big_d: 1,
            k: 2,
            eta: 1.0,
            alpha: 0.05,
            selection: ExpertSelection::Sample,
            fit: FitConfig::default(),
            seed: 0,
            experts: None,
            warm_start: None,
            experts_without_rec: None,
            truth: None,
            oracle_labels: None,
        }
    }

    #[test]
    fn without_ui_equals_ewc_under_uniform_warm_start() {
        use crate::model::{OptionContext, UserContext};
        let experts = ExpertSet::new(
            (0..3)
                .map(|k| PreferenceVector::new(vec![k as f64 - 1.0, 1.0 - k as f64, 0.5]).unwrap())
                .collect(),
        )
        .unwrap();
        let mut assets = bare();
        assets.k = 3;
        assets.experts = Some(experts);
        assets.warm_start = Some(ContextWarmStart {
            weight_matrix: vec![vec![0.0, 0.0]; 3],
        });
        let mut ewc = build_learner(Algorithm::Ewc, &assets).unwrap();
        let mut plain = build_learner(Algorithm::WithoutUi, &assets).unwrap();
        let ctx = UserContext { features: vec![1.0] };
        for t in 0..200usize {
            let opts = vec![
                OptionContext::new(vec![(t % 5) as f64, 1.0]),
                OptionContext::new(vec![1.0, (t % 3) as f64]),
            ];
            let user = (t % 4) as u64;
            let a = ewc.act(user, &ctx, &opts).unwrap();
            assert_eq!(a, plain.act(user, &ctx, &opts).unwrap());
            let round = crate::model::InteractionRound {
                user_id: user,
                round_index: t / 4 + 1,
                options: opts,
                recommended: a,
                chosen: t % 2,
            };
            let fb = crate::learner::Feedback { round: &round, issued: a };
            ewc.learn(&ctx, fb).unwrap();
            plain.learn(&ctx, fb).unwrap();
        }
    }

    #[test]
    fn names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.as_str().parse::<Algorithm>().unwrap(), a);
        }
        assert!("xgboost".parse::<Algorithm>().is_err());
    }

    #[test]
    fn missing_assets_rejected() {
        let assets = bare();
        for a in [
            Algorithm::Ewc,
            Algorithm::Ftl,
            Algorithm::WithoutNoncompliance,
            Algorithm::WithoutUi,
            Algorithm::OracleCluster,
            Algorithm::OracleTheta,
        ] {
            assert!(matches!(build_learner(a, &assets), Err(Error::Config(_))), "{a}");
        }
        for a in [Algorithm::Linucb, Algorithm::Dynucb, Algorithm::NoncomplianceOnly] {
            assert_eq!(build_learner(a, &assets).unwrap().name(), a.as_str());
        }
    }
}

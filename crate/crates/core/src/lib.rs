//! Preference learning when users may decline recommendations.
//!
//! The crate contains the offline choice model with a recommendation
//! anchoring term ([`noncompliance`]), loss-guided K-Means over fitted
//! preferences ([`clustering`]), the online expert-with-clustering learner
//! ([`ewc`]), comparison learners ([`baselines`]), a synthetic travel-route
//! population ([`simgen`]), restaurant session ingestion ([`datasets`]) and
//! the experiment runner and theory probes ([`harness`]).

pub mod choice;
pub mod baselines;
pub mod clustering;
pub mod datasets;
pub mod descent;
pub mod error;
pub mod ewc;
pub mod format;
pub mod harness;
pub mod learner;
pub mod model;
pub mod noncompliance;
pub mod seed;
pub mod simgen;

pub use error::{Error, Result};
pub use model::{
    ChoiceDistribution, Dataset, InteractionRound, OptionContext, PreferenceVector, UserContext,
    UserId, UserRecord,
};

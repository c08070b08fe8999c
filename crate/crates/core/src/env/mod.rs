//! The physical system model and the decision process built on it.

pub mod action;
pub mod channels;
pub mod mdp;
pub mod rates;
pub mod scenario;
pub mod sensing;

pub use action::{ActionComposite, Assignment, ReflectionConfig};
pub use channels::{draw_channels, ChannelSet};
pub use mdp::{state_len, Environment, StepOutcome};
pub use rates::{evaluate, AccessMode, CaseRates, ConstraintReport, Evaluation};
pub use scenario::{RewardConfig, Scenario};
pub use sensing::{JointProbs, SensingReport};

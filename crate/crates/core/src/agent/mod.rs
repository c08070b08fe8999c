//! The hybrid hierarchical learner: a D3QN choosing options and a SAC policy
//! choosing the continuous part, on a small in-house MLP engine.

pub mod codec;
pub mod d3qn;
pub mod mlp;
pub mod options;
pub mod persist;
pub mod replay;
pub mod sac;
pub mod trainer;

pub use codec::{action_dim, decode_action, encode_action, ReflectionOverride};
pub use d3qn::{dueling_q, D3qn};
pub use mlp::{Adam, Mlp};
pub use options::OptionCatalog;
pub use persist::{load_agent, save_agent};
pub use replay::{Experience, ReplayBuffer};
pub use sac::{Sac, SacPolicyOutput};
pub use trainer::{episode_rewards, evaluate_policy, mean, train, Agent, OptionSource, StepRecord, TrainConfig, Variant};

//! Alternating-optimization baseline with full channel knowledge.
//!
//! Each outer iteration runs four blocks in turn, each at fixed values of
//! the others:
//!
//! 1. transmit power and subchannel assignment from the stationarity
//!    conditions of the Lagrangian, with MRT beam directions and dual
//!    subgradient steps on the interference and power constraints;
//! 2. IRS pairing, separable per SU;
//! 3. reflection coefficients by successive convex approximation;
//! 4. sensing time by grid search.

pub mod assign;
pub mod power;
pub mod sca;
pub mod sensing_time;
pub mod solve;

pub use assign::assign_subchannels;
pub use power::{optimal_power, power_quadratic, Branch, DualVars, SecrecyTerm};
pub use sca::{sca_reflection, sq_magnitude, taylor_lower_bound, ReflectionModel, ScaConfig, SurrogatePoint};
pub use sensing_time::search_sensing_time;
pub use solve::{ao_solve, beamforming_assignment, mrt_beams, pair_irs, AoConfig, AoOutcome, Block, TraceEntry};

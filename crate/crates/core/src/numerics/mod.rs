//! Scalar and complex numerical kernels shared by every other module.

pub mod fading;
pub mod linalg;
pub mod pathloss;
pub mod rng;
pub mod special;

pub use fading::{rayleigh_channel, rician_channel};
pub use linalg::{CMat, CVec, C64};
pub use pathloss::{dbm_to_watts, path_gain};
pub use rng::SeededRng;
pub use special::{q_function, q_inverse};

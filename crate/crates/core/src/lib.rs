//! Multi-IRS sensing-enhanced spectrum-sharing secure transmission.
//!
//! * [`numerics`]: tail functions, path loss, fading, small complex algebra,
//!   seeded randomness.
//! * [`env`]: channel realizations, energy-detection sensing, rates, secrecy,
//!   constraint checking and the decision process.
//! * [`agent`]: the hierarchical D3QN and SAC learner, its action codec,
//!   training loop and agent files.
//! * [`ao`]: the alternating-optimization baseline.
//! * [`bench`]: scheme runs, metrics CSV, comparisons and latency timing.

pub mod agent;
pub mod ao;
pub mod bench;
pub mod env;
pub mod error;
pub mod numerics;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/system-model.md")]
    mod system_model {}
    #[doc = include_str!("../../../book/src/decision-process.md")]
    mod decision_process {}
    #[doc = include_str!("../../../book/src/agent.md")]
    mod agent {}
    #[doc = include_str!("../../../book/src/ao-baseline.md")]
    mod ao_baseline {}
    #[doc = include_str!("../../../book/src/benchmarks.md")]
    mod benchmarks {}
    #[doc = include_str!("../../../book/src/reproducibility.md")]
    mod reproducibility {}
}

//! The compared schemes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::agent::{OptionSource, ReflectionOverride, Variant};
use crate::env::AccessMode;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeId {
    /// The hierarchical learner with every component active.
    Proposed,
    /// Alternating optimization solved afresh every step.
    Ao,
    /// Learner with all reflection amplitudes forced to zero.
    WithoutIrs,
    /// Learner whose option is drawn uniformly every step.
    RandomChoice,
    /// Learner with the reflection frozen at `b = 1, phi = 0`.
    FixedIrs,
    /// Learner that transmits only on subchannels sensed idle.
    Opportunistic,
}

impl SchemeId {
    pub const ALL: [SchemeId; 6] = [
        SchemeId::Proposed,
        SchemeId::Ao,
        SchemeId::WithoutIrs,
        SchemeId::RandomChoice,
        SchemeId::FixedIrs,
        SchemeId::Opportunistic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SchemeId::Proposed => "proposed",
            SchemeId::Ao => "ao",
            SchemeId::WithoutIrs => "without_irs",
            SchemeId::RandomChoice => "random_choice",
            SchemeId::FixedIrs => "fixed_irs",
            SchemeId::Opportunistic => "opportunistic",
        }
    }

    /// The learner variant behind a scheme, or `None` for AO.
    pub fn variant(self) -> Option<Variant> {
        let base = Variant::default();
        match self {
            SchemeId::Proposed => Some(base),
            SchemeId::Ao => None,
            SchemeId::WithoutIrs => Some(Variant {
                reflection: ReflectionOverride::Absorbing,
                ..base
            }),
            SchemeId::RandomChoice => Some(Variant {
                options: OptionSource::Uniform,
                ..base
            }),
            SchemeId::FixedIrs => Some(Variant {
                reflection: ReflectionOverride::Identity,
                ..base
            }),
            SchemeId::Opportunistic => Some(Variant {
                mode: AccessMode::Opportunistic,
                ..base
            }),
        }
    }

    /// Parses a comma-separated list such as `proposed,fixed_irs`.
    pub fn parse_list(text: &str) -> Result<Vec<SchemeId>> {
        let out: Vec<SchemeId> = text.split(',').map(|t| t.trim().parse()).collect::<Result<_>>()?;
        if out.is_empty() {
            return Err(Error::Config("empty scheme list".into()));
        }
        Ok(out)
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for SchemeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchemeId::ALL.into_iter().find(|id| id.as_str() == s).ok_or_else(|| {
            let names: Vec<_> = SchemeId::ALL.iter().map(|id| id.as_str()).collect();
            Error::Config(format!("unknown scheme `{s}`, expected one of {}", names.join(", ")))
        })
    }
}

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Dataset partition. Train, validation and match share the training
/// geometry; mismatch changes the microphone-loudspeaker distance; real
/// uses imported impulse responses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Match,
    Mismatch,
    Real,
}

/// Microphone-loudspeaker distance used for training geometry, meters.
pub const TRAIN_ML_DISTANCE: f64 = 0.3;
/// Candidate distances for the mismatch test set, meters.
pub const MISMATCH_ML_DISTANCES: [f64; 3] = [0.4, 0.5, 0.8];

impl Split {
    pub const ALL: [Split; 5] = [
        Split::Train,
        Split::Val,
        Split::Match,
        Split::Mismatch,
        Split::Real,
    ];

    /// Allowed M-L distances, `None` for imported RIRs.
    pub fn ml_distances(self) -> Option<&'static [f64]> {
        match self {
            Split::Train | Split::Val | Split::Match => Some(&[TRAIN_ML_DISTANCE]),
            Split::Mismatch => Some(&MISMATCH_ML_DISTANCES),
            Split::Real => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Match => "match",
            Split::Mismatch => "mismatch",
            Split::Real => "real",
        }
    }

    pub(crate) fn tag(self) -> u64 {
        self as u64 + 1
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Split::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown split '{s}'")))
    }
}

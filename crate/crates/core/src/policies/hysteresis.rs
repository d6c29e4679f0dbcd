use serde::{Deserialize, Serialize};

use super::{Action, InterfaceId};
use crate::error::{Error, Result};

/// Switch gate: a handoff needs at least `margin` of advantage and at least
/// `dwell_epochs` since the previous one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HysteresisConfig {
    pub margin: f64,
    pub dwell_epochs: u64,
}

impl Default for HysteresisConfig {
    fn default() -> Self {
        HysteresisConfig {
            margin: 0.1,
            dwell_epochs: 2,
        }
    }
}

impl HysteresisConfig {
    /// Gate used by the M4 baseline, margin in seconds of RNL.
    pub fn rnl_default() -> Self {
        HysteresisConfig {
            margin: 0.02,
            dwell_epochs: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.margin >= 0.0) || !self.margin.is_finite() {
            return Err(Error::invalid(
                "hysteresis",
                "margin must be finite and >= 0",
            ));
        }
        Ok(())
    }
}

pub fn decide_handoff(
    proposed: Action,
    current: InterfaceId,
    expected_gain: f64,
    hys: &HysteresisConfig,
    epochs_since_handoff: u64,
) -> Action {
    if proposed.target != current
        && expected_gain >= hys.margin
        && epochs_since_handoff >= hys.dwell_epochs
    {
        proposed
    } else {
        Action::stay(current)
    }
}

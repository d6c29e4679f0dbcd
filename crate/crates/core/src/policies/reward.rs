use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Weights and normalization ranges of the handoff reward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    /// Weight of the QoE term; cost gets `1 - w_qoe`.
    pub w_qoe: f64,
    pub qoe_min: f64,
    pub qoe_max: f64,
    pub cost_min: f64,
    pub cost_max: f64,
    /// Cost charged on an epoch where the interface changes.
    pub handoff_cost: f64,
    /// Cost per epoch of being attached, one entry per interface. Empty means
    /// free.
    pub usage_cost: Vec<f64>,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            w_qoe: 1.0,
            qoe_min: 1.0,
            qoe_max: 3.0,
            cost_min: 0.0,
            cost_max: 1.0,
            handoff_cost: 1.0,
            usage_cost: Vec::new(),
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.w_qoe) {
            return Err(Error::invalid("reward config", "w_qoe must be in [0, 1]"));
        }
        if !(self.qoe_min < self.qoe_max) {
            return Err(Error::invalid("reward config", "qoe_min must be < qoe_max"));
        }
        if !(self.cost_min < self.cost_max) {
            return Err(Error::invalid(
                "reward config",
                "cost_min must be < cost_max",
            ));
        }
        if !(self.handoff_cost >= 0.0) || self.usage_cost.iter().any(|c| !(*c >= 0.0)) {
            return Err(Error::invalid("reward config", "costs must be >= 0"));
        }
        Ok(())
    }

    /// Cost of an epoch spent on `interface`, switching or not.
    pub fn epoch_cost(&self, interface: usize, switched: bool) -> f64 {
        let usage = self.usage_cost.get(interface).copied().unwrap_or(0.0);
        usage + if switched { self.handoff_cost } else { 0.0 }
    }

    pub fn qoe_utility(&self, qoe: f64) -> f64 {
        if qoe >= self.qoe_max {
            1.0
        } else if qoe <= self.qoe_min {
            0.0
        } else {
            (qoe - self.qoe_min) / (self.qoe_max - self.qoe_min)
        }
    }

    pub fn cost_utility(&self, cost: f64) -> f64 {
        if cost <= self.cost_min {
            1.0
        } else if cost >= self.cost_max {
            0.0
        } else {
            (self.cost_max - cost) / (self.cost_max - self.cost_min)
        }
    }
}

/// `w * f(QoE) + (1 - w) * f(Cost)` with both terms clamped linear ramps.
pub fn reward(qoe_state_value: f64, cost: f64, cfg: &RewardConfig) -> f64 {
    cfg.w_qoe * cfg.qoe_utility(qoe_state_value) + (1.0 - cfg.w_qoe) * cfg.cost_utility(cost)
}

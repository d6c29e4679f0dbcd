//! Handoff decision policies.
//!
//! * [`qlearning`]: the learning agent's table, update rule and action choice.
//! * [`reward`]: QoE/cost reward in `[0, 1]`.
//! * [`hysteresis`]: the switch gate shared by the learning agent.
//! * [`baselines`]: M4 (lowest RNL) and naive weighted-QoS selection.
//! * [`oracle`]: offline minimum-handoff best case.
//! * [`value_iteration`]: Bellman solver used as ground truth for Q-learning.

pub mod baselines;
pub mod hysteresis;
pub mod oracle;
pub mod qlearning;
pub mod reward;
pub mod value_iteration;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qoe::QoeState;

pub use baselines::{m4_policy_step, naive_policy_step, QosInputs, QosWeights};
pub use hysteresis::{decide_handoff, HysteresisConfig};
pub use oracle::{handoff_count, oracle_policy};
pub use qlearning::{
    q_update, select_action, AlphaDecay, EpsilonGreedy, QLearningConfig, QTable, SelectMode,
};
pub use reward::{reward, RewardConfig};
pub use value_iteration::{value_iteration, FiniteMdp, ValueSolution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InterfaceId(usize);

impl InterfaceId {
    pub const fn new(index: usize) -> Self {
        InterfaceId(index)
    }

    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for InterfaceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "if{}", self.0)
    }
}

/// Attach to `target` for the next epoch; targeting the current interface
/// means staying.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Action {
    pub target: InterfaceId,
}

impl Action {
    pub fn select(index: usize) -> Self {
        Action {
            target: InterfaceId(index),
        }
    }

    pub fn stay(current: InterfaceId) -> Self {
        Action { target: current }
    }
}

/// Per-interface QoE states plus the interface currently attached.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct JointState {
    pub per_interface: Vec<QoeState>,
    pub current: InterfaceId,
}

impl JointState {
    pub fn new(per_interface: Vec<QoeState>, current: InterfaceId) -> Self {
        JointState {
            per_interface,
            current,
        }
    }
}

/// Shape of the joint state space.
///
/// Indexing is row-major over `(state_if0, state_if1, ..., current)`, so the
/// attached interface varies fastest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JointSpace {
    state_counts: Vec<usize>,
}

impl JointSpace {
    pub fn new(state_counts: Vec<usize>) -> Result<Self> {
        if state_counts.is_empty() || state_counts.contains(&0) {
            return Err(Error::invalid(
                "joint space",
                "every interface needs >= 1 state",
            ));
        }
        Ok(JointSpace { state_counts })
    }

    pub fn interfaces(&self) -> usize {
        self.state_counts.len()
    }

    pub fn state_counts(&self) -> &[usize] {
        &self.state_counts
    }

    pub fn len(&self) -> usize {
        self.state_counts.iter().product::<usize>() * self.interfaces()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, s: &JointState) -> Result<usize> {
        if s.per_interface.len() != self.interfaces() {
            return Err(Error::domain(format!(
                "joint state has {} interface states, space has {}",
                s.per_interface.len(),
                self.interfaces()
            )));
        }
        if s.current.index() >= self.interfaces() {
            return Err(Error::domain(format!(
                "interface {} out of range",
                s.current
            )));
        }
        let mut idx = 0;
        for (state, count) in s.per_interface.iter().zip(&self.state_counts) {
            if state.index() > *count {
                return Err(Error::domain(format!(
                    "QoE state {state} exceeds {count} states"
                )));
            }
            idx = idx * count + state.zero_based();
        }
        Ok(idx * self.interfaces() + s.current.index())
    }

    pub fn state(&self, mut index: usize) -> JointState {
        let n = self.interfaces();
        let current = InterfaceId(index % n);
        index /= n;
        let mut per_interface = vec![QoeState::new(1); n];
        for i in (0..n).rev() {
            let c = self.state_counts[i];
            per_interface[i] = QoeState::from_zero_based(index % c);
            index /= c;
        }
        JointState {
            per_interface,
            current,
        }
    }

    pub fn label(&self, index: usize) -> String {
        let s = self.state(index);
        let states: Vec<String> = s.per_interface.iter().map(|q| q.to_string()).collect();
        format!("s=({}) cur={}", states.join(","), s.current.index())
    }
}

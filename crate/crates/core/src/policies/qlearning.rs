use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Action, InterfaceId, JointSpace, JointState};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaDecay {
    Constant,
    /// `alpha * tau / (tau + n - 1)` on the n-th visit of a pair.
    InverseVisit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QLearningConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: f64,
    /// Multiplier applied to epsilon after every episode.
    pub epsilon_decay: f64,
    pub epsilon_floor: f64,
    pub alpha_decay: AlphaDecay,
    /// Visit scale of the inverse-visit schedule; `1 / (1 - gamma)` when unset.
    pub alpha_tau: Option<f64>,
}

impl Default for QLearningConfig {
    fn default() -> Self {
        QLearningConfig {
            alpha: 0.80,
            gamma: 0.95,
            epsilon: 0.2,
            epsilon_decay: 0.99,
            epsilon_floor: 0.01,
            alpha_decay: AlphaDecay::InverseVisit,
            alpha_tau: None,
        }
    }
}

impl QLearningConfig {
    pub fn validate(&self) -> Result<()> {
        let what = "q-learning config";
        if !(self.alpha >= 0.0 && self.alpha <= 1.0) {
            return Err(Error::invalid(what, "alpha must be in [0, 1]"));
        }
        if !(self.gamma >= 0.0 && self.gamma < 1.0) {
            return Err(Error::invalid(what, "gamma must be in [0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.epsilon) || !(0.0..=1.0).contains(&self.epsilon_floor) {
            return Err(Error::invalid(
                what,
                "epsilon and epsilon_floor must be in [0, 1]",
            ));
        }
        if !(self.epsilon_decay > 0.0 && self.epsilon_decay <= 1.0) {
            return Err(Error::invalid(what, "epsilon_decay must be in (0, 1]"));
        }
        if let Some(tau) = self.alpha_tau {
            if !(tau > 0.0) || !tau.is_finite() {
                return Err(Error::invalid(what, "alpha_tau must be > 0"));
            }
        }
        Ok(())
    }

    /// Learning rate applied on the `visit`-th update of a pair (1-based).
    pub fn effective_alpha(&self, visit: u64) -> f64 {
        match self.alpha_decay {
            AlphaDecay::Constant => self.alpha,
            AlphaDecay::InverseVisit => {
                let tau = self.alpha_tau.unwrap_or(1.0 / (1.0 - self.gamma));
                self.alpha * tau / (tau + visit.saturating_sub(1) as f64)
            }
        }
    }
}

/// Action values over the joint state space, one column per interface.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    space: JointSpace,
    values: Vec<Vec<f64>>,
    visits: Vec<Vec<u64>>,
}

impl QTable {
    pub fn new(space: JointSpace) -> Self {
        let n = space.len();
        let a = space.interfaces();
        QTable {
            space,
            values: vec![vec![0.0; a]; n],
            visits: vec![vec![0; a]; n],
        }
    }

    pub fn space(&self) -> &JointSpace {
        &self.space
    }

    pub fn actions(&self) -> usize {
        self.space.interfaces()
    }

    pub fn states(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.values[state]
    }

    pub fn visits(&self, state: usize) -> &[u64] {
        &self.visits[state]
    }

    pub fn get(&self, state: usize, action: usize) -> f64 {
        self.values[state][action]
    }

    pub fn set(&mut self, state: usize, action: usize, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::domain("Q-values must be finite"));
        }
        self.check(state, action)?;
        self.values[state][action] = value;
        Ok(())
    }

    pub fn max_value(&self, state: usize) -> f64 {
        self.values[state]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn index(&self, s: &JointState) -> Result<usize> {
        self.space.index(s)
    }

    fn check(&self, state: usize, action: usize) -> Result<()> {
        if state >= self.states() || action >= self.actions() {
            return Err(Error::domain(format!(
                "pair ({state}, {action}) outside a {}x{} table",
                self.states(),
                self.actions()
            )));
        }
        Ok(())
    }

    /// One temporal-difference step on state/action indices. Returns the
    /// new value.
    pub fn update_indexed(
        &mut self,
        state: usize,
        action: usize,
        reward: f64,
        next: usize,
        cfg: &QLearningConfig,
    ) -> Result<f64> {
        self.check(state, action)?;
        self.check(next, 0)?;
        if !reward.is_finite() {
            return Err(Error::domain("reward must be finite"));
        }
        self.visits[state][action] += 1;
        let alpha = cfg.effective_alpha(self.visits[state][action]);
        let target = reward + cfg.gamma * self.max_value(next);
        let q = &mut self.values[state][action];
        *q += alpha * (target - *q);
        Ok(*q)
    }

    /// Greedy action: highest value, ties to `current` and then to the
    /// lowest index.
    pub fn greedy(&self, state: usize, current: InterfaceId) -> Action {
        let row = &self.values[state];
        let best = self.max_value(state);
        if row.get(current.index()) == Some(&best) {
            return Action::stay(current);
        }
        let idx = row.iter().position(|v| *v == best).unwrap_or(0);
        Action::select(idx)
    }

    pub fn to_file(&self) -> QTableFile {
        QTableFile {
            state_counts: self.space.state_counts().to_vec(),
            actions: (0..self.actions()).map(|a| format!("select {a}")).collect(),
            rows: (0..self.states())
                .map(|s| QRow {
                    state: self.space.label(s),
                    values: self.values[s].clone(),
                    visits: self.visits[s].clone(),
                })
                .collect(),
        }
    }

    pub fn from_file(file: QTableFile) -> Result<Self> {
        let space = JointSpace::new(file.state_counts)?;
        let mut table = QTable::new(space);
        if file.rows.len() != table.states() {
            return Err(Error::invalid(
                "q-table file",
                format!(
                    "expected {} rows, found {}",
                    table.states(),
                    file.rows.len()
                ),
            ));
        }
        for (s, row) in file.rows.into_iter().enumerate() {
            let label = table.space.label(s);
            if row.state != label {
                return Err(Error::invalid(
                    "q-table file",
                    format!("row {s} is labelled {:?}, expected {label:?}", row.state),
                ));
            }
            if row.values.len() != table.actions() || row.visits.len() != table.actions() {
                return Err(Error::invalid(
                    "q-table file",
                    format!("row {s} has the wrong width"),
                ));
            }
            if row.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(
                    "q-table file",
                    format!("row {s} is not finite"),
                ));
            }
            table.values[s] = row.values;
            table.visits[s] = row.visits;
        }
        Ok(table)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text =
            toml::to_string(&self.to_file()).map_err(|e| Error::Serialization(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: QTableFile =
            toml::from_str(&text).map_err(|e| Error::Serialization(e.to_string()))?;
        Self::from_file(file)
    }
}

/// Text form of a [`QTable`], rows in joint-state index order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTableFile {
    pub state_counts: Vec<usize>,
    pub actions: Vec<String>,
    pub rows: Vec<QRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QRow {
    pub state: String,
    pub values: Vec<f64>,
    pub visits: Vec<u64>,
}

/// `Q(s,a) += alpha * (r + gamma * max Q(s', .) - Q(s,a))`.
pub fn q_update(
    q: &mut QTable,
    s: &JointState,
    a: Action,
    r: f64,
    s_next: &JointState,
    cfg: &QLearningConfig,
) -> Result<f64> {
    let si = q.index(s)?;
    let ni = q.index(s_next)?;
    q.update_indexed(si, a.target.index(), r, ni, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectMode {
    Explore,
    Exploit,
}

pub fn select_action<R: Rng + ?Sized>(
    q: &QTable,
    s: &JointState,
    mode: SelectMode,
    rng: &mut R,
) -> Result<Action> {
    let si = q.index(s)?;
    Ok(match mode {
        SelectMode::Exploit => q.greedy(si, s.current),
        SelectMode::Explore => Action::select(rng.random_range(0..q.actions())),
    })
}

/// Epsilon-greedy mode switch with per-episode decay.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonGreedy {
    epsilon: f64,
    decay: f64,
    floor: f64,
}

impl EpsilonGreedy {
    pub fn new(cfg: &QLearningConfig) -> Self {
        EpsilonGreedy {
            epsilon: cfg.epsilon.max(cfg.epsilon_floor),
            decay: cfg.epsilon_decay,
            floor: cfg.epsilon_floor,
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn mode<R: Rng + ?Sized>(&self, rng: &mut R) -> SelectMode {
        if rng.random::<f64>() < self.epsilon {
            SelectMode::Explore
        } else {
            SelectMode::Exploit
        }
    }

    pub fn choose<R: Rng + ?Sized>(
        &self,
        q: &QTable,
        s: &JointState,
        rng: &mut R,
    ) -> Result<Action> {
        let mode = self.mode(rng);
        select_action(q, s, mode, rng)
    }

    pub fn end_episode(&mut self) {
        self.epsilon = (self.epsilon * self.decay).max(self.floor);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qoe::QoeState;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn table() -> QTable {
        QTable::new(JointSpace::new(vec![1, 1]).unwrap())
    }

    fn state(cur: usize) -> JointState {
        JointState::new(
            vec![QoeState::new(1), QoeState::new(1)],
            InterfaceId::new(cur),
        )
    }

    fn constant(alpha: f64, gamma: f64) -> QLearningConfig {
        QLearningConfig {
            alpha,
            gamma,
            alpha_decay: AlphaDecay::Constant,
            ..QLearningConfig::default()
        }
    }

    #[test]
    fn full_overwrite_without_bootstrap() {
        let mut q = table();
        let s = state(0);
        q.set(0, 1, 0.7).unwrap();
        let v = q_update(&mut q, &s, Action::select(1), 0.3, &s, &constant(1.0, 0.0)).unwrap();
        assert_eq!(v, 0.3);
    }

    #[test]
    fn zero_rate_leaves_values() {
        let mut q = table();
        q.set(0, 0, 0.4).unwrap();
        let before = q.clone();
        q_update(
            &mut q,
            &state(0),
            Action::select(0),
            1.0,
            &state(1),
            &constant(0.0, 0.9),
        )
        .unwrap();
        assert_eq!(q.row(0), before.row(0));
        assert_eq!(q.visits(0), &[1, 0]);
    }

    #[test]
    fn single_update_arithmetic() {
        let mut q = table();
        q.set(0, 0, 0.2).unwrap();
        q.set(1, 0, 0.6).unwrap();
        q.set(1, 1, 0.1).unwrap();
        for cfg in [constant(0.8, 0.95), QLearningConfig::default()] {
            let mut q = q.clone();
            let v = q_update(&mut q, &state(0), Action::select(0), 0.5, &state(1), &cfg).unwrap();
            assert!((v - 0.896).abs() < 1e-12);
        }
    }

    #[test]
    fn inverse_visit_schedule() {
        let cfg = QLearningConfig {
            alpha: 0.8,
            gamma: 0.9,
            ..QLearningConfig::default()
        };
        assert_eq!(cfg.effective_alpha(1), 0.8);
        assert!((cfg.effective_alpha(11) - 0.4).abs() < 1e-12);
    }

    #[test]
    fn greedy_ties() {
        let mut q = table();
        q.set(0, 0, 0.9).unwrap();
        q.set(0, 1, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = select_action(&q, &state(0), SelectMode::Exploit, &mut rng).unwrap();
        assert_eq!(a, Action::select(0));
        q.set(1, 0, 0.5).unwrap();
        q.set(1, 1, 0.5).unwrap();
        let a = select_action(&q, &state(1), SelectMode::Exploit, &mut rng).unwrap();
        assert_eq!(a, Action::select(1));
    }

    #[test]
    fn explore_is_uniform() {
        let q = table();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 10_000;
        let ones = (0..n)
            .filter(|_| {
                select_action(&q, &state(0), SelectMode::Explore, &mut rng)
                    .unwrap()
                    .target
                    .index()
                    == 1
            })
            .count();
        assert!((ones as f64 / n as f64 - 0.5).abs() < 0.02);
    }

    #[test]
    fn epsilon_decays_to_floor() {
        let mut eg = EpsilonGreedy::new(&QLearningConfig::default());
        eg.end_episode();
        assert!((eg.epsilon() - 0.198).abs() < 1e-12);
        for _ in 0..1000 {
            eg.end_episode();
        }
        assert_eq!(eg.epsilon(), 0.01);
    }

    #[test]
    fn file_round_trip() {
        let mut q = QTable::new(JointSpace::new(vec![2, 3]).unwrap());
        q.set(5, 1, 1.0 / 3.0).unwrap();
        q.update_indexed(2, 0, 0.5, 3, &QLearningConfig::default())
            .unwrap();
        let text = toml::to_string(&q.to_file()).unwrap();
        let back = QTable::from_file(toml::from_str(&text).unwrap()).unwrap();
        assert_eq!(back, q);
    }

    #[test]
    fn mislabelled_file_rejected() {
        let q = QTable::new(JointSpace::new(vec![2, 2]).unwrap());
        let mut file = q.to_file();
        file.rows.swap(0, 1);
        assert!(QTable::from_file(file).is_err());
    }
}

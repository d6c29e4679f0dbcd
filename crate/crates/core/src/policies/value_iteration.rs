use crate::error::{Error, Result};
use crate::hmm::STOCHASTIC_TOL;

/// Finite MDP with state rewards: `transitions[a][s][s']`, `rewards[s]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMdp {
    transitions: Vec<Vec<Vec<f64>>>,
    rewards: Vec<f64>,
}

impl FiniteMdp {
    pub fn new(transitions: Vec<Vec<Vec<f64>>>, rewards: Vec<f64>) -> Result<Self> {
        let n = rewards.len();
        if n == 0 || transitions.is_empty() {
            return Err(Error::domain("MDP needs at least one state and one action"));
        }
        if rewards.iter().any(|r| !r.is_finite()) {
            return Err(Error::domain("rewards must be finite"));
        }
        for (a, tm) in transitions.iter().enumerate() {
            if tm.len() != n {
                return Err(Error::domain(format!("action {a}: expected {n} rows")));
            }
            for (s, row) in tm.iter().enumerate() {
                let ok = row.len() == n
                    && row.iter().all(|p| (0.0..=1.0).contains(p))
                    && (row.iter().sum::<f64>() - 1.0).abs() <= STOCHASTIC_TOL;
                if !ok {
                    return Err(Error::domain(format!(
                        "action {a}, state {s}: transition row is not stochastic"
                    )));
                }
            }
        }
        Ok(FiniteMdp {
            transitions,
            rewards,
        })
    }

    pub fn states(&self) -> usize {
        self.rewards.len()
    }

    pub fn actions(&self) -> usize {
        self.transitions.len()
    }

    pub fn reward(&self, s: usize) -> f64 {
        self.rewards[s]
    }

    pub fn row(&self, s: usize, a: usize) -> &[f64] {
        &self.transitions[a][s]
    }

    fn backup(&self, u: &[f64], s: usize, a: usize, gamma: f64) -> f64 {
        let ev: f64 = self.row(s, a).iter().zip(u).map(|(p, v)| p * v).sum();
        self.rewards[s] + gamma * ev
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueSolution {
    pub utilities: Vec<f64>,
    /// `Q*(s, a) = R(s) + gamma * sum TM(s,a,s') U(s')`.
    pub q_values: Vec<Vec<f64>>,
    /// Greedy action per state, ties to the lowest index.
    pub policy: Vec<usize>,
    pub sweeps: usize,
}

const MAX_SWEEPS: usize = 1_000_000;

/// Synchronous sweeps of `U(s) <- R(s) + gamma * max_a sum TM(s,a,s') U(s')`
/// from `U = 0` until the largest change is below `tol`.
pub fn value_iteration(mdp: &FiniteMdp, gamma: f64, tol: f64) -> Result<ValueSolution> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::domain(format!(
            "gamma must be in [0, 1), got {gamma}"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::domain("tolerance must be > 0"));
    }
    let n = mdp.states();
    let mut u = vec![0.0; n];
    let mut sweeps = 0;
    loop {
        let next: Vec<f64> = (0..n)
            .map(|s| {
                (0..mdp.actions())
                    .map(|a| mdp.backup(&u, s, a, gamma))
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        let delta = next
            .iter()
            .zip(&u)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        u = next;
        sweeps += 1;
        if delta < tol {
            break;
        }
        if sweeps >= MAX_SWEEPS {
            return Err(Error::domain("value iteration did not converge"));
        }
    }
    let q_values: Vec<Vec<f64>> = (0..n)
        .map(|s| {
            (0..mdp.actions())
                .map(|a| mdp.backup(&u, s, a, gamma))
                .collect()
        })
        .collect();
    let policy = q_values
        .iter()
        .map(|row| {
            let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            row.iter().position(|v| *v == best).unwrap_or(0)
        })
        .collect();
    Ok(ValueSolution {
        utilities: u,
        q_values,
        policy,
        sweeps,
    })
}

use serde::{Deserialize, Serialize};

use super::{check_distribution, log_sum_exp, HmmModel};
use crate::error::{Error, Result};
use crate::qoe::QoeState;

/// Posterior distribution over hidden states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefState {
    probs: Vec<f64>,
}

impl BeliefState {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        check_distribution("belief", &probs)?;
        Ok(BeliefState { probs })
    }

    pub fn point(n: usize, state: QoeState) -> Self {
        let mut probs = vec![0.0; n];
        probs[state.zero_based()] = 1.0;
        BeliefState { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Most probable state; ties go to the lower index.
    pub fn map_state(&self) -> QoeState {
        let mut best = 0;
        for (i, p) in self.probs.iter().enumerate() {
            if *p > self.probs[best] {
                best = i;
            }
        }
        QoeState::from_zero_based(best)
    }

    fn from_log(log_probs: &[f64]) -> (Self, f64) {
        let norm = log_sum_exp(log_probs.iter().copied());
        let probs = log_probs.iter().map(|l| (l - norm).exp()).collect();
        (BeliefState { probs }, norm)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutput {
    pub beliefs: Vec<BeliefState>,
    /// `ln p(obs_0..obs_T)`.
    pub log_evidence: f64,
}

/// Incremental forward filter, one observation at a time.
///
/// Computation runs in log space and the belief is renormalized after every
/// step, so arbitrarily long streams neither underflow nor drift.
#[derive(Debug, Clone)]
pub struct OnlineFilter<'m> {
    model: &'m HmmModel,
    log_tm: Vec<Vec<f64>>,
    belief: Option<BeliefState>,
    log_evidence: f64,
}

impl<'m> OnlineFilter<'m> {
    pub fn new(model: &'m HmmModel) -> Self {
        let log_tm = model
            .transitions()
            .rows()
            .iter()
            .map(|r| r.iter().map(|p| p.ln()).collect())
            .collect();
        OnlineFilter {
            model,
            log_tm,
            belief: None,
            log_evidence: 0.0,
        }
    }

    pub fn belief(&self) -> Option<&BeliefState> {
        self.belief.as_ref()
    }

    pub fn log_evidence(&self) -> f64 {
        self.log_evidence
    }

    pub fn update(&mut self, obs: f64) -> Result<&BeliefState> {
        if !obs.is_finite() {
            return Err(Error::domain(format!("observation {obs} is not finite")));
        }
        let n = self.model.state_count();
        let log_pred: Vec<f64> = match &self.belief {
            None => self.model.prior().iter().map(|p| p.ln()).collect(),
            Some(b) => {
                let log_b: Vec<f64> = b.probs.iter().map(|p| p.ln()).collect();
                (0..n)
                    .map(|to| log_sum_exp((0..n).map(|from| log_b[from] + self.log_tm[from][to])))
                    .collect()
            }
        };
        let joint: Vec<f64> = log_pred
            .iter()
            .zip(self.model.emissions())
            .map(|(lp, e)| lp + e.log_pdf(obs))
            .collect();
        let (belief, norm) = BeliefState::from_log(&joint);
        self.log_evidence += norm;
        Ok(self.belief.insert(belief))
    }

    /// One-step-ahead prediction from the current belief. Before the first
    /// observation the prior is used as the belief.
    pub fn predict(&self) -> (QoeState, BeliefState) {
        match &self.belief {
            Some(b) => predict_next_state(self.model, b),
            None => {
                let b = BeliefState {
                    probs: self.model.prior().to_vec(),
                };
                predict_next_state(self.model, &b)
            }
        }
    }
}

/// Filtered posteriors `p(s_t | obs_0..obs_t)` for every step.
pub fn forward_filter(model: &HmmModel, observations: &[f64]) -> Result<FilterOutput> {
    if observations.is_empty() {
        return Err(Error::domain("cannot filter an empty observation sequence"));
    }
    let mut filter = OnlineFilter::new(model);
    let mut beliefs = Vec::with_capacity(observations.len());
    for &o in observations {
        beliefs.push(filter.update(o)?.clone());
    }
    Ok(FilterOutput {
        beliefs,
        log_evidence: filter.log_evidence,
    })
}

/// Propagates a belief one step through the transition matrix and picks the
/// most probable next state.
pub fn predict_next_state(model: &HmmModel, belief: &BeliefState) -> (QoeState, BeliefState) {
    let probs = model.transitions().propagate(&belief.probs);
    let predicted = BeliefState { probs };
    (predicted.map_state(), predicted)
}

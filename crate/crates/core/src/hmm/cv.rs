use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{em_train, EmConfig, HmmModel, OnlineFilter};
use crate::error::{Error, Result};
use crate::qoe::QoeState;

/// Observations paired with the QoE state realized at each step.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTrace {
    pub observations: Vec<f64>,
    pub labels: Vec<QoeState>,
}

impl LabeledTrace {
    pub fn new(observations: Vec<f64>, labels: Vec<QoeState>) -> Result<Self> {
        if observations.len() != labels.len() {
            return Err(Error::domain(format!(
                "{} observations but {} labels",
                observations.len(),
                labels.len()
            )));
        }
        Ok(LabeledTrace {
            observations,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }
}

/// Scores one-step-ahead predictions: after filtering `obs_0..obs_t` the
/// predicted state is compared with `label_{t+1}`. Returns
/// `(correct, scored)`.
pub fn prediction_accuracy(model: &HmmModel, traces: &[LabeledTrace]) -> Result<(usize, usize)> {
    let mut correct = 0;
    let mut total = 0;
    for trace in traces {
        let mut filter = OnlineFilter::new(model);
        for t in 0..trace.len().saturating_sub(1) {
            filter.update(trace.observations[t])?;
            let (predicted, _) = filter.predict();
            total += 1;
            if predicted == trace.labels[t + 1] {
                correct += 1;
            }
        }
    }
    Ok((correct, total))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValidation {
    pub folds: usize,
    pub fold_accuracy: Vec<f64>,
    /// Held-out trace indices per fold.
    pub fold_members: Vec<Vec<usize>>,
    pub correct: usize,
    pub scored: usize,
    /// Micro-averaged over every scored step of every fold.
    pub accuracy: f64,
}

/// k-fold cross-validation of one-step QoE-state prediction.
///
/// Traces are shuffled with `seed` and dealt round-robin into folds. Each
/// fold trains on the remaining traces (labels seed the EM start) and is
/// scored with [`prediction_accuracy`].
pub fn cross_validate(
    dataset: &[LabeledTrace],
    folds: usize,
    k: usize,
    cfg: &EmConfig,
    seed: u64,
) -> Result<CrossValidation> {
    if folds < 2 {
        return Err(Error::domain(format!("need at least 2 folds, got {folds}")));
    }
    if dataset.len() < folds {
        return Err(Error::domain(format!(
            "{} traces cannot be split into {folds} folds",
            dataset.len()
        )));
    }
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut members = vec![Vec::new(); folds];
    for (pos, idx) in order.into_iter().enumerate() {
        members[pos % folds].push(idx);
    }
    for m in members.iter_mut() {
        m.sort_unstable();
    }

    let mut fold_accuracy = Vec::with_capacity(folds);
    let (mut correct, mut scored) = (0, 0);
    for held_out in &members {
        let train: Vec<&LabeledTrace> = (0..dataset.len())
            .filter(|i| !held_out.contains(i))
            .map(|i| &dataset[i])
            .collect();
        let obs: Vec<Vec<f64>> = train.iter().map(|t| t.observations.clone()).collect();
        let labels: Vec<Vec<QoeState>> = train.iter().map(|t| t.labels.clone()).collect();
        let (model, _) = em_train(&obs, Some(&labels), k, cfg)?;
        let test: Vec<LabeledTrace> = held_out.iter().map(|&i| dataset[i].clone()).collect();
        let (c, s) = prediction_accuracy(&model, &test)?;
        fold_accuracy.push(if s == 0 { 0.0 } else { c as f64 / s as f64 });
        correct += c;
        scored += s;
    }
    Ok(CrossValidation {
        folds,
        fold_accuracy,
        fold_members: members,
        correct,
        scored,
        accuracy: if scored == 0 {
            0.0
        } else {
            correct as f64 / scored as f64
        },
    })
}

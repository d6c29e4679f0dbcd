//! Hidden Markov models with scalar Gaussian emissions over delay samples.
//!
//! Hidden states stand for QoE states. They are kept in canonical order:
//! emission means strictly descending, so state 1 is the highest-delay
//! (worst) state and lines up with QoE state 1 of a quantization scheme.

mod cv;
mod em;
mod filter;
mod io;

pub use cv::{cross_validate, prediction_accuracy, CrossValidation, LabeledTrace};
pub use em::{baum_welch, em_train, initial_model, EmConfig, InitStrategy, TrainingReport};
pub use filter::{forward_filter, predict_next_state, BeliefState, FilterOutput, OnlineFilter};
pub use io::{ModelFile, ModelMetadata};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qoe::{QoeState, QuantizationScheme};

/// Lower bound on emission variances, in seconds squared.
pub const VARIANCE_FLOOR: f64 = 1e-8;
/// Tolerance on probability vectors summing to one.
pub const STOCHASTIC_TOL: f64 = 1e-9;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianEmission {
    pub mean: f64,
    pub variance: f64,
}

impl GaussianEmission {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !mean.is_finite() || !variance.is_finite() {
            return Err(Error::invalid(
                "emission",
                "mean and variance must be finite",
            ));
        }
        if variance < VARIANCE_FLOOR {
            return Err(Error::invalid(
                "emission",
                format!("variance {variance} below floor {VARIANCE_FLOOR}"),
            ));
        }
        Ok(GaussianEmission { mean, variance })
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        let d = x - self.mean;
        -0.5 * (LN_2PI + self.variance.ln() + d * d / self.variance)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.log_pdf(x).exp()
    }
}

/// Row-stochastic square matrix; `rows[from][to]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct TransitionMatrix {
    rows: Vec<Vec<f64>>,
}

impl TryFrom<Vec<Vec<f64>>> for TransitionMatrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        TransitionMatrix::new(rows)
    }
}

impl From<TransitionMatrix> for Vec<Vec<f64>> {
    fn from(tm: TransitionMatrix) -> Self {
        tm.rows
    }
}

impl TransitionMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::invalid("transition matrix", "empty"));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::invalid(
                    "transition matrix",
                    format!("row {i} has {} entries, expected {n}", row.len()),
                ));
            }
            check_distribution("transition matrix", row)
                .map_err(|e| Error::invalid("transition matrix", format!("row {i}: {e}")))?;
        }
        Ok(TransitionMatrix { rows })
    }

    /// Like [`TransitionMatrix::new`] but rescales each row to sum to one
    /// first. Handy for matrices printed with four decimals.
    pub fn normalized(mut rows: Vec<Vec<f64>>) -> Result<Self> {
        for row in rows.iter_mut() {
            let s: f64 = row.iter().sum();
            if s > 0.0 {
                row.iter_mut().for_each(|p| *p /= s);
            }
        }
        TransitionMatrix::new(rows)
    }

    pub fn identity(n: usize) -> Self {
        let rows = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        TransitionMatrix { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, from: usize) -> &[f64] {
        &self.rows[from]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.rows[from][to]
    }

    /// `dist^T * TM`.
    pub fn propagate(&self, dist: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut out = vec![0.0; n];
        for (from, p) in dist.iter().enumerate() {
            if *p == 0.0 {
                continue;
            }
            for (to, o) in out.iter_mut().enumerate() {
                *o += p * self.rows[from][to];
            }
        }
        out
    }

    fn permuted(&self, order: &[usize]) -> Self {
        let rows = order
            .iter()
            .map(|&i| order.iter().map(|&j| self.rows[i][j]).collect())
            .collect();
        TransitionMatrix { rows }
    }
}

pub(crate) fn check_distribution(what: &'static str, p: &[f64]) -> Result<()> {
    if p.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::invalid(
            what,
            "entries must be finite and non-negative",
        ));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > STOCHASTIC_TOL {
        return Err(Error::invalid(
            what,
            format!("entries sum to {s}, expected 1"),
        ));
    }
    Ok(())
}

/// Prior, transition matrix and per-state emissions. When a quantization
/// scheme is attached, the state count matches it and hidden state `k`
/// predicts QoE state `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelRepr", into = "ModelRepr")]
pub struct HmmModel {
    prior: Vec<f64>,
    transitions: TransitionMatrix,
    emissions: Vec<GaussianEmission>,
    scheme: Option<QuantizationScheme>,
}

#[derive(Serialize, Deserialize)]
struct ModelRepr {
    prior: Vec<f64>,
    transitions: TransitionMatrix,
    emissions: Vec<GaussianEmission>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scheme: Option<QuantizationScheme>,
}

impl TryFrom<ModelRepr> for HmmModel {
    type Error = Error;
    fn try_from(r: ModelRepr) -> Result<Self> {
        let m = HmmModel::new(r.prior, r.transitions, r.emissions)?;
        match r.scheme {
            Some(s) => m.with_scheme(s),
            None => Ok(m),
        }
    }
}

impl From<HmmModel> for ModelRepr {
    fn from(m: HmmModel) -> Self {
        ModelRepr {
            prior: m.prior,
            transitions: m.transitions,
            emissions: m.emissions,
            scheme: m.scheme,
        }
    }
}

impl HmmModel {
    pub fn new(
        prior: Vec<f64>,
        transitions: TransitionMatrix,
        emissions: Vec<GaussianEmission>,
    ) -> Result<Self> {
        let n = transitions.len();
        if prior.len() != n || emissions.len() != n {
            return Err(Error::invalid(
                "hmm model",
                format!(
                    "prior ({}), transitions ({n}) and emissions ({}) disagree on state count",
                    prior.len(),
                    emissions.len()
                ),
            ));
        }
        check_distribution("prior", &prior)?;
        for e in &emissions {
            GaussianEmission::new(e.mean, e.variance)?;
        }
        Ok(HmmModel {
            prior,
            transitions,
            emissions,
            scheme: None,
        })
    }

    /// Convenience constructor from raw arrays; rows and prior are
    /// renormalized.
    pub fn from_parts(
        prior: &[f64],
        transitions: &[&[f64]],
        means: &[f64],
        variances: &[f64],
    ) -> Result<Self> {
        let s: f64 = prior.iter().sum();
        let prior = prior.iter().map(|p| p / s).collect();
        let tm = TransitionMatrix::normalized(transitions.iter().map(|r| r.to_vec()).collect())?;
        if means.len() != variances.len() {
            return Err(Error::invalid(
                "hmm model",
                "means and variances differ in length",
            ));
        }
        let emissions = means
            .iter()
            .zip(variances)
            .map(|(&m, &v)| GaussianEmission::new(m, v))
            .collect::<Result<Vec<_>>>()?;
        HmmModel::new(prior, tm, emissions)
    }

    pub fn with_scheme(mut self, scheme: QuantizationScheme) -> Result<Self> {
        if scheme.state_count() != self.state_count() {
            return Err(Error::invalid(
                "hmm model",
                format!(
                    "{}-state model cannot use a {}-state quantization scheme",
                    self.state_count(),
                    scheme.state_count()
                ),
            ));
        }
        self.scheme = Some(scheme);
        Ok(self)
    }

    pub fn state_count(&self) -> usize {
        self.prior.len()
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    pub fn transitions(&self) -> &TransitionMatrix {
        &self.transitions
    }

    pub fn emissions(&self) -> &[GaussianEmission] {
        &self.emissions
    }

    pub fn scheme(&self) -> Option<&QuantizationScheme> {
        self.scheme.as_ref()
    }

    pub fn means(&self) -> Vec<f64> {
        self.emissions.iter().map(|e| e.mean).collect()
    }

    /// Reorders states so emission means are descending.
    pub fn canonicalized(&self) -> Self {
        let mut order: Vec<usize> = (0..self.state_count()).collect();
        order.sort_by(|&a, &b| {
            self.emissions[b]
                .mean
                .total_cmp(&self.emissions[a].mean)
                .then(a.cmp(&b))
        });
        HmmModel {
            prior: order.iter().map(|&i| self.prior[i]).collect(),
            transitions: self.transitions.permuted(&order),
            emissions: order.iter().map(|&i| self.emissions[i]).collect(),
            scheme: self.scheme.clone(),
        }
    }

    /// Draws a hidden state path and its emissions.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, len: usize) -> (Vec<QoeState>, Vec<f64>) {
        let mut states = Vec::with_capacity(len);
        let mut obs = Vec::with_capacity(len);
        let mut s = sample_index(rng, &self.prior);
        for t in 0..len {
            if t > 0 {
                s = sample_index(rng, self.transitions.row(s));
            }
            states.push(QoeState::from_zero_based(s));
            obs.push(self.sample_emission(rng, s));
        }
        (states, obs)
    }

    pub fn sample_emission<R: Rng + ?Sized>(&self, rng: &mut R, state: usize) -> f64 {
        let e = &self.emissions[state];
        Normal::new(e.mean, e.variance.sqrt())
            .expect("validated emission")
            .sample(rng)
    }

    /// Log-likelihood of a set of sequences.
    pub fn log_likelihood(&self, sequences: &[Vec<f64>]) -> Result<f64> {
        sequences
            .iter()
            .map(|s| forward_filter(self, s).map(|f| f.log_evidence))
            .sum()
    }
}

pub(crate) fn sample_index<R: Rng + ?Sized>(rng: &mut R, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, p) in probs.iter().enumerate() {
        if *p > 0.0 {
            last_positive = i;
        }
        acc += p;
        if u < acc {
            return i;
        }
    }
    last_positive
}

pub(crate) fn log_sum_exp<I>(xs: I) -> f64
where
    I: IntoIterator<Item = f64>,
    I::IntoIter: Clone,
{
    let xs = xs.into_iter();
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.map(|x| (x - m).exp()).sum::<f64>().ln()
}

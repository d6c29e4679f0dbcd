//! Baum-Welch training for Gaussian-emission HMMs over many sequences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{GaussianEmission, HmmModel, TransitionMatrix, VARIANCE_FLOOR};
use crate::error::{Error, Result};
use crate::qoe::QoeState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitStrategy {
    /// Equal-count quantile bins of the pooled data.
    Quantile,
    /// Means drawn uniformly over the data range, random stochastic rows.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmConfig {
    pub max_iterations: usize,
    /// Stop once the relative log-likelihood gain falls below this.
    pub tolerance: f64,
    pub restarts: usize,
    pub seed: u64,
    pub init: InitStrategy,
    /// Restart mean jitter, as a fraction of the pooled standard deviation.
    pub jitter: f64,
    pub variance_floor: f64,
    /// Candidate starts screened for restarts 1.. ; 0 uses the first draws
    /// unscreened.
    pub candidates: usize,
    /// EM iterations each candidate gets during screening.
    pub screen_iterations: usize,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            max_iterations: 200,
            tolerance: 1e-6,
            restarts: 5,
            seed: 0,
            init: InitStrategy::Quantile,
            jitter: 1.0,
            variance_floor: VARIANCE_FLOOR,
            candidates: 32,
            screen_iterations: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    /// Log-likelihood of the parameters entering each iteration.
    pub log_likelihood_per_iteration: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Restart that produced the returned model.
    pub restart: usize,
}

impl TrainingReport {
    pub fn final_log_likelihood(&self) -> f64 {
        self.log_likelihood_per_iteration
            .last()
            .copied()
            .unwrap_or(f64::NEG_INFINITY)
    }

    pub fn is_monotone(&self, slack: f64) -> bool {
        self.log_likelihood_per_iteration
            .windows(2)
            .all(|w| w[1] >= w[0] - slack)
    }
}

fn validate_data(sequences: &[Vec<f64>]) -> Result<()> {
    if sequences.is_empty() || sequences.iter().all(|s| s.len() < 2) {
        return Err(Error::domain(
            "training needs at least one sequence of length >= 2",
        ));
    }
    if sequences.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::domain("training data contains non-finite values"));
    }
    Ok(())
}

fn pooled(sequences: &[Vec<f64>]) -> Vec<f64> {
    sequences.iter().flatten().copied().collect()
}

fn moments(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var)
}

fn sticky_transitions(k: usize) -> TransitionMatrix {
    if k == 1 {
        return TransitionMatrix::identity(1);
    }
    let off = 0.2 / (k - 1) as f64;
    let rows = (0..k)
        .map(|i| (0..k).map(|j| if i == j { 0.8 } else { off }).collect())
        .collect();
    TransitionMatrix::new(rows).expect("sticky rows are stochastic")
}

/// Deterministic starting point for EM.
///
/// Emissions come from the labelled groups when labels are given (label `k`
/// seeds hidden state `k`), otherwise from `k` equal-count quantile bins.
/// Transitions start at 0.8 self-transition, the prior is uniform.
pub fn initial_model(
    sequences: &[Vec<f64>],
    labels: Option<&[Vec<QoeState>]>,
    k: usize,
    variance_floor: f64,
) -> Result<HmmModel> {
    validate_data(sequences)?;
    let mut data = pooled(sequences);
    let (_, pooled_var) = moments(&data);
    let var_init_floor = (pooled_var * 1e-3).max(variance_floor);
    data.sort_by(f64::total_cmp);

    // quantile bins, ascending; state 1 gets the top bin
    let mut emissions: Vec<GaussianEmission> = (0..k)
        .map(|b| {
            let lo = b * data.len() / k;
            let hi = ((b + 1) * data.len() / k).max(lo + 1).min(data.len());
            let (m, v) = moments(&data[lo..hi]);
            GaussianEmission {
                mean: m,
                variance: v.max(var_init_floor),
            }
        })
        .rev()
        .collect();

    if let Some(labels) = labels {
        if labels.len() != sequences.len()
            || labels
                .iter()
                .zip(sequences)
                .any(|(l, s)| l.len() != s.len())
        {
            return Err(Error::domain(
                "labels must match the observation sequences in shape",
            ));
        }
        for (state, emission) in emissions.iter_mut().enumerate() {
            let group: Vec<f64> = sequences
                .iter()
                .zip(labels)
                .flat_map(|(s, l)| s.iter().zip(l))
                .filter(|(_, l)| l.zero_based() == state)
                .map(|(x, _)| *x)
                .collect();
            if group.len() >= 2 {
                let (m, v) = moments(&group);
                *emission = GaussianEmission {
                    mean: m,
                    variance: v.max(var_init_floor),
                };
            }
        }
    }

    let prior = vec![1.0 / k as f64; k];
    HmmModel::new(prior, sticky_transitions(k), emissions)
}

/// Means picked from the data by D-squared sampling, variances from the
/// nearest-mean partition.
fn seeded_model<R: Rng + ?Sized>(
    rng: &mut R,
    sequences: &[Vec<f64>],
    k: usize,
    variance_floor: f64,
) -> Result<HmmModel> {
    let data = pooled(sequences);
    let (_, var) = moments(&data);
    let floor = (var * 1e-3).max(variance_floor);
    let mut means = vec![data[rng.random_range(0..data.len())]];
    while means.len() < k {
        let d2: Vec<f64> = data
            .iter()
            .map(|x| {
                means
                    .iter()
                    .map(|m| (x - m) * (x - m))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let total: f64 = d2.iter().sum();
        if !(total > 0.0) {
            break;
        }
        let mut u = rng.random::<f64>() * total;
        let mut pick = data.len() - 1;
        for (i, d) in d2.iter().enumerate() {
            if u < *d {
                pick = i;
                break;
            }
            u -= d;
        }
        means.push(data[pick]);
    }
    while means.len() < k {
        means.push(means[0]);
    }
    let mut groups = vec![Vec::new(); k];
    for x in &data {
        let nearest = (0..k)
            .min_by(|&a, &b| (x - means[a]).abs().total_cmp(&(x - means[b]).abs()))
            .unwrap_or(0);
        groups[nearest].push(*x);
    }
    let emissions = means
        .iter()
        .zip(&groups)
        .map(|(m, g)| GaussianEmission {
            mean: *m,
            variance: if g.len() >= 2 {
                moments(g).1.max(floor)
            } else {
                var.max(floor)
            },
        })
        .collect();
    HmmModel::new(vec![1.0 / k as f64; k], sticky_transitions(k), emissions)
}

fn random_model<R: Rng + ?Sized>(
    rng: &mut R,
    sequences: &[Vec<f64>],
    k: usize,
    variance_floor: f64,
) -> Result<HmmModel> {
    let data = pooled(sequences);
    let lo = data.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (_, var) = moments(&data);
    let mut random_dist = |n: usize| {
        let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.05).collect();
        let s: f64 = raw.iter().sum();
        raw.into_iter().map(|x| x / s).collect::<Vec<_>>()
    };
    let prior = random_dist(k);
    let rows = (0..k).map(|_| random_dist(k)).collect();
    let emissions = (0..k)
        .map(|_| GaussianEmission {
            mean: lo + (hi - lo) * rng.random::<f64>(),
            variance: (var * (0.1 + rng.random::<f64>())).max(variance_floor),
        })
        .collect();
    let tm = TransitionMatrix::normalized(rows)?;
    let s: f64 = prior.iter().sum();
    HmmModel::new(prior.iter().map(|p| p / s).collect(), tm, emissions)
}

struct Sufficient {
    log_likelihood: f64,
    prior: Vec<f64>,
    transitions: Vec<Vec<f64>>,
    weight: Vec<f64>,
    weighted_sum: Vec<f64>,
    /// Per-sequence posteriors, `t * n + s`, kept for the variance pass.
    gammas: Vec<Vec<f64>>,
}

/// Scaled forward-backward. Emission likelihoods are divided by their
/// per-epoch maximum before use so nothing underflows; the offsets are added
/// back into the log-likelihood.
fn e_step(model: &HmmModel, sequences: &[Vec<f64>]) -> Sufficient {
    let n = model.state_count();
    let prior = model.prior();
    let tm = model.transitions().rows();

    let mut stats = Sufficient {
        log_likelihood: 0.0,
        prior: vec![0.0; n],
        transitions: vec![vec![0.0; n]; n],
        weight: vec![0.0; n],
        weighted_sum: vec![0.0; n],
        gammas: Vec::with_capacity(sequences.len()),
    };

    let mut lb = vec![0.0; n];
    for seq in sequences {
        let t_len = seq.len();
        if t_len == 0 {
            stats.gammas.push(Vec::new());
            continue;
        }
        let mut b = vec![0.0; t_len * n];
        for (t, &x) in seq.iter().enumerate() {
            for (s, e) in model.emissions().iter().enumerate() {
                lb[s] = e.log_pdf(x);
            }
            let m = lb.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            stats.log_likelihood += m;
            for s in 0..n {
                b[t * n + s] = (lb[s] - m).exp();
            }
        }

        let mut alpha = vec![0.0; t_len * n];
        let mut scale = vec![0.0; t_len];
        for t in 0..t_len {
            for s in 0..n {
                let pred = if t == 0 {
                    prior[s]
                } else {
                    (0..n).map(|p| alpha[(t - 1) * n + p] * tm[p][s]).sum()
                };
                alpha[t * n + s] = pred * b[t * n + s];
            }
            let row = &mut alpha[t * n..(t + 1) * n];
            let c: f64 = row.iter().sum();
            scale[t] = c;
            if !(c > 0.0) {
                stats.log_likelihood = f64::NEG_INFINITY;
                return stats;
            }
            row.iter_mut().for_each(|a| *a /= c);
            stats.log_likelihood += c.ln();
        }

        let mut beta = vec![1.0; t_len * n];
        for t in (0..t_len - 1).rev() {
            for s in 0..n {
                let mut acc = 0.0;
                for q in 0..n {
                    acc += tm[s][q] * b[(t + 1) * n + q] * beta[(t + 1) * n + q];
                }
                beta[t * n + s] = acc / scale[t + 1];
            }
        }

        let gamma: Vec<f64> = alpha.iter().zip(&beta).map(|(a, b)| a * b).collect();
        for s in 0..n {
            stats.prior[s] += gamma[s];
        }
        for t in 0..t_len {
            for s in 0..n {
                let g = gamma[t * n + s];
                stats.weight[s] += g;
                stats.weighted_sum[s] += g * seq[t];
            }
        }
        for t in 0..t_len - 1 {
            for i in 0..n {
                let a = alpha[t * n + i];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    stats.transitions[i][j] +=
                        a * tm[i][j] * b[(t + 1) * n + j] * beta[(t + 1) * n + j] / scale[t + 1];
                }
            }
        }
        stats.gammas.push(gamma);
    }
    stats
}

fn m_step(
    model: &HmmModel,
    stats: &Sufficient,
    sequences: &[Vec<f64>],
    variance_floor: f64,
) -> Result<HmmModel> {
    let n = model.state_count();
    let prior_total: f64 = stats.prior.iter().sum();
    let prior: Vec<f64> = stats.prior.iter().map(|p| p / prior_total).collect();

    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let total: f64 = stats.transitions[i].iter().sum();
            if total > 0.0 {
                stats.transitions[i].iter().map(|x| x / total).collect()
            } else {
                model.transitions().row(i).to_vec()
            }
        })
        .collect();

    let mut emissions = model.emissions().to_vec();
    for s in 0..n {
        let w = stats.weight[s];
        if !(w > 1e-300) {
            continue;
        }
        let mean = stats.weighted_sum[s] / w;
        let mut sq = 0.0;
        for (seq, gamma) in sequences.iter().zip(&stats.gammas) {
            for (x, g) in seq.iter().zip(gamma.chunks_exact(n)) {
                let d = x - mean;
                sq += g[s] * d * d;
            }
        }
        emissions[s] = GaussianEmission {
            mean,
            variance: (sq / w).max(variance_floor),
        };
    }

    HmmModel::new(prior, TransitionMatrix::normalized(rows)?, emissions)
}

/// Runs EM from a given starting model.
///
/// The returned model is the one with the best log-likelihood seen; the
/// report lists the log-likelihood of every parameter set evaluated.
pub fn baum_welch(
    init: HmmModel,
    sequences: &[Vec<f64>],
    cfg: &EmConfig,
) -> Result<(HmmModel, TrainingReport)> {
    validate_data(sequences)?;
    let scheme = init.scheme().cloned();
    let mut model = init;
    let mut best = model.clone();
    let mut best_ll = f64::NEG_INFINITY;
    let mut lls = Vec::new();
    let mut converged = false;

    for it in 0..cfg.max_iterations.max(1) {
        let stats = e_step(&model, sequences);
        let ll = stats.log_likelihood;
        if !ll.is_finite() {
            return Err(Error::Degenerate(format!(
                "log-likelihood became {ll} at iteration {it}"
            )));
        }
        lls.push(ll);
        if ll > best_ll {
            best_ll = ll;
            best = model.clone();
        }
        if it > 0 {
            let prev = lls[it - 1];
            let gain = (ll - prev) / prev.abs().max(f64::MIN_POSITIVE);
            if gain < cfg.tolerance {
                converged = true;
                break;
            }
        }
        if it + 1 < cfg.max_iterations {
            model = m_step(&model, &stats, sequences, cfg.variance_floor)?;
        }
    }

    let mut out = best;
    if let Some(s) = scheme {
        out = out.with_scheme(s)?;
    }
    Ok((
        out,
        TrainingReport {
            iterations: lls.len(),
            log_likelihood_per_iteration: lls,
            converged,
            restart: 0,
        },
    ))
}

/// Trains a `k`-state model, keeping the best of `cfg.restarts` EM runs.
///
/// Restart 0 starts from [`initial_model`]. The other restarts continue the
/// best of `cfg.candidates` perturbed starts after `cfg.screen_iterations`
/// EM steps each; candidates alternate between jittered initial means and
/// D-squared sampled means (or are random models under
/// [`InitStrategy::Random`]). The winner is the highest final
/// log-likelihood, ties to the lowest restart index. The result is
/// canonicalized: emission means strictly descending.
pub fn em_train(
    sequences: &[Vec<f64>],
    labels: Option<&[Vec<QoeState>]>,
    k: usize,
    cfg: &EmConfig,
) -> Result<(HmmModel, TrainingReport)> {
    validate_data(sequences)?;
    if k == 0 {
        return Err(Error::domain("state count must be >= 1"));
    }
    let data = pooled(sequences);
    let mut distinct = data.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < k {
        return Err(Error::Degenerate(format!(
            "{k} states requested but the data has only {} distinct values",
            distinct.len()
        )));
    }

    if k == 1 {
        let (mean, var) = moments(&data);
        let model = HmmModel::new(
            vec![1.0],
            TransitionMatrix::identity(1),
            vec![GaussianEmission::new(mean, var.max(cfg.variance_floor))?],
        )?;
        let ll = model.log_likelihood(sequences)?;
        return Ok((
            model,
            TrainingReport {
                log_likelihood_per_iteration: vec![ll],
                iterations: 1,
                converged: true,
                restart: 0,
            },
        ));
    }

    let base = initial_model(sequences, labels, k, cfg.variance_floor)?;
    let (_, pooled_var) = moments(&data);
    let spread = pooled_var.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let jitter = Normal::new(0.0, 1.0).expect("unit normal");

    let draw = |i: usize, rng: &mut ChaCha8Rng| -> Result<HmmModel> {
        match cfg.init {
            InitStrategy::Random => random_model(rng, sequences, k, cfg.variance_floor),
            InitStrategy::Quantile if i % 2 == 1 => {
                seeded_model(rng, sequences, k, cfg.variance_floor)
            }
            InitStrategy::Quantile => {
                let emissions = base
                    .emissions()
                    .iter()
                    .map(|e| GaussianEmission {
                        mean: e.mean + cfg.jitter * spread * jitter.sample(rng),
                        variance: e.variance,
                    })
                    .collect();
                HmmModel::new(base.prior().to_vec(), base.transitions().clone(), emissions)
            }
        }
    };

    // Short EM runs from many candidate starts; the best continue to
    // convergence as restarts 1.. .
    let extra = cfg.restarts.max(1) - 1;
    let mut starts: Vec<(HmmModel, Vec<f64>)> = Vec::new();
    if extra > 0 {
        let screen_cfg = EmConfig {
            max_iterations: cfg.screen_iterations.max(1),
            ..cfg.clone()
        };
        let mut screened: Vec<(f64, usize, HmmModel, Vec<f64>)> = Vec::new();
        for i in 0..cfg.candidates.max(extra) {
            let Ok(init) = draw(i, &mut rng) else {
                continue;
            };
            if cfg.candidates == 0 {
                screened.push((0.0, i, init, Vec::new()));
                continue;
            }
            if let Ok((m, r)) = baum_welch(init, sequences, &screen_cfg) {
                screened.push((
                    r.final_log_likelihood(),
                    i,
                    m,
                    r.log_likelihood_per_iteration,
                ));
            }
        }
        screened.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        starts = screened
            .into_iter()
            .take(extra)
            .map(|(_, _, m, l)| (m, l))
            .collect();
    }

    let mut best: Option<(HmmModel, TrainingReport)> = None;
    let runs = std::iter::once((base.clone(), Vec::new())).chain(starts);
    for (restart, (init, mut history)) in runs.enumerate() {
        let (model, mut report) = match baum_welch(init, sequences, cfg) {
            Ok(r) => r,
            // a perturbed start may collapse; restart 0 failing is fatal
            Err(e) if restart == 0 => return Err(e),
            Err(_) => continue,
        };
        report.restart = restart;
        if !history.is_empty() {
            history.extend(report.log_likelihood_per_iteration);
            report.iterations = history.len();
            report.log_likelihood_per_iteration = history;
        }
        let better = match &best {
            None => true,
            Some((_, b)) => report.final_log_likelihood() > b.final_log_likelihood(),
        };
        if better {
            best = Some((model, report));
        }
    }
    let (model, report) = best.expect("restart 0 always yields a model");
    Ok((model.canonicalized(), report))
}

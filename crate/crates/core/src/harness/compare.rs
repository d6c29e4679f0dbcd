//! Policy comparison over a shared set of simulated runs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{label_fold, HarnessConfig, PolicyKind};
use crate::error::{Error, Result};
use crate::hmm::{cross_validate, em_train, HmmModel, LabeledTrace, OnlineFilter};
use crate::netsim::{generate_run, step_environment, SimRun};
use crate::policies::{
    decide_handoff, handoff_count, m4_policy_step, naive_policy_step, oracle_policy, reward,
    Action, EpsilonGreedy, InterfaceId, JointSpace, JointState, QTable, QosInputs,
};
use crate::probing::RnlEstimator;
use crate::qoe::{Codec, MosScore, QoeState, QuantizationScheme, StateFold};

/// Run indices at or above this are reserved for training runs, so
/// evaluation never sees a run used for learning.
pub const TRAINING_RUN_OFFSET: u64 = 1 << 32;

const AGENT_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySummary {
    pub policy: PolicyKind,
    /// Total handoffs over all evaluation runs.
    pub handoffs: usize,
    pub per_run_handoffs: Vec<usize>,
    pub mean_mos: f64,
    pub reward_sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterfaceAccuracy {
    pub interface: String,
    pub states: usize,
    pub accuracy: f64,
    pub fold_accuracy: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reduction {
    pub baseline: PolicyKind,
    /// `(baseline - proposed) / baseline` in percent; undefined when the
    /// baseline made no handoffs.
    pub percent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub scenario: String,
    pub codec: Codec,
    pub seed: u64,
    pub runs: usize,
    pub duration_epochs: usize,
    pub warmup_episodes: usize,
    pub policies: Vec<PolicySummary>,
    pub prediction_accuracy: Vec<InterfaceAccuracy>,
    pub reductions: Vec<Reduction>,
    /// Mean of the defined reductions.
    pub mean_reduction: Option<f64>,
}

impl EvaluationReport {
    pub fn policy(&self, kind: PolicyKind) -> Option<&PolicySummary> {
        self.policies.iter().find(|p| p.policy == kind)
    }

    pub fn reduction(&self, baseline: PolicyKind) -> Option<f64> {
        self.reductions
            .iter()
            .find(|r| r.baseline == baseline)
            .and_then(|r| r.percent)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Serialization(e.to_string()))
    }
}

pub fn reduction_percent(baseline: usize, proposed: usize) -> Option<f64> {
    (baseline > 0).then(|| (baseline as f64 - proposed as f64) / baseline as f64 * 100.0)
}

/// Percentages with two decimals; undefined values render as a dash.
pub fn format_percent(p: Option<f64>) -> String {
    match p {
        Some(v) => format!("{v:.2}%"),
        None => "\u{2014}".to_string(),
    }
}

/// One epoch of one policy on one run.
#[derive(Debug, Clone, PartialEq)]
pub struct TimelineRow {
    pub run_id: String,
    pub policy: PolicyKind,
    pub epoch: usize,
    pub mos: Vec<f64>,
    pub chosen: usize,
    pub cumulative_handoffs: usize,
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub report: EvaluationReport,
    pub timeline: Vec<TimelineRow>,
    pub models: Vec<HmmModel>,
    pub qtable: Option<QTable>,
}

struct Episode {
    chosen: Vec<InterfaceId>,
    realized: Vec<f64>,
    reward_sum: f64,
}

/// What every policy sees of the environment.
trait Controller {
    fn decide(&mut self, epoch: usize, attached: InterfaceId) -> Result<Action>;
    fn observe(&mut self, probes: &[f64], reward: f64, attached: InterfaceId) -> Result<()>;
}

fn run_episode(
    run: &SimRun,
    cfg: &HarnessConfig,
    scheme: &QuantizationScheme,
    ctl: &mut dyn Controller,
) -> Result<Episode> {
    let mut attached = InterfaceId::new(0);
    let mut ep = Episode {
        chosen: Vec::with_capacity(run.len()),
        realized: Vec::with_capacity(run.len()),
        reward_sum: 0.0,
    };
    for t in 0..run.len() {
        let action = ctl.decide(t, attached)?;
        let out = step_environment(run, t, attached, action, cfg.scenario.handoff_penalty_mos)?;
        let qoe = scheme.quantize(MosScore::new(out.realized_mos));
        let cost = cfg
            .reward
            .epoch_cost(action.target.index(), out.handoff_occurred);
        let r = reward(qoe.index() as f64, cost, &cfg.reward);
        attached = action.target;
        ctl.observe(&out.probes, r, attached)?;
        ep.chosen.push(attached);
        ep.realized.push(out.realized_mos);
        ep.reward_sum += r;
    }
    Ok(ep)
}

struct Scripted(Vec<InterfaceId>);

impl Controller for Scripted {
    fn decide(&mut self, epoch: usize, _: InterfaceId) -> Result<Action> {
        Ok(Action {
            target: self.0[epoch],
        })
    }

    fn observe(&mut self, _: &[f64], _: f64, _: InterfaceId) -> Result<()> {
        Ok(())
    }
}

struct Naive<'c> {
    cfg: &'c HarnessConfig,
    last: Option<Vec<f64>>,
}

impl Controller for Naive<'_> {
    fn decide(&mut self, _: usize, attached: InterfaceId) -> Result<Action> {
        match &self.last {
            None => Ok(Action::stay(attached)),
            Some(d) => {
                let inputs: Vec<QosInputs> = d.iter().map(|x| QosInputs::delay_only(*x)).collect();
                naive_policy_step(&inputs, &self.cfg.naive, attached)
            }
        }
    }

    fn observe(&mut self, probes: &[f64], _: f64, _: InterfaceId) -> Result<()> {
        self.last = Some(probes.to_vec());
        Ok(())
    }
}

struct M4<'c> {
    cfg: &'c HarnessConfig,
    rnl: Vec<RnlEstimator>,
}

impl Controller for M4<'_> {
    fn decide(&mut self, _: usize, attached: InterfaceId) -> Result<Action> {
        let values: Vec<Option<f64>> = self.rnl.iter().map(|e| e.rnl()).collect();
        Ok(m4_policy_step(&values, attached, &self.cfg.m4.hysteresis))
    }

    fn observe(&mut self, probes: &[f64], _: f64, _: InterfaceId) -> Result<()> {
        for (e, p) in self.rnl.iter_mut().zip(probes) {
            e.update(*p)?;
        }
        Ok(())
    }
}

/// HMM state predictors feeding a Q-table.
struct Proposed<'a> {
    cfg: &'a HarnessConfig,
    filters: Vec<OnlineFilter<'a>>,
    q: &'a mut QTable,
    explore: Option<(&'a EpsilonGreedy, &'a mut ChaCha8Rng)>,
    state: Option<usize>,
    action: usize,
    since_handoff: u64,
}

impl Proposed<'_> {
    fn joint_index(&self, attached: InterfaceId) -> Result<usize> {
        let per_interface: Vec<QoeState> = self.filters.iter().map(|f| f.predict().0).collect();
        self.q.index(&JointState::new(per_interface, attached))
    }
}

impl Controller for Proposed<'_> {
    fn decide(&mut self, _: usize, attached: InterfaceId) -> Result<Action> {
        let s = self.joint_index(attached)?;
        self.state = Some(s);
        let action = match &mut self.explore {
            Some((eg, rng)) => {
                let mode = eg.mode(&mut **rng);
                crate::policies::select_action(
                    &*self.q,
                    &self.q.space().state(s),
                    mode,
                    &mut **rng,
                )?
            }
            None => {
                let proposed = self.q.greedy(s, attached);
                let gain = self.q.get(s, proposed.target.index()) - self.q.get(s, attached.index());
                decide_handoff(
                    proposed,
                    attached,
                    gain,
                    &self.cfg.hysteresis,
                    self.since_handoff,
                )
            }
        };
        self.action = action.target.index();
        if action.target != attached {
            self.since_handoff = 0;
        }
        Ok(action)
    }

    fn observe(&mut self, probes: &[f64], r: f64, attached: InterfaceId) -> Result<()> {
        self.since_handoff = self.since_handoff.saturating_add(1);
        for (f, p) in self.filters.iter_mut().zip(probes) {
            f.update(*p)?;
        }
        if self.explore.is_some() {
            if let Some(s) = self.state {
                let next = self.joint_index(attached)?;
                self.q
                    .update_indexed(s, self.action, r, next, &self.cfg.qlearn)?;
            }
        }
        Ok(())
    }
}

fn labelled_traces(
    runs: &[SimRun],
    interface: usize,
    fold: &StateFold,
) -> Result<Vec<LabeledTrace>> {
    runs.iter()
        .map(|r| {
            LabeledTrace::new(
                r.traces[interface].rtts(),
                r.true_states[interface]
                    .iter()
                    .map(|s| fold.fold(*s))
                    .collect(),
            )
        })
        .collect()
}

pub fn generate_runs(
    cfg: &HarnessConfig,
    indices: impl Iterator<Item = u64>,
) -> Result<Vec<SimRun>> {
    indices
        .map(|i| generate_run(&cfg.scenario, &cfg.probe, i))
        .collect()
}

/// Trains HMMs and the Q-table on warm-up runs, then evaluates every enabled
/// policy on the scenario's runs.
pub fn compare_policies(cfg: &HarnessConfig) -> Result<Comparison> {
    cfg.validate()?;
    if cfg.policies_enabled.is_empty() {
        return Err(Error::Usage("no policies enabled".into()));
    }
    let mut enabled = cfg.policies_enabled.clone();
    enabled.sort();
    enabled.dedup();

    let scheme = cfg.scenario.scheme();
    let states = cfg.hmm_states()?;
    let folds: Vec<StateFold> = states
        .iter()
        .map(|k| label_fold(&scheme, *k).map(|(_, f)| f))
        .collect::<Result<_>>()?;
    let channels = cfg.scenario.channels()?;

    let train_count = cfg
        .training
        .warmup_episodes
        .max(cfg.training.hmm_training_runs);
    let training = generate_runs(
        cfg,
        (0..train_count as u64).map(|i| TRAINING_RUN_OFFSET + i),
    )?;
    let evaluation = generate_runs(cfg, 0..cfg.scenario.runs as u64)?;

    let mut models = Vec::with_capacity(channels.len());
    for (i, k) in states.iter().enumerate() {
        let data = labelled_traces(&training[..cfg.training.hmm_training_runs], i, &folds[i])?;
        let obs: Vec<Vec<f64>> = data.iter().map(|d| d.observations.clone()).collect();
        let labels: Vec<Vec<QoeState>> = data.iter().map(|d| d.labels.clone()).collect();
        let (model, _) = em_train(&obs, Some(&labels), *k, &cfg.training.em)?;
        models.push(model);
    }

    let mut prediction_accuracy = Vec::with_capacity(channels.len());
    for (i, k) in states.iter().enumerate() {
        let data = labelled_traces(&evaluation, i, &folds[i])?;
        if data.len() < cfg.training.folds {
            return Err(Error::Usage(format!(
                "{} evaluation runs cannot be split into {} folds",
                data.len(),
                cfg.training.folds
            )));
        }
        let cv = cross_validate(
            &data,
            cfg.training.folds,
            *k,
            &cfg.training.em,
            cfg.scenario.seed,
        )?;
        prediction_accuracy.push(InterfaceAccuracy {
            interface: channels[i].label.clone(),
            states: *k,
            accuracy: cv.accuracy,
            fold_accuracy: cv.fold_accuracy,
        });
    }

    let mut qtable = None;
    if enabled.contains(&PolicyKind::Proposed) {
        let mut q = QTable::new(JointSpace::new(states.clone())?);
        let mut eg = EpsilonGreedy::new(&cfg.qlearn);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.scenario.seed);
        rng.set_stream(AGENT_STREAM);
        for run in training.iter().take(cfg.training.warmup_episodes) {
            let mut agent = Proposed {
                cfg,
                filters: models.iter().map(OnlineFilter::new).collect(),
                q: &mut q,
                explore: Some((&eg, &mut rng)),
                state: None,
                action: 0,
                since_handoff: u64::MAX,
            };
            run_episode(run, cfg, &scheme, &mut agent)?;
            eg.end_episode();
        }
        qtable = Some(q);
    }

    let mut policies = Vec::new();
    let mut timeline = Vec::new();
    for &kind in &enabled {
        let mut per_run = Vec::with_capacity(evaluation.len());
        let (mut mos_sum, mut epochs, mut reward_sum) = (0.0, 0usize, 0.0);
        for run in &evaluation {
            let ep = match kind {
                PolicyKind::Best => {
                    let plan = oracle_policy(&run.true_states, Some(InterfaceId::new(0)))?;
                    run_episode(run, cfg, &scheme, &mut Scripted(plan))?
                }
                PolicyKind::Naive => {
                    run_episode(run, cfg, &scheme, &mut Naive { cfg, last: None })?
                }
                PolicyKind::M4 => {
                    let est = RnlEstimator::new(cfg.m4.h, cfg.m4.c)?;
                    let mut m4 = M4 {
                        cfg,
                        rnl: vec![est; run.interfaces()],
                    };
                    run_episode(run, cfg, &scheme, &mut m4)?
                }
                PolicyKind::Proposed => {
                    let q = qtable.as_mut().expect("trained above");
                    let mut agent = Proposed {
                        cfg,
                        filters: models.iter().map(OnlineFilter::new).collect(),
                        q,
                        explore: None,
                        state: None,
                        action: 0,
                        since_handoff: u64::MAX,
                    };
                    run_episode(run, cfg, &scheme, &mut agent)?
                }
            };
            let start = Some(InterfaceId::new(0));
            per_run.push(handoff_count(&ep.chosen, start));
            mos_sum += ep.realized.iter().sum::<f64>();
            epochs += ep.realized.len();
            reward_sum += ep.reward_sum;
            let run_id = SimRun::run_id(run.run_index);
            let mut prev = start;
            let mut cumulative = 0;
            for (t, chosen) in ep.chosen.iter().enumerate() {
                if prev.is_some_and(|p| p != *chosen) {
                    cumulative += 1;
                }
                prev = Some(*chosen);
                timeline.push(TimelineRow {
                    run_id: run_id.clone(),
                    policy: kind,
                    epoch: t,
                    mos: run.true_mos.iter().map(|m| m[t]).collect(),
                    chosen: chosen.index(),
                    cumulative_handoffs: cumulative,
                });
            }
        }
        policies.push(PolicySummary {
            policy: kind,
            handoffs: per_run.iter().sum(),
            per_run_handoffs: per_run,
            mean_mos: if epochs == 0 {
                0.0
            } else {
                mos_sum / epochs as f64
            },
            reward_sum,
        });
    }

    let mut reductions = Vec::new();
    if let Some(p) = policies.iter().find(|p| p.policy == PolicyKind::Proposed) {
        for baseline in [PolicyKind::Naive, PolicyKind::M4] {
            if let Some(b) = policies.iter().find(|x| x.policy == baseline) {
                reductions.push(Reduction {
                    baseline,
                    percent: reduction_percent(b.handoffs, p.handoffs),
                });
            }
        }
    }

    let defined: Vec<f64> = reductions.iter().filter_map(|r| r.percent).collect();
    let mean_reduction =
        (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);

    Ok(Comparison {
        report: EvaluationReport {
            scenario: cfg.scenario.kind_name().to_string(),
            codec: cfg.scenario.codec,
            seed: cfg.scenario.seed,
            runs: cfg.scenario.runs,
            duration_epochs: cfg.scenario.duration_epochs,
            warmup_episodes: cfg.training.warmup_episodes,
            policies,
            prediction_accuracy,
            reductions,
            mean_reduction,
        },
        timeline,
        models,
        qtable,
    })
}

//! Discrete-time two-interface access network.
//!
//! Each interface is driven by a ground-truth Gaussian HMM: the hidden chain
//! picks a regime, the regime emits a delay sample and has its own packet
//! loss. Probes (binding acknowledgements) are delivered on every interface
//! every epoch whether or not the node is attached there; the per-epoch RTT
//! recorded in the trace is their aggregate. True MOS comes from the E-Model
//! on the sampled one-way delay and the regime's loss.
//!
//! Runs are reproducible: run `i` of seed `s` always draws from the ChaCha8
//! stream `i` of `s`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hmm::HmmModel;
use crate::policies::{Action, InterfaceId};
use crate::probing::{aggregate_epoch, ProbeConfig};
use crate::qoe::{mos_from_delay, Codec, MosScore, QoeState, QuantizationScheme};
use crate::trace_io::{DelayTrace, TraceSample};

/// Floor applied to every emitted delay sample, in seconds.
pub const MIN_DELAY_S: f64 = 0.001;

/// What a generator's emissions measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelayKind {
    Owd,
    Rtt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    pub label: String,
    pub generator: HmmModel,
    pub loss_per_state: Vec<f64>,
    pub delay_kind: DelayKind,
}

impl ChannelModel {
    pub fn validate(&self) -> Result<()> {
        if self.loss_per_state.len() != self.generator.state_count() {
            return Err(Error::invalid(
                "channel",
                format!(
                    "{}: one loss value per generator state required",
                    self.label
                ),
            ));
        }
        if self.loss_per_state.iter().any(|l| !(0.0..=1.0).contains(l)) {
            return Err(Error::invalid(
                "channel",
                format!("{}: loss must be in [0, 1]", self.label),
            ));
        }
        Ok(())
    }

    /// RTT implied by one emitted sample.
    pub fn rtt_of(&self, sample: f64) -> f64 {
        let d = sample.max(MIN_DELAY_S);
        match self.delay_kind {
            DelayKind::Owd => 2.0 * d,
            DelayKind::Rtt => d,
        }
    }

    /// WLAN under background-traffic congestion, fitted for G.711. Emits
    /// one-way delay.
    pub fn wlan_congestion() -> Self {
        let generator = HmmModel::from_parts(
            &[0.6, 0.2, 0.2],
            &[
                &[0.9279, 0.0596, 0.0125],
                &[0.2817, 0.3803, 0.3380],
                &[0.0400, 0.2400, 0.7200],
            ],
            &[0.4850, 0.1302, 0.0462],
            &[0.0576, 0.0010, 0.0006],
        )
        .expect("built-in parameters are valid");
        ChannelModel {
            label: "WLAN".into(),
            generator,
            loss_per_state: vec![0.20, 0.18, 0.0],
            delay_kind: DelayKind::Owd,
        }
    }

    /// Roaming WLAN: out of coverage (state 1) or associated (state 2).
    /// Emits RTT.
    pub fn wlan_roaming() -> Self {
        let generator = HmmModel::from_parts(
            &[0.0, 1.0],
            &[&[0.9500, 0.0500], &[0.0654, 0.9346]],
            &[0.9905, 0.0519],
            &[0.0044, 0.0079],
        )
        .expect("built-in parameters are valid");
        ChannelModel {
            label: "WLAN".into(),
            generator,
            loss_per_state: vec![0.0, 0.0],
            delay_kind: DelayKind::Rtt,
        }
    }

    /// CDMA2000 cellular link. Emits RTT.
    pub fn cdma() -> Self {
        let generator = HmmModel::from_parts(
            &[0.0, 0.0, 1.0],
            &[
                &[0.7852, 0.1333, 0.0815],
                &[0.1111, 0.8148, 0.0741],
                &[0.0696, 0.0435, 0.8870],
            ],
            &[0.9519, 0.6401, 0.2857],
            &[0.0055, 0.0076, 0.0025],
        )
        .expect("built-in parameters are valid");
        ChannelModel {
            label: "CDMA2000".into(),
            generator,
            loss_per_state: vec![0.0, 0.0, 0.0],
            delay_kind: DelayKind::Rtt,
        }
    }

    /// Same channel with every self-transition set to `1 - 1/mean_dwell`
    /// and the off-diagonal mass rescaled.
    pub fn with_mean_dwell(mut self, mean_dwell: f64) -> Result<Self> {
        if !(mean_dwell >= 1.0) {
            return Err(Error::invalid("channel", "mean dwell must be >= 1 epoch"));
        }
        let stay = 1.0 - 1.0 / mean_dwell;
        let g = &self.generator;
        let n = g.state_count();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let row = g.transitions().row(i);
                let off: f64 = 1.0 - row[i];
                (0..n)
                    .map(|j| {
                        if i == j {
                            stay
                        } else if off > 0.0 {
                            row[j] / off * (1.0 - stay)
                        } else {
                            (1.0 - stay) / (n - 1).max(1) as f64
                        }
                    })
                    .collect()
            })
            .collect();
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let means = g.means();
        let vars: Vec<f64> = g.emissions().iter().map(|e| e.variance).collect();
        self.generator = HmmModel::from_parts(g.prior(), &refs, &means, &vars)?;
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    WlanCongestion,
    Roaming,
}

/// Fields missing from a config file take the defaults of its `kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "PartialScenario")]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub duration_epochs: usize,
    pub runs: usize,
    pub seed: u64,
    pub codec: Codec,
    /// MOS lost on the epoch a handoff executes.
    pub handoff_penalty_mos: f64,
    /// Mean WLAN coverage dwell in the roaming scenario, in epochs.
    pub dwell_mean_epochs: f64,
    /// Replaces the scenario's built-in channels when set.
    pub channels: Option<Vec<ChannelModel>>,
    /// Replaces the scenario's built-in MOS bands when set.
    pub scheme: Option<QuantizationScheme>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PartialScenario {
    kind: Option<ScenarioKind>,
    duration_epochs: Option<usize>,
    runs: Option<usize>,
    seed: Option<u64>,
    codec: Option<Codec>,
    handoff_penalty_mos: Option<f64>,
    dwell_mean_epochs: Option<f64>,
    channels: Option<Vec<ChannelModel>>,
    scheme: Option<QuantizationScheme>,
}

impl From<PartialScenario> for ScenarioConfig {
    fn from(p: PartialScenario) -> Self {
        let base = match p.kind.unwrap_or(ScenarioKind::Roaming) {
            ScenarioKind::Roaming => ScenarioConfig::roaming(),
            ScenarioKind::WlanCongestion => ScenarioConfig::wlan_congestion(),
        };
        ScenarioConfig {
            kind: base.kind,
            duration_epochs: p.duration_epochs.unwrap_or(base.duration_epochs),
            runs: p.runs.unwrap_or(base.runs),
            seed: p.seed.unwrap_or(base.seed),
            codec: p.codec.unwrap_or(base.codec),
            handoff_penalty_mos: p.handoff_penalty_mos.unwrap_or(base.handoff_penalty_mos),
            dwell_mean_epochs: p.dwell_mean_epochs.unwrap_or(base.dwell_mean_epochs),
            channels: p.channels,
            scheme: p.scheme,
        }
    }
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig::roaming()
    }
}

impl ScenarioConfig {
    pub fn roaming() -> Self {
        ScenarioConfig {
            kind: ScenarioKind::Roaming,
            duration_epochs: 200,
            runs: 12,
            seed: 1,
            codec: Codec::G729,
            handoff_penalty_mos: 0.3,
            dwell_mean_epochs: 40.0,
            channels: None,
            scheme: None,
        }
    }

    pub fn wlan_congestion() -> Self {
        ScenarioConfig {
            kind: ScenarioKind::WlanCongestion,
            duration_epochs: 960,
            runs: 100,
            codec: Codec::G711,
            ..ScenarioConfig::roaming()
        }
    }

    pub fn channels(&self) -> Result<Vec<ChannelModel>> {
        if let Some(c) = &self.channels {
            return Ok(c.clone());
        }
        Ok(match self.kind {
            ScenarioKind::WlanCongestion => {
                vec![ChannelModel::wlan_congestion(), ChannelModel::cdma()]
            }
            ScenarioKind::Roaming => vec![
                ChannelModel::wlan_roaming().with_mean_dwell(self.dwell_mean_epochs)?,
                ChannelModel::cdma(),
            ],
        })
    }

    pub fn scheme(&self) -> QuantizationScheme {
        match (&self.scheme, self.kind) {
            (Some(s), _) => s.clone(),
            (None, ScenarioKind::WlanCongestion) => QuantizationScheme::congestion(),
            (None, ScenarioKind::Roaming) => QuantizationScheme::roaming(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            ScenarioKind::WlanCongestion => "wlan_congestion",
            ScenarioKind::Roaming => "roaming",
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.duration_epochs < 2 {
            return Err(Error::invalid("scenario", "duration_epochs must be >= 2"));
        }
        if self.runs < 1 {
            return Err(Error::invalid("scenario", "runs must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.handoff_penalty_mos) {
            return Err(Error::invalid(
                "scenario",
                "handoff_penalty_mos must be in [0, 1]",
            ));
        }
        let channels = self.channels()?;
        if channels.is_empty() {
            return Err(Error::invalid("scenario", "at least one channel required"));
        }
        for c in &channels {
            c.validate()?;
        }
        Ok(())
    }
}

/// One simulated run: per-interface traces plus the ground truth behind them.
#[derive(Debug, Clone, PartialEq)]
pub struct SimRun {
    pub run_index: u64,
    pub seed: u64,
    pub traces: Vec<DelayTrace>,
    pub true_mos: Vec<Vec<f64>>,
    pub true_states: Vec<Vec<QoeState>>,
    pub hidden_states: Vec<Vec<QoeState>>,
}

impl SimRun {
    pub fn interfaces(&self) -> usize {
        self.traces.len()
    }

    pub fn len(&self) -> usize {
        self.true_mos.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn run_id(run_index: u64) -> String {
        format!("run{run_index:03}")
    }
}

fn run_rng(seed: u64, run_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run_index);
    rng
}

pub fn generate_run(cfg: &ScenarioConfig, probe: &ProbeConfig, run_index: u64) -> Result<SimRun> {
    cfg.validate()?;
    probe.validate()?;
    let channels = cfg.channels()?;
    let scheme = cfg.scheme();
    let codec = cfg.codec.profile();
    let mut rng = run_rng(cfg.seed, run_index);
    let run_id = SimRun::run_id(run_index);
    let mut run = SimRun {
        run_index,
        seed: cfg.seed,
        traces: Vec::new(),
        true_mos: Vec::new(),
        true_states: Vec::new(),
        hidden_states: Vec::new(),
    };
    for ch in &channels {
        let (hidden, samples) = ch.generator.sample(&mut rng, cfg.duration_epochs);
        let mut trace = DelayTrace::new(run_id.clone(), ch.label.clone());
        let mut mos_seq = Vec::with_capacity(samples.len());
        let mut states = Vec::with_capacity(samples.len());
        let mut previous = None;
        for (t, (state, sample)) in hidden.iter().zip(&samples).enumerate() {
            let rtt = ch.rtt_of(*sample);
            let loss = ch.loss_per_state[state.zero_based()];
            let received: Vec<f64> = (0..probe.probes_per_second)
                .filter(|_| rng.random::<f64>() >= loss)
                .map(|_| rtt)
                .collect();
            let agg = aggregate_epoch(&received, probe, previous)?;
            previous = Some(agg.rtt_s);
            let mos = mos_from_delay(rtt / 2.0, loss, &codec)?;
            mos_seq.push(mos.value());
            states.push(scheme.quantize(mos));
            trace.samples.push(TraceSample {
                epoch: t as u64,
                rtt_s: agg.rtt_s,
                mos: Some(mos.value()),
            });
        }
        run.traces.push(trace);
        run.true_mos.push(mos_seq);
        run.true_states.push(states);
        run.hidden_states.push(hidden);
    }
    Ok(run)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    /// Epoch RTT observed on every interface.
    pub probes: Vec<f64>,
    pub realized_mos: f64,
    pub handoff_occurred: bool,
    pub handoff_penalty_mos: f64,
}

/// Executes `action` at `epoch`: the node ends up on `action.target` and
/// experiences that interface's MOS, less the penalty when it switched.
pub fn step_environment(
    run: &SimRun,
    epoch: usize,
    current: InterfaceId,
    action: Action,
    penalty_mos: f64,
) -> Result<StepOutcome> {
    if epoch >= run.len() {
        return Err(Error::domain(format!(
            "epoch {epoch} outside a run of {} epochs",
            run.len()
        )));
    }
    let target = action.target.index();
    if target >= run.interfaces() || current.index() >= run.interfaces() {
        return Err(Error::domain(format!(
            "interface {} out of range",
            action.target
        )));
    }
    let handoff_occurred = action.target != current;
    let penalty = if handoff_occurred { penalty_mos } else { 0.0 };
    let realized_mos = MosScore::new(run.true_mos[target][epoch] - penalty).value();
    Ok(StepOutcome {
        probes: run.traces.iter().map(|t| t.samples[epoch].rtt_s).collect(),
        realized_mos,
        handoff_occurred,
        handoff_penalty_mos: penalty,
    })
}

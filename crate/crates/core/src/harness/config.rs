use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hmm::EmConfig;
use crate::netsim::{ScenarioConfig, ScenarioKind};
use crate::policies::{HysteresisConfig, QLearningConfig, QosWeights, RewardConfig};
use crate::probing::ProbeConfig;
use crate::qoe::{Codec, QoeState, QuantizationScheme, StateFold};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Best,
    Naive,
    M4,
    Proposed,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] = [
        PolicyKind::Best,
        PolicyKind::Naive,
        PolicyKind::M4,
        PolicyKind::Proposed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Best => "best",
            PolicyKind::Naive => "naive",
            PolicyKind::M4 => "m4",
            PolicyKind::Proposed => "proposed",
        }
    }
}

/// RNL parameters and switch gate of the M4 baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct M4Config {
    pub h: u32,
    pub c: f64,
    pub hysteresis: HysteresisConfig,
}

impl Default for M4Config {
    fn default() -> Self {
        M4Config {
            h: 5,
            c: 5.0,
            hysteresis: HysteresisConfig::rnl_default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    /// Q-learning episodes, each on a freshly generated run.
    pub warmup_episodes: usize,
    /// How many of the warm-up runs the per-interface HMMs are fitted on.
    pub hmm_training_runs: usize,
    /// Hidden states per interface; scenario default when unset.
    pub hmm_states: Option<Vec<usize>>,
    pub folds: usize,
    pub em: EmConfig,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            warmup_episodes: 50,
            hmm_training_runs: 10,
            hmm_states: None,
            folds: 2,
            em: EmConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessConfig {
    pub output_dir: PathBuf,
    pub policies_enabled: Vec<PolicyKind>,
    pub scenario: ScenarioConfig,
    pub probe: ProbeConfig,
    pub reward: RewardConfig,
    pub qlearn: QLearningConfig,
    pub hysteresis: HysteresisConfig,
    pub m4: M4Config,
    pub naive: QosWeights,
    pub training: TrainingConfig,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        HarnessConfig {
            output_dir: PathBuf::from("out"),
            policies_enabled: PolicyKind::ALL.to_vec(),
            scenario: ScenarioConfig::default(),
            probe: ProbeConfig::default(),
            reward: RewardConfig::default(),
            qlearn: QLearningConfig::default(),
            hysteresis: HysteresisConfig::default(),
            m4: M4Config::default(),
            naive: QosWeights::default(),
            training: TrainingConfig::default(),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub codec: Option<Codec>,
}

impl HarnessConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::invalid("config", e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    /// File (or defaults) plus overrides, validated.
    pub fn resolve(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        if let Some(seed) = overrides.seed {
            cfg.scenario.seed = seed;
            cfg.training.em.seed = seed;
        }
        if let Some(out) = &overrides.out {
            cfg.output_dir = out.clone();
        }
        if let Some(codec) = overrides.codec {
            cfg.scenario.codec = codec;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.probe.validate()?;
        self.reward.validate()?;
        self.qlearn.validate()?;
        self.hysteresis.validate()?;
        self.m4.hysteresis.validate()?;
        if self.m4.h < 1 {
            return Err(Error::invalid("m4", "h must be >= 1"));
        }
        self.naive.validate()?;
        if self.training.folds < 2 {
            return Err(Error::invalid("training", "folds must be >= 2"));
        }
        if self.training.hmm_training_runs < 1 {
            return Err(Error::invalid("training", "hmm_training_runs must be >= 1"));
        }
        let scheme = self.scenario.scheme();
        let interfaces = self.scenario.channels()?.len();
        let states = self.hmm_states()?;
        if states.len() != interfaces {
            return Err(Error::invalid(
                "training",
                format!("hmm_states needs one entry per interface ({interfaces})"),
            ));
        }
        for k in states {
            label_fold(&scheme, k)?;
        }
        Ok(())
    }

    pub fn hmm_states(&self) -> Result<Vec<usize>> {
        if let Some(s) = &self.training.hmm_states {
            return Ok(s.clone());
        }
        let n = self.scenario.channels()?.len();
        let full = self.scenario.scheme().state_count();
        Ok(match self.scenario.kind {
            // the WLAN link is either out of coverage or fine
            ScenarioKind::Roaming if self.scenario.channels.is_none() => vec![full - 1, full],
            _ => vec![full; n],
        })
    }
}

/// Maps QoE states of `scheme` onto `k` model states: the identity when the
/// counts agree, otherwise state 2 folded into its upper neighbour.
pub fn label_fold(
    scheme: &QuantizationScheme,
    k: usize,
) -> Result<(QuantizationScheme, StateFold)> {
    let n = scheme.state_count();
    if k == n {
        Ok((scheme.clone(), StateFold::identity(n)))
    } else if n >= 3 && k + 1 == n {
        scheme.fold_into_upper(QoeState::new(2))
    } else {
        Err(Error::Usage(format!(
            "{k} states cannot be mapped onto a {n}-state quantization scheme; use {n} or {}",
            n - 1
        )))
    }
}

//! Passive probing over mobility signalling.
//!
//! Every binding update sent by the mobile node is answered by a binding
//! acknowledgement; the pair yields one RTT sample per interface without
//! injecting extra traffic. Samples are reduced to one value per one-second
//! decision epoch, and the M4 baseline smooths them into the relative
//! network load (RNL) metric.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policies::InterfaceId;

/// Length of a decision epoch.
pub const EPOCH_SECONDS: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Imputation {
    /// A silent epoch counts as a probe arriving exactly at the late threshold.
    ThresholdClamp,
    /// A silent epoch repeats the previous epoch's value.
    CarryForward,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeConfig {
    pub probes_per_second: u32,
    pub ba_packet_bytes: u32,
    pub late_threshold_s: f64,
    pub imputation: Imputation,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            probes_per_second: 5,
            ba_packet_bytes: 24,
            late_threshold_s: 0.650,
            imputation: Imputation::ThresholdClamp,
        }
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.probes_per_second < 1 {
            return Err(Error::invalid(
                "probe config",
                "probes_per_second must be >= 1",
            ));
        }
        if self.ba_packet_bytes == 0 {
            return Err(Error::invalid(
                "probe config",
                "ba_packet_bytes must be > 0",
            ));
        }
        if !(self.late_threshold_s > 0.0) {
            return Err(Error::invalid(
                "probe config",
                "late_threshold_s must be > 0",
            ));
        }
        Ok(())
    }

    /// Signalling bandwidth spent on acknowledgements, in bits per second.
    pub fn overhead_bps(&self) -> u64 {
        u64::from(self.probes_per_second) * u64::from(self.ba_packet_bytes) * 8
    }
}

/// One epoch's delay reading for one interface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeRecord {
    pub epoch_t: u64,
    pub interface: InterfaceId,
    pub rtt_s: f64,
    pub imputed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRtt {
    pub rtt_s: f64,
    pub imputed: bool,
}

/// Reduces the RTTs received during one epoch to a single value: their mean,
/// or an imputed value when nothing arrived.
pub fn aggregate_epoch(
    received_rtts: &[f64],
    config: &ProbeConfig,
    previous: Option<f64>,
) -> Result<EpochRtt> {
    if let Some(bad) = received_rtts
        .iter()
        .find(|r| !(**r > 0.0) || !r.is_finite())
    {
        return Err(Error::domain(format!(
            "probe RTT must be finite and > 0, got {bad}"
        )));
    }
    if !received_rtts.is_empty() {
        let mean = received_rtts.iter().sum::<f64>() / received_rtts.len() as f64;
        return Ok(EpochRtt {
            rtt_s: mean,
            imputed: false,
        });
    }
    let rtt_s = match config.imputation {
        Imputation::ThresholdClamp => config.late_threshold_s,
        Imputation::CarryForward => previous.ok_or_else(|| {
            Error::domain("no probe received and no previous epoch to carry forward")
        })?,
    };
    Ok(EpochRtt {
        rtt_s,
        imputed: true,
    })
}

/// Per-interface aggregation state across epochs.
#[derive(Debug, Clone)]
pub struct EpochAggregator {
    config: ProbeConfig,
    interface: InterfaceId,
    previous: Option<f64>,
    next_epoch: u64,
}

impl EpochAggregator {
    pub fn new(config: ProbeConfig, interface: InterfaceId) -> Self {
        EpochAggregator {
            config,
            interface,
            previous: None,
            next_epoch: 0,
        }
    }

    pub fn push(&mut self, received_rtts: &[f64]) -> Result<ProbeRecord> {
        let e = aggregate_epoch(received_rtts, &self.config, self.previous)?;
        self.previous = Some(e.rtt_s);
        let rec = ProbeRecord {
            epoch_t: self.next_epoch,
            interface: self.interface,
            rtt_s: e.rtt_s,
            imputed: e.imputed,
        };
        self.next_epoch += 1;
        Ok(rec)
    }
}

/// Smoothed RTT plus weighted smoothed jitter:
///
/// ```text
/// Z_n = RTT_n / h + (h-1)/h * Z_{n-1}        Z_0 = RTT_0
/// D_n = RTT_n - RTT_{n-1}                    D_0 = 0
/// J_n = |D_n| / h + (h-1)/h * J_{n-1}        J_0 = |D_1|
/// RNL = Z_n + c * J_n
/// ```
///
/// Jitter only exists from the second sample on; until then the metric is
/// `Z_0` alone and [`RnlEstimator::rnl`] reports it as undefined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RnlEstimator {
    h: u32,
    c: f64,
    z: f64,
    j: f64,
    last_rtt: f64,
    samples: u64,
}

impl Default for RnlEstimator {
    fn default() -> Self {
        RnlEstimator::new(5, 5.0).expect("default window is valid")
    }
}

impl RnlEstimator {
    pub fn new(h: u32, c: f64) -> Result<Self> {
        if h < 1 {
            return Err(Error::invalid(
                "rnl estimator",
                "history window must be >= 1",
            ));
        }
        if !c.is_finite() {
            return Err(Error::invalid(
                "rnl estimator",
                "jitter weight must be finite",
            ));
        }
        Ok(RnlEstimator {
            h,
            c,
            z: 0.0,
            j: 0.0,
            last_rtt: 0.0,
            samples: 0,
        })
    }

    pub fn smoothed_rtt(&self) -> f64 {
        self.z
    }

    pub fn smoothed_jitter(&self) -> f64 {
        self.j
    }

    pub fn samples(&self) -> u64 {
        self.samples
    }

    /// RNL, once at least two samples have been seen.
    pub fn rnl(&self) -> Option<f64> {
        (self.samples >= 2).then_some(self.z + self.c * self.j)
    }

    pub fn update(&mut self, rtt_s: f64) -> Result<f64> {
        if !(rtt_s > 0.0) || !rtt_s.is_finite() {
            return Err(Error::domain(format!(
                "RTT must be finite and > 0, got {rtt_s}"
            )));
        }
        let h = f64::from(self.h);
        match self.samples {
            0 => {
                self.z = rtt_s;
                self.j = 0.0;
            }
            n => {
                let d = rtt_s - self.last_rtt;
                if n == 1 {
                    self.j = d.abs();
                }
                // x/h + (h-1)/h * prev, arranged so a constant input is a
                // fixed point in floating point too
                self.z += (rtt_s - self.z) / h;
                self.j += (d.abs() - self.j) / h;
            }
        }
        self.last_rtt = rtt_s;
        self.samples += 1;
        Ok(self.rnl().unwrap_or(self.z))
    }
}

/// Value-style form of [`RnlEstimator::update`].
pub fn rnl_update(mut est: RnlEstimator, rtt_s: f64) -> Result<(RnlEstimator, f64)> {
    let rnl = est.update(rtt_s)?;
    Ok((est, rnl))
}

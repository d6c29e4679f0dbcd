//! Voice quality from network delay and loss.
//!
//! MOS is computed with a reduced ITU-T G.107 E-Model. Only the delay and
//! loss impairments vary; every other transmission-rating term is folded
//! into the basic signal-to-noise rating `R0`.
//!
//! ```text
//! R      = R0 - Id(owd) - Ie_eff(loss, codec)
//! R0     = 93.2
//! Id     = 0.024 d + 0.11 (d - 177.3) H(d - 177.3)      d = one-way delay in ms
//! Ie_eff = Ie + (95 - Ie) * loss / (loss + Bpl)         loss, Bpl as fractions
//! MOS    = 1                                            R <= 0
//!        = 1 + 0.035 R + 7e-6 R (R - 60) (100 - R)      0 < R < 100
//!        = 4.5                                          R >= 100
//! ```
//!
//! The result is clamped to `[1, 5]`. On `(0, ~3.2)` the cubic dips just
//! below 1, so the clamp keeps MOS non-decreasing in `R`.
//!
//! MOS scores are then quantized into a small number of QoE states with a
//! [`QuantizationScheme`]. State 1 is always the worst band.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Basic signal-to-noise rating with default G.107 parameters.
pub const R0: f64 = 93.2;
/// Knee of the delay impairment curve, in milliseconds.
pub const DELAY_KNEE_MS: f64 = 177.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Codec {
    G711,
    G729,
}

impl Codec {
    pub fn profile(self) -> CodecProfile {
        match self {
            Codec::G711 => CodecProfile::g711(),
            Codec::G729 => CodecProfile::g729(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Codec::G711 => "g711",
            Codec::G729 => "g729",
        }
    }
}

impl fmt::Display for Codec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Codec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['.', '-', '_'], "").as_str() {
            "g711" => Ok(Codec::G711),
            "g729" => Ok(Codec::G729),
            other => Err(Error::Usage(format!("unknown codec `{other}`"))),
        }
    }
}

/// Per-codec E-Model constants and the probe lateness cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodecProfile {
    pub codec: Codec,
    /// Equipment impairment `Ie`.
    pub equipment_impairment: f64,
    /// Packet-loss robustness `Bpl`, as a fraction.
    pub loss_robustness: f64,
    /// Probes arriving later than this are useless for a voice call.
    pub late_threshold_s: f64,
}

impl CodecProfile {
    pub fn g711() -> Self {
        CodecProfile {
            codec: Codec::G711,
            equipment_impairment: 0.0,
            loss_robustness: 0.25,
            late_threshold_s: 0.650,
        }
    }

    pub fn g729() -> Self {
        CodecProfile {
            codec: Codec::G729,
            equipment_impairment: 11.0,
            loss_robustness: 0.19,
            late_threshold_s: 0.650,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.equipment_impairment >= 0.0) {
            return Err(Error::invalid(
                "codec profile",
                "equipment impairment must be >= 0",
            ));
        }
        if !(self.loss_robustness > 0.0) {
            return Err(Error::invalid(
                "codec profile",
                "loss robustness must be > 0",
            ));
        }
        if !(self.late_threshold_s > 0.0) {
            return Err(Error::invalid(
                "codec profile",
                "late threshold must be > 0",
            ));
        }
        Ok(())
    }
}

impl Default for CodecProfile {
    fn default() -> Self {
        CodecProfile::g711()
    }
}

/// Mean opinion score, always within `[1, 5]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MosScore(f64);

impl MosScore {
    pub const MIN: f64 = 1.0;
    pub const MAX: f64 = 5.0;

    /// Clamps `value` into the MOS scale. NaN maps to the floor.
    pub fn new(value: f64) -> Self {
        if value.is_nan() {
            return MosScore(Self::MIN);
        }
        MosScore(value.clamp(Self::MIN, Self::MAX))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// A discrete QoE state, 1-based. State 1 is the worst band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QoeState(usize);

impl QoeState {
    /// Panics if `index` is zero.
    pub fn new(index: usize) -> Self {
        assert!(index >= 1, "QoE states are 1-based");
        QoeState(index)
    }

    pub fn from_zero_based(i: usize) -> Self {
        QoeState(i + 1)
    }

    pub fn index(self) -> usize {
        self.0
    }

    pub fn zero_based(self) -> usize {
        self.0 - 1
    }
}

impl fmt::Display for QoeState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// MOS cut points separating QoE states. A MOS equal to a cut point belongs
/// to the upper band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SchemeRepr", into = "SchemeRepr")]
pub struct QuantizationScheme {
    boundaries: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct SchemeRepr {
    boundaries: Vec<f64>,
}

impl TryFrom<SchemeRepr> for QuantizationScheme {
    type Error = Error;
    fn try_from(r: SchemeRepr) -> Result<Self> {
        QuantizationScheme::new(r.boundaries)
    }
}

impl From<QuantizationScheme> for SchemeRepr {
    fn from(s: QuantizationScheme) -> Self {
        SchemeRepr {
            boundaries: s.boundaries,
        }
    }
}

impl QuantizationScheme {
    pub fn new(boundaries: Vec<f64>) -> Result<Self> {
        let count = boundaries.len() + 1;
        if !matches!(count, 2 | 3 | 5) {
            return Err(Error::invalid(
                "quantization scheme",
                format!("{count} states; supported counts are 2, 3 and 5"),
            ));
        }
        if boundaries
            .iter()
            .any(|b| !(*b > MosScore::MIN && *b < MosScore::MAX))
        {
            return Err(Error::invalid(
                "quantization scheme",
                "boundaries must lie strictly inside (1, 5)",
            ));
        }
        if boundaries.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid(
                "quantization scheme",
                "boundaries must be strictly ascending",
            ));
        }
        Ok(QuantizationScheme { boundaries })
    }

    /// WLAN congestion bands: `< 2`, `[2, 3)`, `>= 3`.
    pub fn congestion() -> Self {
        QuantizationScheme {
            boundaries: vec![2.0, 3.0],
        }
    }

    /// Roaming bands: `< 2`, `[2, 4)`, `>= 4`.
    pub fn roaming() -> Self {
        QuantizationScheme {
            boundaries: vec![2.0, 4.0],
        }
    }

    /// Five bands on the ACR opinion scale.
    pub fn five_band() -> Self {
        QuantizationScheme {
            boundaries: vec![2.0, 3.0, 3.6, 4.0],
        }
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn state_count(&self) -> usize {
        self.boundaries.len() + 1
    }

    pub fn states(&self) -> impl Iterator<Item = QoeState> {
        (1..=self.state_count()).map(QoeState)
    }

    pub fn quantize(&self, mos: MosScore) -> QoeState {
        quantize_mos(mos, self)
    }

    /// `[lower, upper)` MOS band of a state; the top band is closed at 5.
    pub fn band(&self, state: QoeState) -> (f64, f64) {
        let i = state.zero_based();
        let lo = if i == 0 {
            MosScore::MIN
        } else {
            self.boundaries[i - 1]
        };
        let hi = self.boundaries.get(i).copied().unwrap_or(MosScore::MAX);
        (lo, hi)
    }

    /// Merges band `state` into the band above it, returning the coarser
    /// scheme and the label mapping between the two.
    pub fn fold_into_upper(&self, state: QoeState) -> Result<(QuantizationScheme, StateFold)> {
        let n = self.state_count();
        if state.index() >= n {
            return Err(Error::invalid(
                "state fold",
                format!("state {state} has no upper neighbour in a {n}-state scheme"),
            ));
        }
        let mut boundaries = self.boundaries.clone();
        boundaries.remove(state.zero_based());
        let folded = QuantizationScheme::new(boundaries)?;
        let to_folded = (1..=n)
            .map(|s| if s <= state.index() { s } else { s - 1 })
            .map(QoeState)
            .collect();
        let mut to_original: Vec<QoeState> = (1..n).map(QoeState).collect();
        for s in to_original.iter_mut() {
            if s.0 >= state.index() {
                s.0 += 1;
            }
        }
        Ok((
            folded,
            StateFold {
                to_folded,
                to_original,
            },
        ))
    }
}

impl Default for QuantizationScheme {
    fn default() -> Self {
        QuantizationScheme::congestion()
    }
}

/// Label mapping produced by [`QuantizationScheme::fold_into_upper`].
///
/// A merged band unfolds to the band it was folded into.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateFold {
    to_folded: Vec<QoeState>,
    to_original: Vec<QoeState>,
}

impl StateFold {
    pub fn identity(state_count: usize) -> Self {
        let states: Vec<_> = (1..=state_count).map(QoeState).collect();
        StateFold {
            to_folded: states.clone(),
            to_original: states,
        }
    }

    pub fn fold(&self, original: QoeState) -> QoeState {
        self.to_folded[original.zero_based()]
    }

    pub fn unfold(&self, folded: QoeState) -> QoeState {
        self.to_original[folded.zero_based()]
    }

    pub fn folded_count(&self) -> usize {
        self.to_original.len()
    }
}

/// Delay impairment `Id` for a one-way delay in milliseconds.
pub fn delay_impairment(owd_ms: f64) -> f64 {
    let knee = (owd_ms - DELAY_KNEE_MS).max(0.0);
    0.024 * owd_ms + 0.11 * knee
}

/// Effective equipment impairment `Ie_eff` for random loss.
pub fn effective_equipment_impairment(loss_fraction: f64, codec: &CodecProfile) -> f64 {
    let ie = codec.equipment_impairment;
    if loss_fraction <= 0.0 {
        return ie;
    }
    ie + (95.0 - ie) * loss_fraction / (loss_fraction + codec.loss_robustness)
}

pub fn r_factor(owd_s: f64, loss_fraction: f64, codec: &CodecProfile) -> f64 {
    R0 - delay_impairment(owd_s * 1000.0) - effective_equipment_impairment(loss_fraction, codec)
}

pub fn mos_from_r(r: f64) -> MosScore {
    if r <= 0.0 {
        MosScore::new(1.0)
    } else if r >= 100.0 {
        MosScore::new(4.5)
    } else {
        MosScore::new(1.0 + 0.035 * r + 7.0e-6 * r * (r - 60.0) * (100.0 - r))
    }
}

/// E-Model MOS for a one-way delay (seconds) and a random loss fraction.
pub fn mos_from_delay(owd_s: f64, loss_fraction: f64, codec: &CodecProfile) -> Result<MosScore> {
    if !owd_s.is_finite() || owd_s < 0.0 {
        return Err(Error::domain(format!(
            "one-way delay must be finite and >= 0, got {owd_s}"
        )));
    }
    if !(0.0..=1.0).contains(&loss_fraction) {
        return Err(Error::domain(format!(
            "loss fraction must be in [0, 1], got {loss_fraction}"
        )));
    }
    Ok(mos_from_r(r_factor(owd_s, loss_fraction, codec)))
}

/// One-way delay approximated from a round-trip time.
pub fn owd_from_rtt(rtt_s: f64) -> f64 {
    rtt_s / 2.0
}

pub fn quantize_mos(mos: MosScore, scheme: &QuantizationScheme) -> QoeState {
    let below = scheme
        .boundaries
        .iter()
        .take_while(|b| mos.value() >= **b)
        .count();
    QoeState(below + 1)
}

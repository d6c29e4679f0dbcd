use serde::{Deserialize, Serialize};

use super::{Action, HysteresisConfig, InterfaceId};
use crate::error::{Error, Result};

/// M4: move to the interface with the lowest RNL when the current one is
/// worse by more than the margin. Any undefined RNL keeps the node where it is.
pub fn m4_policy_step(
    rnl_per_interface: &[Option<f64>],
    current: InterfaceId,
    hys: &HysteresisConfig,
) -> Action {
    let stay = Action::stay(current);
    let Some(values) = rnl_per_interface
        .iter()
        .copied()
        .collect::<Option<Vec<f64>>>()
    else {
        return stay;
    };
    let Some(&here) = values.get(current.index()) else {
        return stay;
    };
    let (best, low) =
        values
            .iter()
            .copied()
            .enumerate()
            .fold((current.index(), here), |acc, (i, v)| {
                if v < acc.1 {
                    (i, v)
                } else {
                    acc
                }
            });
    if best != current.index() && here - low > hys.margin {
        Action::select(best)
    } else {
        stay
    }
}

/// Per-interface inputs of the weighted QoS score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QosInputs {
    pub bandwidth: f64,
    pub delay: f64,
    pub jitter: f64,
    pub loss: f64,
}

impl QosInputs {
    pub fn delay_only(delay: f64) -> Self {
        QosInputs {
            bandwidth: 0.0,
            delay,
            jitter: 0.0,
            loss: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QosWeights {
    pub w_b: f64,
    pub w_d: f64,
    pub w_jit: f64,
    pub w_plr: f64,
}

impl Default for QosWeights {
    fn default() -> Self {
        QosWeights::delay_only()
    }
}

impl QosWeights {
    pub fn delay_only() -> Self {
        QosWeights {
            w_b: 0.0,
            w_d: 1.0,
            w_jit: 0.0,
            w_plr: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let w = [self.w_b, self.w_d, self.w_jit, self.w_plr];
        if w.iter().any(|x| !(*x >= 0.0)) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(
                "qos weights",
                "weights must be >= 0 and sum to 1",
            ));
        }
        Ok(())
    }

    /// `w_B*B + w_D/D + w_JIT/JIT + w_PLR/PLR`; terms with zero weight are
    /// skipped.
    pub fn score(&self, x: &QosInputs) -> Result<f64> {
        let mut s = self.w_b * x.bandwidth;
        for (w, v, name) in [
            (self.w_d, x.delay, "delay"),
            (self.w_jit, x.jitter, "jitter"),
            (self.w_plr, x.loss, "loss"),
        ] {
            if w == 0.0 {
                continue;
            }
            if !(v > 0.0) {
                return Err(Error::domain(format!(
                    "{name} must be > 0 when weighted, got {v}"
                )));
            }
            s += w / v;
        }
        Ok(s)
    }
}

/// Naive selection: highest weighted QoS score, ties keep the current
/// interface.
pub fn naive_policy_step(
    inputs: &[QosInputs],
    weights: &QosWeights,
    current: InterfaceId,
) -> Result<Action> {
    weights.validate()?;
    let scores = inputs
        .iter()
        .map(|x| weights.score(x))
        .collect::<Result<Vec<f64>>>()?;
    let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if scores.get(current.index()) == Some(&best) {
        return Ok(Action::stay(current));
    }
    match scores.iter().position(|s| *s == best) {
        Some(i) => Ok(Action::select(i)),
        None => Ok(Action::stay(current)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn m4_cases() {
        let hys = HysteresisConfig::rnl_default();
        let cell = InterfaceId::new(1);
        let a = m4_policy_step(&[Some(0.05), Some(0.30)], cell, &hys);
        assert_eq!(a, Action::select(0));
        let a = m4_policy_step(&[Some(0.2), Some(0.2)], cell, &hys);
        assert_eq!(a, Action::stay(cell));
        let a = m4_policy_step(&[Some(0.20), Some(0.21)], cell, &hys);
        assert_eq!(a, Action::stay(cell));
        let a = m4_policy_step(&[None, Some(0.9)], cell, &hys);
        assert_eq!(a, Action::stay(cell));
    }

    #[test]
    fn naive_delay_only() {
        let w = QosWeights::delay_only();
        let x = [QosInputs::delay_only(0.05), QosInputs::delay_only(0.10)];
        assert_eq!(
            naive_policy_step(&x, &w, InterfaceId::new(1)).unwrap(),
            Action::select(0)
        );
        let x = [QosInputs::delay_only(0.1), QosInputs::delay_only(0.1)];
        assert_eq!(
            naive_policy_step(&x, &w, InterfaceId::new(1)).unwrap(),
            Action::select(1)
        );
    }

    #[test]
    fn naive_full_weights() {
        let w = QosWeights {
            w_b: 0.25,
            w_d: 0.25,
            w_jit: 0.25,
            w_plr: 0.25,
        };
        let x0 = QosInputs {
            bandwidth: 2.0,
            delay: 0.1,
            jitter: 0.01,
            loss: 0.01,
        };
        let x1 = QosInputs {
            bandwidth: 1.0,
            delay: 0.05,
            jitter: 0.02,
            loss: 0.02,
        };
        assert!((w.score(&x0).unwrap() - 53.0).abs() < 1e-9);
        assert!((w.score(&x1).unwrap() - 30.25).abs() < 1e-9);
        assert_eq!(
            naive_policy_step(&[x0, x1], &w, InterfaceId::new(1)).unwrap(),
            Action::select(0)
        );
    }

    #[test]
    fn naive_zero_denominator() {
        let w = QosWeights::delay_only();
        let x = [QosInputs::delay_only(0.0), QosInputs::delay_only(0.1)];
        assert!(matches!(
            naive_policy_step(&x, &w, InterfaceId::new(0)),
            Err(Error::Domain(_))
        ));
    }
}

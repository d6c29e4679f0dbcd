//! Passive-probe QoE prediction and proactive vertical handoffs.
//!
//! A multi-homed mobile node sees one delay stream per access interface,
//! obtained from mobility signalling it already exchanges. This crate turns
//! those streams into QoE-state predictions with Gaussian hidden Markov
//! models and picks the interface to attach to with tabular Q-learning,
//! alongside the baselines it is compared against.
//!
//! | module | what lives there |
//! |--------|------------------|
//! | [`qoe`] | E-Model MOS from delay and loss, MOS quantization |
//! | [`hmm`] | Gaussian HMM filtering, EM training, cross-validation |
//! | [`probing`] | probe aggregation, RNL load metric, signalling overhead |
//! | [`policies`] | reward, Q-learning, hysteresis, M4 / naive / oracle policies, value iteration |
//! | [`netsim`] | two-interface discrete-time channel simulator |
//! | [`trace_io`] | CSV delay traces |
//! | [`harness`] | experiment drivers behind the `handoff-lab` binary |
//!
//! The runnable programs under `examples/` walk through each capability.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod harness;
pub mod hmm;
pub mod netsim;
pub mod policies;
pub mod probing;
pub mod qoe;
pub mod trace_io;

pub use error::{Error, Result};

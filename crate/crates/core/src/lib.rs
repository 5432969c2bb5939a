//! Closed-loop simulator of a spike-input extreme learning machine decoder
//! driving a discrete-command target-reaching task.
//!
//! Pipeline per control tick: [`frontend`] (synthetic subject, spike
//! detection) → [`features`] (window counts) → [`elm`] (hidden layer,
//! readout, argmax) → [`task`] (avatar step). [`engine`] runs sessions and the
//! training paradigm, [`metrics`] computes benchmark statistics.

// `!(x >= 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod elm;
pub mod engine;
pub mod error;
pub mod features;
pub mod frame;
pub mod frontend;
pub mod metrics;
pub mod seed;
pub mod task;

pub use error::{Error, Result};
pub use task::Command;

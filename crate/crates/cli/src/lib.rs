//! Command-line front end and live service for the `neuroloop` simulator.

pub mod args;
pub mod commands;
pub mod service;

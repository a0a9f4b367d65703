//! Counting processes with stochastic intensities, their Doléans-Dade
//! likelihood weights, and Monte Carlo tools built on the resulting change of
//! measure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod criteria;
pub mod error;
pub mod intensity;
pub mod likelihood;
pub mod model;
pub mod report;
pub mod rng;
pub mod runner;
pub mod simulate;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};

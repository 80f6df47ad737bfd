//! Simulation and analysis of Cucker–Smale flocking with delay and
//! multiplicative noise.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod config;
pub mod engine;
pub mod error;
pub mod laplacian;
pub mod models;
pub mod output;
pub mod sweep;

pub use error::{Error, Result};

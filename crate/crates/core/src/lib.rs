//! Self-normalized partial sums of regularly varying time series.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cadlag;
pub mod config;
pub mod error;
pub mod inference;
pub mod lab;
pub mod models;
pub mod partial_sums;
pub mod quad;
pub mod report;
pub mod seeds;
pub mod stable;

pub use error::{Error, Result};

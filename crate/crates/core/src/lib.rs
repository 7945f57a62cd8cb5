//! Simulator and analysis toolkit for a multi-resonator frequency-comb
//! microwave memory.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod model;
pub mod optimizer;
pub mod schedule;
pub mod timebin;

pub use error::{Error, Result};

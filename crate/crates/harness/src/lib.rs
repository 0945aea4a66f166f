//! Command-line harness around `flexcable`: configuration, reference
//! planning, gain tables, closed-loop trials and self-checks.

// `!(x > 0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checks;
pub mod cli;
pub mod config;
pub mod error;
pub mod multi;
pub mod output;
pub mod plan;
pub mod sim;

pub use config::RunConfig;
pub use error::{HarnessError, Result};

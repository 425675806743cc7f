//! Monte Carlo checks of the bounds on synthetic data with known risks.

mod blocks;
mod coverage;
mod generator;

pub use blocks::{independent_blocks_redraw, original_blocks};
pub use coverage::{
    coverage_trial, CoverageConfig, CoverageParams, CoverageReport, GridPoint, Theorem, MIN_TRIALS,
};
pub use generator::{Check, Generator, Sample, SelfTest};

//! Experiment harness for `rsma-core`: layered TOML configuration, seeded
//! parallel sweeps with CSV output, gradient benchmarks and an invariant
//! self-check.

pub mod bench;
pub mod check;
pub mod config;
pub mod experiment;

use std::time::Instant;

/// Wall clock for the solver's block timings.
#[derive(Debug, Clone, Copy)]
pub struct InstantClock(Instant);

impl Default for InstantClock {
    fn default() -> Self {
        InstantClock(Instant::now())
    }
}

impl rsma_core::solver::Clock for InstantClock {
    fn now(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

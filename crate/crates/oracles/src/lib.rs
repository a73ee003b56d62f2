//! Slow reference computations for the test suites.
//!
//! Every routine here re-evaluates rates and surrogates from their
//! definitions with its own dense arithmetic and shares no numerical code
//! with the solver beyond plain data types.

pub mod beamforming;
pub mod dense;
pub mod fixtures;
pub mod gradient;
pub mod phase_grid;
pub mod surrogate;

//! Sum-rate maximization for a rate-splitting (RSMA) downlink whose base
//! station carries movable antennas and is assisted by a reconfigurable
//! intelligent surface (RIS).
//!
//! The crate is `no_std` (it needs `alloc`). Every block of the alternating
//! optimization is closed form or first order; no external convex solver is
//! involved:
//!
//! * [`channel`] samples propagation scenarios and assembles the field-response
//!   channel for given antenna positions and RIS phases.
//! * [`rates`] evaluates SINRs, rates and the common-rate split.
//! * [`fp`] holds the fractional-programming surrogates and their auxiliary
//!   variables.
//! * [`beamformer`] solves the beamforming block through its KKT system and a
//!   line search on the dual.
//! * [`ris`] updates the RIS phases by dual ascent over a majorize-minimize
//!   surrogate.
//! * [`ma`] moves the antennas by projected gradient ascent with step halving.
//! * [`solver`] runs the outer alternating loop and the baseline modes.
#![no_std]
#![deny(unsafe_code)]

extern crate alloc;

pub mod beamformer;
pub mod channel;
pub mod config;
mod error;
pub mod fp;
pub mod linalg;
pub mod ma;
pub mod rates;
pub mod ris;
pub mod seed;
pub mod solver;

pub use error::Error;
pub use linalg::{CMat, CVec, Complex64};

pub type Result<T> = core::result::Result<T, Error>;

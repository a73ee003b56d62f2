//! Static system description: dimensions, budgets, geometry and fading
//! parameters.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const DEFAULT_CARRIER_HZ: f64 = 2.4e9;

/// Converts a power level in dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

/// Planar positions of the base station, the RIS and the user drop region.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub bs: [f64; 2],
    pub ris: [f64; 2],
    /// Users are dropped uniformly in `user_x × user_y` (meters).
    pub user_x: [f64; 2],
    pub user_y: [f64; 2],
}

impl Default for Geometry {
    fn default() -> Self {
        Geometry {
            bs: [0.0, 0.0],
            ris: [12.0, 16.0],
            user_x: [20.0, 40.0],
            user_y: [-20.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// Movable antennas at the base station (M).
    pub antennas: usize,
    /// Single-antenna users (K).
    pub users: usize,
    /// RIS reflecting elements (N).
    pub ris_elements: usize,
    /// Transmit-side propagation paths (L_t).
    pub paths_tx: usize,
    /// Receive-side propagation paths at the RIS (L_r).
    pub paths_rx: usize,
    /// Transmit power budget in watts.
    pub power: f64,
    /// Noise power per user in watts.
    pub noise_power: Vec<f64>,
    pub wavelength: f64,
    /// Movement region of every antenna, in meters.
    pub x_min: f64,
    pub x_max: f64,
    /// Minimum spacing between any two antennas, in meters.
    pub min_spacing: f64,
    pub rician_factor: f64,
    /// Path-loss exponent of the base station to user links.
    pub pathloss_bs_user: f64,
    /// Path-loss exponent of the base station to RIS link.
    pub pathloss_bs_ris: f64,
    /// Path-loss exponent of the RIS to user links.
    pub pathloss_ris_user: f64,
    pub reference_distance: f64,
    pub geometry: Geometry,
    pub seed: u64,
}

impl Default for SystemConfig {
    /// Two users, eight antennas, a 16-element RIS, four paths per link,
    /// 30 dBm budget and -80 dBm noise at 2.4 GHz.
    fn default() -> Self {
        let wavelength = SPEED_OF_LIGHT / DEFAULT_CARRIER_HZ;
        let users = 2;
        SystemConfig {
            antennas: 8,
            users,
            ris_elements: 16,
            paths_tx: 4,
            paths_rx: 4,
            power: dbm_to_watts(30.0),
            noise_power: vec![dbm_to_watts(-80.0); users],
            wavelength,
            x_min: -6.0 * wavelength,
            x_max: 6.0 * wavelength,
            min_spacing: 0.5 * wavelength,
            rician_factor: 0.5,
            pathloss_bs_user: 3.5,
            pathloss_bs_ris: 2.5,
            pathloss_ris_user: 2.5,
            reference_distance: 1.0,
            geometry: Geometry::default(),
            seed: 0,
        }
    }
}

impl SystemConfig {
    /// Number of paths shared by every fading matrix (`L = L_t = L_r`).
    pub fn paths(&self) -> usize {
        self.paths_tx
    }

    /// Changes the user count, keeping the per-user noise level of user 0.
    pub fn with_users(mut self, users: usize) -> Self {
        let noise = self.noise_power.first().copied().unwrap_or(dbm_to_watts(-80.0));
        self.users = users;
        self.noise_power = vec![noise; users];
        self
    }

    pub fn with_power_dbm(mut self, dbm: f64) -> Self {
        self.power = dbm_to_watts(dbm);
        self
    }

    /// Rescales the movement region and spacing after a wavelength change,
    /// keeping them at -6λ..6λ and λ/2.
    pub fn with_wavelength(mut self, wavelength: f64) -> Self {
        self.wavelength = wavelength;
        self.x_min = -6.0 * wavelength;
        self.x_max = 6.0 * wavelength;
        self.min_spacing = 0.5 * wavelength;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.antennas == 0 {
            return Err(Error::InvalidConfig("antennas must be at least 1"));
        }
        if self.users == 0 {
            return Err(Error::InvalidConfig("users must be at least 1"));
        }
        if self.ris_elements == 0 {
            return Err(Error::InvalidConfig("ris_elements must be at least 1"));
        }
        if self.paths_tx == 0 || self.paths_rx == 0 {
            return Err(Error::InvalidConfig("path counts must be at least 1"));
        }
        if self.paths_tx != self.paths_rx {
            return Err(Error::InvalidConfig(
                "paths_tx must equal paths_rx (fading matrices are square diagonal)",
            ));
        }
        if !(self.power > 0.0 && self.power.is_finite()) {
            return Err(Error::InvalidConfig("power must be positive"));
        }
        if self.noise_power.len() != self.users {
            return Err(Error::InvalidConfig("noise_power must hold one value per user"));
        }
        if self.noise_power.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidConfig("every noise power must be positive"));
        }
        if !(self.wavelength > 0.0 && self.wavelength.is_finite()) {
            return Err(Error::InvalidConfig("wavelength must be positive"));
        }
        if !(self.x_min.is_finite() && self.x_max.is_finite() && self.x_min <= self.x_max) {
            return Err(Error::InvalidConfig("x_min must not exceed x_max"));
        }
        if !(self.min_spacing >= 0.0 && self.min_spacing.is_finite()) {
            return Err(Error::InvalidConfig("min_spacing must be non-negative"));
        }
        let needed = (self.antennas - 1) as f64 * self.min_spacing;
        if self.x_max - self.x_min < needed {
            return Err(Error::InvalidConfig(
                "x_max - x_min >= (antennas - 1) * min_spacing (no feasible antenna placement)",
            ));
        }
        if !(self.rician_factor >= 0.0 && self.rician_factor.is_finite()) {
            return Err(Error::InvalidConfig("rician_factor must be non-negative"));
        }
        if !(self.reference_distance > 0.0) {
            return Err(Error::InvalidConfig("reference_distance must be positive"));
        }
        let g = &self.geometry;
        if g.user_x[0] > g.user_x[1] || g.user_y[0] > g.user_y[1] {
            return Err(Error::InvalidConfig("user drop region bounds are reversed"));
        }
        Ok(())
    }
}

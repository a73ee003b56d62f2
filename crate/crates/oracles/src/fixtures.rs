//! Random feasible states for the test suites.

use rsma_core::channel::{sample_scenario, AntennaPositions, ChannelRealization, CompositeChannel};
use rsma_core::config::SystemConfig;
use rsma_core::rates::BeamformingMatrix;
use rsma_core::solver::random_state;
use rsma_core::CVec;

/// A drawn scenario with noise normalized to one, plus a random feasible
/// point `(x, φ, W)` with `tr(W^H W) = P_T`.
#[derive(Debug, Clone)]
pub struct Instance {
    pub cfg: SystemConfig,
    pub real: ChannelRealization,
    pub x: AntennaPositions,
    pub phi: CVec,
    pub w: BeamformingMatrix,
    pub noise: Vec<f64>,
}

impl Instance {
    pub fn channel(&self) -> CompositeChannel {
        self.real.assemble(self.x.as_slice(), &self.phi).expect("consistent dimensions")
    }
}

pub fn random_instance(cfg: &SystemConfig, seed: u64) -> Instance {
    let cfg = SystemConfig { seed, ..cfg.clone() };
    let real = sample_scenario(&cfg).expect("valid config").normalized(&cfg.noise_power);
    let state = random_state(&cfg, seed ^ 0x5EED_F17E);
    let noise = vec![1.0; cfg.users];
    Instance { cfg, real, x: state.x, phi: state.phi, w: state.w, noise }
}

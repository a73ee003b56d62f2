use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A [`SystemConfig`](crate::config::SystemConfig) invariant does not hold.
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),

    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// The KKT system of a beamforming block could not be factorized.
    #[error("singular linear system in the {block} beamforming block")]
    SingularSystem { block: &'static str },
}

use thiserror::Error;

/// Errors surfaced by the samplers and the engine.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    /// Every particle carries zero weight; the run cannot continue.
    #[error("all particle weights are zero")]
    AllWeightsZero,
    /// A proposal distribution produced a non-finite state.
    #[error("proposal produced a non-finite state")]
    DegenerateProposal,
    /// A configuration value is out of range or inconsistent.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;

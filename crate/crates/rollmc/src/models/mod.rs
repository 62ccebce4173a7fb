//! Concrete state space models.

pub mod linear_gaussian;
pub mod rsv;

pub use linear_gaussian::{LgModel, LgProposal, LgTheta};
pub use rsv::{RsvModel, RsvObs, RsvTheta};

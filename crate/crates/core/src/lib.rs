//! Quenched and annealed large-deviation quantities for random walks in
//! i.i.d. random environments restricted to a boundary face of the l1 ball.
//!
//! Numerical code is generic over [`scalar::Real`] (`f32`, `f64`); the
//! crate root re-exports `f64` aliases for the common types.

pub mod cli;
pub mod environment;
pub mod error;
pub mod exact_kernel;
pub mod geometry;
pub mod phase_scan;
pub mod rate_functions;
pub mod rng;
pub mod scalar;
pub mod stochastics;

pub use error::{Error, Result};
pub use geometry::{Direction, Face, LatticeSite};
pub use scalar::Real;

pub type BoundaryPoint = geometry::BoundaryPoint<f64>;
pub type ProjectedVector = geometry::ProjectedVector<f64>;
pub type JumpLaw = environment::JumpLaw<f64>;
pub type EtaLaw = environment::EtaLaw<f64>;
pub type DisorderSpec = environment::DisorderSpec<f64>;
pub type EnvironmentWindow = environment::EnvironmentWindow<f64>;
pub type DpResult = exact_kernel::DpResult<f64>;
pub type TiltResult = rate_functions::TiltResult<f64>;
pub type FaceSummary = rate_functions::FaceSummary<f64>;
pub type TiltedLaw = stochastics::TiltedLaw<f64>;
pub type GreenResult = stochastics::GreenResult<f64>;
pub type ScanResult = phase_scan::ScanResult<f64>;
pub type EpsCEstimate = phase_scan::EpsCEstimate<f64>;

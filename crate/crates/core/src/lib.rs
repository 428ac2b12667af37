//! Simulation of continuous homodyne measurement of atomic currents in
//! Bose-Hubbard rings.

pub mod darkstate;
pub mod error;
pub mod fock;
pub mod master;
pub mod measure;
pub mod model;
pub mod operator;
pub mod oracle;
pub mod signal;
pub mod sse;
pub mod state;

pub use error::{Error, Result};
pub use fock::{build_basis, FockBasis};
pub use master::DensityMatrix;
pub use measure::{CqedParams, MeasurementChannel};
pub use model::{Boundary, ModelParams, TlsParams};
pub use operator::OperatorMatrix;
pub use sse::{Probe, SseConfig, TrajectoryRecord};
pub use state::StateVector;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

//! Fast quasi-adiabatic (FAQUAD) control design.
//!
//! A single control `lambda(t)` of a Hamiltonian family `H(lambda)` is
//! scheduled so that the adiabaticity parameter of one avoided crossing is
//! constant over the whole process. The crate designs such schedules (and
//! the local/uniform adiabatic and linear references), integrates the
//! resulting Schrodinger dynamics, evaluates first-order adiabatic
//! perturbation theory, and handles the many-body Tonks-Girardeau ring.

pub mod dynamics;
pub mod error;
pub mod model;
pub mod numeric;
pub mod perturbation;
pub mod protocol;
pub mod spectral;
pub mod tg;

pub use error::{Error, Result};
pub use model::{ControlledHamiltonian, ModelKind, ModelSpec};
pub use protocol::{NormalizedTrajectory, ProtocolKind, TimedControl};
pub use spectral::LevelPair;

//! Measurement selection for estimating the infection and recovery rates of a
//! discrete-time networked SIR model.

pub mod bayes;
pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod info;
pub mod io;
pub mod measurement;
pub mod network;
pub mod oracle;
pub mod pems;
pub mod pims;

pub use dynamics::{StateKind, Theta};
pub use error::{Error, Result};
pub use info::InfoMatrix;
pub use measurement::MeasurementId;
pub use network::{EpidemicNetwork, InitialCondition};

//! Security analysis of polarization-encoded QKD protocols with M linear
//! polarizations and bit separation Θ = πL/M (SARG04 and generalizations).
//!
//! The crate is organized bottom-up:
//!
//! * [`operators`]: explicit measurement operators and their block forms,
//! * [`source`]: photon-number statistics and angular-momentum weights,
//! * [`channel`]: honest-channel statistics and the loss-constraint budget,
//! * [`phase_bound`]: maximization of the phase-error bound,
//! * [`keyrate`]: key rates, intensity optimization and noise thresholds,
//! * [`montecarlo`]: event-level simulation of the honest protocol.

pub mod channel;
pub mod envelope;
pub mod error;
pub mod keyrate;
pub mod linalg;
pub mod lp;
pub mod montecarlo;
pub mod operators;
pub mod phase_bound;
pub mod protocol;
pub mod source;

mod optimize;

pub use error::{Error, Result};
pub use protocol::ProtocolParams;

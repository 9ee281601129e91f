//! Sum received-power maximization for RIS-aided multiuser MISO wireless
//! power transfer with a constant-envelope transmitter.
//!
//! * [`model`] holds the channel model, the beamformer and RIS
//!   parameterizations and the received-power objective.
//! * [`solver`] is the alternating SCA/ADMM optimizer.
//! * [`channel`] generates seeded two-RIS deployment scenarios.
//! * [`oracle`] contains brute-force references and the max-min power
//!   estimate used to set minimum-power requirements.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod error;
pub mod model;
pub mod oracle;
pub mod solver;

pub use error::{Error, Result};
pub use model::{
    build_ris_quadratic, check_feasibility, compose_channel, received_powers, sca_bound_x,
    total_power, CMatrix, CVector, ChannelSet, PowerConstraints, RisPhases, RisQuadratic,
    TxBeamformer,
};
pub use solver::{spmc_sca_admm, SolveResult, SolverConfig};

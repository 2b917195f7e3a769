//! Counterdiabatic-inspired Floquet engineering of spin-system state
//! preparation: operators, models, schedules, gauge potentials, propagation,
//! optimization and the end-to-end experiments.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agp;
pub mod dynamics;
pub mod error;
pub mod models;
pub mod operators;
pub mod optimize;
pub mod protocols;
pub mod schedules;

pub use error::{Error, Result};

//! End-to-end experiments: two-qubit state preparation, Ising annealing,
//! gauge-potential learning and the exact counterdiabatic reference.

mod config;
mod ising;
mod learning;
mod state_prep;

pub use config::*;
pub use ising::*;
pub use learning::*;
pub use state_prep::*;

use crate::error::{Error, Result};
use crate::operators::{eigendecompose, OperatorMatrix, QuantumState};

/// Ground state and energy of `h`; a degenerate ground space is an error.
pub fn ground_state(h: &OperatorMatrix) -> Result<(QuantumState, f64)> {
    let eig = eigendecompose(h)?;
    if eig.dim() > 1 {
        let gap = eig.energies[1] - eig.energies[0];
        if gap <= 1e-9 * eig.spectral_norm().max(1.0) {
            return Err(Error::DegenerateGroundState { gap });
        }
    }
    Ok((eig.state(0), eig.energies[0]))
}

/// Lowest eigenvalue of `h`.
pub fn ground_energy(h: &OperatorMatrix) -> Result<f64> {
    Ok(eigendecompose(h)?.energies[0])
}

//! Time-dependent Schrödinger propagation and trajectory observables.

mod hamiltonian;
mod integrate;
mod trajectory;

pub use hamiltonian::*;
pub use integrate::*;
pub use trajectory::*;

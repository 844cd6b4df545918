//! Dense complex linear algebra over qubit registers.

mod layout;
mod matrix;
mod random;
mod state;

pub use layout::{partial_trace, reduced_density, Subsystem, SubsystemLayout};
pub use matrix::{kron, ComplexMatrix};
pub use random::{derive_seed, haar_su2, haar_unitary, random_state, RandomSource};
pub use state::StateVector;
pub(crate) use state::qubits_for_dim;

use crate::{Error, Result};

pub type C64 = num_complex::Complex64;

/// Vectorization `Σ_j (U ⊗ I)|j⟩|j⟩`, i.e. the row-major flattening of `u`.
/// The output index comes first; squared norm is `tr(U†U)` (= d for unitaries).
pub fn choi_vec(u: &ComplexMatrix) -> Result<StateVector> {
    if !u.is_square() {
        return Err(Error::NotSquare { rows: u.rows(), cols: u.cols() });
    }
    qubits_for_dim(u.rows())?;
    StateVector::from_amplitudes(u.data().to_vec())
}

//! Dense complex linear algebra sized for truncated Fock spaces.

mod eig;
mod matrix;

pub use eig::{eig_hermitian, eigvals_hermitian, is_psd_within, psd_sqrt};
pub use matrix::{
    annihilation, creation, number_op, pauli_x, pauli_y, pauli_z, ComplexMatrix, HilbertLayout,
    C64, I, ONE, ZERO,
};

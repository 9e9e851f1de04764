//! Grids, states, block operators, momentum operators and matrix functions.

pub mod grid;
pub mod linop;
pub mod momentum;
pub mod spectral;
pub mod state;

pub use grid::Grid;
pub use linop::{anticommutator, check_pseudo_unitary, pseudo_hermitian_residual, commutator, Block, LinearOperator, PauliBlock};
pub use momentum::{momentum_matrix, momentum_operator, plane_wave};
pub use spectral::{matrix_function, Floor, Spectral, SpectralOptions};
pub use state::{l2_inner, pseudo_inner, TwoComponentState};

//! Truncated Fock-space linear algebra: ladder and displacement operators,
//! coherent states, expectation values, g2(0), Wigner functions and the
//! weighted moment loss.

mod observables;
mod operator;
mod state;
mod wigner;

pub use observables::{
    expectation, g2_zero, moment_loss, MomentMismatch, MomentWeights, G2_MEAN_FLOOR,
};
pub use operator::{
    displacement_operator, ladder_operators, number_operator, parity_operator, Operator,
};
pub use state::{
    coherent_state, lab_frame_dim, Checked, QuantumState, StateTolerances, DISPLACED_FRAME_DIM,
};
pub use wigner::{wigner, PhaseSpaceGrid, WignerKernel};

pub(crate) use operator::check_dim;
pub(crate) use wigner::linspace;

//! Hamiltonians, drive schedules and Lindblad master-equation integration.

mod evolve;
mod hamiltonian;
mod integrator;
mod schedule;

pub use evolve::{evolve, evolve_partial, Checkpoint, EvolveOptions, Record, Trajectory};
pub use hamiltonian::{build_blockade_hamiltonian, build_lab_hamiltonian, HamiltonianTerms};
pub use integrator::Stepping;
pub(crate) use integrator::Dopri5;
pub use schedule::{DriveSchedule, Frame, Phase, Segment, CONTINUITY_TOL};

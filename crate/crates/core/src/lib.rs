//! Numerical toolkit for scattering in the nonlinear Lamb system: a string
//! point-coupled to a nonlinear oscillator at the origin.
//!
//! The crate covers the two directions of the scattering problem:
//!
//! * **forward** — [`scattering::forward_solve`] evolves finite-energy
//!   initial data through the d'Alembert reduction and
//!   [`scattering::extract_scattering`] reads off the limit stationary state
//!   and the asymptotic free-wave state;
//! * **inverse** — [`incoming::construct_incoming`] builds, at a hyperbolic
//!   stationary state, the incoming trajectory realizing a prescribed
//!   asymptotic state (dichotomy projectors, tail fixed point, backward
//!   energy-guarded continuation), and
//!   [`scattering::reconstruct_initial`] turns it into initial data.
//!
//! [`incoming::run_counterexample`] reproduces the nonhyperbolic
//! counterexample dynamics where no incoming trajectory exists.

pub mod error;
pub mod greenop;
pub mod grid;
pub mod incoming;
pub mod model;
pub mod scattering;
pub mod spaces;
pub mod spectral;

pub use error::{Error, Result};
pub use greenop::{apply_R, GreenKernel};
pub use grid::GridFunction;
pub use incoming::{
    backward_continue, choose_T, construct_incoming, decompose_force, run_counterexample,
    solve_tail, CounterexampleKind, CounterexampleReport, IncomingSolution, LocalForce,
    SolverConfig, TailCut, TailInit, TailSolve,
};
pub use model::ForceModel;
pub use scattering::{
    extract_scattering, forward_solve, free_field, incoming_wave, reconstruct_initial,
    remainder_norm, ForwardRun, ScatteringData,
};
pub use spaces::{
    build_S, energy_norm, validate_asymptotic_state, AsymptoticState, EnergyState, Membership,
    StationaryState, Trajectory,
};
pub use spectral::{fundamental_solution, hyperbolic_split, matexp, HyperbolicSplit};

//! Stationary bioconvection chamber solver with an explicit solvability
//! certificate.
//!
//! The crate has two independent halves that meet in the verification
//! module:
//!
//! * a staggered-grid finite-difference solver for the coupled
//!   velocity/pressure/bacteria/oxygen system on a rectangular chamber,
//!   driven by an outer Picard iteration over an Oseen solve and two
//!   convection-diffusion solves;
//! * a certificate evaluator that computes the explicit domain constants,
//!   the derived amplification factors and every existence / uniqueness
//!   hypothesis inequality, in working and extended precision.
//!
//! A converged solution can then be audited against the certified a-priori
//! bounds.

pub mod certificate;
pub mod config;
pub mod dd;
pub mod dense;
pub mod error;
pub mod fields_io;
pub mod grid;
pub mod linsolve;
pub mod model;
pub mod ops;
pub mod report;
pub mod solver;
pub mod sparse;
pub mod verify;

mod assemble;

pub use assemble::{
    apply_boundary_conditions, assemble_bacteria, assemble_oseen, assemble_oxygen,
    divergence_matrix, flatten_velocity, scalar_transport_matrix, unflatten_velocity,
    velocity_offsets, BcTarget, OxygenTopBc, SaddleSystem, ScalarSystem, StencilSystem,
};
pub use error::{Error, Result};
pub use grid::{MacGrid, ScalarField, VectorField};
pub use model::{
    dimensionless_from_physical, ChamberDomain, ConsumptionFunction, DimensionlessGroups,
    PhysicalParams, SourceData,
};
pub use solver::{FieldState, PicardHistory, SolveReport};
pub use sparse::SparseOperator;

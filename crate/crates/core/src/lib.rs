//! Rigid-sphere suspension dynamics in unbounded Stokes flow.
//!
//! The library couples three pieces:
//!
//! - pluggable mobility backends mapping per-particle forces/torques to
//!   rigid-body velocities (`mobility`): a local-drag diagonal, a pairwise
//!   Rotne-Prager-Yamakawa sum, and a spectrally-accurate boundary-integral
//!   solver for spheres built on vector spherical harmonics (`sht`, `vsh`);
//! - a per-step collision resolver (`constraint`, `cqp`) that detects near
//!   pairs, assembles the sparse collision geometry, and solves the resulting
//!   complementarity problem as a box-constrained quadratic program by
//!   Barzilai-Borwein projected gradient descent;
//! - a batch driver (`sim`) with scenario generators, CSV trajectory output,
//!   and post-hoc analyses (velocity distributions, constraint lifetimes).
//!
//! The `rotlet` module holds the continuum rotlet-disk model used to explain
//! the edge behavior of torque-driven monolayers.

pub mod constraint;
pub mod cqp;
pub mod error;
pub mod gmres;
pub mod kinematics;
pub mod math;
pub mod mobility;
pub mod neighbor;
pub mod quadrature;
pub mod rotlet;
pub mod sht;
pub mod sim;
pub mod vsh;

pub use error::SimError;
pub use kinematics::{ConfigurationVector, ForceTorqueVector, ParticleSet, VelocityVector};

/// Crate version, embedded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

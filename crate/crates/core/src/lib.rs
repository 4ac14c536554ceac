//! Kinetic transport engine and verification harness for the linearized
//! Boltzmann equation with Maxwell boundary conditions in rescaled
//! (hydrodynamic-limit) domains.
//!
//! The crate is organized around six subsystems:
//!
//! * [`geometry`] — rescaled ball and cylinder domains, boundary
//!   classification and exact ray/boundary intersection,
//! * [`trajectories`] — backwards characteristics with specular/diffuse
//!   wall interactions and the stretching-lemma experiments,
//! * [`collision`] — hard-sphere collision frequency, gain kernel,
//!   truncations and splittings, bilinear operator and projections,
//! * [`transport`] — free-transport semigroup, Duhamel mild solver,
//!   nonlinear and split fixed-point iterations,
//! * [`elliptic`] — auxiliary Poisson problem with Robin/Neumann closure
//!   on the cylinder and its reflection extension,
//! * [`report`] / [`config`] — machine-readable experiment records and
//!   run configuration.

pub mod collision;
pub mod config;
pub mod elliptic;
pub mod error;
pub mod geometry;
pub mod quad;
pub mod report;
pub mod rng;
pub mod trajectories;
pub mod transport;
pub mod vec3;

pub use error::Error;
pub use vec3::Vec3;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

//! Langevin particles and a fluctuation-dissipation preserving finite-volume
//! discretization of the Dean-Kawasaki equation on periodic Monge-gauge surfaces.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: height surfaces, the induced metric and its cell-centred samples.
//! - [`particles`]: the Euler-Maruyama particle reference.
//! - [`fvm`]: the grid solver, its assembled operators and the stability estimate.
//! - [`stats`]: streaming per-cell moments and the equilibrium reference.
//! - [`harness`]: configured experiments writing CSV run directories.

pub mod config;
pub mod error;
pub mod fvm;
pub mod geometry;
pub mod harness;
pub mod noise;
pub mod particles;
pub mod potential;
pub mod stats;

pub use error::Error;

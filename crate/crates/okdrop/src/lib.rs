//! Numerical laboratory for the droplet regime of the two-dimensional
//! Ohta-Kawasaki energy on a flat torus.
//!
//! The crate implements the screened Green's function of -Δ + κ² on the
//! torus, sharp- and diffuse-interface energies of droplet configurations,
//! the quadratic limit functional of the droplet density with its
//! closed-form minimizer, a deterministic recovery construction realizing
//! a target density with equal optimal disks, and gradient-descent
//! relaxation of droplet ensembles.

pub mod diffuse;
pub mod droplet_model;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod limit_energy;
pub mod minimizer;
pub mod recovery;
pub mod sharp_energy;
pub mod special;
pub mod torus;
pub mod torus_green;

pub use droplet_model::{DensityMeasure, Droplet, DropletConfig, Shape};
pub use error::{OkError, Result};
pub use sharp_energy::EnergyBreakdown;
pub use torus::TorusParams;
pub use torus_green::{build_green, green_selftest, h_kernel_at, GreenEvaluator};

//! Spectral signatures of conducting permeable objects.
//!
//! Small highly conducting objects respond to a time-harmonic background
//! field through a complex symmetric rank-2 polarizability tensor whose
//! frequency dependence is a sum of simple rational modes. This crate
//! synthesizes those spectral signatures from modal descriptions, extracts
//! rotation-invariant features from them, recovers the tensor from induced
//! voltage measurements, inverts dominant eigenvalues for an equivalent
//! ellipsoid, and classifies objects from invariant feature vectors.
//!
//! Modules:
//! - [`tensor`]: symmetric rank-2 tensor algebra, eigensolver, invariants.
//! - [`quad`]: Gauss-Legendre and adaptive Gauss-Kronrod quadrature.
//! - [`ellipsoid`]: demagnetization factors, diagonal polarizability of
//!   ellipsoids, and recovery of an equivalent ellipsoid from eigenvalues.
//! - [`interp`]: monotone piecewise-cubic interpolation.
//! - [`spectral`]: modal models, signature synthesis, frequency limits and
//!   snapshot interpolation.
//! - [`measure`]: induced-voltage forward model and tensor recovery.
//! - [`features`]: invariant feature vectors, datasets and k-NN
//!   classification.

pub mod error;
pub mod tensor;
pub mod quad;
pub mod ellipsoid;
pub mod interp;
pub mod spectral;
pub mod measure;
pub mod features;

pub use error::{Error, Result};

//! Hybrid quantum–classical binary classifier for volumetric images.
//!
//! The crate provides the full pipeline as a library:
//!
//! * [`statevector`] — dense simulation of small qubit registers with a
//!   fixed H/RY/RZ/CX/ZZ gate set.
//! * [`circuits`] — the data-encoding feature map and the trainable
//!   RY/CX ansatz, as plain gate lists.
//! * [`qlayer`] — the quantum classification head: encode, entangle,
//!   read out a probability, differentiate with parameter shifts.
//! * [`rng`] — a small, portable, seedable generator so every run is
//!   reproducible across platforms.
//! * [`error`] — the crate-wide error type.
//!
//! All numerics are f64 end to end; file formats that store f32 quantize
//! at the boundary.

pub mod checkpoint;
pub mod circuits;
pub mod cnn3d;
pub mod data;
pub mod error;
pub mod metrics;
pub mod model;
pub mod qlayer;
pub mod rng;
pub mod statevector;
pub mod train;
pub mod tensor;

pub use error::{Error, Result};

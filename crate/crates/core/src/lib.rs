//! Simulation of a digital multi-beam mm-wave array signal chain.
//!
//! The crate covers the pieces needed to reproduce a lens + focal-plane-array
//! receiver at 28 GHz and a fully-digital 4-channel transceiver at 60 GHz:
//!
//! - [`array`]: geometry, steering vectors, array factors and beampatterns
//! - [`channel`]: clustered (Saleh-Valenzuela) channel synthesis and application
//! - [`beamformer`]: hybrid precoding/combining and digital beam banks
//! - [`lens`]: lens directivity, feed-to-beam mapping and lenslet cascades
//! - [`rf`]: RF chain impairments, quantization, LO plan and calibration
//! - [`modem`]: QPSK subchannel link and the beam-by-stream decode grid
//!
//! Complex sample blocks are `ndarray::Array2<Complex64>` with one row per
//! antenna element (or chain / beam / stream) and one column per time sample.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod array;
pub mod beamformer;
pub mod channel;
mod error;
mod json;
pub mod lens;
pub mod modem;
pub mod rf;
mod special;

pub use error::{Error, Result};

use ndarray::Array2;
use num_complex::Complex64;

/// Dense complex matrix, rows × columns.
pub type CMatrix = Array2<Complex64>;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

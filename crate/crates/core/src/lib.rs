//! Offline gait-cycle segmentation and gait-signature extraction for
//! body-worn accelerometer recordings.
//!
//! The pipeline runs: band-pass filtered acceleration norm ([`preprocess`]),
//! threshold-based initial cycle detection ([`detect`]), boundary refinement
//! by minimizing cross-cycle variance on a normalized time grid
//! ([`optimize`], [`signature`]), a truncated Fourier-series fit of the
//! averaged signature ([`fourier`]) and correlation-based classification
//! ([`classify`]). [`synth`] generates recordings with known ground truth.
//!
//! All numerical code is generic over [`Real`] (`f32`/`f64`); the `*64`
//! aliases below name the double-precision instantiations used by the CLI.

// `!(x > 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod artifact;
pub mod classify;
pub mod config;
pub mod detect;
pub mod error;
pub mod fourier;
pub mod io;
pub mod optimize;
pub mod pipeline;
pub mod preprocess;
pub mod scalar;
pub mod signature;
pub mod synth;

pub use error::{Error, Result};
pub use scalar::Real;

pub type ImuRecording64 = io::ImuRecording<f64>;
pub type ScalarSignal64 = preprocess::ScalarSignal<f64>;
pub type Segmentation64 = detect::Segmentation<f64>;
pub type Signature64 = signature::Signature<f64>;
pub type FourierModel64 = fourier::FourierModel<f64>;

pub type ImuRecording32 = io::ImuRecording<f32>;
pub type ScalarSignal32 = preprocess::ScalarSignal<f32>;
pub type Segmentation32 = detect::Segmentation<f32>;
pub type Signature32 = signature::Signature<f32>;
pub type FourierModel32 = fourier::FourierModel<f32>;

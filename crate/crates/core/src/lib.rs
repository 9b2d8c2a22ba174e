//! Data-aided phase-noise tracking for receivers with 1-bit quantization
//! and temporal oversampling.
//!
//! The crate covers the whole simulation chain: pilot/data framing with
//! run-length-limited data ([`framing`]), pulse shaping ([`waveform`]),
//! phase noise, AWGN and the 1-bit ADC ([`impairments`]), LS / EM /
//! Fisher-scoring pilot-block estimators ([`estimators`]), Kalman and RTS
//! interpolation ([`tracking`]) and a Monte Carlo harness ([`experiments`]).

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimators;
pub mod experiments;
pub mod framing;
pub mod impairments;
pub mod rng;
pub mod tracking;
pub mod waveform;

pub use error::{Error, Result};

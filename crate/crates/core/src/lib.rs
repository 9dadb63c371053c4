//! Learning on complex-valued data with real-valued networks.
//!
//! The crate provides a small reverse-mode autodiff engine ([`autodiff`]),
//! Fourier and Hilbert transforms ([`signal`]), four architectures
//! ([`models`]): RVNN, CVNN, Steinmetz and analytic. It also has their losses and the
//! Hilbert consistency penalty ([`losses`]), Adam ([`optim`]), datasets
//! ([`data`]), diagnostics ([`diagnostics`]) and an experiment harness
//! ([`harness`]).

pub mod autodiff;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod losses;
pub mod models;
pub mod optim;
pub mod rng;
pub mod signal;
pub mod tensor;

pub use error::{Error, Result};

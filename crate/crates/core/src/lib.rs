//! High-rate performance bound for LSF vector quantization under a
//! Dirichlet mixture source model.
//!
//! The pipeline is: audio → LPC ([`signal`]) → LSF / ΔLSF ([`lsf`]) →
//! Dirichlet mixture fit ([`dmm`], built on [`dirichlet`]) → distortion-rate
//! curve and minimum transparent rate ([`bound`]).

// `!(x > y)` is used deliberately so that NaN takes the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bound;
pub mod dirichlet;
pub mod dmm;
pub mod error;
pub mod formats;
pub mod lsf;
pub mod pipeline;
pub mod signal;

pub use error::{Error, Result};

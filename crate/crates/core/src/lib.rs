//! Label-free story-level damage classification by physics-weighted,
//! multi-source adversarial domain adaptation.
//!
//! The crate covers the whole pipeline: synthetic seismic campaigns on
//! bilinear shear buildings ([`sim`]), feature/label extraction ([`dataset`]),
//! Gaussian-kernel source weights ([`weights`]), the convolutional-recurrent
//! network with hand-written reverse-mode gradients ([`net`]), adversarial
//! training ([`train`]), evaluation ([`eval`]) and the command-line
//! orchestration ([`cli`]).

pub mod blob;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod net;
pub mod sim;
pub mod train;
pub mod weights;

pub use error::{Error, Result};

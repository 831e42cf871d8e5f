//! Gaussian quantum channels at the covariance-matrix level.
//!
//! A channel acts on Gaussian states `(m, S)` as `m -> X^T m + w`,
//! `S -> X^T S X + Y`; the pair `(X, Y)` defines a valid channel exactly
//! when `Y - i(J - X^T J X) >= 0`. This crate certifies that condition,
//! builds explicit symplectic Stinespring dilations realizing valid
//! channels, decides implementability by passive linear optics (multiport
//! interferometers), and evolves Gaussian states.
//!
//! Everything is immutable plain data and every operation is a pure
//! function of its inputs, so values are freely shared across threads;
//! randomized procedures take explicit seeds and derive per-sample seeds
//! deterministically.

pub mod channel;
pub mod cli;
pub mod dilation;
pub mod error;
pub mod interferometer;
pub mod io;
pub mod numerics;
mod paired;
pub mod states;
pub mod symplectic;

pub use channel::{ChannelParams, ValidityReport};
pub use dilation::DilationSpec;
pub use error::{Error, Result};
pub use interferometer::InterferometerDecision;
pub use numerics::ToleranceConfig;
pub use states::GaussianState;
pub use symplectic::{GaussianUnitary, SymplecticForm};

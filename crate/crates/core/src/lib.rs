//! Pseudospectral laboratory for the fractional-dispersion Benjamin-Ono
//! equation `u_t - |D|^alpha u_x + u u_x = 0`, `1 < alpha < 2`.
//!
//! The crate simulates the flow on a periodic box, evaluates the weighted
//! Sobolev and Fourier restriction norms of its solutions, runs the
//! Duhamel/Picard construction, and measures empirical constants for the
//! linear and bilinear estimates that control the flow.

pub mod conservation;
pub mod error;
pub mod estimates;
pub mod evolution;
pub mod formats;
pub mod harness;
pub mod norms;
pub mod spectral;

pub use error::{LabError, Result};
pub use evolution::{PicardHistory, Scheme, Trajectory};
pub use norms::{EstimateParams, SpaceTimeField};
pub use spectral::{Alpha, FrequencyGrid, SpectralField};

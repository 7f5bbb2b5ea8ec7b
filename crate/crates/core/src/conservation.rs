//! L2 conservation and the a priori bound on `H^(0,omega)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::evolution::Trajectory;
use crate::norms::sobolev_norm;
use crate::spectral::{bump, SpectralField};

/// `max_t | ||u(t)|| - ||u(0)|| | / ||u(0)||` in L2. The reference state is
/// the one at `t = 0`, or the first stored state if `0` is not covered.
pub fn l2_drift(traj: &Trajectory) -> f64 {
    let reference = traj.initial().unwrap_or(&traj.states()[0]).l2_norm();
    let floor = reference.max(f64::MIN_POSITIVE);
    traj.states()
        .iter()
        .map(|u| (u.l2_norm() - reference).abs() / floor)
        .fold(0.0, f64::max)
}

/// `psi(xi) |xi|^(-omega) u_hat(xi)`.
pub fn low_freq_project(u: &SpectralField, omega: f64) -> Result<SpectralField> {
    if !u.has_zero_mean() {
        return Err(LabError::NonzeroMean(u.zero_mode().norm()));
    }
    Ok(u.map_coeffs(|xi, c| {
        if xi == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            c * (bump(xi) * xi.abs().powf(-omega))
        }
    }))
}

/// Forcing of the projected equation, `-(i/2) psi(xi) xi |xi|^(-omega) F(u^2)`.
///
/// The square is formed on the grid without dealiasing; only `|xi| <= 2`
/// survives the cutoff.
pub fn low_freq_forcing(u: &SpectralField, omega: f64) -> SpectralField {
    let sq: Vec<Complex64> = u.to_physical().into_iter().map(|z| z * z).collect();
    let w = SpectralField::from_physical(*u.grid(), &sq).expect("length matches grid");
    w.map_coeffs(|xi, c| {
        if xi == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            c * Complex64::new(0.0, -0.5 * bump(xi) * xi * xi.abs().powf(-omega))
        }
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AprioriReport {
    /// `sup_t ||u(t)||_{H^(0,omega)}` over the stored samples.
    pub sup_norm: f64,
    pub initial_norm: f64,
    #[serde(rename = "T")]
    pub t_span: f64,
    /// Smallest `C` with `sup <= C ||u0|| + C T ||u0||^2`; 0 for zero data.
    pub fitted_c: f64,
    /// `max_t ||f(t)||_{L2} / ||u(t)||_{L2}^2` for the low-frequency forcing.
    pub forcing_ratio: f64,
}

pub fn apriori_check(traj: &Trajectory, omega: f64) -> Result<AprioriReport> {
    let u0 = traj.initial().unwrap_or(&traj.states()[0]);
    let initial_norm = sobolev_norm(u0, 0.0, omega)?;
    let mut sup_norm = 0.0f64;
    let mut forcing_ratio = 0.0f64;
    for u in traj.states() {
        sup_norm = sup_norm.max(sobolev_norm(u, 0.0, omega)?);
        let mass = u.l2_norm();
        if mass > 0.0 {
            let f = low_freq_forcing(u, omega).l2_norm();
            forcing_ratio = forcing_ratio.max(f / (mass * mass));
        }
    }
    let t_span = traj.half_span();
    let fitted_c = if initial_norm > 0.0 {
        sup_norm / (initial_norm + t_span * initial_norm * initial_norm)
    } else {
        0.0
    };
    Ok(AprioriReport {
        sup_norm,
        initial_norm,
        t_span,
        fitted_c,
        forcing_ratio,
    })
}

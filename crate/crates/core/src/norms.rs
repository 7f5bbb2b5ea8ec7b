//! Weighted Sobolev, Fourier restriction and mixed Lebesgue norms of
//! discrete fields.
//!
//! All integrals are Riemann sums with the grid measures `dxi = 2 pi / L` and
//! `dtau = 2 pi / W` (`W` the time window), matching the normalization of the
//! transforms in [`crate::spectral`].

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, LabError, Result};
use crate::evolution::Trajectory;
use crate::spectral::{
    bracket, forward_transform, inverse_transform, Alpha, CutoffProfile, FrequencyGrid,
    SpectralField, MEAN_TOLERANCE,
};

/// Sum in a fixed pairwise order, independent of thread count.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2..=8 => xs.iter().sum(),
        n => {
            let (a, b) = xs.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

/// Parameter bundle `(alpha, s, omega, b, b', epsilon)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateParams {
    pub alpha: Alpha,
    pub s: f64,
    pub omega: f64,
    pub b: f64,
    pub b_prime: f64,
    pub epsilon: f64,
}

impl EstimateParams {
    pub fn new(
        alpha: Alpha,
        s: f64,
        omega: f64,
        b: f64,
        b_prime: f64,
        epsilon: f64,
    ) -> Result<Self> {
        for (name, v) in [
            ("s", s),
            ("omega", omega),
            ("b", b),
            ("b_prime", b_prime),
            ("epsilon", epsilon),
        ] {
            ensure(v.is_finite(), || format!("{name} must be finite, got {v}"))?;
        }
        check_omega(omega)?;
        ensure(epsilon >= 0.0, || {
            format!("epsilon must be nonnegative, got {epsilon}")
        })?;
        Ok(EstimateParams {
            alpha,
            s,
            omega,
            b,
            b_prime,
            epsilon,
        })
    }

    /// Parameters that satisfy every constraint of the bilinear estimate.
    ///
    /// `b'` takes the largest allowed value and `b` sits 60% of the way
    /// from `1/2` to `b' + 1` (0.52 at `alpha = 1.5`, `epsilon = 0.1`).
    pub fn admissible(alpha: Alpha, epsilon: f64) -> Result<Self> {
        let a = alpha.value();
        let omega = admissible_omega(alpha);
        let s = threshold_s(alpha) + epsilon;
        let b_prime = max_b_prime(alpha, epsilon);
        let b = 0.5 + 0.6 * (b_prime + 0.5);
        let p = EstimateParams::new(alpha, s, omega, b, b_prime, epsilon)?;
        p.check_admissible().map_err(|e| {
            LabError::InvalidParameter(format!(
                "no admissible parameters at alpha = {a}, epsilon = {epsilon}: {e}"
            ))
        })?;
        Ok(p)
    }

    pub fn with_s(mut self, s: f64) -> Self {
        self.s = s;
        self
    }

    /// Verifies `omega = 1/alpha - 1/2`, the lower bound on `s`, and the
    /// constraint set on `b'` and `b`.
    pub fn check_admissible(&self) -> Result<()> {
        let a = self.alpha.value();
        let tol = 1e-12;
        ensure(
            (self.omega - admissible_omega(self.alpha)).abs() <= tol,
            || {
                format!(
                    "omega = {} but 1/alpha - 1/2 = {}",
                    self.omega,
                    admissible_omega(self.alpha)
                )
            },
        )?;
        ensure(
            self.epsilon > 0.0 && self.epsilon <= (a - 1.0) / 4.0 + tol,
            || format!("epsilon = {} outside (0, (alpha-1)/4]", self.epsilon),
        )?;
        ensure(
            self.s >= threshold_s(self.alpha) + self.epsilon - tol,
            || {
                format!(
                    "s = {} below -(3/4)(alpha-1) + epsilon = {}",
                    self.s,
                    threshold_s(self.alpha) + self.epsilon
                )
            },
        )?;
        let cap = max_b_prime(self.alpha, self.epsilon);
        ensure(self.b_prime <= cap + tol, || {
            format!("b' = {} above {cap}", self.b_prime)
        })?;
        ensure(self.b_prime > -0.5, || {
            format!("b' = {} must exceed -1/2", self.b_prime)
        })?;
        ensure(self.b > 0.5 && self.b < self.b_prime + 1.0, || {
            format!(
                "b = {} outside (1/2, b'+1) = (0.5, {})",
                self.b,
                self.b_prime + 1.0
            )
        })?;
        Ok(())
    }

    pub fn is_admissible(&self) -> bool {
        self.check_admissible().is_ok()
    }
}

/// `1/alpha - 1/2`.
pub fn admissible_omega(alpha: Alpha) -> f64 {
    1.0 / alpha.value() - 0.5
}

/// `-(3/4)(alpha - 1)`.
pub fn threshold_s(alpha: Alpha) -> f64 {
    -0.75 * (alpha.value() - 1.0)
}

/// `min{-1/4, -omega, -1/2 + epsilon/3, -1/2 + (3/4)(alpha-1) - epsilon}`.
pub fn max_b_prime(alpha: Alpha, epsilon: f64) -> f64 {
    let a = alpha.value();
    [
        -0.25,
        -admissible_omega(alpha),
        -0.5 + epsilon / 3.0,
        -0.5 + 0.75 * (a - 1.0) - epsilon,
    ]
    .into_iter()
    .fold(f64::INFINITY, f64::min)
}

fn check_omega(omega: f64) -> Result<()> {
    ensure((0.0..0.5).contains(&omega), || {
        format!("omega = {omega} outside [0, 1/2)")
    })
}

/// `||u||_{H^(s,omega)}`: weight `<xi>^(2s+2omega) |xi|^(-2omega)`.
pub fn sobolev_norm(u: &SpectralField, s: f64, omega: f64) -> Result<f64> {
    check_omega(omega)?;
    let g = u.grid();
    if omega > 0.0 && !u.has_zero_mean() {
        return Err(LabError::NonzeroMean(u.zero_mode().norm()));
    }
    let terms: Vec<f64> = u
        .coeffs()
        .iter()
        .enumerate()
        .filter_map(|(i, c)| {
            let xi = g.frequency(i);
            if xi == 0.0 {
                return (omega == 0.0).then(|| c.norm_sqr());
            }
            let w = bracket(xi).powf(2.0 * s + 2.0 * omega) * xi.abs().powf(-2.0 * omega);
            Some(w * c.norm_sqr())
        })
        .collect();
    Ok((g.spacing() * pairwise_sum(&terms)).sqrt())
}

/// Coefficients on a `(tau, xi)` grid.
///
/// The time axis reuses [`FrequencyGrid`]: `n_modes` samples over a window of
/// length `box_length`, sample `m` sitting at `t = (m - M/2) dt`. Storage is
/// xi-major so every spatial frequency owns a contiguous tau column.
#[derive(Clone, Debug, PartialEq)]
pub struct SpaceTimeField {
    space: FrequencyGrid,
    time: FrequencyGrid,
    coeffs: Vec<Complex64>,
}

impl SpaceTimeField {
    pub fn new(space: FrequencyGrid, time: FrequencyGrid, coeffs: Vec<Complex64>) -> Result<Self> {
        let n = space.n_modes() * time.n_modes();
        if coeffs.len() != n {
            return Err(LabError::SizeMismatch {
                expected: n,
                actual: coeffs.len(),
            });
        }
        Ok(SpaceTimeField {
            space,
            time,
            coeffs,
        })
    }

    pub fn zeros(space: FrequencyGrid, time: FrequencyGrid) -> Self {
        SpaceTimeField {
            space,
            time,
            coeffs: vec![Complex64::new(0.0, 0.0); space.n_modes() * time.n_modes()],
        }
    }

    /// Builds the field from `f(tau, xi)` evaluated on the grid.
    pub fn from_fn(
        space: FrequencyGrid,
        time: FrequencyGrid,
        mut f: impl FnMut(f64, f64) -> Complex64,
    ) -> Self {
        let m = time.n_modes();
        let mut coeffs = Vec::with_capacity(space.n_modes() * m);
        for jx in 0..space.n_modes() {
            let xi = space.frequency(jx);
            for jt in 0..m {
                coeffs.push(f(time.frequency(jt), xi));
            }
        }
        SpaceTimeField {
            space,
            time,
            coeffs,
        }
    }

    /// Transforms `M` time slices (slice `m` at `t = (m - M/2) dt`) in time.
    pub fn from_time_slices(time: FrequencyGrid, slices: &[SpectralField]) -> Result<Self> {
        let m = time.n_modes();
        if slices.len() != m {
            return Err(LabError::SizeMismatch {
                expected: m,
                actual: slices.len(),
            });
        }
        let space = *slices[0].grid();
        if slices.iter().any(|s| *s.grid() != space) {
            return Err(LabError::GridMismatch);
        }
        let columns: Vec<Vec<Complex64>> = (0..space.n_modes())
            .into_par_iter()
            .map(|jx| {
                let series: Vec<Complex64> = slices.iter().map(|s| s.coeffs()[jx]).collect();
                forward_transform(&time, &series).expect("length checked")
            })
            .collect();
        Ok(SpaceTimeField {
            space,
            time,
            coeffs: columns.concat(),
        })
    }

    /// Inverse time transform; slice `m` sits at `t = (m - M/2) dt`.
    pub fn to_time_slices(&self) -> Vec<SpectralField> {
        let m = self.time.n_modes();
        let columns: Vec<Vec<Complex64>> = self
            .coeffs
            .par_chunks(m)
            .map(|col| inverse_transform(&self.time, col).expect("length checked"))
            .collect();
        (0..m)
            .map(|jt| {
                let c = columns.iter().map(|col| col[jt]).collect();
                SpectralField::new(self.space, c).expect("length checked")
            })
            .collect()
    }

    #[inline]
    pub fn space(&self) -> &FrequencyGrid {
        &self.space
    }

    #[inline]
    pub fn time(&self) -> &FrequencyGrid {
        &self.time
    }

    #[inline]
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    #[inline]
    pub fn index(&self, jt: usize, jx: usize) -> usize {
        jx * self.time.n_modes() + jt
    }

    #[inline]
    pub fn at(&self, jt: usize, jx: usize) -> Complex64 {
        self.coeffs[self.index(jt, jx)]
    }

    /// Cell measure `dtau * dxi`.
    #[inline]
    pub fn measure(&self) -> f64 {
        self.space.spacing() * self.time.spacing()
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        self.space == other.space && self.time == other.time
    }

    /// `int f conj(g) dtau dxi`, which equals the space-time `L2` pairing.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        if !self.same_grid(other) {
            return Err(LabError::GridMismatch);
        }
        let partial: Vec<Complex64> = self
            .coeffs
            .par_chunks(self.time.n_modes())
            .zip(other.coeffs.par_chunks(self.time.n_modes()))
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y.conj()).sum())
            .collect();
        Ok(partial.iter().sum::<Complex64>() * self.measure())
    }

    pub fn l2_norm(&self) -> f64 {
        let partial: Vec<f64> = self
            .coeffs
            .par_chunks(self.time.n_modes())
            .map(|col| col.iter().map(|c| c.norm_sqr()).sum())
            .collect();
        (self.measure() * pairwise_sum(&partial)).sqrt()
    }

    pub fn scale(&self, a: f64) -> Self {
        SpaceTimeField {
            space: self.space,
            time: self.time,
            coeffs: self.coeffs.iter().map(|c| c * a).collect(),
        }
    }

    pub fn zero_column_norm(&self) -> f64 {
        let jx = self.space.zero_index();
        let m = self.time.n_modes();
        self.coeffs[jx * m..(jx + 1) * m]
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }

    /// The `xi = 0` column vanishes up to round-off.
    pub fn has_zero_mean(&self) -> bool {
        let peak = self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        self.zero_column_norm() <= MEAN_TOLERANCE * peak
    }
}

/// Window-to-support ratio of the time lift. The `<lambda>^(2b)` weight has
/// an exponentially decaying time kernel, so the window needs a margin of
/// several time units beyond the support of the cutoff.
pub const DEFAULT_PADDING: f64 = 4.0;

/// Time transform of `psi_T(t) u(t)`.
pub fn localized_lift(traj: &Trajectory, t_scale: f64) -> Result<SpaceTimeField> {
    localized_lift_padded(traj, t_scale, DEFAULT_PADDING)
}

pub fn localized_lift_padded(
    traj: &Trajectory,
    t_scale: f64,
    padding: f64,
) -> Result<SpaceTimeField> {
    let cutoff = CutoffProfile::new(t_scale)?;
    lift_weighted(
        traj,
        CutoffProfile::SUPPORT_RADIUS * t_scale,
        padding,
        |t| cutoff.value(t),
    )
}

/// Time transform of `weight(t) u(t)` for `|t| <= support`; the weight must
/// vanish outside that range. The window holds at least `padding` times the
/// support and is rounded up to a power of two.
pub fn lift_weighted(
    traj: &Trajectory,
    support: f64,
    padding: f64,
    weight: impl Fn(f64) -> f64,
) -> Result<SpaceTimeField> {
    ensure(padding >= 2.0, || {
        format!("time padding factor must be >= 2, got {padding}")
    })?;
    ensure(support > 0.0 && support.is_finite(), || {
        format!("support must be positive, got {support}")
    })?;
    let dt = traj.dt();
    let kmax = (support / dt + 1e-9).floor() as i64;
    let (first, last) = traj.step_range();
    if first > -kmax || last < kmax {
        return Err(LabError::WindowTooShort {
            need_from: -support,
            need_to: support,
            have_from: first as f64 * dt,
            have_to: last as f64 * dt,
        });
    }
    let needed = (padding * (2 * kmax + 1) as f64).ceil() as usize;
    let m = needed.max(8).next_power_of_two();
    let time = FrequencyGrid::new(m, m as f64 * dt)?;
    let space = *traj.grid();
    let half = (m / 2) as i64;
    let slices: Vec<SpectralField> = (0..m)
        .map(|jm| {
            let k = jm as i64 - half;
            match traj.state_at_step(k) {
                Some(u) if k.abs() <= kmax => {
                    let w = weight(k as f64 * dt);
                    if w == 0.0 {
                        SpectralField::zeros(space)
                    } else {
                        u * w
                    }
                }
                _ => SpectralField::zeros(space),
            }
        })
        .collect();
    SpaceTimeField::from_time_slices(time, &slices)
}

/// Weight of the `X_{s,omega,b}` norm at `(tau, xi)` (squared).
#[inline]
pub fn bourgain_weight(tau: f64, xi: f64, p: &EstimateParams) -> f64 {
    let a = p.alpha.value();
    let low = if p.omega == 0.0 {
        1.0
    } else {
        xi.abs().powf(-2.0 * p.omega)
    };
    let sigma = tau.abs() + xi.abs().powf(1.0 + a);
    let lambda = tau - p.alpha.dispersion(xi);
    low * bracket(xi).powf(2.0 * p.s - 2.0 * a * p.omega)
        * bracket(sigma).powf(2.0 * p.omega)
        * bracket(lambda).powf(2.0 * p.b)
}

/// `||U||_{X_{s,omega,b}}` with the weight in `p` (`b` from `p.b`).
pub fn bourgain_norm(u: &SpaceTimeField, p: &EstimateParams) -> Result<f64> {
    check_omega(p.omega)?;
    if p.omega > 0.0 && !u.has_zero_mean() {
        return Err(LabError::NonzeroMean(u.zero_column_norm()));
    }
    let space = u.space;
    let time = u.time;
    let taus = time.frequencies();
    let partial: Vec<f64> = u
        .coeffs
        .par_chunks(time.n_modes())
        .enumerate()
        .map(|(jx, col)| {
            let xi = space.frequency(jx);
            if xi == 0.0 && p.omega > 0.0 {
                return 0.0;
            }
            let w = ColumnWeight::new(xi, p);
            let terms: Vec<f64> = col
                .iter()
                .zip(&taus)
                .map(|(c, &tau)| w.at(tau) * c.norm_sqr())
                .collect();
            // Euler-Maclaurin correction for the kink of |tau| at tau = 0;
            // without it the tau-sum is only second-order in the spacing.
            let kink = time.spacing() / 12.0
                * weight_slope_jump(xi, p)
                * col[time.zero_index()].norm_sqr();
            pairwise_sum(&terms) + kink
        })
        .collect();
    Ok((u.measure() * pairwise_sum(&partial)).sqrt())
}

/// [`bourgain_weight`] along one `xi` column with the `xi`-only factors hoisted.
struct ColumnWeight {
    base: f64,
    sigma0: f64,
    disp: f64,
    omega: f64,
    b: f64,
}

impl ColumnWeight {
    fn new(xi: f64, p: &EstimateParams) -> Self {
        let a = p.alpha.value();
        let low = if p.omega == 0.0 {
            1.0
        } else {
            xi.abs().powf(-2.0 * p.omega)
        };
        ColumnWeight {
            base: low * bracket(xi).powf(2.0 * p.s - 2.0 * a * p.omega),
            sigma0: xi.abs().powf(1.0 + a),
            disp: p.alpha.dispersion(xi),
            omega: p.omega,
            b: p.b,
        }
    }

    #[inline]
    fn at(&self, tau: f64) -> f64 {
        let sigma = tau.abs() + self.sigma0;
        let lambda = tau - self.disp;
        self.base
            * (self.omega * (sigma * sigma).ln_1p() + self.b * (lambda * lambda).ln_1p()).exp()
    }
}

/// Jump of `d/dtau bourgain_weight` across `tau = 0`.
fn weight_slope_jump(xi: f64, p: &EstimateParams) -> f64 {
    if p.omega == 0.0 {
        return 0.0;
    }
    let c = xi.abs().powf(1.0 + p.alpha.value());
    let at_zero = bourgain_weight(0.0, xi, p);
    // d/dsigma <sigma>^(2 omega) = 2 omega sigma <sigma>^(2 omega - 2), on both sides
    2.0 * at_zero * 2.0 * p.omega * c / (1.0 + c * c)
}

/// `X_{s,omega,b}` norm with the modulation exponent replaced by `b`.
pub fn bourgain_norm_with_b(u: &SpaceTimeField, p: &EstimateParams, b: f64) -> Result<f64> {
    let mut q = *p;
    q.b = b;
    bourgain_norm(u, &q)
}

fn check_exponent(name: &str, p: f64) -> Result<()> {
    ensure(p >= 1.0, || {
        format!("{name} exponent must be >= 1, got {p}")
    })
}

/// Spatial `L^q` norm of physical samples.
pub fn spatial_lebesgue(grid: &FrequencyGrid, samples: &[Complex64], q: f64) -> f64 {
    if q.is_infinite() {
        samples.iter().map(|c| c.norm()).fold(0.0, f64::max)
    } else {
        (grid.dx() * samples.iter().map(|c| c.norm().powf(q)).sum::<f64>()).powf(1.0 / q)
    }
}

/// Trapezoidal `L^p_t` of a uniformly sampled series.
pub fn time_lebesgue(values: &[f64], dt: f64, p: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    if p.is_infinite() {
        return values.iter().copied().fold(0.0, f64::max);
    }
    if values.len() == 1 {
        return 0.0;
    }
    let n = values.len();
    let s: f64 = values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            w * v.powf(p)
        })
        .sum();
    (dt * s).powf(1.0 / p)
}

/// `||u||_{L^p_t L^q_x}` over the trajectory's time span.
pub fn mixed_lebesgue_norm(traj: &Trajectory, p_time: f64, q_space: f64) -> Result<f64> {
    check_exponent("time", p_time)?;
    check_exponent("space", q_space)?;
    let g = *traj.grid();
    let slice_norms: Vec<f64> = traj
        .states()
        .par_iter()
        .map(|u| spatial_lebesgue(&g, &u.to_physical(), q_space))
        .collect();
    Ok(time_lebesgue(&slice_norms, traj.dt(), p_time))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{make_test_field, propagate, TestFamily, TestFieldSpec};
    use std::f64::consts::PI;

    fn alpha() -> Alpha {
        Alpha::new(1.5).unwrap()
    }

    fn free_trajectory(u0: &SpectralField, dt: f64, steps: i64) -> Trajectory {
        let states = (-steps..=steps)
            .map(|k| propagate(u0, k as f64 * dt, alpha()).unwrap())
            .collect();
        Trajectory::new(-steps, dt, states, alpha()).unwrap()
    }

    #[test]
    fn default_admissible_parameters() {
        let p = EstimateParams::admissible(alpha(), 0.1).unwrap();
        assert!((p.omega - 1.0 / 6.0).abs() < 1e-15);
        assert!((p.s + 0.275).abs() < 1e-12);
        assert!((p.b_prime - (-0.5 + 0.1 / 3.0)).abs() < 1e-15);
        assert!((p.b - 0.52).abs() < 1e-12);
        let literal = EstimateParams::new(alpha(), -0.275, 1.0 / 6.0, 0.52, -0.4667, 0.1).unwrap();
        assert!(literal.is_admissible());
        assert!(!literal.with_s(-0.4).is_admissible());
        let bad_b = EstimateParams::new(alpha(), -0.275, 1.0 / 6.0, 0.54, -0.4667, 0.1).unwrap();
        assert!(!bad_b.is_admissible());
        assert!(EstimateParams::new(alpha(), 0.0, 0.5, 0.5, -0.5, 0.0).is_err());
    }

    #[test]
    fn sobolev_zero_weights_is_l2() {
        let g = FrequencyGrid::new(64, 20.0).unwrap();
        let u = make_test_field(
            &g,
            &TestFieldSpec::real(TestFamily::RandomBandlimited {
                amplitude: 1.0,
                band: 4.0,
            }),
            3,
        )
        .unwrap();
        let phys = crate::spectral::physical_l2(&g, &u.to_physical());
        assert!((sobolev_norm(&u, 0.0, 0.0).unwrap() - phys).abs() < 1e-12 * phys);
    }

    #[test]
    fn sobolev_of_cosine_matches_quadrature() {
        // cos(3x) on L = 2 pi: two lines of height sqrt(pi/2) at xi = +-3, so the
        // weighted integral is 2 * (pi/2) * <3>^(2s+2w) 3^(-2w)
        let g = FrequencyGrid::new(32, 2.0 * PI).unwrap();
        let xs: Vec<f64> = g.positions().iter().map(|x| (3.0 * x).cos()).collect();
        let u = SpectralField::from_real(g, &xs).unwrap();
        let (s, w) = (-0.3, 1.0 / 6.0);
        let exact = (PI * 10f64.powf(s + w) * 3f64.powf(-2.0 * w)).sqrt();
        assert!((sobolev_norm(&u, s, w).unwrap() - exact).abs() < 1e-12);
    }

    #[test]
    fn sobolev_rejects_mean_and_bad_omega() {
        let g = FrequencyGrid::new(16, 2.0 * PI).unwrap();
        let u = SpectralField::from_real(g, &[1.0; 16]).unwrap();
        assert!(matches!(
            sobolev_norm(&u, 0.0, 0.1),
            Err(LabError::NonzeroMean(_))
        ));
        assert!(sobolev_norm(&u, 0.0, 0.5).is_err());
        assert!(sobolev_norm(&u, 0.0, -0.1).is_err());
    }

    #[test]
    fn lift_of_zero_and_window_check() {
        let g = FrequencyGrid::new(16, 10.0).unwrap();
        let z = SpectralField::zeros(g);
        let traj = free_trajectory(&z, 0.05, 40);
        let lifted = localized_lift(&traj, 1.0).unwrap();
        assert_eq!(lifted.l2_norm(), 0.0);
        assert!(matches!(
            localized_lift(&traj, 1.5),
            Err(LabError::WindowTooShort { .. })
        ));
    }

    #[test]
    fn lift_of_constant_mode_is_transform_of_cutoff() {
        // (2 pi)^(-1/2) int psi(t) exp(-i t tau) dt by composite Simpson, 40k panels
        fn cutoff_transform(tau: f64) -> f64 {
            let n = 40_000;
            let h = 4.0 / n as f64;
            let mut acc = 0.0;
            for i in 0..=n {
                let t = -2.0 + i as f64 * h;
                let w = if i == 0 || i == n {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                acc += w * crate::spectral::bump(t) * (t * tau).cos();
            }
            acc * h / 3.0 / (2.0 * PI).sqrt()
        }
        let g = FrequencyGrid::new(16, 2.0 * PI).unwrap();
        let u = SpectralField::single_mode(g, 0, Complex64::new(1.0, 0.0)).unwrap();
        let states = (-100..=100).map(|_| u.clone()).collect();
        let traj = Trajectory::new(-100, 0.02, states, alpha()).unwrap();
        let lifted = localized_lift(&traj, 1.0).unwrap();
        let jx = g.zero_index();
        for jt in 0..lifted.time().n_modes() {
            let tau = lifted.time().frequency(jt);
            if tau.abs() > 60.0 {
                continue;
            }
            let got = lifted.at(jt, jx);
            assert!(
                (got - Complex64::new(cutoff_transform(tau), 0.0)).norm() < 1e-9,
                "tau = {tau}"
            );
        }
    }

    #[test]
    fn bourgain_trivial_weights_and_homogeneity() {
        let g = FrequencyGrid::new(32, 20.0).unwrap();
        let u0 = make_test_field(
            &g,
            &TestFieldSpec::real(TestFamily::RandomBandlimited {
                amplitude: 1.0,
                band: 2.0,
            }),
            1,
        )
        .unwrap();
        let traj = free_trajectory(&u0, 0.02, 120);
        let lifted = localized_lift(&traj, 1.0).unwrap();
        let p = EstimateParams::new(alpha(), 0.0, 0.0, 0.0, 0.0, 0.0).unwrap();
        let n = bourgain_norm(&lifted, &p).unwrap();
        assert!((n - lifted.l2_norm()).abs() < 1e-12 * n);
        let n2 = bourgain_norm(&lifted.scale(2.0), &p).unwrap();
        assert!((n2 - 2.0 * n).abs() < 1e-12 * n);
    }

    #[test]
    fn bourgain_nearly_blind_to_b_on_free_solutions() {
        // the lift of a free solution lives within the bandwidth of psi_T around
        // the characteristic, so the b-weight only adds an O(1) factor bounded by
        // the cutoff's own modulation moment
        let g = FrequencyGrid::new(64, 20.0).unwrap();
        let spec = TestFieldSpec::real(TestFamily::RandomBandlimited {
            amplitude: 1.0,
            band: 3.0,
        })
        .zero_mean();
        let u0 = make_test_field(&g, &spec, 2).unwrap();
        let traj = free_trajectory(&u0, 0.01, 250);
        let lifted = localized_lift(&traj, 1.0).unwrap();
        let p = EstimateParams::new(alpha(), 0.0, 0.0, 0.0, 0.0, 0.0).unwrap();
        let n0 = bourgain_norm_with_b(&lifted, &p, 0.0).unwrap();
        let n1 = bourgain_norm_with_b(&lifted, &p, 0.52).unwrap();
        // independent bound: the same ratio for psi alone at xi-independent shift
        let g0 = FrequencyGrid::new(16, 2.0 * PI).unwrap();
        let one = SpectralField::single_mode(g0, 0, Complex64::new(1.0, 0.0)).unwrap();
        let flat = Trajectory::new(
            -250,
            0.01,
            (-250..=250).map(|_| one.clone()).collect(),
            alpha(),
        )
        .unwrap();
        let psi = localized_lift(&flat, 1.0).unwrap();
        let q = EstimateParams::new(Alpha::with_override(1.5).unwrap(), 0.0, 0.0, 0.52, 0.0, 0.0)
            .unwrap();
        let psi_ratio = bourgain_norm(&psi, &q).unwrap() / psi.l2_norm();
        assert!(n1 >= n0);
        assert!(
            (n1 / n0 - psi_ratio).abs() < 1e-6,
            "{} vs {}",
            n1 / n0,
            psi_ratio
        );
    }

    #[test]
    fn hoisted_column_weight_matches_pointwise_formula() {
        let p = EstimateParams::admissible(alpha(), 0.1).unwrap();
        for xi in [-7.5, -1.0, -0.25, 0.5, 3.0] {
            let w = ColumnWeight::new(xi, &p);
            for tau in [-300.0, -2.0, 0.0, 0.7, 45.0] {
                let a = bourgain_weight(tau, xi, &p);
                assert!((w.at(tau) - a).abs() <= 1e-13 * a, "{xi} {tau}");
            }
        }
    }

    #[test]
    fn doubling_padding_is_invisible_to_the_norm() {
        let g = FrequencyGrid::new(32, 20.0).unwrap();
        let spec = TestFieldSpec::real(TestFamily::RandomBandlimited {
            amplitude: 1.0,
            band: 2.0,
        })
        .zero_mean();
        let u0 = make_test_field(&g, &spec, 5).unwrap();
        let traj = free_trajectory(&u0, 0.01, 250);
        let p = EstimateParams::admissible(alpha(), 0.1).unwrap();
        let a = bourgain_norm(&localized_lift(&traj, 1.0).unwrap(), &p).unwrap();
        let b = bourgain_norm(
            &localized_lift_padded(&traj, 1.0, 2.0 * DEFAULT_PADDING).unwrap(),
            &p,
        )
        .unwrap();
        assert!((a - b).abs() < 1e-6 * a, "{a} vs {b}");
    }

    #[test]
    fn mixed_norm_cases() {
        let g = FrequencyGrid::new(32, 2.0 * PI).unwrap();
        let xs: Vec<f64> = g.positions().iter().map(|x| x.cos()).collect();
        let u = SpectralField::from_real(g, &xs).unwrap();
        let traj =
            Trajectory::new(-50, 0.02, (-50..=50).map(|_| u.clone()).collect(), alpha()).unwrap();
        let linf = mixed_lebesgue_norm(&traj, 4.0, f64::INFINITY).unwrap();
        assert!((linf - 2f64.powf(0.25)).abs() < 1e-12);
        let l2 = mixed_lebesgue_norm(&traj, 2.0, 2.0).unwrap();
        // ||cos||_{L2(0,2pi)} = sqrt(pi), window length 2
        assert!((l2 - (2.0 * PI).sqrt()).abs() < 1e-12);
        let sup = mixed_lebesgue_norm(&traj, f64::INFINITY, f64::INFINITY).unwrap();
        assert!((sup - 1.0).abs() < 1e-12);
        assert!(mixed_lebesgue_norm(&traj, 0.5, 2.0).is_err());
        assert!(mixed_lebesgue_norm(&traj, 2.0, 0.9).is_err());
    }
}

//! Periodic spectral representation of functions on a box `[-L/2, L/2)`.
//!
//! Coefficients are stored in ascending frequency order `k = -N/2+1, ..., N/2`
//! and normalized as a Riemann sum of the unitary transform on the line,
//!
//! ```text
//! u_hat(xi_k) = dx / sqrt(2 pi) * sum_j exp(-i x_j xi_k) u(x_j),
//! ```
//!
//! so that `dx * sum |u_j|^2 == dxi * sum |u_hat_k|^2` holds exactly (up to
//! rounding) with `dxi = 2 pi / L`.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, LabError, Result};

pub const MIN_MODES: usize = 8;

/// Relative size below which a zero-mode coefficient counts as round-off.
pub const MEAN_TOLERANCE: f64 = 1e-12;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if forward {
            p.plan_fft_forward(n)
        } else {
            p.plan_fft_inverse(n)
        }
    })
}

/// Dispersion exponent of the flow.
///
/// The supported regime is the open interval `(1, 2)`; [`Alpha::with_override`]
/// admits other positive values for experiments at the endpoints.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Alpha(f64);

impl Alpha {
    pub fn new(alpha: f64) -> Result<Self> {
        ensure(alpha.is_finite(), || {
            format!("alpha must be finite, got {alpha}")
        })?;
        ensure(alpha > 1.0 && alpha < 2.0, || {
            format!("alpha = {alpha} outside (1, 2); use Alpha::with_override for endpoint runs")
        })?;
        Ok(Alpha(alpha))
    }

    pub fn with_override(alpha: f64) -> Result<Self> {
        ensure(alpha.is_finite() && alpha > 0.0, || {
            format!("alpha must be finite and positive, got {alpha}")
        })?;
        Ok(Alpha(alpha))
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// Dispersion relation `xi |xi|^alpha`.
    #[inline]
    pub fn dispersion(self, xi: f64) -> f64 {
        xi * xi.abs().powf(self.0)
    }
}

/// Uniform grid of `n_modes` frequencies `2 pi k / L`, `k = -N/2+1 ..= N/2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    n_modes: usize,
    box_length: f64,
}

impl FrequencyGrid {
    pub fn new(n_modes: usize, box_length: f64) -> Result<Self> {
        if n_modes % 2 != 0 || n_modes < MIN_MODES {
            return Err(LabError::InvalidGrid(format!(
                "n_modes must be even and >= {MIN_MODES}, got {n_modes}"
            )));
        }
        if !(box_length.is_finite() && box_length > 0.0) {
            return Err(LabError::InvalidGrid(format!(
                "box length must be positive, got {box_length}"
            )));
        }
        Ok(FrequencyGrid {
            n_modes,
            box_length,
        })
    }

    #[inline]
    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    #[inline]
    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    /// Frequency spacing `2 pi / L`.
    #[inline]
    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.box_length
    }

    /// Physical sample spacing `L / N`.
    #[inline]
    pub fn dx(&self) -> f64 {
        self.box_length / self.n_modes as f64
    }

    /// Integer mode number of the ascending index `i`.
    #[inline]
    pub fn mode(&self, i: usize) -> i64 {
        i as i64 - (self.n_modes / 2) as i64 + 1
    }

    #[inline]
    pub fn index_of_mode(&self, k: i64) -> Option<usize> {
        let i = k + (self.n_modes / 2) as i64 - 1;
        (0..self.n_modes as i64).contains(&i).then_some(i as usize)
    }

    #[inline]
    pub fn frequency(&self, i: usize) -> f64 {
        self.mode(i) as f64 * self.spacing()
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.n_modes).map(|i| self.frequency(i)).collect()
    }

    #[inline]
    pub fn zero_index(&self) -> usize {
        self.n_modes / 2 - 1
    }

    /// Ascending index of the unpaired mode `k = N/2`.
    #[inline]
    pub fn nyquist_index(&self) -> usize {
        self.n_modes - 1
    }

    pub fn max_frequency(&self) -> f64 {
        self.frequency(self.nyquist_index())
    }

    /// Sample positions `x_j = -L/2 + j dx`.
    pub fn positions(&self) -> Vec<f64> {
        let dx = self.dx();
        (0..self.n_modes)
            .map(|j| -0.5 * self.box_length + j as f64 * dx)
            .collect()
    }

    fn fft_slot(&self, i: usize) -> usize {
        self.mode(i).rem_euclid(self.n_modes as i64) as usize
    }
}

/// Forward transform of complex samples to ascending-order coefficients.
pub fn forward_transform(grid: &FrequencyGrid, samples: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = grid.n_modes();
    if samples.len() != n {
        return Err(LabError::SizeMismatch {
            expected: n,
            actual: samples.len(),
        });
    }
    let mut buf = samples.to_vec();
    plan(n, true).process(&mut buf);
    let scale = grid.dx() / (2.0 * PI).sqrt();
    Ok((0..n)
        .map(|i| {
            // exp(i xi_k L/2) = (-1)^k recenters the box on the origin
            let sign = if grid.mode(i) % 2 == 0 { 1.0 } else { -1.0 };
            buf[grid.fft_slot(i)] * (sign * scale)
        })
        .collect())
}

/// Inverse of [`forward_transform`].
pub fn inverse_transform(grid: &FrequencyGrid, coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = grid.n_modes();
    if coeffs.len() != n {
        return Err(LabError::SizeMismatch {
            expected: n,
            actual: coeffs.len(),
        });
    }
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let scale = (2.0 * PI).sqrt() / grid.box_length();
    for (i, c) in coeffs.iter().enumerate() {
        let sign = if grid.mode(i) % 2 == 0 { 1.0 } else { -1.0 };
        buf[grid.fft_slot(i)] = c * (sign * scale);
    }
    plan(n, false).process(&mut buf);
    Ok(buf)
}

/// Discrete L2 norm of physical samples, `(dx sum |u_j|^2)^(1/2)`.
pub fn physical_l2(grid: &FrequencyGrid, samples: &[Complex64]) -> f64 {
    (grid.dx() * samples.iter().map(|c| c.norm_sqr()).sum::<f64>()).sqrt()
}

/// Band-limited field stored by its Fourier coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    grid: FrequencyGrid,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn new(grid: FrequencyGrid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.n_modes() {
            return Err(LabError::SizeMismatch {
                expected: grid.n_modes(),
                actual: coeffs.len(),
            });
        }
        Ok(SpectralField { grid, coeffs })
    }

    pub fn zeros(grid: FrequencyGrid) -> Self {
        SpectralField {
            grid,
            coeffs: vec![Complex64::new(0.0, 0.0); grid.n_modes()],
        }
    }

    /// Field with a single nonzero coefficient at integer mode `k`.
    pub fn single_mode(grid: FrequencyGrid, k: i64, amplitude: Complex64) -> Result<Self> {
        let i = grid
            .index_of_mode(k)
            .ok_or_else(|| LabError::InvalidParameter(format!("mode {k} not on grid")))?;
        let mut u = Self::zeros(grid);
        u.coeffs[i] = amplitude;
        Ok(u)
    }

    pub fn from_physical(grid: FrequencyGrid, samples: &[Complex64]) -> Result<Self> {
        let coeffs = forward_transform(&grid, samples)?;
        Ok(SpectralField { grid, coeffs })
    }

    pub fn from_real(grid: FrequencyGrid, samples: &[f64]) -> Result<Self> {
        let samples: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Self::from_physical(grid, &samples)
    }

    pub fn to_physical(&self) -> Vec<Complex64> {
        inverse_transform(&self.grid, &self.coeffs).expect("length matches grid")
    }

    pub fn to_real(&self) -> Vec<f64> {
        self.to_physical().into_iter().map(|c| c.re).collect()
    }

    #[inline]
    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    #[inline]
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    pub fn zero_mode(&self) -> Complex64 {
        self.coeffs[self.grid.zero_index()]
    }

    /// Zero mode is zero up to transform round-off relative to the largest
    /// coefficient.
    pub fn has_zero_mean(&self) -> bool {
        let peak = self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        self.zero_mode().norm() <= MEAN_TOLERANCE * peak
    }

    /// Multiply every coefficient by `f(xi, c)`.
    pub fn map_coeffs(&self, mut f: impl FnMut(f64, Complex64) -> Complex64) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| f(self.grid.frequency(i), c))
            .collect();
        SpectralField {
            grid: self.grid,
            coeffs,
        }
    }

    /// `(dxi sum |u_hat|^2)^(1/2)`; equals the physical L2 norm.
    pub fn l2_norm(&self) -> f64 {
        (self.grid.spacing() * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()).sqrt()
    }

    pub fn distance_l2(&self, other: &Self) -> Result<f64> {
        if self.grid != other.grid {
            return Err(LabError::GridMismatch);
        }
        let s: f64 = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        Ok((self.grid.spacing() * s).sqrt())
    }

    /// Largest violation of `u_hat(-xi) = conj(u_hat(xi))` over paired modes,
    /// together with the imaginary part of the zero and Nyquist modes.
    pub fn conjugate_symmetry_defect(&self) -> f64 {
        let g = &self.grid;
        let half = (g.n_modes() / 2) as i64;
        let mut worst = self
            .zero_mode()
            .im
            .abs()
            .max(self.coeffs[g.nyquist_index()].im.abs());
        for k in 1..half {
            let p = self.coeffs[g.index_of_mode(k).unwrap()];
            let m = self.coeffs[g.index_of_mode(-k).unwrap()];
            worst = worst.max((p - m.conj()).norm());
        }
        worst
    }

    /// Zero every mode with `|k| > max_mode`.
    pub fn truncate_modes(&self, max_mode: i64) -> Self {
        let g = self.grid;
        let mut out = self.clone();
        for (i, c) in out.coeffs.iter_mut().enumerate() {
            if g.mode(i).abs() > max_mode {
                *c = Complex64::new(0.0, 0.0);
            }
        }
        out
    }

    pub fn scale(&self, a: f64) -> Self {
        self * a
    }
}

impl Add for &SpectralField {
    type Output = SpectralField;
    fn add(self, rhs: &SpectralField) -> SpectralField {
        assert_eq!(self.grid, rhs.grid, "grid mismatch in field addition");
        SpectralField {
            grid: self.grid,
            coeffs: self
                .coeffs
                .iter()
                .zip(&rhs.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &SpectralField {
    type Output = SpectralField;
    fn sub(self, rhs: &SpectralField) -> SpectralField {
        assert_eq!(self.grid, rhs.grid, "grid mismatch in field subtraction");
        SpectralField {
            grid: self.grid,
            coeffs: self
                .coeffs
                .iter()
                .zip(&rhs.coeffs)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl Mul<f64> for &SpectralField {
    type Output = SpectralField;
    fn mul(self, a: f64) -> SpectralField {
        SpectralField {
            grid: self.grid,
            coeffs: self.coeffs.iter().map(|c| c * a).collect(),
        }
    }
}

impl Mul<Complex64> for &SpectralField {
    type Output = SpectralField;
    fn mul(self, a: Complex64) -> SpectralField {
        SpectralField {
            grid: self.grid,
            coeffs: self.coeffs.iter().map(|c| c * a).collect(),
        }
    }
}

/// Japanese bracket `(1 + x^2)^(1/2)`.
#[inline]
pub fn bracket(x: f64) -> f64 {
    x.hypot(1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Multiplier {
    /// `|xi|^s`
    Homogeneous,
    /// `<xi>^s`
    Bessel,
}

pub fn apply_multiplier(u: &SpectralField, kind: Multiplier, s: f64) -> Result<SpectralField> {
    ensure(s.is_finite(), || {
        format!("multiplier exponent must be finite, got {s}")
    })?;
    match kind {
        Multiplier::Bessel => Ok(u.map_coeffs(|xi, c| c * bracket(xi).powf(s))),
        Multiplier::Homogeneous => {
            if s < 0.0 && !u.has_zero_mean() {
                return Err(LabError::NonzeroMean(u.zero_mode().norm()));
            }
            Ok(u.map_coeffs(|xi, c| {
                if xi == 0.0 {
                    // |0|^0 = 1, |0|^s = 0 for s > 0; s < 0 has been excluded above
                    if s == 0.0 {
                        c
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                } else {
                    c * xi.abs().powf(s)
                }
            }))
        }
    }
}

/// Free propagator: multiplies each coefficient by `exp(i t xi |xi|^alpha)`.
pub fn propagate(u: &SpectralField, t: f64, alpha: Alpha) -> Result<SpectralField> {
    ensure(t.is_finite(), || {
        format!("propagation time must be finite, got {t}")
    })?;
    Ok(u.map_coeffs(|xi, c| c * Complex64::cis(t * alpha.dispersion(xi))))
}

/// Pointwise product `u v` without aliasing.
///
/// Both factors are embedded in a grid with twice the modes on the same box,
/// multiplied there, and projected back; frequencies beyond the original grid
/// are dropped rather than folded.
pub fn product(u: &SpectralField, v: &SpectralField) -> Result<SpectralField> {
    if u.grid != v.grid {
        return Err(LabError::GridMismatch);
    }
    let g = u.grid;
    let big = FrequencyGrid::new(2 * g.n_modes(), g.box_length())?;
    let embed = |f: &SpectralField| {
        let mut c = vec![Complex64::new(0.0, 0.0); big.n_modes()];
        for (i, z) in f.coeffs.iter().enumerate() {
            c[big
                .index_of_mode(g.mode(i))
                .expect("big grid contains small")] = *z;
        }
        inverse_transform(&big, &c).expect("length matches grid")
    };
    let (a, b) = (embed(u), embed(v));
    let prod: Vec<Complex64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
    let full = forward_transform(&big, &prod)?;
    let coeffs = (0..g.n_modes())
        .map(|i| {
            full[big
                .index_of_mode(g.mode(i))
                .expect("big grid contains small")]
        })
        .collect();
    SpectralField::new(g, coeffs)
}

/// Smooth even bump: 1 on `[-1, 1]`, 0 outside `(-2, 2)`.
pub fn bump(x: f64) -> f64 {
    fn glue(y: f64) -> f64 {
        if y > 0.0 {
            (-1.0 / y).exp()
        } else {
            0.0
        }
    }
    let a = x.abs();
    if a <= 1.0 {
        1.0
    } else if a >= 2.0 {
        0.0
    } else {
        let up = glue(2.0 - a);
        up / (up + glue(a - 1.0))
    }
}

/// Time cutoff `psi_T`, i.e. the bump rescaled to plateau `[-T, T]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutoffProfile {
    scale: f64,
}

impl CutoffProfile {
    pub const PLATEAU_RADIUS: f64 = 1.0;
    pub const SUPPORT_RADIUS: f64 = 2.0;

    pub fn new(scale: f64) -> Result<Self> {
        ensure(scale.is_finite() && scale > 0.0, || {
            format!("cutoff scale must be positive, got {scale}")
        })?;
        Ok(CutoffProfile { scale })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    #[inline]
    pub fn value(&self, t: f64) -> f64 {
        bump(t / self.scale)
    }
}

pub fn cutoff_value(t: f64, scale: f64) -> Result<f64> {
    Ok(CutoffProfile::new(scale)?.value(t))
}

/// Split into `psi(xi) u_hat` and the remainder.
pub fn split_frequencies(u: &SpectralField) -> (SpectralField, SpectralField) {
    let low = u.map_coeffs(|xi, c| c * bump(xi));
    let high = u.map_coeffs(|xi, c| c * (1.0 - bump(xi)));
    (low, high)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum TestFamily {
    /// `A exp(-((x - c) / w)^2)`
    Gaussian {
        amplitude: f64,
        width: f64,
        center: f64,
    },
    /// Gaussian envelope times `cos(k0 (x - c))`, or `exp(i k0 (x - c))` when complex.
    WavePacket {
        amplitude: f64,
        width: f64,
        center: f64,
        carrier: f64,
    },
    /// Independent uniform draws on the modes with `|xi| <= band`.
    RandomBandlimited { amplitude: f64, band: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFieldSpec {
    pub family: TestFamily,
    #[serde(default)]
    pub zero_mean: bool,
    #[serde(default)]
    pub complex: bool,
}

impl TestFieldSpec {
    pub fn real(family: TestFamily) -> Self {
        TestFieldSpec {
            family,
            zero_mean: false,
            complex: false,
        }
    }

    pub fn zero_mean(mut self) -> Self {
        self.zero_mean = true;
        self
    }

    pub fn complex(mut self) -> Self {
        self.complex = true;
        self
    }
}

fn unit_disc_draw(rng: &mut ChaCha8Rng) -> Complex64 {
    loop {
        let re: f64 = rng.gen_range(-1.0..1.0);
        let im: f64 = rng.gen_range(-1.0..1.0);
        if re * re + im * im <= 1.0 {
            return Complex64::new(re, im);
        }
    }
}

/// Deterministic stand-in for a Schwartz function.
///
/// Random band-limited fields draw their modes in the order `k = 0, 1, 2, ...`
/// so the same seed and band produce the same function on any grid fine
/// enough to hold the band.
pub fn make_test_field(
    grid: &FrequencyGrid,
    spec: &TestFieldSpec,
    seed: u64,
) -> Result<SpectralField> {
    let mut u = match spec.family {
        TestFamily::Gaussian {
            amplitude,
            width,
            center,
        } => {
            ensure(width > 0.0 && width.is_finite(), || {
                format!("width must be positive, got {width}")
            })?;
            let samples: Vec<Complex64> = grid
                .positions()
                .iter()
                .map(|&x| Complex64::new(amplitude * (-((x - center) / width).powi(2)).exp(), 0.0))
                .collect();
            SpectralField::from_physical(*grid, &samples)?
        }
        TestFamily::WavePacket {
            amplitude,
            width,
            center,
            carrier,
        } => {
            ensure(width > 0.0 && width.is_finite(), || {
                format!("width must be positive, got {width}")
            })?;
            let steps = carrier / grid.spacing();
            ensure((steps - steps.round()).abs() < 1e-9, || {
                format!("carrier {carrier} is not a grid frequency")
            })?;
            ensure(carrier.abs() < grid.max_frequency(), || {
                format!("carrier {carrier} exceeds Nyquist {}", grid.max_frequency())
            })?;
            let samples: Vec<Complex64> = grid
                .positions()
                .iter()
                .map(|&x| {
                    let env = amplitude * (-((x - center) / width).powi(2)).exp();
                    if spec.complex {
                        Complex64::cis(carrier * (x - center)) * env
                    } else {
                        Complex64::new(env * (carrier * (x - center)).cos(), 0.0)
                    }
                })
                .collect();
            SpectralField::from_physical(*grid, &samples)?
        }
        TestFamily::RandomBandlimited { amplitude, band } => {
            ensure(band >= 0.0, || {
                format!("band must be nonnegative, got {band}")
            })?;
            if band >= grid.max_frequency() {
                return Err(LabError::InvalidParameter(format!(
                    "band {band} reaches the Nyquist frequency {}",
                    grid.max_frequency()
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut u = SpectralField::zeros(*grid);
            let kmax = (band / grid.spacing() + 1e-12).floor() as i64;
            for k in 0..=kmax {
                let c = unit_disc_draw(&mut rng) * amplitude;
                let ip = grid.index_of_mode(k).unwrap();
                if k == 0 {
                    u.coeffs[ip] = if spec.complex {
                        c
                    } else {
                        Complex64::new(c.re, 0.0)
                    };
                    continue;
                }
                let im = grid.index_of_mode(-k).unwrap();
                u.coeffs[ip] = c;
                u.coeffs[im] = if spec.complex {
                    unit_disc_draw(&mut rng) * amplitude
                } else {
                    c.conj()
                };
            }
            u
        }
    };
    if spec.zero_mean {
        let z = grid.zero_index();
        u.coeffs[z] = Complex64::new(0.0, 0.0);
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_of_modes_lands_on_the_sum_frequency() {
        let g = FrequencyGrid::new(16, 2.0 * PI).unwrap();
        let one = Complex64::new(1.0, 0.0);
        let a = SpectralField::single_mode(g, 5, one).unwrap();
        let b = SpectralField::single_mode(g, 6, one).unwrap();
        // mode 11 is off the grid: dropped, not folded onto mode -5
        assert!(product(&a, &b).unwrap().l2_norm() < 1e-14);
        let c = SpectralField::single_mode(g, -2, one).unwrap();
        let p = product(&a, &c).unwrap();
        // each unit coefficient is the plane wave sqrt(2 pi) / L e^{i xi x}
        let expected = (2.0 * PI).sqrt() / g.box_length();
        let got = p.coeffs()[g.index_of_mode(3).unwrap()];
        assert!((got - expected).norm() < 1e-14, "{got}");
        assert!((p.l2_norm() - got.norm() * g.spacing().sqrt()).abs() < 1e-13);
    }

    fn grid(n: usize, l: f64) -> FrequencyGrid {
        FrequencyGrid::new(n, l).unwrap()
    }

    #[test]
    fn grid_on_unit_box_has_integer_frequencies() {
        let g = grid(8, 2.0 * PI);
        let f = g.frequencies();
        let expect = [-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0, 4.0];
        for (a, b) in f.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!((grid(8, 4.0 * PI).spacing() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn grid_rejects_bad_sizes() {
        assert!(FrequencyGrid::new(7, 2.0 * PI).is_err());
        assert!(FrequencyGrid::new(6, 2.0 * PI).is_err());
        assert!(FrequencyGrid::new(8, 0.0).is_err());
        assert!(FrequencyGrid::new(8, -1.0).is_err());
    }

    #[test]
    fn transform_size_mismatch() {
        let g = grid(8, 2.0 * PI);
        assert_eq!(
            forward_transform(&g, &[Complex64::new(1.0, 0.0); 4]),
            Err(LabError::SizeMismatch {
                expected: 8,
                actual: 4
            })
        );
    }

    #[test]
    fn constant_lands_in_zero_mode() {
        let g = grid(16, 2.0 * PI);
        let u = SpectralField::from_real(g, &[1.0; 16]).unwrap();
        for (i, c) in u.coeffs().iter().enumerate() {
            if i == g.zero_index() {
                // integral of 1 over the box divided by sqrt(2 pi)
                assert!((c.re - 2.0 * PI / (2.0 * PI).sqrt()).abs() < 1e-12);
            } else {
                assert!(c.norm() < 1e-13);
            }
        }
    }

    #[test]
    fn cosine_has_two_equal_lines() {
        let g = grid(16, 2.0 * PI);
        let xs: Vec<f64> = g.positions().iter().map(|x| x.cos()).collect();
        let u = SpectralField::from_real(g, &xs).unwrap();
        let p = u.coeffs()[g.index_of_mode(1).unwrap()];
        let m = u.coeffs()[g.index_of_mode(-1).unwrap()];
        assert!((p - m).norm() < 1e-13);
        assert!(p.norm() > 1.0);
        let rest: f64 = u
            .coeffs()
            .iter()
            .enumerate()
            .filter(|(i, _)| g.mode(*i).abs() != 1)
            .map(|(_, c)| c.norm())
            .sum();
        assert!(rest < 1e-12);
    }

    #[test]
    fn homogeneous_half_power_of_cos2x() {
        let g = grid(16, 2.0 * PI);
        let xs: Vec<f64> = g.positions().iter().map(|x| (2.0 * x).cos()).collect();
        let u = SpectralField::from_real(g, &xs).unwrap();
        let v = apply_multiplier(&u, Multiplier::Homogeneous, 0.5)
            .unwrap()
            .to_real();
        for (x, got) in g.positions().iter().zip(v) {
            assert!((got - 2f64.sqrt() * (2.0 * x).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn homogeneous_kills_constants_and_rejects_negative_power_on_mean() {
        let g = grid(16, 2.0 * PI);
        let u = SpectralField::from_real(g, &[3.0; 16]).unwrap();
        let v = apply_multiplier(&u, Multiplier::Homogeneous, 1.0).unwrap();
        assert!(v.l2_norm() < 1e-14);
        assert!(matches!(
            apply_multiplier(&u, Multiplier::Homogeneous, -0.2),
            Err(LabError::NonzeroMean(_))
        ));
    }

    #[test]
    fn bessel_zero_is_identity() {
        let g = grid(32, 10.0);
        let spec = TestFieldSpec::real(TestFamily::RandomBandlimited {
            amplitude: 1.0,
            band: 3.0,
        });
        let u = make_test_field(&g, &spec, 4).unwrap();
        assert_eq!(apply_multiplier(&u, Multiplier::Bessel, 0.0).unwrap(), u);
    }

    #[test]
    fn propagate_single_mode_phase() {
        let g = grid(32, 2.0 * PI);
        let u = SpectralField::single_mode(g, 2, Complex64::new(1.0, 0.0)).unwrap();
        let v = propagate(&u, 0.1, Alpha::new(1.5).unwrap()).unwrap();
        let c = v.coeffs()[g.index_of_mode(2).unwrap()];
        // 0.1 * 2 * 2^1.5 = 0.565685424949238019520...
        let phase = 0.565_685_424_949_238_f64;
        assert!((c - Complex64::new(phase.cos(), phase.sin())).norm() < 1e-15);
        assert_eq!(propagate(&u, 0.0, Alpha::new(1.5).unwrap()).unwrap(), u);
    }

    #[test]
    fn propagate_rejects_nonfinite() {
        let g = grid(8, 2.0 * PI);
        let u = SpectralField::zeros(g);
        assert!(propagate(&u, f64::NAN, Alpha::new(1.5).unwrap()).is_err());
        assert!(Alpha::new(2.0).is_err());
        assert!(Alpha::new(f64::INFINITY).is_err());
        assert!(Alpha::with_override(2.0).is_ok());
    }

    #[test]
    fn split_of_single_modes() {
        let g = grid(64, 4.0 * PI);
        let hi = SpectralField::single_mode(g, 8, Complex64::new(1.0, 0.0)).unwrap(); // xi = 4
        let (l, h) = split_frequencies(&hi);
        assert_eq!(l.l2_norm(), 0.0);
        assert_eq!(h, hi);
        let lo = SpectralField::single_mode(g, 1, Complex64::new(1.0, 0.0)).unwrap(); // xi = 0.5
        let (l, h) = split_frequencies(&lo);
        assert_eq!(l, lo);
        assert_eq!(h.l2_norm(), 0.0);
    }

    #[test]
    fn cutoff_values() {
        assert_eq!(cutoff_value(0.5, 1.0).unwrap(), 1.0);
        assert_eq!(cutoff_value(3.0, 1.0).unwrap(), 0.0);
        let v = cutoff_value(3.0, 2.0).unwrap();
        assert!(v > 0.0 && v < 1.0);
        assert!(cutoff_value(1.0, 0.0).is_err());
        assert!(cutoff_value(1.0, -1.0).is_err());
        let mut prev = 1.0;
        for i in 0..=100 {
            let x = 1.0 + i as f64 / 100.0;
            let v = bump(x);
            assert!(v <= prev && (0.0..=1.0).contains(&v));
            assert_eq!(v, bump(-x));
            prev = v;
        }
    }

    #[test]
    fn gaussian_matches_closed_form_transform() {
        // (2 pi)^(-1/2) int exp(-x^2) exp(-i x xi) dx = exp(-xi^2 / 4) / sqrt(2)
        let g = grid(256, 40.0);
        let spec = TestFieldSpec::real(TestFamily::Gaussian {
            amplitude: 1.0,
            width: 1.0,
            center: 0.0,
        });
        let u = make_test_field(&g, &spec, 99).unwrap();
        for (i, c) in u.coeffs().iter().enumerate() {
            let xi = g.frequency(i);
            let exact = (-xi * xi / 4.0).exp() / 2f64.sqrt();
            assert!((c - Complex64::new(exact, 0.0)).norm() < 1e-12, "xi = {xi}");
        }
    }

    #[test]
    fn random_bandlimited_is_deterministic_and_band_limited() {
        let g = grid(128, 30.0);
        let spec = TestFieldSpec::real(TestFamily::RandomBandlimited {
            amplitude: 1.0,
            band: 4.0,
        });
        let a = make_test_field(&g, &spec, 11).unwrap();
        let b = make_test_field(&g, &spec, 11).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, make_test_field(&g, &spec, 12).unwrap());
        for (i, c) in a.coeffs().iter().enumerate() {
            if g.frequency(i).abs() > 4.0 {
                assert_eq!(c.norm(), 0.0);
            }
        }
        assert!(a.conjugate_symmetry_defect() < 1e-15);
        // same function on a refined grid
        let fine = grid(256, 30.0);
        let c = make_test_field(&fine, &spec, 11).unwrap();
        for k in -10..=10 {
            assert_eq!(
                a.coeffs()[g.index_of_mode(k).unwrap()],
                c.coeffs()[fine.index_of_mode(k).unwrap()]
            );
        }
    }

    #[test]
    fn band_beyond_nyquist_is_rejected() {
        let g = grid(16, 2.0 * PI);
        let spec = TestFieldSpec::real(TestFamily::RandomBandlimited {
            amplitude: 1.0,
            band: 8.0,
        });
        assert!(make_test_field(&g, &spec, 0).is_err());
    }

    #[test]
    fn off_grid_carrier_is_rejected() {
        let g = grid(64, 2.0 * PI);
        let spec = TestFieldSpec::real(TestFamily::WavePacket {
            amplitude: 1.0,
            width: 1.0,
            center: 0.0,
            carrier: 2.5,
        });
        assert!(make_test_field(&g, &spec, 0).is_err());
    }
}

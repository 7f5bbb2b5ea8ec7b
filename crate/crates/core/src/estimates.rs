//! Resonance function, modulation weights, frequency regions, the bilinear
//! operators `I_*^s` and `K_*^(alpha/2)`, and empirical ratio sweeps for the
//! linear, bilinear and smoothing inequalities.
//!
//! The implicit constants of the inequalities are never assumed. Every check
//! is a sup (or, for lower bounds, inf) of left side over right side across a
//! declared family of inputs, repeated at several grid resolutions so the
//! trend can be read off the report.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, LabError, Result};
use crate::evolution::free_trajectory;
use crate::norms::{
    bourgain_norm, bourgain_norm_with_b, bourgain_weight, lift_weighted, localized_lift,
    time_lebesgue, EstimateParams, SpaceTimeField, DEFAULT_PADDING,
};
use crate::spectral::{
    apply_multiplier, inverse_transform, make_test_field, product, Alpha, CutoffProfile,
    FrequencyGrid, Multiplier, SpectralField, TestFamily, TestFieldSpec,
};

// ---------------------------------------------------------------------------
// Resonance

/// `h = xi |xi|^alpha - xi1 |xi1|^alpha - xi2 |xi2|^alpha` with `xi = xi1 + xi2`.
pub fn resonance(xi1: f64, xi2: f64, alpha: f64) -> f64 {
    let d = |x: f64| x * x.abs().powf(alpha);
    d(xi1 + xi2) - d(xi1) - d(xi2)
}

/// `|h| / (|xi_min| |xi_max|^alpha)` over `{xi1, xi2, xi1 + xi2}`, or `None`
/// when one of the three frequencies vanishes and both sides are zero.
pub fn resonance_ratio(xi1: f64, xi2: f64, alpha: f64) -> Option<f64> {
    let mags = [xi1.abs(), xi2.abs(), (xi1 + xi2).abs()];
    let lo = mags.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = mags.iter().copied().fold(0.0, f64::max);
    if lo == 0.0 {
        return None;
    }
    Some(resonance(xi1, xi2, alpha).abs() / (lo * hi.powf(alpha)))
}

/// Where the resonance scan draws its frequency pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonanceSampler {
    /// Pairs drawn uniformly from `[-range, range]^2`.
    pub uniform_draws: usize,
    pub range: f64,
    /// Signed dyadic ladder `+-2^k`, `k` in this range, crossed with itself.
    pub dyadic_exponents: (i32, i32),
}

impl Default for ResonanceSampler {
    fn default() -> Self {
        ResonanceSampler {
            uniform_draws: 1_000_000,
            range: 1e3,
            dyadic_exponents: (-10, 10),
        }
    }
}

impl ResonanceSampler {
    fn dyadic_pairs(&self) -> Vec<(f64, f64)> {
        let (lo, hi) = self.dyadic_exponents;
        let ladder: Vec<f64> = (lo..=hi)
            .flat_map(|k| {
                let x = 2f64.powi(k);
                [-x, x]
            })
            .collect();
        ladder
            .iter()
            .flat_map(|&a| ladder.iter().map(move |&b| (a, b)))
            .collect()
    }
}

/// Draws per independent random stream of the uniform part.
const RESONANCE_CHUNK: usize = 1 << 16;

#[derive(Clone, Copy, Debug)]
struct Extremum {
    value: f64,
    index: usize,
    coords: (f64, f64),
}

fn keep_min(a: Option<Extremum>, b: Option<Extremum>) -> Option<Extremum> {
    match (a, b) {
        (Some(x), Some(y)) => Some(if y.value < x.value { y } else { x }),
        (x, None) => x,
        (None, y) => y,
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct ChunkScan {
    full: Option<Extremum>,
    prefix: Option<Extremum>,
    valid: usize,
    skipped: usize,
}

/// Scans `|h| / (|xi_min| |xi_max|^alpha)` over the dyadic ladder and
/// `uniform_draws` uniform pairs.
///
/// The report's trend holds the infimum over the ladder plus the first tenth
/// of the uniform draws, then over everything, so a 10x enlargement of the
/// sample set can be compared directly.
pub fn resonance_infimum(alpha: f64, sampler: &ResonanceSampler, seed: u64) -> Result<RatioReport> {
    ensure(alpha.is_finite() && alpha > 0.0, || {
        format!("alpha must be positive, got {alpha}")
    })?;
    ensure(sampler.range.is_finite() && sampler.range > 0.0, || {
        format!("sampler range must be positive, got {}", sampler.range)
    })?;
    let dyadic = sampler.dyadic_pairs();
    let n_uniform = sampler.uniform_draws;
    let prefix_len = n_uniform.div_ceil(10);

    let mut head = ChunkScan::default();
    for (i, &(a, b)) in dyadic.iter().enumerate() {
        match resonance_ratio(a, b, alpha) {
            Some(r) => {
                let e = Some(Extremum {
                    value: r,
                    index: i,
                    coords: (a, b),
                });
                head.full = keep_min(head.full, e);
                head.prefix = keep_min(head.prefix, e);
                head.valid += 1;
            }
            None => head.skipped += 1,
        }
    }

    let n_chunks = n_uniform.div_ceil(RESONANCE_CHUNK);
    let chunks: Vec<ChunkScan> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let start = c * RESONANCE_CHUNK;
            let end = (start + RESONANCE_CHUNK).min(n_uniform);
            let mut scan = ChunkScan::default();
            for j in start..end {
                let a = rng.gen_range(-sampler.range..=sampler.range);
                let b = rng.gen_range(-sampler.range..=sampler.range);
                match resonance_ratio(a, b, alpha) {
                    Some(r) => {
                        let e = Some(Extremum {
                            value: r,
                            index: dyadic.len() + j,
                            coords: (a, b),
                        });
                        scan.full = keep_min(scan.full, e);
                        if j < prefix_len {
                            scan.prefix = keep_min(scan.prefix, e);
                        }
                        scan.valid += 1;
                    }
                    None => scan.skipped += 1,
                }
            }
            scan
        })
        .collect();

    let total = chunks.into_iter().fold(head, |acc, c| ChunkScan {
        full: keep_min(acc.full, c.full),
        prefix: keep_min(acc.prefix, c.prefix),
        valid: acc.valid + c.valid,
        skipped: acc.skipped + c.skipped,
    });
    let full = total.full.ok_or(LabError::EmptySample)?;
    let prefix = total.prefix.unwrap_or(full);
    let label = if full.index < dyadic.len() {
        "dyadic"
    } else {
        "uniform"
    };
    let report = RatioReport {
        kind: EstimateKind::Resonance,
        alpha,
        sup_ratio: None,
        inf_ratio: Some(full.value),
        argmax: None,
        argmin: Some(SampleDescriptor {
            index: full.index,
            label: label.to_string(),
            coords: vec![full.coords.0, full.coords.1],
        }),
        sample_count: total.valid,
        skipped_count: total.skipped,
        refinement_trend: vec![
            TrendPoint {
                resolution: format!("samples={}", dyadic.len() + prefix_len),
                ratio: prefix.value,
            },
            TrendPoint {
                resolution: format!("samples={}", dyadic.len() + n_uniform),
                ratio: full.value,
            },
        ],
        seed,
        params: None,
        region_histogram: BTreeMap::new(),
    };
    report.validate()?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// Modulation weights and regions

/// `sigma = |tau| + |xi|^(1+alpha)` and `lambda = tau - xi |xi|^alpha`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymbolWeights {
    pub sigma: f64,
    pub lambda: f64,
}

pub fn modulation_weights(tau: f64, xi: f64, alpha: f64) -> SymbolWeights {
    SymbolWeights {
        sigma: tau.abs() + xi.abs().powf(1.0 + alpha),
        lambda: tau - xi * xi.abs().powf(alpha),
    }
}

/// Weights of both factors and of the output of a convolution
/// `(tau, xi) = (tau1, xi1) + (tau2, xi2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvolutionWeights {
    pub xi1: f64,
    pub xi2: f64,
    pub alpha: f64,
    pub output: SymbolWeights,
    pub first: SymbolWeights,
    pub second: SymbolWeights,
}

impl ConvolutionWeights {
    pub fn new(tau1: f64, xi1: f64, tau2: f64, xi2: f64, alpha: f64) -> Self {
        ConvolutionWeights {
            xi1,
            xi2,
            alpha,
            output: modulation_weights(tau1 + tau2, xi1 + xi2, alpha),
            first: modulation_weights(tau1, xi1, alpha),
            second: modulation_weights(tau2, xi2, alpha),
        }
    }

    /// `(lambda - lambda1 - lambda2) + h(xi1, xi2)`, zero up to rounding:
    /// the modulations absorb the resonance with the opposite sign.
    pub fn resonance_defect(&self) -> f64 {
        self.output.lambda - self.first.lambda - self.second.lambda
            + resonance(self.xi1, self.xi2, self.alpha)
    }
}

/// Frequency region on the half `|xi1| <= |xi2|`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DPart {
    /// `4|xi1| <= |xi2|`, `|xi1| <= 2`
    D11,
    /// `4|xi1| <= |xi2|`, `|xi1| > 2`
    D12,
    /// `|xi2| < 4|xi1|` outside `D22`
    D21,
    /// `|xi2| < 4|xi1|`, `xi1 xi2 < 0`, `|xi| <= |xi1|/2`, `|xi2| >= 1`
    D22,
}

impl DPart {
    pub const ALL: [DPart; 4] = [DPart::D11, DPart::D12, DPart::D21, DPart::D22];
}

/// Which modulation dominates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum APart {
    A,
    A1,
    A2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RegionLabel {
    pub d_part: DPart,
    pub a_part: APart,
}

impl fmt::Display for RegionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}/{:?}", self.d_part, self.a_part)
    }
}

/// Region of a tuple with `|xi1| <= |xi2|`.
///
/// Boundaries are assigned deterministically: `|xi1| = 2` goes to `D11`, and
/// equal modulations go to `A`, then `A1`, then `A2`.
pub fn classify_region(
    xi1: f64,
    xi2: f64,
    lambda: f64,
    lambda1: f64,
    lambda2: f64,
) -> Result<RegionLabel> {
    if ![xi1, xi2, lambda, lambda1, lambda2]
        .iter()
        .all(|v| v.is_finite())
    {
        return Err(LabError::Precondition(
            "region arguments must be finite".into(),
        ));
    }
    if xi1.abs() > xi2.abs() {
        return Err(LabError::Precondition(format!(
            "classify_region needs |xi1| <= |xi2|, got xi1 = {xi1}, xi2 = {xi2}"
        )));
    }
    let xi = xi1 + xi2;
    let d_part = if 4.0 * xi1.abs() <= xi2.abs() {
        if xi1.abs() <= 2.0 {
            DPart::D11
        } else {
            DPart::D12
        }
    } else if xi1 * xi2 < 0.0 && xi.abs() <= 0.5 * xi1.abs() && xi2.abs() >= 1.0 {
        DPart::D22
    } else {
        DPart::D21
    };
    // <x> is increasing in |x|, so comparing |lambda| suffices
    let (l, l1, l2) = (lambda.abs(), lambda1.abs(), lambda2.abs());
    let a_part = if l >= l1 && l >= l2 {
        APart::A
    } else if l1 >= l2 {
        APart::A1
    } else {
        APart::A2
    };
    Ok(RegionLabel { d_part, a_part })
}

/// Applies the `xi1 <-> xi2` symmetry before classifying a convolution tuple.
pub fn classify_symmetric(tau1: f64, xi1: f64, tau2: f64, xi2: f64, alpha: f64) -> RegionLabel {
    let ((t1, x1), (t2, x2)) = if xi1.abs() <= xi2.abs() {
        ((tau1, xi1), (tau2, xi2))
    } else {
        ((tau2, xi2), (tau1, xi1))
    };
    let w = ConvolutionWeights::new(t1, x1, t2, x2, alpha);
    classify_region(x1, x2, w.output.lambda, w.first.lambda, w.second.lambda)
        .expect("ordered finite tuple")
}

// ---------------------------------------------------------------------------
// Bilinear operators

/// Discrete convolution shared by `I` and `K`.
///
/// The first factor runs over the grid without its Nyquist row and column, so
/// that the reflection `a -> -a` stays on the grid; this is what makes the two
/// operators exact adjoints of each other. The second factor sits at
/// `out - a` (`reflect = false`) or `out + a` (`reflect = true`); pairs that
/// leave the grid are dropped.
fn convolve(
    first: &SpaceTimeField,
    second: &SpaceTimeField,
    reflect: bool,
    kernel: impl Fn(f64, f64, f64) -> f64 + Sync,
) -> Result<SpaceTimeField> {
    if !first.same_grid(second) {
        return Err(LabError::GridMismatch);
    }
    let space = *first.space();
    let time = *first.time();
    let n = space.n_modes() as i64;
    let m = time.n_modes() as i64;
    let (hn, hm) = (n / 2 - 1, m / 2 - 1);
    let measure = first.measure();
    let a_coeffs = first.coeffs();
    let b_coeffs = second.coeffs();
    let mu = m as usize;

    let columns: Vec<Vec<Complex64>> = (0..n)
        .into_par_iter()
        .map(|ox| {
            let mut out = vec![Complex64::new(0.0, 0.0); mu];
            for ax in 0..n - 1 {
                let sx = if reflect { ox + ax - hn } else { ox - ax + hn };
                if !(0..n).contains(&sx) {
                    continue;
                }
                let k = kernel(
                    space.frequency(ox as usize),
                    space.frequency(ax as usize),
                    space.frequency(sx as usize),
                );
                if k == 0.0 {
                    continue;
                }
                let a_col = &a_coeffs[ax as usize * mu..(ax as usize + 1) * mu];
                let b_col = &b_coeffs[sx as usize * mu..(sx as usize + 1) * mu];
                for ot in 0..m {
                    let (lo, hi) = if reflect {
                        ((hm - ot).max(0), (m - 1 + hm - ot).min(m - 2))
                    } else {
                        ((ot + hm - m + 1).max(0), (ot + hm).min(m - 2))
                    };
                    let mut acc = Complex64::new(0.0, 0.0);
                    for at in lo..=hi {
                        let st = if reflect { ot + at - hm } else { ot - at + hm };
                        acc += a_col[at as usize] * b_col[st as usize];
                    }
                    out[ot as usize] += acc * k;
                }
            }
            out.iter().map(|c| c * measure).collect()
        })
        .collect();
    SpaceTimeField::new(space, time, columns.concat())
}

/// `F I(u1, u2)(tau, xi) = int ||xi1|^(2s) - |xi2|^(2s)|^(1/2) F u1(1) F u2(2)`
/// over `(tau, xi) = (tau1, xi1) + (tau2, xi2)`, as a Riemann sum with the
/// cell measure `dtau1 dxi1`.
pub fn bilinear_i(u1: &SpaceTimeField, u2: &SpaceTimeField, s: f64) -> Result<SpaceTimeField> {
    ensure(s.is_finite() && s > 0.0, || {
        format!("kernel exponent s must be positive, got {s}")
    })?;
    let p = 2.0 * s;
    convolve(u1, u2, false, move |_, x1, x2| {
        (x1.abs().powf(p) - x2.abs().powf(p)).abs().sqrt()
    })
}

/// `F K(u1, u2)(tau, xi) = int ||xi|^alpha - |xi1|^alpha|^(1/2) F conj(u1)(1) F u2(2)`.
///
/// With `F conj(u1)(eta) = conj(F u1(-eta))` this is evaluated as a sum over
/// `a = -eta` of `conj(F u1(a)) F u2(out + a)`, the exact discrete adjoint of
/// `u2 -> I^(alpha/2)(u1, u2)`.
pub fn bilinear_k(u1: &SpaceTimeField, u2: &SpaceTimeField, alpha: f64) -> Result<SpaceTimeField> {
    ensure(alpha.is_finite() && alpha > 0.0, || {
        format!("alpha must be positive, got {alpha}")
    })?;
    let conj = SpaceTimeField::new(
        *u1.space(),
        *u1.time(),
        u1.coeffs().iter().map(|c| c.conj()).collect(),
    )?;
    convolve(&conj, u2, true, move |out, a, _| {
        (out.abs().powf(alpha) - a.abs().powf(alpha)).abs().sqrt()
    })
}

/// Coefficients drawn uniformly from the unit disc.
pub fn random_space_time_field(
    space: FrequencyGrid,
    time: FrequencyGrid,
    seed: u64,
) -> SpaceTimeField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    SpaceTimeField::from_fn(space, time, |_, _| loop {
        let z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        if z.norm_sqr() <= 1.0 {
            break z;
        }
    })
}

/// Gaussian bump in `(xi, lambda)` coordinates, i.e. concentrated near the
/// curve `tau = xi |xi|^alpha + modulation_center`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModulatedBump {
    pub amplitude: Complex64,
    pub xi_center: f64,
    pub xi_width: f64,
    pub modulation_center: f64,
    pub modulation_width: f64,
}

impl ModulatedBump {
    pub fn sample(
        &self,
        space: FrequencyGrid,
        time: FrequencyGrid,
        alpha: Alpha,
    ) -> SpaceTimeField {
        SpaceTimeField::from_fn(space, time, |tau, xi| {
            let a = (xi - self.xi_center) / self.xi_width;
            let l = (tau - alpha.dispersion(xi) - self.modulation_center) / self.modulation_width;
            self.amplitude * (-(a * a + l * l)).exp()
        })
    }
}

// ---------------------------------------------------------------------------
// Ratio reports

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateKind {
    Resonance,
    Strichartz,
    BilinearStr,
    DualBilinear,
    MainBilinear,
    Smoothing,
}

impl EstimateKind {
    pub const ALL: [EstimateKind; 6] = [
        EstimateKind::Resonance,
        EstimateKind::Strichartz,
        EstimateKind::BilinearStr,
        EstimateKind::DualBilinear,
        EstimateKind::MainBilinear,
        EstimateKind::Smoothing,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EstimateKind::Resonance => "resonance",
            EstimateKind::Strichartz => "strichartz",
            EstimateKind::BilinearStr => "bilinear_str",
            EstimateKind::DualBilinear => "dual_bilinear",
            EstimateKind::MainBilinear => "main_bilinear",
            EstimateKind::Smoothing => "smoothing",
        }
    }

    /// Lower bounds report an infimum, upper bounds a supremum.
    pub fn is_lower_bound(self) -> bool {
        matches!(self, EstimateKind::Resonance | EstimateKind::Smoothing)
    }
}

impl fmt::Display for EstimateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimateKind {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self> {
        let key = s.replace('-', "_");
        EstimateKind::ALL
            .into_iter()
            .find(|k| k.name() == key)
            .ok_or_else(|| {
                let names: Vec<_> = EstimateKind::ALL.iter().map(|k| k.name()).collect();
                LabError::InvalidParameter(format!(
                    "unknown estimate kind {s}; expected one of {}",
                    names.join(", ")
                ))
            })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleDescriptor {
    pub index: usize,
    pub label: String,
    pub coords: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendPoint {
    pub resolution: String,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub kind: EstimateKind,
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sup_ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inf_ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub argmax: Option<SampleDescriptor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub argmin: Option<SampleDescriptor>,
    pub sample_count: usize,
    /// Samples whose right side vanished.
    pub skipped_count: usize,
    /// Extremal ratio per resolution, coarsest first; the headline ratio is
    /// the last entry.
    pub refinement_trend: Vec<TrendPoint>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<EstimateParams>,
    /// Regions of the dominant contributions (main bilinear only), keyed by
    /// [`RegionLabel`]'s display form.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub region_histogram: BTreeMap<String, usize>,
}

impl RatioReport {
    /// The reported sup or inf.
    pub fn ratio(&self) -> f64 {
        self.sup_ratio.or(self.inf_ratio).unwrap_or(f64::NAN)
    }

    /// `max / min - 1` over the refinement trend.
    pub fn relative_spread(&self) -> f64 {
        let hi = self
            .refinement_trend
            .iter()
            .map(|t| t.ratio)
            .fold(0.0, f64::max);
        let lo = self
            .refinement_trend
            .iter()
            .map(|t| t.ratio)
            .fold(f64::INFINITY, f64::min);
        hi / lo - 1.0
    }

    /// Histogram collapsed onto the `D` regions.
    pub fn d_part_counts(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for (key, n) in &self.region_histogram {
            let d = key.split('/').next().unwrap_or(key).to_string();
            *out.entry(d).or_insert(0) += n;
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let fmt_err = |m: String| Err(LabError::Format(m));
        match (self.sup_ratio, self.inf_ratio) {
            (Some(r), None) | (None, Some(r)) => {
                if !(r.is_finite() && r >= 0.0) {
                    return fmt_err(format!("ratio {r} is not finite and nonnegative"));
                }
            }
            _ => return fmt_err("exactly one of sup_ratio and inf_ratio must be set".into()),
        }
        if self.refinement_trend.is_empty() {
            return fmt_err("refinement trend is empty".into());
        }
        if let Some(t) = self
            .refinement_trend
            .iter()
            .find(|t| !(t.ratio.is_finite() && t.ratio >= 0.0))
        {
            return fmt_err(format!(
                "trend ratio {} at {} is invalid",
                t.ratio, t.resolution
            ));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Sweeps

/// One grid on which a ratio is evaluated.
///
/// For the evolution-based kinds the time grid follows from `dt`, the cutoff
/// scale and [`DEFAULT_PADDING`]; the kinds with prescribed space-time inputs
/// use `time_modes` samples of spacing `dt`. The smoothing kind reads
/// `n_modes` as the number of lattice points in `beta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    pub n_modes: usize,
    pub box_length: f64,
    pub dt: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_modes: Option<usize>,
}

impl Resolution {
    pub fn new(n_modes: usize, box_length: f64, dt: f64) -> Self {
        Resolution {
            n_modes,
            box_length,
            dt,
            time_modes: None,
        }
    }

    /// Space-time grid with `time_modes` samples and tau spacing `dtau`.
    pub fn spectral(n_modes: usize, box_length: f64, time_modes: usize, dtau: f64) -> Self {
        Resolution {
            n_modes,
            box_length,
            dt: 2.0 * std::f64::consts::PI / (time_modes as f64 * dtau),
            time_modes: Some(time_modes),
        }
    }

    pub fn label(&self) -> String {
        match self.time_modes {
            Some(m) => format!(
                "N={},L={:.6},M={},dt={}",
                self.n_modes, self.box_length, m, self.dt
            ),
            None => format!("N={},L={:.6},dt={}", self.n_modes, self.box_length, self.dt),
        }
    }

    pub fn space(&self) -> Result<FrequencyGrid> {
        FrequencyGrid::new(self.n_modes, self.box_length)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub kind: EstimateKind,
    pub samples: usize,
    pub seed: u64,
    /// Coarsest first.
    pub resolutions: Vec<Resolution>,
    /// Scale `T` of the time cutoff `psi_T`.
    pub t_scale: f64,
    /// Frequency scale of the drawn inputs.
    pub band: f64,
    /// Reject parameters outside the admissible set (main bilinear only;
    /// disable to explore below the threshold).
    pub require_admissible: bool,
    /// Output points inspected per sample for the region histogram.
    pub top_contributions: usize,
}

impl SweepSpec {
    /// Default grids and input scales for each kind.
    pub fn defaults(kind: EstimateKind, samples: usize, seed: u64) -> Self {
        use std::f64::consts::PI;
        let (resolutions, t_scale, band) = match kind {
            EstimateKind::Resonance => (vec![Resolution::new(0, 1.0, 1.0)], 1.0, 1e3),
            EstimateKind::Strichartz => (
                vec![
                    Resolution::new(256, 16.0 * PI, 0.01),
                    Resolution::new(512, 16.0 * PI, 0.005),
                ],
                1.0,
                4.0,
            ),
            EstimateKind::BilinearStr | EstimateKind::DualBilinear => (
                vec![
                    Resolution::spectral(32, 8.0 * PI, 128, 0.5),
                    Resolution::spectral(64, 16.0 * PI, 256, 0.25),
                ],
                1.0,
                1.5,
            ),
            EstimateKind::MainBilinear => (
                vec![
                    Resolution::new(256, 8.0 * PI, 0.004),
                    Resolution::new(512, 8.0 * PI, 0.002),
                ],
                0.5,
                3.0,
            ),
            EstimateKind::Smoothing => (
                vec![
                    Resolution::new(101, 1.0, 1.0),
                    Resolution::new(1001, 1.0, 1.0),
                ],
                1.0,
                1e3,
            ),
        };
        SweepSpec {
            kind,
            samples,
            seed,
            resolutions,
            t_scale,
            band,
            require_admissible: true,
            top_contributions: 8,
        }
    }
}

/// Random stream owned by sample `i`.
fn sample_rng(seed: u64, i: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i as u64);
    rng
}

fn on_grid(x: f64, spacing: f64) -> f64 {
    (x / spacing).round() * spacing
}

/// One drawn input of a sweep, independent of the resolution.
#[derive(Clone, Debug)]
enum Draw {
    Field(TestFieldSpec, u64),
    Pair([(TestFieldSpec, u64); 2]),
    Bumps(ModulatedBump, ModulatedBump),
    Frequency(f64),
}

fn describe(spec: &TestFieldSpec, seed: u64) -> (String, Vec<f64>) {
    match spec.family {
        TestFamily::Gaussian {
            amplitude,
            width,
            center,
        } => ("gaussian".into(), vec![amplitude, width, center]),
        TestFamily::WavePacket {
            amplitude,
            width,
            center,
            carrier,
        } => (
            "wave_packet".into(),
            vec![amplitude, width, center, carrier],
        ),
        TestFamily::RandomBandlimited { amplitude, band } => (
            "random_bandlimited".into(),
            vec![amplitude, band, seed as f64],
        ),
    }
}

/// Carrier pairs aimed at each `D` region, or a random band-limited pair.
const PAIR_TARGETS: [&str; 5] = ["D11", "D12", "D21", "D22", "random"];

fn draw(spec: &SweepSpec, i: usize, spacing: f64) -> (Draw, String, Vec<f64>) {
    let mut rng = sample_rng(spec.seed, i);
    match spec.kind {
        EstimateKind::Strichartz => {
            let family = match i % 3 {
                0 => TestFamily::RandomBandlimited {
                    amplitude: rng.gen_range(0.5..2.0),
                    band: spec.band,
                },
                1 => TestFamily::Gaussian {
                    amplitude: rng.gen_range(0.5..2.0),
                    width: rng.gen_range(0.75..3.0),
                    center: rng.gen_range(-4.0..4.0),
                },
                _ => TestFamily::WavePacket {
                    amplitude: rng.gen_range(0.5..2.0),
                    width: rng.gen_range(1.0..3.0),
                    center: rng.gen_range(-4.0..4.0),
                    carrier: on_grid(rng.gen_range(0.5..spec.band), spacing),
                },
            };
            let field_seed = rng.gen();
            let fs = TestFieldSpec::real(family);
            let (label, coords) = describe(&fs, field_seed);
            (Draw::Field(fs, field_seed), label, coords)
        }
        EstimateKind::MainBilinear => {
            let target = PAIR_TARGETS[i % PAIR_TARGETS.len()];
            let mut pick = |lo: f64, hi: f64| on_grid(rng.gen_range(lo..=hi), spacing);
            let carriers = match target {
                "D11" => Some((pick(0.75, 1.5), pick(5.0, 7.0))),
                "D12" => Some((pick(2.25, 2.5), pick(10.0, 11.0))),
                "D21" => Some((pick(2.0, 3.0), pick(3.0, 4.0))),
                "D22" => {
                    let x2 = pick(2.5, 3.5);
                    Some((-(x2 - pick(0.25, 0.5)), x2))
                }
                _ => None,
            };
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let make = |rng: &mut ChaCha8Rng, carrier: Option<f64>| {
                let family = match carrier {
                    Some(k) => TestFamily::WavePacket {
                        amplitude: rng.gen_range(0.5..1.5),
                        width: rng.gen_range(2.5..4.0),
                        center: rng.gen_range(-3.0..3.0),
                        carrier: sign * k,
                    },
                    None => TestFamily::RandomBandlimited {
                        amplitude: rng.gen_range(0.5..1.5),
                        band: spec.band,
                    },
                };
                (TestFieldSpec::real(family).complex().zero_mean(), rng.gen())
            };
            let a = make(&mut rng, carriers.map(|c| c.0));
            let b = make(&mut rng, carriers.map(|c| c.1));
            let mut coords = describe(&a.0, a.1).1;
            coords.extend(describe(&b.0, b.1).1);
            (Draw::Pair([a, b]), format!("{target}-target"), coords)
        }
        EstimateKind::BilinearStr | EstimateKind::DualBilinear => {
            let near = |rng: &mut ChaCha8Rng| ModulatedBump {
                amplitude: Complex64::from_polar(rng.gen_range(0.5..2.0), rng.gen_range(0.0..6.28)),
                xi_center: rng.gen_range(-spec.band..=spec.band),
                xi_width: rng.gen_range(0.5..0.8),
                modulation_center: rng.gen_range(-1.0..1.0),
                modulation_width: rng.gen_range(0.75..1.5),
            };
            let a = near(&mut rng);
            let b = if spec.kind == EstimateKind::DualBilinear {
                // an arbitrary L2 function: off the curve, wider in modulation
                ModulatedBump {
                    modulation_center: rng.gen_range(-8.0..8.0),
                    modulation_width: rng.gen_range(1.0..3.0),
                    ..near(&mut rng)
                }
            } else {
                near(&mut rng)
            };
            let coords = vec![
                a.xi_center,
                a.modulation_center,
                b.xi_center,
                b.modulation_center,
            ];
            (Draw::Bumps(a, b), "modulated_bumps".into(), coords)
        }
        EstimateKind::Smoothing => {
            // log-uniform |xi2| in [2^-10, 2^10], random sign
            let xi2 =
                2f64.powf(rng.gen_range(-10.0..10.0)) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            (Draw::Frequency(xi2), "xi2".into(), vec![xi2])
        }
        EstimateKind::Resonance => unreachable!("resonance scans use resonance_infimum"),
    }
}

/// `X_{0,0,b}` parameters sharing `alpha`, `b`, `b'` with `p`.
fn plain(p: &EstimateParams) -> EstimateParams {
    EstimateParams {
        s: 0.0,
        omega: 0.0,
        ..*p
    }
}

fn ratio_of(lhs: f64, rhs: f64) -> Option<f64> {
    (rhs > 0.0).then_some(lhs / rhs)
}

/// Steps needed so the trajectory covers the support `[-2T, 2T]` of `psi_T`.
fn support_steps(t_scale: f64, dt: f64) -> i64 {
    (CutoffProfile::SUPPORT_RADIUS * t_scale / dt - 1e-9).ceil() as i64
}

/// `max_x |u(x)|`, with the field resampled on at least `points` points.
fn sup_abs(u: &SpectralField, points: usize) -> f64 {
    let g = u.grid();
    let n = points.max(g.n_modes()).next_power_of_two();
    let fine = FrequencyGrid::new(n, g.box_length()).expect("refinement of a valid grid");
    let mut c = vec![Complex64::new(0.0, 0.0); n];
    for (i, z) in u.coeffs().iter().enumerate() {
        c[fine
            .index_of_mode(g.mode(i))
            .expect("fine grid contains coarse")] = *z;
    }
    inverse_transform(&fine, &c)
        .expect("length matches grid")
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Physical resampling density for the `L^inf_x` part of the Strichartz norm.
const SUP_SPACING: f64 = 0.025;

/// `||J^((alpha-1)/4) (psi_T W(t) u0)||_{L^4_t L^inf_x} / ||psi_T W(t) u0||_{X_{0,0,b}}`.
pub fn strichartz_ratio(
    u0: &SpectralField,
    t_scale: f64,
    dt: f64,
    p: &EstimateParams,
) -> Result<Option<f64>> {
    let alpha = p.alpha;
    let traj = free_trajectory(u0, dt, support_steps(t_scale, dt), alpha)?;
    let rhs = bourgain_norm(&localized_lift(&traj, t_scale)?, &plain(p))?;
    let cutoff = CutoffProfile::new(t_scale)?;
    let points = (u0.grid().box_length() / SUP_SPACING).ceil() as usize;
    let order = (alpha.value() - 1.0) / 4.0;
    let sups = traj
        .steps()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|k| {
            let w = cutoff.value(k as f64 * dt);
            if w == 0.0 {
                return Ok(0.0);
            }
            let u = apply_multiplier(traj.state_at_step(k).unwrap(), Multiplier::Bessel, order)?;
            Ok(w * sup_abs(&u, points))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(ratio_of(time_lebesgue(&sups, dt, 4.0), rhs))
}

/// `||I^(alpha/2)(u1, u2)||_{L2} / (||u1||_{X_{0,0,b}} ||u2||_{X_{0,0,b}})`.
pub fn bilinear_str_ratio(
    u1: &SpaceTimeField,
    u2: &SpaceTimeField,
    p: &EstimateParams,
) -> Result<Option<f64>> {
    let lhs = bilinear_i(u1, u2, p.alpha.value() / 2.0)?.l2_norm();
    let q = plain(p);
    Ok(ratio_of(
        lhs,
        bourgain_norm(u1, &q)? * bourgain_norm(u2, &q)?,
    ))
}

/// `||K^(alpha/2)(u1, u2)||_{X_{0,0,-b}} / (||u1||_{X_{0,0,b}} ||u2||_{L2})`.
pub fn dual_bilinear_ratio(
    u1: &SpaceTimeField,
    u2: &SpaceTimeField,
    p: &EstimateParams,
) -> Result<Option<f64>> {
    let q = plain(p);
    let lhs = bourgain_norm_with_b(&bilinear_k(u1, u2, p.alpha.value())?, &q, -p.b)?;
    Ok(ratio_of(lhs, bourgain_norm(u1, &q)? * u2.l2_norm()))
}

/// Ratio and dominant-contribution regions of one main bilinear sample.
#[derive(Clone, Debug, PartialEq)]
pub struct BilinearSample {
    pub ratio: Option<f64>,
    pub regions: Vec<RegionLabel>,
}

/// `||d/dx (u1 u2)||_{X_{s,omega,b'}} / (||u1||_{X_{s,omega,b}} ||u2||_{X_{s,omega,b}})`
/// for `u_i = psi_T(t) W(t) u0_i`.
///
/// The product is formed pointwise in space-time without aliasing. When
/// `top > 0`, the `top` output points with the largest weighted density are
/// traced back to their largest convolution term, whose region is recorded.
pub fn main_bilinear_ratio(
    u01: &SpectralField,
    u02: &SpectralField,
    t_scale: f64,
    dt: f64,
    p: &EstimateParams,
    top: usize,
) -> Result<BilinearSample> {
    let alpha = p.alpha;
    let steps = support_steps(t_scale, dt);
    let t1 = free_trajectory(u01, dt, steps, alpha)?;
    let t2 = free_trajectory(u02, dt, steps, alpha)?;
    let v1 = localized_lift(&t1, t_scale)?;
    let v2 = localized_lift(&t2, t_scale)?;
    let rhs = bourgain_norm(&v1, p)? * bourgain_norm(&v2, p)?;

    let states = t1
        .states()
        .par_iter()
        .zip(t2.states())
        .map(|(a, b)| Ok(product(a, b)?.map_coeffs(|xi, c| c * Complex64::new(0.0, xi))))
        .collect::<Result<Vec<_>>>()?;
    let prod = crate::evolution::Trajectory::new(-steps, dt, states, alpha)?;
    let cutoff = CutoffProfile::new(t_scale)?;
    let out = lift_weighted(
        &prod,
        CutoffProfile::SUPPORT_RADIUS * t_scale,
        DEFAULT_PADDING,
        |t| cutoff.value(t).powi(2),
    )?;
    let lhs = bourgain_norm_with_b(&out, p, p.b_prime)?;
    let regions = if top > 0 {
        dominant_regions(&out, &v1, &v2, p, top)
    } else {
        Vec::new()
    };
    Ok(BilinearSample {
        ratio: ratio_of(lhs, rhs),
        regions,
    })
}

fn dominant_regions(
    out: &SpaceTimeField,
    v1: &SpaceTimeField,
    v2: &SpaceTimeField,
    p: &EstimateParams,
    top: usize,
) -> Vec<RegionLabel> {
    let space = *out.space();
    let time = *out.time();
    let m = time.n_modes();
    let q = EstimateParams { b: p.b_prime, ..*p };
    let mut density: Vec<(f64, usize)> = out
        .coeffs()
        .iter()
        .enumerate()
        .filter_map(|(idx, c)| {
            let (jx, jt) = (idx / m, idx % m);
            let xi = space.frequency(jx);
            (xi != 0.0 && c.norm_sqr() > 0.0).then(|| {
                (
                    bourgain_weight(time.frequency(jt), xi, &q) * c.norm_sqr(),
                    idx,
                )
            })
        })
        .collect();
    density.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let (n, mi) = (space.n_modes() as i64, m as i64);
    let (hn, hm) = (n / 2 - 1, mi / 2 - 1);
    density
        .iter()
        .take(top)
        .filter_map(|&(_, idx)| {
            let (ox, ot) = ((idx / m) as i64, (idx % m) as i64);
            let mut best: Option<(f64, usize, usize, usize, usize)> = None;
            for ax in 0..n {
                let sx = ox - ax + hn;
                if !(0..n).contains(&sx) {
                    continue;
                }
                for at in 0..mi {
                    let st = ot - at + hm;
                    if !(0..mi).contains(&st) {
                        continue;
                    }
                    let (ax, at, sx, st) = (ax as usize, at as usize, sx as usize, st as usize);
                    let w = (v1.at(at, ax) * v2.at(st, sx)).norm();
                    if best.is_none_or(|b| w > b.0) {
                        best = Some((w, ax, at, sx, st));
                    }
                }
            }
            let (w, ax, at, sx, st) = best?;
            (w > 0.0).then(|| {
                classify_symmetric(
                    time.frequency(at),
                    space.frequency(ax),
                    time.frequency(st),
                    space.frequency(sx),
                    p.alpha.value(),
                )
            })
        })
        .collect()
}

/// Both sides of the pointwise lower bound on `D22`:
/// `||beta|^alpha - 1|^(1/2) |xi2|^(alpha/2)` against
/// `(1/2) |xi|^(1/2) |xi2|^((alpha-1)/2)` with `xi1 = beta xi2`.
pub fn smoothing_sides(beta: f64, xi2: f64, alpha: f64) -> (f64, f64) {
    let xi = (1.0 + beta) * xi2;
    let lhs = (beta.abs().powf(alpha) - 1.0).abs().sqrt() * xi2.abs().powf(alpha / 2.0);
    let rhs = 0.5 * xi.abs().sqrt() * xi2.abs().powf((alpha - 1.0) / 2.0);
    (lhs, rhs)
}

pub fn smoothing_ratio(beta: f64, xi2: f64, alpha: f64) -> Option<f64> {
    let (lhs, rhs) = smoothing_sides(beta, xi2, alpha);
    ratio_of(lhs, rhs)
}

/// Lattice of `n` points on `[-1, -1/4]`, endpoints included.
fn beta_lattice(n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![-1.0];
    }
    (0..n)
        .map(|j| -1.0 + 0.75 * j as f64 / (n - 1) as f64)
        .collect()
}

/// Ratios (or `None` when the right side vanishes) of one draw at one resolution.
fn evaluate(
    spec: &SweepSpec,
    draw: &Draw,
    res: &Resolution,
    p: &EstimateParams,
    top: usize,
) -> Result<(Vec<Option<f64>>, Vec<RegionLabel>)> {
    match draw {
        Draw::Field(fs, seed) => {
            let u0 = make_test_field(&res.space()?, fs, *seed)?;
            Ok((
                vec![strichartz_ratio(&u0, spec.t_scale, res.dt, p)?],
                vec![],
            ))
        }
        Draw::Pair([(a, sa), (b, sb)]) => {
            let g = res.space()?;
            let u1 = make_test_field(&g, a, *sa)?;
            let u2 = make_test_field(&g, b, *sb)?;
            let r = main_bilinear_ratio(&u1, &u2, spec.t_scale, res.dt, p, top)?;
            Ok((vec![r.ratio], r.regions))
        }
        Draw::Bumps(a, b) => {
            let m = res.time_modes.ok_or_else(|| {
                LabError::InvalidParameter("this kind needs resolutions with time_modes".into())
            })?;
            let space = res.space()?;
            let time = FrequencyGrid::new(m, m as f64 * res.dt)?;
            let u1 = a.sample(space, time, p.alpha);
            let u2 = b.sample(space, time, p.alpha);
            let r = if spec.kind == EstimateKind::DualBilinear {
                dual_bilinear_ratio(&u1, &u2, p)?
            } else {
                bilinear_str_ratio(&u1, &u2, p)?
            };
            Ok((vec![r], vec![]))
        }
        Draw::Frequency(xi2) => Ok((
            beta_lattice(res.n_modes)
                .into_iter()
                .map(|beta| smoothing_ratio(beta, *xi2, p.alpha.value()))
                .collect(),
            vec![],
        )),
    }
}

/// Sup (or inf, for lower bounds) of the left over the right side of the
/// inequality `spec.kind` across `spec.samples` drawn inputs, at every
/// resolution of `spec`.
///
/// Samples whose right side vanishes are counted in `skipped_count`. Each
/// sample owns its random stream, so the report does not depend on the number
/// of worker threads.
pub fn estimate_ratio(spec: &SweepSpec, p: &EstimateParams) -> Result<RatioReport> {
    if spec.samples == 0 {
        return Err(LabError::EmptySample);
    }
    ensure(!spec.resolutions.is_empty(), || {
        "at least one resolution is required".to_string()
    })?;
    if spec.kind == EstimateKind::Resonance {
        let sampler = ResonanceSampler {
            uniform_draws: spec.samples,
            range: spec.band,
            ..ResonanceSampler::default()
        };
        return resonance_infimum(p.alpha.value(), &sampler, spec.seed);
    }
    match spec.kind {
        EstimateKind::MainBilinear if spec.require_admissible => p.check_admissible()?,
        EstimateKind::Smoothing => {}
        _ => ensure(p.b > 0.5, || format!("b = {} must exceed 1/2", p.b))?,
    }
    ensure(spec.t_scale.is_finite() && spec.t_scale > 0.0, || {
        format!("t_scale must be positive, got {}", spec.t_scale)
    })?;

    let spacing = 2.0 * std::f64::consts::PI / spec.resolutions[0].box_length;
    let draws: Vec<(Draw, String, Vec<f64>)> =
        (0..spec.samples).map(|i| draw(spec, i, spacing)).collect();
    let lower = spec.kind.is_lower_bound();

    let mut trend = Vec::with_capacity(spec.resolutions.len());
    let mut histogram = BTreeMap::new();
    let mut headline = None;
    for (level, res) in spec.resolutions.iter().enumerate() {
        let top = if level == 0 && spec.kind == EstimateKind::MainBilinear {
            spec.top_contributions
        } else {
            0
        };
        let results = draws
            .par_iter()
            .map(|(d, _, _)| evaluate(spec, d, res, p, top))
            .collect::<Result<Vec<_>>>()?;

        let mut best: Option<(f64, usize)> = None;
        let (mut valid, mut skipped) = (0, 0);
        for (i, (ratios, regions)) in results.iter().enumerate() {
            for r in ratios {
                match r {
                    Some(r) => {
                        valid += 1;
                        let better = best.is_none_or(|(b, _)| if lower { *r < b } else { *r > b });
                        if better {
                            best = Some((*r, i));
                        }
                    }
                    None => skipped += 1,
                }
            }
            for label in regions {
                *histogram.entry(label.to_string()).or_insert(0) += 1;
            }
        }
        let (value, index) = best.ok_or(LabError::EmptySample)?;
        trend.push(TrendPoint {
            resolution: res.label(),
            ratio: value,
        });
        headline = Some((value, index, valid, skipped));
    }

    let (value, index, valid, skipped) = headline.expect("at least one resolution");
    let descriptor = SampleDescriptor {
        index,
        label: draws[index].1.clone(),
        coords: draws[index].2.clone(),
    };
    let (sup_ratio, inf_ratio, argmax, argmin) = if lower {
        (None, Some(value), None, Some(descriptor))
    } else {
        (Some(value), None, Some(descriptor), None)
    };
    let report = RatioReport {
        kind: spec.kind,
        alpha: p.alpha.value(),
        sup_ratio,
        inf_ratio,
        argmax,
        argmin,
        sample_count: valid,
        skipped_count: skipped,
        refinement_trend: trend,
        seed: spec.seed,
        params: Some(*p),
        region_histogram: histogram,
    };
    report.validate()?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn alpha() -> Alpha {
        Alpha::new(1.5).unwrap()
    }

    #[test]
    fn resonance_examples() {
        assert_eq!(resonance(0.0, 3.0, 1.5), 0.0);
        assert!((resonance(1.0, 1.0, 2.0) - 6.0).abs() < 1e-14);
        assert!((resonance(1.0, 1.0, 1.5) - (2f64.powf(2.5) - 2.0)).abs() < 1e-14);
        assert!((resonance(-1.3, 0.4, 1.7) + resonance(1.3, -0.4, 1.7)).abs() < 1e-14);
    }

    #[test]
    fn resonance_ratio_on_the_diagonal() {
        for a in [1.1, 1.5, 1.9] {
            for x in [1e-3, 0.7, 5.0, 800.0] {
                let r = resonance_ratio(x, x, a).unwrap();
                assert!(
                    (r - (2.0 - 2f64.powf(1.0 - a))).abs() < 1e-12,
                    "{a} {x} {r}"
                );
            }
        }
        assert_eq!(resonance_ratio(2.0, -2.0, 1.5), None);
        assert_eq!(resonance_ratio(0.0, 1.0, 1.5), None);
    }

    #[test]
    fn small_resonance_scan_is_deterministic() {
        let sampler = ResonanceSampler {
            uniform_draws: 20_000,
            ..ResonanceSampler::default()
        };
        let a = resonance_infimum(1.5, &sampler, 3).unwrap();
        let b = resonance_infimum(1.5, &sampler, 3).unwrap();
        assert_eq!(a, b);
        assert!(a.inf_ratio.unwrap() > 0.0);
        // the dyadic ladder contains xi1 = -xi2, which is skipped
        assert_eq!(a.skipped_count, 42);
        assert_eq!(a.refinement_trend.len(), 2);
    }

    #[test]
    fn modulation_weight_examples() {
        let w = modulation_weights(2.0, -1.0, 1.5);
        assert_eq!((w.sigma, w.lambda), (3.0, 3.0));
        let z = modulation_weights(0.0, 0.0, 1.3);
        assert_eq!((z.sigma, z.lambda), (0.0, 0.0));
        let xi: f64 = 1.7;
        assert_eq!(modulation_weights(xi * xi.powf(1.5), xi, 1.5).lambda, 0.0);
    }

    #[test]
    fn region_examples() {
        let r = |a, b| classify_region(a, b, 0.0, 0.0, 0.0).unwrap().d_part;
        assert_eq!(r(1.0, 8.0), DPart::D11);
        assert_eq!(r(3.0, 13.0), DPart::D12);
        assert_eq!(r(-2.0, 2.5), DPart::D22);
        assert_eq!(r(2.0, 2.5), DPart::D21);
        let l = classify_region(1.0, 8.0, 5.0, 1.0, 2.0).unwrap();
        assert_eq!(l.a_part, APart::A);
        assert_eq!(
            classify_region(1.0, 1.0, 1.0, -3.0, 3.0).unwrap().a_part,
            APart::A1
        );
        assert_eq!(
            classify_region(1.0, 1.0, 1.0, 0.0, 3.0).unwrap().a_part,
            APart::A2
        );
        assert!(matches!(
            classify_region(3.0, 1.0, 0.0, 0.0, 0.0),
            Err(LabError::Precondition(_))
        ));
    }

    fn delta(space: FrequencyGrid, time: FrequencyGrid, k: i64, amp: f64) -> SpaceTimeField {
        let jx = space.index_of_mode(k).unwrap();
        let jt = time.zero_index();
        let mut c = vec![Complex64::new(0.0, 0.0); space.n_modes() * time.n_modes()];
        c[jx * time.n_modes() + jt] = Complex64::new(amp, 0.0);
        SpaceTimeField::new(space, time, c).unwrap()
    }

    #[test]
    fn delta_inputs_hit_a_single_output() {
        let space = FrequencyGrid::new(16, 2.0 * PI).unwrap(); // integer frequencies
        let time = FrequencyGrid::new(8, 4.0).unwrap();
        let u1 = delta(space, time, 1, 2.0);
        let u2 = delta(space, time, 2, 3.0);
        let i = bilinear_i(&u1, &u2, 0.75).unwrap();
        let expected = (1.0 - 2f64.powf(1.5)).abs().sqrt() * 6.0 * u1.measure();
        let at = i.at(time.zero_index(), space.index_of_mode(3).unwrap());
        assert!((at.re - expected).abs() < 1e-14 && at.im == 0.0);
        assert!((i.l2_norm() - expected * u1.measure().sqrt()).abs() < 1e-13);

        // u1 at -1 means conj(u1) sits at +1; paired with u2 at 2 the output is
        // xi = 3 with kernel |3^a - 1|^(1/2)
        let k = bilinear_k(&delta(space, time, -1, 2.0), &u2, 1.5).unwrap();
        let at = k.at(time.zero_index(), space.index_of_mode(3).unwrap());
        let expected = (3f64.powf(1.5) - 1.0).sqrt() * 6.0 * u1.measure();
        assert!((at.re - expected).abs() < 1e-13, "{at} vs {expected}");
        assert!((k.l2_norm() - expected * u1.measure().sqrt()).abs() < 1e-13);
        // a zero-frequency second factor puts the output at xi = xi1: weight 0
        let k = bilinear_k(&u1, &delta(space, time, 0, 1.0), 1.5).unwrap();
        assert_eq!(k.l2_norm(), 0.0);
    }

    #[test]
    fn equal_moduli_kill_the_i_kernel() {
        let space = FrequencyGrid::new(16, 2.0 * PI).unwrap();
        let time = FrequencyGrid::new(8, 4.0).unwrap();
        let i = bilinear_i(
            &delta(space, time, -2, 1.0),
            &delta(space, time, 2, 1.0),
            0.75,
        )
        .unwrap();
        assert_eq!(i.l2_norm(), 0.0);
    }

    #[test]
    fn i_is_symmetric_and_k_is_its_adjoint() {
        let space = FrequencyGrid::new(16, 4.0 * PI).unwrap();
        let time = FrequencyGrid::new(16, 8.0).unwrap();
        let u1 = random_space_time_field(space, time, 1);
        let u2 = random_space_time_field(space, time, 2);
        let w = random_space_time_field(space, time, 3);
        // symmetry needs both factors free of Nyquist lines
        let strip = |u: &SpaceTimeField| {
            let (n, m) = (space.n_modes(), time.n_modes());
            let mut c = u.coeffs().to_vec();
            for jx in 0..n {
                for jt in 0..m {
                    if jx == n - 1 || jt == m - 1 {
                        c[jx * m + jt] = Complex64::new(0.0, 0.0);
                    }
                }
            }
            SpaceTimeField::new(space, time, c).unwrap()
        };
        let (s1, s2) = (strip(&u1), strip(&u2));
        let a = bilinear_i(&s1, &s2, 0.75).unwrap();
        let b = bilinear_i(&s2, &s1, 0.75).unwrap();
        let diff: f64 = a
            .coeffs()
            .iter()
            .zip(b.coeffs())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        assert!(diff < 1e-12);

        let lhs = bilinear_i(&u1, &u2, 0.75).unwrap().inner(&w).unwrap();
        let rhs = u2.inner(&bilinear_k(&u1, &w, 1.5).unwrap()).unwrap();
        let scale = u1.l2_norm() * u2.l2_norm() * w.l2_norm();
        assert!((lhs - rhs).norm() <= 1e-12 * scale, "{lhs} vs {rhs}");
    }

    #[test]
    fn smoothing_examples() {
        let (l, r) = smoothing_sides(-1.0, 3.0, 1.5);
        assert_eq!((l, r), (0.0, 0.0));
        assert_eq!(smoothing_ratio(-1.0, 3.0, 1.5), None);
        // the ratio depends on beta only
        let a = smoothing_ratio(-0.5, 0.01, 1.5).unwrap();
        let b = smoothing_ratio(-0.5, 900.0, 1.5).unwrap();
        assert!((a - b).abs() < 1e-12 * a);
        assert!(a >= 2.0);
    }

    #[test]
    fn derivative_of_dual_mode_product_vanishes() {
        let g = FrequencyGrid::new(32, 8.0 * PI).unwrap();
        let u = SpectralField::single_mode(g, 3, Complex64::new(1.0, 0.0)).unwrap();
        let v = SpectralField::single_mode(g, -3, Complex64::new(1.0, 0.0)).unwrap();
        let d = product(&u, &v)
            .unwrap()
            .map_coeffs(|xi, c| c * Complex64::new(0.0, xi));
        assert!(d.l2_norm() < 1e-15);
        assert_eq!(d.zero_mode().norm(), 0.0);
    }

    #[test]
    fn ratios_ignore_input_scale() {
        let p = EstimateParams::admissible(alpha(), 0.1).unwrap();
        let g = FrequencyGrid::new(64, 8.0 * PI).unwrap();
        let spec = TestFieldSpec::real(TestFamily::WavePacket {
            amplitude: 1.0,
            width: 3.0,
            center: 0.0,
            carrier: 1.0,
        })
        .complex()
        .zero_mean();
        let u = make_test_field(&g, &spec, 0).unwrap();
        let v = make_test_field(
            &g,
            &TestFieldSpec {
                family: TestFamily::WavePacket {
                    amplitude: 1.0,
                    width: 3.0,
                    center: 1.0,
                    carrier: 5.0,
                },
                ..spec.clone()
            },
            0,
        )
        .unwrap();
        let a = main_bilinear_ratio(&u, &v, 0.5, 0.01, &p, 0)
            .unwrap()
            .ratio
            .unwrap();
        let b = main_bilinear_ratio(&u.scale(2.0), &v.scale(2.0), 0.5, 0.01, &p, 0)
            .unwrap()
            .ratio
            .unwrap();
        assert!((a - b).abs() < 1e-12 * a);
        let s1 = strichartz_ratio(&u, 1.0, 0.02, &p).unwrap().unwrap();
        let s2 = strichartz_ratio(&u.scale(2.0), 1.0, 0.02, &p)
            .unwrap()
            .unwrap();
        assert!((s1 - s2).abs() < 1e-12 * s1);
    }

    #[test]
    fn zero_inputs_are_skipped_not_fatal() {
        let p = EstimateParams::admissible(alpha(), 0.1).unwrap();
        let g = FrequencyGrid::new(32, 8.0 * PI).unwrap();
        let z = SpectralField::zeros(g);
        assert_eq!(strichartz_ratio(&z, 1.0, 0.05, &p).unwrap(), None);
        assert_eq!(
            main_bilinear_ratio(&z, &z, 0.5, 0.05, &p, 2).unwrap().ratio,
            None
        );
    }

    #[test]
    fn smoothing_sweep_reports_inf_and_skips_beta_minus_one() {
        let p = EstimateParams::admissible(alpha(), 0.1).unwrap();
        let spec = SweepSpec::defaults(EstimateKind::Smoothing, 20, 4);
        let r = estimate_ratio(&spec, &p).unwrap();
        assert_eq!(r.skipped_count, 20);
        let a: f64 = 1.5;
        // smallest at beta = -1/4
        let oracle = 2.0 * ((1.0 - 0.25f64.powf(a)) / 0.75).sqrt();
        assert!((r.inf_ratio.unwrap() - oracle).abs() < 1e-12);
        r.validate().unwrap();
    }

    #[test]
    fn report_json_round_trip() {
        let p = EstimateParams::admissible(alpha(), 0.1).unwrap();
        let r = estimate_ratio(&SweepSpec::defaults(EstimateKind::Smoothing, 3, 1), &p).unwrap();
        let s = serde_json::to_string(&r).unwrap();
        assert!(s.contains("\"inf_ratio\"") && !s.contains("\"sup_ratio\""));
        let back: RatioReport = serde_json::from_str(&s).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn kind_names_parse() {
        for k in EstimateKind::ALL {
            assert_eq!(k.name().parse::<EstimateKind>().unwrap(), k);
        }
        assert!("main-bilinear".parse::<EstimateKind>().is_ok());
        assert!("nope".parse::<EstimateKind>().is_err());
    }
}

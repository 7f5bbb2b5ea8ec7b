//! Nonlinear flow of `u_t - |D|^alpha u_x + u u_x = 0`.
//!
//! Written as `u_t = L u + N(u)` with `L = |D|^alpha d/dx` (symbol
//! `i xi |xi|^alpha`, integrated exactly by [`propagate`]) and
//! `N(u) = -(1/2) d/dx (u^2)`.

use log::warn;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, LabError, Result};
use crate::spectral::{bump, propagate, Alpha, CutoffProfile, FrequencyGrid, SpectralField};

/// L2 growth factor that aborts a run.
pub const BLOWUP_FACTOR: f64 = 10.0;

/// States at times `k dt` for consecutive integer steps `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    first_step: i64,
    dt: f64,
    states: Vec<SpectralField>,
    alpha: Alpha,
}

impl Trajectory {
    pub fn new(first_step: i64, dt: f64, states: Vec<SpectralField>, alpha: Alpha) -> Result<Self> {
        ensure(dt.is_finite() && dt > 0.0, || {
            format!("time step must be positive, got {dt}")
        })?;
        if states.is_empty() {
            return Err(LabError::EmptySample);
        }
        let g = *states[0].grid();
        if states.iter().any(|s| *s.grid() != g) {
            return Err(LabError::GridMismatch);
        }
        Ok(Trajectory {
            first_step,
            dt,
            states,
            alpha,
        })
    }

    /// All-zero trajectory on steps `-steps ..= steps`.
    pub fn zeros(grid: FrequencyGrid, dt: f64, steps: i64, alpha: Alpha) -> Result<Self> {
        let states = vec![SpectralField::zeros(grid); (2 * steps + 1) as usize];
        Trajectory::new(-steps, dt, states, alpha)
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.dt
    }

    #[inline]
    pub fn alpha(&self) -> Alpha {
        self.alpha
    }

    #[inline]
    pub fn grid(&self) -> &FrequencyGrid {
        self.states[0].grid()
    }

    #[inline]
    pub fn states(&self) -> &[SpectralField] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// First and last step index, inclusive.
    pub fn step_range(&self) -> (i64, i64) {
        (
            self.first_step,
            self.first_step + self.states.len() as i64 - 1,
        )
    }

    pub fn steps(&self) -> impl Iterator<Item = i64> {
        let (a, b) = self.step_range();
        a..=b
    }

    pub fn times(&self) -> Vec<f64> {
        self.steps().map(|k| k as f64 * self.dt).collect()
    }

    pub fn state_at_step(&self, k: i64) -> Option<&SpectralField> {
        let i = k - self.first_step;
        (i >= 0).then(|| self.states.get(i as usize)).flatten()
    }

    /// State at `t = 0` if the trajectory covers it.
    pub fn initial(&self) -> Option<&SpectralField> {
        self.state_at_step(0)
    }

    /// Largest time magnitude covered.
    pub fn half_span(&self) -> f64 {
        let (a, b) = self.step_range();
        a.abs().max(b.abs()) as f64 * self.dt
    }

    /// Sub-trajectory on steps `from ..= to`.
    pub fn restrict(&self, from: i64, to: i64) -> Result<Self> {
        let (a, b) = self.step_range();
        if from < a || to > b || from > to {
            return Err(LabError::WindowTooShort {
                need_from: from as f64 * self.dt,
                need_to: to as f64 * self.dt,
                have_from: a as f64 * self.dt,
                have_to: b as f64 * self.dt,
            });
        }
        let states = self.states[(from - a) as usize..=(to - a) as usize].to_vec();
        Trajectory::new(from, self.dt, states, self.alpha)
    }

    pub fn map_states(&self, f: impl Fn(i64, &SpectralField) -> SpectralField + Sync) -> Self {
        let first = self.first_step;
        let states = self
            .states
            .par_iter()
            .enumerate()
            .map(|(i, u)| f(first + i as i64, u))
            .collect();
        Trajectory {
            first_step: first,
            dt: self.dt,
            states,
            alpha: self.alpha,
        }
    }

    /// `sup_t ||u(t) - v(t)||_{L2}` over the common steps.
    pub fn sup_l2_distance(&self, other: &Trajectory) -> Result<f64> {
        if self.grid() != other.grid() {
            return Err(LabError::GridMismatch);
        }
        ensure((self.dt - other.dt).abs() <= 1e-12 * self.dt, || {
            format!("time steps differ: {} vs {}", self.dt, other.dt)
        })?;
        let (a0, a1) = self.step_range();
        let (b0, b1) = other.step_range();
        let (lo, hi) = (a0.max(b0), a1.min(b1));
        ensure(lo <= hi, || "trajectories share no time steps".to_string())?;
        let gaps: Result<Vec<f64>> = (lo..=hi)
            .map(|k| {
                self.state_at_step(k)
                    .unwrap()
                    .distance_l2(other.state_at_step(k).unwrap())
            })
            .collect();
        Ok(gaps?.into_iter().fold(0.0, f64::max))
    }

    pub fn sup_l2_norm(&self) -> f64 {
        self.states.iter().map(|u| u.l2_norm()).fold(0.0, f64::max)
    }
}

/// Free evolution `W(k dt) u0` on steps `-steps ..= steps`, evaluated exactly.
pub fn free_trajectory(
    u0: &SpectralField,
    dt: f64,
    steps: i64,
    alpha: Alpha,
) -> Result<Trajectory> {
    ensure(steps >= 0, || {
        format!("step count must be nonnegative, got {steps}")
    })?;
    let states = (-steps..=steps)
        .into_par_iter()
        .map(|k| propagate(u0, k as f64 * dt, alpha))
        .collect::<Result<Vec<_>>>()?;
    Trajectory::new(-steps, dt, states, alpha)
}

/// Highest mode kept by the 2/3 rule: strictly below `N/3`.
pub fn dealias_cutoff(grid: &FrequencyGrid) -> i64 {
    (grid.n_modes() as i64 + 2) / 3 - 1
}

/// `-(1/2) d/dx (u^2)` with 2/3-rule dealiasing of the product.
pub fn nonlinearity(u: &SpectralField) -> SpectralField {
    let kmax = dealias_cutoff(u.grid());
    let v = u.truncate_modes(kmax);
    let sq: Vec<Complex64> = v.to_physical().into_iter().map(|z| z * z).collect();
    let w = SpectralField::from_physical(*u.grid(), &sq)
        .expect("length matches grid")
        .truncate_modes(kmax);
    w.map_coeffs(|xi, c| c * Complex64::new(0.0, -0.5 * xi))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Strang splitting: exact half steps of the linear flow around an RK4
    /// step of the nonlinear flow.
    SplitStep,
    /// Fourth-order exponential time differencing (ETDRK4).
    ExponentialIntegrator,
}

impl std::str::FromStr for Scheme {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "split_step" | "split-step" => Ok(Scheme::SplitStep),
            "exponential_integrator" | "exponential-integrator" | "etdrk4" => {
                Ok(Scheme::ExponentialIntegrator)
            }
            other => Err(LabError::InvalidParameter(format!(
                "unknown scheme {other}"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReferenceSolver {
    pub alpha: Alpha,
    pub dt: f64,
    pub scheme: Scheme,
    /// Drop `N(u)` to recover the free flow.
    pub nonlinear: bool,
}

/// Per-mode diagonal coefficients of one signed step.
struct Stepper {
    scheme: Scheme,
    nonlinear: bool,
    h: f64,
    half_phase: Vec<Complex64>,
    etd: Option<EtdCoefficients>,
}

struct EtdCoefficients {
    e: Vec<Complex64>,
    e2: Vec<Complex64>,
    q: Vec<Complex64>,
    f1: Vec<Complex64>,
    f2: Vec<Complex64>,
    f3: Vec<Complex64>,
}

impl EtdCoefficients {
    /// Contour-integral evaluation of the ETDRK4 weights (circle of radius 1
    /// around each `h L`), stable as `h L -> 0`.
    fn new(grid: &FrequencyGrid, alpha: Alpha, h: f64) -> Self {
        const POINTS: usize = 64;
        let roots: Vec<Complex64> = (0..POINTS)
            .map(|j| Complex64::cis(2.0 * std::f64::consts::PI * (j as f64 + 0.5) / POINTS as f64))
            .collect();
        let n = grid.n_modes();
        let mut c = EtdCoefficients {
            e: Vec::with_capacity(n),
            e2: Vec::with_capacity(n),
            q: Vec::with_capacity(n),
            f1: Vec::with_capacity(n),
            f2: Vec::with_capacity(n),
            f3: Vec::with_capacity(n),
        };
        for i in 0..n {
            let z = Complex64::new(0.0, h * alpha.dispersion(grid.frequency(i)));
            c.e.push(z.exp());
            c.e2.push((z * 0.5).exp());
            let (mut q, mut f1, mut f2, mut f3) = (
                Complex64::default(),
                Complex64::default(),
                Complex64::default(),
                Complex64::default(),
            );
            for r in &roots {
                let lr = z + r;
                let ex = lr.exp();
                let lr3 = lr * lr * lr;
                q += ((lr * 0.5).exp() - 1.0) / lr;
                f1 += (-4.0 - lr + ex * (4.0 - 3.0 * lr + lr * lr)) / lr3;
                f2 += (2.0 + lr + ex * (lr - 2.0)) / lr3;
                f3 += (-4.0 - 3.0 * lr - lr * lr + ex * (4.0 - lr)) / lr3;
            }
            let scale = h / POINTS as f64;
            c.q.push(q * scale);
            c.f1.push(f1 * scale);
            c.f2.push(f2 * scale);
            c.f3.push(f3 * scale);
        }
        c
    }
}

fn combine(
    u: &SpectralField,
    terms: &[(&[Complex64], &SpectralField)],
    base: &[Complex64],
) -> SpectralField {
    let coeffs = (0..u.coeffs().len())
        .map(|i| {
            let mut acc = base[i] * u.coeffs()[i];
            for (w, f) in terms {
                acc += w[i] * f.coeffs()[i];
            }
            acc
        })
        .collect();
    SpectralField::new(*u.grid(), coeffs).expect("length matches grid")
}

impl Stepper {
    fn new(solver: &ReferenceSolver, grid: &FrequencyGrid, h: f64) -> Self {
        let half_phase = (0..grid.n_modes())
            .map(|i| Complex64::cis(0.5 * h * solver.alpha.dispersion(grid.frequency(i))))
            .collect();
        let etd = (solver.scheme == Scheme::ExponentialIntegrator)
            .then(|| EtdCoefficients::new(grid, solver.alpha, h));
        Stepper {
            scheme: solver.scheme,
            nonlinear: solver.nonlinear,
            h,
            half_phase,
            etd,
        }
    }

    fn half_linear(&self, u: &SpectralField) -> SpectralField {
        let coeffs = u
            .coeffs()
            .iter()
            .zip(&self.half_phase)
            .map(|(c, p)| c * p)
            .collect();
        SpectralField::new(*u.grid(), coeffs).expect("length matches grid")
    }

    fn rk4_nonlinear(&self, u: &SpectralField) -> SpectralField {
        let h = self.h;
        let k1 = nonlinearity(u);
        let k2 = nonlinearity(&(u + &(&k1 * (0.5 * h))));
        let k3 = nonlinearity(&(u + &(&k2 * (0.5 * h))));
        let k4 = nonlinearity(&(u + &(&k3 * h)));
        let coeffs = (0..u.coeffs().len())
            .map(|i| {
                u.coeffs()[i]
                    + (k1.coeffs()[i]
                        + 2.0 * k2.coeffs()[i]
                        + 2.0 * k3.coeffs()[i]
                        + k4.coeffs()[i])
                        * (h / 6.0)
            })
            .collect();
        SpectralField::new(*u.grid(), coeffs).expect("length matches grid")
    }

    fn step(&self, u: &SpectralField) -> SpectralField {
        match self.scheme {
            Scheme::SplitStep => {
                let a = self.half_linear(u);
                let b = if self.nonlinear {
                    self.rk4_nonlinear(&a)
                } else {
                    a
                };
                self.half_linear(&b)
            }
            Scheme::ExponentialIntegrator => {
                let c = self.etd.as_ref().expect("built for this scheme");
                if !self.nonlinear {
                    return combine(u, &[], &c.e);
                }
                let nu = nonlinearity(u);
                let a = combine(u, &[(&c.q, &nu)], &c.e2);
                let na = nonlinearity(&a);
                let b = combine(u, &[(&c.q, &na)], &c.e2);
                let nb = nonlinearity(&b);
                let two_nb_minus_nu = &(&nb * 2.0) - &nu;
                let cc = combine(&a, &[(&c.q, &two_nb_minus_nu)], &c.e2);
                let nc = nonlinearity(&cc);
                let na_plus_nb = &(&na + &nb) * 2.0;
                combine(u, &[(&c.f1, &nu), (&c.f2, &na_plus_nb), (&c.f3, &nc)], &c.e)
            }
        }
    }
}

impl ReferenceSolver {
    pub fn new(alpha: Alpha, dt: f64, scheme: Scheme) -> Self {
        ReferenceSolver {
            alpha,
            dt,
            scheme,
            nonlinear: true,
        }
    }

    pub fn linear(mut self) -> Self {
        self.nonlinear = false;
        self
    }

    /// Integrates forward and backward from `t = 0` to cover `[-t_span, t_span]`.
    pub fn solve(&self, u0: &SpectralField, t_span: f64) -> Result<Trajectory> {
        ensure(self.dt.is_finite() && self.dt > 0.0, || {
            format!("dt must be positive, got {}", self.dt)
        })?;
        ensure(t_span.is_finite() && t_span > 0.0, || {
            format!("t_span must be positive, got {t_span}")
        })?;
        ensure(self.dt <= t_span, || {
            format!("dt = {} exceeds t_span = {t_span}", self.dt)
        })?;
        let steps = (t_span / self.dt - 1e-9).ceil() as i64;

        let umax = u0
            .to_physical()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        let cfl = self.dt * u0.grid().max_frequency() * umax;
        if cfl > 1.0 {
            warn!("dt * max|xi| * max|u| = {cfl:.3} exceeds 1; expect poor accuracy");
        }

        let (forward, backward) = rayon::join(
            || self.march(u0, self.dt, steps),
            || self.march(u0, -self.dt, steps),
        );
        let forward = forward?;
        let mut states = backward?;
        states.reverse();
        states.pop(); // t = 0 appears in both halves
        states.extend(forward);
        Trajectory::new(-steps, self.dt, states, self.alpha)
    }

    fn march(&self, u0: &SpectralField, h: f64, steps: i64) -> Result<Vec<SpectralField>> {
        let stepper = Stepper::new(self, u0.grid(), h);
        let initial = u0.l2_norm();
        let mut out = Vec::with_capacity(steps as usize + 1);
        out.push(u0.clone());
        let mut u = u0.clone();
        for k in 1..=steps {
            u = stepper.step(&u);
            let norm = u.l2_norm();
            if !norm.is_finite() || norm > BLOWUP_FACTOR * initial.max(f64::MIN_POSITIVE) {
                return Err(LabError::BlowUp {
                    time: k as f64 * h,
                    initial,
                    current: norm,
                });
            }
            out.push(u.clone());
        }
        Ok(out)
    }
}

pub fn solve_reference(
    u0: &SpectralField,
    t_span: f64,
    dt: f64,
    alpha: Alpha,
    scheme: Scheme,
) -> Result<Trajectory> {
    ReferenceSolver::new(alpha, dt, scheme).solve(u0, t_span)
}

/// Half-width `2 max(T, 1)` of the window the Duhamel operator needs.
pub fn duhamel_window(t_scale: f64) -> f64 {
    2.0 * t_scale.max(1.0)
}

/// `Phi_T(u)(t) = psi(t) W(t) u0 - (1/2) psi_T(t) int_0^t W(t - t') d/dx (u^2)(t') dt'`
/// on the time grid of `u_guess`, trapezoidal in `t'`.
pub fn duhamel_apply(
    u_guess: &Trajectory,
    u0: &SpectralField,
    t_scale: f64,
    alpha: Alpha,
) -> Result<Trajectory> {
    let cutoff = CutoffProfile::new(t_scale)?;
    if u_guess.grid() != u0.grid() {
        return Err(LabError::GridMismatch);
    }
    let dt = u_guess.dt();
    let half = duhamel_window(t_scale);
    let need = (half / dt - 1e-9).ceil() as i64;
    let (first, last) = u_guess.step_range();
    if first > -need || last < need {
        return Err(LabError::WindowTooShort {
            need_from: -half,
            need_to: half,
            have_from: first as f64 * dt,
            have_to: last as f64 * dt,
        });
    }

    // W(-t') N(u(t')) with N(u) = -(1/2) d/dx (u^2)
    let pulled: Vec<SpectralField> = u_guess
        .states()
        .par_iter()
        .enumerate()
        .map(|(i, u)| {
            let t = (first + i as i64) as f64 * dt;
            let n = nonlinearity(u);
            n.map_coeffs(|xi, c| c * Complex64::cis(-t * alpha.dispersion(xi)))
        })
        .collect();

    let zero_at = (-first) as usize;
    let mut integral = vec![SpectralField::zeros(*u0.grid()); pulled.len()];
    for i in zero_at + 1..pulled.len() {
        let inc = &(&pulled[i - 1] + &pulled[i]) * (0.5 * dt);
        integral[i] = &integral[i - 1] + &inc;
    }
    for i in (0..zero_at).rev() {
        let inc = &(&pulled[i + 1] + &pulled[i]) * (0.5 * dt);
        integral[i] = &integral[i + 1] - &inc;
    }

    let states = integral
        .into_par_iter()
        .enumerate()
        .map(|(i, acc)| {
            let t = (first + i as i64) as f64 * dt;
            let free = bump(t);
            let forced = cutoff.value(t);
            let coeffs = acc
                .coeffs()
                .iter()
                .zip(u0.coeffs())
                .enumerate()
                .map(|(j, (a, c0))| {
                    let phase = Complex64::cis(t * alpha.dispersion(u0.grid().frequency(j)));
                    phase * (c0 * free + a * forced)
                })
                .collect();
            SpectralField::new(*u0.grid(), coeffs).expect("length matches grid")
        })
        .collect();
    Trajectory::new(first, dt, states, alpha)
}

/// Gaps `sup_t ||u^(n+1) - u^(n)||_{L2}` of a Picard run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PicardHistory {
    pub iterate_differences: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

impl PicardHistory {
    /// Ratios of successive gaps.
    pub fn contraction_factors(&self) -> Vec<f64> {
        self.iterate_differences
            .windows(2)
            .filter(|w| w[0] > 0.0)
            .map(|w| w[1] / w[0])
            .collect()
    }
}

/// Iterates `u <- Phi_T(u)` from the zero trajectory on
/// `[-2 max(T,1), 2 max(T,1)]`. Non-convergence is reported in the history,
/// not as an error.
pub fn picard_solve(
    u0: &SpectralField,
    t_scale: f64,
    alpha: Alpha,
    dt: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(Trajectory, PicardHistory)> {
    ensure(tol > 0.0, || {
        format!("tolerance must be positive, got {tol}")
    })?;
    ensure(max_iter > 0, || "max_iter must be positive".to_string())?;
    ensure(dt > 0.0 && dt.is_finite(), || {
        format!("dt must be positive, got {dt}")
    })?;
    let steps = (duhamel_window(t_scale) / dt - 1e-9).ceil() as i64;
    let mut current = Trajectory::zeros(*u0.grid(), dt, steps, alpha)?;
    let mut history = PicardHistory {
        iterate_differences: Vec::new(),
        converged: false,
        iterations: 0,
    };
    for n in 1..=max_iter {
        let next = duhamel_apply(&current, u0, t_scale, alpha)?;
        let gap = next.sup_l2_distance(&current)?;
        history.iterate_differences.push(gap);
        history.iterations = n;
        current = next;
        if !gap.is_finite() {
            break;
        }
        if gap <= tol {
            history.converged = true;
            break;
        }
    }
    Ok((current, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{make_test_field, propagate, TestFamily, TestFieldSpec};
    use std::f64::consts::PI;

    fn alpha() -> Alpha {
        Alpha::new(1.5).unwrap()
    }

    #[test]
    fn nonlinearity_of_constant_and_cosine() {
        let g = FrequencyGrid::new(8, 2.0 * PI).unwrap();
        let c = SpectralField::from_real(g, &[2.0; 8]).unwrap();
        assert!(nonlinearity(&c).l2_norm() < 1e-14);
        let xs: Vec<f64> = g.positions().iter().map(|x| x.cos()).collect();
        let u = SpectralField::from_real(g, &xs).unwrap();
        let n = nonlinearity(&u).to_real();
        for (x, v) in g.positions().iter().zip(n) {
            assert!((v - 0.5 * (2.0 * x).sin()).abs() < 1e-13);
        }
    }

    #[test]
    fn nonlinearity_keeps_real_fields_real() {
        let g = FrequencyGrid::new(64, 20.0).unwrap();
        let spec = TestFieldSpec::real(TestFamily::RandomBandlimited {
            amplitude: 1.0,
            band: 5.0,
        });
        let u = make_test_field(&g, &spec, 8).unwrap();
        assert!(nonlinearity(&u).conjugate_symmetry_defect() < 1e-14);
    }

    #[test]
    fn dealias_cutoff_is_strictly_below_a_third() {
        for n in [8usize, 12, 24, 64, 96] {
            let g = FrequencyGrid::new(n, 1.0).unwrap();
            let k = dealias_cutoff(&g);
            assert!((3 * k) < n as i64 && 3 * (k + 1) >= n as i64, "n = {n}");
        }
    }

    #[test]
    fn zero_data_gives_zero_trajectory() {
        let g = FrequencyGrid::new(32, 10.0).unwrap();
        for scheme in [Scheme::SplitStep, Scheme::ExponentialIntegrator] {
            let t = solve_reference(&SpectralField::zeros(g), 0.1, 0.01, alpha(), scheme).unwrap();
            assert_eq!(t.len(), 21);
            assert_eq!(t.sup_l2_norm(), 0.0);
        }
    }

    #[test]
    fn linear_run_matches_propagator() {
        let g = FrequencyGrid::new(32, 2.0 * PI).unwrap();
        let u0 = SpectralField::single_mode(g, 3, Complex64::new(1.0, 0.0)).unwrap();
        for scheme in [Scheme::SplitStep, Scheme::ExponentialIntegrator] {
            let traj = ReferenceSolver::new(alpha(), 0.01, scheme)
                .linear()
                .solve(&u0, 0.5)
                .unwrap();
            for k in traj.steps() {
                let exact = propagate(&u0, k as f64 * 0.01, alpha()).unwrap();
                assert!(traj.state_at_step(k).unwrap().distance_l2(&exact).unwrap() < 1e-12);
            }
        }
    }

    #[test]
    fn blowup_sentinel_fires() {
        // a step far beyond stability of RK4 on large data
        let g = FrequencyGrid::new(64, 2.0 * PI).unwrap();
        let spec = TestFieldSpec::real(TestFamily::RandomBandlimited {
            amplitude: 50.0,
            band: 20.0,
        });
        let u0 = make_test_field(&g, &spec, 1).unwrap();
        let err = solve_reference(&u0, 5.0, 0.5, alpha(), Scheme::SplitStep).unwrap_err();
        assert!(matches!(err, LabError::BlowUp { .. }), "{err:?}");
    }

    #[test]
    fn solver_rejects_bad_steps() {
        let g = FrequencyGrid::new(16, 2.0 * PI).unwrap();
        let u0 = SpectralField::zeros(g);
        assert!(solve_reference(&u0, 0.1, 0.2, alpha(), Scheme::SplitStep).is_err());
        assert!(solve_reference(&u0, 0.1, 0.0, alpha(), Scheme::SplitStep).is_err());
    }

    #[test]
    fn duhamel_of_zero_guess_is_cut_off_free_flow() {
        let g = FrequencyGrid::new(32, 20.0).unwrap();
        let spec = TestFieldSpec::real(TestFamily::Gaussian {
            amplitude: 0.3,
            width: 1.0,
            center: 0.0,
        });
        let u0 = make_test_field(&g, &spec, 0).unwrap();
        let guess = Trajectory::zeros(g, 0.01, 200, alpha()).unwrap();
        let phi = duhamel_apply(&guess, &u0, 0.5, alpha()).unwrap();
        for k in phi.steps() {
            let t = k as f64 * 0.01;
            let exact = &propagate(&u0, t, alpha()).unwrap() * bump(t);
            assert!(phi.state_at_step(k).unwrap().distance_l2(&exact).unwrap() < 1e-14);
        }
        assert_eq!(phi.initial().unwrap(), &u0);
        let zero = duhamel_apply(&guess, &SpectralField::zeros(g), 0.5, alpha()).unwrap();
        assert_eq!(zero.sup_l2_norm(), 0.0);
    }

    #[test]
    fn duhamel_returns_data_at_origin_for_nonzero_guess() {
        let g = FrequencyGrid::new(32, 20.0).unwrap();
        let spec = TestFieldSpec::real(TestFamily::Gaussian {
            amplitude: 0.3,
            width: 1.0,
            center: 0.0,
        });
        let u0 = make_test_field(&g, &spec, 0).unwrap();
        let guess = solve_reference(&u0, 2.0, 0.01, alpha(), Scheme::SplitStep).unwrap();
        let phi = duhamel_apply(&guess, &u0, 0.5, alpha()).unwrap();
        assert_eq!(phi.initial().unwrap(), &u0);
    }

    #[test]
    fn duhamel_window_checks() {
        let g = FrequencyGrid::new(16, 20.0).unwrap();
        let u0 = SpectralField::zeros(g);
        let short = Trajectory::zeros(g, 0.01, 100, alpha()).unwrap();
        assert!(matches!(
            duhamel_apply(&short, &u0, 0.5, alpha()),
            Err(LabError::WindowTooShort { .. })
        ));
        let other = SpectralField::zeros(FrequencyGrid::new(32, 20.0).unwrap());
        let ok = Trajectory::zeros(g, 0.01, 200, alpha()).unwrap();
        assert_eq!(
            duhamel_apply(&ok, &other, 0.5, alpha()),
            Err(LabError::GridMismatch)
        );
    }

    #[test]
    fn picard_with_zero_data_converges_at_once() {
        let g = FrequencyGrid::new(16, 20.0).unwrap();
        let (traj, hist) =
            picard_solve(&SpectralField::zeros(g), 0.5, alpha(), 0.01, 1e-12, 10).unwrap();
        assert!(hist.converged);
        assert_eq!(hist.iterations, 1);
        assert_eq!(traj.sup_l2_norm(), 0.0);
    }

    #[test]
    fn picard_reports_non_convergence() {
        let g = FrequencyGrid::new(32, 20.0).unwrap();
        let spec = TestFieldSpec::real(TestFamily::Gaussian {
            amplitude: 0.3,
            width: 1.0,
            center: 0.0,
        });
        let u0 = make_test_field(&g, &spec, 0).unwrap();
        let (_, hist) = picard_solve(&u0, 0.5, alpha(), 0.01, 1e-300, 3).unwrap();
        assert!(!hist.converged);
        assert_eq!(hist.iterations, 3);
        assert_eq!(hist.iterate_differences.len(), 3);
    }

    #[test]
    fn restrict_and_distances() {
        let g = FrequencyGrid::new(16, 20.0).unwrap();
        let t = Trajectory::zeros(g, 0.1, 5, alpha()).unwrap();
        let r = t.restrict(-2, 3).unwrap();
        assert_eq!(r.step_range(), (-2, 3));
        assert!(t.restrict(-6, 0).is_err());
        assert_eq!(t.sup_l2_distance(&r).unwrap(), 0.0);
    }
}

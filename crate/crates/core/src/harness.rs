//! Experiment driver behind the `fbo-lab` binary.
//!
//! A run is described by a flat `key = value` configuration. Parsing fills in
//! every default, so the echoed `config.txt` in the output directory is a
//! complete description of the run: feeding it back through `--config`
//! reproduces the outputs byte for byte.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::info;
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::conservation::{apriori_check, l2_drift};
use crate::error::LabError;
use crate::estimates::{
    estimate_ratio, resonance_infimum, EstimateKind, RatioReport, Resolution, ResonanceSampler,
    SweepSpec,
};
use crate::evolution::{picard_solve, solve_reference, Scheme, Trajectory};
use crate::formats::{
    summary_rows, write_report_json, write_rows, write_trajectory_binary, write_trajectory_csv,
    AprioriRow, RatioSummaryRow,
};
use crate::norms::{admissible_omega, threshold_s, EstimateParams};
use crate::spectral::{
    make_test_field, Alpha, FrequencyGrid, SpectralField, TestFamily, TestFieldSpec,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("unknown config keys for `{command}`: {}", .keys.join(", "))]
    UnknownKeys { command: String, keys: Vec<String> },

    #[error("invalid value for `{key}`: {value:?} ({reason})")]
    InvalidValue {
        key: String,
        value: String,
        reason: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("cannot write {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Lab(#[from] LabError),
}

impl HarnessError {
    /// 2 for configuration problems, 3 for a numerical blow-up, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::UnknownKeys { .. }
            | HarnessError::InvalidValue { .. }
            | HarnessError::Config(_) => 2,
            HarnessError::Lab(LabError::BlowUp { .. }) => 3,
            HarnessError::Lab(
                LabError::InvalidParameter(_)
                | LabError::InvalidGrid(_)
                | LabError::NonzeroMean(_)
                | LabError::Precondition(_)
                | LabError::EmptySample,
            ) => 2,
            _ => 1,
        }
    }
}

type HResult<T> = std::result::Result<T, HarnessError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Picard,
    VerifyResonance,
    VerifyEstimate,
    Sweep,
}

const FIELD_KEYS: [&str; 8] = [
    "family",
    "amplitude",
    "width",
    "center",
    "carrier",
    "band",
    "zero_mean",
    "complex",
];

impl Command {
    pub const ALL: [Command; 5] = [
        Command::Simulate,
        Command::Picard,
        Command::VerifyResonance,
        Command::VerifyEstimate,
        Command::Sweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Picard => "picard",
            Command::VerifyResonance => "verify-resonance",
            Command::VerifyEstimate => "verify-estimate",
            Command::Sweep => "sweep",
        }
    }

    /// Keys understood by this command, in echo order.
    pub fn keys(self) -> Vec<&'static str> {
        let mut keys = vec!["alpha"];
        match self {
            Command::Simulate | Command::Picard => {
                keys.extend(["n_modes", "box_length", "t_span", "dt", "scheme"]);
                if self == Command::Picard {
                    keys.extend(["tol", "max_iter"]);
                } else {
                    keys.push("save_every");
                }
                keys.extend(FIELD_KEYS);
            }
            Command::VerifyResonance => keys.extend(["samples", "range"]),
            Command::VerifyEstimate | Command::Sweep => {
                if self == Command::VerifyEstimate {
                    keys.extend(["kind", "s"]);
                } else {
                    keys.extend(["s", "s_offsets"]);
                }
                keys.extend([
                    "b",
                    "b_prime",
                    "epsilon",
                    "samples",
                    "n_modes",
                    "box_length",
                    "dt",
                    "time_modes",
                    "refinements",
                    "t_span",
                    "band",
                ]);
            }
        }
        keys.extend(["seed", "out"]);
        keys
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = HarnessError;
    fn from_str(s: &str) -> HResult<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s.replace('_', "-"))
            .ok_or_else(|| HarnessError::Config(format!("unknown command {s:?}")))
    }
}

/// A value that is either given explicitly or derived from `alpha` by the
/// admissible-parameter rule.
#[derive(Clone, Debug, PartialEq)]
pub enum Auto<T> {
    Auto,
    Value(T),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub command: Command,
    pub alpha: Vec<f64>,
    pub kind: EstimateKind,
    pub s: Auto<Vec<f64>>,
    /// Offsets from the threshold `-3/4 (alpha - 1)` swept when `s = auto`.
    pub s_offsets: Vec<f64>,
    pub b: Auto<f64>,
    pub b_prime: Auto<f64>,
    pub epsilon: f64,
    pub samples: usize,
    pub n_modes: usize,
    pub box_length: f64,
    pub t_span: f64,
    pub dt: f64,
    /// Time samples of the spectral kinds; 0 elsewhere.
    pub time_modes: usize,
    pub refinements: usize,
    pub scheme: Scheme,
    pub tol: f64,
    pub max_iter: usize,
    pub save_every: usize,
    pub family: String,
    pub amplitude: f64,
    pub width: f64,
    pub center: f64,
    pub carrier: f64,
    pub band: f64,
    pub zero_mean: bool,
    pub complex: bool,
    pub range: f64,
    pub seed: u64,
    pub out: PathBuf,
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

fn scheme_name(s: Scheme) -> &'static str {
    match s {
        Scheme::SplitStep => "split_step",
        Scheme::ExponentialIntegrator => "exponential_integrator",
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> HResult<T>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e: T::Err| HarnessError::InvalidValue {
            key: key.into(),
            value: value.into(),
            reason: e.to_string(),
        })
}

fn parse_list(key: &str, value: &str) -> HResult<Vec<f64>> {
    let xs = value
        .split(',')
        .map(|v| parse_value::<f64>(key, v.trim()))
        .collect::<HResult<Vec<_>>>()?;
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(HarnessError::InvalidValue {
            key: key.into(),
            value: value.into(),
            reason: "values must be finite".into(),
        });
    }
    Ok(xs)
}

fn parse_auto<T>(value: &str, f: impl FnOnce(&str) -> HResult<T>) -> HResult<Auto<T>> {
    if value == "auto" {
        Ok(Auto::Auto)
    } else {
        f(value).map(Auto::Value)
    }
}

fn show_auto<T>(v: &Auto<T>, f: impl FnOnce(&T) -> String) -> String {
    match v {
        Auto::Auto => "auto".into(),
        Auto::Value(x) => f(x),
    }
}

/// Splits `key = value` lines; blank lines and `#` comments are skipped.
pub fn parse_config_text(text: &str) -> HResult<Vec<(String, String)>> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .map(|(i, l)| {
            let (k, v) = l.split_once('=').ok_or_else(|| {
                HarnessError::Config(format!("line {}: expected key = value, got {l:?}", i + 1))
            })?;
            Ok((k.trim().replace('-', "_"), v.trim().to_string()))
        })
        .collect()
}

impl ExperimentConfig {
    /// Defaults for `command`; grid and input scales follow the estimate kind.
    pub fn defaults(command: Command, kind: EstimateKind) -> Self {
        let mut c = ExperimentConfig {
            command,
            alpha: vec![1.5],
            kind,
            s: Auto::Auto,
            s_offsets: vec![-0.2, -0.1, 0.0, 0.1, 0.2],
            b: Auto::Auto,
            b_prime: Auto::Auto,
            epsilon: 0.1,
            samples: 200,
            n_modes: 512,
            box_length: 64.0,
            t_span: 1.0,
            dt: 1e-3,
            time_modes: 0,
            refinements: 2,
            scheme: Scheme::SplitStep,
            tol: 1e-12,
            max_iter: 40,
            save_every: 10,
            family: "gaussian".into(),
            amplitude: 0.5,
            width: 1.0,
            center: 0.0,
            carrier: 2.0,
            band: 2.0,
            zero_mean: true,
            complex: false,
            range: 1e3,
            seed: 0,
            out: PathBuf::from(format!("fbo-lab-out/{}", command.name())),
        };
        match command {
            Command::Simulate => {}
            Command::Picard => {
                c.n_modes = 256;
                c.box_length = 40.0;
                c.t_span = 0.5;
                c.amplitude = 0.1;
            }
            Command::VerifyResonance => {
                c.alpha = vec![1.1, 1.3, 1.5, 1.7, 1.9];
                c.samples = 1_000_000;
            }
            Command::VerifyEstimate | Command::Sweep => {
                if command == Command::Sweep {
                    c.kind = EstimateKind::MainBilinear;
                    c.alpha = vec![1.3, 1.5, 1.7];
                    c.samples = 20;
                }
                let spec = SweepSpec::defaults(c.kind, c.samples, c.seed);
                let r0 = spec.resolutions[0];
                c.n_modes = r0.n_modes;
                c.box_length = r0.box_length;
                c.dt = r0.dt;
                c.time_modes = r0.time_modes.unwrap_or(0);
                c.refinements = spec.resolutions.len();
                c.t_span = spec.t_scale;
                c.band = spec.band;
            }
        }
        c
    }

    /// Builds a config from defaults plus `pairs`, later pairs winning.
    /// Keys the command does not use are rejected together.
    pub fn from_pairs(command: Command, pairs: &[(String, String)]) -> HResult<Self> {
        let keys = command.keys();
        let unknown: Vec<String> = pairs
            .iter()
            .map(|(k, _)| k.clone())
            .filter(|k| k != "command" && !keys.contains(&k.as_str()))
            .collect();
        if !unknown.is_empty() {
            return Err(HarnessError::UnknownKeys {
                command: command.name().into(),
                keys: unknown,
            });
        }
        let kind = match pairs.iter().rev().find(|(k, _)| k == "kind") {
            Some((k, v)) => parse_value(k, v)?,
            None => EstimateKind::MainBilinear,
        };
        let mut c = ExperimentConfig::defaults(command, kind);
        for (k, v) in pairs {
            c.set(k, v)?;
        }
        c.validate()?;
        Ok(c)
    }

    fn set(&mut self, key: &str, v: &str) -> HResult<()> {
        match key {
            "command" => {
                if Command::from_str(v)? != self.command {
                    return Err(HarnessError::Config(format!(
                        "config is for `{v}` but `{}` was requested",
                        self.command
                    )));
                }
            }
            "alpha" => self.alpha = parse_list(key, v)?,
            "kind" => self.kind = parse_value(key, v)?,
            "s" => self.s = parse_auto(v, |v| parse_list(key, v))?,
            "s_offsets" => self.s_offsets = parse_list(key, v)?,
            "b" => self.b = parse_auto(v, |v| parse_value(key, v))?,
            "b_prime" => self.b_prime = parse_auto(v, |v| parse_value(key, v))?,
            "epsilon" => self.epsilon = parse_value(key, v)?,
            "samples" => self.samples = parse_value(key, v)?,
            "n_modes" => self.n_modes = parse_value(key, v)?,
            "box_length" => self.box_length = parse_value(key, v)?,
            "t_span" => self.t_span = parse_value(key, v)?,
            "dt" => self.dt = parse_value(key, v)?,
            "time_modes" => self.time_modes = parse_value(key, v)?,
            "refinements" => self.refinements = parse_value(key, v)?,
            "scheme" => self.scheme = parse_value(key, v)?,
            "tol" => self.tol = parse_value(key, v)?,
            "max_iter" => self.max_iter = parse_value(key, v)?,
            "save_every" => self.save_every = parse_value(key, v)?,
            "family" => self.family = v.to_string(),
            "amplitude" => self.amplitude = parse_value(key, v)?,
            "width" => self.width = parse_value(key, v)?,
            "center" => self.center = parse_value(key, v)?,
            "carrier" => self.carrier = parse_value(key, v)?,
            "band" => self.band = parse_value(key, v)?,
            "zero_mean" => self.zero_mean = parse_value(key, v)?,
            "complex" => self.complex = parse_value(key, v)?,
            "range" => self.range = parse_value(key, v)?,
            "seed" => self.seed = parse_value(key, v)?,
            "out" => self.out = PathBuf::from(v),
            other => unreachable!("key {other} passed the key filter"),
        }
        Ok(())
    }

    fn validate(&self) -> HResult<()> {
        let bad = |key: &str, value: String, reason: &str| {
            Err(HarnessError::InvalidValue {
                key: key.into(),
                value,
                reason: reason.into(),
            })
        };
        if self.alpha.is_empty() {
            return bad("alpha", String::new(), "at least one value is required");
        }
        for &a in &self.alpha {
            Alpha::new(a)?;
        }
        let keys = self.command.keys();
        if keys.contains(&"samples") && self.samples == 0 {
            return bad("samples", "0".into(), "must be positive");
        }
        if keys.contains(&"refinements") && self.refinements == 0 {
            return bad("refinements", "0".into(), "must be positive");
        }
        if keys.contains(&"save_every") && self.save_every == 0 {
            return bad("save_every", "0".into(), "must be positive");
        }
        if keys.contains(&"family")
            && !["gaussian", "wave_packet", "random_bandlimited"].contains(&self.family.as_str())
        {
            return bad(
                "family",
                self.family.clone(),
                "expected gaussian, wave_packet or random_bandlimited",
            );
        }
        if self.command == Command::VerifyEstimate {
            let spectral = matches!(
                self.kind,
                EstimateKind::BilinearStr | EstimateKind::DualBilinear
            );
            if let Auto::Value(s) = &self.s {
                if s.len() != 1 {
                    return bad("s", join(s), "takes a single value; use sweep for s grids");
                }
            }
            if spectral && self.time_modes == 0 {
                return bad("time_modes", "0".into(), "required for this kind");
            }
        }
        Ok(())
    }

    /// The materialized configuration, one `(key, value)` per used key.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        let mut pairs = vec![("command", self.command.name().to_string())];
        for key in self.command.keys() {
            let v = match key {
                "alpha" => join(&self.alpha),
                "kind" => self.kind.name().to_string(),
                "s" => show_auto(&self.s, |s| join(s)),
                "s_offsets" => join(&self.s_offsets),
                "b" => show_auto(&self.b, f64::to_string),
                "b_prime" => show_auto(&self.b_prime, f64::to_string),
                "epsilon" => self.epsilon.to_string(),
                "samples" => self.samples.to_string(),
                "n_modes" => self.n_modes.to_string(),
                "box_length" => self.box_length.to_string(),
                "t_span" => self.t_span.to_string(),
                "dt" => self.dt.to_string(),
                "time_modes" => self.time_modes.to_string(),
                "refinements" => self.refinements.to_string(),
                "scheme" => scheme_name(self.scheme).to_string(),
                "tol" => self.tol.to_string(),
                "max_iter" => self.max_iter.to_string(),
                "save_every" => self.save_every.to_string(),
                "family" => self.family.clone(),
                "amplitude" => self.amplitude.to_string(),
                "width" => self.width.to_string(),
                "center" => self.center.to_string(),
                "carrier" => self.carrier.to_string(),
                "band" => self.band.to_string(),
                "zero_mean" => self.zero_mean.to_string(),
                "complex" => self.complex.to_string(),
                "range" => self.range.to_string(),
                "seed" => self.seed.to_string(),
                "out" => self.out.display().to_string(),
                other => unreachable!("no formatter for {other}"),
            };
            pairs.push((key, v));
        }
        pairs
    }

    pub fn echo(&self) -> String {
        self.to_pairs()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    fn initial_data(&self) -> HResult<SpectralField> {
        let grid = FrequencyGrid::new(self.n_modes, self.box_length)?;
        let family = match self.family.as_str() {
            "gaussian" => TestFamily::Gaussian {
                amplitude: self.amplitude,
                width: self.width,
                center: self.center,
            },
            "wave_packet" => TestFamily::WavePacket {
                amplitude: self.amplitude,
                width: self.width,
                center: self.center,
                carrier: self.carrier,
            },
            _ => TestFamily::RandomBandlimited {
                amplitude: self.amplitude,
                band: self.band,
            },
        };
        let mut spec = TestFieldSpec::real(family);
        spec.zero_mean = self.zero_mean;
        spec.complex = self.complex;
        Ok(make_test_field(&grid, &spec, self.seed)?)
    }

    /// Parameters at `alpha`: the admissible set, with explicit `b`, `b'`
    /// overriding it.
    fn params(&self, alpha: Alpha) -> HResult<EstimateParams> {
        let base = EstimateParams::admissible(alpha, self.epsilon)?;
        let b = match self.b {
            Auto::Auto => base.b,
            Auto::Value(b) => b,
        };
        let b_prime = match self.b_prime {
            Auto::Auto => base.b_prime,
            Auto::Value(b) => b,
        };
        Ok(EstimateParams::new(
            alpha,
            base.s,
            base.omega,
            b,
            b_prime,
            self.epsilon,
        )?)
    }

    fn s_values(&self, alpha: Alpha) -> Vec<f64> {
        match &self.s {
            Auto::Value(s) => s.clone(),
            Auto::Auto if self.command == Command::Sweep => self
                .s_offsets
                .iter()
                .map(|o| threshold_s(alpha) + o)
                .collect(),
            Auto::Auto => vec![threshold_s(alpha) + self.epsilon],
        }
    }

    /// Refinement ladder: evolution kinds double `N` and halve `dt`; the
    /// spectral kinds double `N`, `L` and the time samples; the smoothing
    /// lattice grows tenfold.
    pub fn resolutions(&self) -> Vec<Resolution> {
        (0..self.refinements as u32)
            .map(|j| {
                let two = 1usize << j;
                match self.kind {
                    EstimateKind::Smoothing => Resolution::new(
                        (self.n_modes - 1) * 10usize.pow(j) + 1,
                        self.box_length,
                        self.dt,
                    ),
                    EstimateKind::BilinearStr | EstimateKind::DualBilinear => Resolution {
                        n_modes: self.n_modes * two,
                        box_length: self.box_length * two as f64,
                        dt: self.dt,
                        time_modes: Some(self.time_modes * two),
                    },
                    _ => Resolution::new(self.n_modes * two, self.box_length, self.dt / two as f64),
                }
            })
            .collect()
    }

    fn sweep_spec(&self, kind: EstimateKind) -> SweepSpec {
        SweepSpec {
            kind,
            resolutions: self.resolutions(),
            t_scale: self.t_span,
            band: self.band,
            require_admissible: self.command == Command::VerifyEstimate,
            ..SweepSpec::defaults(kind, self.samples, self.seed)
        }
    }
}

/// What a run produced.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Manifest {
    pub program: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config: String,
    pub outputs: Vec<String>,
    pub summary: BTreeMap<String, Value>,
}

struct OutDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    fn create(root: &Path) -> HResult<Self> {
        fs::create_dir_all(root).map_err(|source| HarnessError::Io {
            path: root.to_path_buf(),
            source,
        })?;
        Ok(OutDir {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn write(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut BufWriter<fs::File>) -> crate::Result<()>,
    ) -> HResult<()> {
        let path = self.root.join(name);
        let io = |source| HarnessError::Io {
            path: path.clone(),
            source,
        };
        let mut w = BufWriter::new(fs::File::create(&path).map_err(io)?);
        f(&mut w)?;
        w.into_inner()
            .map_err(|e| io(e.into_error()))?
            .sync_all()
            .map_err(io)?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> HResult<()> {
        self.write(name, |w| {
            std::io::Write::write_all(w, bytes).map_err(|e| LabError::Format(e.to_string()))
        })
    }
}

/// Keeps every `every`-th stored step (steps divisible by `every`).
fn thin(traj: &Trajectory, every: usize) -> crate::Result<Trajectory> {
    if every == 1 {
        return Ok(traj.clone());
    }
    let every = every as i64;
    let states: Vec<SpectralField> = traj
        .steps()
        .zip(traj.states())
        .filter(|(k, _)| k.rem_euclid(every) == 0)
        .map(|(_, u)| u.clone())
        .collect();
    let first = traj.step_range().0.div_euclid(every)
        + i64::from(traj.step_range().0.rem_euclid(every) != 0);
    Trajectory::new(first, traj.dt() * every as f64, states, traj.alpha())
}

fn alpha_tag(a: f64) -> String {
    format!("alpha_{a}")
}

fn simulate(c: &ExperimentConfig, out: &mut OutDir) -> HResult<BTreeMap<String, Value>> {
    let u0 = c.initial_data()?;
    let mut rows = Vec::new();
    for (run, &a) in c.alpha.iter().enumerate() {
        let alpha = Alpha::new(a)?;
        info!("simulate: alpha = {a}, T = {}, dt = {}", c.t_span, c.dt);
        let traj = solve_reference(&u0, c.t_span, c.dt, alpha, c.scheme)?;
        let omega = admissible_omega(alpha);
        let report = apriori_check(&traj, omega)?;
        rows.push(AprioriRow::new(run, a, omega, &report, l2_drift(&traj)));
        let saved = thin(&traj, c.save_every)?;
        let tag = alpha_tag(a);
        out.write(&format!("trajectory_{tag}.csv"), |w| {
            write_trajectory_csv(&saved, w)
        })?;
        out.write(&format!("trajectory_{tag}.bin"), |w| {
            write_trajectory_binary(&saved, w)
        })?;
    }
    out.write("apriori.csv", |w| write_rows(&rows, w))?;
    let max_drift = rows.iter().map(|r| r.l2_drift).fold(0.0, f64::max);
    let max_c = rows.iter().map(|r| r.fitted_c).fold(0.0, f64::max);
    Ok(BTreeMap::from([
        ("max_l2_drift".into(), json!(max_drift)),
        ("max_fitted_C".into(), json!(max_c)),
    ]))
}

#[derive(Serialize)]
struct PicardRow {
    iteration: usize,
    gap: f64,
    contraction_factor: Option<f64>,
}

#[derive(Serialize)]
struct PicardSummaryRow {
    alpha: f64,
    #[serde(rename = "T")]
    t_span: f64,
    iterations: usize,
    converged: bool,
    final_gap: f64,
    reference_distance: f64,
}

fn picard(c: &ExperimentConfig, out: &mut OutDir) -> HResult<BTreeMap<String, Value>> {
    let u0 = c.initial_data()?;
    let mut summary = Vec::new();
    for &a in &c.alpha {
        let alpha = Alpha::new(a)?;
        info!("picard: alpha = {a}, T = {}", c.t_span);
        let (traj, history) = picard_solve(&u0, c.t_span, alpha, c.dt, c.tol, c.max_iter)?;
        let reference = solve_reference(&u0, c.t_span, c.dt, alpha, c.scheme)?;
        let (from, to) = reference.step_range();
        let distance = traj.restrict(from, to)?.sup_l2_distance(&reference)?;
        let gaps = &history.iterate_differences;
        let rows: Vec<PicardRow> = gaps
            .iter()
            .enumerate()
            .map(|(i, &gap)| PicardRow {
                iteration: i + 1,
                gap,
                contraction_factor: (i > 0 && gaps[i - 1] > 0.0).then(|| gap / gaps[i - 1]),
            })
            .collect();
        out.write(&format!("picard_{}.csv", alpha_tag(a)), |w| {
            write_rows(&rows, w)
        })?;
        summary.push(PicardSummaryRow {
            alpha: a,
            t_span: c.t_span,
            iterations: history.iterations,
            converged: history.converged,
            final_gap: gaps.last().copied().unwrap_or(0.0),
            reference_distance: distance,
        });
    }
    out.write("picard_summary.csv", |w| write_rows(&summary, w))?;
    Ok(BTreeMap::from([
        (
            "all_converged".into(),
            json!(summary.iter().all(|r| r.converged)),
        ),
        (
            "max_reference_distance".into(),
            json!(summary
                .iter()
                .map(|r| r.reference_distance)
                .fold(0.0, f64::max)),
        ),
    ]))
}

fn write_reports(
    out: &mut OutDir,
    prefix: &str,
    reports: &[RatioReport],
) -> HResult<BTreeMap<String, Value>> {
    let mut rows: Vec<RatioSummaryRow> = Vec::new();
    let mut ratios = BTreeMap::new();
    for r in reports {
        let tag = alpha_tag(r.alpha);
        out.write(&format!("{prefix}_{tag}.json"), |w| write_report_json(r, w))?;
        rows.extend(summary_rows(r));
        ratios.insert(tag, json!(r.ratio()));
    }
    out.write("summary.csv", |w| write_rows(&rows, w))?;
    Ok(BTreeMap::from([(
        "ratio".into(),
        Value::Object(ratios.into_iter().collect()),
    )]))
}

fn verify_resonance(c: &ExperimentConfig, out: &mut OutDir) -> HResult<BTreeMap<String, Value>> {
    let sampler = ResonanceSampler {
        uniform_draws: c.samples,
        range: c.range,
        ..ResonanceSampler::default()
    };
    let reports = c
        .alpha
        .iter()
        .map(|&a| {
            info!("verify-resonance: alpha = {a}");
            resonance_infimum(a, &sampler, c.seed)
        })
        .collect::<crate::Result<Vec<_>>>()?;
    write_reports(out, "resonance", &reports)
}

fn verify_estimate(c: &ExperimentConfig, out: &mut OutDir) -> HResult<BTreeMap<String, Value>> {
    let spec = c.sweep_spec(c.kind);
    let mut reports = Vec::new();
    for &a in &c.alpha {
        let alpha = Alpha::new(a)?;
        let p = c.params(alpha)?;
        for s in c.s_values(alpha) {
            info!("verify-estimate: {} at alpha = {a}, s = {s}", c.kind);
            reports.push(estimate_ratio(&spec, &p.with_s(s))?);
        }
    }
    write_reports(out, c.kind.name(), &reports)
}

#[derive(Serialize)]
struct ThresholdRow {
    alpha: f64,
    s: f64,
    s_threshold: f64,
    admissible: bool,
    n_samples: usize,
    ratio_coarse: f64,
    ratio_fine: f64,
    growth: f64,
}

fn sweep(c: &ExperimentConfig, out: &mut OutDir) -> HResult<BTreeMap<String, Value>> {
    let spec = c.sweep_spec(EstimateKind::MainBilinear);
    let mut table = Vec::new();
    let mut rows = Vec::new();
    for &a in &c.alpha {
        let alpha = Alpha::new(a)?;
        let base = c.params(alpha)?;
        for s in c.s_values(alpha) {
            info!("sweep: alpha = {a}, s = {s}");
            let p = base.with_s(s);
            let r = estimate_ratio(&spec, &p)?;
            let coarse = r.refinement_trend[0].ratio;
            let fine = r.ratio();
            table.push(ThresholdRow {
                alpha: a,
                s,
                s_threshold: threshold_s(alpha),
                admissible: p.is_admissible(),
                n_samples: r.sample_count,
                ratio_coarse: coarse,
                ratio_fine: fine,
                growth: fine / coarse,
            });
            rows.extend(summary_rows(&r));
        }
    }
    out.write("threshold_table.csv", |w| write_rows(&table, w))?;
    out.write("summary.csv", |w| write_rows(&rows, w))?;
    Ok(BTreeMap::from([("points".into(), json!(table.len()))]))
}

/// Runs `config`, writing `config.txt`, the command's artifacts and
/// `manifest.json` into `config.out`.
pub fn run(config: &ExperimentConfig) -> HResult<Manifest> {
    let mut out = OutDir::create(&config.out)?;
    out.write_bytes("config.txt", config.echo().as_bytes())?;
    let summary = match config.command {
        Command::Simulate => simulate(config, &mut out)?,
        Command::Picard => picard(config, &mut out)?,
        Command::VerifyResonance => verify_resonance(config, &mut out)?,
        Command::VerifyEstimate => verify_estimate(config, &mut out)?,
        Command::Sweep => sweep(config, &mut out)?,
    };
    let manifest = Manifest {
        program: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: config.command.name().into(),
        seed: config.seed,
        config: "config.txt".into(),
        outputs: out.written.clone(),
        summary,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    out.write_bytes("manifest.json", text.as_bytes())?;
    Ok(manifest)
}

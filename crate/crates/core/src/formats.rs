//! On-disk artifacts: trajectory CSV and binary dumps, ratio reports, and the
//! summary CSV rows. Column orders are part of the contract; see `FORMATS.md`.

use std::io::{Read, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::conservation::AprioriReport;
use crate::error::{LabError, Result};
use crate::estimates::RatioReport;
use crate::evolution::{dealias_cutoff, Trajectory};
use crate::spectral::{Alpha, FrequencyGrid, SpectralField};

pub const TRAJECTORY_MAGIC: [u8; 4] = *b"FBOT";
pub const TRAJECTORY_VERSION: u32 = 1;

fn csv_err(e: csv::Error) -> LabError {
    LabError::Format(e.to_string())
}

fn io_err(e: std::io::Error) -> LabError {
    LabError::Format(e.to_string())
}

/// Header of the trajectory CSV: `t`, then `abs_k,phase_k` for every mode
/// `|k|` up to the dealiasing cutoff, in ascending `k`.
pub fn trajectory_csv_header(grid: &FrequencyGrid) -> Vec<String> {
    let kmax = dealias_cutoff(grid);
    std::iter::once("t".to_string())
        .chain((-kmax..=kmax).flat_map(|k| [format!("abs_{k}"), format!("phase_{k}")]))
        .collect()
}

pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, out: W) -> Result<()> {
    let grid = *traj.grid();
    let kmax = dealias_cutoff(&grid);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(trajectory_csv_header(&grid))
        .map_err(csv_err)?;
    for (t, u) in traj.times().into_iter().zip(traj.states()) {
        let mut row = vec![t.to_string()];
        for k in -kmax..=kmax {
            let c = u.coeffs()[grid.index_of_mode(k).expect("cutoff below Nyquist")];
            row.push(c.norm().to_string());
            row.push(c.arg().to_string());
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(io_err)
}

/// Little-endian dump: magic `FBOT`, `u32` version, `u64` N, `f64` L,
/// `f64` dt, `u64` record count; then per record `f64` t followed by N
/// coefficients as `(re, im)` `f64` pairs in ascending mode order.
pub fn write_trajectory_binary<W: Write>(traj: &Trajectory, mut out: W) -> Result<()> {
    let grid = traj.grid();
    let mut buf = Vec::with_capacity(40 + traj.len() * (8 + 16 * grid.n_modes()));
    buf.extend_from_slice(&TRAJECTORY_MAGIC);
    buf.extend_from_slice(&TRAJECTORY_VERSION.to_le_bytes());
    buf.extend_from_slice(&(grid.n_modes() as u64).to_le_bytes());
    buf.extend_from_slice(&grid.box_length().to_le_bytes());
    buf.extend_from_slice(&traj.dt().to_le_bytes());
    buf.extend_from_slice(&(traj.len() as u64).to_le_bytes());
    for (t, u) in traj.times().into_iter().zip(traj.states()) {
        buf.extend_from_slice(&t.to_le_bytes());
        for c in u.coeffs() {
            buf.extend_from_slice(&c.re.to_le_bytes());
            buf.extend_from_slice(&c.im.to_le_bytes());
        }
    }
    out.write_all(&buf).map_err(io_err)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take<const K: usize>(&mut self) -> Result<[u8; K]> {
        let end = self.pos + K;
        let chunk = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| LabError::Format("truncated trajectory dump".into()))?;
        self.pos = end;
        Ok(chunk.try_into().expect("slice of length K"))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take()?))
    }
}

/// Reads a dump written by [`write_trajectory_binary`]. The dispersion
/// exponent is not part of the format and must be supplied.
pub fn read_trajectory_binary<R: Read>(mut input: R, alpha: Alpha) -> Result<Trajectory> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes).map_err(io_err)?;
    let mut cur = Cursor {
        bytes: &bytes,
        pos: 0,
    };
    if cur.take::<4>()? != TRAJECTORY_MAGIC {
        return Err(LabError::Format("not a trajectory dump (bad magic)".into()));
    }
    let version = u32::from_le_bytes(cur.take()?);
    if version != TRAJECTORY_VERSION {
        return Err(LabError::Format(format!(
            "unsupported trajectory dump version {version}"
        )));
    }
    let n = cur.u64()? as usize;
    let grid = FrequencyGrid::new(n, cur.f64()?)?;
    let dt = cur.f64()?;
    let count = cur.u64()? as usize;
    let mut first_step = 0;
    let mut states = Vec::with_capacity(count);
    for r in 0..count {
        let t = cur.f64()?;
        if r == 0 {
            first_step = (t / dt).round() as i64;
        }
        let coeffs = (0..n)
            .map(|_| Ok(Complex64::new(cur.f64()?, cur.f64()?)))
            .collect::<Result<Vec<_>>>()?;
        states.push(SpectralField::new(grid, coeffs)?);
    }
    if cur.pos != bytes.len() {
        return Err(LabError::Format(
            "trailing bytes after trajectory dump".into(),
        ));
    }
    Trajectory::new(first_step, dt, states, alpha)
}

pub fn write_report_json<W: Write>(report: &RatioReport, out: W) -> Result<()> {
    serde_json::to_writer_pretty(out, report).map_err(|e| LabError::Format(e.to_string()))
}

pub fn read_report_json<R: Read>(input: R) -> Result<RatioReport> {
    let r: RatioReport =
        serde_json::from_reader(input).map_err(|e| LabError::Format(e.to_string()))?;
    r.validate()?;
    Ok(r)
}

/// One row of the ratio summary CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioSummaryRow {
    pub kind: String,
    pub alpha: f64,
    pub s: Option<f64>,
    pub b: Option<f64>,
    pub b_prime: Option<f64>,
    /// The extremal ratio (sup or inf according to the kind).
    pub sup_or_inf: f64,
    pub n_samples: usize,
    pub resolution: String,
    pub seed: u64,
}

/// One summary row per entry of the refinement trend.
pub fn summary_rows(report: &RatioReport) -> Vec<RatioSummaryRow> {
    let p = report.params;
    report
        .refinement_trend
        .iter()
        .map(|t| RatioSummaryRow {
            kind: report.kind.name().to_string(),
            alpha: report.alpha,
            s: p.map(|p| p.s),
            b: p.map(|p| p.b),
            b_prime: p.map(|p| p.b_prime),
            sup_or_inf: t.ratio,
            n_samples: report.sample_count,
            resolution: t.resolution.clone(),
            seed: report.seed,
        })
        .collect()
}

pub fn write_rows<W: Write, T: Serialize>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn read_rows<R: Read, T: for<'de> Deserialize<'de>>(input: R) -> Result<Vec<T>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(csv_err))
        .collect()
}

/// One row of the a priori summary CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AprioriRow {
    pub run_id: usize,
    pub alpha: f64,
    pub omega: f64,
    #[serde(rename = "T")]
    pub t_span: f64,
    pub initial_norm: f64,
    pub sup_norm: f64,
    #[serde(rename = "fitted_C")]
    pub fitted_c: f64,
    pub l2_drift: f64,
}

impl AprioriRow {
    pub fn new(
        run_id: usize,
        alpha: f64,
        omega: f64,
        report: &AprioriReport,
        l2_drift: f64,
    ) -> Self {
        AprioriRow {
            run_id,
            alpha,
            omega,
            t_span: report.t_span,
            initial_norm: report.initial_norm,
            sup_norm: report.sup_norm,
            fitted_c: report.fitted_c,
            l2_drift,
        }
    }
}

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::link::{matched_filter, SubchannelPlan, TxStreamSpec};
use super::qpsk::{ber, evm_percent, qpsk_demodulate};
use crate::array::Angle;
use crate::beamformer::{apply_beam_bank, combine, BeamBank, CombinerConfig};
use crate::error::{invalid, Error, Result};
use crate::json::{to_re_im, ReIm};
use crate::CMatrix;

/// Normalized preamble correlation needed to call a cell locked.
pub const LOCK_THRESHOLD: f64 = 0.6;

/// At most this many payload symbols are kept per cell for plotting.
pub const CONSTELLATION_POINTS: usize = 1024;

/// Outcome of decoding one stream from one receive beam.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub rx_beam: Angle,
    pub tx_stream: Angle,
    pub subchannel_hz: f64,
    pub evm_percent: f64,
    pub ber: f64,
    pub locked: bool,
    /// |preamble correlation| over its Cauchy-Schwarz bound, in [0, 1].
    pub correlation: f64,
    /// Matched-filter output index of the first preamble symbol.
    pub timing: usize,
    pub constellation: Vec<Complex64>,
}

/// Beams × streams grid of [`GridCell`]s, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeGridResult {
    beams: usize,
    streams: usize,
    cells: Vec<GridCell>,
}

#[derive(Serialize)]
struct CellJson {
    rx_beam_deg: f64,
    tx_stream_deg: f64,
    subchannel_hz: f64,
    evm_percent: f64,
    ber: f64,
    locked: bool,
    correlation: f64,
    constellation: Vec<ReIm>,
}

#[derive(Serialize)]
struct GridJson {
    beams: usize,
    streams: usize,
    cells: Vec<CellJson>,
}

impl DecodeGridResult {
    pub fn beams(&self) -> usize {
        self.beams
    }

    pub fn streams(&self) -> usize {
        self.streams
    }

    pub fn cell(&self, beam: usize, stream: usize) -> &GridCell {
        assert!(beam < self.beams && stream < self.streams, "cell index out of range");
        &self.cells[beam * self.streams + stream]
    }

    pub fn cells(&self) -> &[GridCell] {
        &self.cells
    }

    pub fn locked_count(&self) -> usize {
        self.cells.iter().filter(|c| c.locked).count()
    }

    pub fn to_json(&self) -> Result<String> {
        let cells = self
            .cells
            .iter()
            .map(|c| CellJson {
                rx_beam_deg: c.rx_beam.azimuth().to_degrees(),
                tx_stream_deg: c.tx_stream.azimuth().to_degrees(),
                subchannel_hz: c.subchannel_hz,
                evm_percent: c.evm_percent,
                ber: c.ber,
                locked: c.locked,
                correlation: c.correlation,
                constellation: to_re_im(&c.constellation),
            })
            .collect();
        Ok(serde_json::to_string_pretty(&GridJson {
            beams: self.beams,
            streams: self.streams,
            cells,
        })?)
    }

    pub fn write_constellation_csv<W: Write>(&self, beam: usize, stream: usize, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["re", "im"]).map_err(csv_err)?;
        for z in &self.cell(beam, stream).constellation {
            w.write_record([format!("{:.16e}", z.re), format!("{:.16e}", z.im)])
                .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Largest absolute difference over every numeric field of every cell;
    /// infinite when shapes, lock flags or timings disagree.
    pub fn max_abs_difference(&self, other: &DecodeGridResult) -> f64 {
        if self.beams != other.beams || self.streams != other.streams {
            return f64::INFINITY;
        }
        let mut worst = 0f64;
        for (a, b) in self.cells.iter().zip(&other.cells) {
            if a.locked != b.locked || a.timing != b.timing || a.constellation.len() != b.constellation.len() {
                return f64::INFINITY;
            }
            worst = worst
                .max((a.evm_percent - b.evm_percent).abs())
                .max((a.ber - b.ber).abs())
                .max((a.correlation - b.correlation).abs());
            for (p, q) in a.constellation.iter().zip(&b.constellation) {
                worst = worst.max((p - q).norm());
            }
        }
        worst
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Synchronize and decode `spec` from one beam output.
///
/// The preamble is located by the peak of its correlation against the
/// matched-filter output at symbol spacing; a least-squares complex gain from
/// the preamble then de-rotates and scales the payload. Unlocked cells report
/// BER 0.5.
pub fn decode_cell(
    samples: &[Complex64],
    plan: &SubchannelPlan,
    spec: &TxStreamSpec,
    rx_beam: Angle,
) -> Result<GridCell> {
    let pre = spec.preamble_symbols()?;
    let payload = spec.payload_symbols()?;
    let subchannel_hz = plan
        .offsets_hz()
        .get(spec.subchannel_index)
        .copied()
        .ok_or_else(|| Error::InvalidArgument(format!("subchannel {} out of range", spec.subchannel_index)))?;
    let mf = matched_filter(samples, plan, spec.subchannel_index)?;
    let sps = plan.samples_per_symbol();
    let span = (pre.len() + payload.len() - 1) * sps;
    let mut cell = GridCell {
        rx_beam,
        tx_stream: spec.direction,
        subchannel_hz,
        evm_percent: 100.0,
        ber: 0.5,
        locked: false,
        correlation: 0.0,
        timing: 0,
        constellation: Vec::new(),
    };
    if mf.len() <= span {
        return Ok(cell);
    }

    let corr = |tau: usize| -> Complex64 { pre.iter().enumerate().map(|(k, p)| p.conj() * mf[tau + k * sps]).sum() };
    let mut best = (0usize, Complex64::new(0.0, 0.0));
    for tau in 0..mf.len() - span {
        let c = corr(tau);
        if c.norm_sqr() > best.1.norm_sqr() {
            best = (tau, c);
        }
    }
    let (tau, c) = best;
    let p_energy: f64 = pre.iter().map(|p| p.norm_sqr()).sum();
    let z_energy: f64 = (0..pre.len()).map(|k| mf[tau + k * sps].norm_sqr()).sum();
    let rho = if z_energy > 0.0 { c.norm() / (p_energy * z_energy).sqrt() } else { 0.0 };
    cell.correlation = rho;
    cell.timing = tau;
    cell.locked = rho >= LOCK_THRESHOLD;

    let h = c / p_energy;
    let start = tau + pre.len() * sps;
    let symbols: Vec<Complex64> = if h.norm() > 0.0 {
        (0..payload.len()).map(|k| mf[start + k * sps] / h).collect()
    } else {
        vec![Complex64::new(0.0, 0.0); payload.len()]
    };
    cell.evm_percent = evm_percent(&symbols, &payload)?;
    if cell.locked {
        cell.ber = ber(&qpsk_demodulate(&symbols), &spec.bits)?;
    }
    cell.constellation = symbols.into_iter().take(CONSTELLATION_POINTS).collect();
    Ok(cell)
}

fn check_grid(bank: &BeamBank, specs: &[TxStreamSpec]) -> Result<()> {
    if bank.beams() == 0 || specs.is_empty() {
        return invalid("decode grid needs at least one beam and one stream");
    }
    Ok(())
}

/// Every beam of `bank` applied to the one capture `r`, every stream
/// decoded from every beam.
pub fn decode_grid(
    r: &CMatrix,
    bank: &BeamBank,
    plan: &SubchannelPlan,
    specs: &[TxStreamSpec],
) -> Result<DecodeGridResult> {
    check_grid(bank, specs)?;
    let y = apply_beam_bank(bank, r)?;
    let s = specs.len();
    let cells = (0..bank.beams() * s)
        .into_par_iter()
        .map(|i| {
            let (b, k) = (i / s, i % s);
            decode_cell(&y.row(b).to_vec(), plan, &specs[k], bank.labels()[b])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DecodeGridResult {
        beams: bank.beams(),
        streams: s,
        cells,
    })
}

/// The same grid as an analog receiver would build it: one single-beam
/// capture per (beam, stream) trial, each replayed from the same `r`.
pub fn decode_grid_analog(
    r: &CMatrix,
    bank: &BeamBank,
    plan: &SubchannelPlan,
    specs: &[TxStreamSpec],
) -> Result<DecodeGridResult> {
    check_grid(bank, specs)?;
    let mut cells = Vec::with_capacity(bank.beams() * specs.len());
    for (w, &label) in bank.weights().iter().zip(bank.labels()) {
        for spec in specs {
            let capture = combine(&CombinerConfig::analog_beam(w)?, r)?;
            cells.push(decode_cell(&capture.row(0).to_vec(), plan, spec, label)?);
        }
    }
    Ok(DecodeGridResult {
        beams: bank.beams(),
        streams: specs.len(),
        cells,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyncMode {
    Analog,
    Digital,
}

impl FromStr for SyncMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analog" => Ok(Self::Analog),
            "digital" => Ok(Self::Digital),
            other => invalid(format!("sync mode must be analog or digital, got {other:?}")),
        }
    }
}

impl fmt::Display for SyncMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Analog => "analog",
            Self::Digital => "digital",
        })
    }
}

/// Captures needed to find which of `n` Tx directions each of `n` Rx
/// directions can decode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyncBudget {
    pub mode: SyncMode,
    pub n_directions: u64,
    pub trials: u64,
}

pub fn sync_trial_count(n: u64, mode: SyncMode) -> Result<SyncBudget> {
    if n == 0 {
        return invalid("need at least one direction");
    }
    let trials = match mode {
        SyncMode::Analog => n
            .checked_mul(n)
            .ok_or_else(|| Error::InvalidArgument(format!("{n} directions overflow the trial count")))?,
        SyncMode::Digital => 1,
    };
    Ok(SyncBudget {
        mode,
        n_directions: n,
        trials,
    })
}

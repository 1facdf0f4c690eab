//! Hybrid precoding/combining and digital beam banks.
//!
//! Transmit: `x = F_RF · F_BB · a`. Receive: `y = W_BBᴴ · W_RFᴴ · r`.
//! `phase_bits = 0` marks an unconstrained (fully digital) analog stage; a
//! positive value restricts analog entries to unit-modulus phases on a
//! `2^phase_bits` grid.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::array::{steering_vector, Angle, ArrayGeometry};
use crate::error::{invalid, Result};
use crate::json::{from_re_im, to_re_im, ReIm};
use crate::CMatrix;

const GRID_TOL: f64 = 1e-9;

fn check_analog(m: &CMatrix, phase_bits: u32, what: &str) -> Result<()> {
    if phase_bits == 0 {
        return Ok(());
    }
    let step = 2.0 * PI / (1u64 << phase_bits) as f64;
    for z in m.iter() {
        let k = z.arg() / step;
        if (z.norm() - 1.0).abs() > GRID_TOL || (k - k.round()).abs() * step > GRID_TOL {
            return invalid(format!("{what} entry {z} is not on the {phase_bits}-bit phase grid"));
        }
    }
    Ok(())
}

/// Transmit side: `N × N_RF` analog precoder and `N_RF × N_S` digital precoder.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridConfig {
    f_rf: CMatrix,
    f_bb: CMatrix,
    phase_bits: u32,
}

impl HybridConfig {
    pub fn new(f_rf: CMatrix, f_bb: CMatrix, phase_bits: u32) -> Result<Self> {
        let (n, n_rf) = f_rf.dim();
        let (rows, n_s) = f_bb.dim();
        if rows != n_rf {
            return invalid(format!("F_BB has {rows} rows but F_RF has {n_rf} columns"));
        }
        if n_rf > n || n_s > n_rf || n_s == 0 {
            return invalid(format!("need 1 <= N_S ({n_s}) <= N_RF ({n_rf}) <= N ({n})"));
        }
        check_analog(&f_rf, phase_bits, "F_RF")?;
        Ok(Self { f_rf, f_bb, phase_bits })
    }

    pub fn f_rf(&self) -> &CMatrix {
        &self.f_rf
    }

    pub fn f_bb(&self) -> &CMatrix {
        &self.f_bb
    }

    pub fn phase_bits(&self) -> u32 {
        self.phase_bits
    }

    pub fn streams(&self) -> usize {
        self.f_bb.ncols()
    }

    pub fn rf_chains(&self) -> usize {
        self.f_rf.ncols()
    }
}

/// Receive side: `M × M_RF` analog combiner and `M_RF × N_S` digital combiner.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinerConfig {
    w_rf: CMatrix,
    w_bb: CMatrix,
    phase_bits: u32,
}

impl CombinerConfig {
    pub fn new(w_rf: CMatrix, w_bb: CMatrix, phase_bits: u32) -> Result<Self> {
        let (m, m_rf) = w_rf.dim();
        let (rows, n_s) = w_bb.dim();
        if rows != m_rf {
            return invalid(format!("W_BB has {rows} rows but W_RF has {m_rf} columns"));
        }
        if m_rf > m || n_s > m_rf || n_s == 0 {
            return invalid(format!("need 1 <= N_S ({n_s}) <= M_RF ({m_rf}) <= M ({m})"));
        }
        check_analog(&w_rf, phase_bits, "W_RF")?;
        Ok(Self { w_rf, w_bb, phase_bits })
    }

    /// Single analog beam: `W_RF` = one column, `W_BB` = [1].
    pub fn analog_beam(weights: &[Complex64]) -> Result<Self> {
        let w_rf = Array2::from_shape_fn((weights.len(), 1), |(i, _)| weights[i]);
        Self::new(w_rf, Array2::from_elem((1, 1), Complex64::new(1.0, 0.0)), 0)
    }

    pub fn w_rf(&self) -> &CMatrix {
        &self.w_rf
    }

    pub fn w_bb(&self) -> &CMatrix {
        &self.w_bb
    }

    pub fn phase_bits(&self) -> u32 {
        self.phase_bits
    }

    pub fn streams(&self) -> usize {
        self.w_bb.ncols()
    }

    pub fn rf_chains(&self) -> usize {
        self.w_rf.ncols()
    }

    /// Equivalent fully-digital weights, one per stream: columns of `W_RF·W_BB`.
    pub fn digital_equivalent(&self) -> Vec<Vec<Complex64>> {
        let w = self.w_rf.dot(&self.w_bb);
        w.columns().into_iter().map(|c| c.to_vec()).collect()
    }
}

/// `N_S ≤ min(N_RF, M_RF)` across a link.
pub fn check_link(tx: &HybridConfig, rx: &CombinerConfig) -> Result<()> {
    if tx.streams() != rx.streams() {
        return invalid("transmit and receive stream counts differ");
    }
    if tx.streams() > tx.rf_chains().min(rx.rf_chains()) {
        return invalid("more streams than RF chains");
    }
    Ok(())
}

fn hermitian(m: &CMatrix) -> CMatrix {
    m.t().mapv(|z| z.conj())
}

/// `x = F_RF · F_BB · a` for an `N_S × T` symbol block.
pub fn precode(cfg: &HybridConfig, a: &CMatrix) -> Result<CMatrix> {
    if a.nrows() != cfg.streams() {
        return invalid(format!("symbol block has {} rows, expected {}", a.nrows(), cfg.streams()));
    }
    Ok(cfg.f_rf.dot(&cfg.f_bb.dot(a)))
}

/// `y = W_BBᴴ · W_RFᴴ · r` for an `M × T` receive block.
pub fn combine(cfg: &CombinerConfig, r: &CMatrix) -> Result<CMatrix> {
    if r.nrows() != cfg.w_rf.nrows() {
        return invalid(format!("receive block has {} rows, expected {}", r.nrows(), cfg.w_rf.nrows()));
    }
    Ok(hermitian(&cfg.w_bb).dot(&hermitian(&cfg.w_rf).dot(r)))
}

/// Rounds each entry's phase to the nearest multiple of `2π/2^bits` (ties
/// toward +phase) and sets its modulus to one.
pub fn quantize_phases(m: &CMatrix, phase_bits: u32) -> Result<CMatrix> {
    if phase_bits == 0 {
        return invalid("phase quantization needs at least 1 bit");
    }
    if phase_bits > 32 {
        return invalid("phase quantization supports at most 32 bits");
    }
    let step = 2.0 * PI / (1u64 << phase_bits) as f64;
    Ok(m.mapv(|z| {
        let k = (z.arg() / step + 0.5).floor();
        Complex64::from_polar(1.0, k * step)
    }))
}

/// Digital weight vectors sharing one receive block.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamBank {
    weights: Vec<Vec<Complex64>>,
    labels: Vec<Angle>,
}

#[derive(Serialize, Deserialize)]
struct BeamJson {
    label_az_deg: f64,
    label_el_deg: f64,
    weights: Vec<ReIm>,
}

#[derive(Serialize, Deserialize)]
struct BankJson {
    m: usize,
    beams: Vec<BeamJson>,
}

impl BeamBank {
    pub fn new(weights: Vec<Vec<Complex64>>, labels: Vec<Angle>) -> Result<Self> {
        if weights.is_empty() {
            return invalid("beam bank needs at least one beam");
        }
        if weights.len() != labels.len() {
            return invalid("one label per beam required");
        }
        let m = weights[0].len();
        if m == 0 || weights.iter().any(|w| w.len() != m) {
            return invalid("all beams must have the same non-zero length");
        }
        Ok(Self { weights, labels })
    }

    pub fn weights(&self) -> &[Vec<Complex64>] {
        &self.weights
    }

    pub fn labels(&self) -> &[Angle] {
        &self.labels
    }

    pub fn beams(&self) -> usize {
        self.weights.len()
    }

    /// Element count.
    pub fn m(&self) -> usize {
        self.weights[0].len()
    }

    pub fn to_json(&self) -> Result<String> {
        let j = BankJson {
            m: self.m(),
            beams: self
                .weights
                .iter()
                .zip(&self.labels)
                .map(|(w, l)| BeamJson {
                    label_az_deg: l.azimuth().to_degrees(),
                    label_el_deg: l.elevation().to_degrees(),
                    weights: to_re_im(w),
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&j)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let j: BankJson = serde_json::from_str(text)?;
        let mut weights = Vec::new();
        let mut labels = Vec::new();
        for b in j.beams {
            if b.weights.len() != j.m {
                return invalid("beam weight count does not match m");
            }
            labels.push(Angle::from_degrees(b.label_az_deg, b.label_el_deg)?);
            weights.push(from_re_im(b.weights));
        }
        Self::new(weights, labels)
    }
}

/// Beams matched to `directions`: `w_b = a(direction_b) / M`, so each beam
/// has unit gain `⟨w_b, a(direction_b)⟩ = 1` toward its label.
pub fn matched_beam_bank(geom: &ArrayGeometry, directions: &[Angle]) -> Result<BeamBank> {
    if directions.is_empty() {
        return invalid("need at least one beam direction");
    }
    let m = geom.len() as f64;
    let weights = directions
        .iter()
        .map(|&d| steering_vector(geom, d).into_iter().map(|z| z / m).collect())
        .collect();
    BeamBank::new(weights, directions.to_vec())
}

/// `out[b, t] = ⟨w_b, r[:, t]⟩`, every beam reading the same `r`.
pub fn apply_beam_bank(bank: &BeamBank, r: &CMatrix) -> Result<CMatrix> {
    apply_beam_bank_counted(bank, r).map(|(out, _)| out)
}

/// As [`apply_beam_bank`], also returning the multiply-accumulate count.
pub fn apply_beam_bank_counted(bank: &BeamBank, r: &CMatrix) -> Result<(CMatrix, u64)> {
    if r.nrows() != bank.m() {
        return invalid(format!("receive block has {} rows, bank expects {}", r.nrows(), bank.m()));
    }
    let t_len = r.ncols();
    let mut out = CMatrix::zeros((bank.beams(), t_len));
    let conj: Vec<Vec<Complex64>> = bank
        .weights
        .iter()
        .map(|w| w.iter().map(|z| z.conj()).collect())
        .collect();
    let mut macs = 0u64;
    // single pass over r: each column is loaded once and feeds all beams
    for (t, col) in r.columns().into_iter().enumerate() {
        for (b, w) in conj.iter().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (wk, xk) in w.iter().zip(col.iter()) {
                acc += wk * xk;
            }
            macs += w.len() as u64;
            out[(b, t)] = acc;
        }
    }
    Ok((out, macs))
}

//! RF chain impairments, ADC quantization, LO plan and digital calibration.

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::json::{from_re_im, to_re_im, ReIm};
use crate::CMatrix;

/// Ratio between RF carrier and the external LO (the IF chain triples the LO
/// and the mixer adds another half).
pub const RF_MULTIPLIER: f64 = 3.5;

/// External LO needed to land on `rf_hz`.
///
/// 3.5 is exact in binary, so this single division is the correctly rounded
/// value of the rational quotient.
pub fn lo_frequency_for_rf(rf_hz: f64) -> Result<f64> {
    if !(rf_hz > 0.0) || !rf_hz.is_finite() {
        return invalid(format!("rf frequency must be finite and > 0, got {rf_hz}"));
    }
    Ok(rf_hz / RF_MULTIPLIER)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoPlan {
    external_lo_hz: f64,
}

impl LoPlan {
    pub fn new(external_lo_hz: f64) -> Result<Self> {
        if !(external_lo_hz > 0.0) || !external_lo_hz.is_finite() {
            return invalid("external LO must be finite and > 0");
        }
        Ok(Self { external_lo_hz })
    }

    pub fn for_rf(rf_hz: f64) -> Result<Self> {
        Self::new(lo_frequency_for_rf(rf_hz)?)
    }

    pub fn external_lo_hz(&self) -> f64 {
        self.external_lo_hz
    }

    pub fn rf_hz(&self) -> f64 {
        self.external_lo_hz * RF_MULTIPLIER
    }
}

/// Per-chain analog impairments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainImpairment {
    pub gain_db: f64,
    pub phase_deg: f64,
    /// I/Q amplitude ratio g.
    pub iq_gain: f64,
    pub iq_phase_deg: f64,
    pub dc_offset: Complex64,
}

impl Default for ChainImpairment {
    fn default() -> Self {
        Self {
            gain_db: 0.0,
            phase_deg: 0.0,
            iq_gain: 1.0,
            iq_phase_deg: 0.0,
            dc_offset: Complex64::new(0.0, 0.0),
        }
    }
}

impl ChainImpairment {
    pub fn validate(&self) -> Result<()> {
        if !(self.iq_gain > 0.0) || !self.iq_gain.is_finite() {
            return invalid(format!("iq_gain must be finite and > 0, got {}", self.iq_gain));
        }
        if !self.gain_db.is_finite() || !self.phase_deg.is_finite() || !self.iq_phase_deg.is_finite() {
            return invalid("chain impairment values must be finite");
        }
        Ok(())
    }

    /// Complex gain applied before the I/Q stage.
    pub fn complex_gain(&self) -> Complex64 {
        Complex64::from_polar(10f64.powf(self.gain_db / 20.0), self.phase_deg.to_radians())
    }

    pub fn iq(&self) -> IqImbalance {
        IqImbalance {
            gain: self.iq_gain,
            phase: self.iq_phase_deg.to_radians(),
        }
    }
}

/// Receive I/Q imbalance `y = μ·x + ν·conj(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IqImbalance {
    pub gain: f64,
    /// Radians.
    pub phase: f64,
}

impl IqImbalance {
    pub fn new(gain: f64, phase: f64) -> Result<Self> {
        if !(gain > 0.0) || !gain.is_finite() || !phase.is_finite() {
            return invalid(format!("I/Q gain must be finite and > 0, got {gain}"));
        }
        Ok(Self { gain, phase })
    }

    pub fn mu(&self) -> Complex64 {
        (1.0 + Complex64::from_polar(self.gain, self.phase)) / 2.0
    }

    pub fn nu(&self) -> Complex64 {
        (1.0 - Complex64::from_polar(self.gain, -self.phase)) / 2.0
    }

    /// Image rejection ratio |μ|²/|ν|², dB. Infinite for a balanced mixer.
    pub fn irr_db(&self) -> f64 {
        10.0 * (self.mu().norm_sqr() / self.nu().norm_sqr()).log10()
    }

    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let (mu, nu) = (self.mu(), self.nu());
        x.iter().map(|&v| mu * v + nu * v.conj()).collect()
    }

    /// Undo [`IqImbalance::apply`].
    pub fn correct(&self, y: &[Complex64]) -> Result<Vec<Complex64>> {
        let (mu, nu) = (self.mu(), self.nu());
        let det = mu.norm_sqr() - nu.norm_sqr();
        if det.abs() < 1e-12 {
            return Err(Error::InvalidImbalance);
        }
        Ok(y.iter().map(|&v| (mu.conj() * v - nu * v.conj()) / det).collect())
    }
}

pub fn apply_iq_imbalance(x: &[Complex64], g: f64, phi: f64) -> Result<Vec<Complex64>> {
    Ok(IqImbalance::new(g, phi)?.apply(x))
}

fn fft(x: &[Complex64]) -> Vec<Complex64> {
    let mut buf = x.to_vec();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf
}

/// Power ratio between DFT bin `bin` and its mirror `-bin`, dB.
pub fn image_rejection_db(x: &[Complex64], bin: usize) -> Result<f64> {
    let n = x.len();
    if bin == 0 || bin >= n || 2 * bin == n {
        return invalid("tone bin must be non-zero and not its own image");
    }
    let spec = fft(x);
    Ok(10.0 * (spec[bin].norm_sqr() / spec[n - bin].norm_sqr()).log10())
}

/// Estimate (g, φ) from a block holding one complex tone.
///
/// The tone is taken to be the strongest DFT bin other than DC and Nyquist;
/// its mirror is the image.
pub fn estimate_iq_imbalance(x: &[Complex64]) -> Result<(f64, f64)> {
    let n = x.len();
    if n < 4 {
        return invalid("need at least 4 samples");
    }
    let spec = fft(x);
    let bin = (1..n)
        .filter(|&k| 2 * k != n)
        .max_by(|&a, &b| spec[a].norm_sqr().total_cmp(&spec[b].norm_sqr()))
        .expect("n >= 4");
    imbalance_from_bins(spec[bin], spec[n - bin])
}

/// Same as [`estimate_iq_imbalance`] with the tone bin given.
pub fn estimate_iq_imbalance_at(x: &[Complex64], bin: usize) -> Result<(f64, f64)> {
    let n = x.len();
    if bin == 0 || bin >= n || 2 * bin == n {
        return invalid("tone bin must be non-zero and not its own image");
    }
    let spec = fft(x);
    imbalance_from_bins(spec[bin], spec[n - bin])
}

// Y(+ω) = μA, Y(−ω) = ν·conj(A), so ρ = Y(−ω)/conj(Y(+ω)) = ν/conj(μ)
// = (1 − z)/(1 + z) with z = g·e^{−jφ}.
fn imbalance_from_bins(plus: Complex64, minus: Complex64) -> Result<(f64, f64)> {
    if !(plus.norm() > minus.norm()) {
        return Err(Error::InvalidImbalance);
    }
    let rho = minus / plus.conj();
    let z = (1.0 - rho) / (1.0 + rho);
    Ok((z.norm(), -z.arg()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantSpec {
    bits: u32,
    full_scale: f64,
}

impl QuantSpec {
    pub fn new(bits: u32, full_scale: f64) -> Result<Self> {
        if !(1..=24).contains(&bits) {
            return invalid(format!("ADC bits must be in [1, 24], got {bits}"));
        }
        if !(full_scale > 0.0) || !full_scale.is_finite() {
            return invalid("full scale must be finite and > 0");
        }
        Ok(Self { bits, full_scale })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn full_scale(&self) -> f64 {
        self.full_scale
    }

    pub fn step(&self) -> f64 {
        2.0 * self.full_scale / (1u64 << self.bits) as f64
    }

    // returns (value, clipped)
    fn level(&self, v: f64) -> (f64, bool) {
        let step = self.step();
        let hi = ((1u64 << (self.bits - 1)) - 1) as f64;
        let lo = -((1u64 << (self.bits - 1)) as f64);
        let idx = (v / step).floor();
        let clamped = idx.clamp(lo, hi);
        (step * (clamped + 0.5), clamped != idx)
    }
}

/// Mid-rise quantization of I and Q. Returns the samples and the number of
/// clipped components.
pub fn quantize(x: &[Complex64], spec: &QuantSpec) -> (Vec<Complex64>, usize) {
    let mut clipped = 0;
    let out = x
        .iter()
        .map(|v| {
            let (re, a) = spec.level(v.re);
            let (im, b) = spec.level(v.im);
            clipped += a as usize + b as usize;
            Complex64::new(re, im)
        })
        .collect();
    (out, clipped)
}

fn map_rows<F>(streams: &CMatrix, f: F) -> Result<CMatrix>
where
    F: Fn(usize, Vec<Complex64>) -> Result<Vec<Complex64>> + Sync,
{
    let (k, t) = streams.dim();
    let rows = (0..k)
        .into_par_iter()
        .map(|i| f(i, streams.row(i).to_vec()))
        .collect::<Result<Vec<_>>>()?;
    let flat: Vec<Complex64> = rows.into_iter().flatten().collect();
    Array2::from_shape_vec((k, t), flat).map_err(|e| Error::Numerical(e.to_string()))
}

/// Complex gain, then I/Q imbalance, then DC offset, per chain.
pub fn apply_chain_impairments(streams: &CMatrix, imps: &[ChainImpairment]) -> Result<CMatrix> {
    if imps.len() != streams.nrows() {
        return invalid(format!(
            "{} impairments for {} chains",
            imps.len(),
            streams.nrows()
        ));
    }
    for imp in imps {
        imp.validate()?;
    }
    map_rows(streams, |k, row| {
        let imp = &imps[k];
        let g = imp.complex_gain();
        let scaled: Vec<Complex64> = row.iter().map(|&v| g * v).collect();
        Ok(imp.iq().apply(&scaled).into_iter().map(|v| v + imp.dc_offset).collect())
    })
}

/// Per-chain complex multipliers aligning every chain to chain 0.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    corrections: Vec<Complex64>,
}

#[derive(Serialize, Deserialize)]
struct CalibrationJson {
    reference_chain: usize,
    corrections: Vec<ReIm>,
}

impl CalibrationResult {
    pub fn new(corrections: Vec<Complex64>) -> Result<Self> {
        if corrections.first() != Some(&Complex64::new(1.0, 0.0)) {
            return invalid("calibration needs at least one chain and corrections[0] = 1");
        }
        if corrections.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return invalid("calibration corrections must be finite");
        }
        Ok(Self { corrections })
    }

    pub fn identity(chains: usize) -> Self {
        Self {
            corrections: vec![Complex64::new(1.0, 0.0); chains.max(1)],
        }
    }

    pub fn corrections(&self) -> &[Complex64] {
        &self.corrections
    }

    pub fn reference_chain(&self) -> usize {
        0
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&CalibrationJson {
            reference_chain: 0,
            corrections: to_re_im(&self.corrections),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let j: CalibrationJson = serde_json::from_str(text)?;
        if j.reference_chain != 0 {
            return invalid("reference_chain must be 0");
        }
        Self::new(from_re_im(j.corrections))
    }
}

/// Complex amplitude of the tone at `tone_freq` and the power of what is
/// left after removing it.
fn project_tone(row: &[Complex64], omega: f64) -> (Complex64, f64) {
    let t = row.len() as f64;
    let amp: Complex64 = row
        .iter()
        .enumerate()
        .map(|(i, &v)| v * Complex64::from_polar(1.0, -omega * i as f64))
        .sum::<Complex64>()
        / t;
    let residual: f64 = row
        .iter()
        .enumerate()
        .map(|(i, &v)| (v - amp * Complex64::from_polar(1.0, omega * i as f64)).norm_sqr())
        .sum();
    (amp, residual)
}

/// Minimum tone-to-bin-noise ratio accepted by [`estimate_chain_mismatch`].
pub const MIN_TONE_SNR_DB: f64 = 20.0;

pub fn estimate_chain_mismatch(streams: &CMatrix, tone_freq: f64, sample_rate: f64) -> Result<CalibrationResult> {
    let (k, t) = streams.dim();
    if k == 0 {
        return invalid("no chains to calibrate");
    }
    if t < 64 {
        return invalid(format!("need at least 64 samples per chain, got {t}"));
    }
    if !(sample_rate > 0.0) || !tone_freq.is_finite() {
        return invalid("sample rate must be > 0 and tone frequency finite");
    }
    let omega = 2.0 * std::f64::consts::PI * tone_freq / sample_rate;
    let amps = (0..k)
        .into_par_iter()
        .map(|i| {
            let row = streams.row(i).to_vec();
            let (amp, residual) = project_tone(&row, omega);
            // |DFT bin|² = T²|amp|², noise per bin = T·σ²
            let noise = residual / t as f64;
            let snr = t as f64 * amp.norm_sqr() / noise;
            if !(snr >= 10f64.powf(MIN_TONE_SNR_DB / 10.0)) {
                return Err(Error::EstimationUnreliable(format!(
                    "chain {i}: tone is {:.1} dB above the bin noise floor",
                    10.0 * snr.log10()
                )));
            }
            Ok(amp)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut corrections: Vec<Complex64> = amps.iter().map(|a| amps[0] / a).collect();
    corrections[0] = Complex64::new(1.0, 0.0);
    CalibrationResult::new(corrections)
}

/// Multiply chain k by `corrections[k]`. Not idempotent.
pub fn compensate(streams: &CMatrix, cal: &CalibrationResult) -> Result<CMatrix> {
    if cal.corrections.len() != streams.nrows() {
        return invalid(format!(
            "calibration has {} chains, streams have {}",
            cal.corrections.len(),
            streams.nrows()
        ));
    }
    let mut out = streams.clone();
    for (mut row, &c) in out.rows_mut().into_iter().zip(&cal.corrections) {
        row.mapv_inplace(|v| v * c);
    }
    Ok(out)
}

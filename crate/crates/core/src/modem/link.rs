use ndarray::Array2;
use num_complex::Complex64;
use std::f64::consts::PI;

use super::pulse::{rrc_taps, ROLLOFF, SPAN_SYMBOLS};
use super::qpsk::{qpsk_demodulate, qpsk_modulate};
use crate::array::{steering_vector, Angle, ArrayGeometry};
use crate::error::{invalid, Result};
use crate::CMatrix;

pub const PREAMBLE_SYMBOLS: usize = 64;

/// Frequency slots sharing one complex-baseband sample stream.
#[derive(Debug, Clone, PartialEq)]
pub struct SubchannelPlan {
    offsets_hz: Vec<f64>,
    symbol_rate: f64,
    sample_rate: f64,
}

impl SubchannelPlan {
    pub fn new(offsets_hz: Vec<f64>, symbol_rate: f64, sample_rate: f64) -> Result<Self> {
        if offsets_hz.is_empty() {
            return invalid("subchannel plan needs at least one offset");
        }
        if offsets_hz.iter().any(|f| !f.is_finite()) {
            return invalid("subchannel offsets must be finite");
        }
        if !(symbol_rate > 0.0) || !(sample_rate > 0.0) {
            return invalid("symbol rate and sample rate must be > 0");
        }
        let sps = sample_rate / symbol_rate;
        if (sps - sps.round()).abs() > 1e-9 * sps || sps.round() < 2.0 {
            return invalid(format!(
                "sample rate must be an integer multiple (>= 2) of the symbol rate, ratio is {sps}"
            ));
        }
        let max_off = offsets_hz.iter().fold(0f64, |m, f| m.max(f.abs()));
        if sample_rate < 2.0 * (max_off + symbol_rate) {
            return invalid(format!(
                "sample rate {sample_rate} Hz is below 2·(max offset + symbol rate) = {} Hz",
                2.0 * (max_off + symbol_rate)
            ));
        }
        let min_gap = symbol_rate * (1.0 + ROLLOFF);
        for i in 0..offsets_hz.len() {
            for j in i + 1..offsets_hz.len() {
                if (offsets_hz[i] - offsets_hz[j]).abs() <= min_gap {
                    return invalid(format!(
                        "subchannels at {} Hz and {} Hz are closer than {min_gap} Hz",
                        offsets_hz[i], offsets_hz[j]
                    ));
                }
            }
        }
        Ok(Self {
            offsets_hz,
            symbol_rate,
            sample_rate,
        })
    }

    pub fn offsets_hz(&self) -> &[f64] {
        &self.offsets_hz
    }

    pub fn symbol_rate(&self) -> f64 {
        self.symbol_rate
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.offsets_hz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets_hz.is_empty()
    }

    pub fn samples_per_symbol(&self) -> usize {
        (self.sample_rate / self.symbol_rate).round() as usize
    }

    pub fn taps(&self) -> Vec<f64> {
        rrc_taps(ROLLOFF, SPAN_SYMBOLS, self.samples_per_symbol())
    }

    fn offset(&self, index: usize) -> Result<f64> {
        match self.offsets_hz.get(index) {
            Some(&f) => Ok(f),
            None => invalid(format!("subchannel {index} out of range (plan has {})", self.len())),
        }
    }
}

impl Default for SubchannelPlan {
    /// 245.76 MS/s, 15.36 MBd, slots at ±30.72 and ±61.44 MHz.
    fn default() -> Self {
        Self::new(vec![-61.44e6, -30.72e6, 30.72e6, 61.44e6], 15.36e6, 245.76e6).expect("valid default plan")
    }
}

fn mixer(freq_hz: f64, sample_rate: f64, n: usize) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * freq_hz * n as f64 / sample_rate)
}

/// RRC-shaped symbols on subchannel `index`. Length `(K-1)·sps + taps`.
pub fn build_subchannel(symbols: &[Complex64], plan: &SubchannelPlan, index: usize) -> Result<Vec<Complex64>> {
    let f = plan.offset(index)?;
    if symbols.is_empty() {
        return Ok(Vec::new());
    }
    let sps = plan.samples_per_symbol();
    let h = plan.taps();
    let mut out = vec![Complex64::new(0.0, 0.0); (symbols.len() - 1) * sps + h.len()];
    for (k, &s) in symbols.iter().enumerate() {
        for (i, &g) in h.iter().enumerate() {
            out[k * sps + i] += s * g;
        }
    }
    for (n, v) in out.iter_mut().enumerate() {
        *v *= mixer(f, plan.sample_rate, n);
    }
    Ok(out)
}

/// Down-mix subchannel `index` to baseband and apply the RRC matched filter
/// (full convolution). Symbol k of a burst starting at sample d peaks at
/// `d + taps - 1 + k·sps`.
pub fn matched_filter(samples: &[Complex64], plan: &SubchannelPlan, index: usize) -> Result<Vec<Complex64>> {
    let f = plan.offset(index)?;
    if samples.is_empty() {
        return Ok(Vec::new());
    }
    let h = plan.taps();
    let base: Vec<Complex64> = samples
        .iter()
        .enumerate()
        .map(|(n, &v)| v * mixer(-f, plan.sample_rate, n))
        .collect();
    let mut out = vec![Complex64::new(0.0, 0.0); base.len() + h.len() - 1];
    for (n, &v) in base.iter().enumerate() {
        for (i, &g) in h.iter().enumerate() {
            out[n + i] += v * g;
        }
    }
    Ok(out)
}

/// Constant-amplitude chirp quantized to QPSK, as bits.
pub fn zadoff_chu_preamble(root: u32, symbols: usize) -> Vec<bool> {
    let n = symbols as f64;
    let odd = symbols % 2;
    let zc: Vec<Complex64> = (0..symbols)
        .map(|k| {
            let k = k as f64;
            let phase = -PI * root as f64 * k * (k + odd as f64) / n;
            Complex64::from_polar(1.0, phase + PI / 4.0)
        })
        .collect();
    qpsk_demodulate(&zc)
}

/// One transmitted stream: preamble followed by payload, beamed at
/// `direction` on subchannel `subchannel_index`.
#[derive(Debug, Clone, PartialEq)]
pub struct TxStreamSpec {
    pub direction: Angle,
    pub subchannel_index: usize,
    pub bits: Vec<bool>,
    pub preamble: Vec<bool>,
}

impl TxStreamSpec {
    pub fn preamble_symbols(&self) -> Result<Vec<Complex64>> {
        if self.preamble.is_empty() {
            return invalid("stream preamble is empty");
        }
        qpsk_modulate(&self.preamble)
    }

    pub fn payload_symbols(&self) -> Result<Vec<Complex64>> {
        if self.bits.is_empty() {
            return invalid("stream payload is empty");
        }
        qpsk_modulate(&self.bits)
    }

    pub fn burst_symbols(&self) -> Result<Vec<Complex64>> {
        let mut s = self.preamble_symbols()?;
        s.extend(self.payload_symbols()?);
        Ok(s)
    }
}

/// Superposition of per-stream matched transmit beams, `x = Σ a_t(θ_s)/N · s_s(t)`.
pub fn transmit_scene(specs: &[TxStreamSpec], tx_geom: &ArrayGeometry, plan: &SubchannelPlan) -> Result<CMatrix> {
    let n = tx_geom.len();
    let mut seen = vec![false; plan.len()];
    let mut waves = Vec::with_capacity(specs.len());
    for spec in specs {
        let idx = spec.subchannel_index;
        if idx >= plan.len() {
            return invalid(format!("subchannel {idx} out of range (plan has {})", plan.len()));
        }
        if seen[idx] {
            return invalid(format!("two streams share subchannel {idx}"));
        }
        seen[idx] = true;
        waves.push(build_subchannel(&spec.burst_symbols()?, plan, idx)?);
    }
    let t = waves.iter().map(Vec::len).max().unwrap_or(0);
    let mut x = Array2::zeros((n, t));
    for (spec, wave) in specs.iter().zip(&waves) {
        let a = steering_vector(tx_geom, spec.direction);
        for (mut row, ak) in x.rows_mut().into_iter().zip(&a) {
            let w = ak / n as f64;
            for (xv, &s) in row.iter_mut().zip(wave) {
                *xv += w * s;
            }
        }
    }
    Ok(x)
}

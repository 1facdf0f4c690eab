//! Clustered (extended Saleh-Valenzuela) mm-wave channels.
//!
//! A realization is a set of `C·L` subpaths, each with a complex gain, an
//! angle of arrival, an angle of departure and a delay. The narrowband matrix
//! is
//!
//! ```text
//! H = sqrt(N·M / (C·L)) · Σ α · ā_r(aoa) · ā_t(aod)ᴴ
//! ```
//!
//! with unit-norm array responses `ā = a / √len`, so that `E‖H‖²_F = N·M`
//! when `E|α|² = 1`. The wideband form spreads the same rank-one terms over
//! integer sample taps.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Open01, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::array::{steering_vector, Angle, ArrayGeometry};
use crate::error::{invalid, Error, Result};
use crate::CMatrix;

/// Cluster-model parameters for one draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterParams {
    pub num_clusters: usize,
    pub subpaths_per_cluster: usize,
    /// Laplacian scale of per-subpath azimuth offsets, radians.
    pub angle_spread: f64,
    /// `E|α|²`.
    pub gain_power: f64,
    pub seed: u64,
}

impl ClusterParams {
    pub fn validate(&self) -> Result<()> {
        if self.num_clusters == 0 || self.subpaths_per_cluster == 0 {
            return invalid("need at least one cluster and one subpath per cluster");
        }
        if !(self.angle_spread >= 0.0) {
            return invalid("angle spread must be >= 0");
        }
        if !(self.gain_power > 0.0) {
            return invalid("gain power must be > 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Subpath {
    pub alpha: Complex64,
    pub aoa: Angle,
    pub aod: Angle,
    /// Seconds.
    pub delay: f64,
}

/// The `C·L` subpaths of one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct SubpathSet {
    num_clusters: usize,
    subpaths_per_cluster: usize,
    paths: Vec<Subpath>,
}

#[derive(Serialize, Deserialize)]
struct SubpathRecord {
    alpha_re: f64,
    alpha_im: f64,
    aoa_az_rad: f64,
    aoa_el_rad: f64,
    aod_az_rad: f64,
    aod_el_rad: f64,
    delay_s: f64,
}

impl SubpathSet {
    pub fn new(num_clusters: usize, subpaths_per_cluster: usize, paths: Vec<Subpath>) -> Result<Self> {
        if num_clusters == 0 || subpaths_per_cluster == 0 {
            return invalid("need at least one cluster and one subpath per cluster");
        }
        if paths.len() != num_clusters * subpaths_per_cluster {
            return invalid(format!(
                "{} subpaths for {num_clusters}x{subpaths_per_cluster} clusters",
                paths.len()
            ));
        }
        if paths.iter().any(|p| !(p.delay >= 0.0) || !p.alpha.re.is_finite() || !p.alpha.im.is_finite()) {
            return invalid("subpath delays must be >= 0 and gains finite");
        }
        Ok(Self {
            num_clusters,
            subpaths_per_cluster,
            paths,
        })
    }

    /// A single path with unit gain and zero delay.
    pub fn line_of_sight(aod: Angle, aoa: Angle) -> Self {
        Self {
            num_clusters: 1,
            subpaths_per_cluster: 1,
            paths: vec![Subpath {
                alpha: Complex64::new(1.0, 0.0),
                aoa,
                aod,
                delay: 0.0,
            }],
        }
    }

    pub fn paths(&self) -> &[Subpath] {
        &self.paths
    }

    pub fn num_clusters(&self) -> usize {
        self.num_clusters
    }

    pub fn subpaths_per_cluster(&self) -> usize {
        self.subpaths_per_cluster
    }

    pub fn to_json(&self) -> Result<String> {
        let recs: Vec<SubpathRecord> = self
            .paths
            .iter()
            .map(|p| SubpathRecord {
                alpha_re: p.alpha.re,
                alpha_im: p.alpha.im,
                aoa_az_rad: p.aoa.azimuth(),
                aoa_el_rad: p.aoa.elevation(),
                aod_az_rad: p.aod.azimuth(),
                aod_el_rad: p.aod.elevation(),
                delay_s: p.delay,
            })
            .collect();
        Ok(serde_json::to_string_pretty(&recs)?)
    }

    /// Loads the JSON array form. The cluster structure is not stored, so the
    /// result has one cluster per subpath; `C·L` (the only quantity the
    /// assembly depends on) is preserved.
    pub fn from_json(text: &str) -> Result<Self> {
        let recs: Vec<SubpathRecord> = serde_json::from_str(text)?;
        if recs.is_empty() {
            return invalid("subpath list is empty");
        }
        let paths = recs
            .into_iter()
            .map(|r| {
                Ok(Subpath {
                    alpha: Complex64::new(r.alpha_re, r.alpha_im),
                    aoa: Angle::new(r.aoa_az_rad, r.aoa_el_rad)?,
                    aod: Angle::new(r.aod_az_rad, r.aod_el_rad)?,
                    delay: r.delay_s,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let n = paths.len();
        Self::new(n, 1, paths)
    }
}

fn laplacian(rng: &mut ChaCha8Rng, scale: f64) -> f64 {
    if scale == 0.0 {
        return 0.0;
    }
    let u: f64 = rng.sample::<f64, _>(Open01) - 0.5;
    -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

fn complex_gaussian(rng: &mut ChaCha8Rng, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// Draws one realization.
///
/// Cluster centers are uniform in azimuth over `[−π/2, π/2]` at elevation 0,
/// independently for arrival and departure. Subpath azimuths add Laplacian
/// offsets of scale `angle_spread`; gains are `CN(0, gain_power)`; delays are
/// uniform on `[0, max_delay]`.
pub fn draw_subpaths(params: &ClusterParams, max_delay: f64) -> Result<SubpathSet> {
    params.validate()?;
    if !(max_delay >= 0.0) {
        return invalid("max delay must be >= 0");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut paths = Vec::with_capacity(params.num_clusters * params.subpaths_per_cluster);
    for _ in 0..params.num_clusters {
        let aoa_center = rng.random_range(-PI / 2.0..=PI / 2.0);
        let aod_center = rng.random_range(-PI / 2.0..=PI / 2.0);
        for _ in 0..params.subpaths_per_cluster {
            let aoa = aoa_center + laplacian(&mut rng, params.angle_spread);
            let aod = aod_center + laplacian(&mut rng, params.angle_spread);
            let alpha = complex_gaussian(&mut rng, params.gain_power);
            let delay = if max_delay > 0.0 {
                rng.random_range(0.0..=max_delay)
            } else {
                0.0
            };
            paths.push(Subpath {
                alpha,
                aoa: Angle::new(aoa, 0.0)?,
                aod: Angle::new(aod, 0.0)?,
                delay,
            });
        }
    }
    SubpathSet::new(params.num_clusters, params.subpaths_per_cluster, paths)
}

/// Narrowband `M × N` channel matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    entries: CMatrix,
}

impl ChannelMatrix {
    pub fn new(entries: CMatrix) -> Result<Self> {
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Numerical("channel matrix has non-finite entries".into()));
        }
        if entries.is_empty() {
            return invalid("channel matrix is empty");
        }
        Ok(Self { entries })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            entries: Array2::from_diag_elem(n, Complex64::new(1.0, 0.0)),
        }
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    /// Receive element count.
    pub fn m(&self) -> usize {
        self.entries.nrows()
    }

    /// Transmit element count.
    pub fn n(&self) -> usize {
        self.entries.ncols()
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `# M N` header then one row per receive element with interleaved
    /// `re,im` values.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# {} {}", self.m(), self.n())?;
        for row in self.entries.rows() {
            let fields: Vec<String> = row
                .iter()
                .flat_map(|z| [crate::array::fmt_f64(z.re), crate::array::fmt_f64(z.im)])
                .collect();
            writeln!(out, "{}", fields.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "empty file".into(),
        })??;
        let dims: Vec<usize> = header
            .strip_prefix('#')
            .map(|h| h.split_whitespace().filter_map(|t| t.parse().ok()).collect())
            .unwrap_or_default();
        if dims.len() != 2 {
            return Err(Error::Parse {
                line: 1,
                message: "expected '# M N' header".into(),
            });
        }
        let (m, n) = (dims[0], dims[1]);
        let mut entries = Array2::zeros((m, n));
        for r in 0..m {
            let line_no = r + 2;
            let line = lines.next().ok_or(Error::Parse {
                line: line_no,
                message: format!("expected {m} rows"),
            })??;
            let vals = line
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse {
                    line: line_no,
                    message: e.to_string(),
                })?;
            if vals.len() != 2 * n {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected {} values, found {}", 2 * n, vals.len()),
                });
            }
            for c in 0..n {
                entries[(r, c)] = Complex64::new(vals[2 * c], vals[2 * c + 1]);
            }
        }
        Self::new(entries)
    }
}

/// Integer-delay tapped channel; `taps[d]` multiplies `x[:, t−d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TappedChannel {
    taps: Vec<ChannelMatrix>,
    sample_rate: f64,
}

impl TappedChannel {
    pub fn new(taps: Vec<ChannelMatrix>, sample_rate: f64) -> Result<Self> {
        let first = taps.first().ok_or_else(|| Error::InvalidArgument("no taps".into()))?;
        if taps.iter().any(|t| t.m() != first.m() || t.n() != first.n()) {
            return invalid("all taps must share dimensions");
        }
        if !(sample_rate > 0.0) {
            return invalid("sample rate must be > 0");
        }
        Ok(Self { taps, sample_rate })
    }

    pub fn taps(&self) -> &[ChannelMatrix] {
        &self.taps
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    /// Entrywise sum of all taps.
    pub fn collapse(&self) -> ChannelMatrix {
        let mut sum = self.taps[0].entries.clone();
        for t in &self.taps[1..] {
            sum += &t.entries;
        }
        ChannelMatrix { entries: sum }
    }
}

fn rank_one_term(p: &Subpath, tx: &ArrayGeometry, rx: &ArrayGeometry, scale: f64) -> CMatrix {
    let ar = steering_vector(rx, p.aoa);
    let at = steering_vector(tx, p.aod);
    let g = p.alpha * scale;
    Array2::from_shape_fn((rx.len(), tx.len()), |(i, j)| g * ar[i] * at[j].conj())
}

/// Prefactor applied to unnormalized steering vectors:
/// `sqrt(NM/(CL)) / sqrt(NM)` = `1/sqrt(CL)`.
fn path_scale(set: &SubpathSet) -> f64 {
    1.0 / (set.paths.len() as f64).sqrt()
}

/// Narrowband assembly of a realization for the given arrays.
pub fn assemble_narrowband(
    subpaths: &SubpathSet,
    tx: &ArrayGeometry,
    rx: &ArrayGeometry,
) -> Result<ChannelMatrix> {
    if subpaths.paths.len() != subpaths.num_clusters * subpaths.subpaths_per_cluster {
        return invalid("subpath count does not match cluster structure");
    }
    let scale = path_scale(subpaths);
    let mut h = Array2::zeros((rx.len(), tx.len()));
    for p in &subpaths.paths {
        h += &rank_one_term(p, tx, rx, scale);
    }
    ChannelMatrix::new(h)
}

/// Tapped assembly: each subpath lands on tap `round(delay·fs)`.
pub fn assemble_wideband(
    subpaths: &SubpathSet,
    tx: &ArrayGeometry,
    rx: &ArrayGeometry,
    sample_rate: f64,
    num_taps: usize,
) -> Result<TappedChannel> {
    if num_taps == 0 {
        return invalid("need at least one tap");
    }
    if !(sample_rate > 0.0) {
        return invalid("sample rate must be > 0");
    }
    let span = num_taps as f64 / sample_rate;
    let scale = path_scale(subpaths);
    let mut taps = vec![CMatrix::zeros((rx.len(), tx.len())); num_taps];
    for p in &subpaths.paths {
        if p.delay >= span {
            return invalid(format!(
                "subpath delay {} s exceeds tap span {} s",
                p.delay, span
            ));
        }
        let idx = ((p.delay * sample_rate).round() as usize).min(num_taps - 1);
        taps[idx] += &rank_one_term(p, tx, rx, scale);
    }
    let taps = taps
        .into_iter()
        .map(ChannelMatrix::new)
        .collect::<Result<Vec<_>>>()?;
    TappedChannel::new(taps, sample_rate)
}

/// Anything that maps an `N × T` transmit block to an `M × T` receive block.
pub trait MimoChannel {
    fn rx_count(&self) -> usize;
    fn tx_count(&self) -> usize;
    /// Noiseless propagation.
    fn propagate(&self, x: &CMatrix) -> Result<CMatrix>;
}

fn check_rows(x: &CMatrix, n: usize) -> Result<()> {
    if x.nrows() != n {
        return invalid(format!("input has {} rows, channel expects {n}", x.nrows()));
    }
    Ok(())
}

impl MimoChannel for ChannelMatrix {
    fn rx_count(&self) -> usize {
        self.m()
    }

    fn tx_count(&self) -> usize {
        self.n()
    }

    fn propagate(&self, x: &CMatrix) -> Result<CMatrix> {
        check_rows(x, self.n())?;
        Ok(self.entries.dot(x))
    }
}

impl MimoChannel for TappedChannel {
    fn rx_count(&self) -> usize {
        self.taps[0].m()
    }

    fn tx_count(&self) -> usize {
        self.taps[0].n()
    }

    fn propagate(&self, x: &CMatrix) -> Result<CMatrix> {
        check_rows(x, self.tx_count())?;
        let t_len = x.ncols();
        let mut y = CMatrix::zeros((self.rx_count(), t_len));
        for (d, tap) in self.taps.iter().enumerate() {
            if d >= t_len {
                break;
            }
            let src = x.slice(ndarray::s![.., ..t_len - d]);
            let contrib = tap.entries.dot(&src);
            let mut dst = y.slice_mut(ndarray::s![.., d..]);
            dst += &contrib;
        }
        Ok(y)
    }
}

/// Circularly-symmetric white noise, `CN(0, variance)` per entry.
///
/// Column `t` is drawn from its own ChaCha stream (`seed`, stream `t`), so
/// any column can be regenerated independently of the others.
pub fn complex_noise(rows: usize, cols: usize, variance: f64, seed: u64) -> CMatrix {
    let mut n = CMatrix::zeros((rows, cols));
    if variance == 0.0 {
        return n;
    }
    for (t, mut col) in n.columns_mut().into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(t as u64);
        for z in col.iter_mut() {
            *z = complex_gaussian(&mut rng, variance);
        }
    }
    n
}

/// `y = H·x + n` (narrowband) or `y[:,t] = Σ_d H_d·x[:,t−d] + n[:,t]`.
pub fn apply_channel<C: MimoChannel + ?Sized>(
    ch: &C,
    x: &CMatrix,
    noise_variance: f64,
    seed: u64,
) -> Result<CMatrix> {
    if !(noise_variance >= 0.0) {
        return invalid("noise variance must be >= 0");
    }
    let mut y = ch.propagate(x)?;
    if noise_variance > 0.0 {
        y += &complex_noise(y.nrows(), y.ncols(), noise_variance, seed);
    }
    Ok(y)
}

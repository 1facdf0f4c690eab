//! Computations behind each preset, separate from artifact writing.

use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use multibeam_core::array::{azimuth_grid, make_ula, steering_vector, Angle, ArrayGeometry, Beampattern};
use multibeam_core::beamformer::{apply_beam_bank, matched_beam_bank, quantize_phases, BeamBank};
use multibeam_core::channel::{
    apply_channel, assemble_narrowband, complex_noise, draw_subpaths, ChannelMatrix, SubpathSet,
};
use multibeam_core::lens::{
    feed_to_beam_angle, lens_beampattern, lens_directivity_dbi, lenslet_pattern, load_measured_pattern, LensSpec,
    LensletArraySpec,
};
use multibeam_core::modem::{
    decode_grid, sync_trial_count, transmit_scene, zadoff_chu_preamble, DecodeGridResult, SubchannelPlan, SyncBudget,
    SyncMode, TxStreamSpec, PREAMBLE_SYMBOLS,
};
use multibeam_core::rf::{
    apply_chain_impairments, compensate, estimate_chain_mismatch, estimate_iq_imbalance, image_rejection_db,
    quantize, CalibrationResult, IqImbalance, QuantSpec,
};
use multibeam_core::{CMatrix, SPEED_OF_LIGHT};

use crate::error::CliError;
use crate::scenario::{
    cluster_params, feed_layout, BeampatternCfg, CalibrateScenario, ChannelModel, ChannelStatsCfg, LinkScenario,
    LensletScenario, SyncCfg,
};

// Independent sub-seeds for the random draws of one run.
const TAG_NOISE: u64 = 1;
const TAG_BITS: u64 = 2;
const TAG_CHANNEL: u64 = 3;

fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tag);
    rng.next_u64()
}

fn wavelength(freq: f64) -> f64 {
    SPEED_OF_LIGHT / freq
}

fn degrees(d: &[f64]) -> Vec<Angle> {
    d.iter().map(|&x| Angle::azimuth_deg(x)).collect()
}

fn mean_power<'a>(v: impl IntoIterator<Item = &'a Complex64>) -> f64 {
    let (s, n) = v.into_iter().fold((0.0, 0usize), |(s, n), z| (s + z.norm_sqr(), n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Local maxima within `within_db` of the global peak, as azimuths in degrees.
pub fn lobe_peaks_deg(p: &Beampattern, within_db: f64) -> Vec<f64> {
    let db = p.power_db();
    let (_, peak) = p.peak();
    (1..db.len().saturating_sub(1))
        .filter(|&i| db[i] > db[i - 1] && db[i] >= db[i + 1] && db[i] >= peak - within_db)
        .map(|i| p.angles()[i].azimuth().to_degrees())
        .collect()
}

pub struct BeampatternOutcome {
    pub geometry: ArrayGeometry,
    pub bank: BeamBank,
    /// Per beam, received power over that of one weighted element, dB.
    pub patterns: Vec<Beampattern>,
}

/// Emulated turntable sweep: a fixed source at each grid angle, all beams
/// formed digitally from the same capture, power integrated per angle.
pub fn beampattern_28(cfg: &BeampatternCfg, seed: u64) -> Result<BeampatternOutcome, CliError> {
    let lambda = wavelength(cfg.array.frequency_hz);
    let geom = make_ula(cfg.array.elements, cfg.array.spacing_wavelengths * lambda, lambda)?;
    let labels = degrees(&cfg.beams.directions_deg);
    let mut bank = matched_beam_bank(&geom, &labels)?;
    if cfg.beams.phase_bits > 0 {
        let m = geom.len();
        let w = Array2::from_shape_fn((m, bank.beams()), |(i, b)| bank.weights()[b][i]);
        let q = quantize_phases(&w, cfg.beams.phase_bits)?;
        let weights = (0..bank.beams())
            .map(|b| q.column(b).iter().map(|z| z / m as f64).collect())
            .collect();
        bank = BeamBank::new(weights, labels)?;
    }
    let grid = azimuth_grid(cfg.sweep.start_deg, cfg.sweep.stop_deg, cfg.sweep.step_deg)?;
    let t = cfg.sweep.samples;
    let source: Vec<Complex64> = (0..t)
        .map(|i| Complex64::from_polar(1.0, std::f64::consts::PI * i as f64 / 8.0))
        .collect();
    let noise_var = cfg.sweep.snr_db.map_or(0.0, |snr| 10f64.powf(-snr / 10.0));
    let noise_seed = derive_seed(seed, TAG_NOISE);
    let reference: Vec<f64> = bank
        .weights()
        .iter()
        .map(|w| w.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max))
        .collect();

    let mut power = vec![Vec::with_capacity(grid.len()); bank.beams()];
    for (i, &angle) in grid.iter().enumerate() {
        let a = steering_vector(&geom, angle);
        let mut r = CMatrix::from_shape_fn((geom.len(), t), |(k, j)| a[k] * source[j]);
        if noise_var > 0.0 {
            r += &complex_noise(geom.len(), t, noise_var, noise_seed.wrapping_add(i as u64));
        }
        let y = apply_beam_bank(&bank, &r)?;
        for (b, row) in y.rows().into_iter().enumerate() {
            let p = mean_power(row.iter()) / reference[b];
            power[b].push(multibeam_core::array::magnitude_db(p.sqrt()));
        }
    }
    let patterns = power
        .into_iter()
        .map(|p| Beampattern::new(grid.clone(), p, false))
        .collect::<multibeam_core::Result<Vec<_>>>()?;
    Ok(BeampatternOutcome {
        geometry: geom,
        bank,
        patterns,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct FeedSummary {
    pub feed_offset_m: [f64; 2],
    pub beam_az_deg: f64,
    pub element_peak_az_deg: f64,
    pub element_peak_dbi: f64,
    pub element_3db_width_deg: f64,
    pub composite_peak_az_deg: f64,
    pub composite_peak_dbi: f64,
    pub composite_3db_width_deg: f64,
    pub composite_lobes_deg: Vec<f64>,
}

pub struct LensletOutcome {
    pub directivity_dbi: f64,
    pub elements: Vec<Beampattern>,
    pub composites: Vec<Beampattern>,
    pub feeds: Vec<FeedSummary>,
}

pub fn lenslet_28(cfg: &LensletScenario) -> Result<LensletOutcome, CliError> {
    let lambda = wavelength(cfg.lens.frequency_hz);
    let lens = LensSpec::new(cfg.lens.radius_m, cfg.lens.base_length_m, cfg.lens.focal_length_m, cfg.lens.loss_db)?;
    let layout = feed_layout(&cfg.feeds, lambda)?;
    let array = LensletArraySpec::new(cfg.lenslet.num_lenses, cfg.lenslet.pitch_m, &lens)?;
    let grid = azimuth_grid(cfg.grid.start_deg, cfg.grid.stop_deg, cfg.grid.step_deg)?;
    let measured = match &cfg.lenslet.element_pattern_csv {
        Some(path) => Some(
            load_measured_pattern(path)
                .map_err(|e| CliError::Config(format!("[lenslet] element_pattern_csv {path:?}: {e}")))?,
        ),
        None => None,
    };

    let mut out = LensletOutcome {
        directivity_dbi: lens_directivity_dbi(&lens, lambda)?,
        elements: Vec::new(),
        composites: Vec::new(),
        feeds: Vec::new(),
    };
    for &off in layout.feed_offsets() {
        let beam = feed_to_beam_angle(off, &lens)?;
        let element = match &measured {
            Some(p) => p.clone(),
            None => lens_beampattern(&lens, &layout, off, lambda, &grid)?,
        };
        let composite = lenslet_pattern(&element, &array, beam, lambda, &grid)?;
        let (ie, pe) = element.peak();
        let (ic, pc) = composite.peak();
        out.feeds.push(FeedSummary {
            feed_offset_m: off,
            beam_az_deg: beam.azimuth().to_degrees(),
            element_peak_az_deg: element.angles()[ie].azimuth().to_degrees(),
            element_peak_dbi: pe,
            element_3db_width_deg: element.beamwidth_deg(3.0),
            composite_peak_az_deg: composite.angles()[ic].azimuth().to_degrees(),
            composite_peak_dbi: pc,
            composite_3db_width_deg: composite.beamwidth_deg(3.0),
            composite_lobes_deg: lobe_peaks_deg(&composite, 15.0),
        });
        out.elements.push(element);
        out.composites.push(composite);
    }
    Ok(out)
}

/// Everything a receiver sees in one link-60 capture.
pub struct LinkCapture {
    pub plan: SubchannelPlan,
    pub specs: Vec<TxStreamSpec>,
    pub bank: BeamBank,
    pub channel: ChannelMatrix,
    pub received: CMatrix,
    pub noise_variance: f64,
    pub external_lo_hz: f64,
}

pub fn link_capture(cfg: &LinkScenario, seed: u64) -> Result<LinkCapture, CliError> {
    let l = &cfg.link;
    let lambda = wavelength(l.rf_hz);
    let tx = make_ula(l.tx_elements, l.spacing_wavelengths * lambda, lambda)?;
    let rx = make_ula(l.rx_elements, l.spacing_wavelengths * lambda, lambda)?;
    let plan = SubchannelPlan::new(cfg.plan.offsets_hz.clone(), cfg.plan.symbol_rate_hz, cfg.plan.sample_rate_hz)?;

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, TAG_BITS));
    let specs: Vec<TxStreamSpec> = l
        .tx_directions_deg
        .iter()
        .enumerate()
        .map(|(s, &d)| TxStreamSpec {
            direction: Angle::azimuth_deg(d),
            subchannel_index: s,
            bits: (0..l.payload_bits).map(|_| rng.random()).collect(),
            preamble: zadoff_chu_preamble(2 * s as u32 + 1, PREAMBLE_SYMBOLS),
        })
        .collect();
    let x = transmit_scene(&specs, &tx, &plan)?;

    let c = &cfg.channel;
    let paths = match c.model {
        ChannelModel::Los => SubpathSet::line_of_sight(Angle::azimuth_deg(c.aod_deg), Angle::azimuth_deg(c.aoa_deg)),
        ChannelModel::Cluster => draw_subpaths(
            &cluster_params(c.clusters, c.subpaths, c.angle_spread_deg, c.gain_power, derive_seed(seed, TAG_CHANNEL)),
            0.0,
        )?,
    };
    let channel = assemble_narrowband(&paths, &tx, &rx)?;
    let clean = apply_channel(&channel, &x, 0.0, 0)?;
    let noise_variance = match l.snr_db {
        Some(snr) => mean_power(clean.iter()) / 10f64.powf(snr / 10.0),
        None => 0.0,
    };
    let received = if noise_variance > 0.0 {
        &clean + &complex_noise(clean.nrows(), clean.ncols(), noise_variance, derive_seed(seed, TAG_NOISE))
    } else {
        clean
    };
    let bank = matched_beam_bank(&rx, &degrees(&l.rx_directions_deg))?;
    Ok(LinkCapture {
        plan,
        specs,
        bank,
        channel,
        received,
        noise_variance,
        external_lo_hz: multibeam_core::rf::lo_frequency_for_rf(l.rf_hz)?,
    })
}

pub fn link_60(cfg: &LinkScenario, seed: u64) -> Result<(LinkCapture, DecodeGridResult), CliError> {
    let cap = link_capture(cfg, seed)?;
    let grid = decode_grid(&cap.received, &cap.bank, &cap.plan, &cap.specs)?;
    Ok((cap, grid))
}

#[derive(Debug, Clone, Serialize)]
pub struct ChainReport {
    pub chain: usize,
    pub iq_gain_estimate: f64,
    pub iq_phase_deg_estimate: f64,
    pub irr_before_db: Option<f64>,
    pub irr_after_db: Option<f64>,
    pub correction_re: f64,
    pub correction_im: f64,
    pub residual_gain_db: f64,
    pub residual_phase_deg: f64,
    pub clipped_components: usize,
}

pub struct CalibrationOutcome {
    pub calibration: CalibrationResult,
    pub chains: Vec<ChainReport>,
}

fn tone_amplitude(row: &[Complex64], omega: f64) -> Complex64 {
    row.iter()
        .enumerate()
        .map(|(i, &v)| v * Complex64::from_polar(1.0, -omega * i as f64))
        .sum::<Complex64>()
        / row.len() as f64
}

/// Reference tone through impaired chains and the ADC, then I/Q correction
/// per chain followed by inter-chain gain/phase alignment.
pub fn calibrate(cfg: &CalibrateScenario, seed: u64) -> Result<CalibrationOutcome, CliError> {
    let c = &cfg.calibrate;
    let (k, t) = (c.chains, c.samples);
    let omega = 2.0 * std::f64::consts::PI * c.tone_hz / c.sample_rate_hz;
    let x = CMatrix::from_shape_fn((k, t), |(_, i)| Complex64::from_polar(c.tone_amplitude, omega * i as f64));
    let imps: Vec<_> = (0..k).map(|i| cfg.impairments.chain(i)).collect();
    let mut y = apply_chain_impairments(&x, &imps)?;
    if let Some(snr) = c.snr_db {
        let var = c.tone_amplitude * c.tone_amplitude / 10f64.powf(snr / 10.0);
        y += &complex_noise(k, t, var, derive_seed(seed, TAG_NOISE));
    }
    let adc = QuantSpec::new(c.adc_bits, c.full_scale)?;

    let bin_f = c.tone_hz / c.sample_rate_hz * t as f64;
    let bin = (bin_f.round() as i64).rem_euclid(t as i64) as usize;
    let aligned = (bin_f - bin_f.round()).abs() < 1e-9 && bin != 0 && 2 * bin != t;

    let mut corrected = CMatrix::zeros((k, t));
    let mut reports = Vec::with_capacity(k);
    for ch in 0..k {
        let (row, clipped) = quantize(&y.row(ch).to_vec(), &adc);
        let (g, phi) = estimate_iq_imbalance(&row)?;
        let fixed = IqImbalance::new(g, phi)?.correct(&row)?;
        let irr = |v: &[Complex64]| if aligned { image_rejection_db(v, bin).ok() } else { None };
        reports.push(ChainReport {
            chain: ch,
            iq_gain_estimate: g,
            iq_phase_deg_estimate: phi.to_degrees(),
            irr_before_db: irr(&row),
            irr_after_db: irr(&fixed),
            correction_re: 0.0,
            correction_im: 0.0,
            residual_gain_db: 0.0,
            residual_phase_deg: 0.0,
            clipped_components: clipped,
        });
        corrected.row_mut(ch).assign(&ndarray::ArrayView1::from(&fixed));
    }
    let cal = estimate_chain_mismatch(&corrected, c.tone_hz, c.sample_rate_hz)?;
    let aligned_streams = compensate(&corrected, &cal)?;
    let ref_amp = tone_amplitude(&aligned_streams.row(0).to_vec(), omega);
    for (ch, rep) in reports.iter_mut().enumerate() {
        let ratio = tone_amplitude(&aligned_streams.row(ch).to_vec(), omega) / ref_amp;
        rep.correction_re = cal.corrections()[ch].re;
        rep.correction_im = cal.corrections()[ch].im;
        rep.residual_gain_db = multibeam_core::array::magnitude_db(ratio.norm());
        rep.residual_phase_deg = ratio.arg().to_degrees();
    }
    Ok(CalibrationOutcome {
        calibration: cal,
        chains: reports,
    })
}

pub fn sync_budget(cfg: &SyncCfg) -> Result<SyncBudget, CliError> {
    let mode: SyncMode = cfg.mode();
    Ok(sync_trial_count(cfg.n, mode)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct ChannelStats {
    pub draws: u64,
    pub tx_elements: usize,
    pub rx_elements: usize,
    pub clusters: usize,
    pub subpaths: usize,
    pub gain_power: f64,
    /// Mean of ‖H‖_F² / (N·M).
    pub mean_normalized_power: f64,
    pub std_normalized_power: f64,
    pub standard_error: f64,
}

pub struct ChannelStatsOutcome {
    pub stats: ChannelStats,
    pub first_paths: SubpathSet,
    pub first_channel: ChannelMatrix,
}

/// Draw `i` uses seed `seed + i`.
pub fn channel_stats(cfg: &ChannelStatsCfg, seed: u64) -> Result<ChannelStatsOutcome, CliError> {
    let tx = make_ula(cfg.tx_elements, cfg.spacing_wavelengths, 1.0)?;
    let rx = make_ula(cfg.rx_elements, cfg.spacing_wavelengths, 1.0)?;
    let nm = (cfg.tx_elements * cfg.rx_elements) as f64;
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    let mut first = None;
    for i in 0..cfg.draws {
        let p = cluster_params(cfg.clusters, cfg.subpaths, cfg.angle_spread_deg, cfg.gain_power, seed.wrapping_add(i));
        let paths = draw_subpaths(&p, 0.0)?;
        let h = assemble_narrowband(&paths, &tx, &rx)?;
        let v = h.frobenius_sq() / nm;
        sum += v;
        sum_sq += v * v;
        if first.is_none() {
            first = Some((paths, h));
        }
    }
    let n = cfg.draws as f64;
    let mean = sum / n;
    let var = if cfg.draws > 1 { (sum_sq - n * mean * mean).max(0.0) / (n - 1.0) } else { 0.0 };
    let (first_paths, first_channel) = first.expect("draws >= 1");
    Ok(ChannelStatsOutcome {
        stats: ChannelStats {
            draws: cfg.draws,
            tx_elements: cfg.tx_elements,
            rx_elements: cfg.rx_elements,
            clusters: cfg.clusters,
            subpaths: cfg.subpaths,
            gain_power: cfg.gain_power,
            mean_normalized_power: mean,
            std_normalized_power: var.sqrt(),
            standard_error: (var / n).sqrt(),
        },
        first_paths,
        first_channel,
    })
}

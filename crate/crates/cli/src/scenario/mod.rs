//! Scenario files: INI sections mirroring the library types, validated at
//! parse time.

mod ini;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;
use sha2::{Digest, Sha256};

use multibeam_core::array::azimuth_grid;
use multibeam_core::channel::ClusterParams;
use multibeam_core::lens::{FeedLayout, LensSpec, LensletArraySpec};
use multibeam_core::modem::{SubchannelPlan, SyncMode};
use multibeam_core::rf::{ChainImpairment, QuantSpec};

use crate::error::CliError;
use ini::{Entry, Section};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Beampattern28,
    Lenslet28,
    Link60,
    Calibrate,
    SyncBudget,
    ChannelStats,
}

impl Preset {
    pub const ALL: [Preset; 6] = [
        Preset::Beampattern28,
        Preset::Lenslet28,
        Preset::Link60,
        Preset::Calibrate,
        Preset::SyncBudget,
        Preset::ChannelStats,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Beampattern28 => "beampattern-28",
            Self::Lenslet28 => "lenslet-28",
            Self::Link60 => "link-60",
            Self::Calibrate => "calibrate",
            Self::SyncBudget => "sync-budget",
            Self::ChannelStats => "channel-stats",
        }
    }

    fn sections(&self) -> &'static [&'static str] {
        match self {
            Self::Beampattern28 => &["array", "beams", "sweep"],
            Self::Lenslet28 => &["lens", "feeds", "lenslet", "grid"],
            Self::Link60 => &["link", "plan", "channel"],
            Self::Calibrate => &["calibrate", "impairments"],
            Self::SyncBudget => &["sync"],
            Self::ChannelStats => &["channel"],
        }
    }
}

impl Serialize for Preset {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Preset::ALL.iter().map(|p| p.name()).collect();
                format!("unknown preset {s:?} (expected one of {})", names.join(", "))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArrayCfg {
    pub elements: usize,
    pub spacing_wavelengths: f64,
    pub frequency_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BeamsCfg {
    pub directions_deg: Vec<f64>,
    /// 0 = unconstrained phases.
    pub phase_bits: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCfg {
    pub start_deg: f64,
    pub stop_deg: f64,
    pub step_deg: f64,
    pub samples: usize,
    /// Per-element SNR of the swept source; `None` is noiseless.
    pub snr_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BeampatternCfg {
    pub array: ArrayCfg,
    pub beams: BeamsCfg,
    pub sweep: SweepCfg,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LensCfg {
    pub radius_m: f64,
    pub base_length_m: f64,
    pub focal_length_m: f64,
    pub loss_db: f64,
    pub frequency_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeedsCfg {
    pub count: usize,
    pub pitch_m: f64,
    pub subarray_elements: usize,
    pub element_spacing_wavelengths: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LensletCfg {
    pub num_lenses: usize,
    pub pitch_m: f64,
    /// Measured element pattern used instead of the modeled lens.
    pub element_pattern_csv: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridCfg {
    pub start_deg: f64,
    pub stop_deg: f64,
    pub step_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LensletScenario {
    pub lens: LensCfg,
    pub feeds: FeedsCfg,
    pub lenslet: LensletCfg,
    pub grid: GridCfg,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkCfg {
    pub rf_hz: f64,
    pub tx_elements: usize,
    pub rx_elements: usize,
    pub spacing_wavelengths: f64,
    pub tx_directions_deg: Vec<f64>,
    pub rx_directions_deg: Vec<f64>,
    pub payload_bits: usize,
    /// Mean per-element received signal power over noise variance.
    pub snr_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanCfg {
    pub sample_rate_hz: f64,
    pub symbol_rate_hz: f64,
    pub offsets_hz: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelModel {
    Los,
    Cluster,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkChannelCfg {
    pub model: ChannelModel,
    pub aod_deg: f64,
    pub aoa_deg: f64,
    pub clusters: usize,
    pub subpaths: usize,
    pub angle_spread_deg: f64,
    pub gain_power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkScenario {
    pub link: LinkCfg,
    pub plan: PlanCfg,
    pub channel: LinkChannelCfg,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrateCfg {
    pub chains: usize,
    pub sample_rate_hz: f64,
    pub tone_hz: f64,
    pub tone_amplitude: f64,
    pub samples: usize,
    pub snr_db: Option<f64>,
    pub adc_bits: u32,
    pub full_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImpairmentsCfg {
    pub gain_db: Vec<f64>,
    pub phase_deg: Vec<f64>,
    pub iq_gain: Vec<f64>,
    pub iq_phase_deg: Vec<f64>,
    pub dc_re: Vec<f64>,
    pub dc_im: Vec<f64>,
}

impl ImpairmentsCfg {
    pub fn chain(&self, k: usize) -> ChainImpairment {
        ChainImpairment {
            gain_db: self.gain_db[k],
            phase_deg: self.phase_deg[k],
            iq_gain: self.iq_gain[k],
            iq_phase_deg: self.iq_phase_deg[k],
            dc_offset: num_complex::Complex64::new(self.dc_re[k], self.dc_im[k]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrateScenario {
    pub calibrate: CalibrateCfg,
    pub impairments: ImpairmentsCfg,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SyncCfg {
    pub n: u64,
    pub mode: String,
}

impl SyncCfg {
    pub fn mode(&self) -> SyncMode {
        self.mode.parse().expect("validated at parse time")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelStatsCfg {
    pub tx_elements: usize,
    pub rx_elements: usize,
    pub spacing_wavelengths: f64,
    pub clusters: usize,
    pub subpaths: usize,
    pub angle_spread_deg: f64,
    pub gain_power: f64,
    pub draws: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Settings {
    Beampattern(BeampatternCfg),
    Lenslet(LensletScenario),
    Link(LinkScenario),
    Calibrate(CalibrateScenario),
    Sync(SyncCfg),
    ChannelStats(ChannelStatsCfg),
}

/// A validated scenario. `output_dir` is not part of its identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub preset: Preset,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub settings: Settings,
}

#[derive(Serialize)]
struct Canonical<'a> {
    preset: Preset,
    seed: u64,
    settings: &'a Settings,
}

impl Scenario {
    /// Canonical JSON of every semantic value, defaults filled in.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(&Canonical {
            preset: self.preset,
            seed: self.seed,
            settings: &self.settings,
        })
        .expect("scenario serializes")
    }

    /// SHA-256 of [`Scenario::canonical_json`], hex.
    pub fn config_hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub preset: Option<Preset>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
}

pub const DEFAULT_OUTPUT_DIR: &str = "out";

pub fn parse_scenario(text: &str) -> Result<Scenario, CliError> {
    parse_scenario_with(text, &Overrides::default())
}

pub fn parse_scenario_with(text: &str, overrides: &Overrides) -> Result<Scenario, CliError> {
    let sections = ini::parse(text)?;
    let find = |name: &str| sections.iter().find(|s| s.name == name);

    let mut head = Reader::new(find("scenario"), "scenario");
    let preset: Option<Preset> = head.parse_opt("preset")?;
    let seed: Option<u64> = head.parse_opt("seed")?;
    let output_dir: Option<String> = head.parse_opt("output_dir")?;
    head.finish()?;

    let preset = overrides
        .preset
        .or(preset)
        .ok_or_else(|| CliError::Config("no preset given ([scenario] preset or --preset)".into()))?;
    let seed = overrides
        .seed
        .or(seed)
        .ok_or_else(|| CliError::Config("no seed given ([scenario] seed or --seed)".into()))?;
    let output_dir = overrides
        .output_dir
        .clone()
        .or(output_dir.map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR));

    for s in &sections {
        if s.name != "scenario" && !preset.sections().contains(&s.name.as_str()) {
            return Err(CliError::config(
                s.line,
                format!("section [{}] is not used by preset {preset}", s.name),
            ));
        }
    }

    let settings = match preset {
        Preset::Beampattern28 => Settings::Beampattern(beampattern(&find)?),
        Preset::Lenslet28 => Settings::Lenslet(lenslet(&find)?),
        Preset::Link60 => Settings::Link(link(&find)?),
        Preset::Calibrate => Settings::Calibrate(calibrate(&find)?),
        Preset::SyncBudget => Settings::Sync(sync(&find)?),
        Preset::ChannelStats => Settings::ChannelStats(channel_stats(&find)?),
    };
    Ok(Scenario {
        preset,
        seed,
        output_dir,
        settings,
    })
}

/// Typed access to one section; unread keys are reported by `finish`.
struct Reader<'a> {
    name: &'static str,
    section: Option<&'a Section>,
    used: Vec<bool>,
}

impl<'a> Reader<'a> {
    fn new(section: Option<&'a Section>, name: &'static str) -> Self {
        let n = section.map_or(0, |s| s.entries.len());
        Self {
            name,
            section,
            used: vec![false; n],
        }
    }

    fn line(&self) -> usize {
        self.section.map_or(0, |s| s.line)
    }

    fn entry(&mut self, key: &str) -> Option<&'a Entry> {
        let s = self.section?;
        let i = s.entries.iter().position(|e| e.key == key)?;
        self.used[i] = true;
        Some(&s.entries[i])
    }

    fn err(&self, e: &Entry, msg: impl fmt::Display) -> CliError {
        CliError::config(e.line, format!("[{}] {}: {msg}", self.name, e.key))
    }

    fn parse_opt<T: FromStr>(&mut self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: fmt::Display,
    {
        match self.entry(key) {
            None => Ok(None),
            Some(e) => e.value.parse().map(Some).map_err(|err| self.err(e, err)),
        }
    }

    fn get<T: FromStr>(&mut self, key: &str, default: T) -> Result<T, CliError>
    where
        T::Err: fmt::Display,
    {
        Ok(self.parse_opt(key)?.unwrap_or(default))
    }

    fn real(&mut self, key: &str, default: f64) -> Result<f64, CliError> {
        match self.entry(key) {
            None => Ok(default),
            Some(e) => parse_real(&e.value).map_err(|m| self.err(e, m)),
        }
    }

    fn positive(&mut self, key: &str, default: f64) -> Result<f64, CliError> {
        let v = self.real(key, default)?;
        self.check(key, v > 0.0, "must be > 0")?;
        Ok(v)
    }

    /// `none`/`inf` mean noiseless.
    fn snr(&mut self, key: &str, default: Option<f64>) -> Result<Option<f64>, CliError> {
        match self.entry(key) {
            None => Ok(default),
            Some(e) if matches!(e.value.as_str(), "none" | "inf") => Ok(None),
            Some(e) => parse_real(&e.value).map(Some).map_err(|m| self.err(e, m)),
        }
    }

    fn list(&mut self, key: &str, default: Vec<f64>) -> Result<Vec<f64>, CliError> {
        match self.entry(key) {
            None => Ok(default),
            Some(e) => e
                .value
                .split(',')
                .map(|t| parse_real(t.trim()))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|m| self.err(e, m)),
        }
    }

    fn check(&self, key: &str, ok: bool, msg: impl fmt::Display) -> Result<(), CliError> {
        if ok {
            return Ok(());
        }
        let line = self
            .section
            .and_then(|s| s.entries.iter().find(|e| e.key == key))
            .map_or(self.line(), |e| e.line);
        Err(CliError::config(line, format!("[{}] {key}: {msg}", self.name)))
    }

    /// Wraps a library invariant failure with this section's location.
    fn invariant<T>(&self, r: multibeam_core::Result<T>) -> Result<T, CliError> {
        r.map_err(|e| CliError::config(self.line(), format!("[{}] {e}", self.name)))
    }

    fn finish(self) -> Result<(), CliError> {
        if let Some(s) = self.section {
            if let Some((e, _)) = s.entries.iter().zip(&self.used).find(|(_, u)| !**u) {
                return Err(CliError::config(
                    e.line,
                    format!("unknown key `{}` in [{}]", e.key, self.name),
                ));
            }
        }
        Ok(())
    }
}

fn parse_real(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("expected a number, got {s:?}"))?;
    if !v.is_finite() {
        return Err(format!("expected a finite number, got {s:?}"));
    }
    Ok(v)
}

type Find<'a> = dyn Fn(&str) -> Option<&'a Section> + 'a;

fn wavelength(freq: f64) -> f64 {
    multibeam_core::SPEED_OF_LIGHT / freq
}

fn check_grid<'a>(r: &Reader<'a>, start: f64, stop: f64, step: f64) -> Result<(), CliError> {
    r.invariant(azimuth_grid(start, stop, step)).map(|_| ())
}

fn check_directions(r: &Reader, key: &str, dirs: &[f64]) -> Result<(), CliError> {
    r.check(key, !dirs.is_empty(), "needs at least one direction")?;
    r.check(
        key,
        dirs.iter().all(|d| (-90.0..=90.0).contains(d)),
        "directions must lie in [-90, 90] degrees",
    )
}

fn beampattern<'a>(find: &Find<'a>) -> Result<BeampatternCfg, CliError> {
    let mut r = Reader::new(find("array"), "array");
    let array = ArrayCfg {
        elements: r.get("elements", 4)?,
        spacing_wavelengths: r.positive("spacing_wavelengths", 0.5)?,
        frequency_hz: r.positive("frequency_hz", 28e9)?,
    };
    r.check("elements", array.elements >= 1, "must be >= 1")?;
    r.finish()?;

    let mut r = Reader::new(find("beams"), "beams");
    let beams = BeamsCfg {
        directions_deg: r.list("directions_deg", vec![-45.0, -15.0, 15.0, 45.0])?,
        phase_bits: r.get("phase_bits", 0)?,
    };
    check_directions(&r, "directions_deg", &beams.directions_deg)?;
    r.check("phase_bits", beams.phase_bits <= 16, "must be <= 16")?;
    r.finish()?;

    let mut r = Reader::new(find("sweep"), "sweep");
    let sweep = SweepCfg {
        start_deg: r.real("start_deg", -90.0)?,
        stop_deg: r.real("stop_deg", 90.0)?,
        step_deg: r.positive("step_deg", 0.1)?,
        samples: r.get("samples", 64)?,
        snr_db: r.snr("snr_db", Some(40.0))?,
    };
    check_grid(&r, sweep.start_deg, sweep.stop_deg, sweep.step_deg)?;
    r.check("samples", sweep.samples >= 1, "must be >= 1")?;
    r.finish()?;
    Ok(BeampatternCfg { array, beams, sweep })
}

fn lenslet<'a>(find: &Find<'a>) -> Result<LensletScenario, CliError> {
    let d = LensSpec::default();
    let mut r = Reader::new(find("lens"), "lens");
    let lens = LensCfg {
        radius_m: r.real("radius_m", d.radius)?,
        base_length_m: r.real("base_length_m", d.base_length)?,
        focal_length_m: r.real("focal_length_m", d.focal_length)?,
        loss_db: r.real("loss_db", d.loss_db)?,
        frequency_hz: r.positive("frequency_hz", 28e9)?,
    };
    let spec = r.invariant(LensSpec::new(
        lens.radius_m,
        lens.base_length_m,
        lens.focal_length_m,
        lens.loss_db,
    ))?;
    r.finish()?;
    let lambda = wavelength(lens.frequency_hz);

    let mut r = Reader::new(find("feeds"), "feeds");
    let feeds = FeedsCfg {
        count: r.get("count", 4)?,
        pitch_m: r.positive("pitch_m", 0.008)?,
        subarray_elements: r.get("subarray_elements", 8)?,
        element_spacing_wavelengths: r.positive("element_spacing_wavelengths", 0.5)?,
    };
    r.check("count", feeds.count >= 1, "must be >= 1")?;
    let layout = r.invariant(feed_layout(&feeds, lambda))?;
    for off in layout.feed_offsets() {
        r.invariant(multibeam_core::lens::feed_to_beam_angle(*off, &spec))?;
    }
    r.finish()?;

    let mut r = Reader::new(find("lenslet"), "lenslet");
    let lenslet = LensletCfg {
        num_lenses: r.get("num_lenses", 4)?,
        pitch_m: r.real("pitch_m", 0.10)?,
        element_pattern_csv: r.parse_opt("element_pattern_csv")?,
    };
    r.invariant(LensletArraySpec::new(lenslet.num_lenses, lenslet.pitch_m, &spec))?;
    r.finish()?;

    let mut r = Reader::new(find("grid"), "grid");
    let grid = GridCfg {
        start_deg: r.real("start_deg", -90.0)?,
        stop_deg: r.real("stop_deg", 90.0)?,
        step_deg: r.positive("step_deg", 0.01)?,
    };
    check_grid(&r, grid.start_deg, grid.stop_deg, grid.step_deg)?;
    r.finish()?;
    Ok(LensletScenario {
        lens,
        feeds,
        lenslet,
        grid,
    })
}

/// Feeds centered on the axis along x at `pitch_m`.
pub fn feed_layout(cfg: &FeedsCfg, wavelength: f64) -> multibeam_core::Result<FeedLayout> {
    let c = (cfg.count as f64 - 1.0) / 2.0;
    let offsets = (0..cfg.count).map(|k| [(k as f64 - c) * cfg.pitch_m, 0.0]).collect();
    FeedLayout::new(offsets, cfg.subarray_elements, cfg.element_spacing_wavelengths * wavelength)
}

fn link<'a>(find: &Find<'a>) -> Result<LinkScenario, CliError> {
    let mut r = Reader::new(find("plan"), "plan");
    let d = SubchannelPlan::default();
    let plan = PlanCfg {
        sample_rate_hz: r.positive("sample_rate_hz", d.sample_rate())?,
        symbol_rate_hz: r.positive("symbol_rate_hz", d.symbol_rate())?,
        offsets_hz: r.list("offsets_hz", d.offsets_hz().to_vec())?,
    };
    r.invariant(SubchannelPlan::new(
        plan.offsets_hz.clone(),
        plan.symbol_rate_hz,
        plan.sample_rate_hz,
    ))?;
    r.finish()?;

    let dirs = vec![-45.0, -15.0, 15.0, 45.0];
    let mut r = Reader::new(find("link"), "link");
    let link = LinkCfg {
        rf_hz: r.positive("rf_hz", 60e9)?,
        tx_elements: r.get("tx_elements", 4)?,
        rx_elements: r.get("rx_elements", 4)?,
        spacing_wavelengths: r.positive("spacing_wavelengths", 0.5)?,
        tx_directions_deg: r.list("tx_directions_deg", dirs.clone())?,
        rx_directions_deg: r.list("rx_directions_deg", dirs)?,
        payload_bits: r.get("payload_bits", 10_000)?,
        snr_db: r.snr("snr_db", Some(20.0))?,
    };
    r.check("tx_elements", link.tx_elements >= 1, "must be >= 1")?;
    r.check("rx_elements", link.rx_elements >= 1, "must be >= 1")?;
    check_directions(&r, "tx_directions_deg", &link.tx_directions_deg)?;
    check_directions(&r, "rx_directions_deg", &link.rx_directions_deg)?;
    r.check(
        "tx_directions_deg",
        link.tx_directions_deg.len() <= plan.offsets_hz.len(),
        format!("{} streams but only {} subchannels", link.tx_directions_deg.len(), plan.offsets_hz.len()),
    )?;
    r.check(
        "payload_bits",
        link.payload_bits >= 2 && link.payload_bits.is_multiple_of(2),
        "must be even and >= 2",
    )?;
    r.finish()?;

    let mut r = Reader::new(find("channel"), "channel");
    let channel = LinkChannelCfg {
        model: match r.get("model", "los".to_string())?.as_str() {
            "los" => ChannelModel::Los,
            "cluster" => ChannelModel::Cluster,
            other => {
                return Err(CliError::config(
                    r.line(),
                    format!("[channel] model: expected los or cluster, got {other:?}"),
                ))
            }
        },
        aod_deg: r.real("aod_deg", 0.0)?,
        aoa_deg: r.real("aoa_deg", 0.0)?,
        clusters: r.get("clusters", 2)?,
        subpaths: r.get("subpaths", 3)?,
        angle_spread_deg: r.real("angle_spread_deg", 5.0)?,
        gain_power: r.real("gain_power", 1.0)?,
    };
    r.invariant(cluster_params(channel.clusters, channel.subpaths, channel.angle_spread_deg, channel.gain_power, 0).validate())?;
    r.check("aod_deg", (-90.0..=90.0).contains(&channel.aod_deg), "must lie in [-90, 90]")?;
    r.check("aoa_deg", (-90.0..=90.0).contains(&channel.aoa_deg), "must lie in [-90, 90]")?;
    r.finish()?;
    Ok(LinkScenario { link, plan, channel })
}

pub fn cluster_params(clusters: usize, subpaths: usize, spread_deg: f64, gain_power: f64, seed: u64) -> ClusterParams {
    ClusterParams {
        num_clusters: clusters,
        subpaths_per_cluster: subpaths,
        angle_spread: spread_deg.to_radians(),
        gain_power,
        seed,
    }
}

fn calibrate<'a>(find: &Find<'a>) -> Result<CalibrateScenario, CliError> {
    let mut r = Reader::new(find("calibrate"), "calibrate");
    let cal = CalibrateCfg {
        chains: r.get("chains", 4)?,
        sample_rate_hz: r.positive("sample_rate_hz", 1966.08e6)?,
        tone_hz: r.real("tone_hz", 30.72e6)?,
        tone_amplitude: r.positive("tone_amplitude", 0.5)?,
        samples: r.get("samples", 4096)?,
        snr_db: r.snr("snr_db", Some(40.0))?,
        adc_bits: r.get("adc_bits", 12)?,
        full_scale: r.positive("full_scale", 1.0)?,
    };
    r.check("chains", cal.chains >= 1, "must be >= 1")?;
    r.check("samples", cal.samples >= 64, "must be >= 64")?;
    r.check(
        "tone_hz",
        cal.tone_hz != 0.0 && cal.tone_hz.abs() < cal.sample_rate_hz / 2.0,
        "must be non-zero and below half the sample rate",
    )?;
    r.invariant(QuantSpec::new(cal.adc_bits, cal.full_scale))?;
    r.finish()?;

    let n = cal.chains;
    let pick = |four: [f64; 4], ideal: f64| if n == 4 { four.to_vec() } else { vec![ideal; n] };
    let mut r = Reader::new(find("impairments"), "impairments");
    let imp = ImpairmentsCfg {
        gain_db: r.list("gain_db", pick([0.0, 1.5, -2.0, 0.8], 0.0))?,
        phase_deg: r.list("phase_deg", pick([0.0, 35.0, -60.0, 120.0], 0.0))?,
        iq_gain: r.list("iq_gain", pick([1.0, 1.1, 0.95, 1.05], 1.0))?,
        iq_phase_deg: r.list("iq_phase_deg", pick([0.0, 5.0, -3.0, 2.0], 0.0))?,
        dc_re: r.list("dc_re", vec![0.0; n])?,
        dc_im: r.list("dc_im", vec![0.0; n])?,
    };
    for (key, v) in [
        ("gain_db", &imp.gain_db),
        ("phase_deg", &imp.phase_deg),
        ("iq_gain", &imp.iq_gain),
        ("iq_phase_deg", &imp.iq_phase_deg),
        ("dc_re", &imp.dc_re),
        ("dc_im", &imp.dc_im),
    ] {
        r.check(key, v.len() == n, format!("needs {n} values (one per chain), got {}", v.len()))?;
    }
    for k in 0..n {
        r.invariant(imp.chain(k).validate())?;
    }
    r.finish()?;
    Ok(CalibrateScenario {
        calibrate: cal,
        impairments: imp,
    })
}

fn sync<'a>(find: &Find<'a>) -> Result<SyncCfg, CliError> {
    let section = find("sync").ok_or_else(|| CliError::Config("preset sync-budget needs a [sync] section".into()))?;
    let mut r = Reader::new(Some(section), "sync");
    let n: Option<u64> = r.parse_opt("n")?;
    let mode: Option<String> = r.parse_opt("mode")?;
    let n = n.ok_or_else(|| CliError::config(section.line, "[sync] missing key `n`"))?;
    let mode = mode.ok_or_else(|| CliError::config(section.line, "[sync] missing key `mode`"))?;
    r.check("n", n >= 1, "must be >= 1")?;
    r.invariant(mode.parse::<SyncMode>())?;
    r.finish()?;
    Ok(SyncCfg { n, mode })
}

fn channel_stats<'a>(find: &Find<'a>) -> Result<ChannelStatsCfg, CliError> {
    let mut r = Reader::new(find("channel"), "channel");
    let cfg = ChannelStatsCfg {
        tx_elements: r.get("tx_elements", 4)?,
        rx_elements: r.get("rx_elements", 4)?,
        spacing_wavelengths: r.positive("spacing_wavelengths", 0.5)?,
        clusters: r.get("clusters", 2)?,
        subpaths: r.get("subpaths", 3)?,
        angle_spread_deg: r.real("angle_spread_deg", 5.0)?,
        gain_power: r.real("gain_power", 1.0)?,
        draws: r.get("draws", 10_000)?,
    };
    r.check("tx_elements", cfg.tx_elements >= 1, "must be >= 1")?;
    r.check("rx_elements", cfg.rx_elements >= 1, "must be >= 1")?;
    r.check("draws", cfg.draws >= 1, "must be >= 1")?;
    r.invariant(cluster_params(cfg.clusters, cfg.subpaths, cfg.angle_spread_deg, cfg.gain_power, 0).validate())?;
    r.finish()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn msg(text: &str) -> String {
        parse_scenario(text).unwrap_err().to_string()
    }

    #[test]
    fn minimal_sync_budget() {
        let s = parse_scenario("[scenario]\npreset = sync-budget\nseed = 1\n[sync]\nn = 4\nmode = analog\n").unwrap();
        assert_eq!(s.preset, Preset::SyncBudget);
        assert_eq!(
            s.settings,
            Settings::Sync(SyncCfg {
                n: 4,
                mode: "analog".into()
            })
        );
        assert_eq!(s.output_dir, PathBuf::from(DEFAULT_OUTPUT_DIR));
    }

    #[test]
    fn misspelled_key_is_named() {
        let m = msg("[scenario]\npreset = beampattern-28\nseed = 1\n[beams]\nfased_bits = 3\n");
        assert!(m.contains("fased_bits") && m.contains("line 5"), "{m}");
    }

    #[test]
    fn lenslet_pitch_below_diameter() {
        let m = msg("[scenario]\npreset = lenslet-28\nseed = 1\n[lenslet]\npitch_m = 0.08\n");
        assert!(m.contains("lenslet") && m.contains("diameter"), "{m}");
    }

    #[test]
    fn structural_errors() {
        assert!(msg("[scenario]\npreset = sync-budget\nseed = 1\n").contains("[sync]"));
        assert!(msg("[scenario]\npreset = link-60\n").contains("seed"));
        assert!(msg("[scenario]\npreset = link-61\nseed = 1\n").contains("unknown preset"));
        assert!(msg("[scenario]\npreset = link-60\nseed = 1\n[lens]\nradius_m = 1\n").contains("not used"));
        assert!(msg("[scenario]\npreset = link-60\nseed = 1\n[plan]\noffsets_hz = 0, 1e6\n").contains("closer"));
        assert!(msg("[scenario]\npreset = calibrate\nseed = 1\n[impairments]\ngain_db = 1, 2\n").contains("one per chain"));
        assert!(msg("[scenario]\npreset = sync-budget\nseed = 1\n[sync]\nn = 4\nmode = hybrid\n").contains("analog or digital"));
        assert!(msg("[scenario]\npreset = channel-stats\nseed = x\n").contains("seed"));
    }

    #[test]
    fn overrides_win() {
        let o = Overrides {
            preset: Some(Preset::ChannelStats),
            seed: Some(9),
            output_dir: Some(PathBuf::from("elsewhere")),
        };
        let s = parse_scenario_with("", &o).unwrap();
        assert_eq!((s.preset, s.seed), (Preset::ChannelStats, 9));
        assert_eq!(s.output_dir, PathBuf::from("elsewhere"));
    }

    #[test]
    fn hash_tracks_semantic_values_only() {
        let base = "[scenario]\npreset = channel-stats\nseed = 3\n";
        let h = |t: &str| parse_scenario(t).unwrap().config_hash();
        let h0 = h(base);
        assert_eq!(h0, h(&format!("{base}output_dir = other\n")));
        assert_eq!(h0, h(&format!("{base}[channel]\ndraws = 10000\n")));
        assert_eq!(h0, h(&format!("# comment\n{base}")));
        assert_ne!(h0, h(&format!("{base}[channel]\ndraws = 10001\n")));
        assert_ne!(h0, h("[scenario]\npreset = channel-stats\nseed = 4\n"));
        assert_eq!(h0.len(), 64);
    }

    #[test]
    fn every_preset_has_defaults_except_sync() {
        for p in Preset::ALL {
            let o = Overrides {
                preset: Some(p),
                seed: Some(0),
                output_dir: None,
            };
            assert_eq!(parse_scenario_with("", &o).is_ok(), p != Preset::SyncBudget, "{p}");
        }
    }
}

//! Runs a scenario and writes its artifacts plus `manifest.json`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::json;

use multibeam_core::array::Beampattern;

use crate::error::CliError;
use crate::presets;
use crate::scenario::{Preset, Scenario, Settings};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub preset: Preset,
    pub seed: u64,
    pub config_hash: String,
    pub artifacts: Vec<String>,
    pub wall_time_s: f64,
}

struct Artifacts {
    dir: PathBuf,
    names: Vec<String>,
}

impl Artifacts {
    fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Output(format!("cannot create output directory {}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            names: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::Output(format!("cannot write {}: {e}", path.display())))?;
        self.names.push(name.to_string());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Numerical(e.to_string()))?;
        s.push('\n');
        self.write(name, s.as_bytes())
    }

    fn text(&mut self, name: &str, s: String) -> Result<(), CliError> {
        let mut s = s;
        if !s.ends_with('\n') {
            s.push('\n');
        }
        self.write(name, s.as_bytes())
    }

    fn pattern(&mut self, name: &str, p: &Beampattern) -> Result<(), CliError> {
        let mut buf = Vec::new();
        p.write_csv(&mut buf)?;
        self.write(name, &buf)
    }
}

/// Runs the scenario; the manifest is written last.
pub fn run(scenario: &Scenario) -> Result<Manifest, CliError> {
    let start = Instant::now();
    let mut out = Artifacts::create(&scenario.output_dir)?;
    let seed = scenario.seed;
    match &scenario.settings {
        Settings::Beampattern(cfg) => {
            let r = presets::beampattern_28(cfg, seed)?;
            out.text("bank.json", r.bank.to_json()?)?;
            let mut beams = Vec::new();
            for (b, p) in r.patterns.iter().enumerate() {
                out.pattern(&format!("beampattern_beam{b}.csv"), p)?;
                let (_, peak) = p.peak();
                beams.push(json!({
                    "beam": b,
                    "label_az_deg": r.bank.labels()[b].azimuth().to_degrees(),
                    "peak_az_deg": p.peak_angle().azimuth().to_degrees(),
                    "peak_gain_db": peak,
                    "beamwidth_3db_deg": p.beamwidth_deg(3.0),
                }));
            }
            out.json(
                "summary.json",
                &json!({ "elements": r.geometry.len(), "phase_bits": cfg.beams.phase_bits, "beams": beams }),
            )?;
        }
        Settings::Lenslet(cfg) => {
            let r = presets::lenslet_28(cfg)?;
            for (k, (e, c)) in r.elements.iter().zip(&r.composites).enumerate() {
                out.pattern(&format!("lens_feed{k}.csv"), e)?;
                out.pattern(&format!("lenslet_feed{k}.csv"), c)?;
            }
            out.json(
                "summary.json",
                &json!({ "lens_directivity_dbi": r.directivity_dbi, "feeds": r.feeds }),
            )?;
        }
        Settings::Link(cfg) => {
            let (cap, grid) = presets::link_60(cfg, seed)?;
            out.text("grid.json", grid.to_json()?)?;
            for b in 0..grid.beams() {
                for s in 0..grid.streams() {
                    let mut buf = Vec::new();
                    grid.write_constellation_csv(b, s, &mut buf)?;
                    out.write(&format!("constellation_rx{b}_tx{s}.csv"), &buf)?;
                }
            }
            let columns: Vec<_> = (0..grid.streams())
                .map(|s| {
                    let best = (0..grid.beams())
                        .min_by(|&a, &b| grid.cell(a, s).evm_percent.total_cmp(&grid.cell(b, s).evm_percent))
                        .unwrap_or(0);
                    let c = grid.cell(best, s);
                    json!({
                        "tx_stream": s,
                        "tx_az_deg": cap.specs[s].direction.azimuth().to_degrees(),
                        "subchannel_hz": c.subchannel_hz,
                        "best_rx_beam": best,
                        "best_rx_az_deg": cap.bank.labels()[best].azimuth().to_degrees(),
                        "evm_percent": c.evm_percent,
                        "ber": c.ber,
                    })
                })
                .collect();
            let n = grid.beams().max(grid.streams()) as u64;
            let analog = multibeam_core::modem::sync_trial_count(n, multibeam_core::modem::SyncMode::Analog)?;
            out.json(
                "link.json",
                &json!({
                    "rf_hz": cfg.link.rf_hz,
                    "external_lo_hz": cap.external_lo_hz,
                    "noise_variance": cap.noise_variance,
                    "locked_cells": grid.locked_count(),
                    "columns": columns,
                    "sync_trials": { "analog": analog.trials, "digital": 1 },
                }),
            )?;
        }
        Settings::Calibrate(cfg) => {
            let r = presets::calibrate(cfg, seed)?;
            out.text("calibration.json", r.calibration.to_json()?)?;
            out.json("calibration_report.json", &json!({ "chains": r.chains }))?;
        }
        Settings::Sync(cfg) => {
            let b = presets::sync_budget(cfg)?;
            out.json(
                "sync.json",
                &json!({ "mode": b.mode.to_string(), "n_directions": b.n_directions, "trials": b.trials }),
            )?;
        }
        Settings::ChannelStats(cfg) => {
            let r = presets::channel_stats(cfg, seed)?;
            out.json("channel_stats.json", &r.stats)?;
            let mut buf = Vec::new();
            r.first_channel.write_csv(&mut buf)?;
            out.write("channel_0.csv", &buf)?;
            out.text("subpaths_0.json", r.first_paths.to_json()?)?;
        }
    }

    let mut artifacts = out.names.clone();
    artifacts.sort();
    let manifest = Manifest {
        preset: scenario.preset,
        seed,
        config_hash: scenario.config_hash(),
        artifacts,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    out.json(MANIFEST, &manifest)?;
    Ok(manifest)
}

/// One-line human summary of a finished run.
pub fn describe(scenario: &Scenario, m: &Manifest) -> String {
    format!(
        "{}: {} artifacts in {} (config {}, {:.3} s)",
        scenario.preset,
        m.artifacts.len(),
        scenario.output_dir.display(),
        &m.config_hash[..12],
        m.wall_time_s
    )
}

//! Run configuration.
//!
//! The configuration file is sectioned `key = value` text in TOML syntax:
//!
//! ```toml
//! [source]
//! mode = "stimulated"
//! seed_rate = 1e8
//! stim_prob = 1e-2
//!
//! [detector2]
//! eta = 0.62
//! ```
//!
//! Every key has a default, so an empty file is a valid desk-scale run.
//! Command-line overrides use `section.key=value`; the value is read as a TOML
//! value and falls back to a bare string (`source.mode=spontaneous`).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::calibration::SpectralBand;
use crate::correlator::Window;
use crate::detector::{
    DetectorParams, GainKind, GainModel, NonlinearityReference, PulseKind, PulseShape, MIN_SAMPLES_PER_PULSE,
};
use crate::error::{config_err, positive, Result};
use crate::stream_gen::SourceConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSection {
    pub eta: f64,
    pub pulse: PulseKind,
    pub tau_p: f64,
    pub gain: GainKind,
    pub mean_charge: f64,
    pub nonlinearity_eps: f64,
    pub nonlinearity_reference: NonlinearityReference,
    pub background_rate: f64,
}

impl Default for DetectorSection {
    fn default() -> Self {
        Self {
            eta: 1.0,
            pulse: PulseKind::Rectangular,
            tau_p: 3e-9,
            gain: GainKind::UnitCharge,
            mean_charge: 1.0,
            nonlinearity_eps: 0.0,
            nonlinearity_reference: NonlinearityReference::PulsePeak,
            background_rate: 0.0,
        }
    }
}

impl DetectorSection {
    pub fn pulse_shape(&self) -> PulseShape {
        PulseShape { kind: self.pulse, tau_p: self.tau_p }
    }

    pub fn params(&self) -> DetectorParams {
        DetectorParams {
            eta: self.eta,
            pulse: self.pulse_shape(),
            gain: GainModel { kind: self.gain, mean_charge: self.mean_charge },
            nonlinearity_eps: self.nonlinearity_eps,
            nonlinearity_reference: self.nonlinearity_reference,
            background_rate: self.background_rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingSection {
    /// Sample spacing, s.
    pub dt: f64,
}

impl Default for SamplingSection {
    fn default() -> Self {
        Self { dt: 100e-12 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainCorrection {
    /// Moments measured from the pulse heights of the run.
    Measured,
    /// Moments of the configured gain laws.
    Nominal,
    /// Unit charges assumed; no correction.
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    /// Largest correlation lag, s.
    pub max_lag: f64,
    /// Welch segment length, samples.
    pub segment_len: usize,
    pub window: Window,
    /// Spectral estimation band, Hz.
    pub band_lo: f64,
    pub band_hi: f64,
    pub gain_correction: GainCorrection,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            max_lag: 15e-9,
            segment_len: 4096,
            window: Window::Hann,
            band_lo: 5e6,
            band_hi: 80e6,
            gain_correction: GainCorrection::Measured,
        }
    }
}

impl AnalysisSection {
    pub fn band(&self) -> SpectralBand {
        SpectralBand { lo: self.band_lo, hi: self.band_hi }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// Leading span of each trace written to `trace{1,2}.csv`, s.
    pub trace_window: f64,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), trace_window: 10e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BudgetSection {
    pub trials: usize,
    /// Relative systematic for effects outside the model (optical losses,
    /// alignment, background light, dark current).
    pub residual_systematic: f64,
}

impl Default for BudgetSection {
    fn default() -> Self {
        Self { trials: 30, residual_systematic: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub source: SourceConfig,
    pub detector1: DetectorSection,
    pub detector2: DetectorSection,
    pub sampling: SamplingSection,
    pub analysis: AnalysisSection,
    pub output: OutputSection,
    pub budget: BudgetSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            source: SourceConfig::default(),
            detector1: DetectorSection { eta: 0.9, ..DetectorSection::default() },
            detector2: DetectorSection { eta: 0.62, ..DetectorSection::default() },
            sampling: SamplingSection::default(),
            analysis: AnalysisSection::default(),
            output: OutputSection::default(),
            budget: BudgetSection::default(),
        }
    }
}

impl RunConfig {
    /// Parses configuration text and applies `section.key=value` overrides.
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| config_err(format!("config syntax: {}", e.message())))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        // a partial section keeps the run-level defaults of its other keys
        let mut merged: toml::Table = toml::Table::try_from(RunConfig::default()).expect("defaults serialize");
        merge(&mut merged, table);
        let config: RunConfig = toml::Value::Table(merged)
            .try_into()
            .map_err(|e: toml::de::Error| config_err(format!("config: {}", e.message())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p)
                .map_err(|e| config_err(format!("cannot read {}: {e}", p.display())))?,
            None => String::new(),
        };
        Self::parse(&text, overrides)
    }

    pub fn validate(&self) -> Result<()> {
        self.source.validate()?;
        let p1 = self.detector1.params();
        let p2 = self.detector2.params();
        p1.validate()?;
        p2.validate()?;
        if p1.pulse != p2.pulse {
            return Err(config_err("both detectors must share the same pulse shape and tau_p"));
        }
        positive("sampling.dt", self.sampling.dt)?;
        if self.sampling.dt > p1.pulse.tau_p / MIN_SAMPLES_PER_PULSE * (1.0 + 1e-12) {
            return Err(config_err(format!(
                "sampling.dt = {:e} s exceeds tau_p/{MIN_SAMPLES_PER_PULSE}",
                self.sampling.dt
            )));
        }
        positive("analysis.max_lag", self.analysis.max_lag)?;
        if self.analysis.segment_len < crate::correlator::MIN_SEGMENT_LEN {
            return Err(config_err("analysis.segment_len must be >= 16"));
        }
        let b = self.analysis.band();
        if !(b.lo >= 0.0 && b.hi > b.lo && b.hi.is_finite()) {
            return Err(config_err(format!("invalid analysis band [{}, {}]", b.lo, b.hi)));
        }
        positive("output.trace_window", self.output.trace_window)?;
        if !(self.budget.residual_systematic.is_finite() && self.budget.residual_systematic >= 0.0) {
            return Err(config_err("budget.residual_systematic must be >= 0"));
        }
        Ok(())
    }

    /// Configuration as TOML text; parsing it back yields the same config.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Applies one `section.key=value` override to a parsed table.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| config_err(format!("override '{assignment}' is not of the form section.key=value")))?;
    let path = path.trim();
    let raw = raw.trim();
    let (section, key) = path
        .split_once('.')
        .ok_or_else(|| config_err(format!("override key '{path}' is not of the form section.key")))?;
    if section.is_empty() || key.is_empty() || key.contains('.') {
        return Err(config_err(format!("override key '{path}' is not of the form section.key")));
    }
    let value = parse_value(raw);
    let entry = table
        .entry(section.to_string())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    match entry {
        toml::Value::Table(t) => {
            t.insert(key.to_string(), value);
            Ok(())
        }
        _ => Err(config_err(format!("'{section}' is not a section"))),
    }
}

fn merge(base: &mut toml::Table, top: toml::Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

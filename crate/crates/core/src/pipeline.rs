//! Simulate → detect → render → correlate → estimate, for one seed.
//!
//! Detection records are kept separate from the rendered traces so that the
//! same detections can be re-rendered under different analysis variants
//! (amplifier nonlinearity on or off, background on or off). Only two traces
//! are alive at any time.

use crate::calibration::{
    estimate_eta_spectral, estimate_eta_time_domain, CalibrationMode, EtaEstimate, GainStats,
};
use crate::config::{GainCorrection, RunConfig};
use crate::correlator::{
    autocorrelation, cross_power_spectrum, crosscorrelation, noise_power_spectrum, CorrelationEstimate,
    SpectrumEstimate,
};
use crate::detector::{
    apply_nonlinearity_about, background_record, detect, synthesize_current, CurrentTrace, DetectionRecord,
    DetectorParams,
};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, streams};
use crate::stream_gen::{generate, PairedEventStream, SourceConfig};

/// Source events and per-detector detections of one run.
#[derive(Debug, Clone)]
pub struct DetectedRun {
    pub events: PairedEventStream,
    pub signal1: DetectionRecord,
    pub signal2: DetectionRecord,
    pub background1: DetectionRecord,
    pub background2: DetectionRecord,
}

/// Analysis-time options applied when rendering traces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Variant {
    pub eps1: f64,
    pub eps2: f64,
    pub background: bool,
}

impl Variant {
    /// The configured amplifier nonlinearity and background.
    pub fn nominal(config: &RunConfig) -> Self {
        Self {
            eps1: config.detector1.nonlinearity_eps,
            eps2: config.detector2.nonlinearity_eps,
            background: true,
        }
    }
}

/// Runs the source and both detectors from root seed `seed`.
pub fn simulate_detection(config: &RunConfig, seed: u64) -> Result<DetectedRun> {
    config.validate()?;
    let source = SourceConfig { rng_seed: derive_seed(seed, streams::SOURCE), ..config.source.clone() };
    let events = generate(&source)?;
    let p1 = config.detector1.params();
    let p2 = config.detector2.params();
    let signal1 = detect(&events.beam1_times, &p1, derive_seed(seed, streams::DETECTOR1))?;
    let signal2 = detect(&events.beam2_times, &p2, derive_seed(seed, streams::DETECTOR2))?;
    let duration = config.source.duration;
    let background1 = background_record(&p1, duration, derive_seed(seed, streams::BACKGROUND1))?;
    let background2 = background_record(&p2, duration, derive_seed(seed, streams::BACKGROUND2))?;
    Ok(DetectedRun { events, signal1, signal2, background1, background2 })
}

fn render(
    config: &RunConfig,
    params: &DetectorParams,
    signal: &DetectionRecord,
    background: Option<&DetectionRecord>,
    eps: f64,
) -> Result<CurrentTrace> {
    let record = match background {
        Some(b) if !b.is_empty() => signal.merge(b),
        _ => signal.clone(),
    };
    let mut trace = synthesize_current(&record, &params.pulse, config.sampling.dt, config.source.duration)?;
    let x_ref = params.nonlinearity_level(&trace);
    apply_nonlinearity_about(&mut trace, eps, x_ref)?;
    Ok(trace)
}

/// Renders the two photocurrents of `run` under `variant`.
pub fn render_traces(config: &RunConfig, run: &DetectedRun, variant: Variant) -> Result<(CurrentTrace, CurrentTrace)> {
    let bg = |r| variant.background.then_some(r);
    let t1 = render(config, &config.detector1.params(), &run.signal1, bg(&run.background1), variant.eps1)?;
    let t2 = render(config, &config.detector2.params(), &run.signal2, bg(&run.background2), variant.eps2)?;
    Ok((t1, t2))
}

fn charges(trace: &CurrentTrace) -> Vec<f64> {
    trace.detected_charges.iter().flatten().map(|&(_, q)| q).collect()
}

/// Gain moments according to `analysis.gain_correction`.
pub fn gain_stats(config: &RunConfig, trace1: &CurrentTrace, trace2: &CurrentTrace) -> Result<GainStats> {
    match config.analysis.gain_correction {
        GainCorrection::None => Ok(GainStats::unit()),
        GainCorrection::Nominal => Ok(GainStats::from_models(
            &config.detector1.params().gain,
            &config.detector2.params().gain,
        )),
        GainCorrection::Measured => GainStats::from_charges(&charges(trace1), &charges(trace2)),
    }
}

pub fn calibration_mode(config: &RunConfig) -> Result<CalibrationMode> {
    CalibrationMode::from_source(config.source.mode)
}

/// Arm-1 autocorrelation and arm-1/arm-2 cross-correlation.
pub fn correlations(
    config: &RunConfig,
    trace1: &CurrentTrace,
    trace2: &CurrentTrace,
) -> Result<(CorrelationEstimate, CorrelationEstimate)> {
    let auto1 = autocorrelation(trace1, config.analysis.max_lag)?;
    let cross12 = crosscorrelation(trace1, trace2, config.analysis.max_lag)?;
    Ok((auto1, cross12))
}

/// Arm-1 noise power spectrum and arm-1/arm-2 cross-power spectrum.
pub fn spectra(
    config: &RunConfig,
    trace1: &CurrentTrace,
    trace2: &CurrentTrace,
) -> Result<(SpectrumEstimate, SpectrumEstimate)> {
    let a = &config.analysis;
    let auto1 = noise_power_spectrum(trace1, a.segment_len, a.window)?;
    let cross12 = cross_power_spectrum(trace1, trace2, a.segment_len, a.window)?;
    Ok((auto1, cross12))
}

/// Time-domain estimate of `run` under `variant`; traces are dropped on return.
pub fn estimate_time_domain(config: &RunConfig, run: &DetectedRun, variant: Variant) -> Result<EtaEstimate> {
    let mode = calibration_mode(config)?;
    let (t1, t2) = render_traces(config, run, variant)?;
    let gains = gain_stats(config, &t1, &t2)?;
    let (auto1, cross12) = correlations(config, &t1, &t2)?;
    estimate_eta_time_domain(&auto1, &cross12, &gains, mode)
}

/// Everything the calibrate command reports for one pair of traces.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub auto1: CorrelationEstimate,
    pub cross12: CorrelationEstimate,
    pub autospec1: SpectrumEstimate,
    pub crossspec12: SpectrumEstimate,
    pub gains: GainStats,
    pub eta_time: EtaEstimate,
    pub eta_spectral: EtaEstimate,
}

impl Analysis {
    pub fn any_flagged(&self) -> bool {
        self.eta_time.flagged || self.eta_spectral.flagged
    }
}

/// Runs both estimators on the same traces.
pub fn analyze(config: &RunConfig, trace1: &CurrentTrace, trace2: &CurrentTrace) -> Result<Analysis> {
    let mode = calibration_mode(config)?;
    let gains = gain_stats(config, trace1, trace2)?;
    let (auto1, cross12) = correlations(config, trace1, trace2)?;
    let (autospec1, crossspec12) = spectra(config, trace1, trace2)?;
    let eta_time = estimate_eta_time_domain(&auto1, &cross12, &gains, mode)?;
    let pulse = config.detector1.pulse_shape();
    let eta_spectral =
        estimate_eta_spectral(&autospec1, &crossspec12, config.analysis.band(), &pulse, &gains, mode)?;
    Ok(Analysis { auto1, cross12, autospec1, crossspec12, gains, eta_time, eta_spectral })
}

/// Simulates and analyses one run at the configured seed.
pub fn calibrate(config: &RunConfig) -> Result<(DetectedRun, Analysis)> {
    let run = simulate_detection(config, config.source.rng_seed)?;
    if run.signal1.is_empty() {
        return Err(Error::Estimation("no detections on arm 1; nothing to correlate".into()));
    }
    let (t1, t2) = render_traces(config, &run, Variant::nominal(config))?;
    let analysis = analyze(config, &t1, &t2)?;
    Ok((run, analysis))
}

//! Absolute quantum-efficiency estimators and the uncertainty budget.
//!
//! In the stimulated configuration every detected beam-1 photon is correlated
//! with two beam-2 photons (its twin and the seed photon that stimulated it),
//! so at the correlation peak
//!
//! ```text
//! cross12 / auto1 = 2 eta2 <q1><q2> / <q1^2>
//! ```
//!
//! and `eta2 = 1/2 * (<q1>/<q2>) * (<q1^2>/<q1>^2) * cross12 / auto1`.
//! The spontaneous configuration has one partner per photon and drops the
//! factor 1/2. The detector-1 efficiency cancels in the ratio.

use std::io::Write;

use crate::config::RunConfig;
use crate::correlator::{CorrelationEstimate, SpectrumEstimate};
use crate::detector::{GainModel, PulseShape};
use crate::error::{input_err, Error, Result};
use crate::pipeline::{self, Variant};
use crate::rng::{derive_seed, streams};
use crate::stream_gen::SourceMode;

/// Fewest trials accepted by [`uncertainty_budget`].
pub const MIN_BUDGET_TRIALS: usize = 30;
/// Fewest pulse heights accepted by [`excess_noise_factor`].
pub const MIN_PULSE_HEIGHTS: usize = 1000;
/// Fewest spectral bins accepted inside the estimation band.
pub const MIN_BAND_BINS: usize = 8;
/// Estimates above this value are flagged regardless of their uncertainty.
pub const ETA_CEILING: f64 = 1.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CalibrationMode {
    Spontaneous,
    Stimulated,
}

impl CalibrationMode {
    /// Partners per detected beam-1 photon, inverted: 1 (spontaneous) or 1/2 (stimulated).
    pub fn prefactor(self) -> f64 {
        match self {
            CalibrationMode::Spontaneous => 1.0,
            CalibrationMode::Stimulated => 0.5,
        }
    }

    pub fn from_source(mode: SourceMode) -> Result<Self> {
        match mode {
            SourceMode::Spontaneous => Ok(CalibrationMode::Spontaneous),
            SourceMode::Stimulated => Ok(CalibrationMode::Stimulated),
            SourceMode::Coherent => Err(Error::Estimation(
                "a coherent source carries no twin correlation to calibrate against".into(),
            )),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CalibrationMode::Spontaneous => "spontaneous",
            CalibrationMode::Stimulated => "stimulated",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    TimeDomain,
    Spectral,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::TimeDomain => "time_domain",
            Method::Spectral => "spectral",
        }
    }
}

/// Charge moments entering the gain correction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainStats {
    pub mean_q1: f64,
    pub mean_sq_q1: f64,
    pub mean_q2: f64,
}

impl GainStats {
    /// No correction: unit charges on both arms.
    pub fn unit() -> Self {
        Self { mean_q1: 1.0, mean_sq_q1: 1.0, mean_q2: 1.0 }
    }

    /// Nominal moments of the configured gain laws.
    pub fn from_models(g1: &GainModel, g2: &GainModel) -> Self {
        Self { mean_q1: g1.mean_charge, mean_sq_q1: g1.mean_square(), mean_q2: g2.mean_charge }
    }

    /// Sample moments of measured pulse heights.
    pub fn from_charges(q1: &[f64], q2: &[f64]) -> Result<Self> {
        if q1.is_empty() || q2.is_empty() {
            return Err(Error::Estimation("gain correction needs pulse heights on both arms".into()));
        }
        let n1 = q1.len() as f64;
        Ok(Self {
            mean_q1: q1.iter().sum::<f64>() / n1,
            mean_sq_q1: q1.iter().map(|q| q * q).sum::<f64>() / n1,
            mean_q2: q2.iter().sum::<f64>() / q2.len() as f64,
        })
    }

    pub fn corrections(&self) -> CorrectionFactors {
        let gain_ratio = self.mean_q1 / self.mean_q2;
        let excess_noise = self.mean_sq_q1 / (self.mean_q1 * self.mean_q1);
        CorrectionFactors { gain_ratio, excess_noise, combined: gain_ratio * excess_noise }
    }
}

/// Correction applied to the raw correlation ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectionFactors {
    /// `<q1>/<q2>`.
    pub gain_ratio: f64,
    /// `<q1^2>/<q1>^2` of detector 1.
    pub excess_noise: f64,
    /// Product of the two, `<q1^2>/(<q1><q2>)`.
    pub combined: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EtaEstimate {
    pub eta2: f64,
    /// One-sigma statistical uncertainty.
    pub stat_uncertainty: f64,
    pub method: Method,
    pub mode: CalibrationMode,
    pub correction_factors: CorrectionFactors,
    /// Raw cross/auto ratio before prefactor and gain correction.
    pub ratio: f64,
    /// Set when the estimate is significantly outside `[0, 1]` or above [`ETA_CEILING`].
    pub flagged: bool,
}

impl EtaEstimate {
    fn from_ratio(
        ratio: f64,
        ratio_rel_err: f64,
        method: Method,
        mode: CalibrationMode,
        gains: &GainStats,
    ) -> Self {
        let correction_factors = gains.corrections();
        let eta2 = mode.prefactor() * correction_factors.combined * ratio;
        let stat_uncertainty = eta2.abs() * ratio_rel_err;
        let flagged = eta2 > ETA_CEILING
            || eta2 - 3.0 * stat_uncertainty > 1.0
            || eta2 + 3.0 * stat_uncertainty < 0.0
            || !eta2.is_finite();
        Self { eta2, stat_uncertainty, method, mode, correction_factors, ratio, flagged }
    }

    pub const CSV_HEADER: [&'static str; 9] = [
        "method",
        "mode",
        "eta2",
        "stat_uncertainty",
        "prefactor",
        "gain_ratio",
        "excess_noise",
        "ratio",
        "flagged",
    ];

    pub fn csv_record(&self) -> Vec<String> {
        vec![
            self.method.name().to_string(),
            self.mode.name().to_string(),
            format!("{:e}", self.eta2),
            format!("{:e}", self.stat_uncertainty),
            format!("{:e}", self.mode.prefactor()),
            format!("{:e}", self.correction_factors.gain_ratio),
            format!("{:e}", self.correction_factors.excess_noise),
            format!("{:e}", self.ratio),
            self.flagged.to_string(),
        ]
    }

    pub fn summary(&self) -> String {
        format!(
            "eta2 [{}] = {:.5} ± {:.5} (1σ stat), mode {} (prefactor {}), gain ratio {:.5}, excess noise {:.5}{}",
            self.method.name(),
            self.eta2,
            self.stat_uncertainty,
            self.mode.name(),
            self.mode.prefactor(),
            self.correction_factors.gain_ratio,
            self.correction_factors.excess_noise,
            if self.flagged { "  ** FLAGGED: outside physical range **" } else { "" }
        )
    }
}

/// Writes estimates as CSV rows under a header.
pub fn write_eta_csv<W: Write>(writer: W, estimates: &[EtaEstimate]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(EtaEstimate::CSV_HEADER)?;
    for e in estimates {
        w.write_record(e.csv_record())?;
    }
    w.flush()?;
    Ok(())
}

/// Lag-zero ratio estimator.
///
/// The statistical uncertainty combines the relative standard errors of the
/// two peaks in quadrature, treating them as independent. The two peaks share
/// the detector-1 shot noise and are positively correlated, so this
/// overstates the spread of the ratio.
pub fn estimate_eta_time_domain(
    auto1: &CorrelationEstimate,
    cross12: &CorrelationEstimate,
    gains: &GainStats,
    mode: CalibrationMode,
) -> Result<EtaEstimate> {
    if !auto1.same_grid(cross12) {
        return Err(input_err("auto and cross correlations use different lag grids"));
    }
    let (a, sa) = auto1.at_zero();
    let (c, sc) = cross12.at_zero();
    if !(a > 0.0) {
        return Err(Error::Estimation(format!("arm-1 autocorrelation peak {a:e} is not positive")));
    }
    let rel = ((sa / a).powi(2) + (sc / c).powi(2)).sqrt();
    Ok(EtaEstimate::from_ratio(c / a, rel, Method::TimeDomain, mode, gains))
}

/// Frequency band `[lo, hi]` in Hz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralBand {
    pub lo: f64,
    pub hi: f64,
}

/// Band-averaged spectral ratio estimator.
///
/// The band must lie below the pulse's plateau edge (where the power transfer
/// has fallen to 0.8) and hold at least [`MIN_BAND_BINS`] non-DC bins.
pub fn estimate_eta_spectral(
    autospec1: &SpectrumEstimate,
    crossspec12: &SpectrumEstimate,
    band: SpectralBand,
    pulse: &PulseShape,
    gains: &GainStats,
    mode: CalibrationMode,
) -> Result<EtaEstimate> {
    if autospec1.freqs != crossspec12.freqs {
        return Err(input_err("auto and cross spectra use different frequency grids"));
    }
    if !(band.lo.is_finite() && band.hi.is_finite() && band.lo >= 0.0 && band.lo < band.hi) {
        return Err(input_err(format!("invalid band [{:e}, {:e}] Hz", band.lo, band.hi)));
    }
    let edge = pulse.plateau_edge();
    if band.hi > edge {
        return Err(Error::Estimation(format!(
            "band upper edge {:.4e} Hz lies outside the shot-noise plateau: the pulse transfer falls below \
             0.8 at {:.4e} Hz (tau_p = {:e} s)",
            band.hi, edge, pulse.tau_p
        )));
    }
    let (mut cross, mut auto, mut var_c, mut var_a, mut bins) = (0.0, 0.0, 0.0, 0.0, 0);
    for k in 0..autospec1.freqs.len() {
        let f = autospec1.freqs[k];
        if f > 0.0 && f >= band.lo && f <= band.hi {
            auto += autospec1.power[k];
            cross += crossspec12.power[k];
            var_a += autospec1.stderr[k].powi(2);
            var_c += crossspec12.stderr[k].powi(2);
            bins += 1;
        }
    }
    if bins < MIN_BAND_BINS {
        return Err(Error::Estimation(format!(
            "band [{:e}, {:e}] Hz holds {bins} bins, need {MIN_BAND_BINS}; use longer segments",
            band.lo, band.hi
        )));
    }
    if !(auto > 0.0) {
        return Err(Error::Estimation(format!("arm-1 band power {auto:e} is not positive")));
    }
    let rel = (var_a / (auto * auto) + var_c / (cross * cross)).sqrt();
    Ok(EtaEstimate::from_ratio(cross / auto, rel, Method::Spectral, mode, gains))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExcessNoiseEstimate {
    pub value: f64,
    /// Jackknife standard error.
    pub stderr: f64,
}

/// `<q^2>/<q>^2` of a pulse-height sample.
pub fn excess_noise_factor(charges: &[f64]) -> Result<ExcessNoiseEstimate> {
    if charges.len() < MIN_PULSE_HEIGHTS {
        return Err(input_err(format!(
            "excess noise factor needs >= {MIN_PULSE_HEIGHTS} pulse heights, got {}",
            charges.len()
        )));
    }
    let n = charges.len() as f64;
    let mean = charges.iter().sum::<f64>() / n;
    if !(mean > 0.0) {
        return Err(input_err("mean pulse height must be positive"));
    }
    // 1 + var/mean^2 is exactly 1 for a constant sample
    let var = charges.iter().map(|q| (q - mean).powi(2)).sum::<f64>() / n;
    let value = 1.0 + var / (mean * mean);

    // leave-one-out moments from deviations, so a constant sample has zero spread
    let m = n - 1.0;
    let s2: f64 = charges.iter().map(|q| (q - mean).powi(2)).sum();
    let loo: Vec<f64> = charges
        .iter()
        .map(|q| {
            let d = q - mean;
            let mean_i = mean - d / m;
            let var_i = (s2 - d * d) / m - (d / m).powi(2);
            1.0 + var_i / (mean_i * mean_i)
        })
        .collect();
    let loo_mean = loo.iter().sum::<f64>() / n;
    let stderr = ((m / n) * loo.iter().map(|t| (t - loo_mean).powi(2)).sum::<f64>()).sqrt();
    Ok(ExcessNoiseEstimate { value, stderr })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BudgetComponent {
    pub name: String,
    /// Magnitude relative to the mean estimate.
    pub relative: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BudgetReport {
    pub trials: usize,
    pub eta2_mean: f64,
    /// Single-run standard deviation across trials.
    pub eta2_std: f64,
    /// `eta2_std / eta2_mean`.
    pub stat_relative: f64,
    pub systematic_components: Vec<BudgetComponent>,
    /// Relative total: statistical and systematic components in quadrature.
    pub total_uncertainty: f64,
    /// Signed relative shift of the mean estimate caused by the configured nonlinearity.
    pub nonlinearity_shift: f64,
    /// Ground-truth efficiency of detector 2 in the simulation.
    pub eta2_true: f64,
    /// Any trial flagged by the estimator.
    pub any_flagged: bool,
}

impl BudgetReport {
    /// Largest systematic component.
    pub fn dominant_systematic(&self) -> Option<&BudgetComponent> {
        self.systematic_components
            .iter()
            .max_by(|a, b| a.relative.total_cmp(&b.relative))
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["quantity", "value"])?;
        let mut row = |k: &str, v: String| w.write_record([k, v.as_str()]);
        row("trials", self.trials.to_string())?;
        row("eta2_true", format!("{:e}", self.eta2_true))?;
        row("eta2_mean", format!("{:e}", self.eta2_mean))?;
        row("eta2_std", format!("{:e}", self.eta2_std))?;
        row("statistical_relative", format!("{:e}", self.stat_relative))?;
        for c in &self.systematic_components {
            row(&format!("systematic:{}", c.name), format!("{:e}", c.relative))?;
        }
        row("nonlinearity_shift", format!("{:e}", self.nonlinearity_shift))?;
        row("total_relative", format!("{:e}", self.total_uncertainty))?;
        w.flush()?;
        Ok(())
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("uncertainty budget over {} trials\n", self.trials));
        s.push_str(&format!("  eta2 (truth)        {:.5}\n", self.eta2_true));
        s.push_str(&format!("  eta2 mean ± std     {:.5} ± {:.5}\n", self.eta2_mean, self.eta2_std));
        s.push_str(&format!("  statistical (rel)   {:.3e}\n", self.stat_relative));
        for c in &self.systematic_components {
            s.push_str(&format!("  {:<19} {:.3e}\n", c.name, c.relative));
        }
        s.push_str(&format!("  total (rel)         {:.3e}\n", self.total_uncertainty));
        if let Some(d) = self.dominant_systematic() {
            s.push_str(&format!("  dominant systematic {}\n", d.name));
        }
        s.push_str(
            "  note: the nonlinearity component depends on the modelled amplifier reference level; the residual \
             term is a fixed literature estimate for losses, alignment, background light and dark current\n",
        );
        s
    }
}

fn mean_std(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}

/// Seed of budget trial `index` under root seed `root`.
pub fn trial_seed(root: u64, index: usize) -> u64 {
    derive_seed(root, streams::TRIAL_BASE + index as u64)
}

/// Repeats the time-domain pipeline over `n_trials` fresh seeds.
///
/// Systematic components, relative to the mean estimate:
/// * `nonlinearity`: each trial is re-analysed on the same detections with
///   the configured amplifier nonlinearity set to zero and with its sign
///   reversed; the larger mean shift is reported (zero when no
///   nonlinearity is configured);
/// * `background`: mean shift from removing the configured background
///   pulses (only listed when a background is configured);
/// * `residual_systematic`: fixed configured constant for effects that are
///   not simulated.
pub fn uncertainty_budget(config: &RunConfig, n_trials: usize) -> Result<BudgetReport> {
    if n_trials < MIN_BUDGET_TRIALS {
        return Err(input_err(format!(
            "uncertainty budget needs >= {MIN_BUDGET_TRIALS} trials, got {n_trials}"
        )));
    }
    config.validate()?;
    let eps1 = config.detector1.nonlinearity_eps;
    let eps2 = config.detector2.nonlinearity_eps;
    let nonlinear = eps1 != 0.0 || eps2 != 0.0;
    let background = config.detector1.background_rate > 0.0 || config.detector2.background_rate > 0.0;
    let nominal = Variant { eps1, eps2, background };

    let mut eta = Vec::with_capacity(n_trials);
    let mut shift_linear = Vec::new();
    let mut shift_reversed = Vec::new();
    let mut shift_background = Vec::new();
    let mut any_flagged = false;
    for t in 0..n_trials {
        let run = pipeline::simulate_detection(config, trial_seed(config.source.rng_seed, t))?;
        let e = pipeline::estimate_time_domain(config, &run, nominal)?;
        any_flagged |= e.flagged;
        if nonlinear {
            let lin = pipeline::estimate_time_domain(config, &run, Variant { eps1: 0.0, eps2: 0.0, ..nominal })?;
            let rev = pipeline::estimate_time_domain(config, &run, Variant { eps1: -eps1, eps2: -eps2, ..nominal })?;
            shift_linear.push(e.eta2 - lin.eta2);
            shift_reversed.push(rev.eta2 - lin.eta2);
        }
        if background {
            let clean = pipeline::estimate_time_domain(config, &run, Variant { background: false, ..nominal })?;
            shift_background.push(e.eta2 - clean.eta2);
        }
        eta.push(e.eta2);
    }

    let (eta2_mean, eta2_std) = mean_std(&eta);
    let rel = |shifts: &[f64]| if shifts.is_empty() { 0.0 } else { mean_std(shifts).0 / eta2_mean };
    let nonlinearity_shift = rel(&shift_linear);
    let mut systematic_components = vec![BudgetComponent {
        name: "nonlinearity".into(),
        relative: nonlinearity_shift.abs().max(rel(&shift_reversed).abs()),
    }];
    if background {
        systematic_components.push(BudgetComponent { name: "background".into(), relative: rel(&shift_background).abs() });
    }
    systematic_components.push(BudgetComponent {
        name: "residual_systematic".into(),
        relative: config.budget.residual_systematic,
    });
    let stat_relative = eta2_std / eta2_mean;
    let total_uncertainty = (stat_relative.powi(2)
        + systematic_components.iter().map(|c| c.relative.powi(2)).sum::<f64>())
    .sqrt();
    Ok(BudgetReport {
        trials: n_trials,
        eta2_mean,
        eta2_std,
        stat_relative,
        systematic_components,
        total_uncertainty,
        nonlinearity_shift,
        eta2_true: config.detector2.eta,
        any_flagged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlator::Window;

    fn corr(values: Vec<f64>, stderr: Vec<f64>) -> CorrelationEstimate {
        let n = values.len() as isize / 2;
        CorrelationEstimate {
            lags: (-n..=n).map(|k| k as f64 * 1e-10).collect(),
            values,
            stderr,
            n_samples: 1000,
            dc_removed: true,
        }
    }

    fn spec(power: Vec<f64>) -> SpectrumEstimate {
        let n = power.len();
        SpectrumEstimate {
            freqs: (0..n).map(|k| k as f64 * 1e6).collect(),
            stderr: power.iter().map(|p| 0.01 * p).collect(),
            imag: vec![0.0; n],
            power,
            n_segments: 100,
            window: Window::Hann,
        }
    }

    #[test]
    fn identical_correlations_give_one_half_when_stimulated() {
        let a = corr(vec![0.5, 2.0, 0.5], vec![0.01, 0.02, 0.01]);
        let e = estimate_eta_time_domain(&a, &a, &GainStats::unit(), CalibrationMode::Stimulated).unwrap();
        assert_eq!(e.eta2, 0.5);
        assert!(e.stat_uncertainty > 0.0);
        assert!(!e.flagged);
        let e = estimate_eta_time_domain(&a, &a, &GainStats::unit(), CalibrationMode::Spontaneous).unwrap();
        assert_eq!(e.eta2, 1.0);
    }

    #[test]
    fn time_domain_errors() {
        let a = corr(vec![0.5, 0.0, 0.5], vec![0.01; 3]);
        assert!(matches!(
            estimate_eta_time_domain(&a, &a, &GainStats::unit(), CalibrationMode::Stimulated),
            Err(Error::Estimation(_))
        ));
        let b = corr(vec![1.0; 5], vec![0.01; 5]);
        let c = corr(vec![1.0; 3], vec![0.01; 3]);
        assert!(matches!(
            estimate_eta_time_domain(&b, &c, &GainStats::unit(), CalibrationMode::Stimulated),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn gain_correction_combines_ratio_and_excess_noise() {
        let g = GainStats { mean_q1: 2.0, mean_sq_q1: 8.0, mean_q2: 1.0 };
        let c = g.corrections();
        assert_eq!(c.gain_ratio, 2.0);
        assert_eq!(c.excess_noise, 2.0);
        assert_eq!(c.combined, 4.0);
        let a = corr(vec![0.0, 4.0, 0.0], vec![0.1; 3]);
        let x = corr(vec![0.0, 1.0, 0.0], vec![0.1; 3]);
        let e = estimate_eta_time_domain(&a, &x, &g, CalibrationMode::Stimulated).unwrap();
        assert_eq!(e.eta2, 0.5);
    }

    #[test]
    fn out_of_range_estimates_are_flagged_not_clamped() {
        let a = corr(vec![0.0, 1.0, 0.0], vec![0.001; 3]);
        let x = corr(vec![0.0, 3.0, 0.0], vec![0.001; 3]);
        let e = estimate_eta_time_domain(&a, &x, &GainStats::unit(), CalibrationMode::Stimulated).unwrap();
        assert_eq!(e.eta2, 1.5);
        assert!(e.flagged);
    }

    #[test]
    fn spectral_identity_and_band_checks() {
        let pulse = PulseShape::rectangular(3e-9);
        let s = spec(vec![1.0; 200]);
        let band = SpectralBand { lo: 5e6, hi: 50e6 };
        let e = estimate_eta_spectral(&s, &s, band, &pulse, &GainStats::unit(), CalibrationMode::Stimulated).unwrap();
        assert!((e.eta2 - 0.5).abs() < 1e-15);
        assert_eq!(e.method, Method::Spectral);

        let above = SpectralBand { lo: 5e6, hi: 1.5 / 3e-9 };
        assert!(matches!(
            estimate_eta_spectral(&s, &s, above, &pulse, &GainStats::unit(), CalibrationMode::Stimulated),
            Err(Error::Estimation(_))
        ));
        let narrow = SpectralBand { lo: 5e6, hi: 9e6 };
        assert!(estimate_eta_spectral(&s, &s, narrow, &pulse, &GainStats::unit(), CalibrationMode::Stimulated).is_err());
        let other = spec(vec![1.0; 100]);
        assert!(matches!(
            estimate_eta_spectral(&s, &other, band, &pulse, &GainStats::unit(), CalibrationMode::Stimulated),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn excess_noise_of_constant_sample_is_exactly_one() {
        for q in [1.0, 1.602e-19, 7.3] {
            let e = excess_noise_factor(&vec![q; 5000]).unwrap();
            assert_eq!(e.value, 1.0);
            assert!(e.stderr < 1e-12);
        }
    }

    #[test]
    fn excess_noise_of_two_point_law() {
        // {q, 2q} equiprobable: <q^2>/<q>^2 = 2.5 / 2.25
        let charges: Vec<f64> = (0..2000).map(|i| if i % 2 == 0 { 1.0 } else { 2.0 }).collect();
        let e = excess_noise_factor(&charges).unwrap();
        assert!((e.value - 10.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn excess_noise_needs_enough_samples() {
        assert!(matches!(excess_noise_factor(&[1.0; 999]), Err(Error::Input(_))));
    }

    #[test]
    fn budget_rejects_too_few_trials() {
        let cfg = RunConfig::default();
        assert!(matches!(uncertainty_budget(&cfg, 29), Err(Error::Input(_))));
    }

    #[test]
    fn coherent_source_cannot_be_calibrated() {
        assert!(CalibrationMode::from_source(SourceMode::Coherent).is_err());
        assert_eq!(CalibrationMode::from_source(SourceMode::Stimulated).unwrap().prefactor(), 0.5);
    }
}

//! Analog photodetector model.
//!
//! A detector is an ideal photon counter behind a beam splitter of
//! transmission `eta`: every incident photon is kept independently with
//! probability `eta`, receives a charge drawn from the gain model, and
//! contributes a unit-area pulse `q * f(t - t_n)` to the photocurrent.

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{config_err, non_negative, positive, Result};
use crate::rng::stream_rng;
use crate::stream_gen::gen_coherent;

/// Gaussian pulses are cut at this many standard deviations.
pub const GAUSSIAN_CUTOFF: f64 = 6.0;
/// One-sided exponential pulses are cut at this many time constants.
pub const EXPONENTIAL_CUTOFF: f64 = 20.0;
/// Finest allowed sampling: `dt <= tau_p / MIN_SAMPLES_PER_PULSE`.
pub const MIN_SAMPLES_PER_PULSE: f64 = 10.0;
/// Power transfer `|f^(f)|^2` at the plateau edge.
pub const PLATEAU_TRANSFER: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseKind {
    /// `1/tau_p` on `[0, tau_p)`.
    Rectangular,
    /// Centred Gaussian with standard deviation `tau_p`, cut at `±6 tau_p`.
    Gaussian,
    /// `exp(-t/tau_p)/tau_p` on `[0, 20 tau_p]`.
    OneSidedExponential,
}

/// Unit-area detector response `f(t)`.
///
/// Truncated shapes are renormalised by their retained mass so that the area
/// is exactly one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseShape {
    pub kind: PulseKind,
    pub tau_p: f64,
}

impl Default for PulseShape {
    fn default() -> Self {
        Self::rectangular(3e-9)
    }
}

fn gaussian_mass() -> f64 {
    libm::erf(GAUSSIAN_CUTOFF / std::f64::consts::SQRT_2)
}

fn exponential_mass() -> f64 {
    -(-EXPONENTIAL_CUTOFF).exp_m1()
}

impl PulseShape {
    pub fn new(kind: PulseKind, tau_p: f64) -> Result<Self> {
        positive("tau_p", tau_p)?;
        Ok(Self { kind, tau_p })
    }

    pub fn rectangular(tau_p: f64) -> Self {
        Self { kind: PulseKind::Rectangular, tau_p }
    }

    /// Interval outside of which `f` is zero.
    pub fn support(&self) -> (f64, f64) {
        let w = self.tau_p;
        match self.kind {
            PulseKind::Rectangular => (0.0, w),
            PulseKind::Gaussian => (-GAUSSIAN_CUTOFF * w, GAUSSIAN_CUTOFF * w),
            PulseKind::OneSidedExponential => (0.0, EXPONENTIAL_CUTOFF * w),
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        let w = self.tau_p;
        match self.kind {
            PulseKind::Rectangular => {
                if (0.0..w).contains(&t) {
                    1.0 / w
                } else {
                    0.0
                }
            }
            PulseKind::Gaussian => {
                if t.abs() > GAUSSIAN_CUTOFF * w {
                    return 0.0;
                }
                let z = t / w;
                (-0.5 * z * z).exp() / (w * (2.0 * std::f64::consts::PI).sqrt() * gaussian_mass())
            }
            PulseKind::OneSidedExponential => {
                if !(0.0..=EXPONENTIAL_CUTOFF * w).contains(&t) {
                    return 0.0;
                }
                (-t / w).exp() / (w * exponential_mass())
            }
        }
    }

    /// `F(tau) = ∫ f(t) f(t + tau) dt`, closed form for the truncated shape.
    pub fn autoconvolution(&self, tau: f64) -> f64 {
        let w = self.tau_p;
        let a = tau.abs();
        match self.kind {
            PulseKind::Rectangular => {
                if a < w {
                    (w - a) / (w * w)
                } else {
                    0.0
                }
            }
            PulseKind::Gaussian => {
                let cut = GAUSSIAN_CUTOFF * w;
                if a >= 2.0 * cut {
                    return 0.0;
                }
                // both factors non-zero for t in [lo, hi]
                let lo = (-cut).max(-cut - tau);
                let hi = cut.min(cut - tau);
                let shift = 0.5 * tau;
                let span = libm::erf((hi + shift) / w) - libm::erf((lo + shift) / w);
                let m = gaussian_mass();
                (-a * a / (4.0 * w * w)).exp() * span / (4.0 * w * std::f64::consts::PI.sqrt() * m * m)
            }
            PulseKind::OneSidedExponential => {
                let cut = EXPONENTIAL_CUTOFF * w;
                if a >= cut {
                    return 0.0;
                }
                let m = exponential_mass();
                (-a / w).exp() * (-(-2.0 * (cut - a) / w).exp_m1()) / (2.0 * w * m * m)
            }
        }
    }

    /// Largest value of `f`.
    pub fn peak(&self) -> f64 {
        match self.kind {
            PulseKind::Gaussian | PulseKind::OneSidedExponential => self.value(0.0),
            PulseKind::Rectangular => 1.0 / self.tau_p,
        }
    }

    /// Power transfer `|f^(freq)|^2` of the untruncated shape.
    pub fn transfer(&self, freq: f64) -> f64 {
        let x = 2.0 * std::f64::consts::PI * freq * self.tau_p;
        match self.kind {
            PulseKind::Rectangular => {
                let h = 0.5 * x;
                if h == 0.0 {
                    1.0
                } else {
                    (h.sin() / h).powi(2)
                }
            }
            PulseKind::Gaussian => (-x * x).exp(),
            PulseKind::OneSidedExponential => 1.0 / (1.0 + x * x),
        }
    }

    /// Frequency at which the power transfer has fallen to [`PLATEAU_TRANSFER`];
    /// below it the shot-noise spectrum is treated as flat.
    pub fn plateau_edge(&self) -> f64 {
        // transfer is monotone on [0, first zero); bisect on frequency
        let (mut lo, mut hi) = (0.0, 0.5 / self.tau_p);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.transfer(mid) > PLATEAU_TRANSFER {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

pub fn pulse_value(shape: &PulseShape, t: f64) -> f64 {
    shape.value(t)
}

pub fn pulse_autoconvolution(shape: &PulseShape, tau: f64) -> f64 {
    shape.autoconvolution(tau)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainKind {
    /// Every detection carries exactly `mean_charge`.
    UnitCharge,
    /// Charges drawn from an exponential law with mean `mean_charge`.
    ExponentialGain,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainModel {
    pub kind: GainKind,
    pub mean_charge: f64,
}

impl Default for GainModel {
    fn default() -> Self {
        Self { kind: GainKind::UnitCharge, mean_charge: 1.0 }
    }
}

impl GainModel {
    pub fn validate(&self) -> Result<()> {
        positive("mean_charge", self.mean_charge)
    }

    /// Nominal `<q^2>/<q>^2` of the law.
    pub fn excess_noise(&self) -> f64 {
        match self.kind {
            GainKind::UnitCharge => 1.0,
            GainKind::ExponentialGain => 2.0,
        }
    }

    /// Nominal `<q^2>`.
    pub fn mean_square(&self) -> f64 {
        self.excess_noise() * self.mean_charge * self.mean_charge
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        match self.kind {
            GainKind::UnitCharge => self.mean_charge,
            GainKind::ExponentialGain => {
                let e: f64 = Exp1.sample(rng);
                self.mean_charge * e
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorParams {
    /// Quantum efficiency: probability that an incident photon yields a pulse.
    pub eta: f64,
    pub pulse: PulseShape,
    pub gain: GainModel,
    /// Amplifier nonlinearity magnitude, 0 for an ideal chain.
    pub nonlinearity_eps: f64,
    pub nonlinearity_reference: NonlinearityReference,
    /// Rate of additive, uncorrelated background pulses (dark counts), 1/s.
    pub background_rate: f64,
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self {
            eta: 1.0,
            pulse: PulseShape::default(),
            gain: GainModel::default(),
            nonlinearity_eps: 0.0,
            nonlinearity_reference: NonlinearityReference::default(),
            background_rate: 0.0,
        }
    }
}

impl DetectorParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(config_err(format!("eta must lie in [0, 1], got {}", self.eta)));
        }
        positive("tau_p", self.pulse.tau_p)?;
        self.gain.validate()?;
        check_eps(self.nonlinearity_eps)?;
        non_negative("background_rate", self.background_rate)
    }

    /// Level `x_ref` at which the amplifier gain departs by `eps`.
    pub fn nonlinearity_level(&self, trace: &CurrentTrace) -> f64 {
        match self.nonlinearity_reference {
            NonlinearityReference::TraceMean => trace_mean(trace),
            NonlinearityReference::PulsePeak => self.gain.mean_charge * self.pulse.peak(),
        }
    }
}

/// Reference level of the quadratic amplifier model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonlinearityReference {
    /// Mean of the trace being distorted.
    TraceMean,
    /// Peak of a single pulse of mean charge.
    #[default]
    PulsePeak,
}

fn check_eps(eps: f64) -> Result<()> {
    if eps.is_finite() && eps.abs() <= 0.1 {
        Ok(())
    } else {
        Err(config_err(format!("|nonlinearity_eps| must be <= 0.1, got {eps}")))
    }
}

/// Retained detection times and their charges, in time order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DetectionRecord {
    pub times: Vec<f64>,
    pub charges: Vec<f64>,
}

impl DetectionRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn total_charge(&self) -> f64 {
        self.charges.iter().sum()
    }

    /// Time-ordered union of two records.
    pub fn merge(&self, other: &DetectionRecord) -> DetectionRecord {
        let mut out = DetectionRecord {
            times: Vec::with_capacity(self.len() + other.len()),
            charges: Vec::with_capacity(self.len() + other.len()),
        };
        let (mut i, mut j) = (0, 0);
        while i < self.len() || j < other.len() {
            let take_self = j >= other.len() || (i < self.len() && self.times[i] <= other.times[j]);
            let (t, q) = if take_self {
                i += 1;
                (self.times[i - 1], self.charges[i - 1])
            } else {
                j += 1;
                (other.times[j - 1], other.charges[j - 1])
            };
            out.times.push(t);
            out.charges.push(q);
        }
        out
    }
}

/// Bernoulli thinning with probability `eta`, then one charge draw per kept
/// event. Draw order per event: one uniform, then (exponential gain only) one
/// charge.
pub fn detect(times: &[f64], params: &DetectorParams, rng_seed: u64) -> Result<DetectionRecord> {
    params.validate()?;
    let mut rng = stream_rng(rng_seed, 0);
    let mut record = DetectionRecord::default();
    for &t in times {
        let u: f64 = rng.random();
        if u < params.eta {
            record.times.push(t);
            record.charges.push(params.gain.draw(&mut rng));
        }
    }
    Ok(record)
}

/// Uncorrelated Poisson background pulses at `params.background_rate`.
pub fn background_record(params: &DetectorParams, duration: f64, rng_seed: u64) -> Result<DetectionRecord> {
    params.validate()?;
    let events = gen_coherent(params.background_rate, duration, rng_seed)?;
    let ideal = DetectorParams { eta: 1.0, ..*params };
    detect(&events.beam2_times, &ideal, rng_seed ^ 0x5bd1_e995)
}

/// Uniformly sampled photocurrent `samples[k] = i(t0 + k dt)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurrentTrace {
    pub samples: Vec<f64>,
    pub dt: f64,
    pub t0: f64,
    /// `(time, charge)` of every contributing event, for pulse-height analysis.
    pub detected_charges: Option<Vec<(f64, f64)>>,
}

impl CurrentTrace {
    pub fn from_samples(samples: Vec<f64>, dt: f64) -> Self {
        Self { samples, dt, t0: 0.0, detected_charges: None }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `len * dt`.
    pub fn span(&self) -> f64 {
        self.samples.len() as f64 * self.dt
    }

    /// `∫ i dt` by the rectangle rule.
    pub fn integral(&self) -> f64 {
        self.samples.iter().sum::<f64>() * self.dt
    }

    /// Multiplies every sample by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self { samples: self.samples.iter().map(|x| c * x).collect(), ..self.clone() }
    }

    /// Sample-wise sum with a trace on the same grid.
    pub fn add(&self, other: &CurrentTrace) -> Result<Self> {
        if self.len() != other.len() || self.dt != other.dt || self.t0 != other.t0 {
            return Err(crate::error::input_err("traces are on different grids"));
        }
        let samples = self.samples.iter().zip(&other.samples).map(|(a, b)| a + b).collect();
        let detected_charges = match (&self.detected_charges, &other.detected_charges) {
            (Some(a), Some(b)) => {
                let mut all: Vec<(f64, f64)> = a.iter().chain(b).copied().collect();
                all.sort_by(|x, y| x.0.total_cmp(&y.0));
                Some(all)
            }
            _ => None,
        };
        Ok(Self { samples, dt: self.dt, t0: self.t0, detected_charges })
    }

    /// `(time_s, current)` rows for samples with `t < t0 + window`.
    /// Zero samples are omitted when `skip_zeros` is set.
    pub fn write_csv<W: Write>(&self, writer: W, window: Option<f64>, skip_zeros: bool) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["time_s", "current"])?;
        let limit = window.map_or(self.len(), |win| ((win / self.dt).ceil() as usize).min(self.len()));
        for (k, &x) in self.samples[..limit].iter().enumerate() {
            if skip_zeros && x == 0.0 {
                continue;
            }
            w.write_record([format!("{:e}", self.t0 + k as f64 * self.dt), format!("{x:e}")])?;
        }
        w.flush()?;
        Ok(())
    }

    /// `(time_s, charge)` pulse-height rows.
    pub fn write_pulse_heights_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["time_s", "charge"])?;
        for &(t, q) in self.detected_charges.iter().flatten() {
            w.write_record([format!("{t:e}"), format!("{q:e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Number of samples covering `duration` at spacing `dt`.
pub fn sample_count(duration: f64, dt: f64) -> usize {
    let x = duration / dt;
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x.max(1.0) {
        r as usize
    } else {
        x.ceil() as usize
    }
}

/// Renders `sum_n q_n f(t_k - t_n)` on the grid `t_k = k dt`, `0 <= t_k < duration`.
pub fn synthesize_current(
    record: &DetectionRecord,
    pulse: &PulseShape,
    dt: f64,
    duration: f64,
) -> Result<CurrentTrace> {
    positive("dt", dt)?;
    positive("duration", duration)?;
    positive("tau_p", pulse.tau_p)?;
    if dt > pulse.tau_p / MIN_SAMPLES_PER_PULSE * (1.0 + 1e-12) {
        return Err(config_err(format!(
            "dt = {dt:e} s does not resolve the pulse: need dt <= tau_p/{MIN_SAMPLES_PER_PULSE} = {:e} s",
            pulse.tau_p / MIN_SAMPLES_PER_PULSE
        )));
    }
    let n = sample_count(duration, dt);
    let mut samples = vec![0.0; n];
    let (lo, hi) = pulse.support();
    for (&t, &q) in record.times.iter().zip(&record.charges) {
        let first = ((t + lo) / dt).ceil().max(0.0);
        if first >= n as f64 {
            continue;
        }
        let last = ((t + hi) / dt).floor().min((n - 1) as f64);
        if last < first {
            continue;
        }
        for k in first as usize..=last as usize {
            samples[k] += q * pulse.value(k as f64 * dt - t);
        }
    }
    let detected_charges = Some(record.times.iter().copied().zip(record.charges.iter().copied()).collect());
    Ok(CurrentTrace { samples, dt, t0: 0.0, detected_charges })
}

fn trace_mean(trace: &CurrentTrace) -> f64 {
    if trace.is_empty() {
        0.0
    } else {
        trace.samples.iter().sum::<f64>() / trace.len() as f64
    }
}

/// Quadratic amplifier departure `x -> x (1 + eps x / x_ref)` with the trace
/// mean as reference level. `eps = 0` (or an all-zero trace) is the identity.
pub fn apply_nonlinearity(trace: &CurrentTrace, eps: f64) -> Result<CurrentTrace> {
    let mut out = trace.clone();
    apply_nonlinearity_about(&mut out, eps, trace_mean(trace))?;
    Ok(out)
}

/// In-place quadratic departure about an explicit reference level. A zero
/// reference leaves the trace unchanged.
pub fn apply_nonlinearity_about(trace: &mut CurrentTrace, eps: f64, x_ref: f64) -> Result<()> {
    check_eps(eps)?;
    if eps == 0.0 || x_ref == 0.0 {
        return Ok(());
    }
    if !x_ref.is_finite() {
        return Err(config_err(format!("nonlinearity reference level must be finite, got {x_ref}")));
    }
    let k = eps / x_ref;
    for x in &mut trace.samples {
        *x *= 1.0 + k * *x;
    }
    Ok(())
}

//! Second-order statistics of sampled photocurrents.
//!
//! Time-domain estimates use the per-lag unbiased normalisation
//! `1/(N - |l|)` with the whole-run sample means removed. Standard errors come
//! from the scatter of the same estimator over 16 equal sub-segments of the
//! run (pairs are assigned to the segment of their first index).
//!
//! The lagged sums are accumulated from raw products and corrected for the
//! means afterwards, so only non-zero samples of the sparser trace have to be
//! visited. A weak arm whose pulses cover a small fraction of the run is
//! therefore cheap to correlate against a dense one.
//!
//! Spectra are Welch averages over non-overlapping segments with the segment
//! mean removed, scaled as one-sided densities (current²/Hz).

use std::io::Write;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::detector::CurrentTrace;
use crate::error::{input_err, Result};

/// Number of sub-segments used for standard errors.
pub const ERROR_SEGMENTS: usize = 16;
/// Shortest accepted spectral segment, in samples.
pub const MIN_SEGMENT_LEN: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationEstimate {
    /// Lags in seconds, symmetric around zero.
    pub lags: Vec<f64>,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n_samples: usize,
    pub dc_removed: bool,
}

impl CorrelationEstimate {
    pub fn zero_index(&self) -> usize {
        self.lags.len() / 2
    }

    /// `(value, stderr)` at lag zero.
    pub fn at_zero(&self) -> (f64, f64) {
        let i = self.zero_index();
        (self.values[i], self.stderr[i])
    }

    pub fn same_grid(&self, other: &CorrelationEstimate) -> bool {
        self.lags == other.lags
    }

    /// Largest lag index, `L` in a grid of `2L + 1` lags.
    pub fn max_lag_samples(&self) -> usize {
        self.lags.len() / 2
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_rows(writer, "lag_s", &self.lags, &self.values, &self.stderr)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    Rectangular,
    Hann,
}

impl Window {
    fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; len],
            Window::Hann => (0..len)
                .map(|n| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / len as f64).cos())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumEstimate {
    /// Bin frequencies `k / (segment_len dt)`, from 0 to Nyquist.
    pub freqs: Vec<f64>,
    /// One-sided (cross-)power density; real part for cross spectra.
    pub power: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Imaginary part of the cross density (zero for auto spectra).
    pub imag: Vec<f64>,
    pub n_segments: usize,
    pub window: Window,
}

impl SpectrumEstimate {
    pub fn df(&self) -> f64 {
        self.freqs.get(1).copied().unwrap_or(0.0)
    }

    /// `∫ power df` over the one-sided grid.
    pub fn integrated_power(&self) -> f64 {
        self.power.iter().sum::<f64>() * self.df()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_rows(writer, "freq_hz", &self.freqs, &self.power, &self.stderr)
    }
}

fn write_rows<W: Write>(writer: W, axis: &str, x: &[f64], v: &[f64], e: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([axis, "value", "stderr"])?;
    for ((x, v), e) in x.iter().zip(v).zip(e) {
        w.write_record([format!("{x:e}"), format!("{v:e}"), format!("{e:e}")])?;
    }
    w.flush()?;
    Ok(())
}

pub fn mean_current(trace: &CurrentTrace) -> Result<f64> {
    if trace.is_empty() {
        return Err(input_err("mean of an empty trace"));
    }
    Ok(trace.samples.iter().sum::<f64>() / trace.len() as f64)
}

/// `<δi(t) δi(t+τ)>` for `|τ| <= max_lag`. Exactly symmetric in `τ`.
pub fn autocorrelation(trace: &CurrentTrace, max_lag: f64) -> Result<CorrelationEstimate> {
    let lag = lag_samples(trace, max_lag)?;
    let (half_values, half_err) = lagged_covariance(&trace.samples, &trace.samples, 0, lag as isize)?;
    let mut values = Vec::with_capacity(2 * lag + 1);
    let mut stderr = Vec::with_capacity(2 * lag + 1);
    values.extend(half_values[1..].iter().rev());
    values.extend(&half_values);
    stderr.extend(half_err[1..].iter().rev());
    stderr.extend(&half_err);
    Ok(CorrelationEstimate {
        lags: lag_grid(lag, trace.dt),
        values,
        stderr,
        n_samples: trace.len(),
        dc_removed: true,
    })
}

/// `<δi1(t) δi2(t+τ)>` for `|τ| <= max_lag`.
pub fn crosscorrelation(
    trace1: &CurrentTrace,
    trace2: &CurrentTrace,
    max_lag: f64,
) -> Result<CorrelationEstimate> {
    check_same_grid(trace1, trace2)?;
    let lag = lag_samples(trace1, max_lag)? as isize;
    let (values, stderr) = lagged_covariance(&trace1.samples, &trace2.samples, -lag, lag)?;
    Ok(CorrelationEstimate {
        lags: lag_grid(lag as usize, trace1.dt),
        values,
        stderr,
        n_samples: trace1.len(),
        dc_removed: true,
    })
}

fn check_same_grid(a: &CurrentTrace, b: &CurrentTrace) -> Result<()> {
    if a.len() != b.len() {
        return Err(input_err(format!("trace lengths differ: {} vs {}", a.len(), b.len())));
    }
    if (a.dt - b.dt).abs() > 1e-12 * a.dt || a.t0 != b.t0 {
        return Err(input_err(format!("trace grids differ: dt {:e} vs {:e}", a.dt, b.dt)));
    }
    Ok(())
}

fn lag_samples(trace: &CurrentTrace, max_lag: f64) -> Result<usize> {
    if !(max_lag.is_finite() && max_lag >= 0.0) {
        return Err(input_err(format!("max_lag must be finite and >= 0, got {max_lag}")));
    }
    if trace.is_empty() || max_lag >= trace.span() {
        return Err(input_err(format!(
            "max_lag {max_lag:e} s must be shorter than the trace span {:e} s",
            trace.span()
        )));
    }
    let lag = (max_lag / trace.dt + 1e-9).floor() as usize;
    if trace.len() / ERROR_SEGMENTS <= lag {
        return Err(input_err(format!(
            "trace of {} samples is too short for {ERROR_SEGMENTS} error segments at {lag} lags",
            trace.len()
        )));
    }
    Ok(lag)
}

fn lag_grid(lag: usize, dt: f64) -> Vec<f64> {
    let l = lag as isize;
    (-l..=l).map(|k| k as f64 * dt).collect()
}

/// Signed sum of `x[from..to]` (negated when `to < from`).
fn range_sum(x: &[f64], from: isize, to: isize) -> f64 {
    if to >= from {
        x[from as usize..to as usize].iter().sum()
    } else {
        -x[to as usize..from as usize].iter().sum::<f64>()
    }
}

/// Mean-removed lagged covariance of `a` against `b` for lags
/// `lag_lo..=lag_hi`, with segment standard errors.
fn lagged_covariance(a: &[f64], b: &[f64], lag_lo: isize, lag_hi: isize) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = a.len();
    debug_assert_eq!(n, b.len());
    let nl = (lag_hi - lag_lo + 1) as usize;
    let bounds: Vec<usize> = (0..=ERROR_SEGMENTS).map(|s| s * n / ERROR_SEGMENTS).collect();
    let seg_of = |k: usize| {
        let mut s = (k * ERROR_SEGMENTS / n).min(ERROR_SEGMENTS - 1);
        while bounds[s] > k {
            s -= 1;
        }
        while bounds[s + 1] <= k {
            s += 1;
        }
        s
    };

    let mut raw = vec![vec![0.0; nl]; ERROR_SEGMENTS];
    let nz_a = a.iter().filter(|&&x| x != 0.0).count();
    let nz_b = b.iter().filter(|&&x| x != 0.0).count();
    let ni = n as isize;
    if nz_a <= nz_b {
        let mut seg = 0;
        for (k, &ak) in a.iter().enumerate() {
            if ak == 0.0 {
                continue;
            }
            while bounds[seg + 1] <= k {
                seg += 1;
            }
            let ki = k as isize;
            let lo = lag_lo.max(-ki);
            let hi = lag_hi.min(ni - 1 - ki);
            if hi < lo {
                continue;
            }
            let row = &mut raw[seg][(lo - lag_lo) as usize..=(hi - lag_lo) as usize];
            let bs = &b[(ki + lo) as usize..=(ki + hi) as usize];
            for (r, &bv) in row.iter_mut().zip(bs) {
                *r += ak * bv;
            }
        }
    } else {
        for (j, &bj) in b.iter().enumerate() {
            if bj == 0.0 {
                continue;
            }
            let ji = j as isize;
            let lo = lag_lo.max(ji - (ni - 1));
            let hi = lag_hi.min(ji);
            if hi < lo {
                continue;
            }
            let s_first = seg_of((ji - hi) as usize);
            let s_last = seg_of((ji - lo) as usize);
            if s_first == s_last {
                let row = &mut raw[s_first];
                for l in lo..=hi {
                    row[(l - lag_lo) as usize] += a[(ji - l) as usize] * bj;
                }
            } else {
                for l in lo..=hi {
                    let k = (ji - l) as usize;
                    raw[seg_of(k)][(l - lag_lo) as usize] += a[k] * bj;
                }
            }
        }
    }

    let ma = a.iter().sum::<f64>() / n as f64;
    let mb = b.iter().sum::<f64>() / n as f64;
    let seg_sum = |x: &[f64], s: usize| x[bounds[s]..bounds[s + 1]].iter().sum::<f64>();
    let sums_a: Vec<f64> = (0..ERROR_SEGMENTS).map(|s| seg_sum(a, s)).collect();
    let sums_b: Vec<f64> = (0..ERROR_SEGMENTS).map(|s| seg_sum(b, s)).collect();

    let mut values = Vec::with_capacity(nl);
    let mut stderr = Vec::with_capacity(nl);
    let mut per_segment = [0.0; ERROR_SEGMENTS];
    for (li, l) in (lag_lo..=lag_hi).enumerate() {
        let (mut num_total, mut n_total) = (0.0, 0usize);
        for s in 0..ERROR_SEGMENTS {
            let (s0, s1) = (bounds[s] as isize, bounds[s + 1] as isize);
            // valid first indices k in [lo, hi) so that k + l stays in range
            let lo = s0.max(-l);
            let hi = s1.min(ni - l);
            let count = (hi - lo).max(0) as usize;
            if count == 0 {
                per_segment[s] = 0.0;
                continue;
            }
            let sa = sums_a[s] - range_sum(a, s0, lo) - range_sum(a, hi, s1);
            let sb = sums_b[s] + range_sum(b, s1, hi + l) - range_sum(b, s0, lo + l);
            let num = raw[s][li] - mb * sa - ma * sb + count as f64 * ma * mb;
            per_segment[s] = num / count as f64;
            num_total += num;
            n_total += count;
        }
        values.push(num_total / n_total as f64);
        let mean = per_segment.iter().sum::<f64>() / ERROR_SEGMENTS as f64;
        let var = per_segment.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (ERROR_SEGMENTS - 1) as f64;
        stderr.push((var / ERROR_SEGMENTS as f64).sqrt());
    }
    Ok((values, stderr))
}

/// Welch auto-spectrum of the fluctuations of `trace`.
pub fn noise_power_spectrum(trace: &CurrentTrace, segment_len: usize, window: Window) -> Result<SpectrumEstimate> {
    welch(&trace.samples, None, trace.dt, segment_len, window)
}

/// Welch cross-spectrum `<conj(X1) X2>`; the real part is kept in `power`.
pub fn cross_power_spectrum(
    trace1: &CurrentTrace,
    trace2: &CurrentTrace,
    segment_len: usize,
    window: Window,
) -> Result<SpectrumEstimate> {
    check_same_grid(trace1, trace2)?;
    welch(&trace1.samples, Some(&trace2.samples), trace1.dt, segment_len, window)
}

fn welch(a: &[f64], b: Option<&[f64]>, dt: f64, segment_len: usize, window: Window) -> Result<SpectrumEstimate> {
    if segment_len < MIN_SEGMENT_LEN {
        return Err(input_err(format!("segment_len must be >= {MIN_SEGMENT_LEN}, got {segment_len}")));
    }
    if segment_len > a.len() {
        return Err(input_err(format!(
            "segment_len {segment_len} exceeds trace length {}",
            a.len()
        )));
    }
    let len = segment_len;
    let bins = len / 2 + 1;
    let w = window.coefficients(len);
    let w_power: f64 = w.iter().map(|x| x * x).sum();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(len);
    let mut scratch = vec![Complex::default(); fft.get_inplace_scratch_len()];
    let mut xa = vec![Complex::default(); len];
    let mut xb = vec![Complex::default(); len];

    let load = |x: &[f64], buf: &mut [Complex<f64>]| {
        let mean = x.iter().sum::<f64>() / len as f64;
        for ((c, &v), &wk) in buf.iter_mut().zip(x).zip(&w) {
            *c = Complex::new((v - mean) * wk, 0.0);
        }
    };

    let n_segments = a.len() / len;
    let mut sum = vec![0.0; bins];
    let mut sum_sq = vec![0.0; bins];
    let mut sum_imag = vec![0.0; bins];
    for s in 0..n_segments {
        let range = s * len..(s + 1) * len;
        load(&a[range.clone()], &mut xa);
        fft.process_with_scratch(&mut xa, &mut scratch);
        if let Some(b) = b {
            load(&b[range], &mut xb);
            fft.process_with_scratch(&mut xb, &mut scratch);
        }
        for k in 0..bins {
            let p = match b {
                Some(_) => xa[k].conj() * xb[k],
                None => Complex::new(xa[k].norm_sqr(), 0.0),
            };
            sum[k] += p.re;
            sum_sq[k] += p.re * p.re;
            sum_imag[k] += p.im;
        }
    }

    let fs = 1.0 / dt;
    let ns = n_segments as f64;
    let mut power = Vec::with_capacity(bins);
    let mut stderr = Vec::with_capacity(bins);
    let mut imag = Vec::with_capacity(bins);
    for k in 0..bins {
        let one_sided = if k == 0 || (len % 2 == 0 && k == len / 2) { 1.0 } else { 2.0 };
        let scale = one_sided / (fs * w_power);
        let mean = sum[k] / ns;
        let var = if n_segments > 1 {
            ((sum_sq[k] - ns * mean * mean) / (ns - 1.0)).max(0.0)
        } else {
            f64::NAN
        };
        power.push(scale * mean);
        stderr.push(scale * (var / ns).sqrt());
        imag.push(scale * sum_imag[k] / ns);
    }
    Ok(SpectrumEstimate {
        freqs: (0..bins).map(|k| k as f64 / (len as f64 * dt)).collect(),
        power,
        stderr,
        imag,
        n_segments,
        window,
    })
}

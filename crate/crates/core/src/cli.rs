//! Batch front-end: subcommands, artifact writing and exit status.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::calibration::{excess_noise_factor, uncertainty_budget, write_eta_csv, MIN_PULSE_HEIGHTS};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::pipeline::{self, render_traces, simulate_detection, Variant};

#[derive(Debug, Parser)]
#[command(name = "pdc-calib", version, about = "Correlation-based absolute calibration of photodetector efficiency")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Configuration file (TOML sections); defaults apply when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Override one key, `section.key=value`. Repeatable.
    #[arg(long = "set", global = true, value_name = "K=V")]
    pub set: Vec<String>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Root random seed.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Generate events and detector traces.
    Simulate,
    /// Estimate eta2 with both estimators.
    Calibrate,
    /// Noise and cross-power spectra with the spectral estimate.
    Spectrum,
    /// Repeat the calibration over seeded trials and itemise the uncertainty.
    Budget,
}

impl Cli {
    /// Resolved configuration: file, then `--set`, then `--seed` and `--out`.
    pub fn run_config(&self) -> Result<RunConfig> {
        let mut config = RunConfig::load(self.config.as_deref(), &self.set)?;
        if let Some(seed) = self.seed {
            config.source.rng_seed = seed;
        }
        if let Some(out) = &self.out {
            config.output.dir = out.clone();
        }
        Ok(config)
    }
}

/// Files written by a command and whether any estimate was flagged.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub flagged: bool,
    pub summary: String,
}

struct Artifacts<'a> {
    dir: &'a Path,
    outcome: Outcome,
}

impl<'a> Artifacts<'a> {
    fn new(dir: &'a Path) -> Result<Self> {
        std::fs::create_dir_all(dir)
            .map_err(|e| Error::Input(format!("cannot create output directory {}: {e}", dir.display())))?;
        Ok(Self { dir, outcome: Outcome::default() })
    }

    fn write(&mut self, name: &str, body: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
        let path = self.dir.join(name);
        let file = File::create(&path)
            .map_err(|e| Error::Input(format!("cannot write {}: {e}", path.display())))?;
        let mut w = BufWriter::new(file);
        body(&mut w)?;
        w.flush()?;
        self.outcome.files.push(path);
        Ok(())
    }

    fn finish(mut self, summary: String) -> Result<Outcome> {
        self.write("summary.txt", |w| Ok(w.write_all(summary.as_bytes())?))?;
        self.outcome.summary = summary;
        Ok(self.outcome)
    }
}

fn header(config: &RunConfig, command: &str) -> String {
    let s = &config.source;
    format!(
        "pdc-calib {command}\nsource: mode {}, seed_rate {:e}/s, pair_rate {:e}/s, stim_prob {:e}, duration {:e} s, seed {}\n\
         detectors: eta1 {}, eta2 {} (truth), pulse {:?} tau_p {:e} s, dt {:e} s\n",
        s.mode,
        s.seed_rate,
        s.pair_rate,
        s.stim_prob,
        s.duration,
        s.rng_seed,
        config.detector1.eta,
        config.detector2.eta,
        config.detector1.pulse,
        config.detector1.tau_p,
        config.sampling.dt,
    )
}

/// Source events, leading windows of both traces and all pulse heights.
pub fn cmd_simulate(config: &RunConfig) -> Result<Outcome> {
    config.validate()?;
    let run = simulate_detection(config, config.source.rng_seed)?;
    let (t1, t2) = render_traces(config, &run, Variant::nominal(config))?;
    let mut out = Artifacts::new(&config.output.dir)?;
    out.write("events.csv", |w| run.events.write_csv(w))?;
    let window = Some(config.output.trace_window);
    out.write("trace1.csv", |w| t1.write_csv(w, window, true))?;
    out.write("trace2.csv", |w| t2.write_csv(w, window, true))?;
    out.write("pulse_heights1.csv", |w| t1.write_pulse_heights_csv(w))?;
    out.write("pulse_heights2.csv", |w| t2.write_pulse_heights_csv(w))?;
    let mut s = header(config, "simulate");
    s.push_str(&format!(
        "events: beam1 {}, beam2 {}, links {}\ndetections: arm1 {} (+{} background), arm2 {} (+{} background)\n",
        run.events.beam1_times.len(),
        run.events.beam2_times.len(),
        run.events.pair_links.len(),
        run.signal1.len(),
        run.background1.len(),
        run.signal2.len(),
        run.background2.len(),
    ));
    out.finish(s)
}

fn enf_line(label: &str, charges: &[f64]) -> String {
    if charges.len() < MIN_PULSE_HEIGHTS {
        return format!("excess noise factor {label}: n/a ({} pulse heights)\n", charges.len());
    }
    match excess_noise_factor(charges) {
        Ok(e) => format!("excess noise factor {label}: {:.4} ± {:.4}\n", e.value, e.stderr),
        Err(e) => format!("excess noise factor {label}: n/a ({e})\n"),
    }
}

/// Both estimators on one simulated run.
pub fn cmd_calibrate(config: &RunConfig) -> Result<Outcome> {
    config.validate()?;
    let run = simulate_detection(config, config.source.rng_seed)?;
    let (t1, t2) = render_traces(config, &run, Variant::nominal(config))?;
    let a = pipeline::analyze(config, &t1, &t2)?;
    let mut out = Artifacts::new(&config.output.dir)?;
    out.write("corr_auto.csv", |w| a.auto1.write_csv(w))?;
    out.write("corr_cross.csv", |w| a.cross12.write_csv(w))?;
    out.write("spec_auto.csv", |w| a.autospec1.write_csv(w))?;
    out.write("spec_cross.csv", |w| a.crossspec12.write_csv(w))?;
    out.write("eta.csv", |w| write_eta_csv(w, &[a.eta_time.clone(), a.eta_spectral.clone()]))?;
    out.outcome.flagged = a.any_flagged();

    let mut s = header(config, "calibrate");
    s.push_str(&format!("detections: arm1 {}, arm2 {}\n", run.signal1.len(), run.signal2.len()));
    s.push_str(&a.eta_time.summary());
    s.push('\n');
    s.push_str(&a.eta_spectral.summary());
    s.push('\n');
    let q = |t: &crate::detector::CurrentTrace| -> Vec<f64> {
        t.detected_charges.iter().flatten().map(|&(_, q)| q).collect()
    };
    s.push_str(&enf_line("arm1", &q(&t1)));
    s.push_str(&enf_line("arm2", &q(&t2)));
    s.push_str(&format!("gain correction: {:?}\n", config.analysis.gain_correction));
    out.finish(s)
}

/// Spectra and the spectral estimate.
pub fn cmd_spectrum(config: &RunConfig) -> Result<Outcome> {
    config.validate()?;
    let mode = pipeline::calibration_mode(config)?;
    let run = simulate_detection(config, config.source.rng_seed)?;
    let (t1, t2) = render_traces(config, &run, Variant::nominal(config))?;
    let gains = pipeline::gain_stats(config, &t1, &t2)?;
    let (auto, cross) = pipeline::spectra(config, &t1, &t2)?;
    let pulse = config.detector1.pulse_shape();
    let eta = crate::calibration::estimate_eta_spectral(&auto, &cross, config.analysis.band(), &pulse, &gains, mode)?;
    let mut out = Artifacts::new(&config.output.dir)?;
    out.write("spec_auto.csv", |w| auto.write_csv(w))?;
    out.write("spec_cross.csv", |w| cross.write_csv(w))?;
    out.write("eta.csv", |w| write_eta_csv(w, std::slice::from_ref(&eta)))?;
    out.outcome.flagged = eta.flagged;
    let mut s = header(config, "spectrum");
    s.push_str(&format!(
        "welch: {} segments of {} samples, window {:?}, df {:e} Hz\nband: [{:e}, {:e}] Hz, plateau edge {:e} Hz\n",
        auto.n_segments,
        config.analysis.segment_len,
        config.analysis.window,
        auto.df(),
        config.analysis.band_lo,
        config.analysis.band_hi,
        pulse.plateau_edge(),
    ));
    s.push_str(&eta.summary());
    s.push('\n');
    out.finish(s)
}

/// Monte Carlo uncertainty budget over `budget.trials` seeds.
pub fn cmd_budget(config: &RunConfig) -> Result<Outcome> {
    config.validate()?;
    let report = uncertainty_budget(config, config.budget.trials)?;
    let mut out = Artifacts::new(&config.output.dir)?;
    out.write("budget.csv", |w| report.write_csv(w))?;
    out.outcome.flagged = report.any_flagged;
    let mut s = header(config, "budget");
    s.push_str(&report.summary());
    out.finish(s)
}

pub fn run_command(command: Command, config: &RunConfig) -> Result<Outcome> {
    match command {
        Command::Simulate => cmd_simulate(config),
        Command::Calibrate => cmd_calibrate(config),
        Command::Spectrum => cmd_spectrum(config),
        Command::Budget => cmd_budget(config),
    }
}

/// Process exit status: 0 on success, 1 when an estimate is flagged, 2 on error.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = cli.run_config().and_then(|c| run_command(cli.command, &c));
    match result {
        Ok(outcome) => {
            print!("{}", outcome.summary);
            if outcome.flagged {
                eprintln!("error: estimator flagged an unphysical result");
                1
            } else {
                0
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

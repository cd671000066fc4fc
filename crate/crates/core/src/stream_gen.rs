//! Photon event streams for the two detection arms.
//!
//! Three source models are provided:
//!
//! * **coherent**: a single Poisson stream, delivered to beam 2 only;
//! * **spontaneous**: Poisson pair creation, one photon into each beam;
//! * **stimulated**: Poisson seed photons into beam 2, each of which with
//!   probability `stim_prob` triggers one extra photon in beam 1 and one twin
//!   photon in beam 2. A beam-1 photon is then time-correlated with two beam-2
//!   photons: its twin and the seed photon that stimulated it.
//!
//! Twin timing jitter is a zero-mean Gaussian of standard deviation `tau_coh`
//! truncated so that every linked pair lies within `10 * tau_coh`.
//!
//! Emission is generated in chronological chunks of `chunk_span` seconds of
//! creation time. All photons of one creation event land in the same chunk,
//! so links never straddle a chunk boundary; photon times may spill past the
//! chunk window by at most the jitter guard band of `10 * tau_coh`.
//!
//! Draw order per creation event (all from the `SOURCE` stream):
//! coherent: gap; spontaneous: gap, jitter; stimulated: gap, uniform, and on
//! stimulation the (beam-1, twin) jitter pair. The optional spontaneous
//! background of a stimulated source uses its own stream.

use std::io::{Read, Write};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{config_err, input_err, non_negative, positive, Result};
use crate::rng::{stream_rng, streams};

/// Jitter truncation and link-distance bound, in units of `tau_coh`.
pub const JITTER_CUTOFF: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceMode {
    Coherent,
    Spontaneous,
    Stimulated,
}

impl std::fmt::Display for SourceMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SourceMode::Coherent => "coherent",
            SourceMode::Spontaneous => "spontaneous",
            SourceMode::Stimulated => "stimulated",
        })
    }
}

/// Source description for one run.
///
/// `seed_rate` is the coherent beam flux in coherent mode and the seed flux in
/// stimulated mode. In stimulated mode a non-zero `pair_rate` adds an
/// independent spontaneous pair background.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceConfig {
    pub mode: SourceMode,
    /// Spontaneous pair rate, pairs/s.
    pub pair_rate: f64,
    /// Seed (or coherent) photon flux, photons/s.
    pub seed_rate: f64,
    /// Probability that a seed photon stimulates a pair.
    pub stim_prob: f64,
    /// Twin jitter scale, s.
    pub tau_coh: f64,
    /// Run window, s.
    pub duration: f64,
    pub rng_seed: u64,
    /// Creation-time span of one generation chunk, s.
    pub chunk_span: f64,
}

impl Default for SourceConfig {
    fn default() -> Self {
        Self {
            mode: SourceMode::Stimulated,
            pair_rate: 0.0,
            seed_rate: 1e8,
            stim_prob: 1e-2,
            tau_coh: 100e-15,
            duration: 10e-3,
            rng_seed: 1,
            chunk_span: 1e-3,
        }
    }
}

impl SourceConfig {
    pub fn validate(&self) -> Result<()> {
        non_negative("pair_rate", self.pair_rate)?;
        non_negative("seed_rate", self.seed_rate)?;
        non_negative("tau_coh", self.tau_coh)?;
        positive("duration", self.duration)?;
        positive("chunk_span", self.chunk_span)?;
        if !(0.0..=1.0).contains(&self.stim_prob) {
            return Err(config_err(format!(
                "stim_prob must lie in [0, 1], got {}",
                self.stim_prob
            )));
        }
        if self.mode == SourceMode::Stimulated && self.seed_rate <= 0.0 {
            return Err(config_err("stimulated mode requires seed_rate > 0"));
        }
        Ok(())
    }
}

/// Sorted photon arrival times of both beams plus twin linkage.
///
/// `pair_links` holds `(beam-1 index, beam-2 index)` pairs sorted
/// lexicographically. Time lists are non-decreasing; exact ties can only occur
/// when `tau_coh` is zero.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PairedEventStream {
    pub beam1_times: Vec<f64>,
    pub beam2_times: Vec<f64>,
    pub pair_links: Vec<(usize, usize)>,
    pub duration: f64,
}

impl PairedEventStream {
    /// Number of links attached to each beam-1 event.
    pub fn link_multiplicity(&self) -> Vec<u8> {
        let mut counts = vec![0u8; self.beam1_times.len()];
        for &(i, _) in &self.pair_links {
            counts[i] = counts[i].saturating_add(1);
        }
        counts
    }

    /// Checks ordering, bounds and link structure. `tau_coh`, when given,
    /// also bounds the time separation of every linked pair.
    pub fn check_invariants(&self, tau_coh: Option<f64>) -> Result<()> {
        for (name, times) in [("beam1", &self.beam1_times), ("beam2", &self.beam2_times)] {
            if let Some(t) = times
                .iter()
                .find(|t| !(t.is_finite() && **t >= 0.0 && **t < self.duration))
            {
                return Err(input_err(format!("{name} time {t} outside [0, {})", self.duration)));
            }
            if times.windows(2).any(|w| w[1] < w[0]) {
                return Err(input_err(format!("{name} times are not sorted")));
            }
        }
        let mut beam2_used = vec![false; self.beam2_times.len()];
        let mut multiplicity = vec![0u8; self.beam1_times.len()];
        for &(i, j) in &self.pair_links {
            if i >= self.beam1_times.len() || j >= self.beam2_times.len() {
                return Err(input_err(format!("link ({i}, {j}) out of range")));
            }
            if std::mem::replace(&mut beam2_used[j], true) {
                return Err(input_err(format!("beam2 event {j} linked twice")));
            }
            multiplicity[i] += 1;
            if multiplicity[i] > 2 {
                return Err(input_err(format!("beam1 event {i} has more than 2 links")));
            }
            if let Some(tau) = tau_coh {
                let sep = (self.beam1_times[i] - self.beam2_times[j]).abs();
                // jittered times carry one rounding of the creation time
                let slack = 4.0 * f64::EPSILON * self.duration;
                if sep > JITTER_CUTOFF * tau + slack {
                    return Err(input_err(format!(
                        "link ({i}, {j}) separated by {sep:e} s > {JITTER_CUTOFF} tau_coh"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Writes the `(beam, time_s, link_id)` dump. Beam-1 rows carry their own
    /// index as link id when linked; beam-2 rows carry the index of their
    /// beam-1 partner. Unlinked rows use `-1`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut beam1_id = vec![-1i64; self.beam1_times.len()];
        let mut beam2_id = vec![-1i64; self.beam2_times.len()];
        for &(i, j) in &self.pair_links {
            beam1_id[i] = i as i64;
            beam2_id[j] = i as i64;
        }
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["beam", "time_s", "link_id"])?;
        for (beam, times, ids) in [(1, &self.beam1_times, &beam1_id), (2, &self.beam2_times, &beam2_id)] {
            for (t, id) in times.iter().zip(ids.iter()) {
                w.write_record([beam.to_string(), format!("{t:e}"), id.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Parses a dump written by [`write_csv`](Self::write_csv). Link ids are
    /// treated as opaque group labels: every beam-2 row links to the beam-1
    /// row carrying the same id.
    pub fn read_csv<R: Read>(reader: R, duration: f64) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            beam: u8,
            time_s: f64,
            link_id: i64,
        }
        positive("duration", duration)?;
        let mut r = csv::Reader::from_reader(reader);
        let mut beam1 = Vec::new();
        let mut beam2 = Vec::new();
        for row in r.deserialize::<Row>() {
            let row = row?;
            match row.beam {
                1 => beam1.push((row.time_s, row.link_id)),
                2 => beam2.push((row.time_s, row.link_id)),
                b => return Err(input_err(format!("unknown beam {b}"))),
            }
        }
        let mut group = std::collections::HashMap::new();
        for (i, &(_, id)) in beam1.iter().enumerate() {
            if id >= 0 && group.insert(id, i).is_some() {
                return Err(input_err(format!("link id {id} used by two beam1 rows")));
            }
        }
        let mut pair_links = Vec::new();
        for (j, &(_, id)) in beam2.iter().enumerate() {
            if id < 0 {
                continue;
            }
            match group.get(&id) {
                Some(&i) => pair_links.push((i, j)),
                None => return Err(input_err(format!("link id {id} has no beam1 row"))),
            }
        }
        pair_links.sort_unstable();
        let stream = Self {
            beam1_times: beam1.into_iter().map(|(t, _)| t).collect(),
            beam2_times: beam2.into_iter().map(|(t, _)| t).collect(),
            pair_links,
            duration,
        };
        stream.check_invariants(None)?;
        Ok(stream)
    }
}

/// Photons produced by one creation event.
#[derive(Debug, Clone, Copy)]
struct Emission {
    beam1: Option<f64>,
    beam2: [f64; 2],
    n2: usize,
}

impl Emission {
    fn single(t: f64) -> Self {
        Self { beam1: None, beam2: [t, 0.0], n2: 1 }
    }
}

/// Poisson creation clock with exponential gaps.
struct Clock {
    rng: ChaCha8Rng,
    gap: Option<Exp<f64>>,
    next: f64,
}

impl Clock {
    fn new(rate: f64, seed: u64, stream: u64) -> Self {
        let mut rng = stream_rng(seed, stream);
        let gap = (rate > 0.0).then(|| Exp::new(rate).expect("rate validated finite and > 0"));
        let next = match &gap {
            Some(g) => g.sample(&mut rng),
            None => f64::INFINITY,
        };
        Self { rng, gap, next }
    }

    fn advance(&mut self) {
        self.next += match &self.gap {
            Some(g) => g.sample(&mut self.rng),
            None => f64::INFINITY,
        };
    }
}

fn truncated_normal<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let z: f64 = rng.sample(StandardNormal);
        if z.abs() <= JITTER_CUTOFF {
            return z;
        }
    }
}

/// Jitter pair for the stimulated beam-1 photon and its twin, each within the
/// cutoff of the seed time and of each other.
fn jitter_pair<R: Rng>(rng: &mut R) -> (f64, f64) {
    loop {
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        if a.abs() <= JITTER_CUTOFF && b.abs() <= JITTER_CUTOFF && (a - b).abs() <= JITTER_CUTOFF {
            return (a, b);
        }
    }
}

/// One chronological slice of a generated stream, with chunk-local indices.
#[derive(Debug, Clone, PartialEq)]
pub struct EventChunk {
    /// Creation-time window `[start, end)` covered by this chunk.
    pub start: f64,
    pub end: f64,
    pub beam1_times: Vec<f64>,
    pub beam2_times: Vec<f64>,
    pub pair_links: Vec<(usize, usize)>,
}

/// Iterator over the chunks of a source run.
pub struct EventChunks {
    cfg: SourceConfig,
    main: Clock,
    background: Option<Clock>,
    chunk: u64,
}

impl EventChunks {
    fn emission(&mut self, t: f64) -> Option<Emission> {
        let in_window = |x: f64| x >= 0.0 && x < self.cfg.duration;
        let tau = self.cfg.tau_coh;
        let rng = &mut self.main.rng;
        match self.cfg.mode {
            SourceMode::Coherent => Some(Emission::single(t)),
            SourceMode::Spontaneous => {
                let t2 = t + tau * truncated_normal(rng);
                in_window(t2).then_some(Emission { beam1: Some(t), beam2: [t2, 0.0], n2: 1 })
            }
            SourceMode::Stimulated => {
                let u: f64 = rng.random();
                if u < self.cfg.stim_prob {
                    let (j1, j2) = jitter_pair(rng);
                    let (t1, twin) = (t + tau * j1, t + tau * j2);
                    if in_window(t1) && in_window(twin) {
                        return Some(Emission { beam1: Some(t1), beam2: [t, twin], n2: 2 });
                    }
                }
                Some(Emission::single(t))
            }
        }
    }

    fn background_emission(&mut self, t: f64) -> Option<Emission> {
        let clock = self.background.as_mut()?;
        let t2 = t + self.cfg.tau_coh * truncated_normal(&mut clock.rng);
        (t2 >= 0.0 && t2 < self.cfg.duration).then_some(Emission {
            beam1: Some(t),
            beam2: [t2, 0.0],
            n2: 1,
        })
    }
}

impl Iterator for EventChunks {
    type Item = EventChunk;

    fn next(&mut self) -> Option<EventChunk> {
        let start = self.chunk as f64 * self.cfg.chunk_span;
        if start >= self.cfg.duration {
            return None;
        }
        let end = (start + self.cfg.chunk_span).min(self.cfg.duration);
        self.chunk += 1;

        let mut emissions = Vec::new();
        while self.main.next < end {
            let t = self.main.next;
            emissions.extend(self.emission(t));
            self.main.advance();
        }
        while self.background.as_ref().is_some_and(|c| c.next < end) {
            let t = self.background.as_ref().map(|c| c.next).unwrap_or_default();
            emissions.extend(self.background_emission(t));
            if let Some(c) = self.background.as_mut() {
                c.advance();
            }
        }

        let mut beam1 = Vec::new();
        let mut beam2 = Vec::new();
        let mut links = Vec::new();
        for e in &emissions {
            let first2 = beam2.len();
            beam2.extend_from_slice(&e.beam2[..e.n2]);
            if let Some(t1) = e.beam1 {
                let i = beam1.len();
                beam1.push(t1);
                links.extend((first2..beam2.len()).map(|j| (i, j)));
            }
        }
        let (beam1_times, beam2_times, pair_links) = assemble(beam1, beam2, links);
        Some(EventChunk { start, end, beam1_times, beam2_times, pair_links })
    }
}

/// Sorts both time lists (stable) and remaps link indices accordingly.
fn assemble(
    beam1: Vec<f64>,
    beam2: Vec<f64>,
    links: Vec<(usize, usize)>,
) -> (Vec<f64>, Vec<f64>, Vec<(usize, usize)>) {
    fn sort_with_map(times: Vec<f64>) -> (Vec<f64>, Vec<usize>) {
        let mut order: Vec<usize> = (0..times.len()).collect();
        order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
        let mut new_index = vec![0; times.len()];
        for (new, &old) in order.iter().enumerate() {
            new_index[old] = new;
        }
        (order.iter().map(|&i| times[i]).collect(), new_index)
    }
    let (beam1, map1) = sort_with_map(beam1);
    let (beam2, map2) = sort_with_map(beam2);
    let mut links: Vec<(usize, usize)> = links.into_iter().map(|(i, j)| (map1[i], map2[j])).collect();
    links.sort_unstable();
    (beam1, beam2, links)
}

/// Starts chunked generation for `config`.
pub fn event_chunks(config: &SourceConfig) -> Result<EventChunks> {
    config.validate()?;
    let rate = match config.mode {
        SourceMode::Coherent | SourceMode::Stimulated => config.seed_rate,
        SourceMode::Spontaneous => config.pair_rate,
    };
    let background = (config.mode == SourceMode::Stimulated && config.pair_rate > 0.0).then(|| {
        Clock::new(config.pair_rate, config.rng_seed, streams::SPONTANEOUS_BACKGROUND)
    });
    Ok(EventChunks {
        cfg: config.clone(),
        main: Clock::new(rate, config.rng_seed, streams::SOURCE),
        background,
        chunk: 0,
    })
}

/// Generates the full stream for `config` by merging its chunks.
pub fn generate(config: &SourceConfig) -> Result<PairedEventStream> {
    let mut beam1 = Vec::new();
    let mut beam2 = Vec::new();
    let mut links = Vec::new();
    for chunk in event_chunks(config)? {
        let (o1, o2) = (beam1.len(), beam2.len());
        beam1.extend_from_slice(&chunk.beam1_times);
        beam2.extend_from_slice(&chunk.beam2_times);
        links.extend(chunk.pair_links.iter().map(|&(i, j)| (i + o1, j + o2)));
    }
    let (beam1_times, beam2_times, pair_links) = assemble(beam1, beam2, links);
    Ok(PairedEventStream { beam1_times, beam2_times, pair_links, duration: config.duration })
}

/// Poisson stream at `rate` for `duration`, delivered to beam 2.
pub fn gen_coherent(rate: f64, duration: f64, rng_seed: u64) -> Result<PairedEventStream> {
    let config = SourceConfig {
        mode: SourceMode::Coherent,
        seed_rate: rate,
        duration,
        rng_seed,
        chunk_span: duration,
        ..SourceConfig::default()
    };
    generate(&config)
}

pub fn gen_spontaneous(config: &SourceConfig) -> Result<PairedEventStream> {
    if config.mode != SourceMode::Spontaneous {
        return Err(config_err(format!("gen_spontaneous called with mode {}", config.mode)));
    }
    generate(config)
}

pub fn gen_stimulated(config: &SourceConfig) -> Result<PairedEventStream> {
    if config.mode != SourceMode::Stimulated {
        return Err(config_err(format!("gen_stimulated called with mode {}", config.mode)));
    }
    generate(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spontaneous(pair_rate: f64, duration: f64, seed: u64) -> SourceConfig {
        SourceConfig {
            mode: SourceMode::Spontaneous,
            pair_rate,
            seed_rate: 0.0,
            duration,
            rng_seed: seed,
            ..SourceConfig::default()
        }
    }

    #[test]
    fn zero_rate_coherent_is_empty() {
        let s = gen_coherent(0.0, 1.0, 3).unwrap();
        assert!(s.beam1_times.is_empty() && s.beam2_times.is_empty() && s.pair_links.is_empty());
    }

    #[test]
    fn coherent_is_deterministic() {
        let a = gen_coherent(1e6, 1e-3, 11).unwrap();
        let b = gen_coherent(1e6, 1e-3, 11).unwrap();
        assert_eq!(a, b);
        assert!(a.beam1_times.is_empty());
        assert!(a.pair_links.is_empty());
    }

    #[test]
    fn coherent_counts_follow_poisson() {
        // mean and variance of N over 200 seeds against rate*duration = 1000
        let counts: Vec<f64> = (0..200)
            .map(|s| gen_coherent(1e6, 1e-3, s).unwrap().beam2_times.len() as f64)
            .collect();
        let n = counts.len() as f64;
        let mean = counts.iter().sum::<f64>() / n;
        let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((mean - 1000.0).abs() < 3.0 * (1000.0f64 / n).sqrt(), "mean {mean}");
        // sample variance of a Poisson(1000) sample has sd ~ 1000*sqrt(2/n)
        assert!((var - 1000.0).abs() < 4.0 * 1000.0 * (2.0 / n).sqrt(), "var {var}");
        for c in &counts {
            assert!((c - 1000.0).abs() < 5.0 * 1000f64.sqrt());
        }
    }

    #[test]
    fn rejects_bad_config() {
        assert!(gen_coherent(-1.0, 1.0, 0).is_err());
        assert!(gen_coherent(f64::NAN, 1.0, 0).is_err());
        assert!(gen_coherent(1.0, 0.0, 0).is_err());
        assert!(gen_coherent(1.0, f64::INFINITY, 0).is_err());
        let mut c = SourceConfig { stim_prob: 1.5, ..SourceConfig::default() };
        assert!(matches!(generate(&c), Err(crate::Error::Config(_))));
        c.stim_prob = 0.1;
        c.seed_rate = 0.0;
        assert!(matches!(gen_stimulated(&c), Err(crate::Error::Config(_))));
        assert!(gen_spontaneous(&SourceConfig::default()).is_err());
    }

    #[test]
    fn spontaneous_zero_rate_is_empty() {
        let s = gen_spontaneous(&spontaneous(0.0, 1e-3, 1)).unwrap();
        assert!(s.beam1_times.is_empty() && s.beam2_times.is_empty());
    }

    #[test]
    fn spontaneous_beams_have_equal_counts_and_single_links() {
        let cfg = spontaneous(1e7, 10e-3, 5);
        let s = gen_spontaneous(&cfg).unwrap();
        assert_eq!(s.beam1_times.len(), s.beam2_times.len());
        assert_eq!(s.pair_links.len(), s.beam1_times.len());
        assert!(s.link_multiplicity().iter().all(|&m| m == 1));
        s.check_invariants(Some(cfg.tau_coh)).unwrap();
    }

    #[test]
    fn spontaneous_jitter_std_matches_tau_coh() {
        let cfg = spontaneous(1e7, 20e-3, 9);
        let s = gen_spontaneous(&cfg).unwrap();
        let d: Vec<f64> = s
            .pair_links
            .iter()
            .map(|&(i, j)| s.beam2_times[j] - s.beam1_times[i])
            .collect();
        assert!(d.len() >= 100_000);
        let n = d.len() as f64;
        let mean = d.iter().sum::<f64>() / n;
        let sd = (d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((sd / cfg.tau_coh - 1.0).abs() < 0.02, "sd {sd:e}");
    }

    #[test]
    fn stimulated_without_stimulation_is_pure_seed() {
        let cfg = SourceConfig { stim_prob: 0.0, duration: 1e-3, ..SourceConfig::default() };
        let s = gen_stimulated(&cfg).unwrap();
        assert!(s.beam1_times.is_empty());
        assert!(s.pair_links.is_empty());
        let n2 = s.beam2_times.len() as f64;
        assert!((n2 - 1e5).abs() < 5.0 * 1e5f64.sqrt(), "n2 {n2}");
    }

    #[test]
    fn stimulated_counts_follow_thinned_poisson() {
        let cfg = SourceConfig { seed_rate: 1e8, stim_prob: 1e-3, duration: 10e-3, ..SourceConfig::default() };
        let s = gen_stimulated(&cfg).unwrap();
        let n1 = s.beam1_times.len() as f64;
        assert!((n1 - 1e3).abs() < 4.0 * 1e3f64.sqrt(), "n1 {n1}");
        assert_eq!(s.pair_links.len(), 2 * s.beam1_times.len());
        assert!(s.link_multiplicity().iter().all(|&m| m == 2));
        let seeds = s.beam2_times.len() - s.beam1_times.len();
        assert!((seeds as f64 - 1e6).abs() < 5.0 * 1e3);
        s.check_invariants(Some(cfg.tau_coh)).unwrap();
    }

    #[test]
    fn chunking_does_not_change_the_stream() {
        let base = SourceConfig { duration: 2e-3, stim_prob: 0.05, seed_rate: 1e7, ..SourceConfig::default() };
        let a = generate(&SourceConfig { chunk_span: 2e-3, ..base.clone() }).unwrap();
        let b = generate(&SourceConfig { chunk_span: 1.7e-4, ..base }).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn chunks_keep_links_local() {
        let cfg = SourceConfig {
            duration: 1e-3,
            chunk_span: 1e-4,
            tau_coh: 1e-9,
            stim_prob: 0.1,
            seed_rate: 1e7,
            ..SourceConfig::default()
        };
        let mut n = 0;
        for chunk in event_chunks(&cfg).unwrap() {
            n += 1;
            let guard = JITTER_CUTOFF * cfg.tau_coh;
            for &(i, j) in &chunk.pair_links {
                assert!(i < chunk.beam1_times.len() && j < chunk.beam2_times.len());
            }
            for t in chunk.beam1_times.iter().chain(&chunk.beam2_times) {
                assert!(*t >= chunk.start - guard && *t < chunk.end + guard);
            }
        }
        assert_eq!(n, 10);
    }

    #[test]
    fn background_pairs_in_stimulated_mode() {
        let cfg = SourceConfig { pair_rate: 1e6, duration: 1e-3, ..SourceConfig::default() };
        let s = gen_stimulated(&cfg).unwrap();
        let m = s.link_multiplicity();
        assert!(m.iter().any(|&x| x == 1) && m.iter().any(|&x| x == 2));
        s.check_invariants(Some(cfg.tau_coh)).unwrap();
    }

    #[test]
    fn csv_dump_round_trips() {
        let cfg = SourceConfig { duration: 1e-5, ..SourceConfig::default() };
        let s = generate(&cfg).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("beam,time_s,link_id\n"));
        let back = PairedEventStream::read_csv(&buf[..], cfg.duration).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn read_csv_rejects_dangling_links() {
        let text = "beam,time_s,link_id\n1,1e-6,0\n2,2e-6,7\n";
        assert!(PairedEventStream::read_csv(text.as_bytes(), 1e-3).is_err());
        let text = "beam,time_s,link_id\n1,2e-6,-1\n1,1e-6,-1\n";
        assert!(PairedEventStream::read_csv(text.as_bytes(), 1e-3).is_err());
    }
}

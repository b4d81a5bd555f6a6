//! P-tone filter bank over a time grid: pitchgrams, chromagrams and their container.

mod container;
mod freq;
mod parallel;
mod time;

pub use container::{read_container, write_container, write_csv, Container};
pub use freq::{pitchgram_freq, spectral_harmonicity};
pub use parallel::thread_count;
pub use time::{pitchgram_time, pitchgram_time_reference};

use crate::config::AnalysisConfig;
use crate::error::{Error, Result};
use crate::signal_io::AudioBuffer;

pub use crate::bident::KernelKind;

/// `f0 = tuning·2^((p − 69)/12)`.
pub fn midi_to_freq(pitch: f64, tuning_hz: f64) -> f64 {
    tuning_hz * 2f64.powf((pitch - 69.0) / 12.0)
}

/// Contiguous range of MIDI pitches mapped to comb periods at one sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct PitchGrid {
    lo: i32,
    hi: i32,
    tuning_hz: f64,
    sample_rate_hz: u32,
}

impl PitchGrid {
    pub fn new(lo: i32, hi: i32, tuning_hz: f64, sample_rate_hz: u32) -> Result<Self> {
        if hi < lo {
            return Err(Error::EmptyGrid);
        }
        if !(tuning_hz > 0.0 && tuning_hz.is_finite()) {
            return Err(Error::InvalidParameter(format!("tuning must be positive, got {tuning_hz}")));
        }
        if sample_rate_hz == 0 {
            return Err(Error::InvalidParameter("sample rate must be positive".into()));
        }
        let grid = Self { lo, hi, tuning_hz, sample_rate_hz };
        let f_hi = grid.freq(hi);
        if f_hi >= sample_rate_hz as f64 / 4.0 {
            return Err(Error::InvalidParameter(format!(
                "pitch {hi} ({f_hi:.1} Hz) leaves no room for its second harmonic below {} Hz",
                sample_rate_hz as f64 / 4.0
            )));
        }
        if grid.period(hi) < 2 {
            return Err(Error::InvalidParameter(format!("pitch {hi} has a period under two samples")));
        }
        Ok(grid)
    }

    /// Grid described by an analysis configuration at the given sample rate.
    pub fn from_config(cfg: &AnalysisConfig, sample_rate_hz: u32) -> Result<Self> {
        Self::new(cfg.pitch_lo, cfg.pitch_hi, cfg.tuning_hz, sample_rate_hz)
    }

    pub fn lo(&self) -> i32 {
        self.lo
    }

    pub fn hi(&self) -> i32 {
        self.hi
    }

    pub fn len(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn pitches(&self) -> impl Iterator<Item = i32> + '_ {
        self.lo..=self.hi
    }

    pub fn tuning_hz(&self) -> f64 {
        self.tuning_hz
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn freq(&self, pitch: i32) -> f64 {
        midi_to_freq(pitch as f64, self.tuning_hz)
    }

    /// Nearest-integer period `N0 = round(fs/f0)`.
    pub fn period(&self, pitch: i32) -> usize {
        (self.sample_rate_hz as f64 / self.freq(pitch)).round() as usize
    }

    pub fn periods(&self) -> Vec<usize> {
        self.pitches().map(|p| self.period(p)).collect()
    }

    /// Longest period on the grid (lowest pitch).
    pub fn max_period(&self) -> usize {
        self.period(self.lo)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, serde::Deserialize, serde::Serialize)]
pub enum Variant {
    /// Scores carry the signal power through `η` and the raw ACF.
    #[default]
    #[serde(rename = "weighted")]
    PowerWeighted,
    /// Scores computed from the normalized ACF, independent of input gain.
    #[serde(rename = "invariant")]
    PowerInvariant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, serde::Deserialize, serde::Serialize)]
pub enum Domain {
    #[default]
    #[serde(rename = "time")]
    Time,
    #[serde(rename = "freq")]
    Frequency,
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "weighted" => Ok(Self::PowerWeighted),
            "invariant" => Ok(Self::PowerInvariant),
            other => Err(Error::InvalidParameter(format!("unknown variant {other:?}"))),
        }
    }
}

impl std::str::FromStr for Domain {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "time" => Ok(Self::Time),
            "freq" | "frequency" => Ok(Self::Frequency),
            other => Err(Error::InvalidParameter(format!("unknown domain {other:?}"))),
        }
    }
}

/// Frames × pitches score matrix `Y(m, p)`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Pitchgram {
    scores: Vec<f64>,
    frames: usize,
    first_pitch: i32,
    pitch_count: usize,
    hop: usize,
    sample_rate_hz: u32,
    variant: Variant,
    domain: Domain,
    kind: KernelKind,
}

/// Grid and analysis tags shared by a pitchgram's rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PitchgramMeta {
    pub first_pitch: i32,
    pub pitch_count: usize,
    pub hop: usize,
    pub sample_rate_hz: u32,
    pub variant: Variant,
    pub domain: Domain,
    pub kind: KernelKind,
}

impl Pitchgram {
    pub fn new(scores: Vec<f64>, meta: PitchgramMeta) -> Result<Self> {
        if meta.pitch_count == 0 {
            return Err(Error::EmptyGrid);
        }
        if scores.is_empty() || scores.len() % meta.pitch_count != 0 {
            return Err(Error::ShapeMismatch(format!(
                "{} scores do not fill rows of {} pitches",
                scores.len(),
                meta.pitch_count
            )));
        }
        if let Some(bad) = scores.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite score at index {bad}")));
        }
        Ok(Self {
            frames: scores.len() / meta.pitch_count,
            scores,
            first_pitch: meta.first_pitch,
            pitch_count: meta.pitch_count,
            hop: meta.hop,
            sample_rate_hz: meta.sample_rate_hz,
            variant: meta.variant,
            domain: meta.domain,
            kind: meta.kind,
        })
    }

    pub fn meta(&self) -> PitchgramMeta {
        PitchgramMeta {
            first_pitch: self.first_pitch,
            pitch_count: self.pitch_count,
            hop: self.hop,
            sample_rate_hz: self.sample_rate_hz,
            variant: self.variant,
            domain: self.domain,
            kind: self.kind,
        }
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn pitch_count(&self) -> usize {
        self.pitch_count
    }

    pub fn first_pitch(&self) -> i32 {
        self.first_pitch
    }

    pub fn last_pitch(&self) -> i32 {
        self.first_pitch + self.pitch_count as i32 - 1
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    /// Seconds between frames.
    pub fn frame_period_s(&self) -> f64 {
        self.hop as f64 / self.sample_rate_hz as f64
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn row(&self, frame: usize) -> &[f64] {
        &self.scores[frame * self.pitch_count..(frame + 1) * self.pitch_count]
    }

    pub fn get(&self, frame: usize, index: usize) -> f64 {
        self.scores[frame * self.pitch_count + index]
    }

    /// Score at a MIDI pitch, `None` off the grid.
    pub fn at(&self, frame: usize, pitch: i32) -> Option<f64> {
        self.index_of(pitch).map(|i| self.get(frame, i))
    }

    pub fn index_of(&self, pitch: i32) -> Option<usize> {
        let i = pitch - self.first_pitch;
        (i >= 0 && (i as usize) < self.pitch_count).then_some(i as usize)
    }

    pub fn column(&self, index: usize) -> Vec<f64> {
        (0..self.frames).map(|m| self.get(m, index)).collect()
    }

    /// Pitch with the highest score in a frame.
    pub fn argmax(&self, frame: usize) -> i32 {
        let row = self.row(frame);
        let best = row
            .iter()
            .enumerate()
            .fold(0, |best, (i, v)| if *v > row[best] { i } else { best });
        self.first_pitch + best as i32
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.scores.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn same_shape(&self, other: &Pitchgram) -> bool {
        self.frames == other.frames
            && self.pitch_count == other.pitch_count
            && self.first_pitch == other.first_pitch
            && self.hop == other.hop
            && self.sample_rate_hz == other.sample_rate_hz
    }

    /// Same grid with scores multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self { scores: self.scores.iter().map(|v| v * factor).collect(), ..self.clone() }
    }
}

/// Frames × 12 pitch-class matrix `Z(m, ζ)`, with `ζ = 0` for C.
#[derive(Debug, Clone, PartialEq)]
pub struct Chromagram {
    scores: Vec<f64>,
    frames: usize,
    hop: usize,
    sample_rate_hz: u32,
}

impl Chromagram {
    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn row(&self, frame: usize) -> &[f64] {
        &self.scores[frame * 12..(frame + 1) * 12]
    }

    pub fn argmax(&self, frame: usize) -> usize {
        let row = self.row(frame);
        row.iter().enumerate().fold(0, |best, (i, v)| if *v > row[best] { i } else { best })
    }
}

/// Folds a pitchgram over octaves. Intended for the sinc-kind pitchgram.
pub fn chromagram(pg: &Pitchgram) -> Result<Chromagram> {
    if pg.pitch_count < 12 {
        return Err(Error::InvalidParameter(format!(
            "chromagram needs at least one octave, grid has {} pitches",
            pg.pitch_count
        )));
    }
    let mut scores = vec![0.0; pg.frames * 12];
    for m in 0..pg.frames {
        for (i, v) in pg.row(m).iter().enumerate() {
            let class = (pg.first_pitch + i as i32).rem_euclid(12) as usize;
            scores[m * 12 + class] += v;
        }
    }
    Ok(Chromagram { scores, frames: pg.frames, hop: pg.hop, sample_rate_hz: pg.sample_rate_hz })
}

/// Elementwise product of the two variants divided by its Frobenius norm.
pub fn posterior_pitchgram(weighted: &Pitchgram, invariant: &Pitchgram) -> Result<Pitchgram> {
    if !weighted.same_shape(invariant) {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} vs {}x{}",
            weighted.frames, weighted.pitch_count, invariant.frames, invariant.pitch_count
        )));
    }
    let product: Vec<f64> = weighted.scores.iter().zip(&invariant.scores).map(|(a, b)| a * b).collect();
    let norm = product.iter().map(|v| v * v).sum::<f64>().sqrt();
    let scores = if norm > 0.0 { product.iter().map(|v| v / norm).collect() } else { product };
    Ok(Pitchgram { scores, variant: Variant::PowerWeighted, ..weighted.clone() })
}

/// Pitchgram in the configured domain and variant.
pub fn pitchgram(buf: &AudioBuffer, grid: &PitchGrid, cfg: &AnalysisConfig) -> Result<Pitchgram> {
    match cfg.domain {
        Domain::Time => pitchgram_time(buf, grid, cfg),
        Domain::Frequency => pitchgram_freq(buf, grid, cfg),
    }
}

/// Both variants `(weighted, invariant)` from one analysis pass in the configured domain.
pub fn pitchgram_pair(buf: &AudioBuffer, grid: &PitchGrid, cfg: &AnalysisConfig) -> Result<(Pitchgram, Pitchgram)> {
    match cfg.domain {
        Domain::Time => time::pair(buf, grid, cfg),
        Domain::Frequency => freq::pair(buf, grid, cfg),
    }
}

/// Copies `len` samples starting at `start` (may be negative), zero outside the signal.
pub(crate) fn extract_frame(samples: &[f64], start: isize, out: &mut [f64]) {
    out.fill(0.0);
    let len = out.len() as isize;
    let lo = start.max(0);
    let hi = (start + len).min(samples.len() as isize);
    if hi > lo {
        let dst = (lo - start) as usize;
        out[dst..dst + (hi - lo) as usize].copy_from_slice(&samples[lo as usize..hi as usize]);
    }
}

/// Number of frames whose centre `m·hop` lies inside the signal.
pub(crate) fn frame_count(len: usize, hop: usize) -> usize {
    len.div_ceil(hop)
}

//! Audio ingestion, MIDI exchange and synthetic fixtures.

mod midi;
mod synth;
mod wav;

pub use midi::{export_midi, import_midi, import_midi_seconds, EXPORT_BPM, TICKS_PER_QUARTER};
pub use synth::{parse_tone_specs, synthesize, Synthesis, ToneFile, ToneSpec};
pub use wav::{load_audio, save_wav, WavFormat};

use crate::error::{Error, Result};

/// Default reference level used before transcription.
pub const DEFAULT_TARGET_DBFS: f64 = -20.0;

/// Mono sample sequence at a fixed rate, full scale ±1.0.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f64>,
    sample_rate_hz: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self> {
        if sample_rate_hz == 0 {
            return Err(Error::InvalidParameter("sample rate must be positive".into()));
        }
        if samples.is_empty() {
            return Err(Error::EmptyAudio);
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite sample at index {i}")));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    pub fn rms(&self) -> f64 {
        let sum: f64 = self.samples.iter().map(|s| s * s).sum();
        (sum / self.samples.len() as f64).sqrt()
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    /// Multiplies every sample by `gain`.
    pub fn scaled(&self, gain: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|s| s * gain).collect(),
            sample_rate_hz: self.sample_rate_hz,
        }
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}

/// A transcribed or reference note on the analysis frame grid.
///
/// `offset_frame` is exclusive: the note sounds on frames `onset_frame..offset_frame`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NoteEvent {
    pub pitch: u8,
    pub onset_frame: usize,
    pub offset_frame: usize,
    pub velocity: u8,
}

impl NoteEvent {
    pub fn duration_frames(&self) -> usize {
        self.offset_frame.saturating_sub(self.onset_frame)
    }

    pub fn to_timed(&self, frame_period_s: f64) -> TimedNote {
        TimedNote {
            pitch: self.pitch,
            onset_s: self.onset_frame as f64 * frame_period_s,
            offset_s: self.offset_frame as f64 * frame_period_s,
            velocity: self.velocity,
        }
    }
}

/// A note with absolute times in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimedNote {
    pub pitch: u8,
    pub onset_s: f64,
    pub offset_s: f64,
    pub velocity: u8,
}

impl TimedNote {
    /// Quantizes onset and offset to the nearest frame of a grid with the given period.
    pub fn to_frames(&self, frame_period_s: f64) -> NoteEvent {
        let onset_frame = (self.onset_s / frame_period_s).round().max(0.0) as usize;
        let offset_frame = (self.offset_s / frame_period_s).round().max(0.0) as usize;
        NoteEvent {
            pitch: self.pitch,
            onset_frame,
            offset_frame: offset_frame.max(onset_frame + 1),
            velocity: self.velocity,
        }
    }
}

/// Scales the buffer so that its RMS equals `10^(target_dbfs/20)`.
pub fn normalize_rms(buf: &AudioBuffer, target_dbfs: f64) -> Result<AudioBuffer> {
    let rms = buf.rms();
    if rms == 0.0 {
        return Err(Error::SilentInput);
    }
    let target = 10f64.powf(target_dbfs / 20.0);
    Ok(buf.scaled(target / rms))
}

/// Checks that no two notes of the same pitch overlap in time.
pub(crate) fn check_non_overlapping(notes: &[NoteEvent]) -> Result<()> {
    let mut sorted: Vec<&NoteEvent> = notes.iter().collect();
    sorted.sort_by_key(|n| (n.pitch, n.onset_frame, n.offset_frame));
    for pair in sorted.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if a.pitch == b.pitch && b.onset_frame < a.offset_frame {
            return Err(Error::OverlappingNotes {
                pitch: a.pitch,
                first_on: a.onset_frame,
                first_off: a.offset_frame,
                second_on: b.onset_frame,
            });
        }
    }
    Ok(())
}

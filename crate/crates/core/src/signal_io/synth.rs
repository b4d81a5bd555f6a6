use std::f64::consts::PI;

use super::{AudioBuffer, TimedNote};
use crate::error::{Error, Result};
use crate::pitchgram::midi_to_freq;

const RELEASE_S: f64 = 0.005;

/// One harmonic tone of a synthetic fixture.
#[derive(Debug, Clone, PartialEq)]
pub struct ToneSpec {
    pub pitch: u8,
    pub onset_s: f64,
    pub duration_s: f64,
    pub partial_count: usize,
    /// Amplitude ratio of harmonic k+1 to harmonic k.
    pub partial_decay_ratio: f64,
    /// Exponential envelope decay constant in 1/s (0 = stationary).
    pub envelope_decay: f64,
    /// Peak amplitude of the fundamental.
    pub amplitude: f64,
    pub vibrato_extent_cents: f64,
    pub vibrato_rate_hz: f64,
}

impl ToneSpec {
    pub fn new(pitch: u8, onset_s: f64, duration_s: f64) -> Self {
        Self {
            pitch,
            onset_s,
            duration_s,
            partial_count: 8,
            partial_decay_ratio: 0.6,
            envelope_decay: 1.0,
            amplitude: 0.5,
            vibrato_extent_cents: 0.0,
            vibrato_rate_hz: 0.0,
        }
    }

    pub fn partials(mut self, count: usize, decay_ratio: f64) -> Self {
        self.partial_count = count;
        self.partial_decay_ratio = decay_ratio;
        self
    }

    pub fn envelope(mut self, decay_per_s: f64) -> Self {
        self.envelope_decay = decay_per_s;
        self
    }

    pub fn amplitude(mut self, amplitude: f64) -> Self {
        self.amplitude = amplitude;
        self
    }

    pub fn vibrato(mut self, extent_cents: f64, rate_hz: f64) -> Self {
        self.vibrato_extent_cents = extent_cents;
        self.vibrato_rate_hz = rate_hz;
        self
    }

    pub fn velocity(&self) -> u8 {
        (self.amplitude * 127.0).round().clamp(1.0, 127.0) as u8
    }

    fn validate(&self, sample_rate_hz: u32) -> Result<()> {
        if self.partial_count == 0 {
            return Err(Error::InvalidParameter("partial_count must be at least 1".into()));
        }
        if !(self.partial_decay_ratio > 0.0 && self.partial_decay_ratio <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "partial_decay_ratio {} outside (0, 1]",
                self.partial_decay_ratio
            )));
        }
        if !(self.duration_s > 0.0) || self.onset_s < 0.0 {
            return Err(Error::InvalidParameter("tone needs onset >= 0 and duration > 0".into()));
        }
        if self.pitch > 127 {
            return Err(Error::InvalidParameter(format!("pitch {} beyond MIDI range", self.pitch)));
        }
        let nyquist = sample_rate_hz as f64 / 2.0;
        let top = midi_to_freq(self.pitch as f64, 440.0)
            * self.partial_count as f64
            * 2f64.powf(self.vibrato_extent_cents.abs() / 1200.0);
        if top >= nyquist {
            return Err(Error::Aliasing {
                pitch: self.pitch as i32,
                partial: self.partial_count,
                freq_hz: top,
                nyquist_hz: nyquist,
            });
        }
        Ok(())
    }
}

/// Synthesized fixture audio together with its ground-truth notes.
#[derive(Debug, Clone)]
pub struct Synthesis {
    pub buffer: AudioBuffer,
    pub notes: Vec<TimedNote>,
}

/// Renders a sum of harmonic tones.
///
/// Partial k (1-based) has frequency k·f0 and amplitude `ratio^(k-1)` relative to the
/// fundamental, all phases start at zero, and each tone ends with a short linear release.
pub fn synthesize(specs: &[ToneSpec], sample_rate_hz: u32, total_s: f64) -> Result<Synthesis> {
    if sample_rate_hz == 0 || !(total_s > 0.0) {
        return Err(Error::InvalidParameter("sample rate and total duration must be positive".into()));
    }
    for s in specs {
        s.validate(sample_rate_hz)?;
    }
    let fs = sample_rate_hz as f64;
    let len = (total_s * fs).round() as usize;
    let mut out = vec![0.0; len];
    for spec in specs {
        let start = (spec.onset_s * fs).round() as usize;
        let end = (((spec.onset_s + spec.duration_s) * fs).round() as usize).min(len);
        if start >= end {
            continue;
        }
        let f0 = midi_to_freq(spec.pitch as f64, 440.0);
        let release = (RELEASE_S * fs).round().max(1.0);
        let mut phase = 0.0f64; // fundamental phase in cycles
        for (i, slot) in out[start..end].iter_mut().enumerate() {
            let t = i as f64 / fs;
            let mut sample = 0.0;
            let mut amp = 1.0;
            for k in 1..=spec.partial_count {
                sample += amp * (2.0 * PI * k as f64 * phase).sin();
                amp *= spec.partial_decay_ratio;
            }
            let remaining = (end - start - i) as f64;
            let gate = (remaining / release).min(1.0);
            *slot += spec.amplitude * (-spec.envelope_decay * t).exp() * gate * sample;

            let inst = if spec.vibrato_extent_cents != 0.0 {
                let cents = spec.vibrato_extent_cents * (2.0 * PI * spec.vibrato_rate_hz * t).sin();
                f0 * 2f64.powf(cents / 1200.0)
            } else {
                f0
            };
            phase = (phase + inst / fs).fract();
        }
    }
    let mut notes: Vec<TimedNote> = specs
        .iter()
        .map(|s| TimedNote {
            pitch: s.pitch,
            onset_s: s.onset_s,
            offset_s: (s.onset_s + s.duration_s).min(total_s),
            velocity: s.velocity(),
        })
        .collect();
    notes.sort_by(|a, b| a.onset_s.total_cmp(&b.onset_s).then(a.pitch.cmp(&b.pitch)));
    Ok(Synthesis {
        buffer: AudioBuffer::new(out, sample_rate_hz)?,
        notes,
    })
}

/// Parsed tone-spec file: optional global settings plus one spec per stanza.
#[derive(Debug, Clone, PartialEq)]
pub struct ToneFile {
    pub sample_rate_hz: Option<u32>,
    pub total_s: Option<f64>,
    pub tones: Vec<ToneSpec>,
}

/// Parses the line-oriented `key = value` tone format.
///
/// Stanzas are separated by blank lines and `#` starts a comment. A stanza
/// without `pitch` holds global settings (`sample_rate`, `total`).
pub fn parse_tone_specs(text: &str) -> Result<ToneFile> {
    let mut file = ToneFile { sample_rate_hz: None, total_s: None, tones: Vec::new() };
    let mut stanza: Vec<(usize, String, String)> = Vec::new();

    fn flush(stanza: &mut Vec<(usize, String, String)>, file: &mut ToneFile) -> Result<()> {
        if stanza.is_empty() {
            return Ok(());
        }
        let first_line = stanza[0].0;
        let num = |line: usize, v: &str| -> Result<f64> {
            v.parse::<f64>().map_err(|_| Error::ToneSpec { line, reason: format!("not a number: {v}") })
        };
        if stanza.iter().all(|(_, k, _)| k != "pitch") {
            for (line, k, v) in stanza.drain(..) {
                match k.as_str() {
                    "sample_rate" => file.sample_rate_hz = Some(num(line, &v)? as u32),
                    "total" => file.total_s = Some(num(line, &v)?),
                    _ => return Err(Error::ToneSpec { line, reason: format!("unknown key '{k}'") }),
                }
            }
            return Ok(());
        }
        let mut spec = ToneSpec::new(0, 0.0, 0.0);
        let mut seen_duration = false;
        for (line, k, v) in stanza.drain(..) {
            let x = num(line, &v)?;
            match k.as_str() {
                "pitch" => {
                    if !(0.0..=127.0).contains(&x) || x.fract() != 0.0 {
                        return Err(Error::ToneSpec { line, reason: format!("invalid MIDI pitch {v}") });
                    }
                    spec.pitch = x as u8;
                }
                "onset" => spec.onset_s = x,
                "duration" => {
                    spec.duration_s = x;
                    seen_duration = true;
                }
                "partials" => spec.partial_count = x as usize,
                "decay_ratio" => spec.partial_decay_ratio = x,
                "envelope" => spec.envelope_decay = x,
                "amplitude" => spec.amplitude = x,
                "vibrato_cents" => spec.vibrato_extent_cents = x,
                "vibrato_rate" => spec.vibrato_rate_hz = x,
                _ => return Err(Error::ToneSpec { line, reason: format!("unknown key '{k}'") }),
            }
        }
        if !seen_duration {
            return Err(Error::ToneSpec { line: first_line, reason: "missing 'duration'".into() });
        }
        file.tones.push(spec);
        Ok(())
    }

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            if raw.trim().is_empty() {
                flush(&mut stanza, &mut file)?;
            }
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::ToneSpec {
            line: line_no,
            reason: format!("expected 'key = value', got '{line}'"),
        })?;
        stanza.push((line_no, k.trim().to_string(), v.trim().to_string()));
    }
    flush(&mut stanza, &mut file)?;
    if file.tones.is_empty() {
        return Err(Error::ToneSpec { line: 0, reason: "no tones defined".into() });
    }
    Ok(file)
}

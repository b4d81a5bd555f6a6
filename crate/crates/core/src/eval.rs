//! Binary time-pitch masks, F-measure and error score.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::signal_io::TimedNote;

/// Boolean frames × pitches grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMask {
    cells: Vec<bool>,
    frames: usize,
    pitch_lo: u8,
    pitch_hi: u8,
    grid_step_s: f64,
}

impl BinaryMask {
    pub fn empty(frames: usize, pitch_lo: u8, pitch_hi: u8, grid_step_s: f64) -> Result<Self> {
        if pitch_hi < pitch_lo {
            return Err(Error::EmptyGrid);
        }
        if !(grid_step_s > 0.0 && grid_step_s.is_finite()) {
            return Err(Error::InvalidParameter(format!("grid step must be positive, got {grid_step_s}")));
        }
        let cols = (pitch_hi - pitch_lo) as usize + 1;
        Ok(Self { cells: vec![false; frames * cols], frames, pitch_lo, pitch_hi, grid_step_s })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn pitch_count(&self) -> usize {
        (self.pitch_hi - self.pitch_lo) as usize + 1
    }

    pub fn pitch_range(&self) -> (u8, u8) {
        (self.pitch_lo, self.pitch_hi)
    }

    pub fn grid_step_s(&self) -> f64 {
        self.grid_step_s
    }

    pub fn get(&self, frame: usize, pitch: u8) -> bool {
        self.cells[self.index(frame, pitch)]
    }

    pub fn set(&mut self, frame: usize, pitch: u8, value: bool) {
        let i = self.index(frame, pitch);
        self.cells[i] = value;
    }

    fn index(&self, frame: usize, pitch: u8) -> usize {
        assert!(frame < self.frames && (self.pitch_lo..=self.pitch_hi).contains(&pitch));
        frame * self.pitch_count() + (pitch - self.pitch_lo) as usize
    }

    pub fn row(&self, frame: usize) -> &[bool] {
        let c = self.pitch_count();
        &self.cells[frame * c..(frame + 1) * c]
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|c| **c).count()
    }

    fn check_same_shape(&self, other: &BinaryMask) -> Result<()> {
        if self.frames != other.frames || self.pitch_lo != other.pitch_lo || self.pitch_hi != other.pitch_hi {
            return Err(Error::ShapeMismatch(format!(
                "{} frames × {}..={} vs {} frames × {}..={}",
                self.frames, self.pitch_lo, self.pitch_hi, other.frames, other.pitch_lo, other.pitch_hi
            )));
        }
        Ok(())
    }
}

/// Per-cell velocities of the notes that activated them, zero elsewhere.
pub type VelocityMap = Vec<f64>;

/// Cell `(k, p)` is set when a note at `p` covers at least half of `[k·step, (k+1)·step)`.
pub fn notes_to_mask(notes: &[TimedNote], grid_step_s: f64, pitch_range: (u8, u8), total_s: f64) -> Result<BinaryMask> {
    Ok(notes_to_weighted_mask(notes, grid_step_s, pitch_range, total_s)?.0)
}

/// Mask plus the velocity of the note covering each set cell.
pub fn notes_to_weighted_mask(
    notes: &[TimedNote],
    grid_step_s: f64,
    pitch_range: (u8, u8),
    total_s: f64,
) -> Result<(BinaryMask, VelocityMap)> {
    let (lo, hi) = pitch_range;
    if !(total_s >= 0.0) {
        return Err(Error::InvalidParameter(format!("total duration {total_s} is negative")));
    }
    let probe = BinaryMask::empty(0, lo, hi, grid_step_s)?;
    let frames = (total_s / grid_step_s - 1e-9).ceil().max(0.0) as usize;
    let mut mask = BinaryMask { cells: vec![false; frames * probe.pitch_count()], frames, ..probe };
    let mut weights: VelocityMap = vec![0.0; mask.cells.len()];
    let half = 0.5 * grid_step_s * (1.0 - 1e-9);
    for n in notes {
        if n.pitch < lo || n.pitch > hi {
            return Err(Error::PitchOutOfRange { pitch: n.pitch, lo, hi });
        }
        let first = (n.onset_s / grid_step_s).floor().max(0.0) as usize;
        let last = ((n.offset_s / grid_step_s).ceil().max(0.0) as usize).min(frames);
        for k in first..last {
            let cell_lo = k as f64 * grid_step_s;
            let overlap = n.offset_s.min(cell_lo + grid_step_s) - n.onset_s.max(cell_lo);
            if overlap >= half {
                let i = mask.index(k, n.pitch);
                mask.cells[i] = true;
                weights[i] = weights[i].max(n.velocity as f64);
            }
        }
    }
    Ok((mask, weights))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Accuracy {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
}

/// Precision, recall and their harmonic mean over set cells.
///
/// With `weights`, every detected cell counts with its velocity in precision only.
pub fn f_measure(det: &BinaryMask, reference: &BinaryMask, weights: Option<&[f64]>) -> Result<Accuracy> {
    det.check_same_shape(reference)?;
    if let Some(w) = weights {
        if w.len() != det.cells.len() {
            return Err(Error::ShapeMismatch(format!("{} weights for {} cells", w.len(), det.cells.len())));
        }
    }
    let weight = |i: usize| weights.map_or(1.0, |w| w[i]);
    let (mut hit_w, mut det_w, mut hits) = (0.0, 0.0, 0usize);
    for (i, (&d, &r)) in det.cells.iter().zip(&reference.cells).enumerate() {
        if d {
            det_w += weight(i);
            if r {
                hit_w += weight(i);
                hits += 1;
            }
        }
    }
    let ref_count = reference.count();
    let precision = if det_w > 0.0 { hit_w / det_w } else { 0.0 };
    let recall = if ref_count > 0 { hits as f64 / ref_count as f64 } else { 0.0 };
    let f = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
    Ok(Accuracy { precision, recall, f_measure: f })
}

/// Substitution, deletion and insertion counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ErrorCounts {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
}

impl ErrorCounts {
    pub fn total(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }

    fn add_frame(&mut self, det: &[bool], reference: &[bool]) {
        let misses = det.iter().zip(reference).filter(|(d, r)| **r && !**d).count();
        let extras = det.iter().zip(reference).filter(|(d, r)| **d && !**r).count();
        let matched = misses.min(extras);
        self.substitutions += matched;
        self.deletions += misses - matched;
        self.insertions += extras - matched;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorScore {
    pub counts: ErrorCounts,
    /// `(S + D + I) / |reference|`.
    pub error_score: f64,
}

/// Word-error-rate analogue, matched frame by frame.
pub fn error_score(det: &BinaryMask, reference: &BinaryMask) -> Result<ErrorScore> {
    det.check_same_shape(reference)?;
    let ref_count = reference.count();
    if ref_count == 0 {
        return Err(Error::EmptyReference);
    }
    let mut counts = ErrorCounts::default();
    for k in 0..det.frames {
        counts.add_frame(det.row(k), reference.row(k));
    }
    Ok(ErrorScore { counts, error_score: counts.total() as f64 / ref_count as f64 })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TransitionCounts {
    /// Frames within the window of a reference onset.
    pub onset: ErrorCounts,
    /// Frames within the window of a reference offset.
    pub decay: ErrorCounts,
}

/// Error counts restricted to frames near reference note boundaries.
pub fn transition_decomposition(det: &BinaryMask, reference: &BinaryMask, window_frames: usize) -> Result<TransitionCounts> {
    det.check_same_shape(reference)?;
    if window_frames < 1 {
        return Err(Error::InvalidParameter("transition window must be at least one frame".into()));
    }
    let frames = reference.frames;
    let cols = reference.pitch_count();
    let mut near_onset = vec![false; frames];
    let mut near_decay = vec![false; frames];
    let mark = |marks: &mut Vec<bool>, k: usize| {
        for slot in &mut marks[k.saturating_sub(window_frames)..(k + window_frames + 1).min(frames)] {
            *slot = true;
        }
    };
    for k in 0..frames {
        for c in 0..cols {
            let on = reference.row(k)[c];
            let before = k > 0 && reference.row(k - 1)[c];
            let after = k + 1 < frames && reference.row(k + 1)[c];
            if on && !before {
                mark(&mut near_onset, k);
            }
            if on && !after {
                mark(&mut near_decay, k + 1);
            }
        }
    }
    let mut out = TransitionCounts::default();
    for k in 0..frames {
        if near_onset[k] {
            out.onset.add_frame(det.row(k), reference.row(k));
        }
        if near_decay[k] {
            out.decay.add_frame(det.row(k), reference.row(k));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub error_score: f64,
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    pub velocity_weighted: bool,
}

pub const CSV_HEADER: &str = "name,precision,recall,f_measure,error_score,substitutions,deletions,insertions,velocity_weighted";

impl EvalReport {
    pub fn to_key_value(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "precision={:.6}", self.precision);
        let _ = writeln!(s, "recall={:.6}", self.recall);
        let _ = writeln!(s, "f_measure={:.6}", self.f_measure);
        let _ = writeln!(s, "error_score={:.6}", self.error_score);
        let _ = writeln!(s, "substitutions={}", self.substitutions);
        let _ = writeln!(s, "deletions={}", self.deletions);
        let _ = writeln!(s, "insertions={}", self.insertions);
        let _ = writeln!(s, "velocity_weighted={}", self.velocity_weighted);
        s
    }

    pub fn to_csv_row(&self, name: &str) -> String {
        format!(
            "{name},{:.6},{:.6},{:.6},{:.6},{},{},{},{}",
            self.precision,
            self.recall,
            self.f_measure,
            self.error_score,
            self.substitutions,
            self.deletions,
            self.insertions,
            self.velocity_weighted
        )
    }
}

/// Both metrics for a detected/reference pair of masks.
pub fn evaluate(det: &BinaryMask, reference: &BinaryMask, weights: Option<&[f64]>) -> Result<EvalReport> {
    let acc = f_measure(det, reference, weights)?;
    let err = error_score(det, reference)?;
    Ok(EvalReport {
        precision: acc.precision,
        recall: acc.recall,
        f_measure: acc.f_measure,
        error_score: err.error_score,
        substitutions: err.counts.substitutions,
        deletions: err.counts.deletions,
        insertions: err.counts.insertions,
        velocity_weighted: weights.is_some(),
    })
}

/// Grid step in seconds from `"0.05s"`, `"23.2ms"` or `"<bpm>bpm:<num>/<den>"` (note value at a tempo).
pub fn parse_grid(text: &str) -> Result<f64> {
    let t = text.trim();
    let bad = || Error::InvalidParameter(format!("cannot parse grid {text:?}"));
    let step = if let Some((bpm, frac)) = t.split_once("bpm:") {
        let bpm: f64 = bpm.trim().parse().map_err(|_| bad())?;
        let (num, den) = frac.split_once('/').ok_or_else(bad)?;
        let (num, den): (f64, f64) = (num.trim().parse().map_err(|_| bad())?, den.trim().parse().map_err(|_| bad())?);
        if !(bpm > 0.0 && den > 0.0) {
            return Err(bad());
        }
        // a quarter note lasts one beat
        4.0 * 60.0 / bpm * num / den
    } else if let Some(ms) = t.strip_suffix("ms") {
        ms.trim().parse::<f64>().map_err(|_| bad())? / 1000.0
    } else if let Some(s) = t.strip_suffix('s') {
        s.trim().parse::<f64>().map_err(|_| bad())?
    } else {
        return Err(bad());
    };
    if !(step > 0.0 && step.is_finite()) {
        return Err(bad());
    }
    Ok(step)
}

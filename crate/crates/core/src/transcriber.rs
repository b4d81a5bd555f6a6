//! Decision-based note tracker over a pair of pitchgrams.
//!
//! Detection runs on the power-invariant pitchgram `Yi`, so segmentation does not
//! depend on input gain. The power-weighted pitchgram `Yw` supplies velocities, the
//! restrike (transient) marginal and a tie-breaker for ambiguous decays.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pitchgram::Pitchgram;
use crate::signal_io::NoteEvent;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SmootherKind {
    #[default]
    MovingAverage,
    Median,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VelocityMode {
    /// Weighted score at the onset frame.
    #[default]
    Onset,
    /// Weighted score summed over the note.
    Energy,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct TranscriberConfig {
    /// Onset score threshold.
    pub eps1: f64,
    /// Onset slope threshold (normalized derivative).
    pub eps2: f64,
    /// Decay score threshold. Compared against the score plus the vibrato neighbor term.
    pub eps3: f64,
    /// Decay slope threshold, negative.
    pub eps4: f64,
    /// Notes must last strictly longer than this many frames.
    pub d_min: usize,
    pub smoother: SmootherKind,
    pub smoother_len: usize,
    /// Require the slope to still be rising at the onset frame.
    pub rising_slope: bool,
    /// Suppress onsets one octave above an active note.
    pub octave_rule: bool,
    /// Restrike detection on the weighted marginal score.
    pub transient_gate: bool,
    /// Slope threshold of the marginal score for a restrike.
    pub eps_transient: f64,
    /// Consult the weighted pitchgram while the invariant score is between `eps3` and `eps1`.
    pub dual_pitchgram: bool,
    /// In the ambiguous band, a note whose weighted score fell below this fraction of its
    /// running peak is released.
    pub release_ratio: f64,
    pub velocity_mode: VelocityMode,
    pub velocity_scale: f64,
    pub velocity_offset: f64,
    /// Ignore `velocity_scale` and map the loudest note to 127.
    pub velocity_auto: bool,
}

impl Default for TranscriberConfig {
    fn default() -> Self {
        Self {
            eps1: 0.13,
            eps2: 0.05,
            eps3: 0.05,
            eps4: -0.05,
            d_min: 2,
            smoother: SmootherKind::MovingAverage,
            smoother_len: 3,
            rising_slope: false,
            octave_rule: true,
            transient_gate: true,
            eps_transient: 0.15,
            dual_pitchgram: true,
            release_ratio: 0.4,
            velocity_mode: VelocityMode::Onset,
            velocity_scale: 6000.0,
            velocity_offset: 0.0,
            velocity_auto: false,
        }
    }
}

impl TranscriberConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.eps1 > self.eps3 && self.eps3 >= 0.0) {
            return bad(format!("need eps1 > eps3 >= 0, got eps1={} eps3={}", self.eps1, self.eps3));
        }
        if !(self.eps2 > 0.0 && self.eps4 < 0.0) {
            return bad(format!("need eps2 > 0 > eps4, got eps2={} eps4={}", self.eps2, self.eps4));
        }
        if self.d_min < 1 {
            return bad("d_min must be at least 1".into());
        }
        if self.smoother_len < 3 || self.smoother_len % 2 == 0 {
            return bad(format!("smoother_len must be odd and at least 3, got {}", self.smoother_len));
        }
        if !(self.eps_transient > 0.0) {
            return bad("eps_transient must be positive".into());
        }
        if !(0.0..1.0).contains(&self.release_ratio) {
            return bad(format!("release_ratio {} outside [0, 1)", self.release_ratio));
        }
        if !self.velocity_scale.is_finite() || !self.velocity_offset.is_finite() {
            return bad("velocity map must be finite".into());
        }
        Ok(())
    }
}

/// Causal smoother over the most recent `len` values, zeros before the first.
#[derive(Debug, Clone)]
pub struct CausalSmoother {
    kind: SmootherKind,
    len: usize,
    history: VecDeque<f64>,
}

impl CausalSmoother {
    pub fn new(kind: SmootherKind, len: usize) -> Self {
        let mut history = VecDeque::with_capacity(len);
        history.extend(std::iter::repeat(0.0).take(len));
        Self { kind, len, history }
    }

    /// Adds the current value and returns the smoothed value including it.
    pub fn push(&mut self, v: f64) -> f64 {
        self.history.pop_front();
        self.history.push_back(v);
        match self.kind {
            SmootherKind::MovingAverage => self.history.iter().sum::<f64>() / self.len as f64,
            SmootherKind::Median => {
                let mut sorted: Vec<f64> = self.history.iter().copied().collect();
                sorted.sort_by(f64::total_cmp);
                sorted[self.len / 2]
            }
        }
    }
}

/// `Ẏ(m) = (Y(m) − Y(m−1)) / Ȳ(m)` for one score column, `Y(−1) = 0`; zero when `Ȳ(m) ≤ 0`.
pub fn normalized_derivative(column: &[f64], m: usize, cfg: &TranscriberConfig) -> f64 {
    let mut smoother = CausalSmoother::new(cfg.smoother, cfg.smoother_len);
    let mut smoothed = 0.0;
    for &v in &column[..=m] {
        smoothed = smoother.push(v);
    }
    let prev = if m == 0 { 0.0 } else { column[m - 1] };
    ratio(column[m] - prev, smoothed)
}

fn ratio(delta: f64, smoothed: f64) -> f64 {
    if smoothed > 0.0 {
        delta / smoothed
    } else {
        0.0
    }
}

/// Per-frame quantities the decisions look at; slices are indexed by pitch.
#[derive(Debug, Clone, Copy)]
pub struct FrameView<'a> {
    /// Invariant score `Y(m, ·)`.
    pub y: &'a [f64],
    /// `ΔY(m, ·)`.
    pub delta: &'a [f64],
    /// `ΔY(m−1, ·)`.
    pub delta_prev: &'a [f64],
    /// Normalized derivative `Ẏ(m, ·)`.
    pub slope: &'a [f64],
}

/// Onset test at pitch index `p` given which pitches are active.
pub fn onset_decision(view: &FrameView, active: &[bool], p: usize, cfg: &TranscriberConfig) -> bool {
    let y = view.y[p];
    if active[p] || y <= cfg.eps1 || view.slope[p] <= cfg.eps2 {
        return false;
    }
    if cfg.rising_slope && view.delta[p] <= view.delta_prev[p] {
        return false;
    }
    if !dominates_neighbors(view, p) {
        return false;
    }
    !(cfg.octave_rule && p >= 12 && active[p - 12])
}

/// Transient and fretting guards: slope and score must beat both semitone neighbors.
fn dominates_neighbors(view: &FrameView, p: usize) -> bool {
    let neighbors = [p.checked_sub(1), Some(p + 1).filter(|&q| q < view.y.len())];
    neighbors
        .into_iter()
        .flatten()
        .all(|q| view.delta[p] > view.delta[q] && view.y[p] > view.y[q])
}

/// Largest non-negative score among inactive semitone neighbors.
fn vibrato_term(view: &FrameView, active: &[bool], p: usize) -> f64 {
    let neighbors = [p.checked_sub(1), Some(p + 1).filter(|&q| q < view.y.len())];
    neighbors
        .into_iter()
        .flatten()
        .filter(|&q| !active[q])
        .map(|q| view.y[q])
        .fold(0.0, f64::max)
}

/// Decay test for an active note at pitch index `p`.
pub fn decay_decision(view: &FrameView, active: &[bool], p: usize, cfg: &TranscriberConfig) -> bool {
    view.y[p] + vibrato_term(view, active, p) < cfg.eps3 && view.slope[p] < cfg.eps4
}

/// Velocity from the weighted score at the onset frame.
pub fn velocity(yw: &Pitchgram, m_on: usize, p: usize, cfg: &TranscriberConfig) -> u8 {
    map_velocity(yw.get(m_on, p), cfg.velocity_scale, cfg.velocity_offset)
}

fn map_velocity(value: f64, scale: f64, offset: f64) -> u8 {
    (scale * value + offset).round().clamp(1.0, 127.0) as u8
}

/// Drops notes lasting `d_min` frames or fewer.
pub fn prune(notes: Vec<NoteEvent>, cfg: &TranscriberConfig) -> Vec<NoteEvent> {
    notes.into_iter().filter(|n| n.duration_frames() > cfg.d_min).collect()
}

/// Pitch-marginal score of one frame.
pub fn transient_score(row: &[f64]) -> f64 {
    row.iter().sum()
}

/// Per-pitch tracking state.
#[derive(Debug, Clone, Default)]
pub struct TrackState {
    pub active: bool,
    pub onset_frame: usize,
    pub smoothed: f64,
    pub last: f64,
    /// Largest weighted score seen since onset.
    peak_weighted: f64,
    /// Weighted score accumulated since onset.
    energy: f64,
    onset_weighted: f64,
}

struct Pending {
    pitch: usize,
    onset: usize,
    offset: usize,
    onset_weighted: f64,
    energy: f64,
}

/// Converts the pitchgram pair into note events.
pub fn transcribe(yw: &Pitchgram, yi: &Pitchgram, cfg: &TranscriberConfig) -> Result<Vec<NoteEvent>> {
    cfg.validate()?;
    if !yw.same_shape(yi) {
        return Err(Error::ShapeMismatch(format!(
            "weighted {}x{} vs invariant {}x{}",
            yw.frames(),
            yw.pitch_count(),
            yi.frames(),
            yi.pitch_count()
        )));
    }
    if yi.first_pitch() < 0 || yi.last_pitch() > 127 {
        return Err(Error::InvalidParameter("pitch grid outside MIDI range".into()));
    }
    let np = yi.pitch_count();
    let frames = yi.frames();
    let mut states = vec![TrackState::default(); np];
    let mut smoothers = vec![CausalSmoother::new(cfg.smoother, cfg.smoother_len); np];
    let mut marginal = CausalSmoother::new(cfg.smoother, cfg.smoother_len);
    let mut marginal_last = 0.0;
    let mut marginal_slope_prev = 0.0;
    let mut delta_prev = vec![0.0; np];
    let mut delta = vec![0.0; np];
    let mut slope = vec![0.0; np];
    let mut active = vec![false; np];
    let mut rectified = vec![0.0; np];
    let mut done = Vec::new();

    let close = |s: &mut TrackState, p: usize, m: usize, done: &mut Vec<Pending>| {
        done.push(Pending {
            pitch: p,
            onset: s.onset_frame,
            offset: m,
            onset_weighted: s.onset_weighted,
            energy: s.energy,
        });
        s.active = false;
    };

    for m in 0..frames {
        let y = yi.row(m);
        let w = yw.row(m);
        for p in 0..np {
            delta[p] = y[p] - states[p].last;
            states[p].smoothed = smoothers[p].push(y[p]);
            slope[p] = ratio(delta[p], states[p].smoothed);
            states[p].last = y[p];
        }
        // The bident drives most channels negative, so the raw marginal is not a
        // usable energy proxy; only positive evidence is summed.
        rectified.iter_mut().zip(w).for_each(|(r, &v)| *r = v.max(0.0));
        let total = transient_score(&rectified);
        let marginal_slope = ratio(total - marginal_last, marginal.push(total));
        marginal_last = total;
        let restrike = cfg.transient_gate && marginal_slope > cfg.eps_transient && marginal_slope_prev <= cfg.eps_transient;
        marginal_slope_prev = marginal_slope;

        let view = FrameView { y, delta: &delta, delta_prev: &delta_prev, slope: &slope };
        let before = active.clone();

        // decays and restrikes of notes already sounding
        for p in 0..np {
            if !before[p] {
                continue;
            }
            let s = &mut states[p];
            let ambiguous = cfg.dual_pitchgram && y[p] >= cfg.eps3 && y[p] <= cfg.eps1;
            let faded = ambiguous && w[p] < cfg.release_ratio * s.peak_weighted && slope[p] < cfg.eps4;
            if decay_decision(&view, &before, p, cfg) || faded {
                close(s, p, m, &mut done);
                active[p] = false;
                continue;
            }
            let prev_w = if m == 0 { 0.0 } else { yw.get(m - 1, p) };
            if restrike
                && m > s.onset_frame + 1
                && y[p] > cfg.eps1
                && w[p] > prev_w
                && dominates_score(y, p)
                && !(cfg.octave_rule && p >= 12 && before[p - 12])
            {
                close(s, p, m, &mut done);
                start(s, m, w[p]);
                active[p] = true;
                continue;
            }
            s.peak_weighted = s.peak_weighted.max(w[p]);
            s.energy += w[p].max(0.0);
        }

        // new onsets, lowest pitch first so the octave rule sees this frame's notes
        for p in 0..np {
            if onset_decision(&view, &active, p, cfg) {
                start(&mut states[p], m, w[p]);
                active[p] = true;
            }
        }
        std::mem::swap(&mut delta_prev, &mut delta);
    }
    for p in 0..np {
        if active[p] {
            close(&mut states[p], p, frames, &mut done);
        }
    }

    let scale = if cfg.velocity_auto {
        let loudest = done
            .iter()
            .map(|n| velocity_source(n, cfg.velocity_mode))
            .fold(0.0, f64::max);
        if loudest > 0.0 {
            127.0 / loudest
        } else {
            1.0
        }
    } else {
        cfg.velocity_scale
    };
    let offset = if cfg.velocity_auto { 0.0 } else { cfg.velocity_offset };
    let notes = done
        .iter()
        .map(|n| NoteEvent {
            pitch: (yi.first_pitch() + n.pitch as i32) as u8,
            onset_frame: n.onset,
            offset_frame: n.offset,
            velocity: map_velocity(velocity_source(n, cfg.velocity_mode), scale, offset),
        })
        .collect();
    let mut notes = prune(notes, cfg);
    notes.sort_by_key(|n| (n.onset_frame, n.pitch));
    Ok(notes)
}

fn start(s: &mut TrackState, m: usize, weighted: f64) {
    s.active = true;
    s.onset_frame = m;
    s.onset_weighted = weighted;
    s.peak_weighted = weighted;
    s.energy = weighted.max(0.0);
}

fn velocity_source(n: &Pending, mode: VelocityMode) -> f64 {
    match mode {
        VelocityMode::Onset => n.onset_weighted,
        VelocityMode::Energy => n.energy,
    }
}

fn dominates_score(y: &[f64], p: usize) -> bool {
    (p == 0 || y[p] > y[p - 1]) && (p + 1 >= y.len() || y[p] > y[p + 1])
}

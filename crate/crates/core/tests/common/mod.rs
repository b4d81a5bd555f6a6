//! Shared fixtures for the integration and acceptance tests.
#![allow(dead_code)]

use pitchgram::signal_io::{synthesize, Synthesis, ToneSpec};

pub const FS: u32 = 44100;

/// Guitar-like plucked tone: 12 partials, decaying envelope.
pub fn pluck(pitch: u8, onset: f64, dur: f64) -> ToneSpec {
    ToneSpec::new(pitch, onset, dur).partials(12, 0.6).envelope(1.5)
}

/// Back-to-back notes starting at `start`; a pitch of 0 is a rest.
pub fn phrase(start: f64, notes: &[(u8, f64)]) -> Vec<ToneSpec> {
    let mut t = start;
    let mut out = Vec::new();
    for &(p, d) in notes {
        if p > 0 {
            out.push(pluck(p, t, d));
        }
        t += d;
    }
    out
}

fn end_of(specs: &[ToneSpec]) -> f64 {
    specs.iter().map(|s| s.onset_s + s.duration_s).fold(0.0, f64::max)
}

pub struct Lick {
    pub name: &'static str,
    pub synthesis: Synthesis,
    pub specs: Vec<ToneSpec>,
}

fn lick(name: &'static str, specs: Vec<ToneSpec>) -> Lick {
    let total = end_of(&specs) + 0.4;
    let synthesis = synthesize(&specs, FS, total).expect("fixture renders");
    Lick { name, synthesis, specs }
}

pub const VIBRATO: &str = "vibrato";
pub const TREMOLO: &str = "tremolo";
pub const CHORDS: &str = "chords";

/// Ten monophonic-style licks, including one with vibrato, one tremolo-picked and one
/// built from two-note chords.
pub fn lick_corpus() -> Vec<Lick> {
    let q = 0.3;
    let e = 0.2;
    let mut licks = vec![
        lick("pentatonic_up", phrase(0.2, &[(57, q), (60, q), (62, q), (64, q), (67, q), (69, q), (72, 0.6)])),
        lick("pentatonic_down", phrase(0.2, &[(76, q), (74, q), (72, q), (69, q), (67, q), (64, q), (62, 0.6)])),
        lick("low_riff", phrase(0.2, &[(40, 0.4), (43, q), (45, q), (47, 0.4), (45, q), (43, q), (40, 0.6)])),
        lick(
            "wide_leaps",
            phrase(0.2, &[(55, q), (64, q), (59, q), (69, q), (62, q), (73, q), (64, 0.6)]),
        ),
        lick("with_rests", phrase(0.2, &[(64, 0.4), (0, 0.25), (67, 0.4), (0, 0.25), (69, 0.4), (0, 0.25), (64, 0.6)])),
        lick(
            "mixed_durations",
            phrase(0.2, &[(60, 0.6), (62, e), (64, e), (65, 0.45), (67, 0.25), (69, 0.7), (65, 0.35)]),
        ),
        lick("high_register", phrase(0.2, &[(76, q), (79, q), (81, q), (84, q), (81, q), (79, q), (76, 0.6)])),
    ];

    let vib = [(64u8, 0.9), (67, 0.9), (69, 1.1)];
    let mut t = 0.2;
    let mut specs = Vec::new();
    for (p, d) in vib {
        specs.push(pluck(p, t, d).vibrato(30.0, 5.5));
        t += d;
    }
    licks.push(lick(VIBRATO, specs));

    licks.push(lick(TREMOLO, phrase(0.2, &[(64, 0.25); 6].iter().chain(&[(67, 0.25); 4]).copied().collect::<Vec<_>>())));

    let mut specs = Vec::new();
    let mut t = 0.2;
    for (a, b) in [(57u8, 61u8), (60, 64), (62, 65), (55, 59)] {
        specs.push(pluck(a, t, 0.6));
        specs.push(pluck(b, t, 0.6));
        t += 0.6;
    }
    licks.push(lick(CHORDS, specs));
    licks
}

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unreadable file {path}: {reason}")]
    UnreadableFile { path: PathBuf, reason: String },

    #[error("unsupported encoding: {0}")]
    UnsupportedEncoding(String),

    #[error("zero-length audio")]
    EmptyAudio,

    #[error("silent input: RMS is zero")]
    SilentInput,

    #[error("aliasing: partial {partial} of MIDI {pitch} at {freq_hz:.1} Hz reaches Nyquist ({nyquist_hz:.1} Hz)")]
    Aliasing {
        pitch: i32,
        partial: usize,
        freq_hz: f64,
        nyquist_hz: f64,
    },

    #[error("overlapping notes at MIDI pitch {pitch} (frames {first_on}..{first_off} and {second_on}..)")]
    OverlappingNotes {
        pitch: u8,
        first_on: usize,
        first_off: usize,
        second_on: usize,
    },

    #[error("unmatched note-on for MIDI pitch {pitch} at {time_s:.3} s")]
    UnmatchedNoteOn { pitch: u8, time_s: f64 },

    #[error("malformed MIDI: {0}")]
    MalformedMidi(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unstable feed-backward comb: |a| = {0} must be < 1")]
    UnstableComb(f64),

    #[error("insufficient samples: need {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("ACF series already compressed")]
    AlreadyCompressed,

    #[error("ACF series already normalized")]
    AlreadyNormalized,

    #[error("silent frame: zero-lag autocorrelation is zero")]
    SilentFrame,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("empty pitch grid")]
    EmptyGrid,

    #[error("signal too short: need at least {needed} samples for one frame, got {got}")]
    SignalTooShort { needed: usize, got: usize },

    #[error("DFT size {dft_size} too small for lowest pitch MIDI {pitch}: {reason}")]
    DftTooSmall {
        dft_size: usize,
        pitch: i32,
        reason: String,
    },

    #[error("note at MIDI pitch {pitch} outside mask range {lo}..={hi}")]
    PitchOutOfRange { pitch: u8, lo: u8, hi: u8 },

    #[error("empty reference: no active cells")]
    EmptyReference,

    #[error("invalid config: {0}")]
    Config(String),

    #[error("tone spec error at line {line}: {reason}")]
    ToneSpec { line: usize, reason: String },

    #[error("bad container: {0}")]
    BadContainer(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

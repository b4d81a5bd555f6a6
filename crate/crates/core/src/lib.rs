//! Pitch-synchronous chromatic bident filter bank.
//!
//! Audio is analyzed per pitch channel by a comb pre-filter, an autocorrelation and a
//! cosine-modulated bident kernel that rewards the fundamental and penalizes the
//! octave below and above. The resulting time × pitch scores (pitchgrams) feed a
//! decision-based transcriber, and masks of its notes are scored against references.

pub mod acf;
pub mod bident;
pub mod cli;
pub mod comb;
pub mod config;
pub mod error;
pub mod eval;
pub mod pitchgram;
pub mod signal_io;
pub mod transcriber;

pub use config::{AnalysisConfig, Config};
pub use error::{Error, Result};
pub use pitchgram::{midi_to_freq, PitchGrid, Pitchgram};
pub use signal_io::{AudioBuffer, NoteEvent};
pub use transcriber::{transcribe, TranscriberConfig};

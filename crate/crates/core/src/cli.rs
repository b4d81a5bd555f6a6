//! Command-line front end: `pitchgram`, `transcribe`, `eval` and `synth`.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::bident::KernelKind;
use crate::config::Config;
use crate::error::{Error, Result};
use crate::eval::{evaluate, notes_to_mask, notes_to_weighted_mask, parse_grid, transition_decomposition, CSV_HEADER};
use crate::pitchgram::{
    chromagram, pitchgram, pitchgram_pair, write_container, write_csv, Container, Domain, PitchGrid, Variant,
};
use crate::signal_io::{
    export_midi, import_midi_seconds, load_audio, normalize_rms, parse_tone_specs, save_wav, synthesize, AudioBuffer,
    NoteEvent, WavFormat,
};
use crate::transcriber::transcribe;

#[derive(Debug, Parser)]
#[command(name = "pitchgram", version, about = "Bident filter-bank pitchgrams and note transcription")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute a pitchgram (or chromagram) and write it as a PGRM container.
    Pitchgram(PitchgramArgs),
    /// Transcribe a recording to a MIDI file.
    Transcribe(TranscribeArgs),
    /// Compare a detected MIDI file against a reference.
    Eval(EvalArgs),
    /// Render a tone-spec file to WAV plus a reference MIDI file.
    Synth(SynthArgs),
}

/// Overrides applied on top of the configuration file.
#[derive(Debug, Args, Default)]
pub struct AnalysisFlags {
    /// Configuration file with [analysis] and [transcriber] sections.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// time | freq
    #[arg(long)]
    pub domain: Option<Domain>,
    /// weighted | invariant
    #[arg(long)]
    pub variant: Option<Variant>,
    /// bident | sinc
    #[arg(long)]
    pub kernel: Option<KernelKind>,
    /// Frame advance in samples.
    #[arg(long)]
    pub hop: Option<usize>,
    #[arg(long = "dft-size")]
    pub dft_size: Option<usize>,
    /// Inclusive MIDI range, e.g. `40-88`.
    #[arg(long = "pitch-range")]
    pub pitch_range: Option<String>,
    /// Frequency of A4 in Hz.
    #[arg(long)]
    pub tuning: Option<f64>,
}

impl AnalysisFlags {
    pub fn resolve(&self) -> Result<Config> {
        let mut cfg = match &self.config {
            Some(path) => Config::load(path)?,
            None => Config::default(),
        };
        let a = &mut cfg.analysis;
        if let Some(d) = self.domain {
            a.domain = d;
        }
        if let Some(v) = self.variant {
            a.variant = v;
        }
        if let Some(k) = self.kernel {
            a.kernel = k;
        }
        if let Some(h) = self.hop {
            a.hop = h;
        }
        if let Some(n) = self.dft_size {
            a.dft_size = n;
        }
        if let Some(r) = &self.pitch_range {
            let (lo, hi) = parse_range(r)?;
            a.pitch_lo = lo as i32;
            a.pitch_hi = hi as i32;
        }
        if let Some(t) = self.tuning {
            a.tuning_hz = t;
        }
        a.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct PitchgramArgs {
    pub audio: PathBuf,
    #[command(flatten)]
    pub flags: AnalysisFlags,
    /// Fold the sinc-kernel pitchgram into 12 pitch classes.
    #[arg(long)]
    pub chroma: bool,
    /// Also write a CSV dump here.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(short = 'o', long = "output")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct TranscribeArgs {
    pub audio: PathBuf,
    #[command(flatten)]
    pub flags: AnalysisFlags,
    /// Print per-stage wall time and the real-time factor.
    #[arg(long)]
    pub timing: bool,
    /// Also write notes as CSV (onset_s, offset_s, pitch, velocity).
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(short = 'o', long = "output")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    pub detected: PathBuf,
    pub reference: PathBuf,
    /// Mask time step: `0.05s`, `23.2ms` or `<bpm>bpm:<num>/<den>`.
    #[arg(long, default_value = "0.0232s")]
    pub grid: String,
    #[arg(long = "pitch-range", default_value = "0-127")]
    pub pitch_range: String,
    /// Weight precision by note velocity.
    #[arg(long)]
    pub weighted: bool,
    /// Also report errors within this many grid frames of reference onsets and offsets.
    #[arg(long)]
    pub window: Option<usize>,
    /// Print a CSV row (with header) instead of key=value lines.
    #[arg(long)]
    pub csv: bool,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    pub spec: PathBuf,
    /// Output WAV (16-bit PCM).
    #[arg(short = 'o', long = "output")]
    pub output: PathBuf,
    /// Reference MIDI; defaults to the WAV path with a `.mid` extension.
    #[arg(long)]
    pub midi: Option<PathBuf>,
    #[arg(long = "sample-rate")]
    pub sample_rate: Option<u32>,
}

fn parse_range(text: &str) -> Result<(u8, u8)> {
    let bad = || Error::InvalidParameter(format!("pitch range {text:?} is not LO-HI"));
    let (lo, hi) = text.split_once('-').ok_or_else(bad)?;
    let lo: u8 = lo.trim().parse().map_err(|_| bad())?;
    let hi: u8 = hi.trim().parse().map_err(|_| bad())?;
    if hi < lo || hi > 127 {
        return Err(bad());
    }
    Ok((lo, hi))
}

fn prepare(audio: &Path, cfg: &Config) -> Result<(AudioBuffer, PitchGrid)> {
    let buf = load_audio(audio)?;
    check_rate(&buf, cfg)?;
    let grid = PitchGrid::from_config(&cfg.analysis, buf.sample_rate_hz())?;
    Ok((buf, grid))
}

fn check_rate(buf: &AudioBuffer, cfg: &Config) -> Result<()> {
    match cfg.analysis.sample_rate_hz {
        Some(expected) if expected != buf.sample_rate_hz() => Err(Error::InvalidParameter(format!(
            "expected {expected} Hz audio, got {} Hz",
            buf.sample_rate_hz()
        ))),
        _ => Ok(()),
    }
}

/// Normalizes unless disabled; silence passes through unchanged.
fn normalized(buf: AudioBuffer, cfg: &Config) -> Result<AudioBuffer> {
    if !cfg.analysis.normalize {
        return Ok(buf);
    }
    match normalize_rms(&buf, cfg.analysis.target_dbfs) {
        Err(Error::SilentInput) => Ok(buf),
        other => other,
    }
}

pub fn cmd_pitchgram(args: &PitchgramArgs, out: &mut dyn Write) -> Result<()> {
    let mut cfg = args.flags.resolve()?;
    if args.chroma {
        cfg.analysis.kernel = KernelKind::Sinc;
    }
    let (buf, grid) = prepare(&args.audio, &cfg)?;
    let buf = normalized(buf, &cfg)?;
    let pg = pitchgram(&buf, &grid, &cfg.analysis)?;
    let container: Container = if args.chroma { chromagram(&pg)?.into() } else { pg.into() };
    write_container(&container, &args.output)?;
    if let Some(csv) = &args.csv {
        write_csv(&container, csv)?;
    }
    writeln!(out, "wrote {}", args.output.display())?;
    Ok(())
}

pub fn cmd_transcribe(args: &TranscribeArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = args.flags.resolve()?;
    cfg.transcriber.validate()?;
    let t0 = Instant::now();
    let (buf, grid) = prepare(&args.audio, &cfg)?;
    let t_load = t0.elapsed();
    let t1 = Instant::now();
    let buf = normalized(buf, &cfg)?;
    let t_norm = t1.elapsed();
    let t2 = Instant::now();
    let (yw, yi) = pitchgram_pair(&buf, &grid, &cfg.analysis)?;
    let t_pg = t2.elapsed();
    let t3 = Instant::now();
    let notes = transcribe(&yw, &yi, &cfg.transcriber)?;
    let t_tr = t3.elapsed();
    let t4 = Instant::now();
    let period = yw.frame_period_s();
    export_midi(&notes, period, &args.output)?;
    if let Some(csv) = &args.csv {
        write_notes_csv(&notes, period, csv)?;
    }
    let t_out = t4.elapsed();
    writeln!(out, "notes={}", notes.len())?;
    if args.timing {
        let audio_s = buf.duration_s();
        let total = t0.elapsed().as_secs_f64();
        for (name, d) in [("load", t_load), ("normalize", t_norm), ("pitchgram", t_pg), ("transcribe", t_tr), ("export", t_out)] {
            writeln!(out, "time_{name}_s={:.4}", d.as_secs_f64())?;
        }
        writeln!(out, "audio_s={audio_s:.3}")?;
        writeln!(out, "real_time_factor={:.4}", total / audio_s)?;
        writeln!(out, "pitchgram_real_time_factor={:.4}", t_pg.as_secs_f64() / audio_s)?;
    }
    Ok(())
}

fn write_notes_csv(notes: &[NoteEvent], period: f64, path: &Path) -> Result<()> {
    let mut text = String::from("onset_s,offset_s,pitch,velocity\n");
    for n in notes {
        let t = n.to_timed(period);
        text.push_str(&format!("{:.6},{:.6},{},{}\n", t.onset_s, t.offset_s, t.pitch, t.velocity));
    }
    std::fs::write(path, text)?;
    Ok(())
}

pub fn cmd_eval(args: &EvalArgs, out: &mut dyn Write) -> Result<()> {
    let step = parse_grid(&args.grid)?;
    let range = parse_range(&args.pitch_range)?;
    let det = import_midi_seconds(&args.detected)?;
    let reference = import_midi_seconds(&args.reference)?;
    let total = det.iter().chain(&reference).map(|n| n.offset_s).fold(0.0, f64::max);
    let ref_mask = notes_to_mask(&reference, step, range, total)?;
    let (det_mask, weights) = notes_to_weighted_mask(&det, step, range, total)?;
    let report = evaluate(&det_mask, &ref_mask, args.weighted.then_some(weights.as_slice()))?;
    if args.csv {
        writeln!(out, "{CSV_HEADER}")?;
        writeln!(out, "{}", report.to_csv_row(&args.detected.display().to_string()))?;
    } else {
        writeln!(out, "grid_s={step}")?;
        write!(out, "{}", report.to_key_value())?;
    }
    if let Some(w) = args.window {
        let t = transition_decomposition(&det_mask, &ref_mask, w)?;
        writeln!(out, "onset_substitutions={}", t.onset.substitutions)?;
        writeln!(out, "onset_deletions={}", t.onset.deletions)?;
        writeln!(out, "onset_insertions={}", t.onset.insertions)?;
        writeln!(out, "decay_substitutions={}", t.decay.substitutions)?;
        writeln!(out, "decay_deletions={}", t.decay.deletions)?;
        writeln!(out, "decay_insertions={}", t.decay.insertions)?;
    }
    Ok(())
}

pub fn cmd_synth(args: &SynthArgs, out: &mut dyn Write) -> Result<()> {
    let text = std::fs::read_to_string(&args.spec)
        .map_err(|e| Error::UnreadableFile { path: args.spec.clone(), reason: e.to_string() })?;
    let file = parse_tone_specs(&text)?;
    let rate = args.sample_rate.or(file.sample_rate_hz).unwrap_or(44100);
    let total = file
        .total_s
        .unwrap_or_else(|| file.tones.iter().map(|t| t.onset_s + t.duration_s).fold(0.0, f64::max) + 0.5);
    let syn = synthesize(&file.tones, rate, total)?;
    save_wav(&syn.buffer, &args.output, WavFormat::Pcm16)?;
    // sample-accurate reference grid
    let period = 1.0 / rate as f64;
    let notes: Vec<NoteEvent> = syn.notes.iter().map(|n| n.to_frames(period)).collect();
    let midi = args.midi.clone().unwrap_or_else(|| args.output.with_extension("mid"));
    export_midi(&notes, period, &midi)?;
    writeln!(out, "wrote {} and {}", args.output.display(), midi.display())?;
    Ok(())
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Pitchgram(a) => cmd_pitchgram(a, out),
        Command::Transcribe(a) => cmd_transcribe(a, out),
        Command::Eval(a) => cmd_eval(a, out),
        Command::Synth(a) => cmd_synth(a, out),
    }
}

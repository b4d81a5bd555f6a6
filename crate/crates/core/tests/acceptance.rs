//! Acceptance criteria for the filter bank, the transcriber and the metrics.
//!
//! Every test prints one `PASS`/`FAIL` line straight to stdout (bypassing the test
//! harness capture) and then asserts. Tests take a shared lock so the timing
//! criterion is not disturbed by the others.

mod common;

use std::io::Write;
use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::Instant;

use pitchgram::acf::AcfMethod;
use pitchgram::bident::{build_kernel, BidentParams, KernelKind};
use pitchgram::eval::{error_score, f_measure, notes_to_mask, parse_grid, BinaryMask};
use pitchgram::pitchgram::{pitchgram_pair, pitchgram_time_reference, Domain, Variant};
use pitchgram::signal_io::{normalize_rms, synthesize, NoteEvent, ToneSpec};
use pitchgram::{transcribe, AnalysisConfig, AudioBuffer, PitchGrid, Pitchgram, TranscriberConfig};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use common::{lick_corpus, Lick, CHORDS, FS, TREMOLO, VIBRATO};

fn serial() -> MutexGuard<'static, ()> {
    static LOCK: Mutex<()> = Mutex::new(());
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{verdict} {name}: {detail}");
    let _ = out.flush();
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Cosine transform of the taps, evaluated directly.
fn dtft(taps: &[f64], f: f64) -> f64 {
    let sum: f64 = taps
        .iter()
        .enumerate()
        .map(|(n, h)| h * (2.0 * std::f64::consts::PI * f * n as f64).cos())
        .sum();
    sum / taps.len() as f64
}

/// Frames whose whole analysis window lies inside `[start, end)` samples.
fn sustain_frames(cfg: &AnalysisConfig, grid: &PitchGrid, start: usize, end: usize) -> std::ops::Range<usize> {
    let half = cfg.frame_periods * grid.max_period() / 2;
    (start + half).div_ceil(cfg.hop)..(end.saturating_sub(half) / cfg.hop + 1)
}

fn tone(pitch: u8, ratio: f64) -> AudioBuffer {
    let spec = ToneSpec::new(pitch, 0.0, 1.0).partials(12, ratio).envelope(1.0);
    synthesize(&[spec], FS, 1.0).unwrap().buffer
}

fn fast_time() -> AnalysisConfig {
    AnalysisConfig { acf_method: AcfMethod::Fft, ..AnalysisConfig::default() }
}

#[test]
fn bident_spike_equality() {
    let _guard = serial();
    let started = Instant::now();
    let kernel = build_kernel(100, &BidentParams::default(), KernelKind::Bident).unwrap();
    let f0 = 0.01;
    let extremum = |centre: f64| {
        (0..=4000)
            .map(|i| dtft(kernel.taps(), centre * (0.9 + 0.2 * i as f64 / 4000.0)))
            .max_by(|a, b| a.abs().total_cmp(&b.abs()))
            .unwrap()
    };
    let spikes = [extremum(f0 / 2.0), extremum(f0), extremum(2.0 * f0)];
    let mags = spikes.map(f64::abs);
    let max = mags.iter().cloned().fold(0.0, f64::max);
    let min = mags.iter().cloned().fold(f64::INFINITY, f64::min);
    let spread = (max - min) / max;
    let elapsed = started.elapsed().as_secs_f64();
    let pass = spread < 0.02 && spikes[1] > 0.0 && spikes[0] < 0.0 && spikes[2] < 0.0 && elapsed < 1.0;
    report(
        "bident spike equality",
        pass,
        &format!("extrema {:.4} {:.4} {:.4}, spread {:.3}% (< 2%), {elapsed:.2}s", spikes[0], spikes[1], spikes[2], 100.0 * spread),
    );
    assert!(pass);
}

#[test]
fn sinc_zero_crossings() {
    let _guard = serial();
    let started = Instant::now();
    let kernel = build_kernel(100, &BidentParams::default(), KernelKind::Sinc).unwrap();
    let f0 = 0.01;
    let step = f0 / 240.0;
    // bracket sign changes on the grid, then interpolate inside the bracket
    let crossings = |lo: f64, hi: f64| {
        let steps = ((hi - lo) / step).round() as usize;
        let mut out = Vec::new();
        let mut prev = dtft(kernel.taps(), lo);
        for i in 1..=steps {
            let f = lo + i as f64 * step;
            let y = dtft(kernel.taps(), f);
            if prev.signum() != y.signum() {
                out.push(f - step * y / (y - prev));
            }
            prev = y;
        }
        out
    };
    let lower = crossings(f0 / 2.0 - f0 / 48.0, f0 - f0 / 48.0);
    let upper = crossings(f0 + f0 / 48.0, 2.0 * f0 + f0 / 48.0);
    let spacing = f0 / 24.0;
    let worst = lower
        .iter()
        .rev()
        .enumerate()
        .map(|(i, z)| (z - (f0 - (i + 1) as f64 * spacing)).abs())
        .chain(upper.iter().enumerate().map(|(i, z)| (z - (f0 + (i + 1) as f64 * spacing)).abs()))
        .fold(0.0, f64::max);
    let elapsed = started.elapsed().as_secs_f64();
    let pass = lower.len() == 12 && upper.len() == 24 && worst <= step / 2.0 && elapsed < 1.0;
    report(
        "sinc zero crossings",
        pass,
        &format!(
            "{} below f0, {} above (want 12/24), worst offset {:.2} grid steps (<= 0.5), {elapsed:.2}s",
            lower.len(),
            upper.len(),
            worst / step
        ),
    );
    assert!(pass);
}

#[test]
fn octave_suppression() {
    let _guard = serial();
    let started = Instant::now();
    let cfg = fast_time();
    let sinc_cfg = AnalysisConfig { kernel: KernelKind::Sinc, ..cfg.clone() };
    let grid = PitchGrid::from_config(&cfg, FS).unwrap();
    let (mut frames, mut argmax_hits, mut octave_negative, mut sinc_octave_negative) = (0, 0, 0, 0);
    for ratio in [0.5, 0.6, 0.7, 0.8] {
        for pitch in 40..=76u8 {
            let buf = tone(pitch, ratio);
            let (bident, _) = pitchgram_pair(&buf, &grid, &cfg).unwrap();
            let (sinc, _) = pitchgram_pair(&buf, &grid, &sinc_cfg).unwrap();
            let p = pitch as i32;
            for m in sustain_frames(&cfg, &grid, 0, buf.len()) {
                frames += 1;
                argmax_hits += usize::from(bident.argmax(m) == p);
                octave_negative += usize::from(bident.at(m, p + 12).unwrap() < 0.0);
                sinc_octave_negative += usize::from(sinc.at(m, p + 12).unwrap() < 0.0);
            }
        }
    }
    let rate = |n: usize| n as f64 / frames as f64;
    let elapsed = started.elapsed().as_secs_f64();
    let pass = rate(argmax_hits) >= 0.95 && rate(octave_negative) >= 0.90 && rate(sinc_octave_negative) < 0.90 && elapsed < 120.0;
    report(
        "octave suppression",
        pass,
        &format!(
            "{frames} sustain frames: argmax {:.1}% (>= 95%), Y(p+12) < 0 {:.1}% (>= 90%), sinc Y(p+12) < 0 {:.1}% (< 90%), {elapsed:.1}s",
            100.0 * rate(argmax_hits),
            100.0 * rate(octave_negative),
            100.0 * rate(sinc_octave_negative)
        ),
    );
    assert!(pass);
}

#[test]
fn variant_equivalence() {
    let _guard = serial();
    let time_cfg = fast_time();
    let grid = PitchGrid::from_config(&time_cfg, FS).unwrap();
    let mut lines = Vec::new();
    let mut pass = true;
    for compression in [true, false] {
        let time_cfg = AnalysisConfig { compression, ..time_cfg.clone() };
        let freq_cfg = AnalysisConfig { domain: Domain::Frequency, ..time_cfg.clone() };
        let mut sims = [Vec::new(), Vec::new()];
        for ratio in [0.5, 0.6, 0.7, 0.8] {
            for pitch in (40..=76u8).step_by(3) {
                let buf = tone(pitch, ratio);
                let (tw, ti) = pitchgram_pair(&buf, &grid, &time_cfg).unwrap();
                let (fw, fi) = pitchgram_pair(&buf, &grid, &freq_cfg).unwrap();
                for m in sustain_frames(&time_cfg, &grid, 0, buf.len()) {
                    sims[0].push(cosine(tw.row(m), fw.row(m)));
                    sims[1].push(cosine(ti.row(m), fi.row(m)));
                }
            }
        }
        for (variant, s) in [Variant::PowerWeighted, Variant::PowerInvariant].iter().zip(&sims) {
            let min = s.iter().cloned().fold(f64::INFINITY, f64::min);
            let mean = s.iter().sum::<f64>() / s.len() as f64;
            let share = s.iter().filter(|&&v| v >= 0.9).count() as f64 / s.len() as f64;
            // the default pipeline compresses; the uncompressed comparison is informative
            if compression {
                pass &= min >= 0.9;
            }
            lines.push(format!(
                "{variant:?}{}: min {min:.3} mean {mean:.3} frames>=0.9 {:.1}%",
                if compression { "" } else { " (uncompressed)" },
                100.0 * share
            ));
        }
    }
    report("variant equivalence", pass, &format!("per-frame correlation >= 0.9; {}", lines.join("; ")));
    assert!(pass);
}

#[test]
fn performance_ratio() {
    let _guard = serial();
    let cfg = AnalysisConfig::default();
    let grid = PitchGrid::from_config(&cfg, FS).unwrap();
    let pitches = [57u8, 60, 62, 64, 67, 69, 72, 69, 67, 64, 62, 60];
    let specs: Vec<ToneSpec> =
        (0..118).map(|i| common::pluck(pitches[i % pitches.len()], 0.1 + 0.25 * i as f64, 0.25)).collect();
    let fixture = synthesize(&specs, FS, 30.0).unwrap();
    let audio_s = fixture.buffer.duration_s();

    let started = Instant::now();
    let time_pair = pitchgram_pair(&fixture.buffer, &grid, &cfg).unwrap();
    let time_s = started.elapsed().as_secs_f64();

    let freq_cfg = AnalysisConfig { domain: Domain::Frequency, ..cfg.clone() };
    let started = Instant::now();
    let freq_pair = pitchgram_pair(&fixture.buffer, &grid, &freq_cfg).unwrap();
    let freq_s = started.elapsed().as_secs_f64();

    let started = Instant::now();
    let buf = normalize_rms(&fixture.buffer, freq_cfg.target_dbfs).unwrap();
    let (w, i) = pitchgram_pair(&buf, &grid, &freq_cfg).unwrap();
    let notes = transcribe(&w, &i, &TranscriberConfig::default()).unwrap();
    let pipeline_s = started.elapsed().as_secs_f64();

    assert_eq!(time_pair.0.frames(), freq_pair.0.frames());
    let ratio = time_s / freq_s;
    let pass = ratio >= 5.0 && pipeline_s < audio_s;
    report(
        "performance ratio",
        pass,
        &format!(
            "{audio_s:.0}s fixture: time domain {time_s:.2}s, frequency domain {freq_s:.2}s, ratio {ratio:.1}x (>= 5x); \
             frequency pipeline {pipeline_s:.2}s = {:.3}x real time (< 1), {} notes",
            pipeline_s / audio_s,
            notes.len()
        ),
    );
    assert!(pass);
}

struct Analyzed {
    lick: Lick,
    buffer: AudioBuffer,
    weighted: Pitchgram,
    invariant: Pitchgram,
}

/// The lick corpus run through the default pipeline (normalize, time-domain pair).
fn analyzed_corpus() -> &'static [Analyzed] {
    static CORPUS: OnceLock<Vec<Analyzed>> = OnceLock::new();
    CORPUS.get_or_init(|| {
        let cfg = AnalysisConfig::default();
        let grid = PitchGrid::from_config(&cfg, FS).unwrap();
        lick_corpus()
            .into_iter()
            .map(|lick| {
                let buffer = normalize_rms(&lick.synthesis.buffer, cfg.target_dbfs).unwrap();
                let (weighted, invariant) = pitchgram_pair(&buffer, &grid, &cfg).unwrap();
                Analyzed { lick, buffer, weighted, invariant }
            })
            .collect()
    })
}

fn true_cells(a: &BinaryMask, b: &BinaryMask) -> usize {
    (0..a.frames()).map(|k| a.row(k).iter().zip(b.row(k)).filter(|(x, y)| **x && **y).count()).sum()
}

#[test]
fn end_to_end_transcription() {
    let _guard = serial();
    let corpus = analyzed_corpus();
    let cfg = TranscriberConfig::default();
    let step = parse_grid("23.2ms").unwrap();
    let (mut hits, mut detected, mut reference, mut errors) = (0, 0, 0, 0);
    let mut per_lick = Vec::new();
    let events = |name: &str, c: &TranscriberConfig| -> Vec<NoteEvent> {
        let a = corpus.iter().find(|a| a.lick.name == name).unwrap();
        transcribe(&a.weighted, &a.invariant, c).unwrap()
    };
    let vibrato = events(VIBRATO, &cfg);
    let tremolo = events(TREMOLO, &cfg);
    let tremolo_ungated = events(TREMOLO, &TranscriberConfig { transient_gate: false, ..cfg.clone() });

    for a in corpus {
        let notes = transcribe(&a.weighted, &a.invariant, &cfg).unwrap();
        let period = a.weighted.frame_period_s();
        let timed: Vec<_> = notes.iter().map(|n| n.to_timed(period)).collect();
        let total = a.buffer.duration_s();
        let det = notes_to_mask(&timed, step, (40, 88), total).unwrap();
        let truth = notes_to_mask(&a.lick.synthesis.notes, step, (40, 88), total).unwrap();
        let e = error_score(&det, &truth).unwrap();
        let f = f_measure(&det, &truth, None).unwrap();
        hits += true_cells(&det, &truth);
        detected += det.count();
        reference += truth.count();
        errors += e.counts.total();
        per_lick.push(format!("{} F={:.2} E={:.2}", a.lick.name, f.f_measure, e.error_score));
    }
    let precision = hits as f64 / detected as f64;
    let recall = hits as f64 / reference as f64;
    let f = 2.0 * precision * recall / (precision + recall);
    let e = errors as f64 / reference as f64;

    let written_vibrato: Vec<u8> = corpus
        .iter()
        .find(|a| a.lick.name == VIBRATO)
        .map(|a| a.lick.specs.iter().map(|s| s.pitch).collect())
        .unwrap();
    let vibrato_ok = vibrato.iter().map(|n| n.pitch).collect::<Vec<_>>() == written_vibrato;
    let strikes = corpus.iter().find(|a| a.lick.name == TREMOLO).unwrap().lick.specs.len();
    let tremolo_ok = tremolo.len() == strikes && tremolo_ungated.len() < strikes;
    let chord_notes = corpus.iter().find(|a| a.lick.name == CHORDS).unwrap().lick.specs.len();

    let pass = f >= 0.90 && e <= 0.15 && vibrato_ok && tremolo_ok;
    report(
        "end-to-end transcription",
        pass,
        &format!(
            "pooled F {f:.3} (>= 0.90), E {e:.3} (<= 0.15) at {:.1}ms; vibrato {} events for {} notes; \
             tremolo {} events for {strikes} strikes ({} with the gate off); chord lick has {chord_notes} notes; [{}]",
            step * 1e3,
            vibrato.len(),
            written_vibrato.len(),
            tremolo.len(),
            tremolo_ungated.len(),
            per_lick.join(", ")
        ),
    );
    assert!(pass);
}

#[test]
fn gain_invariance() {
    let _guard = serial();
    let corpus = analyzed_corpus();
    let cfg = AnalysisConfig::default();
    let grid = PitchGrid::from_config(&cfg, FS).unwrap();
    let tcfg = TranscriberConfig::default();
    let mut changed = Vec::new();
    let mut velocities_moved = 0;
    let mut events = 0;
    for a in corpus {
        let quiet = AudioBuffer::new(a.buffer.samples().iter().map(|x| 0.25 * x).collect(), FS).unwrap();
        let (w, i) = pitchgram_pair(&quiet, &grid, &cfg).unwrap();
        let loud = transcribe(&a.weighted, &a.invariant, &tcfg).unwrap();
        let soft = transcribe(&w, &i, &tcfg).unwrap();
        let bounds = |n: &[NoteEvent]| n.iter().map(|e| (e.pitch, e.onset_frame, e.offset_frame)).collect::<Vec<_>>();
        if bounds(&loud) != bounds(&soft) {
            changed.push(a.lick.name);
        }
        events += loud.len();
        velocities_moved += loud.iter().zip(&soft).filter(|(x, y)| x.velocity != y.velocity).count();
    }
    let pass = changed.is_empty();
    report(
        "gain invariance",
        pass,
        &format!(
            "x0.25 gain: {} of {} licks changed event boundaries {changed:?}; {velocities_moved} of {events} velocities changed",
            changed.len(),
            corpus.len()
        ),
    );
    assert!(pass);
}

fn mask(frames: usize, cells: &[(usize, u8)]) -> BinaryMask {
    let mut m = BinaryMask::empty(frames, 60, 62, 0.01).unwrap();
    for &(k, p) in cells {
        m.set(k, p, true);
    }
    m
}

#[test]
fn metric_self_tests() {
    let _guard = serial();
    let reference = mask(10, &[(0, 60), (1, 60), (2, 61), (3, 61)]);
    let half = mask(10, &[(0, 60), (1, 60)]);
    let a = f_measure(&half, &reference, None).unwrap();

    let ten: Vec<(usize, u8)> = (0..10).map(|k| (k, 60)).collect();
    let reference10 = mask(12, &ten);
    let missing_one = error_score(&mask(12, &ten[1..]), &reference10).unwrap().error_score;
    let empty = error_score(&mask(12, &[]), &reference10).unwrap().error_score;

    let pass = a.precision == 1.0 && a.recall == 0.5 && a.f_measure == 2.0 / 3.0 && missing_one == 0.1 && empty == 1.0;
    report(
        "metric self-tests",
        pass,
        &format!(
            "P={} R={} F={:.6} (1, 0.5, 2/3); E missing one={} (0.1); E empty det={} (1.0)",
            a.precision, a.recall, a.f_measure, missing_one, empty
        ),
    );
    assert!(pass);
}

#[test]
fn oracle_equivalence() {
    let _guard = serial();
    let cfg = AnalysisConfig { hop: 4096, ..AnalysisConfig::default() };
    let grid = PitchGrid::from_config(&cfg, FS).unwrap();
    let mut rng = StdRng::seed_from_u64(0x5eed);
    let mut worst = 0.0f64;
    for _ in 0..3 {
        let tones: Vec<ToneSpec> = (0..rng.random_range(1..=3))
            .map(|_| {
                ToneSpec::new(rng.random_range(40..=76), rng.random_range(0.0..0.2), rng.random_range(0.2..0.4))
                    .partials(rng.random_range(3..=10), rng.random_range(0.4..0.9))
                    .envelope(rng.random_range(0.0..3.0))
                    .amplitude(rng.random_range(0.1..0.6))
            })
            .collect();
        let mut samples = synthesize(&tones, FS, 0.45).unwrap().buffer.samples().to_vec();
        for x in &mut samples {
            *x += rng.random_range(-1e-3..1e-3);
        }
        let buf = AudioBuffer::new(samples, FS).unwrap();
        let (fw, fi) = pitchgram_pair(&buf, &grid, &cfg).unwrap();
        let (rw, ri) = pitchgram_time_reference(&buf, &grid, &cfg).unwrap();
        for (fast, slow) in [(&fw, &rw), (&fi, &ri)] {
            let scale = slow.scores().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (a, b) in fast.scores().iter().zip(slow.scores()) {
                worst = worst.max((a - b).abs() / scale);
            }
        }
    }
    let pass = worst <= 1e-9;
    report(
        "oracle equivalence",
        pass,
        &format!("3 random fixtures, worst deviation {worst:.2e} of the pitchgram's peak magnitude (<= 1e-9)"),
    );
    assert!(pass);
}

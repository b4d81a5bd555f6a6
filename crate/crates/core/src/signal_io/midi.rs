use std::collections::{HashMap, VecDeque};
use std::path::Path;

use midly::num::{u15, u24, u28, u4, u7};
use midly::{Format, Header, MetaMessage, MidiMessage, Smf, Timing, TrackEvent, TrackEventKind};

use super::{check_non_overlapping, NoteEvent, TimedNote};
use crate::error::{Error, Result};

pub const TICKS_PER_QUARTER: u16 = 480;
pub const EXPORT_BPM: f64 = 120.0;

const DEFAULT_TEMPO_US: u32 = 500_000;

/// Writes notes as a format-0 standard MIDI file at 480 ticks/quarter and 120 BPM.
pub fn export_midi(notes: &[NoteEvent], frame_period_s: f64, path: impl AsRef<Path>) -> Result<()> {
    if !(frame_period_s > 0.0) {
        return Err(Error::InvalidParameter("frame period must be positive".into()));
    }
    check_non_overlapping(notes)?;
    let tempo_us = (60e6 / EXPORT_BPM).round() as u32;
    let ticks_per_s = TICKS_PER_QUARTER as f64 * 1e6 / tempo_us as f64;
    let to_ticks = |frame: usize| (frame as f64 * frame_period_s * ticks_per_s).round() as u64;

    // (tick, is_on, pitch, velocity); offs sort before ons at equal ticks
    let mut raw: Vec<(u64, bool, u8, u8)> = Vec::with_capacity(notes.len() * 2);
    for n in notes {
        if n.pitch > 127 {
            return Err(Error::InvalidParameter(format!("pitch {} beyond MIDI range", n.pitch)));
        }
        raw.push((to_ticks(n.onset_frame), true, n.pitch, n.velocity.clamp(1, 127)));
        raw.push((to_ticks(n.offset_frame), false, n.pitch, 0));
    }
    raw.sort_by_key(|&(t, on, p, _)| (t, on, p));

    let mut track = vec![TrackEvent {
        delta: u28::new(0),
        kind: TrackEventKind::Meta(MetaMessage::Tempo(u24::new(tempo_us))),
    }];
    let mut last = 0u64;
    for (tick, on, pitch, vel) in raw {
        let message = if on {
            MidiMessage::NoteOn { key: u7::new(pitch), vel: u7::new(vel) }
        } else {
            MidiMessage::NoteOff { key: u7::new(pitch), vel: u7::new(0) }
        };
        track.push(TrackEvent {
            delta: u28::new((tick - last) as u32),
            kind: TrackEventKind::Midi { channel: u4::new(0), message },
        });
        last = tick;
    }
    track.push(TrackEvent {
        delta: u28::new(0),
        kind: TrackEventKind::Meta(MetaMessage::EndOfTrack),
    });

    let mut smf = Smf::new(Header::new(
        Format::SingleTrack,
        Timing::Metrical(u15::new(TICKS_PER_QUARTER)),
    ));
    smf.tracks.push(track);
    smf.save(path)?;
    Ok(())
}

/// Reads note-on/off pairs from a format-0 or format-1 file, in absolute seconds.
///
/// Pairs are matched first-in first-out per pitch; the tempo map is honored.
pub fn import_midi_seconds(path: impl AsRef<Path>) -> Result<Vec<TimedNote>> {
    let bytes = std::fs::read(path.as_ref())?;
    let smf = Smf::parse(&bytes).map_err(|e| Error::MalformedMidi(e.to_string()))?;
    if smf.header.format == Format::Sequential {
        return Err(Error::MalformedMidi("format 2 files are not supported".into()));
    }

    // merge tracks on absolute ticks; stable order keeps tempo events of track 0 first
    let mut events: Vec<(u64, usize, &TrackEventKind)> = Vec::new();
    for (ti, track) in smf.tracks.iter().enumerate() {
        let mut tick = 0u64;
        for ev in track {
            tick += u64::from(ev.delta.as_int());
            events.push((tick, ti, &ev.kind));
        }
    }
    events.sort_by_key(|&(t, ti, _)| (t, ti));

    let seconds_per_tick_fixed = match smf.header.timing {
        Timing::Metrical(_) => None,
        Timing::Timecode(fps, sub) => Some(1.0 / (fps.as_f32() as f64 * sub as f64)),
    };
    let tpq = match smf.header.timing {
        Timing::Metrical(t) => t.as_int() as f64,
        Timing::Timecode(..) => 1.0,
    };

    let mut tempo_us = DEFAULT_TEMPO_US as f64;
    let mut last_tick = 0u64;
    let mut now_s = 0.0f64;
    let mut open: HashMap<u8, VecDeque<(f64, u8)>> = HashMap::new();
    let mut notes = Vec::new();
    for (tick, _, kind) in events {
        let dt = (tick - last_tick) as f64;
        now_s += match seconds_per_tick_fixed {
            Some(spt) => dt * spt,
            None => dt * tempo_us * 1e-6 / tpq,
        };
        last_tick = tick;
        match kind {
            TrackEventKind::Meta(MetaMessage::Tempo(t)) => tempo_us = t.as_int() as f64,
            TrackEventKind::Midi { message, .. } => {
                let (key, on_vel) = match *message {
                    MidiMessage::NoteOn { key, vel } if vel.as_int() > 0 => (key.as_int(), Some(vel.as_int())),
                    MidiMessage::NoteOn { key, .. } | MidiMessage::NoteOff { key, .. } => (key.as_int(), None),
                    _ => continue,
                };
                match on_vel {
                    Some(v) => open.entry(key).or_default().push_back((now_s, v)),
                    None => {
                        if let Some((start, v)) = open.get_mut(&key).and_then(|q| q.pop_front()) {
                            notes.push(TimedNote { pitch: key, onset_s: start, offset_s: now_s, velocity: v });
                        }
                    }
                }
            }
            _ => {}
        }
    }
    if let Some((&pitch, q)) = open.iter().find(|(_, q)| !q.is_empty()) {
        return Err(Error::UnmatchedNoteOn { pitch, time_s: q[0].0 });
    }
    notes.sort_by(|a, b| a.onset_s.total_cmp(&b.onset_s).then(a.pitch.cmp(&b.pitch)));
    Ok(notes)
}

/// Reads a MIDI file and quantizes its notes to a frame grid of period `frame_period_s`.
pub fn import_midi(path: impl AsRef<Path>, frame_period_s: f64) -> Result<Vec<NoteEvent>> {
    if !(frame_period_s > 0.0) {
        return Err(Error::InvalidParameter("frame period must be positive".into()));
    }
    let mut out: Vec<NoteEvent> = import_midi_seconds(path)?
        .iter()
        .map(|n| n.to_frames(frame_period_s))
        .collect();
    out.sort_by_key(|n| (n.onset_frame, n.pitch));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HOP_S: f64 = 1024.0 / 44100.0;

    fn note(pitch: u8, on: usize, off: usize, vel: u8) -> NoteEvent {
        NoteEvent { pitch, onset_frame: on, offset_frame: off, velocity: vel }
    }

    #[test]
    fn single_note_times() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.mid");
        export_midi(&[note(69, 0, 10, 90)], 0.0232, &p).unwrap();
        let notes = import_midi_seconds(&p).unwrap();
        assert_eq!(notes.len(), 1);
        assert_eq!(notes[0].onset_s, 0.0);
        // one tick is 1/960 s at 120 BPM
        assert!((notes[0].offset_s - 0.232).abs() <= 0.5 / 960.0);
        assert_eq!(notes[0].velocity, 90);
    }

    #[test]
    fn roundtrip_events() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.mid");
        let notes = vec![note(57, 2, 20, 100), note(60, 20, 41, 64), note(64, 40, 63, 1), note(76, 40, 50, 127)];
        export_midi(&notes, HOP_S, &p).unwrap();
        assert_eq!(import_midi(&p, HOP_S).unwrap(), notes);
    }

    #[test]
    fn empty_sequence() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.mid");
        export_midi(&[], HOP_S, &p).unwrap();
        let smf_bytes = std::fs::read(&p).unwrap();
        let smf = Smf::parse(&smf_bytes).unwrap();
        assert_eq!(smf.header.format, Format::SingleTrack);
        assert!(import_midi(&p, HOP_S).unwrap().is_empty());
    }

    #[test]
    fn overlapping_same_pitch_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("o.mid");
        let err = export_midi(&[note(60, 0, 10, 64), note(60, 5, 12, 64)], HOP_S, &p);
        assert!(matches!(err, Err(Error::OverlappingNotes { .. })));
    }

    fn write_smf(path: &Path, events: Vec<(u32, TrackEventKind<'static>)>) {
        let mut track: Vec<TrackEvent> = events
            .into_iter()
            .map(|(d, kind)| TrackEvent { delta: u28::new(d), kind })
            .collect();
        track.push(TrackEvent { delta: u28::new(0), kind: TrackEventKind::Meta(MetaMessage::EndOfTrack) });
        let mut smf = Smf::new(Header::new(Format::SingleTrack, Timing::Metrical(u15::new(480))));
        smf.tracks.push(track);
        smf.save(path).unwrap();
    }

    fn on(key: u8) -> TrackEventKind<'static> {
        TrackEventKind::Midi { channel: u4::new(0), message: MidiMessage::NoteOn { key: u7::new(key), vel: u7::new(80) } }
    }

    fn off(key: u8) -> TrackEventKind<'static> {
        TrackEventKind::Midi { channel: u4::new(0), message: MidiMessage::NoteOn { key: u7::new(key), vel: u7::new(0) } }
    }

    #[test]
    fn unmatched_note_on() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("u.mid");
        write_smf(&p, vec![(0, on(60))]);
        assert!(matches!(import_midi_seconds(&p), Err(Error::UnmatchedNoteOn { pitch: 60, .. })));
    }

    #[test]
    fn tempo_change_mid_note() {
        // note-on at tick 0 (120 BPM), tempo change to 60 BPM at tick 480 (0.5 s),
        // note-off 480 ticks later: 0.5 s + 1.0 s
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.mid");
        write_smf(
            &p,
            vec![
                (0, TrackEventKind::Meta(MetaMessage::Tempo(u24::new(500_000)))),
                (0, on(62)),
                (480, TrackEventKind::Meta(MetaMessage::Tempo(u24::new(1_000_000)))),
                (480, off(62)),
            ],
        );
        let notes = import_midi_seconds(&p).unwrap();
        assert_eq!(notes.len(), 1);
        assert!((notes[0].offset_s - 1.5).abs() < 1e-12);
    }

    #[test]
    fn fifo_pairing() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.mid");
        write_smf(&p, vec![(0, on(60)), (480, on(60)), (480, off(60)), (480, off(60))]);
        let notes = import_midi_seconds(&p).unwrap();
        assert_eq!(notes.len(), 2);
        assert_eq!(notes[0].onset_s, 0.0);
        assert!((notes[0].offset_s - 1.0).abs() < 1e-12);
        assert!((notes[1].offset_s - 1.5).abs() < 1e-12);
    }

    #[test]
    fn garbage_is_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.mid");
        std::fs::write(&p, b"not a midi file at all").unwrap();
        assert!(matches!(import_midi_seconds(&p), Err(Error::MalformedMidi(_))));
    }
}

//! Binary `PGRM` container and CSV dumps.
//!
//! Layout (little-endian): magic `PGRM`, u16 version, u16 flags, u32 rows, u32 cols,
//! u32 hop, u32 sample rate, i32 first pitch, u32 reserved, then rows × cols f32.
//! Flag bits: 0 invariant variant, 1 frequency domain, 2 sinc kernel, 3 chromagram.

use std::io::{Read, Write};
use std::path::Path;

use super::{Chromagram, Domain, KernelKind, Pitchgram, PitchgramMeta, Variant};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"PGRM";
const VERSION: u16 = 1;
const HEADER_LEN: usize = 32;

const FLAG_INVARIANT: u16 = 1;
const FLAG_FREQ: u16 = 1 << 1;
const FLAG_SINC: u16 = 1 << 2;
const FLAG_CHROMA: u16 = 1 << 3;

const PITCH_CLASSES: [&str; 12] = ["C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B"];

#[derive(Debug, Clone, PartialEq)]
pub enum Container {
    Pitchgram(Pitchgram),
    Chromagram(Chromagram),
}

impl Container {
    fn layout(&self) -> (u16, usize, usize, usize, u32, i32, &[f64]) {
        match self {
            Container::Pitchgram(pg) => {
                let mut flags = 0;
                if pg.variant == Variant::PowerInvariant {
                    flags |= FLAG_INVARIANT;
                }
                if pg.domain == Domain::Frequency {
                    flags |= FLAG_FREQ;
                }
                if pg.kind == KernelKind::Sinc {
                    flags |= FLAG_SINC;
                }
                (flags, pg.frames, pg.pitch_count, pg.hop, pg.sample_rate_hz, pg.first_pitch, &pg.scores)
            }
            Container::Chromagram(z) => (FLAG_CHROMA, z.frames, 12, z.hop, z.sample_rate_hz, 0, &z.scores),
        }
    }

    fn column_labels(&self) -> Vec<String> {
        match self {
            Container::Pitchgram(pg) => (0..pg.pitch_count).map(|i| format!("p{}", pg.first_pitch + i as i32)).collect(),
            Container::Chromagram(_) => PITCH_CLASSES.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl From<Pitchgram> for Container {
    fn from(pg: Pitchgram) -> Self {
        Container::Pitchgram(pg)
    }
}

impl From<Chromagram> for Container {
    fn from(z: Chromagram) -> Self {
        Container::Chromagram(z)
    }
}

fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::BadContainer(format!("{what} {v} does not fit in 32 bits")))
}

pub fn write_container(c: &Container, path: impl AsRef<Path>) -> Result<()> {
    let (flags, rows, cols, hop, rate, first, values) = c.layout();
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * values.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&flags.to_le_bytes());
    out.extend_from_slice(&to_u32(rows, "row count")?.to_le_bytes());
    out.extend_from_slice(&to_u32(cols, "column count")?.to_le_bytes());
    out.extend_from_slice(&to_u32(hop, "hop")?.to_le_bytes());
    out.extend_from_slice(&rate.to_le_bytes());
    out.extend_from_slice(&first.to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    for v in values {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    std::fs::File::create(path)?.write_all(&out)?;
    Ok(())
}

pub fn read_container(path: impl AsRef<Path>) -> Result<Container> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(Error::BadContainer("missing PGRM header".into()));
    }
    let u16_at = |i: usize| u16::from_le_bytes([bytes[i], bytes[i + 1]]);
    let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
    let version = u16_at(4);
    if version != VERSION {
        return Err(Error::BadContainer(format!("unsupported version {version}")));
    }
    let flags = u16_at(6);
    let (rows, cols) = (u32_at(8) as usize, u32_at(12) as usize);
    let (hop, rate) = (u32_at(16) as usize, u32_at(20));
    let first = u32_at(24) as i32;
    let body = &bytes[HEADER_LEN..];
    let expected = rows.checked_mul(cols).and_then(|n| n.checked_mul(4));
    if expected != Some(body.len()) || rows == 0 || cols == 0 {
        return Err(Error::BadContainer(format!("{rows}x{cols} header does not match {} data bytes", body.len())));
    }
    let values: Vec<f64> = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    if flags & FLAG_CHROMA != 0 {
        if cols != 12 {
            return Err(Error::BadContainer(format!("chromagram with {cols} columns")));
        }
        return Ok(Container::Chromagram(Chromagram { scores: values, frames: rows, hop, sample_rate_hz: rate }));
    }
    let meta = PitchgramMeta {
        first_pitch: first,
        pitch_count: cols,
        hop,
        sample_rate_hz: rate,
        variant: if flags & FLAG_INVARIANT != 0 { Variant::PowerInvariant } else { Variant::PowerWeighted },
        domain: if flags & FLAG_FREQ != 0 { Domain::Frequency } else { Domain::Time },
        kind: if flags & FLAG_SINC != 0 { KernelKind::Sinc } else { KernelKind::Bident },
    };
    Pitchgram::new(values, meta).map(Container::Pitchgram)
}

/// One frame per row: `frame,time_s,<column labels>`.
pub fn write_csv(c: &Container, path: impl AsRef<Path>) -> Result<()> {
    let (_, rows, cols, hop, rate, _, values) = c.layout();
    let mut text = format!("frame,time_s,{}\n", c.column_labels().join(","));
    for m in 0..rows {
        text.push_str(&format!("{m},{:.6}", (m * hop) as f64 / rate as f64));
        for v in &values[m * cols..(m + 1) * cols] {
            text.push_str(&format!(",{v:e}"));
        }
        text.push('\n');
    }
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pitchgram::chromagram;

    fn sample() -> Pitchgram {
        let meta = PitchgramMeta {
            first_pitch: 40,
            pitch_count: 13,
            hop: 1024,
            sample_rate_hz: 44100,
            variant: Variant::PowerInvariant,
            domain: Domain::Frequency,
            kind: KernelKind::Sinc,
        };
        Pitchgram::new((0..39).map(|i| i as f64 * 0.25 - 3.0).collect(), meta).unwrap()
    }

    #[test]
    fn header_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.pgm");
        write_container(&sample().into(), &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..4], b"PGRM");
        assert_eq!(u16::from_le_bytes([bytes[6], bytes[7]]), 0b111);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 13);
        assert_eq!(bytes.len(), 32 + 39 * 4);
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.pgm");
        let pg = sample();
        write_container(&pg.clone().into(), &path).unwrap();
        assert_eq!(read_container(&path).unwrap(), Container::Pitchgram(pg.clone()));
        let z = chromagram(&pg).unwrap();
        write_container(&z.clone().into(), &path).unwrap();
        assert_eq!(read_container(&path).unwrap(), Container::Chromagram(z));
    }

    #[test]
    fn rejects_corrupt_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.pgm");
        std::fs::write(&path, b"PGRM\x01\x00").unwrap();
        assert!(matches!(read_container(&path), Err(Error::BadContainer(_))));
        write_container(&sample().into(), &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.pop();
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(read_container(&path), Err(Error::BadContainer(_))));
    }

    #[test]
    fn csv_has_one_row_per_frame() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        write_csv(&sample().into(), &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].starts_with("frame,time_s,p40,p41"));
        assert_eq!(lines[2].split(',').count(), 15);
    }
}

//! Time-domain filter bank: comb → harmonicity → ACF → compression → kernel score.

use std::sync::Arc;

use super::parallel::map_frames;
use super::{extract_frame, frame_count, Domain, PitchGrid, Pitchgram, PitchgramMeta, Variant};
use crate::acf::{acc, acf, compress, AcfMethod, FftAcf};
use crate::bident::{score, score_lags, FilterKernel, KernelCache};
use crate::comb::{comb_feedback, frame_harmonicity, harmonicity, weight_by_harmonicity, CombParams};
use crate::config::AnalysisConfig;
use crate::error::{Error, Result};
use crate::signal_io::AudioBuffer;

struct Setup {
    frame_len: usize,
    max_lag: usize,
    periods: Vec<usize>,
    kernels: Vec<Arc<FilterKernel>>,
}

impl Setup {
    fn new(buf: &AudioBuffer, grid: &PitchGrid, cfg: &AnalysisConfig) -> Result<Self> {
        cfg.validate()?;
        if buf.sample_rate_hz() != grid.sample_rate_hz() {
            return Err(Error::ShapeMismatch(format!(
                "audio at {} Hz, pitch grid built for {} Hz",
                buf.sample_rate_hz(),
                grid.sample_rate_hz()
            )));
        }
        let params = cfg.bident_params();
        let frame_len = cfg.frame_periods * grid.max_period();
        if buf.len() < frame_len {
            return Err(Error::SignalTooShort { needed: frame_len, got: buf.len() });
        }
        let periods = grid.periods();
        let cache = KernelCache::global();
        let kernels = periods
            .iter()
            .map(|&n0| cache.get(n0, &params, cfg.kernel))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { frame_len, max_lag: params.span_periods * grid.max_period(), periods, kernels })
    }

    fn meta(&self, grid: &PitchGrid, cfg: &AnalysisConfig, variant: Variant) -> PitchgramMeta {
        PitchgramMeta {
            first_pitch: grid.lo(),
            pitch_count: grid.len(),
            hop: cfg.hop,
            sample_rate_hz: grid.sample_rate_hz(),
            variant,
            domain: Domain::Time,
            kind: cfg.kernel,
        }
    }

    fn start(&self, m: usize, hop: usize) -> isize {
        (m * hop) as isize - (self.frame_len / 2) as isize
    }
}

/// Time-domain pitchgram of the configured variant.
pub fn pitchgram_time(buf: &AudioBuffer, grid: &PitchGrid, cfg: &AnalysisConfig) -> Result<Pitchgram> {
    let (w, i) = run(buf, grid, cfg, cfg.variant == Variant::PowerWeighted, cfg.variant == Variant::PowerInvariant)?;
    Ok(w.or(i).expect("one variant requested"))
}

pub(super) fn pair(buf: &AudioBuffer, grid: &PitchGrid, cfg: &AnalysisConfig) -> Result<(Pitchgram, Pitchgram)> {
    let (w, i) = run(buf, grid, cfg, true, true)?;
    Ok((w.expect("weighted requested"), i.expect("invariant requested")))
}

fn run(
    buf: &AudioBuffer,
    grid: &PitchGrid,
    cfg: &AnalysisConfig,
    want_weighted: bool,
    want_invariant: bool,
) -> Result<(Option<Pitchgram>, Option<Pitchgram>)> {
    let setup = Setup::new(buf, grid, cfg)?;
    let frames = frame_count(buf.len(), cfg.hop);
    let fft = (cfg.acf_method == AcfMethod::Fft).then(|| FftAcf::new(setup.frame_len));
    let samples = buf.samples();
    let p = setup.periods.len();

    let rows = map_frames(
        frames,
        || vec![0.0; setup.frame_len],
        |frame, m| {
            extract_frame(samples, setup.start(m, cfg.hop), frame);
            let mut weighted = vec![0.0; if want_weighted { p } else { 0 }];
            let mut invariant = vec![0.0; if want_invariant { p } else { 0 }];
            let r = match &fft {
                Some(f) => f.compute(frame, setup.max_lag)?,
                None => acf(frame, setup.max_lag)?,
            };
            let power = r.power();
            if power <= 0.0 {
                return Ok((weighted, invariant));
            }
            let r = if cfg.compression { compress(&r)? } else { r };
            // acf(η·x) = η²·acf(x), so one ACF per frame serves every channel
            let norm = if cfg.compression { power.sqrt() } else { power };
            for (i, (&n0, kernel)) in setup.periods.iter().zip(&setup.kernels).enumerate() {
                let s = score_lags(r.values(), kernel)?;
                if want_weighted {
                    let eta = frame_harmonicity(frame, &CombParams::new(cfg.comb_gain, n0))?;
                    weighted[i] = if cfg.compression { eta * s } else { eta * eta * s };
                }
                if want_invariant {
                    invariant[i] = s / norm;
                }
            }
            Ok((weighted, invariant))
        },
    )?;

    let assemble = |variant: Variant, pick: &dyn Fn(&(Vec<f64>, Vec<f64>)) -> &Vec<f64>| {
        let scores: Vec<f64> = rows.iter().flat_map(|row| pick(row).iter().copied()).collect();
        Pitchgram::new(scores, setup.meta(grid, cfg, variant))
    };
    let w = want_weighted.then(|| assemble(Variant::PowerWeighted, &|r| &r.0)).transpose()?;
    let i = want_invariant.then(|| assemble(Variant::PowerInvariant, &|r| &r.1)).transpose()?;
    Ok((w, i))
}

/// Channel-by-channel evaluation without the shared-ACF factorization.
///
/// Each pitch filters the frame, weights the original frame by its own harmonicity
/// and takes a separate ACF. Slow; used to check the fast path. Returns `(weighted, invariant)`.
pub fn pitchgram_time_reference(
    buf: &AudioBuffer,
    grid: &PitchGrid,
    cfg: &AnalysisConfig,
) -> Result<(Pitchgram, Pitchgram)> {
    let setup = Setup::new(buf, grid, cfg)?;
    let frames = frame_count(buf.len(), cfg.hop);
    let p = setup.periods.len();
    let mut weighted = vec![0.0; frames * p];
    let mut invariant = vec![0.0; frames * p];
    let mut frame = vec![0.0; setup.frame_len];
    for m in 0..frames {
        extract_frame(buf.samples(), setup.start(m, cfg.hop), &mut frame);
        let raw = acf(&frame, setup.max_lag)?;
        if raw.power() <= 0.0 {
            continue;
        }
        let normalized = acc(&raw)?;
        let normalized = if cfg.compression { compress(&normalized)? } else { normalized };
        for (i, (&n0, kernel)) in setup.periods.iter().zip(&setup.kernels).enumerate() {
            let filtered = comb_feedback(&frame, &CombParams::new(cfg.comb_gain, n0))?;
            let eta = harmonicity(&filtered[filtered.len() - n0..], n0)?;
            let y = weight_by_harmonicity(&frame, eta);
            let r = acf(&y, setup.max_lag)?;
            let r = if cfg.compression { compress(&r)? } else { r };
            weighted[m * p + i] = score(&r, kernel)?;
            invariant[m * p + i] = score(&normalized, kernel)?;
        }
    }
    Ok((
        Pitchgram::new(weighted, setup.meta(grid, cfg, Variant::PowerWeighted))?,
        Pitchgram::new(invariant, setup.meta(grid, cfg, Variant::PowerInvariant))?,
    ))
}

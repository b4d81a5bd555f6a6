//! Frequency-domain filter bank: windowed DFT with reassigned bin frequencies scored against bident responses.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::parallel::map_frames;
use super::{extract_frame, frame_count, Domain, PitchGrid, Pitchgram, PitchgramMeta, Variant};
use crate::bident::KernelKind;
use crate::config::{AnalysisConfig, Window};
use crate::error::{Error, Result};
use crate::signal_io::AudioBuffer;

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

pub(crate) fn window(kind: Window, len: usize) -> Vec<f64> {
    let l = len as f64;
    (0..len)
        .map(|n| {
            let c = (2.0 * PI * n as f64 / l).cos();
            match kind {
                Window::Hamming => 0.54 - 0.46 * c,
                Window::Hann => 0.5 - 0.5 * c,
            }
        })
        .collect()
}

/// Bins below this fraction of the frame's strongest bin are skipped when scoring.
const SIGNIFICANCE: f64 = 1e-10;

/// Windowed spectrum with per-bin reassigned frequencies.
struct Analyzer {
    fft: Arc<dyn Fft<f64>>,
    window: Vec<f64>,
    derivative: Vec<f64>,
    scale: f64,
}

/// One-sided power per bin (summing to the window-compensated mean power) and the
/// frequency, in cycles per sample, of the sinusoid dominating each bin.
struct Spectrum {
    power: Vec<f64>,
    freq: Vec<f64>,
    plain: Vec<Complex<f64>>,
    deriv: Vec<Complex<f64>>,
}

impl Spectrum {
    fn new(len: usize) -> Self {
        Self {
            power: vec![0.0; len / 2 + 1],
            freq: vec![0.0; len / 2 + 1],
            plain: Vec::with_capacity(len),
            deriv: Vec::with_capacity(len),
        }
    }
}

impl Analyzer {
    fn new(kind: Window, len: usize) -> Self {
        let window = window(kind, len);
        let derivative = window_derivative(kind, len);
        let energy: f64 = window.iter().map(|w| w * w).sum();
        Self {
            fft: FftPlanner::new().plan_fft_forward(len),
            scale: 1.0 / (len as f64 * energy),
            window,
            derivative,
        }
    }

    fn analyze(&self, frame: &[f64], out: &mut Spectrum) {
        let len = self.window.len();
        out.plain.clear();
        out.plain.extend(frame.iter().zip(&self.window).map(|(x, w)| Complex::new(x * w, 0.0)));
        out.deriv.clear();
        out.deriv.extend(frame.iter().zip(&self.derivative).map(|(x, w)| Complex::new(x * w, 0.0)));
        self.fft.process(&mut out.plain);
        self.fft.process(&mut out.deriv);
        let last = len / 2;
        for k in 0..=last {
            let x = out.plain[k];
            let mag2 = x.norm_sqr();
            let fold = if k == 0 || (k == last && len % 2 == 0) { 1.0 } else { 2.0 };
            out.power[k] = fold * mag2 * self.scale;
            let bin = k as f64 / len as f64;
            // X_dw / X_w = j·(ω_k − ω_0) for a sinusoid at ω_0
            let shift = if mag2 > 0.0 { (out.deriv[k] * x.conj()).im / mag2 / (2.0 * PI) } else { 0.0 };
            out.freq[k] = (bin - shift).clamp(0.0, 0.5);
        }
    }
}

/// Derivative of the window with respect to the sample index.
fn window_derivative(kind: Window, len: usize) -> Vec<f64> {
    let l = len as f64;
    let a1 = match kind {
        Window::Hamming => 0.46,
        Window::Hann => 0.5,
    };
    (0..len).map(|n| a1 * 2.0 * PI / l * (2.0 * PI * n as f64 / l).sin()).collect()
}

fn comb_power_response(gain: f64, period: usize, f_norm: f64) -> f64 {
    // |1 / (1 − a·e^{−j2πf·N0})|²
    1.0 / (1.0 + gain * gain - 2.0 * gain * (2.0 * PI * f_norm * period as f64).cos())
}

/// `comb_power_response` tabulated over one period of `f·N0`, shared by every channel.
struct CombTable {
    values: Vec<f64>,
}

impl CombTable {
    const SIZE: usize = 8192;

    fn new(gain: f64) -> Self {
        let values = (0..=Self::SIZE).map(|i| comb_power_response(gain, 1, i as f64 / Self::SIZE as f64)).collect();
        Self { values }
    }

    fn at(&self, f_norm: f64, period: usize) -> f64 {
        let x = f_norm * period as f64;
        let pos = (x - x.floor()) * Self::SIZE as f64;
        let i = (pos as usize).min(Self::SIZE - 1);
        let t = pos - i as f64;
        self.values[i] + t * (self.values[i + 1] - self.values[i])
    }
}

/// Per-channel bident response in normalized frequency.
///
/// Each sinc lobe is cut off a quarter of `f0` from its center (six zero crossings),
/// so only the bins in `ranges` contribute to the score.
struct Channel {
    f0: f64,
    width: f64,
    period: usize,
    ranges: Vec<(usize, usize)>,
}

struct Bank {
    channels: Vec<Channel>,
    alpha: f64,
    beta: f64,
    kind: KernelKind,
    comb: CombTable,
}

/// Bins whose reassigned frequency may land within `reach` of a center.
fn bin_ranges(centers: &[f64], reach: f64, len: usize) -> Vec<(usize, usize)> {
    // reassignment moves a frequency by at most a couple of bins from its own
    const MARGIN: f64 = 3.0;
    let last = len / 2;
    let mut ranges: Vec<(usize, usize)> = Vec::new();
    for &c in centers {
        let lo = ((c - reach) * len as f64 - MARGIN).floor().max(0.0) as usize;
        let hi = (((c + reach) * len as f64 + MARGIN).ceil() as usize).min(last);
        if lo > hi {
            continue;
        }
        match ranges.last_mut() {
            Some(prev) if lo <= prev.1 + 1 => prev.1 = prev.1.max(hi),
            _ => ranges.push((lo, hi)),
        }
    }
    ranges
}

impl Bank {
    fn new(grid: &PitchGrid, cfg: &AnalysisConfig) -> Self {
        let fs = grid.sample_rate_hz() as f64;
        let params = cfg.bident_params();
        let channels = grid
            .pitches()
            .map(|p| {
                let n0 = grid.period(p);
                let f0 = grid.freq(p) / fs;
                let centers: &[f64] = match cfg.kernel {
                    KernelKind::Bident => &[f0 / 2.0, f0, 2.0 * f0],
                    KernelKind::Sinc => &[f0],
                };
                Channel {
                    f0,
                    width: (2 * params.span_periods * n0) as f64,
                    period: n0,
                    ranges: bin_ranges(centers, f0 / 4.0, cfg.dft_size),
                }
            })
            .collect();
        Self {
            channels,
            alpha: params.alpha,
            beta: params.beta,
            kind: cfg.kernel,
            comb: CombTable::new(cfg.comb_gain),
        }
    }

    fn response(&self, c: &Channel, f: f64) -> f64 {
        let reach = c.f0 / 4.0;
        let s = |df: f64| if df.abs() < reach { sinc(df * c.width) } else { 0.0 };
        match self.kind {
            KernelKind::Bident => {
                self.alpha / 4.0 * (s(f - c.f0) - s(f - 2.0 * c.f0)) - self.beta / 2.0 * s(f - c.f0 / 2.0)
            }
            KernelKind::Sinc => 0.5 * s(f - c.f0),
        }
    }
}

fn check(buf: &AudioBuffer, grid: &PitchGrid, cfg: &AnalysisConfig) -> Result<()> {
    cfg.validate()?;
    if buf.sample_rate_hz() != grid.sample_rate_hz() {
        return Err(Error::ShapeMismatch(format!(
            "audio at {} Hz, pitch grid built for {} Hz",
            buf.sample_rate_hz(),
            grid.sample_rate_hz()
        )));
    }
    let bin = grid.sample_rate_hz() as f64 / cfg.dft_size as f64;
    let f_lo = grid.freq(grid.lo());
    if bin > f_lo / 4.0 {
        return Err(Error::DftTooSmall {
            dft_size: cfg.dft_size,
            pitch: grid.lo(),
            reason: format!("bin width {bin:.2} Hz exceeds a quarter of {f_lo:.2} Hz"),
        });
    }
    if buf.len() < cfg.dft_size {
        return Err(Error::SignalTooShort { needed: cfg.dft_size, got: buf.len() });
    }
    Ok(())
}

/// Frequency-domain pitchgram of the configured variant.
pub fn pitchgram_freq(buf: &AudioBuffer, grid: &PitchGrid, cfg: &AnalysisConfig) -> Result<Pitchgram> {
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
    check(buf, grid, cfg)?;
    let len = cfg.dft_size;
    let analyzer = Analyzer::new(cfg.window, len);
    let bank = Bank::new(grid, cfg);
    let frames = frame_count(buf.len(), cfg.hop);
    let p = grid.len();

    let rows = map_frames(
        frames,
        || (vec![0.0; len], Spectrum::new(len), Vec::<usize>::new()),
        |(frame, spec, significant), m| {
            let mut weighted = vec![0.0; if want_weighted { p } else { 0 }];
            let mut invariant = vec![0.0; if want_invariant { p } else { 0 }];
            extract_frame(buf.samples(), (m * cfg.hop) as isize - (len / 2) as isize, frame);
            analyzer.analyze(frame, spec);
            let total: f64 = spec.power.iter().sum();
            if total <= 0.0 {
                return Ok((weighted, invariant));
            }
            let floor = spec.power.iter().cloned().fold(0.0, f64::max) * SIGNIFICANCE;
            significant.clear();
            significant.extend((0..spec.power.len()).filter(|&k| spec.power[k] > floor));
            let norm = if cfg.compression { total.sqrt() } else { total };
            for (i, c) in bank.channels.iter().enumerate() {
                let mut score = 0.0;
                for &(lo, hi) in &c.ranges {
                    for k in lo..=hi {
                        let pw = spec.power[k];
                        if pw > floor {
                            let mag = if cfg.compression { pw.sqrt() } else { pw };
                            score += mag * bank.response(c, spec.freq[k]);
                        }
                    }
                }
                if want_weighted {
                    let eta2: f64 =
                        significant.iter().map(|&k| spec.power[k] * bank.comb.at(spec.freq[k], c.period)).sum();
                    weighted[i] = if cfg.compression { eta2.sqrt() * score } else { eta2 * score };
                }
                if want_invariant {
                    invariant[i] = score / norm;
                }
            }
            Ok((weighted, invariant))
        },
    )?;

    let meta = |variant| PitchgramMeta {
        first_pitch: grid.lo(),
        pitch_count: p,
        hop: cfg.hop,
        sample_rate_hz: grid.sample_rate_hz(),
        variant,
        domain: Domain::Frequency,
        kind: cfg.kernel,
    };
    let w = if want_weighted {
        Some(Pitchgram::new(rows.iter().flat_map(|r| r.0.iter().copied()).collect(), meta(Variant::PowerWeighted))?)
    } else {
        None
    };
    let i = if want_invariant {
        Some(Pitchgram::new(rows.iter().flat_map(|r| r.1.iter().copied()).collect(), meta(Variant::PowerInvariant))?)
    } else {
        None
    };
    Ok((w, i))
}

/// Harmonicity estimated from the windowed spectrum of `frame` and the comb's power response.
///
/// Each bin is weighted by the comb response at its reassigned frequency, so the
/// window's spectral smearing does not dilute the narrow comb teeth.
pub fn spectral_harmonicity(frame: &[f64], period: usize, gain: f64, kind: Window) -> Result<f64> {
    if frame.len() < 2 || period == 0 {
        return Err(Error::InvalidParameter("spectral harmonicity needs a frame and a positive period".into()));
    }
    if gain.abs() >= 1.0 {
        return Err(Error::UnstableComb(gain));
    }
    let analyzer = Analyzer::new(kind, frame.len());
    let mut spec = Spectrum::new(frame.len());
    analyzer.analyze(frame, &mut spec);
    Ok(spec
        .power
        .iter()
        .zip(&spec.freq)
        .map(|(p, f)| p * comb_power_response(gain, period, *f))
        .sum::<f64>()
        .sqrt())
}

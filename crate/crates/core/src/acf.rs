//! Autocorrelation, power normalization and magnitude compression.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Biased autocorrelation over lags `0..len`.
#[derive(Debug, Clone, PartialEq)]
pub struct AcfSeries {
    values: Vec<f64>,
    normalized: bool,
    compressed: bool,
}

impl AcfSeries {
    pub fn from_raw(values: Vec<f64>) -> Self {
        Self { values, normalized: false, compressed: false }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn is_compressed(&self) -> bool {
        self.compressed
    }

    /// Mean signal power (zero-lag value).
    pub fn power(&self) -> f64 {
        self.values[0]
    }

    /// Multiplies every lag by `factor`, keeping flags.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * factor).collect(),
            ..*self
        }
    }
}

/// How the lag series is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Deserialize, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AcfMethod {
    /// Direct lag-by-lag sum.
    #[default]
    Direct,
    /// Zero-padded FFT; agrees with the direct sum to rounding.
    Fft,
}

/// `r(ν) = (1/N)·Σ_{n=0}^{N−1} y(n)·y(n−ν)` for `ν = 0..max_lag`, zero outside the frame.
pub fn acf(y: &[f64], max_lag: usize) -> Result<AcfSeries> {
    check_lag(y, max_lag)?;
    let n = y.len() as f64;
    let values = (0..max_lag).map(|lag| dot(&y[lag..], &y[..y.len() - lag]) / n).collect();
    Ok(AcfSeries::from_raw(values))
}

fn check_lag(y: &[f64], max_lag: usize) -> Result<()> {
    if max_lag == 0 {
        return Err(Error::InvalidParameter("max_lag must be at least 1".into()));
    }
    if y.len() < max_lag {
        return Err(Error::InsufficientSamples { needed: max_lag, got: y.len() });
    }
    Ok(())
}

/// Four independent accumulators so the loop vectorizes.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let len = a.len().min(b.len());
    let (a, b) = (&a[..len], &b[..len]);
    let mut acc = [0.0f64; 4];
    let chunks = len / 4;
    for i in 0..chunks {
        let j = 4 * i;
        acc[0] += a[j] * b[j];
        acc[1] += a[j + 1] * b[j + 1];
        acc[2] += a[j + 2] * b[j + 2];
        acc[3] += a[j + 3] * b[j + 3];
    }
    let mut tail = 0.0;
    for j in 4 * chunks..len {
        tail += a[j] * b[j];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// FFT-based autocorrelation with a cached plan for one frame length.
pub struct FftAcf {
    frame_len: usize,
    fft_len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl FftAcf {
    pub fn new(frame_len: usize) -> Self {
        let fft_len = (2 * frame_len).next_power_of_two();
        let mut planner = FftPlanner::new();
        Self {
            frame_len,
            fft_len,
            forward: planner.plan_fft_forward(fft_len),
            inverse: planner.plan_fft_inverse(fft_len),
        }
    }

    pub fn compute(&self, y: &[f64], max_lag: usize) -> Result<AcfSeries> {
        check_lag(y, max_lag)?;
        if y.len() != self.frame_len {
            return Err(Error::ShapeMismatch(format!(
                "FFT ACF planned for {} samples, got {}",
                self.frame_len,
                y.len()
            )));
        }
        let mut buf: Vec<Complex<f64>> = y.iter().map(|&v| Complex::new(v, 0.0)).collect();
        buf.resize(self.fft_len, Complex::new(0.0, 0.0));
        self.forward.process(&mut buf);
        for c in buf.iter_mut() {
            *c = Complex::new(c.norm_sqr(), 0.0);
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / (self.fft_len as f64 * y.len() as f64);
        Ok(AcfSeries::from_raw(buf[..max_lag].iter().map(|c| c.re * scale).collect()))
    }
}

/// Divides every lag by the zero-lag power.
pub fn acc(r: &AcfSeries) -> Result<AcfSeries> {
    if r.normalized {
        return Err(Error::AlreadyNormalized);
    }
    if r.is_empty() || r.values[0] <= 0.0 {
        return Err(Error::SilentFrame);
    }
    let p = r.values[0];
    Ok(AcfSeries {
        values: r.values.iter().map(|v| v / p).collect(),
        normalized: true,
        compressed: r.compressed,
    })
}

/// Signed square root of every lag.
pub fn compress(r: &AcfSeries) -> Result<AcfSeries> {
    if r.compressed {
        return Err(Error::AlreadyCompressed);
    }
    Ok(AcfSeries {
        values: r.values.iter().map(|&v| signed_sqrt(v)).collect(),
        normalized: r.normalized,
        compressed: true,
    })
}

#[inline]
pub(crate) fn signed_sqrt(v: f64) -> f64 {
    v.signum() * v.abs().sqrt() * f64::from(u8::from(v != 0.0))
}

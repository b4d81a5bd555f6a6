//! Pitch-synchronous comb pre-filter and harmonicity coefficient.

use crate::error::{Error, Result};

/// Default comb scaling factor.
pub const DEFAULT_COMB_GAIN: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CombParams {
    /// Scaling factor `a` of the delayed term.
    pub gain: f64,
    /// Pitch period in samples.
    pub period: usize,
}

impl CombParams {
    pub fn new(gain: f64, period: usize) -> Self {
        Self { gain, period }
    }

    fn check_period(&self) -> Result<()> {
        if self.period < 1 {
            return Err(Error::InvalidParameter("comb period must be at least one sample".into()));
        }
        Ok(())
    }
}

/// `y(n) = x(n) + a·x(n − N0)`, with `x(n) = 0` for `n < 0`.
pub fn comb_feedforward(x: &[f64], params: &CombParams) -> Result<Vec<f64>> {
    params.check_period()?;
    if !(-1.0..=1.0).contains(&params.gain) {
        return Err(Error::InvalidParameter(format!("feed-forward gain {} outside [-1, 1]", params.gain)));
    }
    let n0 = params.period;
    Ok(x.iter()
        .enumerate()
        .map(|(n, &v)| if n >= n0 { v + params.gain * x[n - n0] } else { v })
        .collect())
}

/// `y(n) = x(n) + a·y(n − N0)` from a zero initial state. Requires `|a| < 1`.
pub fn comb_feedback(x: &[f64], params: &CombParams) -> Result<Vec<f64>> {
    params.check_period()?;
    if params.gain.abs() >= 1.0 || !params.gain.is_finite() {
        return Err(Error::UnstableComb(params.gain));
    }
    let n0 = params.period;
    let mut y = x.to_vec();
    // the recursion only reaches back N0 samples, so each block of N0 is a plain axpy
    let mut start = n0;
    while start < y.len() {
        let end = (start + n0).min(y.len());
        let (done, rest) = y.split_at_mut(start);
        let prev = &done[start - n0..end - n0];
        for (out, &p) in rest[..end - start].iter_mut().zip(prev) {
            *out += params.gain * p;
        }
        start = end;
    }
    Ok(y)
}

/// RMS over exactly the first `period` samples of `x_tilde`.
pub fn harmonicity(x_tilde: &[f64], period: usize) -> Result<f64> {
    if period == 0 {
        return Err(Error::InvalidParameter("period must be positive".into()));
    }
    if x_tilde.len() < period {
        return Err(Error::InsufficientSamples { needed: period, got: x_tilde.len() });
    }
    let sum: f64 = x_tilde[..period].iter().map(|v| v * v).sum();
    Ok((sum / period as f64).sqrt())
}

/// Scales the original (unfiltered) signal by its harmonicity coefficient.
pub fn weight_by_harmonicity(x: &[f64], eta: f64) -> Vec<f64> {
    x.iter().map(|v| eta * v).collect()
}

/// Harmonicity of the final period of a frame after feed-backward comb filtering.
///
/// Equivalent to running [`comb_feedback`] over the whole frame and taking the RMS
/// of its last `period` outputs, but only evaluates those outputs.
pub fn frame_harmonicity(frame: &[f64], params: &CombParams) -> Result<f64> {
    params.check_period()?;
    if params.gain.abs() >= 1.0 {
        return Err(Error::UnstableComb(params.gain));
    }
    let n0 = params.period;
    if frame.len() < n0 {
        return Err(Error::InsufficientSamples { needed: n0, got: frame.len() });
    }
    let len = frame.len();
    let mut acc = vec![0.0; n0];
    // y(n) = Σ_k a^k x(n − kN0); walk the delay lines from the oldest block forward
    let tail_start = len - n0;
    let blocks = tail_start / n0 + usize::from(tail_start % n0 != 0);
    for b in (0..=blocks).rev() {
        let offset = b * n0;
        for (i, slot) in acc.iter_mut().enumerate() {
            *slot *= params.gain;
            if let Some(idx) = (tail_start + i).checked_sub(offset) {
                *slot += frame[idx];
            }
        }
    }
    let sum: f64 = acc.iter().map(|v| v * v).sum();
    Ok((sum / n0 as f64).sqrt())
}

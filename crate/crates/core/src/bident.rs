//! Cosine-modulated chromatic bident and sinc analysis kernels.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock, RwLock};

use crate::acf::{dot, AcfSeries};
use crate::error::{Error, Result};

/// Periods covered by the one-sided kernel support.
pub const DEFAULT_SPAN_PERIODS: usize = 12;

/// Half-width (in periods) of the two-sided average used at exact tan poles.
const POLE_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, serde::Deserialize, serde::Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct BidentParams {
    pub alpha: f64,
    pub beta: f64,
    pub span_periods: usize,
}

impl Default for BidentParams {
    /// `α = 2, β = 1` gives three spikes of equal magnitude.
    fn default() -> Self {
        Self { alpha: 2.0, beta: 1.0, span_periods: DEFAULT_SPAN_PERIODS }
    }
}

impl BidentParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta must be non-negative, got {}", self.beta)));
        }
        if self.span_periods == 0 {
            return Err(Error::InvalidParameter("span_periods must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, serde::Deserialize, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    #[default]
    Bident,
    Sinc,
}

impl std::str::FromStr for KernelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bident" => Ok(Self::Bident),
            "sinc" => Ok(Self::Sinc),
            other => Err(Error::InvalidParameter(format!("unknown kernel kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterKernel {
    taps: Vec<f64>,
    kind: KernelKind,
    period: usize,
}

impl FilterKernel {
    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }
}

fn is_tan_pole(n: usize, period: usize) -> bool {
    // πn/N0 = π/2 + kπ  ⇔  2n ≡ N0 (mod 2·N0)
    (2 * n) % (2 * period) == period
}

fn g_at(u: f64, params: &BidentParams) -> f64 {
    params.alpha * (3.0 * PI * u).sin() * (PI * u).tan() - params.beta
}

/// Prototype `g(n) = α·sin(3πn/N0)·tan(πn/N0) − β`.
///
/// At an exact tan pole (even `N0`) the value is the mean of `g` just either side of it.
pub fn prototype_g(n: usize, period: usize, params: &BidentParams) -> Result<f64> {
    if period < 2 {
        return Err(Error::InvalidParameter(format!("kernel period must be at least 2, got {period}")));
    }
    let support = params.span_periods * period;
    if n >= support {
        return Err(Error::InvalidParameter(format!("tap index {n} outside kernel support {support}")));
    }
    let u = n as f64 / period as f64;
    if is_tan_pole(n, period) {
        return Ok(0.5 * (g_at(u - POLE_EPS, params) + g_at(u + POLE_EPS, params)));
    }
    Ok(g_at(u, params))
}

/// Kernel taps `h(n)` for `n = 0..span·N0`.
///
/// The bident taps are evaluated as `α·sin(3πu)·sin(πu) − β·cos(πu)`, which equals
/// `g(n)·cos(πn/N0)` everywhere and stays finite where `tan` has a pole.
pub fn build_kernel(period: usize, params: &BidentParams, kind: KernelKind) -> Result<FilterKernel> {
    if period < 2 {
        return Err(Error::InvalidParameter(format!("kernel period must be at least 2, got {period}")));
    }
    params.validate()?;
    let support = params.span_periods * period;
    let p = period as f64;
    let taps = (0..support)
        .map(|n| {
            let u = n as f64 / p;
            match kind {
                KernelKind::Bident => {
                    params.alpha * (3.0 * PI * u).sin() * (PI * u).sin() - params.beta * (PI * u).cos()
                }
                KernelKind::Sinc => (2.0 * PI * u).cos(),
            }
        })
        .collect();
    Ok(FilterKernel { taps, kind, period })
}

/// `Y = (1/L)·Σ r(n)·h(n)` over the kernel length `L`.
pub fn score(r: &AcfSeries, kernel: &FilterKernel) -> Result<f64> {
    score_lags(r.values(), kernel)
}

pub(crate) fn score_lags(r: &[f64], kernel: &FilterKernel) -> Result<f64> {
    if r.len() < kernel.len() {
        return Err(Error::InsufficientSamples { needed: kernel.len(), got: r.len() });
    }
    Ok(dot(&r[..kernel.len()], &kernel.taps) / kernel.len() as f64)
}

type CacheKey = (usize, u64, u64, usize, KernelKind);

/// Memoized kernels keyed by `(N0, α, β, span, kind)`.
#[derive(Default)]
pub struct KernelCache {
    map: RwLock<HashMap<CacheKey, Arc<FilterKernel>>>,
}

impl KernelCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Process-wide shared cache.
    pub fn global() -> &'static KernelCache {
        static CACHE: OnceLock<KernelCache> = OnceLock::new();
        CACHE.get_or_init(KernelCache::new)
    }

    pub fn get(&self, period: usize, params: &BidentParams, kind: KernelKind) -> Result<Arc<FilterKernel>> {
        let key = (period, params.alpha.to_bits(), params.beta.to_bits(), params.span_periods, kind);
        if let Some(k) = self.map.read().unwrap_or_else(|e| e.into_inner()).get(&key) {
            return Ok(Arc::clone(k));
        }
        let built = Arc::new(build_kernel(period, params, kind)?);
        let mut map = self.map.write().unwrap_or_else(|e| e.into_inner());
        Ok(Arc::clone(map.entry(key).or_insert(built)))
    }

    pub fn len(&self) -> usize {
        self.map.read().unwrap_or_else(|e| e.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Cosine response `(1/L)·Σ h(n)·cos(2πfn)` at `f` cycles per sample.
///
/// This is the score a unit-power sinusoid at `f` would receive.
pub fn kernel_response(kernel: &FilterKernel, f: f64) -> f64 {
    let w = 2.0 * PI * f;
    kernel.taps.iter().enumerate().map(|(n, h)| h * (w * n as f64).cos()).sum::<f64>() / kernel.len() as f64
}

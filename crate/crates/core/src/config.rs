//! Analysis and transcription settings, loadable from a sectioned `key = value` file.
//!
//! ```toml
//! [analysis]
//! domain = "freq"
//! hop = 512
//!
//! [transcriber]
//! eps1 = 0.02
//! ```
//!
//! Unknown keys are rejected by name.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::acf::AcfMethod;
use crate::bident::{BidentParams, KernelKind, DEFAULT_SPAN_PERIODS};
use crate::comb::DEFAULT_COMB_GAIN;
use crate::error::{Error, Result};
use crate::pitchgram::{Domain, Variant};
use crate::signal_io::DEFAULT_TARGET_DBFS;
use crate::transcriber::TranscriberConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    #[default]
    Hamming,
    Hann,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    /// Expected input rate; `None` accepts any.
    pub sample_rate_hz: Option<u32>,
    /// Comb scaling factor `a`.
    pub comb_gain: f64,
    pub alpha: f64,
    pub beta: f64,
    pub span_periods: usize,
    pub kernel: KernelKind,
    /// Signed square root of the ACF (time) or magnitude instead of power spectrum (frequency).
    pub compression: bool,
    /// Frame advance in samples.
    pub hop: usize,
    /// Time-domain frame length in periods of the lowest pitch (ours; must exceed the kernel span).
    pub frame_periods: usize,
    pub acf_method: AcfMethod,
    pub dft_size: usize,
    pub window: Window,
    pub pitch_lo: i32,
    pub pitch_hi: i32,
    pub tuning_hz: f64,
    pub variant: Variant,
    pub domain: Domain,
    /// Level the input is normalized to before analysis, dBFS RMS (ours).
    pub target_dbfs: f64,
    pub normalize: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            sample_rate_hz: None,
            comb_gain: DEFAULT_COMB_GAIN,
            alpha: 2.0,
            beta: 1.0,
            span_periods: DEFAULT_SPAN_PERIODS,
            kernel: KernelKind::Bident,
            compression: true,
            hop: 1024,
            frame_periods: 13,
            acf_method: AcfMethod::Direct,
            dft_size: 4096,
            window: Window::Hamming,
            pitch_lo: 40,
            pitch_hi: 88,
            tuning_hz: 440.0,
            variant: Variant::PowerWeighted,
            domain: Domain::Time,
            target_dbfs: DEFAULT_TARGET_DBFS,
            normalize: true,
        }
    }
}

impl AnalysisConfig {
    pub fn bident_params(&self) -> BidentParams {
        BidentParams { alpha: self.alpha, beta: self.beta, span_periods: self.span_periods }
    }

    pub fn validate(&self) -> Result<()> {
        self.bident_params().validate()?;
        if !(self.comb_gain.abs() < 1.0) {
            return Err(Error::UnstableComb(self.comb_gain));
        }
        if self.hop == 0 {
            return Err(Error::InvalidParameter("hop must be positive".into()));
        }
        if self.frame_periods <= self.span_periods {
            return Err(Error::InvalidParameter(format!(
                "frame_periods ({}) must exceed span_periods ({})",
                self.frame_periods, self.span_periods
            )));
        }
        if self.dft_size < 16 {
            return Err(Error::InvalidParameter(format!("dft_size {} is too small", self.dft_size)));
        }
        if self.pitch_hi < self.pitch_lo {
            return Err(Error::EmptyGrid);
        }
        if !(self.tuning_hz > 0.0) {
            return Err(Error::InvalidParameter(format!("tuning must be positive, got {}", self.tuning_hz)));
        }
        if !self.target_dbfs.is_finite() {
            return Err(Error::InvalidParameter("target_dbfs must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub analysis: AnalysisConfig,
    pub transcriber: TranscriberConfig,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.analysis.validate()?;
        cfg.transcriber.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Serialized form of this configuration, every key spelled out.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

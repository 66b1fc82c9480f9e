//! Reconstruction configuration and the flat `key = value` run-config text
//! format consumed by the command-line tools.

use serde::Serialize;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Default passband for the 25-MHz system, Hz.
pub const DEFAULT_F_LO: f64 = 8e6;
pub const DEFAULT_F_HI: f64 = 42e6;

/// Default one-way sound speed, m/s.
pub const DEFAULT_SOUND_SPEED: f64 = 1500.0;

/// Default relative eigenvalue threshold for the signal subspace.
pub const DEFAULT_SUBSPACE_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Plain inverse-DFT apodization over the passband.
    Uniform,
    /// Frequency-domain minimum-variance apodization.
    Fmv,
    /// Minimum-variance weight projected onto the signal subspace.
    Feibmv,
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Method::Uniform),
            "fmv" => Ok(Method::Fmv),
            "feibmv" => Ok(Method::Feibmv),
            other => Err(Error::Format(format!(
                "unknown method '{other}' (expected uniform, fmv or feibmv)"
            ))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Uniform => "uniform",
            Method::Fmv => "fmv",
            Method::Feibmv => "feibmv",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputKind {
    Rf,
    Envelope,
    Both,
}

impl OutputKind {
    pub fn wants_rf(self) -> bool {
        matches!(self, OutputKind::Rf | OutputKind::Both)
    }

    pub fn wants_envelope(self) -> bool {
        matches!(self, OutputKind::Envelope | OutputKind::Both)
    }
}

impl FromStr for OutputKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rf" => Ok(OutputKind::Rf),
            "envelope" => Ok(OutputKind::Envelope),
            "both" => Ok(OutputKind::Both),
            other => Err(Error::Format(format!(
                "unknown output kind '{other}' (expected rf, envelope or both)"
            ))),
        }
    }
}

impl fmt::Display for OutputKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputKind::Rf => "rf",
            OutputKind::Envelope => "envelope",
            OutputKind::Both => "both",
        })
    }
}

/// Depth mapping convention. Photoacoustic detection is one-way: the pulse
/// travels from the absorber to the detector once, z = c t.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Propagation {
    #[default]
    OneWay,
}

/// Free parameters of the per-sample reconstruction loop.
#[derive(Debug, Clone, Serialize)]
pub struct ReconstructionConfig {
    pub method: Method,
    /// Passband low edge, Hz. Ignored when `full_band` is set.
    pub f_lo: f64,
    /// Passband high edge, Hz. Ignored when `full_band` is set.
    pub f_hi: f64,
    /// Reconstruct from every positive-frequency bin instead of a passband.
    pub full_band: bool,
    /// Subband length L; `None` selects floor(K/2).
    pub subband_length: Option<usize>,
    /// Diagonal loading factor; `None` selects 1/(10 L).
    pub loading: Option<f64>,
    /// Relative eigenvalue threshold for the signal subspace.
    pub subspace_threshold: f64,
    /// Fixed signal-subspace dimension overriding the threshold rule.
    pub fixed_num: Option<usize>,
    /// Rescale the projected weight so that w^H d = 1 again.
    pub renormalize_eibmv: bool,
    /// Forward-backward covariance averaging.
    pub forward_backward: bool,
    pub output: OutputKind,
    /// One-way sound speed, m/s.
    pub sound_speed: f64,
    /// Output samples per input sample; 4 de-quantizes FWHM measurements of
    /// the narrowed mainlobes.
    pub oversample: usize,
    pub propagation: Propagation,
}

impl Default for ReconstructionConfig {
    fn default() -> Self {
        Self {
            method: Method::Feibmv,
            f_lo: DEFAULT_F_LO,
            f_hi: DEFAULT_F_HI,
            full_band: false,
            subband_length: None,
            loading: None,
            subspace_threshold: DEFAULT_SUBSPACE_THRESHOLD,
            fixed_num: None,
            renormalize_eibmv: false,
            forward_backward: false,
            output: OutputKind::Rf,
            sound_speed: DEFAULT_SOUND_SPEED,
            oversample: 1,
            propagation: Propagation::OneWay,
        }
    }
}

impl ReconstructionConfig {
    pub fn with_method(method: Method) -> Self {
        Self { method, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.full_band && !(self.f_lo > 0.0 && self.f_lo < self.f_hi) {
            return Err(Error::InvalidParameter(format!(
                "passband edges must satisfy 0 < f_lo < f_hi, got [{}, {}]",
                self.f_lo, self.f_hi
            )));
        }
        if let Some(l) = self.subband_length {
            if l < 2 {
                return Err(Error::InvalidParameter(format!("subband length {l} must be >= 2")));
            }
        }
        if let Some(d) = self.loading {
            if !(d >= 0.0) || !d.is_finite() {
                return Err(Error::InvalidParameter(format!("loading {d} must be >= 0")));
            }
        }
        if !(self.subspace_threshold > 0.0 && self.subspace_threshold <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "subspace threshold {} must be in (0, 1]",
                self.subspace_threshold
            )));
        }
        if self.fixed_num == Some(0) {
            return Err(Error::InvalidParameter("fixed_num must be >= 1".into()));
        }
        if !(self.sound_speed > 0.0) || !self.sound_speed.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "sound speed {} must be positive",
                self.sound_speed
            )));
        }
        if self.oversample == 0 || self.oversample > 64 {
            return Err(Error::InvalidParameter(format!(
                "oversample factor {} must be in 1..=64",
                self.oversample
            )));
        }
        Ok(())
    }

    /// Effective subband length for a K-bin passband.
    pub fn effective_subband(&self, bins: usize) -> usize {
        self.subband_length.unwrap_or(bins / 2)
    }

    /// Effective loading factor for a length-L subband.
    pub fn effective_loading(&self, subband: usize) -> f64 {
        self.loading.unwrap_or(1.0 / (10.0 * subband as f64))
    }
}

/// A run configuration: reconstruction parameters plus file paths, seed and
/// parallelism, parsed from a flat `key = value` document. Unknown keys are
/// rejected so configuration typos fail fast.
#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    pub recon: ReconstructionConfig,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Format(format!("line {}: expected 'key = value', got '{raw}'", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            cfg.apply(key, value).map_err(|e| {
                Error::Format(format!("line {}: {e}", lineno + 1))
            })?;
        }
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::parse_str(&std::fs::read_to_string(path)?)
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T>
        where
            T::Err: fmt::Display,
        {
            value
                .parse()
                .map_err(|e| Error::Format(format!("key '{key}': cannot parse '{value}': {e}")))
        }
        fn flag(key: &str, value: &str) -> Result<bool> {
            match value {
                "true" => Ok(true),
                "false" => Ok(false),
                _ => Err(Error::Format(format!("key '{key}': expected true or false, got '{value}'"))),
            }
        }
        match key {
            "method" => self.recon.method = value.parse()?,
            "f_lo_hz" => self.recon.f_lo = num(key, value)?,
            "f_hi_hz" => self.recon.f_hi = num(key, value)?,
            "full_band" => self.recon.full_band = flag(key, value)?,
            "subband_length" => {
                self.recon.subband_length =
                    if value == "auto" { None } else { Some(num(key, value)?) }
            }
            "loading" => {
                self.recon.loading = if value == "auto" { None } else { Some(num(key, value)?) }
            }
            "subspace_threshold" => self.recon.subspace_threshold = num(key, value)?,
            "fixed_num" => {
                self.recon.fixed_num = if value == "none" { None } else { Some(num(key, value)?) }
            }
            "renormalize_eibmv" => self.recon.renormalize_eibmv = flag(key, value)?,
            "forward_backward" => self.recon.forward_backward = flag(key, value)?,
            "output" => self.recon.output = value.parse()?,
            "sound_speed" => self.recon.sound_speed = num(key, value)?,
            "oversample" => self.recon.oversample = num(key, value)?,
            "input" => self.input = Some(PathBuf::from(value)),
            "output_path" => self.output = Some(PathBuf::from(value)),
            "workers" => self.workers = Some(num(key, value)?),
            "seed" => self.seed = Some(num(key, value)?),
            other => {
                return Err(Error::Format(format!("unknown configuration key '{other}'")));
            }
        }
        Ok(())
    }
}

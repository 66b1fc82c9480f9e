//! Reconstruction quality metrics: envelope FWHM in micrometres, noise
//! floor and sidelobe level in dB, and the spectral-coherence diagnostic.

use serde::Serialize;
use std::ops::Range;

use crate::error::{Error, Result};
use crate::transforms::CompensatedSpectrum;

/// Per-A-scan quality report. `noise_floor_db` and `max_sidelobe_db` are
/// relative to the envelope peak; both may be `-inf` (serialized as JSON
/// null) when the corresponding region is exactly zero.
#[derive(Debug, Clone, Serialize)]
pub struct AxialProfileReport {
    pub fwhm_um: f64,
    pub peak_sample: usize,
    pub peak_value: f64,
    pub noise_floor_db: f64,
    pub max_sidelobe_db: f64,
}

fn peak_index(envelope: &[f64]) -> Result<usize> {
    if envelope.is_empty() {
        return Err(Error::UndefinedMetric("empty envelope"));
    }
    if envelope.iter().any(|&e| !e.is_finite() || e < 0.0) {
        return Err(Error::InvalidParameter("envelope must be finite and nonnegative".into()));
    }
    let mut best = 0usize;
    for (i, &e) in envelope.iter().enumerate() {
        if e > envelope[best] {
            best = i;
        }
    }
    if envelope[best] <= 0.0 {
        return Err(Error::UndefinedMetric("all-zero envelope"));
    }
    Ok(best)
}

/// Width in samples between the half-maximum crossings around the global
/// peak, with linear sub-sample interpolation.
fn fwhm_samples(envelope: &[f64]) -> Result<f64> {
    let peak = peak_index(envelope)?;
    let half = envelope[peak] / 2.0;

    let mut i = peak;
    while i + 1 < envelope.len() && envelope[i + 1] >= half {
        i += 1;
    }
    if i + 1 == envelope.len() {
        return Err(Error::UnboundedMainlobe);
    }
    let right = i as f64 + (envelope[i] - half) / (envelope[i] - envelope[i + 1]);

    let mut i = peak;
    while i > 0 && envelope[i - 1] >= half {
        i -= 1;
    }
    if i == 0 && envelope[0] >= half {
        return Err(Error::UnboundedMainlobe);
    }
    let left = i as f64 - (envelope[i] - half) / (envelope[i] - envelope[i - 1]);

    Ok(right - left)
}

/// Envelope full width at half maximum converted to micrometres via the
/// one-way depth mapping z = c n / fs.
pub fn fwhm(envelope: &[f64], sampling_rate: f64, sound_speed: f64) -> Result<f64> {
    if !(sampling_rate > 0.0) || !(sound_speed > 0.0) {
        return Err(Error::InvalidParameter(
            "sampling rate and sound speed must be positive".into(),
        ));
    }
    Ok(fwhm_samples(envelope)? * sound_speed / sampling_rate * 1e6)
}

/// `20 log10(RMS(noise window) / peak(signal window))`; `-inf` when the
/// noise window is exactly zero.
pub fn noise_floor(
    envelope: &[f64],
    signal_window: Range<usize>,
    noise_window: Range<usize>,
) -> Result<f64> {
    let n = envelope.len();
    if signal_window.end > n || noise_window.end > n || signal_window.is_empty() || noise_window.is_empty() {
        return Err(Error::InvalidParameter("windows out of range or empty".into()));
    }
    if signal_window.start < noise_window.end && noise_window.start < signal_window.end {
        return Err(Error::InvalidParameter("signal and noise windows overlap".into()));
    }
    let peak_global = peak_index(envelope)?;
    if !signal_window.contains(&peak_global) {
        return Err(Error::InvalidParameter(format!(
            "signal window {signal_window:?} does not contain the envelope peak at {peak_global}"
        )));
    }
    let peak = envelope[signal_window.clone()].iter().cloned().fold(0.0f64, f64::max);
    if peak <= 0.0 {
        return Err(Error::UndefinedMetric("zero peak in signal window"));
    }
    let len = noise_window.len() as f64;
    let rms = (envelope[noise_window].iter().map(|e| e * e).sum::<f64>() / len).sqrt();
    if rms == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(20.0 * (rms / peak).log10())
}

/// `|mean(entries)| / mean(|entries|)`: 1 for a perfectly coherent
/// compensated spectrum, small for incoherent bins.
pub fn spectral_coherence(x: &CompensatedSpectrum) -> Result<f64> {
    if x.len() < 2 {
        return Err(Error::InvalidParameter("need at least two bins".into()));
    }
    let k = x.len() as f64;
    let mean = x.entries().iter().sum::<num_complex::Complex64>() / k;
    let mean_mag = x.entries().iter().map(|e| e.norm()).sum::<f64>() / k;
    if mean_mag == 0.0 {
        return Err(Error::UndefinedMetric("all-zero compensated spectrum"));
    }
    Ok(mean.norm() / mean_mag)
}

/// Number of samples spanned by the mainlobe exclusion region (peak plus or
/// minus two FWHM) used by [`profile_report`].
const MAINLOBE_FWHM_MULTIPLE: f64 = 2.0;

/// Full quality report with automatic window selection: the mainlobe region
/// is the peak +/- 2 FWHM; the sidelobe level is measured outside it; the
/// noise window is the eighth of the trace farthest from the peak.
pub fn profile_report(envelope: &[f64], sampling_rate: f64, sound_speed: f64) -> Result<AxialProfileReport> {
    let n = envelope.len();
    let peak_sample = peak_index(envelope)?;
    let peak_value = envelope[peak_sample];
    let width_samples = fwhm_samples(envelope)?;
    let fwhm_um = width_samples * sound_speed / sampling_rate * 1e6;

    let halo = (MAINLOBE_FWHM_MULTIPLE * width_samples).ceil() as usize;
    let lobe_lo = peak_sample.saturating_sub(halo);
    let lobe_hi = (peak_sample + halo + 1).min(n);

    let mut max_side = 0.0f64;
    for (i, &e) in envelope.iter().enumerate() {
        if (i < lobe_lo || i >= lobe_hi) && e > max_side {
            max_side = e;
        }
    }
    let max_sidelobe_db =
        if max_side > 0.0 { 20.0 * (max_side / peak_value).log10() } else { f64::NEG_INFINITY };

    let eighth = (n / 8).max(1);
    let noise_window = if peak_sample < n / 2 { n - eighth..n } else { 0..eighth };
    let signal_window = lobe_lo..lobe_hi;
    if signal_window.start < noise_window.end && noise_window.start < signal_window.end {
        return Err(Error::UndefinedMetric("mainlobe reaches into the noise window"));
    }
    let noise_floor_db = noise_floor(envelope, signal_window, noise_window)?;

    Ok(AxialProfileReport { fwhm_um, peak_sample, peak_value, noise_floor_db, max_sidelobe_db })
}

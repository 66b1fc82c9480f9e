//! Synthetic A-scans and volumes with known ground truth: a band-limited
//! transducer impulse response, discrete echo taps standing in for axial
//! sidelobe interference, and white electronic noise.
//!
//! The default 25-MHz model is calibrated so that, together with the default
//! interference taps and the default passband, the uniform-weight
//! reconstruction of a noiseless thin-film trace measures 69.3 um FWHM at
//! 200 MS/s and 1500 m/s.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;
use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::transforms::AScan;
use crate::volume::Volume;

/// Calibrated fractional bandwidth of the default 25-MHz model (FWHM of the
/// Gaussian amplitude spectrum divided by the center frequency).
pub const CALIBRATED_FRACTIONAL_BANDWIDTH: f64 = 0.8131;

/// Default white-noise RMS; puts the uniform-reconstruction noise floor of
/// the default phantom near -40 dB relative to the envelope peak.
pub const DEFAULT_NOISE_RMS: f64 = 0.012;

/// Default lateral raster pitch recorded in synthetic volumes (metres).
pub const DEFAULT_PITCH: f64 = 5e-6;

/// Largest nx/ny accepted by the volume synthesizers.
pub const MAX_LATERAL_DIM: usize = 64;

/// Gaussian-modulated cosine transducer impulse response.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TransducerModel {
    /// Center frequency f0 in Hz.
    pub center_frequency: f64,
    /// FWHM of the Gaussian amplitude spectrum divided by f0.
    pub fractional_bandwidth: f64,
}

impl TransducerModel {
    pub fn new(center_frequency: f64, fractional_bandwidth: f64) -> Result<Self> {
        if !(center_frequency > 0.0 && center_frequency.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "center frequency must be positive, got {center_frequency}"
            )));
        }
        if !(fractional_bandwidth > 0.0 && fractional_bandwidth.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "fractional bandwidth must be positive, got {fractional_bandwidth}"
            )));
        }
        Ok(Self { center_frequency, fractional_bandwidth })
    }

    /// The calibrated default 25-MHz model.
    pub fn default_25mhz() -> Self {
        Self { center_frequency: 25e6, fractional_bandwidth: CALIBRATED_FRACTIONAL_BANDWIDTH }
    }

    /// Standard deviation of the Gaussian amplitude spectrum in Hz.
    pub fn sigma_f(&self) -> f64 {
        self.fractional_bandwidth * self.center_frequency / (2.0 * (2.0 * (2.0f64).ln()).sqrt())
    }

    /// Standard deviation of the time-domain Gaussian envelope in seconds.
    pub fn sigma_t(&self) -> f64 {
        1.0 / (TAU * self.sigma_f())
    }

    /// Impulse response exp(-t^2 / 2 sigma_t^2) cos(2 pi f0 t).
    pub fn impulse(&self, t: f64) -> f64 {
        let st = self.sigma_t();
        (-t * t / (2.0 * st * st)).exp() * (TAU * self.center_frequency * t).cos()
    }

    fn check_against(&self, sampling_rate: f64) -> Result<()> {
        if self.center_frequency >= sampling_rate / 2.0 {
            return Err(Error::InvalidParameter(format!(
                "center frequency {} above Nyquist for fs = {sampling_rate}",
                self.center_frequency
            )));
        }
        Ok(())
    }
}

/// A point reflector at a one-way depth.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Reflector {
    /// One-way depth in metres (z = c t).
    pub depth: f64,
    pub amplitude: f64,
}

/// One delayed, scaled echo replica attached to every reflector.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct InterferenceTap {
    /// Delay in seconds after the direct arrival.
    pub delay: f64,
    pub amplitude: f64,
}

/// Echo taps reproducing the multi-line interference structure the adaptive
/// weights are meant to suppress.
pub fn default_interference_taps() -> Vec<InterferenceTap> {
    vec![
        InterferenceTap { delay: 60e-9, amplitude: 0.35 },
        InterferenceTap { delay: 120e-9, amplitude: 0.18 },
    ]
}

/// Ground-truth scene description for one A-scan.
#[derive(Debug, Clone, Serialize)]
pub struct Scene {
    pub reflectors: Vec<Reflector>,
    pub interference_taps: Vec<InterferenceTap>,
    pub noise_rms: f64,
    pub rng_seed: u64,
}

impl Scene {
    /// The default phantom: one unit reflector with the default interference
    /// taps and default noise.
    pub fn default_phantom(depth: f64, seed: u64) -> Self {
        Self {
            reflectors: vec![Reflector { depth, amplitude: 1.0 }],
            interference_taps: default_interference_taps(),
            noise_rms: DEFAULT_NOISE_RMS,
            rng_seed: seed,
        }
    }

    fn validate(&self, sampling_rate: f64, nt: usize, sound_speed: f64) -> Result<()> {
        let window = nt as f64 / sampling_rate * sound_speed;
        for r in &self.reflectors {
            if !r.depth.is_finite() || r.depth < 0.0 || r.depth >= window {
                return Err(Error::InvalidParameter(format!(
                    "reflector depth {} m outside the time window [0, {window} m)",
                    r.depth
                )));
            }
            if !r.amplitude.is_finite() {
                return Err(Error::NonFinite("reflector amplitude"));
            }
        }
        for t in &self.interference_taps {
            if !t.delay.is_finite() || t.delay < 0.0 || !t.amplitude.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "interference tap ({}, {}) invalid",
                    t.delay, t.amplitude
                )));
            }
        }
        if !(self.noise_rms >= 0.0) || !self.noise_rms.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "noise RMS must be >= 0, got {}",
                self.noise_rms
            )));
        }
        Ok(())
    }
}

/// Sound speed used for the depth <-> time mapping of synthetic scenes.
pub const SOUND_SPEED: f64 = 1500.0;

/// Synthesizes one A-scan: direct pulses, their echo taps, then seeded white
/// Gaussian noise. Deterministic for a fixed scene.
pub fn synth_ascan(
    transducer: &TransducerModel,
    scene: &Scene,
    sampling_rate: f64,
    nt: usize,
) -> Result<AScan> {
    transducer.check_against(sampling_rate)?;
    scene.validate(sampling_rate, nt, SOUND_SPEED)?;
    let mut samples = vec![0.0f64; nt];
    for r in &scene.reflectors {
        let t0 = r.depth / SOUND_SPEED;
        for (i, s) in samples.iter_mut().enumerate() {
            let t = i as f64 / sampling_rate - t0;
            let mut v = transducer.impulse(t);
            for tap in &scene.interference_taps {
                v += tap.amplitude * transducer.impulse(t - tap.delay);
            }
            *s += r.amplitude * v;
        }
    }
    if scene.noise_rms > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(scene.rng_seed);
        let normal = Normal::new(0.0, scene.noise_rms)
            .map_err(|e| Error::InvalidParameter(format!("noise distribution: {e}")))?;
        for s in &mut samples {
            *s += normal.sample(&mut rng);
        }
    }
    AScan::new(samples, sampling_rate)
}

/// Per-pixel seed derivation (splitmix64 over the base seed and the raster
/// index) so that noise is independent across A-scans yet reproducible and
/// order-independent.
pub fn derive_seed(base: u64, x: usize, y: usize, nx: usize) -> u64 {
    let index = (y * nx + x) as u64;
    let mut z = base ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Thin-film phantom: every A-scan holds one unit reflector at `film_depth`
/// (with the default interference taps) plus independent per-pixel noise.
pub fn synth_thin_film_volume(
    transducer: &TransducerModel,
    film_depth: f64,
    dims: (usize, usize, usize),
    sampling_rate: f64,
    noise_rms: f64,
    seed: u64,
) -> Result<Volume> {
    let (nx, ny, nt) = dims;
    if nx == 0 || ny == 0 || nx > MAX_LATERAL_DIM || ny > MAX_LATERAL_DIM {
        return Err(Error::InvalidParameter(format!(
            "lateral dims must be within 1..={MAX_LATERAL_DIM}, got {nx}x{ny}"
        )));
    }
    let mut volume = Volume::new(nx, ny, nt, sampling_rate, DEFAULT_PITCH)?;
    for y in 0..ny {
        for x in 0..nx {
            let scene = Scene {
                reflectors: vec![Reflector { depth: film_depth, amplitude: 1.0 }],
                interference_taps: default_interference_taps(),
                noise_rms,
                rng_seed: derive_seed(seed, x, y, nx),
            };
            let a = synth_ascan(transducer, &scene, sampling_rate, nt)?;
            volume.set_a_scan(x, y, a.samples());
        }
    }
    Ok(volume)
}

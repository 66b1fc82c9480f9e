//! Forward DFT, passband selection, per-sample phase compensation, and
//! analytic-envelope extraction for axial time series.
//!
//! Conventions: the forward DFT is unnormalized and the inverse carries the
//! 1/N factor. Reconstruction works on positive-frequency passband bins only
//! (DC and Nyquist excluded); the corresponding real signal is recovered as
//! `2 * Re(.) * (K/N)` where `K` is the number of passband bins.

use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::TAU;

use crate::error::{Error, Result};

/// Shortest A-scan the transforms accept.
pub const MIN_ASCAN_LEN: usize = 8;

/// Fewest passband bins that still support subband covariance estimation.
pub const MIN_PASSBAND_BINS: usize = 4;

/// One real-valued axial time series with its sampling rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AScan {
    samples: Vec<f64>,
    sampling_rate: f64,
}

impl AScan {
    /// Validates length, sampling rate and finiteness.
    pub fn new(samples: Vec<f64>, sampling_rate: f64) -> Result<Self> {
        if samples.len() < MIN_ASCAN_LEN {
            return Err(Error::InvalidParameter(format!(
                "A-scan length {} below minimum {}",
                samples.len(),
                MIN_ASCAN_LEN
            )));
        }
        if !(sampling_rate > 0.0) || !sampling_rate.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "sampling rate must be positive and finite, got {sampling_rate}"
            )));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("A-scan samples"));
        }
        Ok(Self { samples, sampling_rate })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sampling_rate(&self) -> f64 {
        self.sampling_rate
    }
}

/// Full complex spectrum of an A-scan (unnormalized forward DFT).
#[derive(Debug, Clone)]
pub struct Spectrum {
    bins: Vec<Complex64>,
    sampling_rate: f64,
}

impl Spectrum {
    pub fn bins(&self) -> &[Complex64] {
        &self.bins
    }

    /// Length N of the source A-scan.
    pub fn source_length(&self) -> usize {
        self.bins.len()
    }

    pub fn sampling_rate(&self) -> f64 {
        self.sampling_rate
    }

    /// Frequency of bin `k` in Hz, valid for the positive-frequency half
    /// `k < N/2`.
    pub fn bin_frequency(&self, k: usize) -> f64 {
        k as f64 * self.sampling_rate / self.bins.len() as f64
    }
}

/// Positive-frequency bins restricted to a transducer passband.
///
/// `bin_indices` are indices into the parent spectrum, strictly increasing,
/// never including DC or Nyquist.
#[derive(Debug, Clone)]
pub struct PassbandSpectrum {
    bins: Vec<Complex64>,
    bin_indices: Vec<usize>,
    parent_length: usize,
    sampling_rate: f64,
}

impl PassbandSpectrum {
    pub fn bins(&self) -> &[Complex64] {
        &self.bins
    }

    pub fn bin_indices(&self) -> &[usize] {
        &self.bin_indices
    }

    /// Number of retained bins K.
    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn parent_length(&self) -> usize {
        self.parent_length
    }

    pub fn sampling_rate(&self) -> f64 {
        self.sampling_rate
    }
}

/// Passband spectrum after per-sample phase compensation: entry `m` is
/// `bins[m] * exp(+j 2 pi k_m n / N)`.
///
/// For an input that is a pure impulse at sample `n`, all entries are equal,
/// which is the coherent signature the adaptive weights preserve.
#[derive(Debug, Clone)]
pub struct CompensatedSpectrum {
    entries: Vec<Complex64>,
    bin_indices: Vec<usize>,
    target_sample: f64,
    parent_length: usize,
}

impl CompensatedSpectrum {
    /// Builds a compensated spectrum from raw parts, validating the bin-index
    /// invariants. Mostly useful for diagnostics on synthetic bin patterns;
    /// the reconstruction path goes through [`phase_compensate`].
    pub fn from_parts(
        entries: Vec<Complex64>,
        bin_indices: Vec<usize>,
        target_sample: f64,
        parent_length: usize,
    ) -> Result<Self> {
        if entries.len() != bin_indices.len() {
            return Err(Error::InvalidParameter(format!(
                "{} entries but {} bin indices",
                entries.len(),
                bin_indices.len()
            )));
        }
        let max_bin = parent_length.div_ceil(2);
        let increasing = bin_indices.windows(2).all(|w| w[0] < w[1]);
        if !increasing || bin_indices.iter().any(|&k| k == 0 || k >= max_bin) {
            return Err(Error::InvalidParameter(
                "bin indices must be strictly increasing, positive-frequency, non-DC".into(),
            ));
        }
        if !(target_sample >= 0.0) || target_sample >= parent_length as f64 {
            return Err(Error::InvalidParameter(format!(
                "target sample {target_sample} out of range 0..{parent_length}"
            )));
        }
        Ok(Self { entries, bin_indices, target_sample, parent_length })
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn bin_indices(&self) -> &[usize] {
        &self.bin_indices
    }

    /// Output sample this spectrum was compensated for. Integer for the
    /// standard grid; fractional when reconstructing on an oversampled grid.
    pub fn target_sample(&self) -> f64 {
        self.target_sample
    }

    pub fn parent_length(&self) -> usize {
        self.parent_length
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Unnormalized forward DFT of a real A-scan.
pub fn forward_dft(a: &AScan) -> Spectrum {
    let mut buf: Vec<Complex64> = a.samples().iter().map(|&x| Complex64::new(x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    Spectrum { bins: buf, sampling_rate: a.sampling_rate() }
}

/// Inverse DFT with the 1/N factor; round-trips `forward_dft`.
pub fn inverse_dft(s: &Spectrum) -> Vec<Complex64> {
    let mut buf = s.bins.clone();
    FftPlanner::new().plan_fft_inverse(buf.len()).process(&mut buf);
    let n = buf.len() as f64;
    for b in &mut buf {
        *b /= n;
    }
    buf
}

/// Keeps the positive-frequency bins with `f_lo <= k fs/N <= f_hi`.
pub fn select_passband(s: &Spectrum, f_lo: f64, f_hi: f64) -> Result<PassbandSpectrum> {
    let fs = s.sampling_rate();
    if !(f_lo > 0.0 && f_lo < f_hi && f_hi < fs / 2.0) {
        return Err(Error::InvalidParameter(format!(
            "passband must satisfy 0 < f_lo < f_hi < fs/2, got [{f_lo}, {f_hi}] at fs = {fs}"
        )));
    }
    let n = s.source_length();
    let mut bins = Vec::new();
    let mut bin_indices = Vec::new();
    for k in 1..n.div_ceil(2) {
        let f = s.bin_frequency(k);
        if f >= f_lo && f <= f_hi {
            bins.push(s.bins[k]);
            bin_indices.push(k);
        }
    }
    if bins.len() < MIN_PASSBAND_BINS {
        return Err(Error::BandTooNarrow { bins: bins.len() });
    }
    Ok(PassbandSpectrum { bins, bin_indices, parent_length: n, sampling_rate: fs })
}

/// Keeps every positive-frequency bin (DC and Nyquist still excluded).
pub fn full_passband(s: &Spectrum) -> Result<PassbandSpectrum> {
    let n = s.source_length();
    let bin_indices: Vec<usize> = (1..n.div_ceil(2)).collect();
    if bin_indices.len() < MIN_PASSBAND_BINS {
        return Err(Error::BandTooNarrow { bins: bin_indices.len() });
    }
    let bins = bin_indices.iter().map(|&k| s.bins[k]).collect();
    Ok(PassbandSpectrum { bins, bin_indices, parent_length: n, sampling_rate: s.sampling_rate })
}

/// Phase-compensates the passband for output sample `n`.
pub fn phase_compensate(p: &PassbandSpectrum, n: usize) -> Result<CompensatedSpectrum> {
    if n >= p.parent_length() {
        return Err(Error::InvalidParameter(format!(
            "target sample {n} out of range 0..{}",
            p.parent_length()
        )));
    }
    Ok(phase_compensate_fractional(p, n as f64))
}

/// Phase compensation at a possibly fractional sample position.
///
/// Fractional `n` evaluates the band-limited reconstruction between grid
/// samples; used by the oversampled output grid.
pub fn phase_compensate_fractional(p: &PassbandSpectrum, n: f64) -> CompensatedSpectrum {
    let nn = p.parent_length() as f64;
    let entries = p
        .bins
        .iter()
        .zip(&p.bin_indices)
        .map(|(&b, &k)| b * Complex64::cis(TAU * k as f64 * n / nn))
        .collect();
    CompensatedSpectrum {
        entries,
        bin_indices: p.bin_indices.clone(),
        target_sample: n,
        parent_length: p.parent_length(),
    }
}

/// Uniform-apodization reconstruction: the mean of the compensated entries.
///
/// Over the full positive band, `2 Re(.) * (K/N)` at every n reproduces the
/// band-limited inverse DFT of the input.
pub fn uniform_reconstruct(x: &CompensatedSpectrum) -> Complex64 {
    let sum: Complex64 = x.entries.iter().sum();
    sum / x.entries.len() as f64
}

/// Magnitude of the analytic signal: negative-frequency bins zeroed,
/// positive bins doubled, DC (and Nyquist for even N) kept.
pub fn envelope(a: &AScan) -> Vec<f64> {
    let n = a.len();
    let mut buf: Vec<Complex64> = a.samples().iter().map(|&x| Complex64::new(x, 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    let half = n / 2;
    for b in buf.iter_mut().take(half).skip(1) {
        *b *= 2.0;
    }
    if n % 2 == 1 {
        buf[half] *= 2.0;
    }
    for b in buf.iter_mut().skip(half + 1) {
        *b = Complex64::new(0.0, 0.0);
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|z| z.norm() / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn delta(n: usize, at: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        v[at] = 1.0;
        v
    }

    fn random_ascan(rng: &mut ChaCha8Rng, n: usize, fs: f64) -> AScan {
        let samples: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        AScan::new(samples, fs).unwrap()
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(AScan::new(vec![0.0; 4], 1.0).is_err());
        assert!(AScan::new(vec![0.0; 8], 0.0).is_err());
        assert!(AScan::new(vec![f64::NAN; 8], 1.0).is_err());
        assert!(matches!(
            AScan::new(vec![1.0, f64::INFINITY, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], 1.0),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn dft_of_unit_impulse_is_flat() {
        let a = AScan::new(delta(8, 0), 1.0).unwrap();
        let s = forward_dft(&a);
        for b in s.bins() {
            assert!((b - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn dft_of_constant_is_dc_only() {
        let a = AScan::new(vec![1.0; 8], 1.0).unwrap();
        let s = forward_dft(&a);
        assert!((s.bins()[0] - Complex64::new(8.0, 0.0)).norm() < 1e-12);
        for b in &s.bins()[1..] {
            assert!(b.norm() < 1e-12);
        }
    }

    #[test]
    fn dft_of_real_tone_splits_into_two_bins() {
        let samples: Vec<f64> = (0..8).map(|n| (TAU * n as f64 * 2.0 / 8.0).cos()).collect();
        let s = forward_dft(&AScan::new(samples, 1.0).unwrap());
        for (k, b) in s.bins().iter().enumerate() {
            let expected = if k == 2 || k == 6 { 4.0 } else { 0.0 };
            assert!(
                (b - Complex64::new(expected, 0.0)).norm() < 1e-12,
                "bin {k} = {b}"
            );
        }
    }

    #[test]
    fn round_trip_many_lengths() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for n in [8usize, 13, 97, 256, 1024, 4096] {
            let a = random_ascan(&mut rng, n, 200e6);
            let back = inverse_dft(&forward_dft(&a));
            let max_in = a.samples().iter().fold(0.0f64, |m, &x| m.max(x.abs()));
            for (x, z) in a.samples().iter().zip(&back) {
                assert!((z.re - x).abs() <= 1e-10 * max_in, "n = {n}");
                assert!(z.im.abs() <= 1e-10 * max_in);
            }
        }
    }

    #[test]
    fn passband_index_arithmetic() {
        let a = AScan::new(vec![0.5; 200], 200e6).unwrap();
        let p = select_passband(&forward_dft(&a), 10e6, 40e6).unwrap();
        let expected: Vec<usize> = (10..=40).collect();
        assert_eq!(p.bin_indices(), expected.as_slice());
        assert_eq!(p.len(), 31);

        let a = AScan::new(vec![0.5; 256], 200e6).unwrap();
        let p = select_passband(&forward_dft(&a), 12.5e6, 37.5e6).unwrap();
        let expected: Vec<usize> = (16..=48).collect();
        assert_eq!(p.bin_indices(), expected.as_slice());
        assert_eq!(p.len(), 33);
    }

    #[test]
    fn passband_rejects_inverted_and_narrow_bands() {
        let s = forward_dft(&AScan::new(vec![0.5; 256], 200e6).unwrap());
        assert!(select_passband(&s, 40e6, 10e6).is_err());
        assert!(select_passband(&s, 10e6, 10e6).is_err());
        assert!(select_passband(&s, 0.0, 40e6).is_err());
        assert!(select_passband(&s, 10e6, 101e6).is_err());
        // 256 bins at 200 MHz: 781.25 kHz spacing, a 1.6 MHz band keeps 2 bins
        assert!(matches!(
            select_passband(&s, 25.0e6, 26.6e6),
            Err(Error::BandTooNarrow { .. })
        ));
    }

    #[test]
    fn compensation_of_flat_bins_at_zero_is_identity() {
        let mut s = forward_dft(&AScan::new(delta(64, 0), 1.0).unwrap());
        for b in &mut s.bins {
            *b = Complex64::new(1.0, 0.0);
        }
        let p = select_passband(&s, 0.1, 0.4).unwrap();
        let x = phase_compensate(&p, 0).unwrap();
        for e in x.entries() {
            assert!((e - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn compensation_cancels_impulse_linear_phase() {
        let n0 = 37;
        let a = AScan::new(delta(128, n0), 200e6).unwrap();
        let p = select_passband(&forward_dft(&a), 20e6, 80e6).unwrap();
        let x = phase_compensate(&p, n0).unwrap();
        for e in x.entries() {
            assert!((e - Complex64::new(1.0, 0.0)).norm() < 1e-10);
        }
    }

    #[test]
    fn impulse_pair_matches_closed_form() {
        // delta at n0 plus a 0.3 echo 12 samples later: compensated entries are
        // 1 + 0.3 exp(-j 2 pi k 12 / N) per bin.
        let (n, n0, lag) = (256usize, 100usize, 12usize);
        let mut samples = delta(n, n0);
        samples[n0 + lag] = 0.3;
        let a = AScan::new(samples, 200e6).unwrap();
        let p = select_passband(&forward_dft(&a), 8e6, 42e6).unwrap();
        let x = phase_compensate(&p, n0).unwrap();
        for (&e, &k) in x.entries().iter().zip(x.bin_indices()) {
            let expected = Complex64::new(1.0, 0.0)
                + 0.3 * Complex64::cis(-TAU * k as f64 * lag as f64 / n as f64);
            assert!((e - expected).norm() < 1e-10, "bin {k}");
        }
    }

    #[test]
    fn compensation_preserves_bin_magnitudes() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_ascan(&mut rng, 256, 200e6);
        let p = select_passband(&forward_dft(&a), 8e6, 42e6).unwrap();
        for n in [0usize, 1, 100, 255] {
            let x = phase_compensate(&p, n).unwrap();
            for (e, b) in x.entries().iter().zip(p.bins()) {
                assert!((e.norm() - b.norm()).abs() <= 1e-12 * b.norm().max(1.0));
            }
        }
    }

    #[test]
    fn compensated_entries_recompute_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = random_ascan(&mut rng, 128, 200e6);
        let p = select_passband(&forward_dft(&a), 10e6, 60e6).unwrap();
        let x = phase_compensate(&p, 55).unwrap();
        let nn = p.parent_length() as f64;
        for ((&e, &b), &k) in x.entries().iter().zip(p.bins()).zip(p.bin_indices()) {
            let again = b * Complex64::cis(TAU * k as f64 * 55.0 / nn);
            assert_eq!(e, again);
        }
    }

    #[test]
    fn uniform_reconstruct_of_constant_and_roots_of_unity() {
        let s = forward_dft(&AScan::new(delta(64, 0), 1.0).unwrap());
        let p = select_passband(&s, 0.1, 0.4).unwrap();
        let k = p.len();

        let c = Complex64::new(0.4, -1.1);
        let x = CompensatedSpectrum {
            entries: vec![c; k],
            bin_indices: p.bin_indices().to_vec(),
            target_sample: 0.0,
            parent_length: 64,
        };
        assert!((uniform_reconstruct(&x) - c).norm() < 1e-14);

        let roots: Vec<Complex64> =
            (0..k).map(|m| Complex64::cis(TAU * m as f64 / k as f64)).collect();
        let x = CompensatedSpectrum {
            entries: roots,
            bin_indices: p.bin_indices().to_vec(),
            target_sample: 0.0,
            parent_length: 64,
        };
        assert!(uniform_reconstruct(&x).norm() < 1e-13);
    }

    #[test]
    fn uniform_reconstruct_impulse_pair_matches_direct_sum() {
        let (n, n0, lag) = (256usize, 100usize, 12usize);
        let mut samples = delta(n, n0);
        samples[n0 + lag] = 0.3;
        let a = AScan::new(samples, 200e6).unwrap();
        let p = select_passband(&forward_dft(&a), 8e6, 42e6).unwrap();
        let x = phase_compensate(&p, n0).unwrap();
        let got = uniform_reconstruct(&x);

        let mut direct = Complex64::new(0.0, 0.0);
        for &k in p.bin_indices() {
            direct += Complex64::new(1.0, 0.0)
                + 0.3 * Complex64::cis(-TAU * k as f64 * lag as f64 / n as f64);
        }
        direct /= p.len() as f64;
        assert!((got - direct).norm() < 1e-12);
    }

    #[test]
    fn uniform_path_equals_band_limited_idft_oracle() {
        // Brute-force oracle: zero all bins outside the passband (and their
        // conjugate partners), then evaluate the inverse DFT by direct
        // summation.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &n in &[128usize, 129, 256] {
            let a = random_ascan(&mut rng, n, 200e6);
            let s = forward_dft(&a);
            let p = select_passband(&s, 8e6, 42e6).unwrap();
            let k = p.len() as f64;
            let nn = n as f64;

            let mut kept = vec![Complex64::new(0.0, 0.0); n];
            for &ki in p.bin_indices() {
                kept[ki] = s.bins()[ki];
                kept[n - ki] = s.bins()[n - ki];
            }
            let scale_in = a.samples().iter().fold(0.0f64, |m, &x| m.max(x.abs()));

            for n_out in 0..n {
                let x = phase_compensate(&p, n_out).unwrap();
                let recon = 2.0 * uniform_reconstruct(&x).re * (k / nn);

                let mut oracle = Complex64::new(0.0, 0.0);
                for (ki, &b) in kept.iter().enumerate() {
                    oracle += b * Complex64::cis(TAU * ki as f64 * n_out as f64 / nn);
                }
                let oracle = oracle.re / nn;
                assert!(
                    (recon - oracle).abs() <= 1e-9 * scale_in,
                    "n = {n}, sample {n_out}: {recon} vs {oracle}"
                );
            }
        }
    }

    #[test]
    fn envelope_of_tone_is_flat() {
        let n = 1024;
        let fs = 1000.0;
        let samples: Vec<f64> = (0..n).map(|i| (TAU * 50.0 * i as f64 / fs).cos()).collect();
        let env = envelope(&AScan::new(samples, fs).unwrap());
        for &e in &env[n / 4..3 * n / 4] {
            assert!((e - 1.0).abs() < 0.01, "envelope {e}");
        }
    }

    #[test]
    fn envelope_of_zero_is_zero() {
        let env = envelope(&AScan::new(vec![0.0; 64], 1.0).unwrap());
        assert!(env.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn envelope_of_gaussian_tone_matches_analytic_gaussian() {
        let n = 1024;
        let fs = 200e6;
        let f0 = 25e6;
        let sigma_t = 40e-9;
        let t0 = n as f64 / 2.0 / fs;
        let samples: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 / fs - t0;
                (-t * t / (2.0 * sigma_t * sigma_t)).exp() * (TAU * f0 * t).cos()
            })
            .collect();
        let env = envelope(&AScan::new(samples, fs).unwrap());
        for i in n / 4..3 * n / 4 {
            let t = i as f64 / fs - t0;
            let expected = (-t * t / (2.0 * sigma_t * sigma_t)).exp();
            assert!((env[i] - expected).abs() < 0.02, "sample {i}: {} vs {expected}", env[i]);
        }
    }

    #[test]
    fn envelope_dominates_signal_magnitude() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let a = random_ascan(&mut rng, 512, 1.0);
        let env = envelope(&a);
        let max = a.samples().iter().fold(0.0f64, |m, &x| m.max(x.abs()));
        for (e, x) in env.iter().zip(a.samples()) {
            assert!(*e >= x.abs() - 1e-9 * max);
        }
    }

    #[test]
    fn envelope_ignores_carrier_phase() {
        let n = 1024;
        let fs = 200e6;
        let f0 = 25e6;
        let sigma_t = 40e-9;
        let t0 = n as f64 / 2.0 / fs;
        let make = |sin_carrier: bool| {
            let samples: Vec<f64> = (0..n)
                .map(|i| {
                    let t = i as f64 / fs - t0;
                    let carrier = if sin_carrier { (TAU * f0 * t).sin() } else { (TAU * f0 * t).cos() };
                    (-t * t / (2.0 * sigma_t * sigma_t)).exp() * carrier
                })
                .collect();
            envelope(&AScan::new(samples, fs).unwrap())
        };
        let (ec, es) = (make(false), make(true));
        for i in n / 4..3 * n / 4 {
            assert!((ec[i] - es[i]).abs() <= 0.01 * ec[i].max(0.05));
        }
    }
}

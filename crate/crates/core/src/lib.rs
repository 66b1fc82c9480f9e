//! Axial signal reconstruction for optical-resolution photoacoustic
//! microscopy (OR-PAM) with adaptive frequency-domain apodization.
//!
//! The axial resolution of OR-PAM is set by the acoustic detector bandwidth;
//! temporal sidelobes and echo paths of the impulse response smear energy
//! into neighbouring depth samples. This crate treats each output sample of
//! the inverse DFT as a beamforming problem across frequency bins: after
//! per-sample phase compensation the target contribution is a flat vector,
//! interference shows up as bin-to-bin fluctuation, and the uniform IDFT
//! weight can be replaced by a minimum-variance weight (`fmv`) or by its
//! projection onto the dominant eigenvectors of the bin covariance
//! (`feibmv`), suppressing sidelobe interference and noise at once.
//!
//! Modules, bottom-up:
//!
//! * [`transforms`] — DFT plumbing, passband selection, phase compensation,
//!   analytic envelope.
//! * [`covariance`] — sliding-subband covariance estimation with diagonal
//!   loading.
//! * [`mv`] — the constrained power-minimization weight.
//! * [`eigenspace`] — Hermitian eigendecomposition, signal subspace, weight
//!   projection.
//! * [`pipeline`] — per-sample loop over A-scans and volumes.
//! * [`synth`] — calibrated synthetic phantoms with known ground truth.
//! * [`metrics`] — FWHM, noise floor, sidelobe level, spectral coherence.
//! * [`volume`], [`config`] — file format and run configuration.

pub mod config;
pub mod covariance;
pub mod eigenspace;
pub mod error;
pub mod metrics;
pub mod mv;
pub mod pipeline;
pub mod synth;
pub mod transforms;
pub mod volume;

pub use config::{Method, OutputKind, ReconstructionConfig, RunConfig};
pub use error::{Error, Result};
pub use metrics::AxialProfileReport;
pub use pipeline::{reconstruct_ascan, reconstruct_sample, reconstruct_volume};
pub use synth::{Scene, TransducerModel};
pub use transforms::{AScan, CompensatedSpectrum, PassbandSpectrum, Spectrum};
pub use volume::Volume;

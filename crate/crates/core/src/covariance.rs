//! Covariance estimation from a single compensated spectrum.
//!
//! The expectation in the power-minimization problem has exactly one
//! realization per output sample, so it is estimated by averaging length-L
//! sliding subbands of the compensated spectrum (the frequency-domain
//! analogue of spatial smoothing in adaptive array processing). The steering
//! vector inside a subband is all-ones because compensation has flattened
//! the in-band phase of the target contribution.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::transforms::CompensatedSpectrum;

/// Minimum subband length accepted for covariance estimation.
pub const MIN_SUBBAND_LEN: usize = 2;

/// The M = K - L + 1 contiguous length-L subbands of a compensated spectrum.
#[derive(Debug, Clone)]
pub struct SnapshotSet {
    entries: Vec<Complex64>,
    subband_length: usize,
}

impl SnapshotSet {
    pub fn subband_length(&self) -> usize {
        self.subband_length
    }

    /// Snapshot count M.
    pub fn count(&self) -> usize {
        self.entries.len() - self.subband_length + 1
    }

    pub fn snapshot(&self, m: usize) -> &[Complex64] {
        &self.entries[m..m + self.subband_length]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[Complex64]> {
        self.entries.windows(self.subband_length)
    }

    /// Element-wise mean of the snapshots; `(1/M) sum_m w^H s_m` equals
    /// `w^H` applied to this vector.
    pub fn mean_snapshot(&self) -> Vec<Complex64> {
        let l = self.subband_length;
        let m = self.count();
        let mut mean = vec![Complex64::new(0.0, 0.0); l];
        for s in self.iter() {
            for (acc, &v) in mean.iter_mut().zip(s) {
                *acc += v;
            }
        }
        for acc in &mut mean {
            *acc /= m as f64;
        }
        mean
    }
}

/// Hermitian positive-semidefinite covariance estimate with diagonal
/// loading metadata.
#[derive(Debug, Clone)]
pub struct CovarianceEstimate {
    matrix: DMatrix<Complex64>,
    loading_factor: f64,
    trace_before_loading: f64,
}

impl CovarianceEstimate {
    /// Wraps an externally supplied Hermitian matrix (for example a
    /// covariance averaged over several A-lines). The matrix is
    /// symmetrized exactly after a tolerance check; no loading is applied.
    pub fn from_matrix(matrix: DMatrix<Complex64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() < MIN_SUBBAND_LEN {
            return Err(Error::InvalidParameter(format!(
                "covariance matrix must be square with dimension >= {MIN_SUBBAND_LEN}, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let scale = matrix.iter().fold(0.0f64, |m, z| m.max(z.norm())).max(1.0);
        let mut matrix = matrix;
        let l = matrix.nrows();
        for i in 0..l {
            for j in i..l {
                if (matrix[(i, j)] - matrix[(j, i)].conj()).norm() > 1e-9 * scale {
                    return Err(Error::InvalidParameter(
                        "matrix is not Hermitian within tolerance".into(),
                    ));
                }
            }
        }
        for i in 0..l {
            matrix[(i, i)] = Complex64::new(matrix[(i, i)].re, 0.0);
            for j in i + 1..l {
                matrix[(j, i)] = matrix[(i, j)].conj();
            }
        }
        let trace: f64 = (0..l).map(|i| matrix[(i, i)].re).sum();
        Ok(Self { matrix, loading_factor: 0.0, trace_before_loading: trace })
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn loading_factor(&self) -> f64 {
        self.loading_factor
    }

    pub fn trace_before_loading(&self) -> f64 {
        self.trace_before_loading
    }

    /// True when the snapshots were all zero: R is the zero matrix (loading
    /// scales with the trace, so it cannot rescue this case) and the weight
    /// solve must reject it.
    pub fn is_degenerate(&self) -> bool {
        self.trace_before_loading == 0.0
    }
}

/// Cuts the M = K - L + 1 sliding subbands out of a compensated spectrum.
pub fn make_snapshots(x: &CompensatedSpectrum, subband_length: usize) -> Result<SnapshotSet> {
    let k = x.len();
    if subband_length < MIN_SUBBAND_LEN || subband_length > k {
        return Err(Error::InvalidParameter(format!(
            "subband length {subband_length} out of range {MIN_SUBBAND_LEN}..={k}"
        )));
    }
    Ok(SnapshotSet { entries: x.entries().to_vec(), subband_length })
}

/// Sample covariance `(1/M) sum_m s_m s_m^H` plus diagonal loading
/// `loading * trace / L` on each diagonal entry.
pub fn estimate_covariance(snapshots: &SnapshotSet, loading: f64) -> Result<CovarianceEstimate> {
    estimate_covariance_with(snapshots, loading, false)
}

/// Covariance estimate with optional forward-backward averaging
/// `(R + J conj(R) J) / 2`, which further decorrelates coherent arrivals at
/// the cost of assuming a conjugate-symmetric subband structure.
pub fn estimate_covariance_with(
    snapshots: &SnapshotSet,
    loading: f64,
    forward_backward: bool,
) -> Result<CovarianceEstimate> {
    if !(loading >= 0.0) || !loading.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "loading factor must be finite and >= 0, got {loading}"
        )));
    }
    let l = snapshots.subband_length();
    let m = snapshots.count();
    let mut r = DMatrix::<Complex64>::zeros(l, l);
    for s in snapshots.iter() {
        for i in 0..l {
            for j in i..l {
                r[(i, j)] += s[i] * s[j].conj();
            }
        }
    }
    let scale = 1.0 / m as f64;
    for i in 0..l {
        for j in i..l {
            r[(i, j)] *= scale;
        }
    }
    if forward_backward {
        // (J conj(R) J)_{ij} = conj(R_{L-1-i, L-1-j}); only the upper
        // triangle of r is filled, so read the Hermitian partner (rj, ri).
        let mut fb = DMatrix::<Complex64>::zeros(l, l);
        for i in 0..l {
            for j in i..l {
                let (ri, rj) = (l - 1 - i, l - 1 - j);
                fb[(i, j)] = (r[(i, j)] + r[(rj, ri)]) * 0.5;
            }
        }
        r = fb;
    }
    // exact Hermitian symmetry: mirror the upper triangle, keep diagonal real
    for i in 0..l {
        r[(i, i)] = Complex64::new(r[(i, i)].re, 0.0);
        for j in i + 1..l {
            r[(j, i)] = r[(i, j)].conj();
        }
    }
    let trace: f64 = (0..l).map(|i| r[(i, i)].re).sum();
    if loading > 0.0 {
        let shift = loading * trace / l as f64;
        for i in 0..l {
            r[(i, i)] += Complex64::new(shift, 0.0);
        }
    }
    Ok(CovarianceEstimate { matrix: r, loading_factor: loading, trace_before_loading: trace })
}

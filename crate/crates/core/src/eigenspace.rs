//! Hermitian eigendecomposition, signal-subspace selection, and projection
//! of the minimum-variance weight onto that subspace.
//!
//! The eigenvectors belonging to the largest eigenvalues carry the coherent
//! mainlobe; projecting the minimum-variance weight onto their span discards
//! the components that only fit noise. Note the projected weight no longer
//! satisfies the hard distortionless constraint; re-normalization is left to
//! the caller as an explicit option.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::mv::{ApodizationWeights, WeightKind};

/// Full eigendecomposition of a Hermitian matrix, eigenvalues sorted
/// descending, eigenvectors orthonormal.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<Complex64>,
}

impl EigenDecomposition {
    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Matrix whose column `i` is the eigenvector of `eigenvalues()[i]`.
    pub fn eigenvectors(&self) -> &DMatrix<Complex64> {
        &self.eigenvectors
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }
}

/// Orthonormal basis of the signal subspace: the first `count` eigenvectors.
#[derive(Debug, Clone)]
pub struct SignalSubspace {
    basis: DMatrix<Complex64>,
    threshold: f64,
}

impl SignalSubspace {
    /// L x Num matrix with orthonormal columns.
    pub fn basis(&self) -> &DMatrix<Complex64> {
        &self.basis
    }

    /// Subspace dimension Num.
    pub fn count(&self) -> usize {
        self.basis.ncols()
    }

    /// Relative eigenvalue threshold the subspace was selected with.
    pub fn threshold(&self) -> f64 {
        self.threshold
    }
}

/// Eigendecomposition of a Hermitian matrix; rejects inputs that are not
/// Hermitian within tolerance.
pub fn eig_hermitian(matrix: &DMatrix<Complex64>) -> Result<EigenDecomposition> {
    let l = matrix.nrows();
    if l == 0 || matrix.ncols() != l {
        return Err(Error::InvalidParameter(format!(
            "expected a square matrix, got {}x{}",
            matrix.nrows(),
            matrix.ncols()
        )));
    }
    let scale = matrix.iter().fold(0.0f64, |m, z| m.max(z.norm())).max(1.0);
    for i in 0..l {
        for j in i..l {
            if (matrix[(i, j)] - matrix[(j, i)].conj()).norm() > 1e-9 * scale {
                return Err(Error::InvalidParameter(
                    "matrix is not Hermitian within tolerance".into(),
                ));
            }
        }
    }
    let se = SymmetricEigen::new(matrix.clone());
    let mut order: Vec<usize> = (0..l).collect();
    order.sort_by(|&a, &b| se.eigenvalues[b].partial_cmp(&se.eigenvalues[a]).unwrap());

    let eigenvalues: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let mut eigenvectors = DMatrix::<Complex64>::zeros(l, l);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &se.eigenvectors.column(src));
    }
    Ok(EigenDecomposition { eigenvalues, eigenvectors })
}

/// Signal subspace spanned by the eigenvectors with `lambda_i >= threshold *
/// lambda_1`; `lambda_1` always qualifies. An explicit `fixed_count`
/// overrides the threshold rule.
pub fn select_signal_subspace(
    decomposition: &EigenDecomposition,
    threshold: f64,
) -> Result<SignalSubspace> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "subspace threshold must be in (0, 1], got {threshold}"
        )));
    }
    let lambda1 = decomposition.eigenvalues[0];
    if !(lambda1 > 0.0) {
        return Err(Error::NoSignal);
    }
    let cut = threshold * lambda1;
    let count = decomposition.eigenvalues.iter().take_while(|&&l| l >= cut).count().max(1);
    Ok(SignalSubspace {
        basis: decomposition.eigenvectors.columns(0, count).into_owned(),
        threshold,
    })
}

/// Signal subspace of a fixed dimension, clamped to the matrix size.
pub fn fixed_signal_subspace(
    decomposition: &EigenDecomposition,
    count: usize,
) -> Result<SignalSubspace> {
    if count == 0 {
        return Err(Error::InvalidParameter("subspace dimension must be >= 1".into()));
    }
    if !(decomposition.eigenvalues[0] > 0.0) {
        return Err(Error::NoSignal);
    }
    let count = count.min(decomposition.dim());
    Ok(SignalSubspace { basis: decomposition.eigenvectors.columns(0, count).into_owned(), threshold: 0.0 })
}

/// Projects the minimum-variance weight onto the signal subspace:
/// `w_eibmv = E_s (E_s^H w_mv)`.
pub fn project_weight(
    subspace: &SignalSubspace,
    w_mv: &ApodizationWeights,
) -> Result<ApodizationWeights> {
    if w_mv.kind() != WeightKind::Mv {
        return Err(Error::InvalidParameter(format!(
            "projection expects a minimum-variance weight, got {:?}",
            w_mv.kind()
        )));
    }
    if w_mv.len() != subspace.basis.nrows() {
        return Err(Error::InvalidParameter(format!(
            "weight length {} does not match subspace dimension {}",
            w_mv.len(),
            subspace.basis.nrows()
        )));
    }
    let w = DVector::from_column_slice(w_mv.weights());
    let coefficients = subspace.basis.adjoint() * &w;
    let projected = &subspace.basis * coefficients;
    Ok(ApodizationWeights::from_parts(projected.iter().copied().collect(), WeightKind::Eibmv))
}

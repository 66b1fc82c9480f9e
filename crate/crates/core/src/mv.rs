//! Minimum-variance (Capon) apodization weights in the frequency domain.
//!
//! The weight minimizes the reconstructed output power `w^H R w` subject to
//! the distortionless constraint `w^H d = 1`, whose closed form is
//! `w = R^{-1} d / (d^H R^{-1} d)`. The solve goes through a Hermitian
//! Cholesky factorization; no explicit inverse is ever formed.

use nalgebra::{Cholesky, DVector};
use num_complex::Complex64;

use crate::covariance::CovarianceEstimate;
use crate::error::{Error, Result};

/// Condition-estimate ceiling above which the solve fails loudly instead of
/// emitting garbage weights.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Steering vector of the compensated mainlobe. Phase compensation flattens
/// the in-band signature of the target sample, so the only steering vector
/// in use is all-ones.
#[derive(Debug, Clone)]
pub struct SteeringVector {
    d: DVector<Complex64>,
}

impl SteeringVector {
    /// All-ones steering of the given length.
    pub fn flat(len: usize) -> Self {
        Self { d: DVector::from_element(len, Complex64::new(1.0, 0.0)) }
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    pub fn vector(&self) -> &DVector<Complex64> {
        &self.d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightKind {
    Uniform,
    Mv,
    Eibmv,
}

/// Complex apodization weights applied across passband subbands.
#[derive(Debug, Clone)]
pub struct ApodizationWeights {
    w: Vec<Complex64>,
    kind: WeightKind,
}

impl ApodizationWeights {
    /// Uniform apodization `1/L`, the plain inverse-DFT weighting.
    pub fn uniform(len: usize) -> Self {
        Self { w: vec![Complex64::new(1.0 / len as f64, 0.0); len], kind: WeightKind::Uniform }
    }

    pub(crate) fn from_parts(w: Vec<Complex64>, kind: WeightKind) -> Self {
        Self { w, kind }
    }

    pub fn weights(&self) -> &[Complex64] {
        &self.w
    }

    pub fn kind(&self) -> WeightKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    /// `w^H s` for one snapshot.
    pub fn apply(&self, snapshot: &[Complex64]) -> Complex64 {
        self.w.iter().zip(snapshot).map(|(w, s)| w.conj() * s).sum()
    }

    /// Euclidean norm of the weight vector.
    pub fn norm(&self) -> f64 {
        self.w.iter().map(|w| w.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Solves the constrained power minimization for the minimum-variance
/// weight.
pub fn mv_weight(estimate: &CovarianceEstimate, steering: &SteeringVector) -> Result<ApodizationWeights> {
    let l = estimate.dim();
    if steering.len() != l {
        return Err(Error::InvalidParameter(format!(
            "steering length {} does not match covariance dimension {l}",
            steering.len()
        )));
    }
    if estimate.is_degenerate() {
        return Err(Error::SingularCovariance);
    }
    let chol = Cholesky::new(estimate.matrix().clone())
        .ok_or(Error::SingularMatrix { condition: f64::INFINITY })?;

    // cheap condition estimate from the Cholesky diagonal; cond(R) is at
    // least (max_ii l_ii / min_ii l_ii)^2
    let lower = chol.l();
    let mut dmin = f64::INFINITY;
    let mut dmax = 0.0f64;
    for i in 0..l {
        let d = lower[(i, i)].re;
        dmin = dmin.min(d);
        dmax = dmax.max(d);
    }
    let condition = (dmax / dmin).powi(2);
    if !condition.is_finite() || condition > CONDITION_LIMIT {
        return Err(Error::SingularMatrix { condition });
    }

    let u = chol.solve(steering.vector());
    let denom: Complex64 = steering.vector().dotc(&u);
    if !(denom.re > 0.0) || !denom.re.is_finite() {
        return Err(Error::SingularMatrix { condition });
    }
    let w = u.iter().map(|z| z / denom).collect();
    Ok(ApodizationWeights { w, kind: WeightKind::Mv })
}

/// Output power `w^H R w` of a weight against a covariance estimate.
pub fn output_power(estimate: &CovarianceEstimate, w: &ApodizationWeights) -> f64 {
    let r = estimate.matrix();
    let l = r.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..l {
        for j in 0..l {
            acc += w.weights()[i].conj() * r[(i, j)] * w.weights()[j];
        }
    }
    acc.re
}

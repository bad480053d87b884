//! Complex matrix helpers and the [`HermitianCov`] covariance newtype.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Hermitian tolerance, relative to the largest entry magnitude.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// PSD tolerance, relative to the trace.
pub const PSD_TOL: f64 = 1e-10;

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Largest `|m_ij - conj(m_ji)|`.
pub fn hermitian_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// `(m + m^H) / 2`.
pub fn symmetrize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues sorted descending.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = SymmetricEigen::new(symmetrize(m));
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Factor `L` with `L L^H = m`, for a PSD `m`. Negative eigenvalues within
/// tolerance are treated as zero.
pub fn psd_sqrt(m: &CMatrix) -> CMatrix {
    let (values, vectors) = hermitian_eigen(m);
    let n = m.nrows();
    CMatrix::from_fn(n, n, |r, c| vectors[(r, c)] * values[c].max(0.0).sqrt())
}

/// `log2 det(a)` for a Hermitian positive-definite `a`.
pub fn log2_det_hpd(a: &CMatrix) -> Result<f64> {
    let chol = Cholesky::new(symmetrize(a))
        .ok_or_else(|| Error::Numerical("matrix is not positive definite".into()))?;
    let l = chol.l_dirty();
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        acc += l[(i, i)].re.ln();
    }
    Ok(2.0 * acc / std::f64::consts::LN_2)
}

/// `log2 det(I + N^{-1} S)` for Hermitian positive-definite `N` and PSD `S`,
/// evaluated as `log2 det(N + S) - log2 det(N)`.
pub fn log2_det_ratio(interference: &CMatrix, signal: &CMatrix) -> Result<f64> {
    let total = interference + signal;
    Ok(log2_det_hpd(&total)? - log2_det_hpd(interference)?)
}

pub fn outer(a: &CVector, b: &CVector) -> CMatrix {
    a * b.adjoint()
}

/// Relative Frobenius distance `||a - b|| / ||b||`.
pub fn rel_frobenius(a: &CMatrix, b: &CMatrix) -> f64 {
    let denom = b.norm();
    if denom == 0.0 {
        return (a - b).norm();
    }
    (a - b).norm() / denom
}

/// A Hermitian positive semi-definite covariance matrix (within tolerance).
///
/// Used for the beamformed-signal covariance, the transmitted desired-signal
/// covariance, the distortion covariance and the crosstalk-mixed covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CovJson", into = "CovJson")]
pub struct HermitianCov {
    matrix: CMatrix,
}

impl HermitianCov {
    /// Validates squareness, Hermitian symmetry (to `1e-12` relative) and
    /// PSD-ness (smallest eigenvalue `>= -1e-10 * trace`).
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Validation(format!(
                "covariance must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Validation("covariance has non-finite entries".into()));
        }
        let scale = max_abs(&matrix).max(1.0);
        let defect = hermitian_defect(&matrix);
        if defect > HERMITIAN_TOL * scale {
            return Err(Error::Validation(format!(
                "covariance is not Hermitian (defect {defect:.3e})"
            )));
        }
        let cov = Self {
            matrix: symmetrize(&matrix),
        };
        let trace = cov.trace();
        let lambda_min = min_eigenvalue(&cov.matrix);
        if lambda_min < -PSD_TOL * trace.abs().max(f64::MIN_POSITIVE) {
            return Err(Error::Validation(format!(
                "covariance is not PSD (min eigenvalue {lambda_min:.3e}, trace {trace:.3e})"
            )));
        }
        Ok(cov)
    }

    /// Wraps a matrix known to be Hermitian PSD by construction; only
    /// symmetrizes.
    pub(crate) fn from_trusted(matrix: CMatrix) -> Self {
        Self {
            matrix: symmetrize(&matrix),
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            matrix: CMatrix::zeros(n, n),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            matrix: CMatrix::identity(n, n),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    /// Diagonal entries (per-branch powers for an input covariance).
    pub fn diagonal_real(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.matrix[(i, i)].re).collect()
    }

    pub fn trace(&self) -> f64 {
        self.diagonal_real().iter().sum()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.matrix)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            matrix: self.matrix.scale(s),
        }
    }
}

/// Complex matrix in JSON: array of rows, each entry an `[re, im]` pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MatrixJson(pub Vec<Vec<[f64; 2]>>);

impl From<&CMatrix> for MatrixJson {
    fn from(m: &CMatrix) -> Self {
        MatrixJson(
            (0..m.nrows())
                .map(|r| (0..m.ncols()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect())
                .collect(),
        )
    }
}

impl TryFrom<MatrixJson> for CMatrix {
    type Error = Error;

    fn try_from(j: MatrixJson) -> Result<Self> {
        let rows = j.0.len();
        let cols = j.0.first().map_or(0, |r| r.len());
        if j.0.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("ragged complex matrix".into()));
        }
        Ok(CMatrix::from_fn(rows, cols, |r, c| {
            Complex64::new(j.0[r][c][0], j.0[r][c][1])
        }))
    }
}

#[derive(Serialize, Deserialize)]
struct CovJson {
    matrix: MatrixJson,
}

impl TryFrom<CovJson> for HermitianCov {
    type Error = Error;

    fn try_from(j: CovJson) -> Result<Self> {
        HermitianCov::new(CMatrix::try_from(j.matrix)?)
    }
}

impl From<HermitianCov> for CovJson {
    fn from(c: HermitianCov) -> Self {
        CovJson {
            matrix: MatrixJson::from(&c.matrix),
        }
    }
}

/// `#[serde(with = "cmatrix_serde")]` for `CMatrix` fields.
pub mod cmatrix_serde {
    use super::*;

    pub fn serialize<S: Serializer>(m: &CMatrix, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixJson::from(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<CMatrix, D::Error> {
        let j = MatrixJson::deserialize(d)?;
        CMatrix::try_from(j).map_err(serde::de::Error::custom)
    }
}

/// `#[serde(with = "cvec_serde")]` for `Vec<Complex64>` fields, as `[re, im]` pairs.
pub mod cvec_serde {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[Complex64], s: S) -> std::result::Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = v.iter().map(|z| [z.re, z.im]).collect();
        pairs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<Vec<Complex64>, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(d)?;
        Ok(pairs.into_iter().map(|[re, im]| Complex64::new(re, im)).collect())
    }
}

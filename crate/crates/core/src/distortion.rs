//! Second-order statistics of the PA distortion and of pre-PA crosstalk.
//!
//! With `u ~ CN(0, C_u)`, the distortion `d = x - Gbar u` has covariance
//!
//! ```text
//! C_d = sum_{m=1}^{M} Gamma_m (C_u^{.(m+1)} . conj(C_u)^{.m}) Gamma_m^H
//! ```
//!
//! where `.` is the Hadamard product and `Gamma_m = diag(gamma_m(P_n))`.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cmatrix_serde, CMatrix, HermitianCov};
use crate::pa_model::PaCoefficients;
use crate::rng::rng_from_seed;

/// Entry `(i, j)` is `c^{m+1} conj(c)^m = |c|^{2m} c` with `c = [C_u]_ij`.
pub fn hadamard_power_term(cu: &HermitianCov, m: usize) -> CMatrix {
    cu.matrix().map(|z| z * z.norm_sqr().powi(m as i32))
}

/// Distortion covariance for a given set of per-branch kernels;
/// `gammas[n][m-1]` is `gamma_m` of branch `n`.
pub(crate) fn distortion_covariance_from_kernels(
    cu: &HermitianCov,
    gammas: &[Vec<Complex64>],
) -> HermitianCov {
    let n = cu.dim();
    let order = gammas.first().map_or(0, |g| g.len());
    let mut cd = CMatrix::zeros(n, n);
    for m in 1..=order {
        let term = hadamard_power_term(cu, m);
        for i in 0..n {
            for j in 0..n {
                cd[(i, j)] += gammas[i][m - 1] * term[(i, j)] * gammas[j][m - 1].conj();
            }
        }
    }
    HermitianCov::from_trusted(cd)
}

/// Closed-form distortion covariance for input covariance `cu`, with branch
/// powers `P_n = [C_u]_nn` in the PA's power unit.
pub fn distortion_covariance(cu: &HermitianCov, pa: &PaCoefficients) -> Result<HermitianCov> {
    let gammas = cu
        .diagonal_real()
        .iter()
        .map(|&p| pa.gammas(p.max(0.0)))
        .collect::<Result<Vec<_>>>()?;
    Ok(distortion_covariance_from_kernels(cu, &gammas))
}

/// Pre-amplifier coupling matrix `B_TX`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrosstalkMatrix {
    #[serde(with = "cmatrix_serde")]
    pub matrix: CMatrix,
}

impl CrosstalkMatrix {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Dimension("crosstalk matrix must be square".into()));
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Validation("crosstalk matrix has non-finite entries".into()));
        }
        Ok(Self { matrix })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            matrix: CMatrix::identity(n, n),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CrosstalkModel {
    /// Unit diagonal, off-diagonal entries i.i.d. `CN(0, sigma^2)`.
    #[default]
    IdentityPlusOffdiag,
    /// Every entry i.i.d. `CN(0, sigma^2)`.
    LiteralIid,
}

/// `C_~u = B C_u B^H`.
pub fn apply_crosstalk(cu: &HermitianCov, b: &CrosstalkMatrix) -> Result<HermitianCov> {
    if b.matrix.nrows() != cu.dim() {
        return Err(Error::Dimension(format!(
            "crosstalk is {}x{}, covariance is {}x{}",
            b.matrix.nrows(),
            b.matrix.ncols(),
            cu.dim(),
            cu.dim()
        )));
    }
    Ok(HermitianCov::from_trusted(&b.matrix * cu.matrix() * b.matrix.adjoint()))
}

pub fn sample_crosstalk(
    seed: u64,
    n_t: usize,
    sigma_ct_sq: f64,
    model: CrosstalkModel,
) -> Result<CrosstalkMatrix> {
    if !(sigma_ct_sq >= 0.0) || !sigma_ct_sq.is_finite() {
        return Err(Error::Domain(format!(
            "crosstalk power must be finite and >= 0, got {sigma_ct_sq}"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let s = (sigma_ct_sq / 2.0).sqrt();
    let mut b = CMatrix::zeros(n_t, n_t);
    for i in 0..n_t {
        for j in 0..n_t {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            b[(i, j)] = match model {
                CrosstalkModel::IdentityPlusOffdiag if i == j => Complex64::new(1.0, 0.0),
                _ => Complex64::new(re * s, im * s),
            };
        }
    }
    CrosstalkMatrix::new(b)
}

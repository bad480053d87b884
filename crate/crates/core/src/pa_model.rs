//! Memoryless odd-order polynomial power amplifier.
//!
//! The PA maps an input sample `u` to
//!
//! ```text
//! x = sum_{m=0}^{M} beta_{2m+1} |u|^{2m} u
//! ```
//!
//! For a circularly symmetric Gaussian input of power `P` the Bussgang gain
//! (`E{x u*} / E{|u|^2}`) and the distortion kernels `gamma_m`, `gbar_s`,
//! `gbar_d` follow in closed form from the Gaussian moments
//! `E{|u|^{2k}} = k! P^k`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::PowerUnit;

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn check_power(p: f64) -> Result<()> {
    if !(p >= 0.0) || !p.is_finite() {
        return Err(Error::Domain(format!("input power must be finite and >= 0, got {p}")));
    }
    Ok(())
}

/// Polynomial coefficients `beta_1, beta_3, ..., beta_{2M+1}` and the power
/// unit in which `|u|^2` enters the polynomial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PaCoefficientsJson", into = "PaCoefficientsJson")]
pub struct PaCoefficients {
    coeffs: Vec<Complex64>,
    unit: PowerUnit,
}

impl PaCoefficients {
    pub fn new(coeffs: Vec<Complex64>, unit: PowerUnit) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::Config("PA needs at least the linear coefficient".into()));
        }
        if coeffs.iter().any(|b| !b.re.is_finite() || !b.im.is_finite()) {
            return Err(Error::Config("PA coefficients must be finite".into()));
        }
        if coeffs[0] == Complex64::new(0.0, 0.0) {
            return Err(Error::Config("linear PA coefficient beta_1 must be nonzero".into()));
        }
        Ok(Self { coeffs, unit })
    }

    /// Coefficients from `(magnitude, phase in radians)` pairs.
    pub fn from_polar(pairs: &[(f64, f64)], unit: PowerUnit) -> Result<Self> {
        Self::new(
            pairs.iter().map(|&(r, th)| Complex64::from_polar(r, th)).collect(),
            unit,
        )
    }

    /// The fifth-order amplifier used throughout the numerical evaluation:
    /// `beta_1 = 2.96`, `beta_3 = 0.1418 e^{-j2.816}`, `beta_5 = 0.003 e^{j0.39}`,
    /// with `|u|^2` in milliwatts.
    pub fn reference() -> Self {
        Self::from_polar(&[(2.96, 0.0), (0.1418, -2.816), (0.003, 0.39)], PowerUnit::Milliwatt)
            .expect("static coefficients are valid")
    }

    pub fn linear(beta1: Complex64, unit: PowerUnit) -> Result<Self> {
        Self::new(vec![beta1], unit)
    }

    /// Model order parameter `M` (the polynomial has order `2M+1`).
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn unit(&self) -> PowerUnit {
        self.unit
    }

    pub fn beta1(&self) -> Complex64 {
        self.coeffs[0]
    }

    pub fn is_linear(&self) -> bool {
        self.coeffs[1..].iter().all(|b| *b == Complex64::new(0.0, 0.0))
    }

    /// Keeps `beta_1 .. beta_{2M+1}`.
    pub fn truncated(&self, order: usize) -> Self {
        Self {
            coeffs: self.coeffs[..(order + 1).min(self.coeffs.len())].to_vec(),
            unit: self.unit,
        }
    }

    /// The ideal PA with the same small-signal gain.
    pub fn linearized(&self) -> Self {
        self.truncated(0)
    }

    pub fn transfer(&self, u: Complex64) -> Complex64 {
        self.instantaneous_gain(u) * u
    }

    /// `g = sum beta_{2m+1} |u|^{2m}`; equals `beta_1` at `u = 0`.
    pub fn instantaneous_gain(&self, u: Complex64) -> Complex64 {
        let r2 = u.norm_sqr();
        // Horner in |u|^2
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, b| acc * r2 + b)
    }

    /// Bussgang average linear gain `gbar(P) = sum beta_{2m+1} P^m (m+1)!`.
    pub fn avg_linear_gain(&self, p: f64) -> Result<Complex64> {
        check_power(p)?;
        Ok(self
            .coeffs
            .iter()
            .enumerate()
            .map(|(m, b)| b * p.powi(m as i32) * factorial(m + 1))
            .sum())
    }

    /// Distortion kernel
    /// `gamma_m(P) = sqrt(1/(m+1)) sum_{q=m}^{M} beta_{2q+1} C(q,m) (q+1)! P^{q-m}`.
    pub fn gamma(&self, p: f64, m: usize) -> Result<Complex64> {
        check_power(p)?;
        let order = self.order();
        if m < 1 || m > order {
            return Err(Error::Domain(format!(
                "gamma index m={m} outside 1..={order}"
            )));
        }
        let sum: Complex64 = (m..=order)
            .map(|q| self.coeffs[q] * binomial(q, m) * factorial(q + 1) * p.powi((q - m) as i32))
            .sum();
        Ok(sum * (1.0 / (m as f64 + 1.0)).sqrt())
    }

    /// All kernels `gamma_1 .. gamma_M` at power `p`.
    pub fn gammas(&self, p: f64) -> Result<Vec<Complex64>> {
        (1..=self.order()).map(|m| self.gamma(p, m)).collect()
    }

    /// Desired-signal gain `|gbar(P)|^2`.
    pub fn gbar_s(&self, p: f64) -> Result<f64> {
        Ok(self.avg_linear_gain(p)?.norm_sqr())
    }

    /// Distortion gain `sum_m |gamma_m(P)|^2 P^{2m}`.
    pub fn gbar_d(&self, p: f64) -> Result<f64> {
        check_power(p)?;
        let mut acc = 0.0;
        for m in 1..=self.order() {
            acc += self.gamma(p, m)?.norm_sqr() * p.powi(2 * m as i32);
        }
        Ok(acc)
    }

    /// Diagonal Bussgang gain matrix for the given per-branch input powers.
    pub fn bussgang_gains(&self, branch_powers: &[f64]) -> Result<BussgangGain> {
        let per_branch_gain = branch_powers
            .iter()
            .map(|&p| self.avg_linear_gain(p))
            .collect::<Result<Vec<_>>>()?;
        Ok(BussgangGain { per_branch_gain })
    }
}

/// Diagonal of the average linear gain matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct BussgangGain {
    pub per_branch_gain: Vec<Complex64>,
}

impl BussgangGain {
    pub fn len(&self) -> usize {
        self.per_branch_gain.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_branch_gain.is_empty()
    }
}

/// Config form of a PA: exactly one of `preset`, `polar` (`[magnitude,
/// phase_rad]` pairs) or `rect` (`[re, im]` pairs).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PaSpec {
    #[serde(default)]
    pub unit: PowerUnit,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<PaPreset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polar: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rect: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PaPreset {
    Reference,
    /// The reference amplifier's `beta_1` with all higher-order terms removed.
    Linear,
}

impl PaSpec {
    pub fn reference() -> Self {
        Self {
            unit: PowerUnit::Milliwatt,
            preset: Some(PaPreset::Reference),
            polar: None,
            rect: None,
        }
    }

    pub fn build(&self) -> Result<PaCoefficients> {
        let given = [self.preset.is_some(), self.polar.is_some(), self.rect.is_some()]
            .iter()
            .filter(|x| **x)
            .count();
        if given != 1 {
            return Err(Error::Config(
                "exactly one of `preset`, `polar`, `rect` must be given".into(),
            ));
        }
        if let Some(preset) = self.preset {
            // The reference coefficients assume |u|^2 in mW; beta_{2m+1} scales by 1000^m per unit step.
            let per_unit = self.unit.from_milliwatts(1.0).recip();
            let base = PaCoefficients::reference();
            let coeffs: Vec<Complex64> = match preset {
                PaPreset::Reference => base.coeffs,
                PaPreset::Linear => vec![base.coeffs[0]],
            }
            .into_iter()
            .enumerate()
            .map(|(m, b)| b * per_unit.powi(m as i32))
            .collect();
            return PaCoefficients::new(coeffs, self.unit);
        }
        if let Some(polar) = &self.polar {
            let pairs: Vec<(f64, f64)> = polar.iter().map(|p| (p[0], p[1])).collect();
            return PaCoefficients::from_polar(&pairs, self.unit);
        }
        let rect = self.rect.as_ref().expect("counted above");
        PaCoefficients::new(
            rect.iter().map(|p| Complex64::new(p[0], p[1])).collect(),
            self.unit,
        )
    }
}

#[derive(Serialize, Deserialize)]
struct PaCoefficientsJson {
    unit: PowerUnit,
    rect: Vec<[f64; 2]>,
}

impl TryFrom<PaCoefficientsJson> for PaCoefficients {
    type Error = Error;

    fn try_from(j: PaCoefficientsJson) -> Result<Self> {
        PaCoefficients::new(
            j.rect.into_iter().map(|[re, im]| Complex64::new(re, im)).collect(),
            j.unit,
        )
    }
}

impl From<PaCoefficients> for PaCoefficientsJson {
    fn from(pa: PaCoefficients) -> Self {
        PaCoefficientsJson {
            unit: pa.unit,
            rect: pa.coeffs.iter().map(|z| [z.re, z.im]).collect(),
        }
    }
}

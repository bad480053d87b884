//! Spectral efficiency, beampatterns, PA power consumption and energy
//! efficiency.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::channel::{array_response, ArrayGeometry, ChannelRealization};
use crate::distortion::distortion_covariance;
use crate::error::{Error, Result};
use crate::linalg::{log2_det_ratio, CMatrix, CVector, HermitianCov};
use crate::pa_model::{BussgangGain, PaCoefficients};
use crate::units::PowerUnit;

/// Noise, bandwidth and PA power limits. Powers are in `unit`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub noise_power: f64,
    pub bandwidth_hz: f64,
    pub pa_max_output: f64,
    pub pa_max_efficiency: f64,
    /// Cap on the total consumed power; `f64::INFINITY` for none.
    pub consumed_power_cap: f64,
    pub unit: PowerUnit,
}

impl LinkBudget {
    /// -105 dBm noise, 1 GHz, `P_max` = 6 dBm, `eta_max` = 0.3, no cap.
    pub fn reference(unit: PowerUnit) -> Self {
        Self {
            noise_power: unit.from_dbm(-105.0),
            bandwidth_hz: 1e9,
            pa_max_output: unit.from_dbm(6.0),
            pa_max_efficiency: 0.3,
            consumed_power_cap: f64::INFINITY,
            unit,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && !v.is_nan() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        positive("noise_power", self.noise_power)?;
        positive("bandwidth_hz", self.bandwidth_hz)?;
        positive("pa_max_output", self.pa_max_output)?;
        positive("consumed_power_cap", self.consumed_power_cap)?;
        if !(self.pa_max_efficiency > 0.0 && self.pa_max_efficiency <= 1.0) {
            return Err(Error::Config(format!(
                "pa_max_efficiency must be in (0, 1], got {}",
                self.pa_max_efficiency
            )));
        }
        if !self.noise_power.is_finite()
            || !self.bandwidth_hz.is_finite()
            || !self.pa_max_output.is_finite()
        {
            return Err(Error::Config("budget values must be finite".into()));
        }
        Ok(())
    }

    /// `sqrt(P_max) / eta_max`.
    pub fn consumption_factor(&self) -> f64 {
        self.pa_max_output.sqrt() / self.pa_max_efficiency
    }
}

/// Per-link metrics for one transmit covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkMetricsReport {
    pub se_bits_per_s_hz: f64,
    pub radiated_per_branch: Vec<f64>,
    pub consumed_per_branch: Vec<f64>,
    pub consumed_total: f64,
    pub ee_bits_per_joule: f64,
    pub pa_efficiency_per_branch: Vec<f64>,
}

/// Transmitted desired-signal and distortion covariances for an input
/// covariance.
#[derive(Debug, Clone)]
pub struct TransmitStatistics {
    pub gains: BussgangGain,
    /// `Gbar C_u Gbar^H`.
    pub desired: HermitianCov,
    pub distortion: HermitianCov,
}

pub fn transmit_statistics(cu: &HermitianCov, pa: &PaCoefficients) -> Result<TransmitStatistics> {
    let powers: Vec<f64> = cu.diagonal_real().iter().map(|p| p.max(0.0)).collect();
    let gains = pa.bussgang_gains(&powers)?;
    let g = &gains.per_branch_gain;
    let desired = HermitianCov::from_trusted(CMatrix::from_fn(cu.dim(), cu.dim(), |i, j| {
        g[i] * cu.matrix()[(i, j)] * g[j].conj()
    }));
    let distortion = distortion_covariance(cu, pa)?;
    Ok(TransmitStatistics { gains, desired, distortion })
}

fn check_noise(noise: f64) -> Result<()> {
    if !(noise > 0.0) || !noise.is_finite() {
        return Err(Error::Domain(format!("noise power must be positive, got {noise}")));
    }
    Ok(())
}

/// SE treating received distortion as Gaussian noise:
/// `log2 det(I + (H C_d H^H + s^2 I)^{-1} H C~_u H^H)`.
pub fn spectral_efficiency(
    h: &CMatrix,
    cu: &HermitianCov,
    pa: &PaCoefficients,
    noise: f64,
) -> Result<f64> {
    check_noise(noise)?;
    if h.ncols() != cu.dim() {
        return Err(Error::Dimension(format!(
            "channel has {} columns, covariance is {}x{}",
            h.ncols(),
            cu.dim(),
            cu.dim()
        )));
    }
    let stats = transmit_statistics(cu, pa)?;
    se_from_statistics(h, &stats, noise)
}

pub(crate) fn se_from_statistics(h: &CMatrix, stats: &TransmitStatistics, noise: f64) -> Result<f64> {
    let hh = h.adjoint();
    let signal = h * stats.desired.matrix() * &hh;
    let interference =
        h * stats.distortion.matrix() * &hh + CMatrix::identity(h.nrows(), h.nrows()).scale(noise);
    Ok(log2_det_ratio(&interference, &signal)?.max(0.0))
}

/// Closed-form single-RF-chain SE with the beamformer matched to the
/// dominant AoD:
/// `log2 det(I + (H~H~^H gbar_d(P/Nt) + s^2/P I)^{-1} H~H~^H gbar_s(P/Nt))`.
pub fn se_single_rf(p: f64, ch: &ChannelRealization, pa: &PaCoefficients, noise: f64) -> Result<f64> {
    check_noise(noise)?;
    if !(p >= 0.0) {
        return Err(Error::Domain(format!("input power must be >= 0, got {p}")));
    }
    if p == 0.0 {
        return Ok(0.0);
    }
    let per_branch = p / ch.n_t() as f64;
    let gs = pa.gbar_s(per_branch)?;
    let gd = pa.gbar_d(per_branch)?;
    let ht = ch.effective_channel();
    let z = &ht * ht.adjoint();
    let nr = ch.n_r();
    let interference = z.scale(gd) + CMatrix::identity(nr, nr).scale(noise / p);
    Ok(log2_det_ratio(&interference, &z.scale(gs))?.max(0.0))
}

/// Single-path lower bound on the single-RF SE:
/// `log2(1 + gbar_s / (gbar_d + s^2 / (delta P)))`.
pub fn se_lower_bound(p: f64, ch: &ChannelRealization, pa: &PaCoefficients, noise: f64) -> Result<f64> {
    check_noise(noise)?;
    if !(p >= 0.0) {
        return Err(Error::Domain(format!("input power must be >= 0, got {p}")));
    }
    let delta = ch.effective_channel_gain();
    if p == 0.0 || delta == 0.0 {
        return Ok(0.0);
    }
    let per_branch = p / ch.n_t() as f64;
    let gs = pa.gbar_s(per_branch)?;
    let gd = pa.gbar_d(per_branch)?;
    Ok((1.0 + gs / (gd + noise / (delta * p))).log2())
}

/// `f(Z) = log2 det(I + (a2 Z + I)^{-1} a1 Z)` for Hermitian PSD `Z`.
pub fn se_functional(z: &CMatrix, alpha1: f64, alpha2: f64) -> Result<f64> {
    let n = z.nrows();
    let interference = z.scale(alpha2) + CMatrix::identity(n, n);
    Ok(log2_det_ratio(&interference, &z.scale(alpha1))?.max(0.0))
}

/// `h(Z, r) = log2(1 + a1 r^H Z r / (a2 r^H Z r + 1))` for unit `r`.
pub fn rank_one_functional(z: &CMatrix, r: &CVector, alpha1: f64, alpha2: f64) -> f64 {
    let q = (r.adjoint() * z * r)[(0, 0)].re;
    (1.0 + alpha1 * q / (alpha2 * q + 1.0)).log2()
}

/// A normalized beampattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Beampattern {
    pub angles: Vec<f64>,
    pub values: Vec<f64>,
    /// Set when the covariance radiates nothing; values are then all zero and
    /// not normalized.
    pub all_zero: bool,
}

/// `n` angles uniformly spaced on `[-pi/2, pi/2)`.
pub fn uniform_angle_grid(n: usize) -> Vec<f64> {
    (0..n).map(|k| -PI / 2.0 + PI * k as f64 / n as f64).collect()
}

/// `G(phi) = a_t(phi)^H C a_t(phi)`, normalized by its maximum over `angles`.
pub fn beampattern(c: &HermitianCov, geometry: &ArrayGeometry, angles: &[f64]) -> Result<Beampattern> {
    if angles.is_empty() {
        return Err(Error::Config("beampattern angle grid is empty".into()));
    }
    if geometry.num_elements != c.dim() {
        return Err(Error::Dimension(format!(
            "array has {} elements, covariance is {}x{}",
            geometry.num_elements,
            c.dim(),
            c.dim()
        )));
    }
    let raw: Vec<f64> = angles
        .iter()
        .map(|&phi| {
            let a = array_response(phi, geometry);
            (a.adjoint() * c.matrix() * &a)[(0, 0)].re
        })
        .collect();
    let peak = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(peak > 0.0) {
        return Ok(Beampattern {
            angles: angles.to_vec(),
            values: vec![0.0; angles.len()],
            all_zero: true,
        });
    }
    Ok(Beampattern {
        angles: angles.to_vec(),
        values: raw.iter().map(|v| v / peak).collect(),
        all_zero: false,
    })
}

/// `P_rad,n = [C~_u]_nn + [C_d]_nn`.
pub fn radiated_power_per_branch(desired: &HermitianCov, distortion: &HermitianCov) -> Result<Vec<f64>> {
    if desired.dim() != distortion.dim() {
        return Err(Error::Dimension(format!(
            "desired is {0}x{0}, distortion is {1}x{1}",
            desired.dim(),
            distortion.dim()
        )));
    }
    Ok(desired
        .diagonal_real()
        .iter()
        .zip(distortion.diagonal_real())
        .map(|(a, b)| (a + b).max(0.0))
        .collect())
}

/// `P_cons,n = sqrt(P_max) / eta_max * sqrt(P_rad,n)`.
pub fn consumed_power(p_rad: f64, budget: &LinkBudget) -> Result<f64> {
    if !(p_rad >= 0.0) {
        return Err(Error::Domain(format!("radiated power must be >= 0, got {p_rad}")));
    }
    Ok(budget.consumption_factor() * p_rad.sqrt())
}

/// `BW * SE / P_cons` in bits per joule; `consumed_total` is in the budget's unit.
pub fn energy_efficiency(se: f64, consumed_total: f64, budget: &LinkBudget) -> Result<f64> {
    if !(consumed_total > 0.0) {
        return Err(Error::Domain(format!(
            "energy efficiency undefined for consumed power {consumed_total}"
        )));
    }
    Ok(budget.bandwidth_hz * se / budget.unit.to_watts(consumed_total))
}

/// Consumed power of the single-RF-chain transmitter at total input power `p`:
/// `sqrt(P_max)/eta_max * sqrt((gbar_s + gbar_d)(P/Nt) * P * Nt)`.
pub fn consumed_power_single_rf(p: f64, n_t: usize, pa: &PaCoefficients, budget: &LinkBudget) -> Result<f64> {
    if !(p >= 0.0) {
        return Err(Error::Domain(format!("input power must be >= 0, got {p}")));
    }
    if n_t == 0 {
        return Err(Error::Config("n_t must be >= 1".into()));
    }
    let per_branch = p / n_t as f64;
    let g = pa.gbar_s(per_branch)? + pa.gbar_d(per_branch)?;
    Ok(budget.consumption_factor() * (g * p * n_t as f64).sqrt())
}

/// Full metrics for channel `h` and input covariance `cu`.
pub fn evaluate_link(
    h: &CMatrix,
    cu: &HermitianCov,
    pa: &PaCoefficients,
    budget: &LinkBudget,
) -> Result<LinkMetricsReport> {
    if h.ncols() != cu.dim() {
        return Err(Error::Dimension(format!(
            "channel has {} columns, covariance is {}x{}",
            h.ncols(),
            cu.dim(),
            cu.dim()
        )));
    }
    let stats = transmit_statistics(cu, pa)?;
    let se = se_from_statistics(h, &stats, budget.noise_power)?;
    let radiated = radiated_power_per_branch(&stats.desired, &stats.distortion)?;
    let consumed = radiated
        .iter()
        .map(|&r| consumed_power(r, budget))
        .collect::<Result<Vec<_>>>()?;
    let total: f64 = consumed.iter().sum();
    let ee = if total > 0.0 { energy_efficiency(se, total, budget)? } else { 0.0 };
    let eff = radiated
        .iter()
        .zip(&consumed)
        .map(|(r, c)| if *c > 0.0 { r / c } else { 0.0 })
        .collect();
    Ok(LinkMetricsReport {
        se_bits_per_s_hz: se,
        radiated_per_branch: radiated,
        consumed_per_branch: consumed,
        consumed_total: total,
        ee_bits_per_joule: ee,
        pa_efficiency_per_branch: eff,
    })
}

/// Beamformed desired and distortion patterns for a covariance.
pub fn signal_and_distortion_patterns(
    cu: &HermitianCov,
    pa: &PaCoefficients,
    geometry: &ArrayGeometry,
    angles: &[f64],
) -> Result<(Beampattern, Beampattern)> {
    let stats = transmit_statistics(cu, pa)?;
    Ok((
        beampattern(&stats.desired, geometry, angles)?,
        beampattern(&stats.distortion, geometry, angles)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{AngleDistribution, ChannelSpec, LargeScaleFading, PathLossModel};
    use crate::linalg::outer;
    use num_complex::Complex64;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn table_budget() -> LinkBudget {
        LinkBudget::reference(PowerUnit::Milliwatt)
    }

    fn channel(seed: u64, nt: usize, l: usize) -> ChannelRealization {
        let spec = ChannelSpec {
            num_paths: l,
            tx: ArrayGeometry::half_wavelength(nt),
            rx: ArrayGeometry::half_wavelength(16),
            path_loss: PathLossModel::reference(15.0),
            angles: AngleDistribution::default(),
            large_scale: LargeScaleFading::PerRealization,
        };
        crate::channel::generate_channel(seed, &spec).unwrap()
    }

    fn rank_one_cov(ch: &ChannelRealization, p: f64) -> HermitianCov {
        let a = array_response(ch.dominant_path().aod, &ch.tx);
        HermitianCov::new(outer(&a, &a).scale(p)).unwrap()
    }

    #[test]
    fn zero_channel_zero_se() {
        let cu = HermitianCov::identity(4);
        let h = CMatrix::zeros(3, 4);
        assert_eq!(spectral_efficiency(&h, &cu, &PaCoefficients::reference(), 1e-3).unwrap(), 0.0);
    }

    #[test]
    fn linear_pa_reduces_to_capacity_formula() {
        let ch = channel(3, 8, 5);
        let pa = PaCoefficients::reference().linearized();
        let noise = table_budget().noise_power;
        let cu = HermitianCov::identity(8).scaled(0.05);
        let se = spectral_efficiency(&ch.h, &cu, &pa, noise).unwrap();
        let b2 = pa.beta1().norm_sqr();
        let s = (&ch.h * cu.matrix() * ch.h.adjoint()).scale(b2 / noise);
        let expect = log2_det_ratio(&CMatrix::identity(16, 16), &s).unwrap();
        assert!((se - expect).abs() < 1e-9);
    }

    #[test]
    fn eq14_matches_closed_form_single_rf() {
        let pa = PaCoefficients::reference();
        let noise = table_budget().noise_power;
        for seed in 0..20 {
            let ch = channel(seed, 16, 5);
            for p in [1e-3, 0.1, 3.0, 30.0] {
                let a = spectral_efficiency(&ch.h, &rank_one_cov(&ch, p), &pa, noise).unwrap();
                let b = se_single_rf(p, &ch, &pa, noise).unwrap();
                assert!((a - b).abs() < 1e-9, "seed {seed} p {p}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn single_rf_edge_cases() {
        let ch = channel(1, 8, 5);
        let pa = PaCoefficients::reference();
        let noise = table_budget().noise_power;
        assert_eq!(se_single_rf(0.0, &ch, &pa, noise).unwrap(), 0.0);
        assert!(se_single_rf(1e-12, &ch, &pa, noise).unwrap() < 1e-3);
        let lin = pa.linearized();
        let p = 0.2;
        let expect = (1.0 + lin.beta1().norm_sqr() * p * ch.effective_channel().norm_squared() / noise).log2();
        assert!((se_single_rf(p, &ch, &lin, noise).unwrap() - expect).abs() < 1e-9);
    }

    #[test]
    fn lower_bound_tight_for_single_path() {
        let pa = PaCoefficients::reference();
        let noise = table_budget().noise_power;
        for seed in 0..20 {
            let ch = channel(seed, 8, 1);
            for p in [0.01, 1.0, 20.0] {
                let a = se_lower_bound(p, &ch, &pa, noise).unwrap();
                let b = se_single_rf(p, &ch, &pa, noise).unwrap();
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn lower_bound_linear_pa() {
        let ch = channel(2, 8, 5);
        let lin = PaCoefficients::reference().linearized();
        let noise = 1.0;
        let p = 1.0 / ch.effective_channel_gain();
        let lb = se_lower_bound(p, &ch, &lin, noise).unwrap();
        assert!((lb - (1.0 + lin.beta1().norm_sqr()).log2()).abs() < 1e-12);
    }

    #[test]
    fn flat_pattern_for_identity() {
        let g = ArrayGeometry::half_wavelength(6);
        let bp = beampattern(&HermitianCov::identity(6), &g, &uniform_angle_grid(64)).unwrap();
        assert!(bp.values.iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!(!bp.all_zero);
    }

    #[test]
    fn zero_pattern_flagged() {
        let g = ArrayGeometry::half_wavelength(3);
        let bp = beampattern(&HermitianCov::zeros(3), &g, &uniform_angle_grid(16)).unwrap();
        assert!(bp.all_zero);
        assert!(bp.values.iter().all(|&v| v == 0.0));
        assert!(beampattern(&HermitianCov::zeros(3), &g, &[]).is_err());
    }

    #[test]
    fn steered_pattern_peaks_at_steering_angle() {
        let g = ArrayGeometry::half_wavelength(8);
        let grid = uniform_angle_grid(1024);
        let phi0 = 0.4;
        let a = array_response(phi0, &g);
        let bp = beampattern(&HermitianCov::new(outer(&a, &a)).unwrap(), &g, &grid).unwrap();
        let argmax = (0..grid.len()).max_by(|&i, &j| bp.values[i].total_cmp(&bp.values[j])).unwrap();
        let nearest = (0..grid.len())
            .min_by(|&i, &j| (grid[i] - phi0).abs().total_cmp(&(grid[j] - phi0).abs()))
            .unwrap();
        assert_eq!(argmax, nearest);
    }

    #[test]
    fn radiated_and_consumed_power() {
        let eye = HermitianCov::identity(3);
        assert_eq!(radiated_power_per_branch(&eye, &eye).unwrap(), vec![2.0; 3]);
        assert_eq!(
            radiated_power_per_branch(&eye.scaled(0.5), &HermitianCov::zeros(3)).unwrap(),
            vec![0.5; 3]
        );
        assert!(radiated_power_per_branch(&eye, &HermitianCov::zeros(2)).is_err());

        let b = table_budget();
        assert!((consumed_power(b.pa_max_output, &b).unwrap() - b.pa_max_output / 0.3).abs() < 1e-12);
        assert!((consumed_power(b.pa_max_output, &b).unwrap() - 13.270_239_018_449_908).abs() < 1e-9);
        assert!((consumed_power(1.0, &b).unwrap() - 6.650_874_383_229_598).abs() < 1e-9);
        assert_eq!(consumed_power(0.0, &b).unwrap(), 0.0);
        assert!(consumed_power(-1.0, &b).is_err());
    }

    #[test]
    fn energy_efficiency_units() {
        let mut b = table_budget();
        b.unit = PowerUnit::Watt;
        assert_eq!(energy_efficiency(0.0, 1.0, &b).unwrap(), 0.0);
        assert!((energy_efficiency(1.0, 1.0, &b).unwrap() - 1e9).abs() < 1e-3);
        let e1 = energy_efficiency(2.5, 0.3, &b).unwrap();
        let e2 = energy_efficiency(2.5, 0.6, &b).unwrap();
        assert!((e1 - 2.0 * e2).abs() < 1e-6 * e1);
        assert!(energy_efficiency(1.0, 0.0, &b).is_err());
        // mW budgets convert to watts
        let mw = table_budget();
        assert!((energy_efficiency(1.0, 1000.0, &mw).unwrap() - 1e9).abs() < 1e-3);
    }

    #[test]
    fn single_rf_consumption_identities() {
        let pa = PaCoefficients::reference();
        let b = table_budget();
        assert_eq!(consumed_power_single_rf(0.0, 8, &pa, &b).unwrap(), 0.0);
        let lin = pa.linearized();
        let p = 2.0;
        let expect = b.consumption_factor() * lin.beta1().norm() * (p * 8.0f64).sqrt();
        assert!((consumed_power_single_rf(p, 8, &lin, &b).unwrap() - expect).abs() < 1e-12 * expect);

        // equal split: Nt * P_cons(radiated per branch)
        let nt = 16;
        let f = array_response(0.3, &ArrayGeometry::half_wavelength(nt));
        let cu = HermitianCov::new(outer(&f, &f).scale(p)).unwrap();
        let stats = transmit_statistics(&cu, &pa).unwrap();
        let rad = radiated_power_per_branch(&stats.desired, &stats.distortion).unwrap();
        let q = p / nt as f64;
        let per = (pa.gbar_s(q).unwrap() + pa.gbar_d(q).unwrap()) * q;
        assert!(rad.iter().all(|r| (r - per).abs() < 1e-12 * per));
        let total: f64 = rad.iter().map(|&r| consumed_power(r, &b).unwrap()).sum();
        let closed = consumed_power_single_rf(p, nt, &pa, &b).unwrap();
        assert!((total - closed).abs() < 1e-12 * closed);
    }

    #[test]
    fn report_is_consistent() {
        let ch = channel(4, 8, 5);
        let pa = PaCoefficients::reference();
        let b = table_budget();
        let r = evaluate_link(&ch.h, &rank_one_cov(&ch, 1.0), &pa, &b).unwrap();
        let sum: f64 = r.consumed_per_branch.iter().sum();
        assert!((sum - r.consumed_total).abs() < 1e-12 * sum);
        assert!((r.ee_bits_per_joule - b.bandwidth_hz * r.se_bits_per_s_hz / (r.consumed_total * 1e-3)).abs()
            < 1e-6 * r.ee_bits_per_joule);
        assert!(r.pa_efficiency_per_branch.iter().all(|&e| e > 0.0 && e <= 0.3 + 1e-12));
    }

    #[test]
    fn dimension_errors() {
        let pa = PaCoefficients::reference();
        let h = CMatrix::from_element(2, 3, c(1.0, 0.0));
        assert!(matches!(
            spectral_efficiency(&h, &HermitianCov::identity(2), &pa, 1.0),
            Err(Error::Dimension(_))
        ));
        assert!(spectral_efficiency(&h, &HermitianCov::identity(3), &pa, 0.0).is_err());
    }
}

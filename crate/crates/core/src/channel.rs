//! Geometric cluster channel with uniform linear arrays.
//!
//! `H = sqrt(Nt Nr / L) * sum_l psi_l a_r(theta_l) a_t(phi_l)^H`, where the
//! path gains `psi_l` are i.i.d. `CN(0, 10^{-PL/10})` given the large-scale
//! path loss `PL` (dB), which includes a log-normal shadowing draw.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cmatrix_serde, cvec_serde, CMatrix, CVector};
use crate::rng::rng_from_seed;

/// Uniform linear array: element count and spacing in carrier wavelengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub num_elements: usize,
    pub spacing: f64,
}

impl ArrayGeometry {
    pub fn new(num_elements: usize, spacing: f64) -> Result<Self> {
        let g = Self { num_elements, spacing };
        g.validate()?;
        Ok(g)
    }

    pub fn half_wavelength(num_elements: usize) -> Self {
        Self { num_elements, spacing: 0.5 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_elements == 0 {
            return Err(Error::Config("array needs at least one element".into()));
        }
        if !(self.spacing > 0.0) || !self.spacing.is_finite() {
            return Err(Error::Config(format!(
                "array spacing must be positive, got {}",
                self.spacing
            )));
        }
        Ok(())
    }
}

/// Unit-norm ULA response: element `k` is `exp(-j 2 pi k D sin(angle)) / sqrt(N)`.
pub fn array_response(angle: f64, geometry: &ArrayGeometry) -> CVector {
    let n = geometry.num_elements;
    let scale = 1.0 / (n as f64).sqrt();
    let step = -2.0 * PI * geometry.spacing * angle.sin();
    CVector::from_fn(n, |k, _| Complex64::from_polar(scale, step * k as f64))
}

/// Log-distance path loss `fixed + slope * log10(d) + zeta` in dB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLossModel {
    pub fixed_db: f64,
    pub slope_db_per_decade: f64,
    /// Standard deviation of the log-normal shadowing `zeta`.
    pub shadowing_std_db: f64,
    pub distance_m: f64,
}

impl PathLossModel {
    /// 73 GHz NLOS model with 8 dB shadowing.
    pub fn reference(distance_m: f64) -> Self {
        Self {
            fixed_db: 86.6,
            slope_db_per_decade: 24.5,
            shadowing_std_db: 8.0,
            distance_m,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.distance_m > 0.0) || !self.distance_m.is_finite() {
            return Err(Error::Config(format!(
                "distance must be positive, got {}",
                self.distance_m
            )));
        }
        if !(self.shadowing_std_db >= 0.0) {
            return Err(Error::Config("shadowing std must be >= 0".into()));
        }
        if !self.fixed_db.is_finite() || !self.slope_db_per_decade.is_finite() {
            return Err(Error::Config("path loss parameters must be finite".into()));
        }
        Ok(())
    }

    /// Path loss without shadowing.
    pub fn mean_db(&self) -> f64 {
        self.fixed_db + self.slope_db_per_decade * self.distance_m.log10()
    }
}

/// How the large-scale (shadowing) term is handled across realizations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LargeScaleFading {
    /// Draw `zeta ~ N(0, std^2)` for every realization.
    #[default]
    PerRealization,
    /// Use a fixed shadowing value (dB) for every realization.
    Fixed { zeta_db: f64 },
}

/// Distribution of angles of departure and arrival.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AngleDistribution {
    /// Independent uniform draws on `[low, high)` for both AoD and AoA.
    Uniform { low: f64, high: f64 },
    /// Deterministic angles (replay or fixed-geometry experiments).
    Fixed { aod: Vec<f64>, aoa: Vec<f64> },
}

impl Default for AngleDistribution {
    fn default() -> Self {
        AngleDistribution::Uniform {
            low: -PI / 2.0,
            high: PI / 2.0,
        }
    }
}

impl AngleDistribution {
    fn validate(&self, num_paths: usize) -> Result<()> {
        match self {
            AngleDistribution::Uniform { low, high } => {
                if !low.is_finite() || !high.is_finite() || low >= high {
                    return Err(Error::Config(format!(
                        "uniform angle range must satisfy low < high, got [{low}, {high})"
                    )));
                }
            }
            AngleDistribution::Fixed { aod, aoa } => {
                if aod.len() != num_paths || aoa.len() != num_paths {
                    return Err(Error::Config(format!(
                        "fixed angles need {num_paths} AoDs and AoAs, got {} and {}",
                        aod.len(),
                        aoa.len()
                    )));
                }
                if aod.iter().chain(aoa).any(|a| !a.is_finite()) {
                    return Err(Error::Config("fixed angles must be finite".into()));
                }
            }
        }
        Ok(())
    }
}

/// Everything needed to draw a channel besides the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub num_paths: usize,
    pub tx: ArrayGeometry,
    pub rx: ArrayGeometry,
    pub path_loss: PathLossModel,
    #[serde(default)]
    pub angles: AngleDistribution,
    #[serde(default)]
    pub large_scale: LargeScaleFading,
}

impl ChannelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_paths == 0 {
            return Err(Error::Config("channel needs at least one path".into()));
        }
        self.tx.validate()?;
        self.rx.validate()?;
        self.path_loss.validate()?;
        self.angles.validate(self.num_paths)
    }
}

/// One channel draw: the matrix and the path parameters that built it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    #[serde(with = "cmatrix_serde")]
    pub h: CMatrix,
    #[serde(with = "cvec_serde")]
    pub path_gains: Vec<Complex64>,
    pub aod: Vec<f64>,
    pub aoa: Vec<f64>,
    pub tx: ArrayGeometry,
    pub rx: ArrayGeometry,
}

/// Angles and index of the strongest path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DominantPath {
    pub aod: f64,
    pub aoa: f64,
    pub index: usize,
}

/// Draw a channel. The random stream is consumed in a fixed order that does
/// not depend on the array sizes: one shadowing normal, then per path the
/// real and imaginary gain normals, the AoD and the AoA. Channels with the
/// same seed but different `Nt` therefore share gains and angles.
pub fn generate_channel(seed: u64, spec: &ChannelSpec) -> Result<ChannelRealization> {
    spec.validate()?;
    let mut rng = rng_from_seed(seed);
    let zeta_draw: f64 = rng.sample(StandardNormal);
    let zeta_db = match spec.large_scale {
        LargeScaleFading::PerRealization => zeta_draw * spec.path_loss.shadowing_std_db,
        LargeScaleFading::Fixed { zeta_db } => zeta_db,
    };
    let pl_db = spec.path_loss.mean_db() + zeta_db;
    let sigma = (10f64.powf(-0.1 * pl_db) / 2.0).sqrt();

    let l = spec.num_paths;
    let mut gains = Vec::with_capacity(l);
    let mut aod = Vec::with_capacity(l);
    let mut aoa = Vec::with_capacity(l);
    for idx in 0..l {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        gains.push(Complex64::new(re * sigma, im * sigma));
        match &spec.angles {
            AngleDistribution::Uniform { low, high } => {
                aod.push(rng.random_range(*low..*high));
                aoa.push(rng.random_range(*low..*high));
            }
            AngleDistribution::Fixed { aod: d, aoa: a } => {
                aod.push(d[idx]);
                aoa.push(a[idx]);
            }
        }
    }
    ChannelRealization::from_paths(gains, aod, aoa, spec.tx, spec.rx)
}

impl ChannelRealization {
    /// Assemble `H` from explicit path parameters.
    pub fn from_paths(
        path_gains: Vec<Complex64>,
        aod: Vec<f64>,
        aoa: Vec<f64>,
        tx: ArrayGeometry,
        rx: ArrayGeometry,
    ) -> Result<Self> {
        tx.validate()?;
        rx.validate()?;
        let l = path_gains.len();
        if l == 0 || aod.len() != l || aoa.len() != l {
            return Err(Error::Config(format!(
                "path lists must be nonempty and equal length ({l}, {}, {})",
                aod.len(),
                aoa.len()
            )));
        }
        let h = assemble(&path_gains, &aod, &aoa, &tx, &rx);
        Ok(Self { h, path_gains, aod, aoa, tx, rx })
    }

    pub fn num_paths(&self) -> usize {
        self.path_gains.len()
    }

    pub fn n_t(&self) -> usize {
        self.tx.num_elements
    }

    pub fn n_r(&self) -> usize {
        self.rx.num_elements
    }

    /// Path with the largest `|psi_l|`; ties go to the lowest index.
    pub fn dominant_path(&self) -> DominantPath {
        let mut best = 0;
        for (i, g) in self.path_gains.iter().enumerate().skip(1) {
            if g.norm() > self.path_gains[best].norm() {
                best = i;
            }
        }
        DominantPath {
            aod: self.aod[best],
            aoa: self.aoa[best],
            index: best,
        }
    }

    /// Path indices sorted by decreasing `|psi_l|` (stable).
    pub fn paths_by_strength(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.num_paths()).collect();
        idx.sort_by(|&a, &b| self.path_gains[b].norm().total_cmp(&self.path_gains[a].norm()));
        idx
    }

    /// `H a_t(phi_max)`.
    pub fn effective_channel(&self) -> CVector {
        let at = array_response(self.dominant_path().aod, &self.tx);
        &self.h * at
    }

    /// `delta = |a_r(theta_max)^H H a_t(phi_max)|^2`.
    pub fn effective_channel_gain(&self) -> f64 {
        let dom = self.dominant_path();
        let ar = array_response(dom.aoa, &self.rx);
        let at = array_response(dom.aod, &self.tx);
        (ar.adjoint() * &self.h * at)[(0, 0)].norm_sqr()
    }
}

fn assemble(
    gains: &[Complex64],
    aod: &[f64],
    aoa: &[f64],
    tx: &ArrayGeometry,
    rx: &ArrayGeometry,
) -> CMatrix {
    let scale = ((tx.num_elements * rx.num_elements) as f64 / gains.len() as f64).sqrt();
    let mut h = CMatrix::zeros(rx.num_elements, tx.num_elements);
    for ((g, &phi), &theta) in gains.iter().zip(aod).zip(aoa) {
        let ar = array_response(theta, rx);
        let at = array_response(phi, tx);
        h += (ar * at.adjoint()) * (g * scale);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn spec(nt: usize, nr: usize, l: usize) -> ChannelSpec {
        ChannelSpec {
            num_paths: l,
            tx: ArrayGeometry::half_wavelength(nt),
            rx: ArrayGeometry::half_wavelength(nr),
            path_loss: PathLossModel::reference(15.0),
            angles: AngleDistribution::default(),
            large_scale: LargeScaleFading::PerRealization,
        }
    }

    #[test]
    fn broadside_response() {
        let a = array_response(0.0, &ArrayGeometry::half_wavelength(4));
        for z in a.iter() {
            assert_relative_eq!(z.re, 0.5, epsilon = 1e-15);
            assert_relative_eq!(z.im, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn endfire_response() {
        let a = array_response(PI / 2.0, &ArrayGeometry::half_wavelength(2));
        let s = 1.0 / 2f64.sqrt();
        assert!((a[0] - c(s, 0.0)).norm() < 1e-15);
        assert!((a[1] - c(-s, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn invalid_geometry() {
        assert!(ArrayGeometry::new(0, 0.5).is_err());
        assert!(ArrayGeometry::new(4, 0.0).is_err());
        assert!(ArrayGeometry::new(4, -1.0).is_err());
    }

    #[test]
    fn invalid_angle_spec() {
        let mut s = spec(4, 4, 2);
        s.angles = AngleDistribution::Uniform { low: 1.0, high: 1.0 };
        assert!(matches!(generate_channel(1, &s), Err(Error::Config(_))));
        s.angles = AngleDistribution::Fixed { aod: vec![0.0], aoa: vec![0.0, 0.1] };
        assert!(matches!(generate_channel(1, &s), Err(Error::Config(_))));
    }

    #[test]
    fn single_path_is_rank_one() {
        let ch = generate_channel(42, &spec(8, 6, 1)).unwrap();
        let sv = ch.h.clone().singular_values();
        let top = sv.max();
        let rest = sv.iter().filter(|&&s| s < top).cloned().fold(0.0, f64::max);
        assert!(rest < 1e-12 * top);
    }

    #[test]
    fn same_seed_bit_identical() {
        let s = spec(16, 16, 5);
        let a = generate_channel(9, &s).unwrap();
        let b = generate_channel(9, &s).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.h, generate_channel(10, &s).unwrap().h);
    }

    #[test]
    fn gains_and_angles_shared_across_nt() {
        let a = generate_channel(5, &spec(4, 16, 5)).unwrap();
        let b = generate_channel(5, &spec(64, 16, 5)).unwrap();
        assert_eq!(a.path_gains, b.path_gains);
        assert_eq!(a.aod, b.aod);
    }

    #[test]
    fn dominant_path_rules() {
        let tx = ArrayGeometry::half_wavelength(4);
        let rx = ArrayGeometry::half_wavelength(4);
        let ch = ChannelRealization::from_paths(
            vec![c(0.1, 0.0), c(0.0, 0.9), c(0.3, 0.0)],
            vec![0.1, 0.2, 0.3],
            vec![-0.1, -0.2, -0.3],
            tx,
            rx,
        )
        .unwrap();
        let d = ch.dominant_path();
        assert_eq!(d.index, 1);
        assert_eq!((d.aod, d.aoa), (0.2, -0.2));

        let tie = ChannelRealization::from_paths(
            vec![c(0.5, 0.0), c(0.1, 0.0), c(0.0, -0.5)],
            vec![0.1, 0.2, 0.3],
            vec![0.0; 3],
            tx,
            rx,
        )
        .unwrap();
        assert_eq!(tie.dominant_path().index, 0);

        let one = ChannelRealization::from_paths(vec![c(0.01, 0.0)], vec![0.7], vec![0.4], tx, rx)
            .unwrap();
        assert_eq!(one.dominant_path().index, 0);
    }

    #[test]
    fn effective_channel_single_path() {
        let tx = ArrayGeometry::half_wavelength(8);
        let rx = ArrayGeometry::half_wavelength(4);
        let ch =
            ChannelRealization::from_paths(vec![c(1.0, 0.0)], vec![0.3], vec![-0.6], tx, rx).unwrap();
        let expect = array_response(-0.6, &rx) * c(32f64.sqrt(), 0.0);
        assert!((ch.effective_channel() - expect).norm() < 1e-12);
        assert_relative_eq!(ch.effective_channel_gain(), 32.0, max_relative = 1e-12);

        let psi = c(0.3, -0.4);
        let ch = ChannelRealization::from_paths(vec![psi], vec![0.3], vec![-0.6], tx, rx).unwrap();
        assert_relative_eq!(ch.effective_channel_gain(), 32.0 * psi.norm_sqr(), max_relative = 1e-12);
    }

    #[test]
    fn zero_channel() {
        let tx = ArrayGeometry::half_wavelength(4);
        let ch =
            ChannelRealization::from_paths(vec![c(0.0, 0.0)], vec![0.3], vec![0.1], tx, tx).unwrap();
        assert_eq!(ch.effective_channel().norm(), 0.0);
        assert_eq!(ch.effective_channel_gain(), 0.0);
    }

    #[test]
    fn delta_below_spectral_norm() {
        for seed in 0..50 {
            let ch = generate_channel(seed, &spec(8, 16, 5)).unwrap();
            let s = ch.h.clone().singular_values().max();
            assert!(ch.effective_channel_gain() <= s * s * (1.0 + 1e-12));
        }
    }

    #[test]
    fn json_round_trip() {
        let ch = generate_channel(3, &spec(4, 2, 2)).unwrap();
        let text = serde_json::to_string(&ch).unwrap();
        let back: ChannelRealization = serde_json::from_str(&text).unwrap();
        assert_eq!(back, ch);
    }
}

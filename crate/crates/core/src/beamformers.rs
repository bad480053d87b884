//! Transmit filters for the digital, analog, hybrid and quantized-analog
//! schemes. Every constructor normalizes `F_BB` so that
//! `trace(F_RF F_BB F_BB^H F_RF^H) = P`.

use std::f64::consts::PI;

use nalgebra::SVD;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{array_response, ArrayGeometry, ChannelRealization};
use crate::error::{Error, Result};
use crate::linalg::{cmatrix_serde, CMatrix, HermitianCov};

/// Relative singular-value threshold used for the numerical rank of `H`.
pub const RANK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Digital,
    Analog,
    Hybrid,
    QuantizedAnalog,
}

impl Scheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::Digital => "digital",
            Scheme::Analog => "analog",
            Scheme::Hybrid => "hybrid",
            Scheme::QuantizedAnalog => "quantized_analog",
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PowerAllocation {
    #[default]
    EqualSplit,
    /// Classical water-filling over the channel eigenmodes for the given
    /// noise power (ignores the PA nonlinearity).
    WaterFilling { noise_power: f64 },
}

/// Cascade `F_RF F_BB` with its total input power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Beamformer {
    #[serde(with = "cmatrix_serde")]
    pub f_rf: CMatrix,
    #[serde(with = "cmatrix_serde")]
    pub f_bb: CMatrix,
    pub total_input_power: f64,
    /// False for the fully digital scheme, whose `F_RF` is the identity.
    pub constant_modulus: bool,
}

impl Beamformer {
    /// `C_u = F_RF F_BB F_BB^H F_RF^H`.
    pub fn covariance(&self) -> HermitianCov {
        let f = &self.f_rf * &self.f_bb;
        HermitianCov::from_trusted(&f * f.adjoint())
    }

    pub fn n_rf(&self) -> usize {
        self.f_rf.ncols()
    }

    pub fn n_s(&self) -> usize {
        self.f_bb.ncols()
    }

    /// Largest deviation of `|[F_RF]_ij|` from `1/sqrt(Nt)`.
    pub fn modulus_defect(&self) -> f64 {
        let target = 1.0 / (self.f_rf.nrows() as f64).sqrt();
        self.f_rf.iter().fold(0.0, |acc, z| acc.max((z.norm() - target).abs()))
    }

    fn normalized(f_rf: CMatrix, f_bb: CMatrix, p: f64, constant_modulus: bool) -> Result<Self> {
        let f = &f_rf * &f_bb;
        let current = f.norm_squared();
        if !(current > 0.0) {
            return Err(Error::Numerical("beamformer has zero output".into()));
        }
        let f_bb = f_bb.scale((p / current).sqrt());
        Ok(Self {
            f_rf,
            f_bb,
            total_input_power: p,
            constant_modulus,
        })
    }
}

fn check_power(p: f64) -> Result<()> {
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::Config(format!("total input power must be positive, got {p}")));
    }
    Ok(())
}

fn steering_matrix(angles: &[f64], geometry: &ArrayGeometry) -> CMatrix {
    let cols: Vec<_> = angles.iter().map(|&a| array_response(a, geometry)).collect();
    CMatrix::from_columns(&cols)
}

/// Identity block `I_{Nrf x Ns}`.
fn identity_block(n_rf: usize, n_s: usize) -> CMatrix {
    CMatrix::from_fn(n_rf, n_s, |i, j| {
        if i == j {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// Analog beamformer matched to the AoDs of the `n_rf` strongest paths.
pub fn analog_aod(ch: &ChannelRealization, n_rf: usize, n_s: usize, p: f64) -> Result<Beamformer> {
    check_power(p)?;
    if n_s == 0 || n_s > n_rf {
        return Err(Error::Config(format!("need 1 <= Ns <= Nrf, got Ns={n_s}, Nrf={n_rf}")));
    }
    if n_rf > ch.num_paths() {
        return Err(Error::Config(format!(
            "Nrf={n_rf} exceeds the number of paths L={}",
            ch.num_paths()
        )));
    }
    let angles: Vec<f64> = ch.paths_by_strength()[..n_rf].iter().map(|&i| ch.aod[i]).collect();
    Beamformer::normalized(steering_matrix(&angles, &ch.tx), identity_block(n_rf, n_s), p, true)
}

/// Right singular vectors of `H` sorted by decreasing singular value.
fn right_singular_basis(h: &CMatrix) -> (Vec<f64>, CMatrix) {
    let svd = SVD::new(h.clone(), false, true);
    let v_t = svd.v_t.expect("requested V^H");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let values = order.iter().map(|&i| svd.singular_values[i]).collect();
    let cols: Vec<_> = order.iter().map(|&i| v_t.row(i).adjoint()).collect();
    (values, CMatrix::from_columns(&cols))
}

pub fn numerical_rank(h: &CMatrix) -> usize {
    let sv = h.clone().singular_values();
    let top = sv.max();
    if !(top > 0.0) {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_TOL * top).count()
}

/// Fully digital precoder along the top `n_s` right singular vectors of `H`.
pub fn digital_eigen(
    ch: &ChannelRealization,
    n_s: usize,
    p: f64,
    allocation: PowerAllocation,
) -> Result<Beamformer> {
    check_power(p)?;
    let rank = numerical_rank(&ch.h);
    if n_s == 0 || n_s > rank {
        return Err(Error::Config(format!("Ns={n_s} must be in 1..={rank} (rank of H)")));
    }
    let (sv, v) = right_singular_basis(&ch.h);
    let powers = match allocation {
        PowerAllocation::EqualSplit => vec![p / n_s as f64; n_s],
        PowerAllocation::WaterFilling { noise_power } => water_fill(&sv[..n_s], noise_power, p)?,
    };
    let nt = ch.n_t();
    let f_bb = CMatrix::from_fn(nt, n_s, |r, c| v[(r, c)] * powers[c].sqrt());
    Beamformer::normalized(CMatrix::identity(nt, nt), f_bb, p, false)
}

fn water_fill(singular_values: &[f64], noise: f64, p: f64) -> Result<Vec<f64>> {
    if !(noise > 0.0) {
        return Err(Error::Config("water-filling noise power must be positive".into()));
    }
    let floors: Vec<f64> = singular_values.iter().map(|s| noise / (s * s)).collect();
    let mut active = floors.len();
    loop {
        let level = (p + floors[..active].iter().sum::<f64>()) / active as f64;
        if level > floors[active - 1] || active == 1 {
            return Ok(floors
                .iter()
                .enumerate()
                .map(|(i, f)| if i < active { (level - f).max(0.0) } else { 0.0 })
                .collect());
        }
        active -= 1;
    }
}

/// Round every `F_RF` phase to the nearest multiple of `2 pi / 2^bits`.
pub fn quantize_phases(bf: &Beamformer, bits: u32) -> Result<Beamformer> {
    if bits == 0 || bits > 52 {
        return Err(Error::Config(format!("quantization bits must be in 1..=52, got {bits}")));
    }
    let step = 2.0 * PI / 2f64.powi(bits as i32);
    let f_rf = bf.f_rf.map(|z| {
        let (r, th) = z.to_polar();
        Complex64::from_polar(r, (th / step).round() * step)
    });
    Beamformer::normalized(f_rf, bf.f_bb.clone(), bf.total_input_power, bf.constant_modulus)
}

/// `n` angles with `sin(phi)` uniformly spaced on `[-1, 1)`.
pub fn sine_spaced_dictionary(n: usize) -> Vec<f64> {
    (0..n).map(|k| (-1.0 + 2.0 * k as f64 / n as f64).asin()).collect()
}

/// Spatially sparse hybrid precoder: orthogonal matching pursuit of the top
/// `n_s` digital precoder over array responses at the dictionary angles.
pub fn hybrid_omp(
    ch: &ChannelRealization,
    n_rf: usize,
    n_s: usize,
    p: f64,
    dictionary: &[f64],
) -> Result<Beamformer> {
    check_power(p)?;
    if n_s == 0 || n_s > n_rf {
        return Err(Error::Config(format!("need 1 <= Ns <= Nrf, got Ns={n_s}, Nrf={n_rf}")));
    }
    if dictionary.len() < n_rf {
        return Err(Error::Config(format!(
            "dictionary has {} atoms, fewer than Nrf={n_rf}",
            dictionary.len()
        )));
    }
    let rank = numerical_rank(&ch.h);
    if n_s > rank {
        return Err(Error::Config(format!("Ns={n_s} exceeds rank of H ({rank})")));
    }
    let (_, v) = right_singular_basis(&ch.h);
    let f_opt = v.columns(0, n_s).into_owned();
    let atoms = steering_matrix(dictionary, &ch.tx);

    let mut chosen: Vec<usize> = Vec::with_capacity(n_rf);
    let mut f_res = f_opt.clone();
    let mut f_bb = CMatrix::zeros(0, n_s);
    for _ in 0..n_rf {
        let corr = atoms.adjoint() * &f_res;
        let mut best = None;
        let mut best_val = f64::NEG_INFINITY;
        for k in 0..atoms.ncols() {
            if chosen.contains(&k) {
                continue;
            }
            let val = corr.row(k).norm_squared();
            if val > best_val {
                best_val = val;
                best = Some(k);
            }
        }
        chosen.push(best.expect("dictionary has at least Nrf atoms"));
        let f_rf = steering_matrix(&chosen.iter().map(|&k| dictionary[k]).collect::<Vec<_>>(), &ch.tx);
        f_bb = least_squares(&f_rf, &f_opt)?;
        let res = &f_opt - &f_rf * &f_bb;
        let norm = res.norm();
        if norm <= 1e-14 * f_opt.norm() {
            f_res = res;
            continue;
        }
        f_res = res.unscale(norm);
    }
    let f_rf = steering_matrix(&chosen.iter().map(|&k| dictionary[k]).collect::<Vec<_>>(), &ch.tx);
    Beamformer::normalized(f_rf, f_bb, p, true)
}

/// Minimum-norm least-squares solution of `a x = b`.
fn least_squares(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    let svd = SVD::new(a.clone(), true, true);
    svd.solve(b, 1e-12 * svd.singular_values.max())
        .map_err(|e| Error::Numerical(format!("least squares failed: {e}")))
}

/// Options shared by [`build_beamformer`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeOptions {
    pub quantization_bits: u32,
    pub dictionary: Vec<f64>,
    pub allocation: PowerAllocation,
}

impl Default for SchemeOptions {
    fn default() -> Self {
        Self {
            quantization_bits: 4,
            dictionary: sine_spaced_dictionary(256),
            allocation: PowerAllocation::EqualSplit,
        }
    }
}

pub fn build_beamformer(
    scheme: Scheme,
    ch: &ChannelRealization,
    n_rf: usize,
    n_s: usize,
    p: f64,
    options: &SchemeOptions,
) -> Result<Beamformer> {
    match scheme {
        Scheme::Digital => digital_eigen(ch, n_s, p, options.allocation),
        Scheme::Analog => analog_aod(ch, n_rf, n_s, p),
        Scheme::QuantizedAnalog => quantize_phases(&analog_aod(ch, n_rf, n_s, p)?, options.quantization_bits),
        Scheme::Hybrid => hybrid_omp(ch, n_rf, n_s, p, &options.dictionary),
    }
}

/// Chordal distance between the column spaces of `a` and `b`:
/// `||Q_a Q_a^H - Q_b Q_b^H||_F / sqrt(2)`.
pub fn chordal_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    let proj = |m: &CMatrix| {
        let q = m.clone().qr().q();
        &q * q.adjoint()
    };
    (proj(a) - proj(b)).norm() / 2f64.sqrt()
}

//! Brute-force verifiers for the closed forms: Monte Carlo simulation of the
//! raw polynomial PA, exhaustive Isserlis pairing enumeration, and the
//! validation suite that ties them together.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beamformers::analog_aod;
use crate::channel::{generate_channel, ChannelSpec};
use crate::distortion::{distortion_covariance, distortion_covariance_from_kernels};
use crate::error::{Error, Result};
use crate::linalg::{cmatrix_serde, outer, psd_sqrt, rel_frobenius, CMatrix, CVector, HermitianCov};
use crate::link_metrics::{se_lower_bound, se_single_rf, spectral_efficiency};
use crate::pa_model::{binomial, factorial, PaCoefficients};
use crate::rng::{mix_seed, rng_from_seed, stream};

pub const MC_BLOCK: usize = 1 << 16;
pub const MC_MIN_SAMPLES: usize = 10_000;
/// Largest `m + n` accepted by [`isserlis_moment`].
pub const ISSERLIS_MAX_ORDER: usize = 6;

/// Empirical Bussgang decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub gain_hat: Vec<Complex64>,
    #[serde(with = "cmatrix_serde")]
    pub cd_hat: CMatrix,
    /// Largest off-diagonal `|E{d_k u_n^*}|`.
    pub orthogonality_residual: f64,
    pub n_samples: usize,
    pub seed: u64,
}

fn standard_complex(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Raw sums `sum u u^H`, `sum x u^H`, `sum x x^H` for one block, row-major.
struct Moments {
    uu: Vec<Complex64>,
    xu: Vec<Complex64>,
    xx: Vec<Complex64>,
}

impl Moments {
    fn zeros(n: usize) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); n * n];
        Self { uu: z.clone(), xu: z.clone(), xx: z }
    }
}

fn block_moments(s: &CMatrix, pa: &PaCoefficients, seed: u64, count: usize) -> Moments {
    let n = s.nrows();
    let mut rng = rng_from_seed(seed);
    let mut acc = Moments::zeros(n);
    let mut z = vec![Complex64::new(0.0, 0.0); n];
    let mut u = vec![Complex64::new(0.0, 0.0); n];
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for _ in 0..count {
        for zk in z.iter_mut() {
            *zk = standard_complex(&mut rng);
        }
        for i in 0..n {
            let mut v = Complex64::new(0.0, 0.0);
            for k in 0..n {
                v += s[(i, k)] * z[k];
            }
            u[i] = v;
            x[i] = pa.transfer(v);
        }
        for i in 0..n {
            let row = i * n;
            for j in 0..n {
                let uj = u[j].conj();
                acc.uu[row + j] += u[i] * uj;
                acc.xu[row + j] += x[i] * uj;
                acc.xx[row + j] += x[i] * x[j].conj();
            }
        }
    }
    acc
}

/// Compensated summation of block sums, in block order.
fn kahan_reduce(blocks: &[Moments], n: usize) -> Moments {
    let mut sum = Moments::zeros(n);
    let mut comp = Moments::zeros(n);
    for b in blocks {
        for (s, c, v) in [
            (&mut sum.uu, &mut comp.uu, &b.uu),
            (&mut sum.xu, &mut comp.xu, &b.xu),
            (&mut sum.xx, &mut comp.xx, &b.xx),
        ] {
            for k in 0..v.len() {
                let y = v[k] - c[k];
                let t = s[k] + y;
                c[k] = (t - s[k]) - y;
                s[k] = t;
            }
        }
    }
    sum
}

/// Monte Carlo Bussgang estimate for `u ~ CN(0, C_u)` through `pa` on every
/// branch. Blocks of 2^16 samples use independent derived seeds and are
/// reduced in block order, so the result does not depend on the thread count.
pub fn mc_bussgang(cu: &HermitianCov, pa: &PaCoefficients, n_samples: usize, seed: u64) -> Result<McEstimate> {
    if n_samples < MC_MIN_SAMPLES {
        return Err(Error::Config(format!("need at least {MC_MIN_SAMPLES} samples, got {n_samples}")));
    }
    let cu = HermitianCov::new(cu.matrix().clone())?;
    let n = cu.dim();
    let s = psd_sqrt(cu.matrix());
    let base = mix_seed(seed, stream::MONTE_CARLO);
    let n_blocks = n_samples.div_ceil(MC_BLOCK);
    let blocks: Vec<Moments> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let count = MC_BLOCK.min(n_samples - b * MC_BLOCK);
            block_moments(&s, pa, mix_seed(base, b as u64), count)
        })
        .collect();
    let sum = kahan_reduce(&blocks, n);
    let inv = 1.0 / n_samples as f64;
    let at = |v: &Vec<Complex64>, i: usize, j: usize| v[i * n + j] * inv;

    let gain_hat: Vec<Complex64> = (0..n).map(|i| at(&sum.xu, i, i) / at(&sum.uu, i, i).re).collect();
    let g = &gain_hat;
    let mut cd = CMatrix::zeros(n, n);
    let mut residual = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let sxx = at(&sum.xx, i, j);
            let sxu = at(&sum.xu, i, j);
            let sux = at(&sum.xu, j, i).conj();
            let suu = at(&sum.uu, i, j);
            cd[(i, j)] = sxx - g[i] * sux - sxu * g[j].conj() + g[i] * suu * g[j].conj();
            if i != j {
                residual = residual.max((sxu - g[i] * suu).norm());
            }
        }
    }
    let cd_hat = (&cd + cd.adjoint()).scale(0.5);
    Ok(McEstimate {
        gain_hat,
        cd_hat,
        orthogonality_residual: residual,
        n_samples,
        seed,
    })
}

/// A cross moment `E{phi_m(a) phi_n(b)^*}` with `phi_m(a) = |a|^{2m} a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairingMoment {
    pub m: usize,
    pub n: usize,
    pub sigma_a_sq: f64,
    pub sigma_b_sq: f64,
    pub rho: Complex64,
    pub value: Complex64,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Factor {
    A,
    AConj,
    B,
    BConj,
}

struct PairTable {
    sa: f64,
    sb: f64,
    rho: Complex64,
}

impl PairTable {
    fn moment(&self, x: Factor, y: Factor) -> Complex64 {
        use Factor::*;
        let r = |v: f64| Complex64::new(v, 0.0);
        match (x, y) {
            (A, AConj) | (AConj, A) => r(self.sa),
            (B, BConj) | (BConj, B) => r(self.sb),
            (A, BConj) | (BConj, A) => self.rho,
            (AConj, B) | (B, AConj) => self.rho.conj(),
            _ => r(0.0),
        }
    }
}

/// Sum over all perfect matchings, recursing on the first unpaired factor.
fn sum_matchings(items: &mut Vec<Factor>, table: &PairTable) -> Complex64 {
    if items.is_empty() {
        return Complex64::new(1.0, 0.0);
    }
    let first = items.remove(0);
    let mut total = Complex64::new(0.0, 0.0);
    for k in 0..items.len() {
        let w = table.moment(first, items[k]);
        if w == Complex64::new(0.0, 0.0) {
            continue;
        }
        let partner = items.remove(k);
        total += w * sum_matchings(items, table);
        items.insert(k, partner);
    }
    items.insert(0, first);
    total
}

/// Exact `E{phi_m(a) phi_n(b)^*}` for jointly circular Gaussian `a`, `b`
/// by enumerating every pairing of the factors
/// `a^(m+1), (a^*)^m, b^n, (b^*)^(n+1)`.
pub fn isserlis_moment(m: usize, n: usize, sigma_a_sq: f64, sigma_b_sq: f64, rho: Complex64) -> Result<Complex64> {
    if m + n > ISSERLIS_MAX_ORDER {
        return Err(Error::Config(format!(
            "m + n = {} exceeds {ISSERLIS_MAX_ORDER}: (2(m+n)+1)!! pairings is too many to enumerate",
            m + n
        )));
    }
    let mut items = Vec::with_capacity(2 * (m + n + 1));
    items.extend(std::iter::repeat_n(Factor::A, m + 1));
    items.extend(std::iter::repeat_n(Factor::AConj, m));
    items.extend(std::iter::repeat_n(Factor::B, n));
    items.extend(std::iter::repeat_n(Factor::BConj, n + 1));
    let table = PairTable { sa: sigma_a_sq, sb: sigma_b_sq, rho };
    Ok(sum_matchings(&mut items, &table))
}

fn cross_moment_sum(m: usize, n: usize, sa: f64, sb: f64, rho: Complex64, q_start: usize) -> Complex64 {
    let lead = factorial(m + 1) * factorial(n + 1);
    (q_start..=m.min(n))
        .map(|q| {
            let w = lead / (q + 1) as f64
                * binomial(m, q)
                * binomial(n, q)
                * sa.powi((m - q) as i32)
                * sb.powi((n - q) as i32)
                * rho.norm_sqr().powi(q as i32);
            rho * w
        })
        .sum()
}

/// Closed-form cross moment, summing from `q = 0`.
pub fn cross_moment_closed_form(m: usize, n: usize, sigma_a_sq: f64, sigma_b_sq: f64, rho: Complex64) -> Complex64 {
    cross_moment_sum(m, n, sigma_a_sq, sigma_b_sq, rho, 0)
}

/// The same sum started at `q = 1`; kept as a negative control.
pub fn cross_moment_from_q1(m: usize, n: usize, sigma_a_sq: f64, sigma_b_sq: f64, rho: Complex64) -> Complex64 {
    cross_moment_sum(m, n, sigma_a_sq, sigma_b_sq, rho, 1)
}

/// Distortion kernels with `beta_{2m+1}` in place of `beta_{2q+1}` inside the
/// sum; a negative control.
pub fn shifted_index_gammas(pa: &PaCoefficients, p: f64) -> Vec<Complex64> {
    let order = pa.order();
    (1..=order)
        .map(|m| {
            let s: Complex64 = (m..=order)
                .map(|q| pa.coeffs()[m] * binomial(q, m) * factorial(q + 1) * p.powi((q - m) as i32))
                .sum();
            s * (1.0 / (m as f64 + 1.0)).sqrt()
        })
        .collect()
}

pub fn shifted_index_distortion_covariance(cu: &HermitianCov, pa: &PaCoefficients) -> HermitianCov {
    let gammas: Vec<_> = cu.diagonal_real().iter().map(|&p| shifted_index_gammas(pa, p.max(0.0))).collect();
    distortion_covariance_from_kernels(cu, &gammas)
}

/// `P f f^H` with `f` having unit-modulus entries scaled by `1/sqrt(n)` and
/// uniformly random phases.
pub fn random_constant_modulus_cov(rng: &mut ChaCha8Rng, n: usize, total_power: f64) -> HermitianCov {
    let f = CVector::from_fn(n, |_, _| {
        Complex64::from_polar(1.0 / (n as f64).sqrt(), rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))
    });
    HermitianCov::from_trusted(outer(&f, &f).scale(total_power))
}

/// Wishart-type full-rank covariance scaled to `trace = total_power`.
pub fn random_full_rank_cov(rng: &mut ChaCha8Rng, n: usize, total_power: f64) -> HermitianCov {
    let a = CMatrix::from_fn(n, 2 * n, |_, _| standard_complex(rng));
    let c = &a * a.adjoint();
    let tr: f64 = (0..n).map(|i| c[(i, i)].re).sum();
    HermitianCov::from_trusted(c.scale(total_power / tr))
}

/// Settings for [`validate_all`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationConfig {
    pub pa: PaCoefficients,
    pub channel: ChannelSpec,
    pub noise_power: f64,
    pub n_samples: usize,
    pub n_channels: usize,
    pub seed: u64,
    /// Per-branch input power of the Monte Carlo covariance checks, in the
    /// PA's unit.
    pub branch_power: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expect {
    /// Pass when `measured <= tolerance`.
    AtMost,
    /// Pass when `measured > tolerance` (negative control).
    Above,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub check: String,
    pub measured: f64,
    pub tolerance: f64,
    pub expect: Expect,
    pub pass: bool,
}

impl CheckResult {
    fn new(check: &str, measured: f64, tolerance: f64, expect: Expect) -> Self {
        let pass = match expect {
            Expect::AtMost => measured <= tolerance,
            Expect::Above => measured > tolerance,
        };
        Self { check: check.into(), measured, tolerance, expect, pass }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
    pub all_pass: bool,
}

impl ValidationReport {
    pub fn failing(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.pass).map(|c| c.check.as_str()).collect()
    }
}

fn max_rel(a: Complex64, b: Complex64) -> f64 {
    let d = (a - b).norm();
    if b.norm() == 0.0 { d } else { d / b.norm() }
}

/// Run the oracle suite: Bussgang gain and distortion covariance against
/// Monte Carlo, the cross-moment closed form against pairing enumeration,
/// rank-one collapse, the single-RF SE identities, and the negative controls
/// for the two alternative index readings.
pub fn validate_all(cfg: &ValidationConfig) -> Result<ValidationReport> {
    let pa = &cfg.pa;
    let mut checks = Vec::new();
    let mut rng = rng_from_seed(mix_seed(cfg.seed, stream::PROPERTY));

    // Bussgang gain at several branch powers, one branch each.
    let powers = [0.01, 0.1, 1.0, 4.0, 10.0].map(|p| pa.unit().from_milliwatts(p));
    let diag = CMatrix::from_diagonal(&CVector::from_iterator(5, powers.iter().map(|&p| Complex64::new(p, 0.0))));
    let mc = mc_bussgang(&HermitianCov::new(diag)?, pa, cfg.n_samples, cfg.seed)?;
    let mut gain_err = 0.0f64;
    for (k, &p) in powers.iter().enumerate() {
        gain_err = gain_err.max(max_rel(mc.gain_hat[k], pa.avg_linear_gain(p)?));
    }
    checks.push(CheckResult::new("bussgang_gain_vs_monte_carlo", gain_err, 5e-3, Expect::AtMost));

    // Distortion covariance, rank-one constant-modulus and full-rank.
    let n_t = 4;
    let cm = random_constant_modulus_cov(&mut rng, n_t, cfg.branch_power * n_t as f64);
    let fr = random_full_rank_cov(&mut rng, n_t, cfg.branch_power * n_t as f64);
    let mut cd_err = 0.0f64;
    let mut shifted_err = f64::INFINITY;
    for (k, cu) in [cm, fr].iter().enumerate() {
        let est = mc_bussgang(cu, pa, cfg.n_samples, mix_seed(cfg.seed, 1 + k as u64))?;
        let cd = distortion_covariance(cu, pa)?;
        cd_err = cd_err.max(rel_frobenius(&est.cd_hat, cd.matrix()));
        shifted_err = shifted_err.min(rel_frobenius(&est.cd_hat, shifted_index_distortion_covariance(cu, pa).matrix()));
    }
    checks.push(CheckResult::new("distortion_covariance_vs_monte_carlo", cd_err, 2e-2, Expect::AtMost));
    if shifted_index_gammas(pa, cfg.branch_power) != pa.gammas(cfg.branch_power)? {
        checks.push(CheckResult::new(
            "negative_control_shifted_gamma_index",
            shifted_err,
            0.1,
            Expect::Above,
        ));
    }

    // Cross moments.
    let mut cross_err = 0.0f64;
    let mut from_q1_err = 0.0f64;
    for _ in 0..50 {
        let sa: f64 = rng.random_range(0.1..3.0);
        let sb: f64 = rng.random_range(0.1..3.0);
        let mag = rng.random_range(0.0..1.0) * f64::sqrt(sa * sb);
        let rho = Complex64::from_polar(mag, rng.random_range(-std::f64::consts::PI..std::f64::consts::PI));
        for m in 0..=3 {
            for n in 0..=3 {
                let exact = isserlis_moment(m, n, sa, sb, rho)?;
                cross_err = cross_err.max(max_rel(cross_moment_closed_form(m, n, sa, sb, rho), exact));
                from_q1_err = from_q1_err.max(max_rel(cross_moment_from_q1(m, n, sa, sb, rho), exact));
            }
        }
    }
    checks.push(CheckResult::new("cross_moment_vs_pairing_enumeration", cross_err, 1e-9, Expect::AtMost));
    checks.push(CheckResult::new("negative_control_sum_from_q1", from_q1_err, 1e-9, Expect::Above));

    // Rank-one constant-modulus collapse.
    let mut collapse = 0.0f64;
    for _ in 0..20 {
        let p_total = cfg.branch_power * 8.0;
        let cu = random_constant_modulus_cov(&mut rng, 8, p_total);
        let cd = distortion_covariance(&cu, pa)?;
        let expected = cu.matrix().scale(pa.gbar_d(cfg.branch_power)?);
        let err = if expected.norm() == 0.0 { cd.matrix().norm() } else { rel_frobenius(cd.matrix(), &expected) };
        collapse = collapse.max(err);
    }
    checks.push(CheckResult::new("rank_one_collapse", collapse, 1e-12, Expect::AtMost));

    // Single-RF SE identities over random channels.
    let mut eq_err = 0.0f64;
    let mut tight_err = 0.0f64;
    let mut bound_violation = 0.0f64;
    let p = cfg.branch_power * cfg.channel.tx.num_elements as f64;
    let mut single = cfg.channel.clone();
    single.num_paths = 1;
    for k in 0..cfg.n_channels {
        let seed = mix_seed(cfg.seed, 1000 + k as u64);
        let ch = generate_channel(seed, &cfg.channel)?;
        let bf = analog_aod(&ch, 1, 1, p)?;
        let general = spectral_efficiency(&ch.h, &bf.covariance(), pa, cfg.noise_power)?;
        let closed = se_single_rf(p, &ch, pa, cfg.noise_power)?;
        eq_err = eq_err.max((general - closed).abs() / closed.abs().max(1e-300));
        let lb = se_lower_bound(p, &ch, pa, cfg.noise_power)?;
        bound_violation = bound_violation.max(lb - closed);

        let ch1 = generate_channel(seed, &single)?;
        let se1 = se_single_rf(p, &ch1, pa, cfg.noise_power)?;
        let lb1 = se_lower_bound(p, &ch1, pa, cfg.noise_power)?;
        tight_err = tight_err.max((se1 - lb1).abs() / se1.abs().max(1e-300));
    }
    checks.push(CheckResult::new("general_se_equals_single_rf_closed_form", eq_err, 1e-9, Expect::AtMost));
    checks.push(CheckResult::new("single_path_bound_tight", tight_err, 1e-9, Expect::AtMost));
    checks.push(CheckResult::new("bound_never_exceeds_se", bound_violation.max(0.0), 1e-12, Expect::AtMost));

    let all_pass = checks.iter().all(|c| c.pass);
    Ok(ValidationReport { checks, all_pass })
}

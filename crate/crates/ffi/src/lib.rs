//! C ABI over the `nlpa` library.
//!
//! Objects are opaque handles created by `nlpa_*_new`/`nlpa_*_generate` and
//! released with the matching `*_free`. Every entry point returns an
//! [`NlpaStatus`]; on failure [`nlpa_last_error_message`] describes the error
//! for the calling thread. Panics never cross the boundary.
//!
//! Powers are expressed in the PA's power unit unless the name says dBm.
//! Complex matrices are passed as interleaved `(re, im)` doubles in
//! column-major order.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use nlpa::channel::{generate_channel, ChannelRealization};
use nlpa::config::ExperimentConfig;
use nlpa::distortion::distortion_covariance;
use nlpa::ee_optimizer::solve_p2;
use nlpa::linalg::{CMatrix, HermitianCov};
use nlpa::link_metrics::{se_single_rf, LinkBudget};
use nlpa::pa_model::PaCoefficients;
use nlpa::units::PowerUnit;
use nlpa::Error;
use num_complex::Complex64;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NlpaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Numerical = 3,
    Infeasible = 4,
    Internal = 5,
    Panic = 6,
}

/// Opaque PA model.
pub struct NlpaPa(PaCoefficients);

/// Opaque channel realization.
pub struct NlpaChannel(ChannelRealization);

/// Link budget with powers in dBm. A `consumed_power_cap_dbm` of `+inf`
/// means no cap.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct NlpaBudget {
    pub noise_dbm: f64,
    pub bandwidth_hz: f64,
    pub pa_max_output_dbm: f64,
    pub pa_max_efficiency: f64,
    pub consumed_power_cap_dbm: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct NlpaP2Solution {
    pub p_star: f64,
    pub ee_star_bits_per_joule: f64,
    pub se_at_star: f64,
    pub pcons_at_star: f64,
    pub on_constraint_boundary: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn status_of(err: &Error) -> NlpaStatus {
    match err {
        Error::Schema { .. } | Error::Config(_) | Error::Domain(_) | Error::Dimension(_) | Error::Validation(_) => {
            NlpaStatus::InvalidArgument
        }
        Error::Numerical(_) => NlpaStatus::Numerical,
        Error::Infeasible(_) => NlpaStatus::Infeasible,
        _ => NlpaStatus::Internal,
    }
}

enum Fail {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> NlpaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NlpaStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            NlpaStatus::NullPointer
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            NlpaStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

fn budget_in(b: &NlpaBudget, unit: PowerUnit) -> Result<LinkBudget, Error> {
    let budget = LinkBudget {
        noise_power: unit.from_dbm(b.noise_dbm),
        bandwidth_hz: b.bandwidth_hz,
        pa_max_output: unit.from_dbm(b.pa_max_output_dbm),
        pa_max_efficiency: b.pa_max_efficiency,
        consumed_power_cap: if b.consumed_power_cap_dbm == f64::INFINITY {
            f64::INFINITY
        } else {
            unit.from_dbm(b.consumed_power_cap_dbm)
        },
        unit,
    };
    budget.validate()?;
    Ok(budget)
}

/// Message for the last failed call on this thread. The pointer stays valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn nlpa_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn nlpa_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// The default link budget: -105 dBm noise, 1 GHz, 6 dBm saturation output,
/// 30% peak efficiency, no cap.
#[no_mangle]
pub extern "C" fn nlpa_budget_default() -> NlpaBudget {
    let b = ExperimentConfig::default().budget;
    NlpaBudget {
        noise_dbm: b.noise_dbm,
        bandwidth_hz: b.bandwidth_hz,
        pa_max_output_dbm: b.pa_max_output_dbm,
        pa_max_efficiency: b.pa_max_efficiency,
        consumed_power_cap_dbm: b.consumed_power_cap_dbm.unwrap_or(f64::INFINITY),
    }
}

/// The default fifth-order PA, powers in milliwatts.
///
/// # Safety
/// `out_pa` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn nlpa_pa_reference(out_pa: *mut *mut NlpaPa) -> NlpaStatus {
    guard(|| {
        let slot = out(out_pa, "out_pa")?;
        *slot = Box::into_raw(Box::new(NlpaPa(PaCoefficients::reference())));
        Ok(())
    })
}

/// PA from `n` odd-order coefficients `beta_1, beta_3, ...`. `unit_watts`
/// selects watts instead of milliwatts for `|u|^2`.
///
/// # Safety
/// `re` and `im` must point to `n` doubles each; `out_pa` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nlpa_pa_new(
    re: *const f64,
    im: *const f64,
    n: usize,
    unit_watts: bool,
    out_pa: *mut *mut NlpaPa,
) -> NlpaStatus {
    guard(|| {
        let slot = out(out_pa, "out_pa")?;
        if n == 0 {
            return Err(Error::Config("PA needs at least one coefficient".into()).into());
        }
        deref(re, "re")?;
        deref(im, "im")?;
        let re = std::slice::from_raw_parts(re, n);
        let im = std::slice::from_raw_parts(im, n);
        let coeffs = re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)).collect();
        let unit = if unit_watts { PowerUnit::Watt } else { PowerUnit::Milliwatt };
        *slot = Box::into_raw(Box::new(NlpaPa(PaCoefficients::new(coeffs, unit)?)));
        Ok(())
    })
}

/// # Safety
/// `pa` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nlpa_pa_free(pa: *mut NlpaPa) {
    if !pa.is_null() {
        drop(Box::from_raw(pa));
    }
}

/// Average linear gain `gbar(p)` at per-branch input power `p`.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn nlpa_pa_avg_gain(pa: *const NlpaPa, p: f64, out_re: *mut f64, out_im: *mut f64) -> NlpaStatus {
    guard(|| {
        let g = deref(pa, "pa")?.0.avg_linear_gain(p)?;
        *out(out_re, "out_re")? = g.re;
        *out(out_im, "out_im")? = g.im;
        Ok(())
    })
}

/// Desired-signal gain `|gbar(p)|^2` and distortion gain at per-branch power `p`.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn nlpa_pa_gains(pa: *const NlpaPa, p: f64, out_gs: *mut f64, out_gd: *mut f64) -> NlpaStatus {
    guard(|| {
        let pa = &deref(pa, "pa")?.0;
        *out(out_gs, "out_gs")? = pa.gbar_s(p)?;
        *out(out_gd, "out_gd")? = pa.gbar_d(p)?;
        Ok(())
    })
}

/// Distortion covariance of an `n x n` input covariance. `cu` and `out_cd`
/// hold `2 n^2` doubles.
///
/// # Safety
/// `cu` must be readable and `out_cd` writable for `2 n^2` doubles.
#[no_mangle]
pub unsafe extern "C" fn nlpa_distortion_covariance(
    pa: *const NlpaPa,
    cu: *const f64,
    n: usize,
    out_cd: *mut f64,
) -> NlpaStatus {
    guard(|| {
        let pa = &deref(pa, "pa")?.0;
        deref(cu, "cu")?;
        out(out_cd, "out_cd")?;
        if n == 0 {
            return Err(Error::Dimension("covariance must be at least 1x1".into()).into());
        }
        let raw = std::slice::from_raw_parts(cu, 2 * n * n);
        let m = CMatrix::from_iterator(n, n, raw.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])));
        let cd = distortion_covariance(&HermitianCov::new(m)?, pa)?;
        let dst = std::slice::from_raw_parts_mut(out_cd, 2 * n * n);
        for (pair, z) in dst.chunks_exact_mut(2).zip(cd.matrix().iter()) {
            pair[0] = z.re;
            pair[1] = z.im;
        }
        Ok(())
    })
}

/// Draws the default multipath channel for `n_t` transmit and `n_r` receive
/// antennas with `num_paths` paths.
///
/// # Safety
/// `out_channel` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nlpa_channel_generate(
    seed: u64,
    n_t: usize,
    n_r: usize,
    num_paths: usize,
    out_channel: *mut *mut NlpaChannel,
) -> NlpaStatus {
    guard(|| {
        let slot = out(out_channel, "out_channel")?;
        let mut cfg = ExperimentConfig::default();
        cfg.system.n_r = n_r;
        cfg.system.num_paths = num_paths;
        let spec = cfg.channel_spec(n_t)?;
        *slot = Box::into_raw(Box::new(NlpaChannel(generate_channel(seed, &spec)?)));
        Ok(())
    })
}

/// # Safety
/// `channel` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nlpa_channel_free(channel: *mut NlpaChannel) {
    if !channel.is_null() {
        drop(Box::from_raw(channel));
    }
}

/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn nlpa_channel_dims(
    channel: *const NlpaChannel,
    out_n_t: *mut usize,
    out_n_r: *mut usize,
    out_num_paths: *mut usize,
) -> NlpaStatus {
    guard(|| {
        let ch = &deref(channel, "channel")?.0;
        *out(out_n_t, "out_n_t")? = ch.n_t();
        *out(out_n_r, "out_n_r")? = ch.n_r();
        *out(out_num_paths, "out_num_paths")? = ch.num_paths();
        Ok(())
    })
}

/// Spectral efficiency of the single-RF-chain transmitter steered at the
/// dominant path, at total input power `p`.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn nlpa_se_single_rf(
    channel: *const NlpaChannel,
    pa: *const NlpaPa,
    p: f64,
    noise_power: f64,
    out_se: *mut f64,
) -> NlpaStatus {
    guard(|| {
        let ch = &deref(channel, "channel")?.0;
        let pa = &deref(pa, "pa")?.0;
        *out(out_se, "out_se")? = se_single_rf(p, ch, pa, noise_power)?;
        Ok(())
    })
}

/// Energy-efficiency-optimal input power in `[lo_dbm, hi_dbm]`.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn nlpa_solve_p2(
    channel: *const NlpaChannel,
    pa: *const NlpaPa,
    budget: *const NlpaBudget,
    lo_dbm: f64,
    hi_dbm: f64,
    out_solution: *mut NlpaP2Solution,
) -> NlpaStatus {
    guard(|| {
        let ch = &deref(channel, "channel")?.0;
        let pa = &deref(pa, "pa")?.0;
        let budget = budget_in(deref(budget, "budget")?, pa.unit())?;
        let slot = out(out_solution, "out_solution")?;
        let s = solve_p2(ch, pa, &budget, (lo_dbm, hi_dbm))?;
        *slot = NlpaP2Solution {
            p_star: s.p_star,
            ee_star_bits_per_joule: s.ee_star,
            se_at_star: s.se_at_star,
            pcons_at_star: s.pcons_at_star,
            on_constraint_boundary: s.on_constraint_boundary,
        };
        Ok(())
    })
}

use std::ffi::CStr;
use std::path::Path;
use std::process::Command;
use std::ptr;

use nlpa::config::ExperimentConfig;
use nlpa::ee_optimizer::{channel_for, solve_p2};
use nlpa::link_metrics::se_single_rf;
use nlpa::pa_model::PaCoefficients;
use nlpa_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(nlpa_last_error_message()) }.to_string_lossy().into_owned()
}

fn reference() -> *mut NlpaPa {
    let mut pa = ptr::null_mut();
    assert_eq!(unsafe { nlpa_pa_reference(&mut pa) }, NlpaStatus::Ok);
    pa
}

#[test]
fn gains_match_the_library() {
    let pa = reference();
    let lib = PaCoefficients::reference();
    for p in [0.0, 0.5, 3.0, 12.0] {
        let (mut re, mut im, mut gs, mut gd) = (0.0, 0.0, 0.0, 0.0);
        unsafe {
            assert_eq!(nlpa_pa_avg_gain(pa, p, &mut re, &mut im), NlpaStatus::Ok);
            assert_eq!(nlpa_pa_gains(pa, p, &mut gs, &mut gd), NlpaStatus::Ok);
        }
        let g = lib.avg_linear_gain(p).unwrap();
        assert_eq!((re, im), (g.re, g.im));
        assert_eq!(gs, lib.gbar_s(p).unwrap());
        assert_eq!(gd, lib.gbar_d(p).unwrap());
    }
    unsafe { nlpa_pa_free(pa) };
}

#[test]
fn custom_pa_and_bad_arguments() {
    let re = [1.0, -0.1];
    let im = [0.0, 0.05];
    let mut pa = ptr::null_mut();
    unsafe {
        assert_eq!(nlpa_pa_new(re.as_ptr(), im.as_ptr(), 2, false, &mut pa), NlpaStatus::Ok);
        nlpa_pa_free(pa);
        let zero = [0.0];
        assert_eq!(nlpa_pa_new(zero.as_ptr(), zero.as_ptr(), 1, false, &mut pa), NlpaStatus::InvalidArgument);
        assert!(last_error().contains("beta_1"));
        assert_eq!(nlpa_pa_new(ptr::null(), im.as_ptr(), 2, false, &mut pa), NlpaStatus::NullPointer);
        assert!(last_error().contains("re"));
        assert_eq!(nlpa_pa_reference(ptr::null_mut()), NlpaStatus::NullPointer);
        nlpa_pa_free(ptr::null_mut());
        nlpa_channel_free(ptr::null_mut());
    }
}

#[test]
fn distortion_covariance_of_rank_one_input() {
    let pa = reference();
    let n = 2;
    // All-ones times 2 mW: fully correlated, equal branch powers.
    let cu: Vec<f64> = (0..n * n).flat_map(|_| [2.0, 0.0]).collect();
    let mut cd = vec![0.0; 2 * n * n];
    unsafe {
        assert_eq!(nlpa_distortion_covariance(pa, cu.as_ptr(), n, cd.as_mut_ptr()), NlpaStatus::Ok);
    }
    let mut gs = 0.0;
    let mut gd = 0.0;
    unsafe { nlpa_pa_gains(pa, 2.0, &mut gs, &mut gd) };
    // Every entry equals gbar_d(P) * P for a rank-one constant-modulus input.
    for pair in cd.chunks(2) {
        assert!((pair[0] - gd * 2.0).abs() <= 1e-12 * gd * 2.0, "{pair:?}");
        assert!(pair[1].abs() <= 1e-12);
    }
    let not_hermitian = [1.0, 0.0, 0.5, 0.0, 0.0, 0.0, 1.0, 0.0];
    let status = unsafe { nlpa_distortion_covariance(pa, not_hermitian.as_ptr(), 2, cd.as_mut_ptr()) };
    assert_eq!(status, NlpaStatus::InvalidArgument);
    unsafe { nlpa_pa_free(pa) };
}

#[test]
fn channel_se_and_p2_match_the_library() {
    let pa = reference();
    let mut ch = ptr::null_mut();
    unsafe { assert_eq!(nlpa_channel_generate(7, 16, 16, 5, &mut ch), NlpaStatus::Ok) };
    let (mut nt, mut nr, mut l) = (0, 0, 0);
    unsafe { assert_eq!(nlpa_channel_dims(ch, &mut nt, &mut nr, &mut l), NlpaStatus::Ok) };
    assert_eq!((nt, nr, l), (16, 16, 5));

    let cfg = ExperimentConfig::default();
    let lib_ch = channel_for(&cfg.channel_spec(16).unwrap(), 16, 7).unwrap();
    let lib_pa = cfg.pa().unwrap();
    let noise = cfg.budget().unwrap().noise_power;

    let mut se = 0.0;
    unsafe { assert_eq!(nlpa_se_single_rf(ch, pa, 3.0, noise, &mut se), NlpaStatus::Ok) };
    assert_eq!(se, se_single_rf(3.0, &lib_ch, &lib_pa, noise).unwrap());

    let budget = nlpa_budget_default();
    let mut sol = NlpaP2Solution::default();
    unsafe { assert_eq!(nlpa_solve_p2(ch, pa, &budget, -40.0, 20.0, &mut sol), NlpaStatus::Ok) };
    let lib_sol = solve_p2(&lib_ch, &lib_pa, &cfg.budget().unwrap(), (-40.0, 20.0)).unwrap();
    assert_eq!(sol.p_star, lib_sol.p_star);
    assert_eq!(sol.ee_star_bits_per_joule, lib_sol.ee_star);
    assert!(!sol.on_constraint_boundary);

    let bad = NlpaBudget { pa_max_efficiency: 1.5, ..budget };
    unsafe { assert_eq!(nlpa_solve_p2(ch, pa, &bad, -40.0, 20.0, &mut sol), NlpaStatus::InvalidArgument) };
    unsafe { assert_eq!(nlpa_solve_p2(ch, pa, &budget, 20.0, -40.0, &mut sol), NlpaStatus::InvalidArgument) };

    unsafe {
        assert_eq!(nlpa_channel_generate(1, 0, 16, 5, &mut ch as *mut _), NlpaStatus::InvalidArgument);
        nlpa_channel_free(ch);
        nlpa_pa_free(pa);
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(nlpa_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_is_valid_c() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = dir.join("include/nlpa.h");
    assert!(header.exists());
    let Ok(status) = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-x", "c"])
        .arg(&header)
        .status()
    else {
        eprintln!("no C compiler on PATH; header syntax not checked");
        return;
    };
    assert!(status.success());
}

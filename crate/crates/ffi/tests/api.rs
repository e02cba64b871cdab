use std::ffi::CStr;
use std::f64::consts::PI;
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use modalreg_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(mr_last_error()) }.to_string_lossy().into_owned()
}

fn diagonal(n_plant: i64, n_exo: i64) -> *mut MrScenario {
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { mr_scenario_diagonal(2.0 * PI, 2.0, n_plant, n_exo, &mut s) }, MrStatus::Ok);
    s
}

#[test]
fn solve_and_query() {
    let s = diagonal(30, 10);
    let (mut np, mut nk) = (0usize, 0usize);
    unsafe {
        assert_eq!(mr_scenario_sizes(s, &mut np, &mut nk), MrStatus::Ok);
        assert_eq!((np, nk), (61, 21));
        let (mut hre, mut him) = (0.0, 0.0);
        assert_eq!(mr_transfer_function(s, 0.0, 1.0, &mut hre, &mut him), MrStatus::Ok);
        assert!((hre - 0.5).abs() < 1e-15 && (him + 0.5).abs() < 1e-15);

        let mut sol = ptr::null_mut();
        assert_eq!(mr_solve(s, 1e-8, &mut sol), MrStatus::Ok);
        let (mut r1, mut r2) = (1.0, 1.0);
        assert_eq!(mr_solution_residuals(sol, &mut r1, &mut r2), MrStatus::Ok);
        assert!(r1 <= 1e-10 && r2 <= 1e-10);
        let (mut re, mut im) = (0.0, 0.0);
        assert_eq!(mr_solution_gain(sol, 3, &mut re, &mut im), MrStatus::Ok);
        assert!((re - 1.0).abs() < 1e-14 && (im - 3.0).abs() < 1e-14);
        assert_eq!(mr_solution_pi(sol, 0, 3, &mut re, &mut im), MrStatus::Ok);
        assert!((re - 1.0).abs() < 1e-14 && im.abs() < 1e-14);
        assert_eq!(mr_solution_gain(sol, 99, &mut re, &mut im), MrStatus::InvalidArgument);
        assert!(last_error().contains("99"));
        mr_solution_free(sol);
        mr_scenario_free(s);
    }
}

#[test]
fn simulated_error_on_the_manifold_vanishes() {
    let s = diagonal(20, 5);
    unsafe {
        let mut sol = ptr::null_mut();
        assert_eq!(mr_solve(s, 1e-8, &mut sol), MrStatus::Ok);
        let (mut np, mut nk) = (0usize, 0usize);
        mr_scenario_sizes(s, &mut np, &mut nk);
        let mut plant = vec![0i64; np];
        let mut exo = vec![0i64; nk];
        assert_eq!(mr_scenario_modes(s, plant.as_mut_ptr(), np, exo.as_mut_ptr(), nk), MrStatus::Ok);
        let w_re: Vec<f64> = exo.iter().map(|k| if *k == 1 { 1.0 } else { 0.0 }).collect();
        let w_im = vec![0.0; nk];
        // Pi w0 is supported on mode 0 with pi_{0,k} = 1 and on mode k
        let mut z_re = vec![0.0; np];
        let mut z_im = vec![0.0; np];
        for (i, n) in plant.iter().enumerate() {
            let (mut re, mut im) = (0.0, 0.0);
            mr_solution_pi(sol, *n, 1, &mut re, &mut im);
            z_re[i] = re;
            z_im[i] = im;
        }
        let t = [0.0, 0.5, 3.0, 40.0];
        let (mut e_re, mut e_im) = ([9.0; 4], [9.0; 4]);
        let status = mr_simulate_error(
            sol,
            z_re.as_ptr(),
            z_im.as_ptr(),
            np,
            w_re.as_ptr(),
            w_im.as_ptr(),
            nk,
            t.as_ptr(),
            4,
            e_re.as_mut_ptr(),
            e_im.as_mut_ptr(),
        );
        assert_eq!(status, MrStatus::Ok, "{}", last_error());
        for (a, b) in e_re.iter().zip(&e_im) {
            assert!(a.hypot(*b) <= 1e-12);
        }
        // a zero start leaves e(t) = -e^{-t} w0_1
        let status = mr_simulate_error(
            sol,
            ptr::null(),
            ptr::null(),
            0,
            w_re.as_ptr(),
            w_im.as_ptr(),
            nk,
            t.as_ptr(),
            4,
            e_re.as_mut_ptr(),
            e_im.as_mut_ptr(),
        );
        assert_eq!(status, MrStatus::Ok);
        for (tt, e) in t.iter().zip(&e_re) {
            assert!((e + (-tt).exp()).abs() <= 1e-12);
        }
        let status = mr_simulate_error(sol, ptr::null(), ptr::null(), 0, w_re.as_ptr(), w_im.as_ptr(), nk - 1, t.as_ptr(), 4, e_re.as_mut_ptr(), e_im.as_mut_ptr());
        assert_eq!(status, MrStatus::LengthMismatch);
        mr_solution_free(sol);
        mr_scenario_free(s);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut s = ptr::null_mut();
        assert_eq!(mr_scenario_wave(2.0, 2.0, 2.0, 10, 10, &mut s), MrStatus::InvalidArgument);
        assert!(last_error().contains("nu"));
        assert!(s.is_null());
        assert_eq!(mr_scenario_diagonal(2.0 * PI, 2.0, 0, 10, &mut s), MrStatus::InvalidArgument);
        assert_eq!(mr_scenario_diagonal(2.0 * PI, 2.0, 5, 5, ptr::null_mut()), MrStatus::NullPointer);
        let mut sol = ptr::null_mut();
        assert_eq!(mr_solve(ptr::null(), 1e-8, &mut sol), MrStatus::NullPointer);
        let name = CStr::from_ptr(mr_status_name(MrStatus::AssumptionFailed));
        assert_eq!(name.to_str().unwrap(), "assumption failed");

        let s = diagonal(5, 5);
        assert_eq!(mr_solve(s, 1e3, &mut sol), MrStatus::AssumptionFailed);
        assert!(sol.is_null());
        let (mut min, mut a1, mut a2) = (0.0, true, false);
        assert_eq!(mr_check_assumptions(s, 1e3, &mut min, &mut a1, &mut a2), MrStatus::Ok);
        assert!(!a1 && a2 && min > 0.0);
        assert_eq!(last_error(), "");
        mr_scenario_free(s);
        mr_scenario_free(ptr::null_mut());
    }
}

#[test]
fn random_scenarios_are_reproducible() {
    unsafe {
        let (mut a, mut b) = (ptr::null_mut(), ptr::null_mut());
        assert_eq!(mr_scenario_random(11, &mut a), MrStatus::Ok);
        assert_eq!(mr_scenario_random(11, &mut b), MrStatus::Ok);
        let (mut ha, mut hb) = ((0.0, 0.0), (0.0, 0.0));
        mr_transfer_function(a, 0.1, 2.0, &mut ha.0, &mut ha.1);
        mr_transfer_function(b, 0.1, 2.0, &mut hb.0, &mut hb.1);
        assert_eq!(ha, hb);
        mr_scenario_free(a);
        mr_scenario_free(b);
    }
}

#[test]
fn c_program_links_against_header() {
    let crate_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let exe = std::env::current_exe().unwrap();
    let lib_dir = exe.parent().and_then(|d| d.parent()).unwrap().to_path_buf();
    assert!(lib_dir.join("libmodalreg_ffi.a").exists(), "static library missing in {}", lib_dir.display());
    let out = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("smoke");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = Command::new(cc)
        .arg(crate_dir.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(crate_dir.join("include"))
        .arg("-Wall")
        .arg("-Werror")
        .arg("-o")
        .arg(&out)
        .arg(lib_dir.join("libmodalreg_ffi.a"))
        .args(["-lpthread", "-ldl", "-lm"])
        .status()
        .unwrap();
    assert!(status.success());
    let run = Command::new(&out).output().unwrap();
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(run.status.success(), "{stdout}{}", String::from_utf8_lossy(&run.stderr));
    assert!(stdout.contains("null pointer: scenario is null"), "{stdout}");
}

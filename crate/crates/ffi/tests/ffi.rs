use std::ffi::CStr;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use kplab_ffi::*;

fn last_error() -> String {
    let p = kplab_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn mixture(centers: &[f64], dim: usize, s: f64) -> *mut KplabMixture {
    let mut m = ptr::null_mut();
    let st = unsafe {
        kplab_mixture_new(
            dim,
            centers.len() / dim,
            centers.as_ptr(),
            ptr::null(),
            s,
            &mut m,
        )
    };
    assert_eq!(st, KplabStatus::Ok);
    m
}

#[test]
fn single_gaussian_entropy_is_closed_form() {
    let m = mixture(&[0.3, -0.2], 2, 0.5);
    assert_eq!(unsafe { kplab_mixture_dim(m) }, 2);
    let mut h = f64::NAN;
    let mut se = f64::NAN;
    let st = unsafe { kplab_mixture_renyi(m, 1.0, ptr::null(), &mut h, &mut se) };
    assert_eq!(st, KplabStatus::Ok);
    let exact = (2.0 * std::f64::consts::PI * std::f64::consts::E * 0.5).ln();
    assert!((h - exact).abs() < 1e-6, "{h} vs {exact}");

    let mut ld = 0.0;
    let x = [0.3, -0.2];
    assert_eq!(
        unsafe { kplab_mixture_log_density(m, x.as_ptr(), 2, &mut ld) },
        KplabStatus::Ok
    );
    assert!((ld + (2.0 * std::f64::consts::PI * 0.5).ln()).abs() < 1e-12);
    assert_eq!(
        unsafe { kplab_mixture_log_density(m, x.as_ptr(), 1, &mut ld) },
        KplabStatus::DimensionMismatch
    );
    unsafe { kplab_mixture_free(m) };
}

#[test]
fn monte_carlo_policy_is_reproducible() {
    let m = mixture(&[0.0, 0.0, 1.0, 0.0, 0.0, 1.0], 3, 0.3);
    let mut policy = kplab_policy_default();
    policy.mode = KplabPolicyMode::MonteCarlo;
    policy.samples = 20_000;
    policy.seed = 11;
    let run = || {
        let (mut h, mut se) = (0.0, 0.0);
        assert_eq!(
            unsafe { kplab_mixture_renyi(m, 1.5, &policy, &mut h, &mut se) },
            KplabStatus::Ok
        );
        (h, se)
    };
    let (a, b) = (run(), run());
    assert_eq!(a.0.to_bits(), b.0.to_bits());
    assert!(a.1 > 0.0);
    unsafe { kplab_mixture_free(m) };
}

#[test]
fn null_and_invalid_arguments_are_reported() {
    let mut m = ptr::null_mut();
    let st = unsafe { kplab_mixture_new(1, 2, ptr::null(), ptr::null(), 1.0, &mut m) };
    assert_eq!(st, KplabStatus::NullPointer);
    assert!(last_error().contains("coords"));
    assert!(m.is_null());

    let c = [0.0, 1.0];
    let st = unsafe { kplab_mixture_new(1, 2, c.as_ptr(), ptr::null(), -1.0, &mut m) };
    assert_eq!(st, KplabStatus::InvalidArgument);
    assert!(!last_error().is_empty());

    let st = unsafe { kplab_mixture_new(1, 2, c.as_ptr(), ptr::null(), 1.0, ptr::null_mut()) };
    assert_eq!(st, KplabStatus::NullPointer);

    let mut h = 0.0;
    let st = unsafe { kplab_mixture_renyi(ptr::null(), 2.0, ptr::null(), &mut h, ptr::null_mut()) };
    assert_eq!(st, KplabStatus::NullPointer);

    unsafe {
        kplab_mixture_free(ptr::null_mut());
        kplab_pair_free(ptr::null_mut());
    }
    assert_eq!(unsafe { kplab_mixture_dim(ptr::null()) }, 0);
}

#[test]
fn pair_gap_and_lipschitz() {
    let src = [0.0, 0.0, 2.0, 0.0, 0.0, 2.0];
    let dst = [0.0, 0.0, 1.0, 0.0, 0.0, 1.0];
    let mut p = ptr::null_mut();
    assert_eq!(
        unsafe { kplab_pair_new(2, 3, src.as_ptr(), dst.as_ptr(), ptr::null(), &mut p) },
        KplabStatus::Ok
    );
    let mut l = 0.0;
    assert_eq!(unsafe { kplab_pair_lipschitz(p, &mut l) }, KplabStatus::Ok);
    assert!((l - 0.5).abs() < 1e-12);

    let mut g = KplabGap::default();
    assert_eq!(
        unsafe { kplab_kp_gap(p, 2.0, 0.5, ptr::null(), &mut g) },
        KplabStatus::Ok
    );
    assert!(g.gap > 0.0);
    assert!((g.gap - (g.h_source - g.h_target)).abs() < 1e-12);
    assert_eq!(g.verdict, KplabVerdict::Holds as i32);
    unsafe { kplab_pair_free(p) };

    let mut q = ptr::null_mut();
    let st = unsafe { kplab_pair_new(2, 3, dst.as_ptr(), src.as_ptr(), ptr::null(), &mut q) };
    assert_eq!(st, KplabStatus::NotAContraction);
    assert!(q.is_null());
}

#[test]
fn binary_capacity_is_symmetric() {
    let a = [-1.0, 1.0];
    let mut w = [0.0; 2];
    let mut c = KplabCapacity::default();
    let st = unsafe {
        kplab_capacity(
            1,
            2,
            a.as_ptr(),
            1.0,
            1e-6,
            500,
            ptr::null(),
            w.as_mut_ptr(),
            &mut c,
        )
    };
    assert_eq!(st, KplabStatus::Ok, "{}", last_error());
    assert!(c.converged);
    assert!(c.lower <= c.capacity && c.capacity <= c.upper);
    assert!((w[0] - 0.5).abs() < 1e-9 && (w[1] - 0.5).abs() < 1e-9);
    assert!(c.capacity > 0.0 && c.capacity < std::f64::consts::LN_2);
}

#[test]
fn disjoint_union_volume_is_exact() {
    let centers = [0.0, 0.0, 10.0, 0.0];
    let (mut v, mut se) = (0.0, 1.0);
    let st = unsafe { kplab_union_volume(2, 2, centers.as_ptr(), 1.0, 20_000, 3, &mut v, &mut se) };
    assert_eq!(st, KplabStatus::Ok, "{}", last_error());
    assert!((v - 2.0 * std::f64::consts::PI).abs() < 1e-9);
    assert_eq!(se, 0.0);
}

#[test]
fn status_strings_are_static() {
    for s in [
        KplabStatus::Ok,
        KplabStatus::NullPointer,
        KplabStatus::Panic,
    ] {
        let text = unsafe { CStr::from_ptr(kplab_status_string(s)) };
        assert!(!text.to_bytes().is_empty());
    }
    let v = unsafe { CStr::from_ptr(kplab_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn header_declares_every_entry_point() {
    let header = std::fs::read_to_string(crate_dir().join("include/kplab.h")).unwrap();
    for sym in [
        "kplab_version",
        "kplab_status_string",
        "kplab_last_error_message",
        "kplab_policy_default",
        "kplab_mixture_new",
        "kplab_mixture_free",
        "kplab_mixture_dim",
        "kplab_mixture_log_density",
        "kplab_mixture_renyi",
        "kplab_pair_new",
        "kplab_pair_free",
        "kplab_pair_lipschitz",
        "kplab_kp_gap",
        "kplab_capacity",
        "kplab_union_volume",
        "typedef struct KplabMixture KplabMixture;",
        "KPLAB_STATUS_NOT_A_CONTRACTION",
    ] {
        assert!(header.contains(sym), "missing {sym}");
    }
}

fn static_lib() -> Option<PathBuf> {
    // target/<profile>/deps/ffi-<hash>
    let exe = std::env::current_exe().ok()?;
    let profile = exe.parent()?.parent()?;
    [
        profile.join("libkplab_ffi.a"),
        profile.join("deps/libkplab_ffi.a"),
    ]
    .into_iter()
    .find(|p| p.exists())
}

fn compiler() -> Option<String> {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    Command::new(&cc)
        .arg("--version")
        .output()
        .ok()?
        .status
        .success()
        .then_some(cc)
}

#[test]
fn c_program_links_against_header() {
    let (Some(lib), Some(cc)) = (static_lib(), compiler()) else {
        eprintln!("skipping: no C compiler or static library");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let out = Command::new(&cc)
        .arg("-std=c11")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(crate_dir().join("include"))
        .arg(crate_dir().join("tests/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let run = Command::new(Path::new(&exe)).output().unwrap();
    assert!(
        run.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&run.stdout),
        String::from_utf8_lossy(&run.stderr)
    );
}

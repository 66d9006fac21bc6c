//! Exercise the C ABI from the Rust side and check the generated header
//! compiles as C.

use std::ffi::{CStr, CString};
use std::fs;
use std::process::Command;
use std::ptr;

use ceramopt_ffi::*;

fn last_error() -> String {
    unsafe {
        CStr::from_ptr(ceramopt_last_error_message())
            .to_string_lossy()
            .into_owned()
    }
}

fn rod_handle() -> *mut CeramoptMesh {
    let mut mesh: *mut CeramoptMesh = ptr::null_mut();
    let status =
        unsafe { ceramopt_mesh_rod(0.6, 0.1, 61, 9, 0.05, 0.3, 0.2, &mut mesh) };
    assert_eq!(status, CeramoptStatus::Ok, "{}", last_error());
    assert!(!mesh.is_null());
    mesh
}

#[test]
fn version_is_a_static_string() {
    let version = unsafe { CStr::from_ptr(ceramopt_version()) };
    assert!(!version.to_str().unwrap().is_empty());
}

#[test]
fn rod_handle_reports_counts_volume_and_theta_len() {
    let mesh = rod_handle();
    let (mut nodes, mut triangles) = (0usize, 0usize);
    let status = unsafe { ceramopt_mesh_counts(mesh, &mut nodes, &mut triangles) };
    assert_eq!(status, CeramoptStatus::Ok);
    assert_eq!((nodes, triangles), (549, 960));

    let mut vol = 0.0;
    assert_eq!(
        unsafe { ceramopt_mesh_volume(mesh, &mut vol) },
        CeramoptStatus::Ok
    );
    assert!((vol - 0.06).abs() < 1e-14);

    let mut len = 0usize;
    assert_eq!(
        unsafe { ceramopt_mesh_theta_len(mesh, &mut len) },
        CeramoptStatus::Ok
    );
    assert_eq!(len, 118);
    unsafe { ceramopt_mesh_free(mesh) };
}

#[test]
fn objective_and_gradient_round_trip() {
    let mesh = rod_handle();
    let (mut j, mut eta) = (0.0, 0.0);
    let status = unsafe {
        ceramopt_objective(mesh, 3.7e11, 0.22, 1.0, 10.0, 10.0, 64, &mut j, &mut eta)
    };
    assert_eq!(status, CeramoptStatus::Ok, "{}", last_error());
    assert!(j.is_finite() && j > 0.0);
    assert!(eta.is_finite() && eta > 0.0);

    let mut gradient = vec![0.0f64; 118];
    let mut written = 0usize;
    let status = unsafe {
        ceramopt_shape_gradient_theta(
            mesh,
            3.7e11,
            0.22,
            1.0,
            10.0,
            10.0,
            64,
            gradient.as_mut_ptr(),
            gradient.len(),
            &mut written,
        )
    };
    assert_eq!(status, CeramoptStatus::Ok, "{}", last_error());
    assert_eq!(written, 118);
    assert!(gradient.iter().all(|g| g.is_finite()));
    assert!(gradient.iter().any(|g| *g != 0.0));

    // short buffer is rejected with a diagnostic
    let mut short = vec![0.0f64; 3];
    let status = unsafe {
        ceramopt_shape_gradient_theta(
            mesh,
            3.7e11,
            0.22,
            1.0,
            10.0,
            10.0,
            64,
            short.as_mut_ptr(),
            short.len(),
            &mut written,
        )
    };
    assert_eq!(status, CeramoptStatus::BufferTooSmall);
    assert!(last_error().contains("118"), "{}", last_error());
    unsafe { ceramopt_mesh_free(mesh) };
}

#[test]
fn invalid_arguments_and_null_pointers_are_reported() {
    let mesh = rod_handle();
    let (mut j, mut eta) = (0.0, 0.0);
    let status = unsafe {
        ceramopt_objective(mesh, -1.0, 0.22, 1.0, 10.0, 10.0, 64, &mut j, &mut eta)
    };
    assert_eq!(status, CeramoptStatus::InvalidArgument);
    assert!(last_error().contains("Young"), "{}", last_error());

    let status = unsafe {
        ceramopt_objective(
            ptr::null(),
            3.7e11,
            0.22,
            1.0,
            10.0,
            10.0,
            64,
            &mut j,
            &mut eta,
        )
    };
    assert_eq!(status, CeramoptStatus::NullPointer);

    let mut out: *mut CeramoptMesh = ptr::null_mut();
    let status = unsafe { ceramopt_mesh_rod(0.6, 0.1, 1, 1, 0.0, 0.0, 0.0, &mut out) };
    assert_eq!(status, CeramoptStatus::MeshError);
    assert!(!last_error().is_empty());

    unsafe { ceramopt_mesh_free(mesh) };
    unsafe { ceramopt_mesh_free(ptr::null_mut()) }; // no-op
}

#[test]
fn joint_handle_matches_the_published_discretization() {
    let mut mesh: *mut CeramoptMesh = ptr::null_mut();
    let status = unsafe { ceramopt_mesh_joint(0.6, 0.1, 61, 17, 0.2, &mut mesh) };
    assert_eq!(status, CeramoptStatus::Ok, "{}", last_error());
    let (mut nodes, mut tris) = (0usize, 0usize);
    unsafe { ceramopt_mesh_counts(mesh, &mut nodes, &mut tris) };
    assert_eq!((nodes, tris), (1037, 1920));
    let mut vol = 0.0;
    unsafe { ceramopt_mesh_volume(mesh, &mut vol) };
    assert!((vol - 0.06).abs() < 1e-14);
    unsafe { ceramopt_mesh_free(mesh) };
}

#[test]
fn flow_runs_through_the_abi() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("flow.cfg");
    fs::write(
        &config,
        "[geometry]\nnx = 13\nny = 5\n\n[weibull]\nn_angles = 32\n\n[flow]\nmax_iters = 2\nsnapshot_every = 1\n",
    )
    .unwrap();
    let out_dir = dir.path().join("flowed");
    let c_config = CString::new(config.to_str().unwrap()).unwrap();
    let c_out = CString::new(out_dir.to_str().unwrap()).unwrap();
    let status = unsafe {
        ceramopt_run(CeramoptCommand::Flow, c_config.as_ptr(), c_out.as_ptr(), -1)
    };
    assert_eq!(status, CeramoptStatus::Ok, "{}", last_error());
    assert!(out_dir.join("trace.csv").exists());
    assert!(out_dir.join("snapshot_000000.txt").exists());
}

#[test]
fn mesh_file_round_trip_through_the_abi() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rod.txt");
    let cpath = CString::new(path.to_str().unwrap()).unwrap();
    let mesh = rod_handle();
    assert_eq!(
        unsafe { ceramopt_mesh_write(mesh, cpath.as_ptr()) },
        CeramoptStatus::Ok
    );
    let mut back: *mut CeramoptMesh = ptr::null_mut();
    assert_eq!(
        unsafe { ceramopt_mesh_read(cpath.as_ptr(), &mut back) },
        CeramoptStatus::Ok
    );
    let (mut nodes, mut tris) = (0usize, 0usize);
    unsafe { ceramopt_mesh_counts(back, &mut nodes, &mut tris) };
    assert_eq!((nodes, tris), (549, 960));
    unsafe {
        ceramopt_mesh_free(mesh);
        ceramopt_mesh_free(back);
    }

    let missing = CString::new("/nonexistent/mesh.txt").unwrap();
    let mut out: *mut CeramoptMesh = ptr::null_mut();
    assert_eq!(
        unsafe { ceramopt_mesh_read(missing.as_ptr(), &mut out) },
        CeramoptStatus::MeshError
    );
}

#[test]
fn run_executes_subcommands_against_a_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.cfg");
    fs::write(
        &config,
        "[geometry]\nnx = 13\nny = 5\n\n[weibull]\nn_angles = 32\n",
    )
    .unwrap();
    let out_dir = dir.path().join("artifacts");
    let c_config = CString::new(config.to_str().unwrap()).unwrap();
    let c_out = CString::new(out_dir.to_str().unwrap()).unwrap();
    let status = unsafe {
        ceramopt_run(
            CeramoptCommand::Objective,
            c_config.as_ptr(),
            c_out.as_ptr(),
            7,
        )
    };
    assert_eq!(status, CeramoptStatus::Ok, "{}", last_error());
    assert!(out_dir.join("objective.txt").exists());
    assert!(out_dir.join("manifest").exists());

    let bad = CString::new("/nonexistent/run.cfg").unwrap();
    let status =
        unsafe { ceramopt_run(CeramoptCommand::Mesh, bad.as_ptr(), ptr::null(), -1) };
    assert_eq!(status, CeramoptStatus::ConfigError);
}

#[test]
fn generated_header_compiles_as_c() {
    let header_dir = concat!(env!("CARGO_MANIFEST_DIR"), "/include");
    let header = format!("{header_dir}/ceramopt.h");
    assert!(
        fs::metadata(&header).is_ok(),
        "header missing; the build script generates include/ceramopt.h"
    );
    let dir = tempfile::tempdir().unwrap();
    let smoke = dir.path().join("smoke.c");
    fs::write(
        &smoke,
        r#"
#include "ceramopt.h"
#include <stddef.h>

int probe(void) {
    CeramoptMesh *mesh = NULL;
    CeramoptStatus status = ceramopt_mesh_rod(0.6, 0.1, 61, 9, 0.0, 0.0, 0.0, &mesh);
    if (status != CERAMOPT_STATUS_OK) {
        return (int)status;
    }
    double volume = 0.0;
    status = ceramopt_mesh_volume(mesh, &volume);
    ceramopt_mesh_free(mesh);
    (void)ceramopt_version();
    return (int)status;
}
"#,
    )
    .unwrap();
    let obj = dir.path().join("smoke.o");
    let output = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(header_dir)
        .arg("-c")
        .arg(&smoke)
        .arg("-o")
        .arg(&obj)
        .output()
        .expect("cc must be available");
    assert!(
        output.status.success(),
        "header failed to compile as C:\n{}",
        String::from_utf8_lossy(&output.stderr)
    );
}

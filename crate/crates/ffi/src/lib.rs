//! C ABI for the ceramopt toolkit.
//!
//! Meshes travel as opaque handles; every function returns a
//! [`CeramoptStatus`] code and the per-thread error message explains the
//! last failure. The generated header lives at `include/ceramopt.h`.
//!
//! Ownership: handles returned through out-pointers belong to the caller
//! and must be released with `ceramopt_mesh_free`. Strings returned by
//! `ceramopt_version` and `ceramopt_last_error_message` are borrowed and
//! must not be freed; the error message stays valid until the next failing
//! call on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, c_double, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use ceramopt::adjoint::shape_gradient;
use ceramopt::cli::{run_command, Command};
use ceramopt::config::RunConfig;
use ceramopt::fem::{solve_state, LoadCase, Material};
use ceramopt::mesh::{generate_joint, generate_rod, volume, Mesh, Profile};
use ceramopt::weibull::{evaluate_objective, WeibullParams};

/// Status codes returned by every ceramopt entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CeramoptStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidUtf8 = 3,
    MeshError = 4,
    SolveError = 5,
    ObjectiveError = 6,
    GradientError = 7,
    FlowError = 8,
    ConfigError = 9,
    IoError = 10,
    BufferTooSmall = 11,
    InternalPanic = 12,
}

/// Subcommands runnable through `ceramopt_run`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CeramoptCommand {
    Mesh = 0,
    Solve = 1,
    Objective = 2,
    Gradcheck = 3,
    Flow = 4,
}

/// Opaque mesh handle.
pub struct CeramoptMesh {
    inner: Mesh,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn fail(status: CeramoptStatus, message: &str) -> CeramoptStatus {
    set_error(message);
    status
}

/// Message describing the most recent failure on this thread; borrowed.
#[no_mangle]
pub extern "C" fn ceramopt_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn ceramopt_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr() as *const c_char
}

fn guard(body: impl FnOnce() -> CeramoptStatus) -> CeramoptStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => fail(CeramoptStatus::InternalPanic, "internal panic"),
    }
}

unsafe fn path_from(ptr: *const c_char) -> Result<PathBuf, CeramoptStatus> {
    if ptr.is_null() {
        set_error("path pointer is null");
        return Err(CeramoptStatus::NullPointer);
    }
    match CStr::from_ptr(ptr).to_str() {
        Ok(s) => Ok(PathBuf::from(s)),
        Err(_) => {
            set_error("path is not valid UTF-8");
            Err(CeramoptStatus::InvalidUtf8)
        }
    }
}

unsafe fn mesh_from<'a>(handle: *const CeramoptMesh) -> Result<&'a Mesh, CeramoptStatus> {
    if handle.is_null() {
        set_error("mesh handle is null");
        return Err(CeramoptStatus::NullPointer);
    }
    Ok(&(*handle).inner)
}

fn deliver_mesh(out: *mut *mut CeramoptMesh, mesh: Mesh) -> CeramoptStatus {
    if out.is_null() {
        return fail(CeramoptStatus::NullPointer, "output handle is null");
    }
    let boxed = Box::new(CeramoptMesh { inner: mesh });
    unsafe { *out = Box::into_raw(boxed) };
    CeramoptStatus::Ok
}

/// Build a structured rod mesh; `amplitude = 0` gives the straight rod,
/// otherwise a cosine bump of the given center and width bends it.
///
/// # Safety
/// `out_mesh` must be a valid pointer to a mesh-handle slot.
#[no_mangle]
pub unsafe extern "C" fn ceramopt_mesh_rod(
    length: c_double,
    height: c_double,
    nx: usize,
    ny: usize,
    amplitude: c_double,
    center: c_double,
    width: c_double,
    out_mesh: *mut *mut CeramoptMesh,
) -> CeramoptStatus {
    guard(|| {
        let profile = if amplitude == 0.0 {
            Profile::Flat
        } else {
            Profile::CosineBump {
                amplitude,
                center,
                width,
            }
        };
        match generate_rod(length, height, nx, ny, &profile) {
            Ok(mesh) => deliver_mesh(out_mesh, mesh),
            Err(e) => fail(CeramoptStatus::MeshError, &e.to_string()),
        }
    })
}

/// Build the S-shaped joint connecting levels 0 and `offset`.
///
/// # Safety
/// `out_mesh` must be a valid pointer to a mesh-handle slot.
#[no_mangle]
pub unsafe extern "C" fn ceramopt_mesh_joint(
    length: c_double,
    height: c_double,
    nx: usize,
    ny: usize,
    offset: c_double,
    out_mesh: *mut *mut CeramoptMesh,
) -> CeramoptStatus {
    guard(|| match generate_joint(length, height, nx, ny, offset) {
        Ok(mesh) => deliver_mesh(out_mesh, mesh),
        Err(e) => fail(CeramoptStatus::MeshError, &e.to_string()),
    })
}

/// Read a mesh from the `mesh2d v1` text format.
///
/// # Safety
/// `path` must be a NUL-terminated string, `out_mesh` a valid slot.
#[no_mangle]
pub unsafe extern "C" fn ceramopt_mesh_read(
    path: *const c_char,
    out_mesh: *mut *mut CeramoptMesh,
) -> CeramoptStatus {
    guard(|| {
        let path = match path_from(path) {
            Ok(p) => p,
            Err(status) => return status,
        };
        match Mesh::read_file(Path::new(&path)) {
            Ok(mesh) => deliver_mesh(out_mesh, mesh),
            Err(e) => fail(CeramoptStatus::MeshError, &e.to_string()),
        }
    })
}

/// Write a mesh in the `mesh2d v1` text format.
///
/// # Safety
/// `mesh` must be a live handle, `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ceramopt_mesh_write(
    mesh: *const CeramoptMesh,
    path: *const c_char,
) -> CeramoptStatus {
    guard(|| {
        let mesh = match mesh_from(mesh) {
            Ok(m) => m,
            Err(status) => return status,
        };
        let path = match path_from(path) {
            Ok(p) => p,
            Err(status) => return status,
        };
        match mesh.write_file(&path) {
            Ok(()) => CeramoptStatus::Ok,
            Err(e) => fail(CeramoptStatus::IoError, &e.to_string()),
        }
    })
}

/// Node and triangle counts.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ceramopt_mesh_counts(
    mesh: *const CeramoptMesh,
    out_nodes: *mut usize,
    out_triangles: *mut usize,
) -> CeramoptStatus {
    guard(|| {
        let mesh = match mesh_from(mesh) {
            Ok(m) => m,
            Err(status) => return status,
        };
        if out_nodes.is_null() || out_triangles.is_null() {
            return fail(CeramoptStatus::NullPointer, "count output is null");
        }
        *out_nodes = mesh.n_nodes();
        *out_triangles = mesh.n_triangles();
        CeramoptStatus::Ok
    })
}

/// Sum of signed triangle areas.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ceramopt_mesh_volume(
    mesh: *const CeramoptMesh,
    out_volume: *mut c_double,
) -> CeramoptStatus {
    guard(|| {
        let mesh = match mesh_from(mesh) {
            Ok(m) => m,
            Err(status) => return status,
        };
        if out_volume.is_null() {
            return fail(CeramoptStatus::NullPointer, "volume output is null");
        }
        *out_volume = volume(mesh);
        CeramoptStatus::Ok
    })
}

/// Number of design parameters of a structured mesh.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ceramopt_mesh_theta_len(
    mesh: *const CeramoptMesh,
    out_len: *mut usize,
) -> CeramoptStatus {
    guard(|| {
        let mesh = match mesh_from(mesh) {
            Ok(m) => m,
            Err(status) => return status,
        };
        if out_len.is_null() {
            return fail(CeramoptStatus::NullPointer, "length output is null");
        }
        match mesh.theta_len() {
            Ok(len) => {
                *out_len = len;
                CeramoptStatus::Ok
            }
            Err(e) => fail(CeramoptStatus::MeshError, &e.to_string()),
        }
    })
}

/// Release a mesh handle; a null handle is a no-op.
///
/// # Safety
/// `mesh` must have been produced by this library and not freed before.
#[no_mangle]
pub unsafe extern "C" fn ceramopt_mesh_free(mesh: *mut CeramoptMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

struct Analysis {
    material: Material,
    load: LoadCase,
    params: WeibullParams,
}

fn analysis_inputs(
    mesh: &Mesh,
    young_modulus: f64,
    poisson_ratio: f64,
    traction_newtons: f64,
    weibull_modulus: f64,
    sigma0: f64,
    n_angles: usize,
) -> Result<Analysis, CeramoptStatus> {
    let material = Material::new(young_modulus, poisson_ratio).map_err(|e| {
        set_error(&e.to_string());
        CeramoptStatus::InvalidArgument
    })?;
    let load = LoadCase::tensile(mesh, traction_newtons).map_err(|e| {
        set_error(&e.to_string());
        CeramoptStatus::InvalidArgument
    })?;
    let params = WeibullParams::new(weibull_modulus, sigma0, n_angles).map_err(|e| {
        set_error(&e.to_string());
        CeramoptStatus::InvalidArgument
    })?;
    Ok(Analysis {
        material,
        load,
        params,
    })
}

/// Solve the elasticity system under a tensile load of `traction_newtons`
/// and evaluate the failure intensity and Weibull scale.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ceramopt_objective(
    mesh: *const CeramoptMesh,
    young_modulus: c_double,
    poisson_ratio: c_double,
    traction_newtons: c_double,
    weibull_modulus: c_double,
    sigma0: c_double,
    n_angles: usize,
    out_j: *mut c_double,
    out_eta: *mut c_double,
) -> CeramoptStatus {
    guard(|| {
        let mesh = match mesh_from(mesh) {
            Ok(m) => m,
            Err(status) => return status,
        };
        if out_j.is_null() || out_eta.is_null() {
            return fail(CeramoptStatus::NullPointer, "objective output is null");
        }
        let setup = match analysis_inputs(
            mesh,
            young_modulus,
            poisson_ratio,
            traction_newtons,
            weibull_modulus,
            sigma0,
            n_angles,
        ) {
            Ok(s) => s,
            Err(status) => return status,
        };
        let state = match solve_state(mesh, &setup.material, &setup.load) {
            Ok(s) => s,
            Err(e) => return fail(CeramoptStatus::SolveError, &e.to_string()),
        };
        match evaluate_objective(mesh, &state.u, &setup.material, &setup.params) {
            Ok(report) => {
                *out_j = report.j;
                *out_eta = report.eta;
                CeramoptStatus::Ok
            }
            Err(e) => fail(CeramoptStatus::ObjectiveError, &e.to_string()),
        }
    })
}

/// Design-space shape gradient dJ/dtheta. `buffer_len` must be at least
/// the value reported by `ceramopt_mesh_theta_len`; the number of entries
/// written lands in `out_written`.
///
/// # Safety
/// All pointers must be valid and `buffer` must hold `buffer_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ceramopt_shape_gradient_theta(
    mesh: *const CeramoptMesh,
    young_modulus: c_double,
    poisson_ratio: c_double,
    traction_newtons: c_double,
    weibull_modulus: c_double,
    sigma0: c_double,
    n_angles: usize,
    buffer: *mut c_double,
    buffer_len: usize,
    out_written: *mut usize,
) -> CeramoptStatus {
    guard(|| {
        let mesh = match mesh_from(mesh) {
            Ok(m) => m,
            Err(status) => return status,
        };
        if buffer.is_null() || out_written.is_null() {
            return fail(CeramoptStatus::NullPointer, "gradient output is null");
        }
        let needed = match mesh.theta_len() {
            Ok(len) => len,
            Err(e) => return fail(CeramoptStatus::MeshError, &e.to_string()),
        };
        if buffer_len < needed {
            return fail(
                CeramoptStatus::BufferTooSmall,
                &format!("gradient needs {needed} entries, buffer holds {buffer_len}"),
            );
        }
        let setup = match analysis_inputs(
            mesh,
            young_modulus,
            poisson_ratio,
            traction_newtons,
            weibull_modulus,
            sigma0,
            n_angles,
        ) {
            Ok(s) => s,
            Err(status) => return status,
        };
        match shape_gradient(mesh, &setup.material, &setup.load, &setup.params) {
            Ok(sg) => {
                let theta = sg.theta.expect("structured mesh has a design map");
                let out = std::slice::from_raw_parts_mut(buffer, needed);
                out.copy_from_slice(&theta);
                *out_written = needed;
                CeramoptStatus::Ok
            }
            Err(e) => fail(CeramoptStatus::GradientError, &e.to_string()),
        }
    })
}

/// Run one subcommand against a configuration file, like the CLI binary.
/// `out_dir` may be null to keep the configured directory; `seed < 0`
/// keeps the configured seed.
///
/// # Safety
/// `config_path` must be NUL-terminated; `out_dir` may be null.
#[no_mangle]
pub unsafe extern "C" fn ceramopt_run(
    command: CeramoptCommand,
    config_path: *const c_char,
    out_dir: *const c_char,
    seed: i64,
) -> CeramoptStatus {
    guard(|| {
        let config_path = match path_from(config_path) {
            Ok(p) => p,
            Err(status) => return status,
        };
        let mut config = match RunConfig::load(&config_path) {
            Ok(c) => c,
            Err(e) => return fail(CeramoptStatus::ConfigError, &e.to_string()),
        };
        if !out_dir.is_null() {
            match path_from(out_dir) {
                Ok(dir) => config.out_dir = dir,
                Err(status) => return status,
            }
        }
        if seed >= 0 {
            config.seed = seed as u64;
        }
        let command = match command {
            CeramoptCommand::Mesh => Command::Mesh,
            CeramoptCommand::Solve => Command::Solve,
            CeramoptCommand::Objective => Command::Objective,
            CeramoptCommand::Gradcheck => Command::Gradcheck,
            CeramoptCommand::Flow => Command::Flow,
        };
        match run_command(command, &config) {
            Ok(_) => CeramoptStatus::Ok,
            Err(e) => fail(CeramoptStatus::FlowError, &e.to_string()),
        }
    })
}

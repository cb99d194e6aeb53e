//! C interface to `porousflow`.
//!
//! Every function returns a [`PfStatus`]. On failure a description can be
//! fetched with [`pf_last_error_message`]; it is kept per thread and
//! overwritten by the next failing call. Objects are opaque handles that the
//! caller releases with the matching `_free` function. Outputs are written
//! only when the call succeeds.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use porousflow::darcy::{
    assemble_darcy, l2_errors, manufactured_solution, solve_state, DarcyError, FemState, LpsWeights, PermeabilityField,
    Rect, SolverOptions, SourceField, StructuredQuadMesh,
};
use porousflow::pfem::{self, PfemError};
use porousflow::pore::{self, PoreError, RandomPackOptions, SpherePack, StokesOptions};

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NumericalFailure = 3,
    BufferTooSmall = 4,
    Panic = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn fail(status: PfStatus, message: impl Into<String>) -> PfStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = message.into());
    status
}

trait IntoStatus {
    fn status(&self) -> PfStatus;
}

impl IntoStatus for PfemError {
    fn status(&self) -> PfStatus {
        match self {
            PfemError::SingularInternalBlock { .. } | PfemError::SingularSystem | PfemError::RootNotBracketed(_) => {
                PfStatus::NumericalFailure
            }
            _ => PfStatus::InvalidArgument,
        }
    }
}

impl IntoStatus for DarcyError {
    fn status(&self) -> PfStatus {
        match self {
            DarcyError::NotConverged { .. } | DarcyError::Factorization(_) => PfStatus::NumericalFailure,
            _ => PfStatus::InvalidArgument,
        }
    }
}

impl IntoStatus for PoreError {
    fn status(&self) -> PfStatus {
        match self {
            PoreError::NotPercolating { .. } | PoreError::NotConverged { .. } => PfStatus::NumericalFailure,
            _ => PfStatus::InvalidArgument,
        }
    }
}

fn from_error<E: IntoStatus + std::fmt::Display>(e: E) -> PfStatus {
    fail(e.status(), e.to_string())
}

/// Runs `body`, turning panics into [`PfStatus::Panic`].
fn guard(body: impl FnOnce() -> PfStatus) -> PfStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(PfStatus::Panic, msg)
        }
    }
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            return fail(PfStatus::NullPointer, concat!("`", stringify!($p), "` is null"));
        })+
    };
}

/// Copies the last error message of this thread into `buf` as a
/// NUL-terminated string, truncating if needed. Returns the full message
/// length in bytes, without the terminator. `buf` may be null when `len` is 0.
///
/// # Safety
/// `buf` must be valid for `len` bytes of writes.
#[no_mangle]
pub unsafe extern "C" fn pf_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pf_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version has no interior NUL"),
    };
    VERSION.as_ptr()
}

/// Largest mesh Péclet number at which odd degree `p` is oscillation free.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pf_max_stable_pe(p: usize, out: *mut f64) -> PfStatus {
    non_null!(out);
    guard(|| match pfem::max_stable_pe(p) {
        Ok(v) => {
            *out = v;
            PfStatus::Ok
        }
        Err(e) => from_error(e),
    })
}

/// Stencil asymmetry `α_p` of the condensed degree-`p` element at `pe`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pf_alpha_p(p: usize, pe: f64, out: *mut f64) -> PfStatus {
    non_null!(out);
    guard(|| match pfem::alpha_p(p, pe) {
        Ok(v) => {
            *out = v;
            PfStatus::Ok
        }
        Err(e) => from_error(e),
    })
}

/// Numerical diffusivity of degree `p` obtained by static condensation.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pf_numerical_diffusivity(p: usize, pe: f64, gamma_eff: f64, out: *mut f64) -> PfStatus {
    non_null!(out);
    guard(|| match pfem::bar_gamma_p_numeric(p, pe, gamma_eff) {
        Ok(v) => {
            *out = v;
            PfStatus::Ok
        }
        Err(e) => from_error(e),
    })
}

/// Smallest degree whose nodal solution is oscillation free at `pe`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pf_min_degree_for_pe(pe: f64, out: *mut usize) -> PfStatus {
    non_null!(out);
    guard(|| match pfem::min_degree_for_pe(pe) {
        Ok(v) => {
            *out = v;
            PfStatus::Ok
        }
        Err(e) => from_error(e),
    })
}

/// A solved Darcy problem on the unit square.
pub struct PfDarcy {
    mesh: StructuredQuadMesh,
    state: FemState,
    manufactured: bool,
}

/// Solves the stabilized Darcy problem on an `nx` by `ny` mesh of the unit
/// square. The inverse permeability is piecewise constant on a `gx` by `gy`
/// grid of subdomains, numbered row by row from the lower left;
/// `entries` holds `2 * gx * gy` values `(a_0, b_0, a_1, b_1, ...)`. With
/// `manufactured` nonzero the source of the built-in manufactured solution
/// is used, otherwise the source is zero.
///
/// # Safety
/// `entries` must point to `2 * gx * gy` readable values and `out` must be
/// valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pf_darcy_solve(
    nx: usize,
    ny: usize,
    gx: usize,
    gy: usize,
    entries: *const f64,
    manufactured: i32,
    out: *mut *mut PfDarcy,
) -> PfStatus {
    non_null!(entries, out);
    guard(|| {
        if gx == 0 || gy == 0 {
            return fail(PfStatus::InvalidArgument, "subdomain grid must be at least 1 x 1");
        }
        let Some(count) = gx.checked_mul(gy).and_then(|n| n.checked_mul(2)) else {
            return fail(PfStatus::InvalidArgument, "subdomain grid is too large");
        };
        let values = std::slice::from_raw_parts(entries, count);
        let run = || -> Result<PfDarcy, DarcyError> {
            let domain = Rect::unit();
            let mesh = StructuredQuadMesh::new(nx, ny, domain)?;
            let perm = PermeabilityField::new(
                PermeabilityField::grid_partition(domain, gx, gy),
                values.chunks(2).map(|c| [c[0], c[1]]).collect(),
            )?;
            let source = if manufactured != 0 { SourceField::manufactured() } else { SourceField::Zero };
            let system = assemble_darcy(&mesh, &perm, &source, LpsWeights::default())?;
            let state = solve_state(&system, SolverOptions::default())?;
            Ok(PfDarcy { mesh, state, manufactured: manufactured != 0 })
        };
        match run() {
            Ok(d) => {
                *out = Box::into_raw(Box::new(d));
                PfStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Number of mesh vertices, which is the length of each state array.
///
/// # Safety
/// `handle` must come from [`pf_darcy_solve`]; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pf_darcy_num_vertices(handle: *const PfDarcy, out: *mut usize) -> PfStatus {
    non_null!(handle, out);
    *out = (*handle).state.num_vertices();
    PfStatus::Ok
}

/// Copies the nodal `u_x`, `u_y` and `p` values (vertex `i + (nx + 1) j`)
/// into three caller buffers of `len` entries each.
///
/// # Safety
/// `handle` must come from [`pf_darcy_solve`]; each buffer must be valid for
/// `len` writes.
#[no_mangle]
pub unsafe extern "C" fn pf_darcy_state(
    handle: *const PfDarcy,
    ux: *mut f64,
    uy: *mut f64,
    p: *mut f64,
    len: usize,
) -> PfStatus {
    non_null!(handle, ux, uy, p);
    let state = &(*handle).state;
    let n = state.num_vertices();
    if len < n {
        return fail(PfStatus::BufferTooSmall, format!("buffers hold {len} values, {n} needed"));
    }
    ptr::copy_nonoverlapping(state.velocity.as_ptr(), ux, n);
    ptr::copy_nonoverlapping(state.velocity.as_ptr().add(n), uy, n);
    ptr::copy_nonoverlapping(state.pressure.as_ptr(), p, n);
    PfStatus::Ok
}

/// L² errors of velocity and pressure against the manufactured solution.
/// Only available when the problem was solved with the manufactured source.
///
/// # Safety
/// `handle` must come from [`pf_darcy_solve`]; outputs must be valid for
/// writes.
#[no_mangle]
pub unsafe extern "C" fn pf_darcy_l2_errors(
    handle: *const PfDarcy,
    velocity: *mut f64,
    pressure: *mut f64,
) -> PfStatus {
    non_null!(handle, velocity, pressure);
    let d = &*handle;
    if !d.manufactured {
        return fail(PfStatus::InvalidArgument, "problem was not solved with the manufactured source");
    }
    guard(|| {
        let (eu, ep) = l2_errors(&d.mesh, &d.state, manufactured_solution);
        *velocity = eu;
        *pressure = ep;
        PfStatus::Ok
    })
}

/// Releases a Darcy handle. Null is ignored.
///
/// # Safety
/// `handle` must come from [`pf_darcy_solve`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pf_darcy_free(handle: *mut PfDarcy) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// A periodic pack of equal spheres.
pub struct PfPack {
    pack: SpherePack,
}

unsafe fn store_pack(result: Result<SpherePack, PoreError>, out: *mut *mut PfPack) -> PfStatus {
    match result {
        Ok(pack) => {
            *out = Box::into_raw(Box::new(PfPack { pack }));
            PfStatus::Ok
        }
        Err(e) => from_error(e),
    }
}

/// Eight spheres of diameter `d` in two hexagonal layers.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pf_pack_hexagonal(d: f64, out: *mut *mut PfPack) -> PfStatus {
    non_null!(out);
    guard(|| store_pack(pore::hexagonal_pack(d), out))
}

/// Random pack in a box of edges `lx`, `ly`, `lz` (each at least `4 d`),
/// reproducible from `seed`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pf_pack_random(
    lx: f64,
    ly: f64,
    lz: f64,
    d: f64,
    seed: u64,
    out: *mut *mut PfPack,
) -> PfStatus {
    non_null!(out);
    guard(|| store_pack(pore::random_pack([lx, ly, lz], d, seed, &RandomPackOptions::default()), out))
}

/// Number of spheres in the pack.
///
/// # Safety
/// `handle` must be a live pack; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pf_pack_len(handle: *const PfPack, out: *mut usize) -> PfStatus {
    non_null!(handle, out);
    *out = (*handle).pack.len();
    PfStatus::Ok
}

/// Porosity of the ideal (not voxelized) pack.
///
/// # Safety
/// `handle` must be a live pack; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pf_pack_porosity(handle: *const PfPack, out: *mut f64) -> PfStatus {
    non_null!(handle, out);
    *out = (*handle).pack.porosity();
    PfStatus::Ok
}

/// Copies the sphere centres as `x0, y0, z0, x1, ...` into `buf`, which must
/// hold at least `3 * len` values.
///
/// # Safety
/// `handle` must be a live pack; `buf` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn pf_pack_centers(handle: *const PfPack, buf: *mut f64, len: usize) -> PfStatus {
    non_null!(handle, buf);
    let centers = &(*handle).pack.centers;
    let n = 3 * centers.len();
    if len < n {
        return fail(PfStatus::BufferTooSmall, format!("buffer holds {len} values, {n} needed"));
    }
    for (i, c) in centers.iter().enumerate() {
        ptr::copy_nonoverlapping(c.as_ptr(), buf.add(3 * i), 3);
    }
    PfStatus::Ok
}

/// Voxelizes the pack with `cells_per_diameter` cells across a sphere,
/// solves Stokes flow driven by the pressure gradient `forcing` along x and
/// reports the permeability and the voxel porosity.
///
/// # Safety
/// `handle` must be a live pack; outputs must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pf_pack_permeability(
    handle: *const PfPack,
    cells_per_diameter: usize,
    viscosity: f64,
    forcing: f64,
    permeability: *mut f64,
    porosity: *mut f64,
) -> PfStatus {
    non_null!(handle, permeability, porosity);
    guard(|| {
        let run = || -> Result<(f64, f64), PoreError> {
            let grid = pore::voxelize(&(*handle).pack, cells_per_diameter, pore::DEFAULT_MEMORY_CAP)?;
            let options = StokesOptions { viscosity, forcing, ..StokesOptions::default() };
            let field = pore::solve_stokes(&grid, &options)?;
            Ok((pore::permeability(&field)?, grid.porosity()))
        };
        match run() {
            Ok((k, eps)) => {
                *permeability = k;
                *porosity = eps;
                PfStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Releases a pack handle. Null is ignored.
///
/// # Safety
/// `handle` must come from a `pf_pack_*` constructor and not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn pf_pack_free(handle: *mut PfPack) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

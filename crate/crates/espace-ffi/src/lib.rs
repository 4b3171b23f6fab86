//! C ABI for the espace library: opaque handles, status codes, out-params.
//!
//! The header `include/espace.h` mirrors these declarations (maintained by
//! hand and checked by the `header_lists_every_export` test). Handles are
//! created and released with the matching `_new`/`_free` pair; every other
//! function is read-only on its handle and thread-safe.

use espace::params::ModelParams;
use espace::wave::{self, ModeSpec, RootSet, WaveError, WaveMode};
use std::os::raw::{c_char, c_double, c_int};

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EspaceStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParams = 2,
    OutOfDomain = 3,
    DegenerateQuartic = 4,
    ComplexRoots = 5,
    NoSolution = 6,
    ConstraintInfeasible = 7,
    UnsupportedMode = 8,
    NumericFailure = 9,
}

impl From<&WaveError> for EspaceStatus {
    fn from(err: &WaveError) -> Self {
        match err {
            WaveError::InvalidParams(_) => EspaceStatus::InvalidParams,
            WaveError::DegenerateQuartic => EspaceStatus::DegenerateQuartic,
            WaveError::NoSolution { .. } => EspaceStatus::NoSolution,
            WaveError::ComplexRoots { .. } => EspaceStatus::ComplexRoots,
            WaveError::NegativeRootSquare(_) => EspaceStatus::NumericFailure,
            WaveError::ConstraintInfeasible(_) => EspaceStatus::ConstraintInfeasible,
            WaveError::UnsupportedMode { .. } => EspaceStatus::UnsupportedMode,
            WaveError::Domain(_) => EspaceStatus::OutOfDomain,
        }
    }
}

/// Opaque validated parameter set.
pub struct EspaceParams(ModelParams);

/// Opaque wave mode bound to the parameters it was built with.
pub struct EspaceMode {
    mode: WaveMode,
    params: ModelParams,
}

unsafe fn write_out<T>(ptr: *mut T, value: T) -> bool {
    if ptr.is_null() {
        false
    } else {
        unsafe { ptr.write(value) };
        true
    }
}

/// Creates a validated parameter handle. On success writes the new handle
/// to `out` and returns `Ok`; on invalid parameters nothing is written.
/// `t_window` is metadata only; pass 1.0 when unused.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn espace_params_new(
    a0: c_double,
    b0: c_double,
    a1: c_double,
    a2: c_double,
    b: c_double,
    d: c_double,
    h_x: c_double,
    h_y: c_double,
    g_x: c_double,
    g_y: c_double,
    x_max: c_double,
    t_window: c_double,
    out: *mut *mut EspaceParams,
) -> EspaceStatus {
    if out.is_null() {
        return EspaceStatus::NullPointer;
    }
    let params = ModelParams {
        a0,
        b0,
        a1,
        a2,
        b,
        d,
        h_x,
        h_y,
        g_x,
        g_y,
        x_max,
        t_window,
    };
    match params.validate() {
        Ok(p) => {
            let handle = Box::into_raw(Box::new(EspaceParams(p)));
            unsafe { write_out(out, handle) };
            EspaceStatus::Ok
        }
        Err(_) => EspaceStatus::InvalidParams,
    }
}

/// Releases a parameter handle. NULL is a no-op.
///
/// # Safety
/// `params` must be NULL or a pointer previously returned by
/// [`espace_params_new`] that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn espace_params_free(params: *mut EspaceParams) {
    if !params.is_null() {
        drop(unsafe { Box::from_raw(params) });
    }
}

macro_rules! deref_or {
    ($ptr:expr) => {
        match unsafe { $ptr.as_ref() } {
            Some(r) => r,
            None => return EspaceStatus::NullPointer,
        }
    };
}

/// Steady-state credits rate at `(x, y)`.
///
/// # Safety
/// `params` must be a live handle from [`espace_params_new`].
#[no_mangle]
pub unsafe extern "C" fn espace_steady_a(
    params: *const EspaceParams,
    x: c_double,
    y: c_double,
    out: *mut c_double,
) -> EspaceStatus {
    let p = deref_or!(params);
    match p.0.steady_a(x, y) {
        Ok(v) => {
            if unsafe { write_out(out, v) } {
                EspaceStatus::Ok
            } else {
                EspaceStatus::NullPointer
            }
        }
        Err(_) => EspaceStatus::OutOfDomain,
    }
}

/// Steady-state payment rate at `(x, y)`.
///
/// # Safety
/// `params` must be a live handle from [`espace_params_new`].
#[no_mangle]
pub unsafe extern "C" fn espace_steady_b(
    params: *const EspaceParams,
    x: c_double,
    y: c_double,
    out: *mut c_double,
) -> EspaceStatus {
    let p = deref_or!(params);
    match p.0.steady_b(x, y) {
        Ok(v) => {
            if unsafe { write_out(out, v) } {
                EspaceStatus::Ok
            } else {
                EspaceStatus::NullPointer
            }
        }
        Err(_) => EspaceStatus::OutOfDomain,
    }
}

/// Quartic coefficients (q4, q2, q0) of the depth ODE at `(k, omega)`.
///
/// # Safety
/// `params` must be a live handle; out pointers must be writable or NULL.
#[no_mangle]
pub unsafe extern "C" fn espace_quartic_coefficients(
    params: *const EspaceParams,
    k: c_double,
    omega: c_double,
    out_q4: *mut c_double,
    out_q2: *mut c_double,
    out_q0: *mut c_double,
) -> EspaceStatus {
    let p = deref_or!(params);
    match wave::quartic_coefficients(&p.0, k, omega) {
        Ok(c) => {
            unsafe {
                write_out(out_q4, c.q4);
                write_out(out_q2, c.q2);
                write_out(out_q0, c.q0);
            }
            EspaceStatus::Ok
        }
        Err(e) => (&e).into(),
    }
}

/// Characteristic roots at `(k, omega)`. Writes `is_real = 1` and the two
/// positive roots, or `is_real = 0` and the conjugate `s²` pair
/// (`s_sq_re ± s_sq_im·i`) into the same two slots.
///
/// # Safety
/// `params` must be a live handle; out pointers must be writable or NULL.
#[no_mangle]
pub unsafe extern "C" fn espace_characteristic_roots(
    params: *const EspaceParams,
    k: c_double,
    omega: c_double,
    out_s1: *mut c_double,
    out_s2: *mut c_double,
    out_is_real: *mut c_int,
) -> EspaceStatus {
    let p = deref_or!(params);
    let coeffs = match wave::quartic_coefficients(&p.0, k, omega) {
        Ok(c) => c,
        Err(e) => return (&e).into(),
    };
    match wave::characteristic_roots(&coeffs) {
        Ok(RootSet::Real { s1, s2 }) => {
            unsafe {
                write_out(out_s1, s1);
                write_out(out_s2, s2);
                write_out(out_is_real, 1);
            }
            EspaceStatus::Ok
        }
        Ok(RootSet::Complex { s_sq_re, s_sq_im }) => {
            unsafe {
                write_out(out_s1, s_sq_re);
                write_out(out_s2, s_sq_im);
                write_out(out_is_real, 0);
            }
            EspaceStatus::Ok
        }
        Err(e) => (&e).into(),
    }
}

/// Smallest positive dispersion solution at wave number `k`.
///
/// # Safety
/// `params` must be a live handle; out pointers must be writable or NULL.
#[no_mangle]
pub unsafe extern "C" fn espace_dispersion_solve(
    params: *const EspaceParams,
    k: c_double,
    out_omega: *mut c_double,
    out_s: *mut c_double,
) -> EspaceStatus {
    let p = deref_or!(params);
    match wave::dispersion_solve(&p.0, k) {
        Ok(branch) => {
            unsafe {
                write_out(out_omega, branch.omega);
                write_out(out_s, branch.s);
            }
            EspaceStatus::Ok
        }
        Err(e) => (&e).into(),
    }
}

/// Builds a wave mode at `(k, omega)`. `kind`: 0 single-decay,
/// 1 growth-pair, 2 general (uses `lambda2`/`lambda4`).
///
/// # Safety
/// `params` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn espace_mode_new(
    params: *const EspaceParams,
    k: c_double,
    omega: c_double,
    kind: c_int,
    lambda2: c_double,
    lambda4: c_double,
    out: *mut *mut EspaceMode,
) -> EspaceStatus {
    let p = deref_or!(params);
    if out.is_null() {
        return EspaceStatus::NullPointer;
    }
    let spec = match kind {
        0 => ModeSpec::SingleDecay,
        1 => ModeSpec::GrowthPair,
        2 => ModeSpec::General { lambda2, lambda4 },
        _ => return EspaceStatus::InvalidParams,
    };
    match wave::build_mode(&p.0, k, omega, spec) {
        Ok(mode) => {
            let handle = Box::into_raw(Box::new(EspaceMode { mode, params: p.0 }));
            unsafe { write_out(out, handle) };
            EspaceStatus::Ok
        }
        Err(e) => (&e).into(),
    }
}

/// Releases a mode handle. NULL is a no-op.
///
/// # Safety
/// `mode` must be NULL or a pointer previously returned by
/// [`espace_mode_new`] that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn espace_mode_free(mode: *mut EspaceMode) {
    if !mode.is_null() {
        drop(unsafe { Box::from_raw(mode) });
    }
}

/// Depth profile `f(y_rel)` of a mode, `y_rel = y − X ≤ 0`.
///
/// # Safety
/// `mode` must be a live handle from [`espace_mode_new`].
#[no_mangle]
pub unsafe extern "C" fn espace_mode_profile(
    mode: *const EspaceMode,
    y_rel: c_double,
    out: *mut c_double,
) -> EspaceStatus {
    let m = deref_or!(mode);
    if unsafe { write_out(out, m.mode.profile(y_rel)) } {
        EspaceStatus::Ok
    } else {
        EspaceStatus::NullPointer
    }
}

/// Perturbed fields `(A, B)` of a mode at `(t, x, y)`.
///
/// # Safety
/// `mode` must be a live handle; out pointers must be writable or NULL.
#[no_mangle]
pub unsafe extern "C" fn espace_mode_fields(
    mode: *const EspaceMode,
    t: c_double,
    x: c_double,
    y: c_double,
    out_a: *mut c_double,
    out_b: *mut c_double,
) -> EspaceStatus {
    let m = deref_or!(mode);
    match wave::evaluate_fields(&m.mode, &m.params, t, x, y) {
        Ok((a, b)) => {
            unsafe {
                write_out(out_a, a);
                write_out(out_b, b);
            }
            EspaceStatus::Ok
        }
        Err(e) => (&e).into(),
    }
}

/// Border elevation `ξ(t, x)` of a single-decay mode.
///
/// # Safety
/// `mode` must be a live handle; `out` must be writable or NULL.
#[no_mangle]
pub unsafe extern "C" fn espace_mode_surface_elevation(
    mode: *const EspaceMode,
    t: c_double,
    x: c_double,
    out: *mut c_double,
) -> EspaceStatus {
    let m = deref_or!(mode);
    match wave::surface_elevation(&m.mode, &m.params, t, x) {
        Ok(xi) => {
            unsafe { write_out(out, xi) };
            EspaceStatus::Ok
        }
        Err(e) => (&e).into(),
    }
}

/// Total border credits at time `t`: closed form and its quadrature check.
///
/// # Safety
/// `mode` must be a live handle; out pointers must be writable or NULL.
#[no_mangle]
pub unsafe extern "C" fn espace_mode_border_total(
    mode: *const EspaceMode,
    t: c_double,
    out_closed_form: *mut c_double,
    out_quadrature: *mut c_double,
) -> EspaceStatus {
    let m = deref_or!(mode);
    match wave::border_credit_total(&m.mode, &m.params, t) {
        Ok(total) => {
            unsafe {
                write_out(out_closed_form, total.closed_form);
                write_out(out_quadrature, total.quadrature);
            }
            EspaceStatus::Ok
        }
        Err(e) => (&e).into(),
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn espace_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ptr;

    fn make_params() -> *mut EspaceParams {
        let mut handle: *mut EspaceParams = ptr::null_mut();
        // Worked-example set with g_y pinned to the larger root at k=w=1.
        let status = unsafe {
            espace_params_new(
                1.0,
                1.0,
                10.0,
                -0.1,
                1.0,
                -1.0,
                0.1,
                0.40999555891558565,
                -0.2,
                0.40999555891558565,
                10.0,
                1.0,
                &mut handle,
            )
        };
        assert_eq!(status, EspaceStatus::Ok);
        assert!(!handle.is_null());
        handle
    }

    #[test]
    fn params_lifecycle_and_validation() {
        let handle = make_params();
        unsafe { espace_params_free(handle) };

        let mut out: *mut EspaceParams = ptr::null_mut();
        let status = unsafe {
            espace_params_new(
                1.0, 1.0, -10.0, -0.1, 1.0, -1.0, 0.1, 0.41, -0.2, 0.41, 10.0, 1.0, &mut out,
            )
        };
        assert_eq!(status, EspaceStatus::InvalidParams);
        assert!(out.is_null());
    }

    #[test]
    fn steady_fields_and_domain_errors() {
        let handle = make_params();
        let mut a = 0.0;
        let mut b = 0.0;
        unsafe {
            assert_eq!(espace_steady_a(handle, 0.0, 10.0, &mut a), EspaceStatus::Ok);
            assert_eq!(espace_steady_b(handle, 0.0, 10.0, &mut b), EspaceStatus::Ok);
            assert_eq!(
                espace_steady_a(handle, -1.0, 0.0, &mut a),
                EspaceStatus::OutOfDomain
            );
            espace_params_free(handle);
        }
        assert_eq!(a, 2.0);
        assert_eq!(b, 3.0);
    }

    #[test]
    fn quartic_and_roots_round_trip() {
        let handle = make_params();
        let (mut q4, mut q2, mut q0) = (0.0, 0.0, 0.0);
        let (mut s1, mut s2) = (0.0, 0.0);
        let mut is_real = -1;
        unsafe {
            assert_eq!(
                espace_quartic_coefficients(handle, 1.0, 1.0, &mut q4, &mut q2, &mut q0),
                EspaceStatus::Ok
            );
            assert_eq!(
                espace_characteristic_roots(handle, 1.0, 1.0, &mut s1, &mut s2, &mut is_real),
                EspaceStatus::Ok
            );
            espace_params_free(handle);
        }
        assert_eq!(q4, 2.0);
        assert!((q2 + 14.1).abs() < 1e-12);
        assert!((q0 - 13.1).abs() < 1e-12);
        assert_eq!(is_real, 1);
        assert!((s1 - 2.4391).abs() < 1e-4);
        assert!((s2 - 1.0493).abs() < 1e-4);
    }

    #[test]
    fn dispersion_solve_round_trip() {
        let handle = make_params();
        let (mut omega, mut s) = (0.0, 0.0);
        unsafe {
            assert_eq!(
                espace_dispersion_solve(handle, 1.0, &mut omega, &mut s),
                EspaceStatus::Ok
            );
            espace_params_free(handle);
        }
        assert!(omega > 0.0 && s > 0.0);
    }

    #[test]
    fn mode_lifecycle_and_evaluation() {
        let params = make_params();
        let mut mode: *mut EspaceMode = ptr::null_mut();
        unsafe {
            assert_eq!(
                espace_mode_new(params, 1.0, 1.0, 0, 0.0, 0.0, &mut mode),
                EspaceStatus::Ok
            );
        }
        let mut f0 = 0.0;
        let (mut a, mut b) = (0.0, 0.0);
        let mut xi = 0.0;
        let (mut closed, mut quad) = (0.0, 0.0);
        unsafe {
            assert_eq!(espace_mode_profile(mode, 0.0, &mut f0), EspaceStatus::Ok);
            assert_eq!(
                espace_mode_fields(mode, 0.3, 2.0, 9.0, &mut a, &mut b),
                EspaceStatus::Ok
            );
            assert_eq!(
                espace_mode_surface_elevation(mode, 0.3, 2.0, &mut xi),
                EspaceStatus::Ok
            );
            assert_eq!(
                espace_mode_border_total(mode, 0.3, &mut closed, &mut quad),
                EspaceStatus::Ok
            );
            espace_mode_free(mode);
            espace_params_free(params);
        }
        assert_eq!(f0, 1.0);
        assert!(a.is_finite() && b.is_finite());
        assert!(xi.is_finite());
        assert!((closed - quad).abs() <= 1e-10 * quad.abs());
    }

    #[test]
    fn growth_mode_rejects_surface_elevation() {
        let params = make_params();
        let mut mode: *mut EspaceMode = ptr::null_mut();
        let mut xi = 0.0;
        unsafe {
            assert_eq!(
                espace_mode_new(params, 1.0, 1.0, 1, 0.0, 0.0, &mut mode),
                EspaceStatus::Ok
            );
            assert_eq!(
                espace_mode_surface_elevation(mode, 0.0, 0.0, &mut xi),
                EspaceStatus::UnsupportedMode
            );
            espace_mode_free(mode);
            espace_params_free(params);
        }
    }

    #[test]
    fn null_pointers_are_rejected() {
        let mut v = 0.0;
        unsafe {
            assert_eq!(
                espace_steady_a(ptr::null(), 0.0, 0.0, &mut v),
                EspaceStatus::NullPointer
            );
            assert_eq!(
                espace_mode_profile(ptr::null(), 0.0, &mut v),
                EspaceStatus::NullPointer
            );
        }
        assert_eq!(
            unsafe {
                espace_params_new(
                    1.0,
                    1.0,
                    10.0,
                    -0.1,
                    1.0,
                    -1.0,
                    0.1,
                    0.41,
                    -0.2,
                    0.41,
                    10.0,
                    1.0,
                    ptr::null_mut(),
                )
            },
            EspaceStatus::NullPointer
        );
    }

    #[test]
    fn version_string_is_nul_terminated() {
        let ptr = espace_version();
        let s = unsafe { std::ffi::CStr::from_ptr(ptr) };
        assert_eq!(s.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }

    #[test]
    fn header_lists_every_export() {
        let header = include_str!("../include/espace.h");
        for symbol in [
            "espace_params_new",
            "espace_params_free",
            "espace_steady_a",
            "espace_steady_b",
            "espace_quartic_coefficients",
            "espace_characteristic_roots",
            "espace_dispersion_solve",
            "espace_mode_new",
            "espace_mode_free",
            "espace_mode_profile",
            "espace_mode_fields",
            "espace_mode_surface_elevation",
            "espace_mode_border_total",
            "espace_version",
        ] {
            assert!(header.contains(symbol), "header missing `{symbol}`");
        }
    }
}

//! C ABI over `waveguide-pst`.
//!
//! Every function returns a [`WpstStatus`]; `0` is success and negative
//! values are errors. Results are written through out-pointers. Lattices are
//! opaque handles created by [`wpst_lattice_new`] and released with
//! [`wpst_lattice_free`]. The message of the most recent error on the calling
//! thread is available from [`wpst_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};

use waveguide_pst::evolution::{
    correction_phase, mirror_pairs, optimal_time, pst_check, Propagator,
};
use waveguide_pst::fabrication::separations;
use waveguide_pst::fock::{fock_transfer, fock_uhlmann_fidelity, StateKind, DEFAULT_LEAK_BUDGET};
use waveguide_pst::gaussian::{uhlmann_fidelity_gaussian, GaussianState};
use waveguide_pst::lattice::{CouplingMatrix, CouplingProfile, Dims};
use waveguide_pst::scan::{lattice_matrix, ProfileKind};
use waveguide_pst::PstError;

/// Status codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WpstStatus {
    Ok = 0,
    NullPointer = -1,
    InvalidLattice = -2,
    InvalidParameter = -3,
    Numerical = -4,
    InvalidState = -5,
    Resource = -6,
    BufferTooSmall = -7,
    InvalidString = -8,
    Panic = -9,
}

/// Coupling profile selector for [`wpst_lattice_new`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WpstProfile {
    Designed = 0,
    Uniform = 1,
}

/// Transfer verdict.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WpstVerdict {
    pub pass: bool,
    pub worst_deviation: f64,
    pub t_opt: f64,
    pub phase: f64,
}

/// Opaque lattice handle.
pub struct WpstLattice {
    dims: Dims,
    coupling: f64,
    profile: CouplingProfile,
    matrix: CouplingMatrix,
    propagator: Propagator,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(e: &PstError) -> WpstStatus {
    match e {
        PstError::InvalidLattice(_) | PstError::InvalidReferenceAxis { .. } => {
            WpstStatus::InvalidLattice
        }
        PstError::NumericalFailure { .. } => WpstStatus::Numerical,
        PstError::InvalidState(_) => WpstStatus::InvalidState,
        PstError::Resource { .. } => WpstStatus::Resource,
        _ => WpstStatus::InvalidParameter,
    }
}

enum Failure {
    Status(WpstStatus, String),
    Pst(PstError),
}

impl From<PstError> for Failure {
    fn from(e: PstError) -> Self {
        Failure::Pst(e)
    }
}

fn null() -> Failure {
    Failure::Status(WpstStatus::NullPointer, "null pointer argument".into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> WpstStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => WpstStatus::Ok,
        Ok(Err(Failure::Pst(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Status(s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("internal panic");
            WpstStatus::Panic
        }
    }
}

unsafe fn out<'a, T>(p: *mut T) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(null)
}

unsafe fn handle<'a>(p: *const WpstLattice) -> Result<&'a WpstLattice, Failure> {
    p.as_ref().ok_or_else(null)
}

/// Builds a lattice of shape `l x b x h` with coupling scale `coupling`;
/// `profile` is a [`WpstProfile`] value.
///
/// # Safety
/// `out_lattice` must be a valid pointer; on success it receives a handle
/// that must be released with [`wpst_lattice_free`].
#[no_mangle]
pub unsafe extern "C" fn wpst_lattice_new(
    l: usize,
    b: usize,
    h: usize,
    coupling: f64,
    profile: i32,
    out_lattice: *mut *mut WpstLattice,
) -> WpstStatus {
    guard(|| {
        let slot = out(out_lattice)?;
        let dims = Dims::new(l, b, h)?;
        let kind = match profile {
            p if p == WpstProfile::Designed as i32 => ProfileKind::Designed,
            p if p == WpstProfile::Uniform as i32 => ProfileKind::Uniform,
            p => {
                return Err(Failure::Status(
                    WpstStatus::InvalidParameter,
                    format!("unknown profile {p}"),
                ))
            }
        };
        let (_, profile, matrix) = lattice_matrix(dims, coupling, kind)?;
        let propagator = Propagator::new(&matrix)?;
        *slot = Box::into_raw(Box::new(WpstLattice {
            dims,
            coupling,
            profile,
            matrix,
            propagator,
        }));
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `lattice` must be null or a handle from [`wpst_lattice_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn wpst_lattice_free(lattice: *mut WpstLattice) {
    if !lattice.is_null() {
        drop(Box::from_raw(lattice));
    }
}

/// Number of modes `L * B * H`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn wpst_lattice_num_modes(
    lattice: *const WpstLattice,
    out_modes: *mut usize,
) -> WpstStatus {
    guard(|| {
        *out(out_modes)? = handle(lattice)?.matrix.num_modes();
        Ok(())
    })
}

/// Copies the gap couplings of `axis` (0 = L, 1 = B, 2 = H) into `buf`.
/// `out_len` always receives the number of gaps; if `capacity` is too small
/// nothing is copied and `BufferTooSmall` is returned.
///
/// # Safety
/// `buf` must hold `capacity` doubles (may be null when `capacity` is 0).
#[no_mangle]
pub unsafe extern "C" fn wpst_lattice_couplings(
    lattice: *const WpstLattice,
    axis: usize,
    buf: *mut f64,
    capacity: usize,
    out_len: *mut usize,
) -> WpstStatus {
    guard(|| {
        let lat = handle(lattice)?;
        if axis > 2 {
            return Err(Failure::Status(
                WpstStatus::InvalidParameter,
                format!("axis {axis} is not 0, 1 or 2"),
            ));
        }
        let values = lat.profile.axis(axis);
        copy_out(values, buf, capacity, out_len)
    })
}

unsafe fn copy_out(
    values: &[f64],
    buf: *mut f64,
    capacity: usize,
    out_len: *mut usize,
) -> Result<(), Failure> {
    *out(out_len)? = values.len();
    if values.len() > capacity {
        return Err(Failure::Status(
            WpstStatus::BufferTooSmall,
            format!("buffer holds {capacity}, need {}", values.len()),
        ));
    }
    if !values.is_empty() {
        if buf.is_null() {
            return Err(null());
        }
        std::ptr::copy_nonoverlapping(values.as_ptr(), buf, values.len());
    }
    Ok(())
}

/// `t_opt` for period index `n`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn wpst_lattice_optimal_time(
    lattice: *const WpstLattice,
    n: u32,
    out_t: *mut f64,
) -> WpstStatus {
    guard(|| {
        let lat = handle(lattice)?;
        *out(out_t)? = optimal_time(lat.dims, lat.coupling, n)?;
        Ok(())
    })
}

/// Output phase-gate angle in radians.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn wpst_lattice_correction_phase(
    lattice: *const WpstLattice,
    out_phi: *mut f64,
) -> WpstStatus {
    guard(|| {
        *out(out_phi)? = correction_phase(handle(lattice)?.dims)?.phi();
        Ok(())
    })
}

/// Entry `A[from][to]` of `exp(-i M t)` (0-based row-major mode indices).
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn wpst_lattice_evolution_entry(
    lattice: *const WpstLattice,
    t: f64,
    from: usize,
    to: usize,
    out_re: *mut f64,
    out_im: *mut f64,
) -> WpstStatus {
    guard(|| {
        let lat = handle(lattice)?;
        let n = lat.matrix.num_modes();
        if from >= n || to >= n {
            return Err(Failure::Status(
                WpstStatus::InvalidParameter,
                format!("mode index out of range for {n} modes"),
            ));
        }
        let z = lat.propagator.at(t)?.entry(from, to);
        *out(out_re)? = z.re;
        *out(out_im)? = z.im;
        Ok(())
    })
}

/// Mirror-transfer check at `t_opt` for period index `n`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn wpst_lattice_verify_pst(
    lattice: *const WpstLattice,
    n: u32,
    tol: f64,
    out_verdict: *mut WpstVerdict,
) -> WpstStatus {
    guard(|| {
        let lat = handle(lattice)?;
        let slot = out(out_verdict)?;
        let t_opt = optimal_time(lat.dims, lat.coupling, n)?;
        let v = pst_check(&lat.propagator.at(t_opt)?, &mirror_pairs(lat.dims), tol)?;
        *slot = WpstVerdict {
            pass: v.pass,
            worst_deviation: v.worst_deviation,
            t_opt,
            phase: correction_phase(lat.dims)?.phi(),
        };
        Ok(())
    })
}

/// Waveguide separations `kappa_j = ln(gamma / J_j) / eta`, axes L, B, H in
/// turn. Buffer semantics as in [`wpst_lattice_couplings`].
///
/// # Safety
/// `buf` must hold `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn wpst_lattice_separations(
    lattice: *const WpstLattice,
    gamma: f64,
    eta: f64,
    buf: *mut f64,
    capacity: usize,
    out_len: *mut usize,
) -> WpstStatus {
    guard(|| {
        let plan = separations(&handle(lattice)?.profile, gamma, eta)?;
        let kappas: Vec<f64> = plan.gaps().iter().map(|g| g.kappa).collect();
        copy_out(&kappas, buf, capacity, out_len)
    })
}

/// Fidelity between the input `spec` (e.g. `"cat:1.0"`) placed on the first
/// site and the phase-corrected state at its mirror site after time `t`.
/// `cutoff < 0` picks the cutoff from the default leak budget.
///
/// # Safety
/// `spec` must be a NUL-terminated string; out-pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn wpst_lattice_transfer_fidelity(
    lattice: *const WpstLattice,
    spec: *const c_char,
    cutoff: i64,
    t: f64,
    out_fidelity: *mut f64,
    out_leak: *mut f64,
) -> WpstStatus {
    guard(|| {
        let lat = handle(lattice)?;
        if spec.is_null() {
            return Err(null());
        }
        let text = CStr::from_ptr(spec)
            .to_str()
            .map_err(|_| Failure::Status(WpstStatus::InvalidString, "spec is not UTF-8".into()))?;
        let kind: StateKind = text.parse()?;
        let cutoff = usize::try_from(cutoff).ok();
        let input = kind.build(cutoff, DEFAULT_LEAK_BUDGET)?;
        let last = lat.matrix.num_modes() - 1;
        let alpha = lat.propagator.at(t)?.entry(0, last);
        let output = fock_transfer(&input, alpha, correction_phase(lat.dims)?)?;
        *out(out_fidelity)? = fock_uhlmann_fidelity(&input, &output)?;
        *out(out_leak)? = input.leak();
        Ok(())
    })
}

/// Uhlmann fidelity of two single-mode Gaussian states given as
/// displacement `d[2]` and row-major covariance `xi[4]`.
///
/// # Safety
/// Arrays must hold 2 and 4 doubles.
#[no_mangle]
pub unsafe extern "C" fn wpst_gaussian_fidelity(
    d1: *const f64,
    xi1: *const f64,
    d2: *const f64,
    xi2: *const f64,
    out_fidelity: *mut f64,
) -> WpstStatus {
    guard(|| {
        if d1.is_null() || xi1.is_null() || d2.is_null() || xi2.is_null() {
            return Err(null());
        }
        let state = |d: *const f64, xi: *const f64| {
            let d = std::slice::from_raw_parts(d, 2);
            let xi = std::slice::from_raw_parts(xi, 4);
            GaussianState::new(
                nalgebra::DVector::from_column_slice(d),
                nalgebra::DMatrix::from_row_slice(2, 2, xi),
            )
        };
        let s1 = state(d1, xi1)?;
        let s2 = state(d2, xi2)?;
        *out(out_fidelity)? = uhlmann_fidelity_gaussian(&s1, &s2)?;
        Ok(())
    })
}

/// Copies the calling thread's last error message (NUL-terminated,
/// truncated to fit) into `buf`.
///
/// # Safety
/// `buf` must hold `capacity` bytes.
#[no_mangle]
pub unsafe extern "C" fn wpst_last_error_message(buf: *mut c_char, capacity: usize) -> WpstStatus {
    if buf.is_null() || capacity == 0 {
        return WpstStatus::NullPointer;
    }
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        let n = bytes.len().min(capacity - 1);
        std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
        *buf.add(n) = 0;
    });
    WpstStatus::Ok
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn wpst_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

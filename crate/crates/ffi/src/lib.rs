//! C ABI over `roughmax`.
//!
//! Objects cross the boundary as opaque handles created by `rm_*_new` (or
//! returned through out-pointers) and released with the matching `rm_*_free`.
//! Every fallible call returns an [`RmStatus`]; the message of the most
//! recent failure on the calling thread is available from
//! [`rm_last_error_message`].

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use roughmax::experiments::sharpness_run;
use roughmax::operators::{maximal_alpha, shift_domination_check, Budget};
use roughmax::sparse::{build_sparse, verify_sparse};
use roughmax::{CellGrid, CubeFamily, Error, ExponentProfile, Field, SampledFunctions};

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RmStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    Parameter = 3,
    Hypothesis = 4,
    Range = 5,
    Resource = 6,
    Singular = 7,
    Divergent = 8,
    Inconsistency = 9,
    Format = 10,
    Io = 11,
    Panic = 12,
    BufferTooSmall = 13,
}

/// Which cube family a supremum runs over.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RmFamily {
    /// All shifted dyadic grids.
    DyadicUnion = 0,
    /// One dyadic grid; the shift mask is passed separately.
    Dyadic = 1,
    /// Every cell-aligned cube inside the box.
    AllCubes = 2,
}

/// Opaque grid handle.
pub struct RmGrid(CellGrid);

/// Opaque handle to `m` sampled functions with unit weights.
pub struct RmFunctions(SampledFunctions);

/// Opaque per-cell field.
pub struct RmField(Field);

thread_local! {
    static LAST_ERROR: RefCell<Vec<u8>> = const { RefCell::new(Vec::new()) };
}

fn set_error(msg: &str) {
    LAST_ERROR.with(|e| {
        let mut e = e.borrow_mut();
        e.clear();
        e.extend_from_slice(msg.as_bytes());
    });
}

fn status_of(err: &Error) -> RmStatus {
    match err {
        Error::Domain(_) => RmStatus::Domain,
        Error::Parameter(_) => RmStatus::Parameter,
        Error::Hypothesis(_) => RmStatus::Hypothesis,
        Error::Range(_) => RmStatus::Range,
        Error::Resource(_) => RmStatus::Resource,
        Error::Singular(_) => RmStatus::Singular,
        Error::Divergent(_) => RmStatus::Divergent,
        Error::Inconsistency(_) => RmStatus::Inconsistency,
        Error::Format(_) | Error::Json(_) | Error::Csv(_) => RmStatus::Format,
        Error::Io(_) => RmStatus::Io,
    }
}

/// Runs `f`, mapping library errors and panics to status codes.
fn guard(f: impl FnOnce() -> Result<(), (RmStatus, String)>) -> RmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RmStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            RmStatus::Panic
        }
    }
}

fn lib<T>(r: roughmax::Result<T>) -> Result<T, (RmStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (RmStatus, String) {
    (RmStatus::NullPointer, format!("{what} is null"))
}

unsafe fn get<'a, T>(p: *const T, what: &str) -> Result<&'a T, (RmStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

fn family(kind: RmFamily, beta: u8) -> CubeFamily {
    match kind {
        RmFamily::DyadicUnion => CubeFamily::DyadicUnion,
        RmFamily::Dyadic => CubeFamily::Dyadic { beta },
        RmFamily::AllCubes => CubeFamily::AllCubes,
    }
}

/// Copies the last error message of this thread into `buf` (NUL-terminated)
/// and stores its length, without the terminator, in `len_out`.
#[no_mangle]
pub unsafe extern "C" fn rm_last_error_message(buf: *mut c_char, cap: usize, len_out: *mut usize) -> RmStatus {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        if let Some(l) = len_out.as_mut() {
            *l = e.len();
        }
        if buf.is_null() {
            return if cap == 0 { RmStatus::Ok } else { RmStatus::NullPointer };
        }
        if cap < e.len() + 1 {
            return RmStatus::BufferTooSmall;
        }
        ptr::copy_nonoverlapping(e.as_ptr().cast::<c_char>(), buf, e.len());
        *buf.add(e.len()) = 0;
        RmStatus::Ok
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rm_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version string"),
    };
    VERSION.as_ptr()
}

/// Box `[0, 2^domain_exp)^n` with `3 * 2^(domain_exp + level)` cells per side.
#[no_mangle]
pub unsafe extern "C" fn rm_grid_new(n: usize, domain_exp: u32, level: u32, out: *mut *mut RmGrid) -> RmStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let g = lib(CellGrid::new(n, domain_exp, level))?;
        *out = Box::into_raw(Box::new(RmGrid(g)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn rm_grid_free(grid: *mut RmGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// Number of cells, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn rm_grid_cell_count(grid: *const RmGrid) -> usize {
    grid.as_ref().map_or(0, |g| g.0.cell_count())
}

/// `m` nonnegative functions; `values` holds `m * cell_count` numbers, one
/// function after another, each in row-major cell order.
#[no_mangle]
pub unsafe extern "C" fn rm_functions_new(
    grid: *const RmGrid,
    m: usize,
    values: *const f64,
    out: *mut *mut RmFunctions,
) -> RmStatus {
    guard(|| {
        let g = get(grid, "grid")?.0;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        if values.is_null() {
            return Err(null("values"));
        }
        if m == 0 {
            return Err((RmStatus::Parameter, "m must be positive".into()));
        }
        let cells = g.cell_count();
        let all = slice::from_raw_parts(values, m * cells);
        let fields = all
            .chunks(cells)
            .map(|c| lib(Field::new(g, c.to_vec())))
            .collect::<Result<Vec<_>, _>>()?;
        let fs = lib(SampledFunctions::unweighted(fields))?;
        *out = Box::into_raw(Box::new(RmFunctions(fs)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn rm_functions_free(fs: *mut RmFunctions) {
    if !fs.is_null() {
        drop(Box::from_raw(fs));
    }
}

/// `M_alpha` over the chosen family (`beta` is used by `RM_FAMILY_DYADIC`).
#[no_mangle]
pub unsafe extern "C" fn rm_maximal_alpha(
    fs: *const RmFunctions,
    alpha: f64,
    kind: RmFamily,
    beta: u8,
    out: *mut *mut RmField,
) -> RmStatus {
    guard(|| {
        let fs = &get(fs, "functions")?.0;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let fam = family(kind, beta);
        lib(Budget::default().check_family(&fam, fs.grid()))?;
        let f = lib(maximal_alpha(fs, alpha, &fam))?;
        *out = Box::into_raw(Box::new(RmField(f)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn rm_field_len(field: *const RmField) -> usize {
    field.as_ref().map_or(0, |f| f.0.values().len())
}

/// Copies the field's values into `buf`, which must hold `rm_field_len` values.
#[no_mangle]
pub unsafe extern "C" fn rm_field_copy(field: *const RmField, buf: *mut f64, cap: usize) -> RmStatus {
    guard(|| {
        let f = get(field, "field")?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let v = f.0.values();
        if cap < v.len() {
            return Err((RmStatus::BufferTooSmall, format!("need {} values, got room for {cap}", v.len())));
        }
        ptr::copy_nonoverlapping(v.as_ptr(), buf, v.len());
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn rm_field_free(field: *mut RmField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// Largest ratio `M_alpha / (6^(mn-alpha) sum_beta M_alpha^{D_beta})` over the
/// cells. Grids above `budget_cells` cells are refused.
#[no_mangle]
pub unsafe extern "C" fn rm_shift_domination(
    fs: *const RmFunctions,
    alpha: f64,
    budget_cells: usize,
    worst_ratio: *mut f64,
) -> RmStatus {
    guard(|| {
        let fs = &get(fs, "functions")?.0;
        let out = worst_ratio.as_mut().ok_or_else(|| null("worst_ratio"))?;
        let budget = Budget { all_cubes_cells: budget_cells, ..Budget::default() };
        *out = lib(shift_domination_check(fs, alpha, &budget))?.worst_ratio;
        Ok(())
    })
}

/// Builds the sparse family of `D_beta` (`base <= 0` selects `2^(m(n+1))`)
/// and verifies it. Reports the cube count and the verdict.
#[no_mangle]
pub unsafe extern "C" fn rm_sparse_verify(
    fs: *const RmFunctions,
    alpha: f64,
    beta: u8,
    base: f64,
    cubes: *mut usize,
    passed: *mut bool,
) -> RmStatus {
    guard(|| {
        let fs = &get(fs, "functions")?.0;
        let cubes = cubes.as_mut().ok_or_else(|| null("cubes"))?;
        let passed = passed.as_mut().ok_or_else(|| null("passed"))?;
        let s = lib(build_sparse(fs, alpha, beta, (base > 0.0).then_some(base)))?;
        *cubes = s.cube_count();
        *passed = lib(verify_sparse(&s))?.passed;
        Ok(())
    })
}

/// Fitted weight exponent on the one-dimensional extremal family for
/// exponents `p[0..m]`, over `count` decreasing values `eps`.
#[no_mangle]
pub unsafe extern "C" fn rm_sharpness(
    m: usize,
    p: *const f64,
    alpha: f64,
    eps: *const f64,
    count: usize,
    gamma_hat: *mut f64,
) -> RmStatus {
    guard(|| {
        if p.is_null() || eps.is_null() {
            return Err(null("p or eps"));
        }
        let out = gamma_hat.as_mut().ok_or_else(|| null("gamma_hat"))?;
        let prof = lib(ExponentProfile::new(1, alpha, slice::from_raw_parts(p, m).to_vec()))?;
        *out = lib(sharpness_run(&prof, slice::from_raw_parts(eps, count)))?.gamma_hat;
        Ok(())
    })
}

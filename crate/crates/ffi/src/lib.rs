//! C interface to the pulsecraft optimizer.
//!
//! Datasets and solutions are opaque handles released with their `_free`
//! functions. Every call returns a [`PcStatus`]; on failure the message is
//! available from [`pc_last_error`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use pulsecraft::operator_assembly::TimeWindow;
use pulsecraft::pipeline::{optimize, OptimizeConfig, WindowConstraint, WindowTarget};
use pulsecraft::spectral_basis::{BandLimits, DEFAULT_BASIS_SIZE};
use pulsecraft::synthetic::{linear_grid, thz_resonator};
use pulsecraft::transfer_data::{FileFormat, TransferDataset, DEFAULT_Z_CHAR};
use pulsecraft::wire_mom::{transfer_dataset, Observation, WireModel};
use pulsecraft::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcStatus {
    Ok = 0,
    NullPointer = 1,
    Validation = 2,
    Numerical = 3,
    Infeasible = 4,
    Io = 5,
    Panic = 6,
}

impl From<&Error> for PcStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Io(_) => PcStatus::Io,
            Error::Context { source, .. } => PcStatus::from(source.as_ref()),
            _ => match e.exit_code() {
                3 => PcStatus::Numerical,
                4 => PcStatus::Infeasible,
                _ => PcStatus::Validation,
            },
        }
    }
}

/// Transfer dataset handle.
pub struct PcDataset(TransferDataset);

/// Optimization result handle.
pub struct PcSolution {
    value: f64,
    q: Vec<f64>,
    peak_intensity: f64,
    peak_time: f64,
    window_fractions: Vec<f64>,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcWindowTarget {
    Excitation = 0,
    Response = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PcWindow {
    pub fraction: f64,
    pub center_s: f64,
    pub half_width_s: f64,
    pub target: PcWindowTarget,
}

/// Optimization settings; `band_min_hz == band_max_hz == 0` selects the
/// dataset default band.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PcOptimizeParams {
    pub w0_joule: f64,
    pub t0_s: f64,
    pub basis_size: usize,
    pub band_min_hz: f64,
    pub band_max_hz: f64,
    pub windows: *const PcWindow,
    pub n_windows: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PcDipoleParams {
    pub length_m: f64,
    pub width_m: f64,
    pub fmax_hz: f64,
    pub nfreq: usize,
    /// Zero selects the default for `fmax_hz`.
    pub segments: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), (PcStatus, String)>) -> PcStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PcStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            PcStatus::Panic
        }
    }
}

fn lift(e: Error) -> (PcStatus, String) {
    (PcStatus::from(&e), e.to_string())
}

fn null(what: &str) -> (PcStatus, String) {
    (PcStatus::NullPointer, format!("{what} is null"))
}

unsafe fn path_arg<'a>(p: *const c_char) -> Result<&'a Path, (PcStatus, String)> {
    if p.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (PcStatus::Validation, "path is not valid UTF-8".to_string()))?;
    Ok(Path::new(s))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of this thread into `buf` (truncated, always
/// NUL-terminated when `len > 0`) and returns the length needed including the
/// terminator; 0 when there is no error.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn pc_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
            *buf.add(n - 1) = 0;
        }
        bytes.len()
    })
}

/// Loads a dataset from a `.json` or `.csv` file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pc_dataset_load(path: *const c_char, out: *mut *mut PcDataset) -> PcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = path_arg(path)?;
        let d = TransferDataset::load(path, FileFormat::from_path(path)).map_err(lift)?;
        *out = Box::into_raw(Box::new(PcDataset(d)));
        Ok(())
    })
}

/// Writes a dataset to a `.json` or `.csv` file.
///
/// # Safety
/// `dataset` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn pc_dataset_save(dataset: *const PcDataset, path: *const c_char) -> PcStatus {
    guard(|| {
        let d = dataset.as_ref().ok_or_else(|| null("dataset"))?;
        let path = path_arg(path)?;
        d.0.save(path, FileFormat::from_path(path)).map_err(lift)
    })
}

/// Simulates a centre-fed strip dipole and returns its incident-wave to
/// broadside far-field dataset on `nfreq` points over `[0, fmax_hz]`.
///
/// # Safety
/// `params` must point to a valid struct; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pc_dataset_dipole(params: *const PcDipoleParams, out: *mut *mut PcDataset) -> PcStatus {
    guard(|| {
        let p = params.as_ref().ok_or_else(|| null("params"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        if !(p.length_m > 0.0 && p.width_m > 0.0 && p.fmax_hz > 0.0 && p.nfreq >= 3) {
            return Err((PcStatus::Validation, "invalid dipole parameters".into()));
        }
        let segments = if p.segments == 0 {
            WireModel::default_segments(p.length_m, p.fmax_hz)
        } else {
            p.segments
        };
        let model = WireModel::dipole(p.length_m, p.width_m / 4.0, segments, [0.0; 3]).map_err(lift)?;
        let d = transfer_dataset(
            &model,
            &linear_grid(0.0, p.fmax_hz, p.nfreq),
            pulsecraft::transfer_data::DofKind::IncidentWave,
            &[Observation::theta(std::f64::consts::FRAC_PI_2, 0.0)],
            DEFAULT_Z_CHAR,
        )
        .map_err(lift)?;
        *out = Box::into_raw(Box::new(PcDataset(d)));
        Ok(())
    })
}

/// Built-in three-mode THz resonator dataset.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pc_dataset_thz_resonator(out: *mut *mut PcDataset) -> PcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = Box::into_raw(Box::new(PcDataset(thz_resonator())));
        Ok(())
    })
}

/// Reports the sample, output and port counts; any out-pointer may be null.
///
/// # Safety
/// `dataset` must be a live handle; non-null out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn pc_dataset_shape(
    dataset: *const PcDataset,
    n_freq: *mut usize,
    n_outputs: *mut usize,
    n_ports: *mut usize,
) -> PcStatus {
    guard(|| {
        let d = &dataset.as_ref().ok_or_else(|| null("dataset"))?.0;
        for (p, v) in [(n_freq, d.n_freq()), (n_outputs, d.n_outputs()), (n_ports, d.n_ports())] {
            if !p.is_null() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// # Safety
/// `dataset` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pc_dataset_free(dataset: *mut PcDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Default settings: W₀ = 1e-10 J, t₀ = 0, 120 functions per family, dataset
/// band, no windows.
#[no_mangle]
pub extern "C" fn pc_optimize_params_default() -> PcOptimizeParams {
    PcOptimizeParams {
        w0_joule: 1e-10,
        t0_s: 0.0,
        basis_size: DEFAULT_BASIS_SIZE,
        band_min_hz: 0.0,
        band_max_hz: 0.0,
        windows: ptr::null(),
        n_windows: 0,
    }
}

unsafe fn config_from(p: &PcOptimizeParams) -> Result<OptimizeConfig, (PcStatus, String)> {
    let band = if p.band_min_hz == 0.0 && p.band_max_hz == 0.0 {
        None
    } else {
        Some(BandLimits::from_hz(p.band_min_hz, p.band_max_hz).map_err(lift)?)
    };
    let raw: &[PcWindow] = if p.n_windows == 0 {
        &[]
    } else if p.windows.is_null() {
        return Err(null("windows"));
    } else {
        std::slice::from_raw_parts(p.windows, p.n_windows)
    };
    let windows = raw
        .iter()
        .map(|w| {
            let target = match w.target {
                PcWindowTarget::Excitation => WindowTarget::Excitation,
                PcWindowTarget::Response => WindowTarget::Response,
            };
            WindowConstraint::new(w.fraction, TimeWindow::new(w.center_s, w.half_width_s)?, target)
        })
        .collect::<pulsecraft::Result<Vec<_>>>()
        .map_err(lift)?;
    let config = OptimizeConfig {
        band,
        basis_size: p.basis_size,
        w0: p.w0_joule,
        t0: p.t0_s,
        windows,
    };
    config.validate().map_err(lift)?;
    Ok(config)
}

/// Maximises the response peak at `t0` for `dataset` under `params`.
///
/// # Safety
/// `dataset` must be a live handle, `params` valid (with `n_windows` readable
/// entries at `windows`), and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pc_optimize(
    dataset: *const PcDataset,
    params: *const PcOptimizeParams,
    out: *mut *mut PcSolution,
) -> PcStatus {
    guard(|| {
        let d = &dataset.as_ref().ok_or_else(|| null("dataset"))?.0;
        let p = params.as_ref().ok_or_else(|| null("params"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let config = config_from(p)?;
        let r = optimize(d, &config).map_err(lift)?;
        *out = Box::into_raw(Box::new(PcSolution {
            value: r.solution.value,
            q: r.solution.q,
            peak_intensity: r.intensity.peak,
            peak_time: r.intensity.peak_time,
            window_fractions: r.window_fractions,
        }));
        Ok(())
    })
}

/// Objective value `Σ_c |y_c(t₀)|²`.
///
/// # Safety
/// `solution` must be a live handle and `value` writable.
#[no_mangle]
pub unsafe extern "C" fn pc_solution_value(solution: *const PcSolution, value: *mut f64) -> PcStatus {
    guard(|| {
        let s = solution.as_ref().ok_or_else(|| null("solution"))?;
        *value.as_mut().ok_or_else(|| null("value"))? = s.value;
        Ok(())
    })
}

/// Peak of `Σ|y|²/Z₀` on the reconstruction grid and its time.
///
/// # Safety
/// `solution` must be a live handle; non-null out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn pc_solution_peak_intensity(
    solution: *const PcSolution,
    peak: *mut f64,
    time_s: *mut f64,
) -> PcStatus {
    guard(|| {
        let s = solution.as_ref().ok_or_else(|| null("solution"))?;
        if let Some(p) = peak.as_mut() {
            *p = s.peak_intensity;
        }
        if let Some(t) = time_s.as_mut() {
            *t = s.peak_time;
        }
        Ok(())
    })
}

/// Copies up to `len` coefficients into `buf` and stores the full count in
/// `needed` (when non-null). Pass a null `buf` to query the size.
///
/// # Safety
/// `solution` must be a live handle; `buf` null or valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn pc_solution_coefficients(
    solution: *const PcSolution,
    buf: *mut f64,
    len: usize,
    needed: *mut usize,
) -> PcStatus {
    guard(|| {
        let s = solution.as_ref().ok_or_else(|| null("solution"))?;
        if let Some(n) = needed.as_mut() {
            *n = s.q.len();
        }
        if !buf.is_null() {
            let n = len.min(s.q.len());
            ptr::copy_nonoverlapping(s.q.as_ptr(), buf, n);
        }
        Ok(())
    })
}

/// Measured energy fraction of window constraint `index`.
///
/// # Safety
/// `solution` must be a live handle and `fraction` writable.
#[no_mangle]
pub unsafe extern "C" fn pc_solution_window_fraction(
    solution: *const PcSolution,
    index: usize,
    fraction: *mut f64,
) -> PcStatus {
    guard(|| {
        let s = solution.as_ref().ok_or_else(|| null("solution"))?;
        let f = s
            .window_fractions
            .get(index)
            .ok_or_else(|| (PcStatus::Validation, format!("no window constraint {index}")))?;
        *fraction.as_mut().ok_or_else(|| null("fraction"))? = *f;
        Ok(())
    })
}

/// # Safety
/// `solution` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pc_solution_free(solution: *mut PcSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

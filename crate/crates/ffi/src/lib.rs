//! C interface to the `vardiss` simulator.
//!
//! Every function returns a [`VdStatus`]; on failure a message is available
//! from [`vd_last_error_message`] on the calling thread. Handles are opaque
//! and must be released with their matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::slice;

use vardiss::channels::{NoiseKind, NoiseLocation, NoiseSpec};
use vardiss::cli::{load_config, run};
use vardiss::engine::{make_loss, DvqeConfig, RecoveryConfig, TaskConfig, TaskLoss};
use vardiss::hamiltonian::{ground_energy, BenchmarkModel, PauliHamiltonian};
use vardiss::optim::{init_params, train, Objective};
use vardiss::states::{default_dressed_cluster_state, plus_state, w_state};
use vardiss::Error;

/// Result code of every exported function.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    ParameterCount = 4,
    Parse = 5,
    Config = 6,
    Numerical = 7,
    Io = 8,
    /// The run finished but at least one sub-run failed.
    RunFailed = 9,
    Panic = 99,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VdNoiseKind {
    None = 0,
    Depolarizing = 1,
    BitFlip = 2,
    AmplitudeDamping = 3,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VdTarget {
    W = 0,
    Plus = 1,
    DressedCluster = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VdModel {
    H1 = 1,
    H2 = 2,
    H3 = 3,
}

/// Opaque Pauli-sum Hamiltonian.
pub struct VdHamiltonian {
    inner: PauliHamiltonian,
}

/// Opaque training objective (ground-state search or recovery).
pub struct VdObjective {
    inner: TaskLoss,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(err: &Error) -> VdStatus {
    match err {
        Error::DimensionMismatch(_) => VdStatus::DimensionMismatch,
        Error::InvalidArgument(_) | Error::SizeCap(_) | Error::Completeness(_) | Error::NotUnitary(_) => {
            VdStatus::InvalidArgument
        }
        Error::Numerical(_) => VdStatus::Numerical,
        Error::ParameterCount { .. } => VdStatus::ParameterCount,
        Error::Parse { .. } => VdStatus::Parse,
        Error::Config(_) => VdStatus::Config,
        Error::Io(_) => VdStatus::Io,
    }
}

/// Runs `f`, mapping errors and panics to status codes.
fn guard<F>(f: F) -> VdStatus
where
    F: FnOnce() -> Result<(), (VdStatus, String)>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            VdStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            VdStatus::Panic
        }
    }
}

fn lift(err: Error) -> (VdStatus, String) {
    let msg = match &err {
        Error::Config(problems) => problems.join("; "),
        other => other.to_string(),
    };
    (status_of(&err), msg)
}

fn null(what: &str) -> (VdStatus, String) {
    (VdStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (VdStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (VdStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], (VdStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn slice_mut_arg<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], (VdStatus, String)> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

fn noise_kind(kind: VdNoiseKind) -> NoiseKind {
    match kind {
        VdNoiseKind::None => NoiseKind::None,
        VdNoiseKind::Depolarizing => NoiseKind::Depolarizing,
        VdNoiseKind::BitFlip => NoiseKind::BitFlip,
        VdNoiseKind::AmplitudeDamping => NoiseKind::AmplitudeDamping,
    }
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated).
///
/// Returns the message length in bytes excluding the terminator. When `buf` is
/// null or `len` is too small, nothing is written; call again with a larger buffer.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn vd_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > bytes.len() {
            ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, bytes.len());
            *buf.add(bytes.len()) = 0;
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn vd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Parses the `coeff LABEL` per-line text format.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vd_hamiltonian_parse(text: *const c_char, out: *mut *mut VdHamiltonian) -> VdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let h: PauliHamiltonian = str_arg(text, "text")?.parse().map_err(lift)?;
        *out = Box::into_raw(Box::new(VdHamiltonian { inner: h }));
        Ok(())
    })
}

/// One of the benchmark chains on `n` qubits.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vd_hamiltonian_benchmark(model: VdModel, n: usize, out: *mut *mut VdHamiltonian) -> VdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let model = match model {
            VdModel::H1 => BenchmarkModel::H1,
            VdModel::H2 => BenchmarkModel::H2,
            VdModel::H3 => BenchmarkModel::H3,
        };
        let h = model.build(n).map_err(lift)?;
        *out = Box::into_raw(Box::new(VdHamiltonian { inner: h }));
        Ok(())
    })
}

/// # Safety
/// `h` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vd_hamiltonian_qubits(h: *const VdHamiltonian, out: *mut usize) -> VdStatus {
    guard(|| {
        let h = h.as_ref().ok_or_else(|| null("h"))?;
        *out.as_mut().ok_or_else(|| null("out"))? = h.inner.qubit_count();
        Ok(())
    })
}

/// Exact ground energy by dense diagonalization (up to 12 qubits).
///
/// # Safety
/// `h` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vd_hamiltonian_ground_energy(h: *const VdHamiltonian, out: *mut f64) -> VdStatus {
    guard(|| {
        let h = h.as_ref().ok_or_else(|| null("h"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = ground_energy(&h.inner).map_err(lift)?.0;
        Ok(())
    })
}

/// # Safety
/// `h` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vd_hamiltonian_free(h: *mut VdHamiltonian) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Ground-state search objective on the system of `h`.
///
/// `m = 0` requires `rounds = 0`. Noise is applied after every gate.
///
/// # Safety
/// `h` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vd_objective_dvqe(
    h: *const VdHamiltonian,
    m: usize,
    rounds: usize,
    vqe_layers: usize,
    noise: VdNoiseKind,
    p: f64,
    out: *mut *mut VdObjective,
) -> VdStatus {
    guard(|| {
        let h = h.as_ref().ok_or_else(|| null("h"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let mut cfg = DvqeConfig::new(h.inner.qubit_count(), m, rounds, h.inner.clone());
        cfg.vqe_layers = vqe_layers;
        cfg.noise = NoiseSpec::new(noise_kind(noise), p, NoiseLocation::FullyNoisy).map_err(lift)?;
        let loss = make_loss(&TaskConfig::Dvqe(cfg)).map_err(lift)?;
        *out = Box::into_raw(Box::new(VdObjective { inner: loss }));
        Ok(())
    })
}

/// Recovery objective for an `n`-qubit target whose input carries preparation
/// noise `(prep, p)` on every qubit.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vd_objective_recovery(
    target: VdTarget,
    n: usize,
    m: usize,
    rounds: usize,
    prep: VdNoiseKind,
    p: f64,
    out: *mut *mut VdObjective,
) -> VdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let target = match target {
            VdTarget::W => w_state(n),
            VdTarget::Plus => plus_state(n),
            VdTarget::DressedCluster => default_dressed_cluster_state(n),
        }
        .map_err(lift)?;
        let prep = NoiseSpec::new(noise_kind(prep), p, NoiseLocation::InputOnly).map_err(lift)?;
        let cfg = RecoveryConfig::new(m, rounds, target, prep);
        let loss = make_loss(&TaskConfig::Recovery(cfg)).map_err(lift)?;
        *out = Box::into_raw(Box::new(VdObjective { inner: loss }));
        Ok(())
    })
}

/// # Safety
/// `obj` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vd_objective_param_count(obj: *const VdObjective, out: *mut usize) -> VdStatus {
    guard(|| {
        let obj = obj.as_ref().ok_or_else(|| null("obj"))?;
        *out.as_mut().ok_or_else(|| null("out"))? = obj.inner.param_count();
        Ok(())
    })
}

/// Seeded initial parameters, uniform on `[-pi, pi)`.
///
/// # Safety
/// `obj` must be a live handle; `theta` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn vd_objective_init_params(
    obj: *const VdObjective,
    seed: u64,
    theta: *mut f64,
    len: usize,
) -> VdStatus {
    guard(|| {
        let obj = obj.as_ref().ok_or_else(|| null("obj"))?;
        let theta = slice_mut_arg(theta, len, "theta")?;
        let count = obj.inner.param_count();
        if len != count {
            return Err(lift(Error::ParameterCount { expected: count, got: len }));
        }
        theta.copy_from_slice(&init_params(count, seed));
        Ok(())
    })
}

/// Energy (ground-state search) or infidelity (recovery) at `theta`.
///
/// # Safety
/// `obj` must be a live handle; `theta` must hold `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vd_objective_loss(
    obj: *const VdObjective,
    theta: *const f64,
    len: usize,
    out: *mut f64,
) -> VdStatus {
    guard(|| {
        let obj = obj.as_ref().ok_or_else(|| null("obj"))?;
        let theta = slice_arg(theta, len, "theta")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = obj.inner.loss(theta).map_err(lift)?;
        Ok(())
    })
}

/// Loss and exact gradient at `theta`; `grad` receives `len` entries.
///
/// # Safety
/// `theta` and `grad` must each hold `len` doubles; `loss` may be null.
#[no_mangle]
pub unsafe extern "C" fn vd_objective_gradient(
    obj: *const VdObjective,
    theta: *const f64,
    len: usize,
    grad: *mut f64,
    loss: *mut f64,
) -> VdStatus {
    guard(|| {
        let obj = obj.as_ref().ok_or_else(|| null("obj"))?;
        let theta = slice_arg(theta, len, "theta")?;
        let grad = slice_mut_arg(grad, len, "grad")?;
        let (l, g) = obj.inner.loss_and_gradient(theta).map_err(lift)?;
        grad.copy_from_slice(&g);
        if let Some(loss) = loss.as_mut() {
            *loss = l;
        }
        Ok(())
    })
}

/// Plain gradient descent from `theta`, updated in place.
///
/// `losses` may be null; otherwise it receives `iterations` per-step losses.
/// `final_loss` may be null.
///
/// # Safety
/// `theta` must hold `len` doubles; `losses`, when non-null, `iterations` doubles.
#[no_mangle]
pub unsafe extern "C" fn vd_train(
    obj: *const VdObjective,
    theta: *mut f64,
    len: usize,
    learning_rate: f64,
    iterations: usize,
    losses: *mut f64,
    final_loss: *mut f64,
) -> VdStatus {
    guard(|| {
        let obj = obj.as_ref().ok_or_else(|| null("obj"))?;
        let theta = slice_mut_arg(theta, len, "theta")?;
        let trace = train(&obj.inner, theta.to_vec(), learning_rate, iterations, &mut []).map_err(lift)?;
        theta.copy_from_slice(&trace.final_params);
        if !losses.is_null() {
            let out = slice::from_raw_parts_mut(losses, iterations);
            for (i, slot) in out.iter_mut().enumerate() {
                *slot = trace.records.get(i).map_or(f64::NAN, |r| r.loss);
            }
        }
        if let Some(reason) = trace.abort {
            return Err((VdStatus::Numerical, reason));
        }
        if let Some(f) = final_loss.as_mut() {
            *f = trace.final_loss.unwrap_or(f64::NAN);
        }
        Ok(())
    })
}

/// # Safety
/// `obj` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vd_objective_free(obj: *mut VdObjective) {
    if !obj.is_null() {
        drop(Box::from_raw(obj));
    }
}

/// Runs a TOML experiment config, writing outputs like the command-line tool.
///
/// # Safety
/// `config_path` must be a NUL-terminated path.
#[no_mangle]
pub unsafe extern "C" fn vd_run_config(config_path: *const c_char) -> VdStatus {
    guard(|| {
        let path = str_arg(config_path, "config_path")?;
        let cfg = load_config(Path::new(path)).map_err(lift)?;
        let outcome = run(&cfg).map_err(lift)?;
        if !outcome.success() {
            let msgs: Vec<String> = outcome.errors.iter().map(|e| format!("{}: {}", e.variant, e.message)).collect();
            return Err((VdStatus::RunFailed, msgs.join("; ")));
        }
        Ok(())
    })
}

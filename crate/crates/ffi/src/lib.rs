//! C interface to the sigcorrect library.
//!
//! Objects are opaque heap handles released with their `_free` function.
//! Every call returns an [`ScStatus`]; on failure the message is kept per
//! thread and can be read with [`sc_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use sigcorrect::correction::{correct, CorrectionOptions, CorrectionOutcome, DEFAULT_BIT_CAP};
use sigcorrect::estimator::{estimate, EstimatorInput};
use sigcorrect::fault::{inject, FaultSpec};
use sigcorrect::knowledge::{Encoding, ReducedParams, Tally};
use sigcorrect::packing::{pack_public_key, pack_secret_key_words, pack_signature, unpack_public_key};
use sigcorrect::scheme::{keygen, sign, verify, PublicKey, SecretKey, SignMode, DEFAULT_KAPPA_CAP};
use sigcorrect::{Error, ParameterSet, Revision};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    BufferTooSmall = 4,
    InvalidSignature = 5,
    LoopExhausted = 6,
    NoFaultDetected = 7,
    NotFound = 8,
    Infeasible = 9,
    Internal = 10,
    Panic = 11,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScRevision {
    V30 = 0,
    V31 = 1,
}

impl From<ScRevision> for Revision {
    fn from(r: ScRevision) -> Self {
        match r {
            ScRevision::V30 => Revision::V30,
            ScRevision::V31 => Revision::V31,
        }
    }
}

/// Key pair; the secret half may carry injected faults.
pub struct ScKeyPair {
    pk: PublicKey,
    sk: SecretKey,
}

pub struct ScPublicKey {
    pk: PublicKey,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ScRecoveredBit {
    pub row: u32,
    pub col: u32,
    /// 1-based bit index within the 32-bit word.
    pub bit_index: u32,
    /// Bit value before the fault.
    pub value: u8,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ScAttackCost {
    pub m: u32,
    pub b: u32,
    pub classical_bits: u32,
    pub quantum_bits: u32,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ScSecurityEstimate {
    pub primal: ScAttackCost,
    pub dual: ScAttackCost,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> ScStatus {
    match e {
        Error::InvalidParameter(_) | Error::NoOpFlip { .. } => ScStatus::InvalidArgument,
        Error::Parse { .. } | Error::Json(_) | Error::Csv(_) => ScStatus::Parse,
        Error::Infeasible { .. } => ScStatus::Infeasible,
        Error::Stage { source, .. } => status_of(source),
        _ => ScStatus::Internal,
    }
}

fn guard(f: impl FnOnce() -> Result<ScStatus, (ScStatus, String)>) -> ScStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(s)) => s,
        Ok(Err((s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("panic inside sigcorrect".into());
            ScStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (ScStatus, String) {
    (status_of(&e), e.to_string())
}

fn null() -> (ScStatus, String) {
    (ScStatus::NullPointer, "null pointer argument".into())
}

unsafe fn bytes<'a>(p: *const u8, len: usize) -> Result<&'a [u8], (ScStatus, String)> {
    if len == 0 {
        Ok(&[])
    } else if p.is_null() {
        Err(null())
    } else {
        Ok(slice::from_raw_parts(p, len))
    }
}

unsafe fn write_out(data: &[u8], out: *mut u8, cap: usize, written: *mut usize) -> Result<ScStatus, (ScStatus, String)> {
    if written.is_null() {
        return Err(null());
    }
    *written = data.len();
    if data.len() > cap {
        return Err((
            ScStatus::BufferTooSmall,
            format!("need {} bytes, buffer holds {cap}", data.len()),
        ));
    }
    if !data.is_empty() {
        if out.is_null() {
            return Err(null());
        }
        ptr::copy_nonoverlapping(data.as_ptr(), out, data.len());
    }
    Ok(ScStatus::Ok)
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn sc_status_string(status: ScStatus) -> *const c_char {
    let s: &'static [u8] = match status {
        ScStatus::Ok => b"ok\0",
        ScStatus::NullPointer => b"null pointer\0",
        ScStatus::InvalidArgument => b"invalid argument\0",
        ScStatus::Parse => b"parse error\0",
        ScStatus::BufferTooSmall => b"buffer too small\0",
        ScStatus::InvalidSignature => b"invalid signature\0",
        ScStatus::LoopExhausted => b"signing loop exhausted\0",
        ScStatus::NoFaultDetected => b"no fault detected\0",
        ScStatus::NotFound => b"no correction found\0",
        ScStatus::Infeasible => b"infeasible\0",
        ScStatus::Internal => b"internal error\0",
        ScStatus::Panic => b"panic\0",
    };
    s.as_ptr().cast()
}

/// Signature length in bytes for a security level, or 0 if unknown.
#[no_mangle]
pub extern "C" fn sc_signature_size(level: u8) -> usize {
    ParameterSet::for_level(level, Revision::V30).map_or(0, |p| p.signature_bytes())
}

/// # Safety
/// `seed` points to 32 readable bytes; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn sc_keypair_generate(
    level: u8,
    revision: ScRevision,
    seed: *const u8,
    out: *mut *mut ScKeyPair,
) -> ScStatus {
    guard(|| {
        if seed.is_null() || out.is_null() {
            return Err(null());
        }
        let params = ParameterSet::for_level(level, revision.into()).map_err(lib_err)?;
        let seed: &[u8; 32] = &*seed.cast();
        let (pk, sk) = keygen(seed, &params);
        *out = Box::into_raw(Box::new(ScKeyPair { pk, sk }));
        Ok(ScStatus::Ok)
    })
}

/// # Safety
/// `kp` is null or a handle from [`sc_keypair_generate`], freed once.
#[no_mangle]
pub unsafe extern "C" fn sc_keypair_free(kp: *mut ScKeyPair) {
    if !kp.is_null() {
        drop(Box::from_raw(kp));
    }
}

/// Packed public key. `written` receives the full length even when the
/// buffer is too small.
///
/// # Safety
/// `kp` is a live handle; `out` has `cap` writable bytes; `written` is writable.
#[no_mangle]
pub unsafe extern "C" fn sc_keypair_public_key(
    kp: *const ScKeyPair,
    out: *mut u8,
    cap: usize,
    written: *mut usize,
) -> ScStatus {
    guard(|| {
        let kp = kp.as_ref().ok_or_else(null)?;
        write_out(&pack_public_key(&kp.pk), out, cap, written)
    })
}

/// Secret key with `s1` as 32-bit words, so injected faults survive.
///
/// # Safety
/// As [`sc_keypair_public_key`].
#[no_mangle]
pub unsafe extern "C" fn sc_keypair_secret_key_words(
    kp: *const ScKeyPair,
    out: *mut u8,
    cap: usize,
    written: *mut usize,
) -> ScStatus {
    guard(|| {
        let kp = kp.as_ref().ok_or_else(null)?;
        write_out(&pack_secret_key_words(&kp.sk), out, cap, written)
    })
}

/// Flip bit `bit_pos` of stored `s1[row][col]`.
///
/// # Safety
/// `kp` is a live handle not used concurrently.
#[no_mangle]
pub unsafe extern "C" fn sc_keypair_inject(kp: *mut ScKeyPair, row: u32, col: u32, bit_pos: u32) -> ScStatus {
    guard(|| {
        let kp = kp.as_mut().ok_or_else(null)?;
        let p = kp.sk.params;
        if row as usize >= p.l || col as usize >= p.n || bit_pos >= 32 {
            return Err((
                ScStatus::InvalidArgument,
                format!("fault site ({row}, {col}, {bit_pos}) out of range"),
            ));
        }
        let spec = FaultSpec::effective(&kp.sk, row as usize, col as usize, bit_pos);
        kp.sk = inject(&kp.sk, &spec).map_err(lib_err)?;
        Ok(ScStatus::Ok)
    })
}

/// Deterministic signature with the default attempt cap.
///
/// # Safety
/// `kp` is a live handle; `msg` has `msg_len` readable bytes; output as
/// [`sc_keypair_public_key`].
#[no_mangle]
pub unsafe extern "C" fn sc_sign(
    kp: *const ScKeyPair,
    msg: *const u8,
    msg_len: usize,
    sig: *mut u8,
    cap: usize,
    written: *mut usize,
) -> ScStatus {
    guard(|| {
        let kp = kp.as_ref().ok_or_else(null)?;
        let msg = bytes(msg, msg_len)?;
        match sign(&kp.sk, msg, SignMode::Deterministic, DEFAULT_KAPPA_CAP).signature() {
            Some(s) => write_out(&pack_signature(&s).map_err(lib_err)?, sig, cap, written),
            None => Err((ScStatus::LoopExhausted, "signing loop exhausted".into())),
        }
    })
}

/// # Safety
/// `bytes` has `len` readable bytes; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn sc_public_key_from_bytes(
    revision: ScRevision,
    data: *const u8,
    len: usize,
    out: *mut *mut ScPublicKey,
) -> ScStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        let data = bytes(data, len)?;
        let params = ParameterSet::from_public_key_len(len, revision.into())
            .ok_or_else(|| (ScStatus::InvalidArgument, format!("no parameter set has a {len}-byte public key")))?;
        let pk = unpack_public_key(&params, data).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(ScPublicKey { pk }));
        Ok(ScStatus::Ok)
    })
}

/// Public half of a key pair as a standalone handle.
///
/// # Safety
/// `kp` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn sc_keypair_public(kp: *const ScKeyPair, out: *mut *mut ScPublicKey) -> ScStatus {
    guard(|| {
        let kp = kp.as_ref().ok_or_else(null)?;
        if out.is_null() {
            return Err(null());
        }
        *out = Box::into_raw(Box::new(ScPublicKey { pk: kp.pk.clone() }));
        Ok(ScStatus::Ok)
    })
}

/// # Safety
/// `pk` is null or a public-key handle, freed once.
#[no_mangle]
pub unsafe extern "C" fn sc_public_key_free(pk: *mut ScPublicKey) {
    if !pk.is_null() {
        drop(Box::from_raw(pk));
    }
}

/// `Ok` for a valid signature, `InvalidSignature` otherwise.
///
/// # Safety
/// `pk` is a live handle; buffers have the given lengths.
#[no_mangle]
pub unsafe extern "C" fn sc_verify(
    pk: *const ScPublicKey,
    msg: *const u8,
    msg_len: usize,
    sig: *const u8,
    sig_len: usize,
) -> ScStatus {
    guard(|| {
        let pk = pk.as_ref().ok_or_else(null)?;
        if verify(&pk.pk, bytes(msg, msg_len)?, bytes(sig, sig_len)?) {
            Ok(ScStatus::Ok)
        } else {
            Ok(ScStatus::InvalidSignature)
        }
    })
}

/// Locate the single `s1` bit flip behind a faulty signature, scanning bit
/// indices up to `bit_cap` (0 selects the default). `oracle_calls` may be
/// null.
///
/// # Safety
/// `pk` is a live handle; buffers have the given lengths; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn sc_correct(
    pk: *const ScPublicKey,
    msg: *const u8,
    msg_len: usize,
    sig: *const u8,
    sig_len: usize,
    bit_cap: u32,
    out: *mut ScRecoveredBit,
    oracle_calls: *mut u64,
) -> ScStatus {
    guard(|| {
        let pk = pk.as_ref().ok_or_else(null)?;
        if out.is_null() {
            return Err(null());
        }
        let options = CorrectionOptions {
            bit_cap: if bit_cap == 0 { DEFAULT_BIT_CAP } else { bit_cap },
            ..Default::default()
        };
        let report = correct(bytes(sig, sig_len)?, bytes(msg, msg_len)?, &pk.pk, &options).map_err(lib_err)?;
        if !oracle_calls.is_null() {
            *oracle_calls = report.oracle_calls;
        }
        Ok(match report.outcome {
            CorrectionOutcome::Recovered(b) => {
                *out = ScRecoveredBit {
                    row: b.row as u32,
                    col: b.col as u32,
                    bit_index: b.bit_index,
                    value: b.value,
                };
                ScStatus::Ok
            }
            CorrectionOutcome::NoFaultDetected => ScStatus::NoFaultDetected,
            CorrectionOutcome::NotFound { .. } => ScStatus::NotFound,
        })
    })
}

/// `n_bar` and `zeta` from coefficient counts indexed by known bits, for
/// secrets in `[-eta, eta]`. `counts_len` must be the encoding width + 1.
///
/// # Safety
/// `counts` has `counts_len` readable entries; outputs are writable.
#[no_mangle]
pub unsafe extern "C" fn sc_reduced_params(
    eta: i32,
    counts: *const usize,
    counts_len: usize,
    n_bar: *mut usize,
    zeta: *mut f64,
) -> ScStatus {
    guard(|| {
        if counts.is_null() || n_bar.is_null() || zeta.is_null() {
            return Err(null());
        }
        if eta < 1 {
            return Err((ScStatus::InvalidArgument, format!("eta must be positive, got {eta}")));
        }
        let enc = Encoding::new(eta);
        if counts_len != enc.width as usize + 1 {
            return Err((
                ScStatus::InvalidArgument,
                format!("expected {} counts, got {counts_len}", enc.width + 1),
            ));
        }
        let tally = Tally {
            by_known_bits: slice::from_raw_parts(counts, counts_len).to_vec(),
            conflicts: 0,
        };
        let r = ReducedParams::from_tally(&enc, &tally);
        *n_bar = r.n_bar;
        *zeta = r.zeta;
        Ok(ScStatus::Ok)
    })
}

/// Primal and dual attack cost at the default modulus and sample range.
///
/// # Safety
/// `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn sc_estimate(n_bar: u32, zeta: f64, out: *mut ScSecurityEstimate) -> ScStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        let e = estimate(&EstimatorInput::new(n_bar, zeta)).map_err(lib_err)?;
        let conv = |c: &sigcorrect::estimator::AttackCost| ScAttackCost {
            m: c.m,
            b: c.b,
            classical_bits: c.classical_bits,
            quantum_bits: c.quantum_bits,
        };
        *out = ScSecurityEstimate {
            primal: conv(&e.primal),
            dual: conv(&e.dual),
        };
        Ok(ScStatus::Ok)
    })
}

//! Signature correction: locate a single flipped `s1` bit from a faulty
//! signature, the message and the public key.
//!
//! A flip of bit `p` in word `(row, col)` changes `s1[row]` by `±2^p x^col`,
//! so the released `z'` differs from a valid `z` by `∓2^p c x^col` in that
//! one polynomial. The scan adds each such term back and asks the
//! verification oracle.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fault::FaultEvent;
use crate::packing::{pack_signature, unpack_signature};
use crate::params::N;
use crate::poly::{Poly, PolyVec};
use crate::scheme::{PublicKey, Signature, Verifier};
use crate::xof::sample_in_ball;

/// Default highest `bit_index` scanned.
pub const DEFAULT_BIT_CAP: u32 = 18;

/// A located bit. `bit_index` is 1-based: the correction multiplier is
/// `2^(bit_index - 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RecoveredBit {
    pub row: usize,
    pub col: usize,
    pub bit_index: u32,
    /// The bit before the fault.
    pub value: u8,
}

impl RecoveredBit {
    pub fn bit_pos(&self) -> u32 {
        self.bit_index - 1
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CorrectionOutcome {
    Recovered(RecoveredBit),
    NoFaultDetected,
    NotFound { attempts: u64 },
}

/// Outcome plus the number of oracle queries the scan made.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrectionReport {
    pub outcome: CorrectionOutcome,
    pub oracle_calls: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    /// Repack every candidate and run full verification.
    Full,
    /// Update `A z - c t1 2^d` by the candidate's rank-one change.
    #[default]
    Incremental,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CorrectionOptions {
    pub bit_cap: u32,
    pub oracle: OracleKind,
}

impl Default for CorrectionOptions {
    fn default() -> Self {
        Self {
            bit_cap: DEFAULT_BIT_CAP,
            oracle: OracleKind::Incremental,
        }
    }
}

/// `2^(bit_index - 1) * c * x^col` in `R_q`.
pub fn correction_term(c: &Poly, col: usize, bit_index: u32) -> Poly {
    assert!(col < N && (1..=32).contains(&bit_index));
    c.monomial_shift(col, 1i64 << (bit_index - 1))
}

/// Pre-fault bit implied by the sign of the accepted correction.
///
/// Clearing bit `p < 31` lowers the word by `2^p`, which the `+` branch
/// undoes. The sign bit has weight `-2^31`, so there the roles swap.
fn original_bit(bit_index: u32, plus: bool) -> u8 {
    u8::from(plus != (bit_index == 32))
}

struct Scan<'a> {
    verifier: &'a Verifier,
    sig: &'a Signature,
    c: Poly,
    bound: i32,
    /// `A z' - c t1 2^d`, only for the incremental oracle.
    w_base: Option<PolyVec>,
}

impl<'a> Scan<'a> {
    fn new(verifier: &'a Verifier, sig: &'a Signature, oracle: OracleKind) -> Self {
        let p = verifier.params();
        let c = sample_in_ball(p, &sig.c_tilde);
        let w_base = (oracle == OracleKind::Incremental).then(|| verifier.w_approx(&sig.z, &c));
        Self {
            verifier,
            sig,
            c,
            bound: p.gamma1 - p.beta,
            w_base,
        }
    }

    /// `A[:, row] * c`, the image of a unit change in `s1[row]`.
    fn column_image(&self, row: usize) -> PolyVec {
        let c_hat = self.c.ntt();
        self.verifier
            .a_hat
            .iter()
            .map(|a_row| a_row[row].pointwise(&c_hat).inverse())
            .collect::<Vec<_>>()
    }

    fn check(&self, row: usize, col: usize, bit_index: u32, plus: bool, z_row: &Poly, image: Option<&PolyVec>) -> bool {
        match (&self.w_base, image) {
            (Some(base), Some(image)) => {
                let scale = (if plus { 1i64 } else { -1 }) << (bit_index - 1);
                let w: PolyVec = base
                    .iter()
                    .zip(image)
                    .map(|(b, u)| b.add(&u.monomial_shift(col, scale)))
                    .collect();
                self.verifier.recompute_challenge(&w, &self.sig.h) == self.sig.c_tilde
            }
            _ => {
                let mut cand = self.sig.clone();
                cand.z[row] = *z_row;
                match pack_signature(&cand) {
                    Ok(bytes) => self.verifier.verify_bytes(&bytes),
                    Err(_) => false,
                }
            }
        }
    }

    fn run(&self, bit_cap: u32) -> CorrectionReport {
        let p = self.verifier.params();
        let mut calls = 0u64;
        for bit_index in 1..=bit_cap {
            for row in 0..p.l {
                let image = self.w_base.as_ref().map(|_| self.column_image(row));
                for col in 0..N {
                    let term = correction_term(&self.c, col, bit_index);
                    for plus in [true, false] {
                        let z_row = if plus {
                            self.sig.z[row].add(&term)
                        } else {
                            self.sig.z[row].sub(&term)
                        };
                        // cannot be the z that passed rejection sampling
                        if !z_row.norm_below(self.bound) {
                            continue;
                        }
                        calls += 1;
                        if self.check(row, col, bit_index, plus, &z_row, image.as_ref()) {
                            return CorrectionReport {
                                outcome: CorrectionOutcome::Recovered(RecoveredBit {
                                    row,
                                    col,
                                    bit_index,
                                    value: original_bit(bit_index, plus),
                                }),
                                oracle_calls: calls,
                            };
                        }
                    }
                }
            }
        }
        CorrectionReport {
            outcome: CorrectionOutcome::NotFound { attempts: calls },
            oracle_calls: calls,
        }
    }
}

/// Upper bound on oracle calls for one correction.
pub fn max_oracle_calls(l: usize, bit_cap: u32) -> u64 {
    2 * bit_cap as u64 * l as u64 * N as u64
}

/// Correct a faulty signature against a prepared verifier for `(pk, msg)`.
pub fn correct_with(verifier: &Verifier, sig: &[u8], options: &CorrectionOptions) -> Result<CorrectionReport> {
    if !(1..=32).contains(&options.bit_cap) {
        return Err(Error::InvalidParameter(format!(
            "bit cap {} outside 1..=32",
            options.bit_cap
        )));
    }
    let parsed = unpack_signature(verifier.params(), sig)?;
    if verifier.verify_signature(&parsed) {
        return Ok(CorrectionReport {
            outcome: CorrectionOutcome::NoFaultDetected,
            oracle_calls: 0,
        });
    }
    Ok(Scan::new(verifier, &parsed, options.oracle).run(options.bit_cap))
}

pub fn correct(sig: &[u8], msg: &[u8], pk: &PublicKey, options: &CorrectionOptions) -> Result<CorrectionReport> {
    correct_with(&Verifier::new(pk, msg), sig, options)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    Dos,
    Suppressed,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum BatchOutcome {
    Recovered { bit: RecoveredBit, oracle_calls: u64 },
    NoFaultDetected,
    NotFound { attempts: u64 },
    Skipped { reason: SkipReason },
    Error { message: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchEntry {
    pub event_id: u64,
    #[serde(flatten)]
    pub outcome: BatchOutcome,
}

fn correct_event(event: &FaultEvent, pk: &PublicKey, options: &CorrectionOptions) -> BatchOutcome {
    if event.dos {
        return BatchOutcome::Skipped { reason: SkipReason::Dos };
    }
    let Some(sig) = event.signature() else {
        return BatchOutcome::Skipped {
            reason: SkipReason::Suppressed,
        };
    };
    let run = || -> Result<CorrectionReport> { correct(&sig?, &event.message()?, pk, options) };
    match run() {
        Ok(CorrectionReport {
            outcome: CorrectionOutcome::Recovered(bit),
            oracle_calls,
        }) => BatchOutcome::Recovered { bit, oracle_calls },
        Ok(CorrectionReport {
            outcome: CorrectionOutcome::NoFaultDetected,
            ..
        }) => BatchOutcome::NoFaultDetected,
        Ok(CorrectionReport {
            outcome: CorrectionOutcome::NotFound { attempts },
            ..
        }) => BatchOutcome::NotFound { attempts },
        Err(e) => BatchOutcome::Error { message: e.to_string() },
    }
}

/// Correct every event of a fault log. Output order follows the log, and
/// does not depend on `parallelism`.
pub fn batch_correct(
    events: &[FaultEvent],
    pk: &PublicKey,
    options: &CorrectionOptions,
    parallelism: usize,
) -> Result<Vec<BatchEntry>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok(pool.install(|| {
        events
            .par_iter()
            .map(|e| BatchEntry {
                event_id: e.event_id,
                outcome: correct_event(e, pk, options),
            })
            .collect()
    }))
}

/// One line of `recovered.jsonl`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecoveredRecord {
    pub event_id: u64,
    pub row: usize,
    pub col: usize,
    pub bit_index: u32,
    pub value: u8,
}

impl RecoveredRecord {
    pub fn bit(&self) -> RecoveredBit {
        RecoveredBit {
            row: self.row,
            col: self.col,
            bit_index: self.bit_index,
            value: self.value,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub events: usize,
    pub recovered: usize,
    pub no_fault_detected: usize,
    pub not_found: usize,
    pub skipped_dos: usize,
    pub skipped_suppressed: usize,
    pub errors: usize,
    pub oracle_calls: u64,
    pub bit_cap: u32,
    pub wall_time_ms: u128,
}

pub fn recovered_records(entries: &[BatchEntry]) -> Vec<RecoveredRecord> {
    entries
        .iter()
        .filter_map(|e| match &e.outcome {
            BatchOutcome::Recovered { bit, .. } => Some(RecoveredRecord {
                event_id: e.event_id,
                row: bit.row,
                col: bit.col,
                bit_index: bit.bit_index,
                value: bit.value,
            }),
            _ => None,
        })
        .collect()
}

pub fn summarize(entries: &[BatchEntry], bit_cap: u32, started: Instant) -> BatchSummary {
    let mut s = BatchSummary {
        events: entries.len(),
        bit_cap,
        ..Default::default()
    };
    for e in entries {
        match &e.outcome {
            BatchOutcome::Recovered { oracle_calls, .. } => {
                s.recovered += 1;
                s.oracle_calls += oracle_calls;
            }
            BatchOutcome::NoFaultDetected => s.no_fault_detected += 1,
            BatchOutcome::NotFound { attempts } => {
                s.not_found += 1;
                s.oracle_calls += attempts;
            }
            BatchOutcome::Skipped { reason: SkipReason::Dos } => s.skipped_dos += 1,
            BatchOutcome::Skipped {
                reason: SkipReason::Suppressed,
            } => s.skipped_suppressed += 1,
            BatchOutcome::Error { .. } => s.errors += 1,
        }
    }
    s.wall_time_ms = started.elapsed().as_millis();
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fault::{inject, FaultSpec, FlipDirection};
    use crate::params::{ParameterSet, Revision};
    use crate::scheme::{keygen, sign, verify, SecretKey, SignMode, SignOutcome};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn keys() -> (PublicKey, SecretKey) {
        keygen(&[33u8; 32], &ParameterSet::dilithium2(Revision::V30))
    }

    fn faulty_signature(sk: &SecretKey, f: &FaultSpec, msg: &[u8]) -> Option<(Vec<u8>, u32)> {
        match sign(&inject(sk, f).unwrap(), msg, SignMode::Deterministic, 1000) {
            SignOutcome::Signed { signature, kappa_used } => Some((pack_signature(&signature).unwrap(), kappa_used)),
            SignOutcome::LoopExhausted { .. } => None,
        }
    }

    #[test]
    fn term_basics() {
        let p = ParameterSet::dilithium2(Revision::V30);
        let c = sample_in_ball(&p, &[4u8; 32]);
        assert_eq!(correction_term(&c, 0, 1), c);
        for col in [0, 17, 255] {
            assert_eq!(correction_term(&c, col, 2), correction_term(&c, col, 1).scale(2));
        }
        assert_eq!(correction_term(&c, 3, 1), c.mul_schoolbook(&Poly::monomial(3, 1)));
    }

    #[test]
    fn valid_signature_is_not_faulty() {
        let (pk, sk) = keys();
        let sig = pack_signature(&sign(&sk, b"m", SignMode::Deterministic, 1000).signature().unwrap()).unwrap();
        let r = correct(&sig, b"m", &pk, &CorrectionOptions::default()).unwrap();
        assert_eq!(r.outcome, CorrectionOutcome::NoFaultDetected);
    }

    #[test]
    fn locates_known_flip() {
        let p = ParameterSet::dilithium2(Revision::V30);
        let (pk, sk) = (0u8..)
            .map(|s| keygen(&[s; 32], &p))
            .find(|(_, sk)| (sk.s1_words[2][17] >> 1) & 1 == 1)
            .unwrap();
        let f = FaultSpec {
            row: 2,
            col: 17,
            bit_pos: 1,
            direction: FlipDirection::OneToZero,
        };
        let msg = b"locate";
        let (sig, _) = faulty_signature(&sk, &f, msg).unwrap();
        assert!(!verify(&pk, msg, &sig));
        let r = correct(&sig, msg, &pk, &CorrectionOptions::default()).unwrap();
        assert_eq!(
            r.outcome,
            CorrectionOutcome::Recovered(RecoveredBit {
                row: 2,
                col: 17,
                bit_index: 2,
                value: 1
            })
        );
        assert!(r.oracle_calls <= max_oracle_calls(4, DEFAULT_BIT_CAP));
    }

    #[test]
    fn oracles_agree_and_are_sound() {
        let (pk, sk) = keys();
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let mut checked = 0;
        while checked < 6 {
            let f = FaultSpec::effective(&sk, rng.gen_range(0..4), rng.gen_range(0..N), rng.gen_range(0..3));
            let msg: [u8; 8] = rng.gen();
            let Some((sig, _)) = faulty_signature(&sk, &f, &msg) else { continue };
            let full = correct(&sig, &msg, &pk, &CorrectionOptions { oracle: OracleKind::Full, bit_cap: 3 }).unwrap();
            let inc = correct(&sig, &msg, &pk, &CorrectionOptions { oracle: OracleKind::Incremental, bit_cap: 3 }).unwrap();
            assert_eq!(full, inc);
            let CorrectionOutcome::Recovered(bit) = inc.outcome else { panic!("{inc:?}") };
            assert_eq!((bit.row, bit.col, bit.bit_pos(), bit.value), (f.row, f.col, f.bit_pos, f.original_bit()));
            // soundness: the corrected signature verifies
            let mut s = unpack_signature(&pk.params, &sig).unwrap();
            let c = sample_in_ball(&pk.params, &s.c_tilde);
            let t = correction_term(&c, bit.col, bit.bit_index);
            s.z[bit.row] = if bit.value == 1 { s.z[bit.row].add(&t) } else { s.z[bit.row].sub(&t) };
            assert!(verify(&pk, &msg, &pack_signature(&s).unwrap()));
            checked += 1;
        }
    }

    #[test]
    fn delta_z_identity() {
        let (_, sk) = keys();
        let signer_clean = crate::scheme::Signer::new(&sk);
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let mut pairs = 0;
        while pairs < 10 {
            let f = FaultSpec::effective(&sk, rng.gen_range(0..4), rng.gen_range(0..N), rng.gen_range(0..12));
            let msg: [u8; 16] = rng.gen();
            let clean = signer_clean.sign(&msg, SignMode::Deterministic, 1000);
            let faulty = sign(&inject(&sk, &f).unwrap(), &msg, SignMode::Deterministic, 1000);
            let (SignOutcome::Signed { signature: a, kappa_used: ka }, SignOutcome::Signed { signature: b, kappa_used: kb }) = (clean, faulty) else {
                continue;
            };
            if ka != kb {
                continue;
            }
            assert_eq!(a.c_tilde, b.c_tilde);
            let c = sample_in_ball(&sk.params, &a.c_tilde);
            let term = correction_term(&c, f.col, f.bit_pos + 1);
            let expected = if f.original_bit() == 1 { term } else { term.neg() };
            for i in 0..4 {
                let d = a.z[i].sub(&b.z[i]);
                assert_eq!(d, if i == f.row { expected } else { Poly::zero() });
            }
            pairs += 1;
        }
    }

    #[test]
    fn double_fault_not_found() {
        let (pk, sk) = keys();
        let a = FaultSpec::effective(&sk, 0, 5, 0);
        let b = FaultSpec::effective(&sk, 3, 200, 1);
        let twice = inject(&inject(&sk, &a).unwrap(), &b).unwrap();
        let msg = b"two";
        let sig = pack_signature(&sign(&twice, msg, SignMode::Deterministic, 1000).signature().unwrap()).unwrap();
        let r = correct(&sig, msg, &pk, &CorrectionOptions { bit_cap: 3, ..Default::default() }).unwrap();
        assert!(matches!(r.outcome, CorrectionOutcome::NotFound { .. }));
        assert!(r.oracle_calls <= max_oracle_calls(4, 3));
    }

    #[test]
    fn sign_bit_value_semantics() {
        assert_eq!(original_bit(1, true), 1);
        assert_eq!(original_bit(1, false), 0);
        assert_eq!(original_bit(32, true), 0);
        assert_eq!(original_bit(32, false), 1);
    }

    #[test]
    fn rejects_bad_inputs() {
        let (pk, _) = keys();
        assert!(correct(&[0u8; 10], b"", &pk, &CorrectionOptions::default()).is_err());
        let bad = CorrectionOptions { bit_cap: 0, ..Default::default() };
        assert!(correct(&vec![0u8; pk.params.signature_bytes()], b"", &pk, &bad).is_err());
    }
}

#ifndef SIGCORRECT_H
#define SIGCORRECT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ScRevision {
  SC_REVISION_V30 = 0,
  SC_REVISION_V31 = 1,
} ScRevision;

typedef enum ScStatus {
  SC_STATUS_OK = 0,
  SC_STATUS_NULL_POINTER = 1,
  SC_STATUS_INVALID_ARGUMENT = 2,
  SC_STATUS_PARSE = 3,
  SC_STATUS_BUFFER_TOO_SMALL = 4,
  SC_STATUS_INVALID_SIGNATURE = 5,
  SC_STATUS_LOOP_EXHAUSTED = 6,
  SC_STATUS_NO_FAULT_DETECTED = 7,
  SC_STATUS_NOT_FOUND = 8,
  SC_STATUS_INFEASIBLE = 9,
  SC_STATUS_INTERNAL = 10,
  SC_STATUS_PANIC = 11,
} ScStatus;

/**
 * Key pair; the secret half may carry injected faults.
 */
typedef struct ScKeyPair ScKeyPair;

typedef struct ScPublicKey ScPublicKey;

typedef struct ScRecoveredBit {
  uint32_t row;
  uint32_t col;
  /**
   * 1-based bit index within the 32-bit word.
   */
  uint32_t bit_index;
  /**
   * Bit value before the fault.
   */
  uint8_t value;
} ScRecoveredBit;

typedef struct ScAttackCost {
  uint32_t m;
  uint32_t b;
  uint32_t classical_bits;
  uint32_t quantum_bits;
} ScAttackCost;

typedef struct ScSecurityEstimate {
  struct ScAttackCost primal;
  struct ScAttackCost dual;
} ScSecurityEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *sc_last_error(void);

/**
 * Static description of a status code.
 */
const char *sc_status_string(enum ScStatus status);

/**
 * Signature length in bytes for a security level, or 0 if unknown.
 */
size_t sc_signature_size(uint8_t level);

/**
 * # Safety
 * `seed` points to 32 readable bytes; `out` is writable.
 */
enum ScStatus sc_keypair_generate(uint8_t level,
                                  enum ScRevision revision,
                                  const uint8_t *seed,
                                  struct ScKeyPair **out);

/**
 * # Safety
 * `kp` is null or a handle from [`sc_keypair_generate`], freed once.
 */
void sc_keypair_free(struct ScKeyPair *kp);

/**
 * Packed public key. `written` receives the full length even when the
 * buffer is too small.
 *
 * # Safety
 * `kp` is a live handle; `out` has `cap` writable bytes; `written` is writable.
 */
enum ScStatus sc_keypair_public_key(const struct ScKeyPair *kp,
                                    uint8_t *out,
                                    size_t cap,
                                    size_t *written);

/**
 * Secret key with `s1` as 32-bit words, so injected faults survive.
 *
 * # Safety
 * As [`sc_keypair_public_key`].
 */
enum ScStatus sc_keypair_secret_key_words(const struct ScKeyPair *kp,
                                          uint8_t *out,
                                          size_t cap,
                                          size_t *written);

/**
 * Flip bit `bit_pos` of stored `s1[row][col]`.
 *
 * # Safety
 * `kp` is a live handle not used concurrently.
 */
enum ScStatus sc_keypair_inject(struct ScKeyPair *kp, uint32_t row, uint32_t col, uint32_t bit_pos);

/**
 * Deterministic signature with the default attempt cap.
 *
 * # Safety
 * `kp` is a live handle; `msg` has `msg_len` readable bytes; output as
 * [`sc_keypair_public_key`].
 */
enum ScStatus sc_sign(const struct ScKeyPair *kp,
                      const uint8_t *msg,
                      size_t msg_len,
                      uint8_t *sig,
                      size_t cap,
                      size_t *written);

/**
 * # Safety
 * `bytes` has `len` readable bytes; `out` is writable.
 */
enum ScStatus sc_public_key_from_bytes(enum ScRevision revision,
                                       const uint8_t *data,
                                       size_t len,
                                       struct ScPublicKey **out);

/**
 * Public half of a key pair as a standalone handle.
 *
 * # Safety
 * `kp` is a live handle; `out` is writable.
 */
enum ScStatus sc_keypair_public(const struct ScKeyPair *kp, struct ScPublicKey **out);

/**
 * # Safety
 * `pk` is null or a public-key handle, freed once.
 */
void sc_public_key_free(struct ScPublicKey *pk);

/**
 * `Ok` for a valid signature, `InvalidSignature` otherwise.
 *
 * # Safety
 * `pk` is a live handle; buffers have the given lengths.
 */
enum ScStatus sc_verify(const struct ScPublicKey *pk,
                        const uint8_t *msg,
                        size_t msg_len,
                        const uint8_t *sig,
                        size_t sig_len);

/**
 * Locate the single `s1` bit flip behind a faulty signature, scanning bit
 * indices up to `bit_cap` (0 selects the default). `oracle_calls` may be
 * null.
 *
 * # Safety
 * `pk` is a live handle; buffers have the given lengths; `out` is writable.
 */
enum ScStatus sc_correct(const struct ScPublicKey *pk,
                         const uint8_t *msg,
                         size_t msg_len,
                         const uint8_t *sig,
                         size_t sig_len,
                         uint32_t bit_cap,
                         struct ScRecoveredBit *out,
                         uint64_t *oracle_calls);

/**
 * `n_bar` and `zeta` from coefficient counts indexed by known bits, for
 * secrets in `[-eta, eta]`. `counts_len` must be the encoding width + 1.
 *
 * # Safety
 * `counts` has `counts_len` readable entries; outputs are writable.
 */
enum ScStatus sc_reduced_params(int32_t eta,
                                const size_t *counts,
                                size_t counts_len,
                                size_t *n_bar,
                                double *zeta);

/**
 * Primal and dual attack cost at the default modulus and sample range.
 *
 * # Safety
 * `out` is writable.
 */
enum ScStatus sc_estimate(uint32_t n_bar, double zeta, struct ScSecurityEstimate *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SIGCORRECT_H */

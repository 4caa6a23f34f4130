#ifndef ZDIV_H
#define ZDIV_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum ZdivStatus {
  ZDIV_STATUS_OK = 0,
  ZDIV_STATUS_NULL_POINTER = 1,
  ZDIV_STATUS_INVALID_ARGUMENT = 2,
  ZDIV_STATUS_DIMENSION_MISMATCH = 3,
  ZDIV_STATUS_NUMERICAL = 4,
  ZDIV_STATUS_INSUFFICIENT_DATA = 5,
  ZDIV_STATUS_CONFIG = 6,
  ZDIV_STATUS_IO = 7,
  ZDIV_STATUS_BUFFER_TOO_SMALL = 8,
  ZDIV_STATUS_PANIC = 9,
} ZdivStatus;

/**
 * Opaque experiment configuration.
 */
typedef struct ZdivConfig ZdivConfig;

/**
 * Opaque scenario result holding its CSV table.
 */
typedef struct ZdivResult ZdivResult;

/**
 * Opaque sampled complex envelope.
 */
typedef struct ZdivSignal ZdivSignal;

/**
 * Fiber parameters passed by value.
 */
typedef struct ZdivFiber {
  /**
   * Group-velocity dispersion in ps^2/km.
   */
  double beta2_ps2_per_km;
  /**
   * Nonlinearity in 1/(W km).
   */
  double gamma;
  /**
   * Loss in dB/km, compensated by distributed gain.
   */
  double alpha_db_per_km;
  double f0_hz;
  /**
   * Spontaneous-emission factor of the distributed gain.
   */
  double nsp;
} ZdivFiber;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next call into the library from this thread.
 */
const char *zdiv_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *zdiv_version(void);

/**
 * Standard single-mode fiber parameters.
 */
struct ZdivFiber zdiv_fiber_standard(void);

/**
 * Distributed-amplification noise variance in W over `dz_km` within
 * `bandwidth_hz`.
 */
double zdiv_ase_sigma2(struct ZdivFiber fiber, double dz_km, double bandwidth_hz);

/**
 * Creates a signal from `n` interleaved `re, im` pairs.
 *
 * # Safety
 * `interleaved` must point to `2 * n` readable doubles and `out` to a
 * writable handle slot.
 */
enum ZdivStatus zdiv_signal_new(const double *interleaved,
                                size_t n,
                                double sample_rate_hz,
                                struct ZdivSignal **out);

/**
 * Releases a signal; null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void zdiv_signal_free(struct ZdivSignal *s);

/**
 * Number of samples, or 0 for null.
 *
 * # Safety
 * `s` must be null or a live signal handle.
 */
size_t zdiv_signal_len(const struct ZdivSignal *s);

/**
 * Copies the samples as interleaved `re, im` pairs into `buf`, which holds
 * `capacity` doubles.
 *
 * # Safety
 * `s` must be a live handle and `buf` must hold `capacity` writable doubles.
 */
enum ZdivStatus zdiv_signal_read(const struct ZdivSignal *s, double *buf, size_t capacity);

/**
 * Split-step propagation over `length_km` with step `step_km`. Noise is
 * drawn from `seed` when `noise` is nonzero.
 *
 * # Safety
 * `input` must be a live handle and `out` a writable handle slot.
 */
enum ZdivStatus zdiv_ssfm_propagate(const struct ZdivSignal *input,
                                    struct ZdivFiber fiber,
                                    double length_km,
                                    double step_km,
                                    int32_t noise,
                                    uint64_t seed,
                                    struct ZdivSignal **out);

/**
 * Ideal dispersion compensation over `length_km`.
 *
 * # Safety
 * `input` must be a live handle and `out` a writable handle slot.
 */
enum ZdivStatus zdiv_cdc(const struct ZdivSignal *input,
                         double beta2_ps2_per_km,
                         double length_km,
                         struct ZdivSignal **out);

/**
 * Information rate in bit/symbol of `n` labelled complex observations
 * (interleaved `re, im`) under a Gaussian demapper fit to the same data.
 *
 * # Safety
 * `labels` must hold `n` values, `interleaved` `2 * n` doubles, and
 * `mi_bits` must be writable.
 */
enum ZdivStatus zdiv_mutual_information(const uint32_t *labels,
                                        const double *interleaved,
                                        size_t n,
                                        uint32_t order,
                                        double *mi_bits);

/**
 * Creates a configuration from a preset name (`desk` or `paper`).
 *
 * # Safety
 * `preset` must be a NUL-terminated string and `out` a writable slot.
 */
enum ZdivStatus zdiv_config_new(const char *preset, struct ZdivConfig **out);

/**
 * Applies config text (`key = value` lines) on top of the configuration.
 *
 * # Safety
 * `cfg` must be a live handle and `text` NUL-terminated.
 */
enum ZdivStatus zdiv_config_apply(struct ZdivConfig *cfg, const char *text);

/**
 * Sets a single key.
 *
 * # Safety
 * `cfg` must be a live handle; `key` and `value` NUL-terminated.
 */
enum ZdivStatus zdiv_config_set(struct ZdivConfig *cfg, const char *key, const char *value);

/**
 * Writes the configuration digest (NUL-terminated) into `buf`.
 *
 * # Safety
 * `cfg` must be a live handle and `buf` must hold `capacity` bytes.
 */
enum ZdivStatus zdiv_config_hash(const struct ZdivConfig *cfg, char *buf, size_t capacity);

/**
 * Releases a configuration; null is ignored.
 *
 * # Safety
 * `cfg` must come from this library and not be used afterwards.
 */
void zdiv_config_free(struct ZdivConfig *cfg);

/**
 * Runs a scenario (`soliton-l2-sweep`, `ae-l2-sweep`, `ae-power-sweep`,
 * `baseline-curves`, `train`) and returns its CSV table. Nothing is
 * written to disk except the checkpoint of `train`.
 *
 * # Safety
 * `cfg` must be a live handle, `scenario` NUL-terminated and `out` a
 * writable slot.
 */
enum ZdivStatus zdiv_run_scenario(const struct ZdivConfig *cfg,
                                  const char *scenario,
                                  struct ZdivResult **out);

/**
 * CSV text of a result; valid while the result lives.
 *
 * # Safety
 * `r` must be null or a live result handle.
 */
const char *zdiv_result_csv(const struct ZdivResult *r);

/**
 * Number of data rows in a result, or 0 for null.
 *
 * # Safety
 * `r` must be null or a live result handle.
 */
size_t zdiv_result_rows(const struct ZdivResult *r);

/**
 * Releases a result; null is ignored.
 *
 * # Safety
 * `r` must come from this library and not be used afterwards.
 */
void zdiv_result_free(struct ZdivResult *r);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ZDIV_H */

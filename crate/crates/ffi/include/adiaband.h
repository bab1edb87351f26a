#ifndef ADIABAND_H
#define ADIABAND_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum AdiabandStatus {
  ADIABAND_STATUS_OK = 0,
  ADIABAND_STATUS_NULL_POINTER = 1,
  ADIABAND_STATUS_INVALID_ARGUMENT = 2,
  ADIABAND_STATUS_GAP_COLLAPSE = 3,
  ADIABAND_STATUS_NUMERICAL_FAILURE = 4,
  ADIABAND_STATUS_CONFIG_ERROR = 5,
  ADIABAND_STATUS_IO_ERROR = 6,
  ADIABAND_STATUS_BUFFER_TOO_SMALL = 7,
  ADIABAND_STATUS_PANIC = 8,
} AdiabandStatus;

/**
 * A Hamiltonian family `s -> H(s)` with the ground band tracked.
 */
typedef struct AdiabandFamily AdiabandFamily;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *adiaband_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *adiaband_version(void);

/**
 * Grover search family on `n` qubits (full `2^n` representation, marked
 * state 0) under the named schedule, e.g. `"linear"` or `"adaptive:p=1.5"`.
 *
 * # Safety
 * `schedule` must be a NUL-terminated string; `out` must be writable.
 */
enum AdiabandStatus adiaband_grover_new(uint32_t n,
                                        const char *schedule,
                                        struct AdiabandFamily **out);

/**
 * `H(s) = (1 - f(s)) H0 + f(s) H1` from row-major `dim x dim` matrices.
 * The imaginary parts may be null (real matrices).
 *
 * # Safety
 * Each non-null matrix pointer must reference `dim * dim` doubles.
 */
enum AdiabandStatus adiaband_interpolating_new(size_t dim,
                                               const double *h0_re,
                                               const double *h0_im,
                                               const double *h1_re,
                                               const double *h1_im,
                                               const char *schedule,
                                               struct AdiabandFamily **out);

/**
 * Seeded random smooth family of dimension `dim`.
 *
 * # Safety
 * `out` must be writable.
 */
enum AdiabandStatus adiaband_random_new(size_t dim,
                                        uint64_t seed,
                                        size_t harmonics,
                                        struct AdiabandFamily **out);

/**
 * Releases a family; null is ignored.
 *
 * # Safety
 * `family` must come from one of the constructors and not be used again.
 */
void adiaband_family_free(struct AdiabandFamily *family);

/**
 * # Safety
 * `family` must be a live handle; `out` must be writable.
 */
enum AdiabandStatus adiaband_family_dim(const struct AdiabandFamily *family, size_t *out);

/**
 * Eigenvalues of `H(s)`, ascending, into `buf[0..dim]`.
 *
 * # Safety
 * `buf` must hold `len` doubles.
 */
enum AdiabandStatus adiaband_family_spectrum(const struct AdiabandFamily *family,
                                             double s,
                                             double *buf,
                                             size_t len);

/**
 * Gap between the ground band and the rest of the spectrum at `s`.
 *
 * # Safety
 * `family` must be a live handle; `out` must be writable.
 */
enum AdiabandStatus adiaband_family_gap(const struct AdiabandFamily *family, double s, double *out);

/**
 * Evolves from `P(0)` for time scale `tau` on `grid_points` grid points and
 * reports the leakage out of the ground band at `s = 1`.
 *
 * # Safety
 * `family` must be a live handle; the out-pointers must be writable.
 */
enum AdiabandStatus adiaband_evolve(const struct AdiabandFamily *family,
                                    double tau,
                                    size_t grid_points,
                                    double *transition_prob,
                                    double *proj_distance);

/**
 * Tight and coarse first-order bounds on the ground-band leakage at `s`.
 *
 * # Safety
 * `family` must be a live handle; the out-pointers must be writable.
 */
enum AdiabandStatus adiaband_theorem3_bound(const struct AdiabandFamily *family,
                                            double tau,
                                            double s,
                                            size_t quadrature_points,
                                            double *tight,
                                            double *coarse);

/**
 * Runs a JSON run configuration and returns the per-point CSV as a newly
 * allocated string (free with [`adiaband_string_free`]).
 *
 * # Safety
 * `config_json` must be a NUL-terminated string; `out` must be writable.
 */
enum AdiabandStatus adiaband_run_config_json(const char *config_json, char **out);

/**
 * Frees a string returned by this library; null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be used again.
 */
void adiaband_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ADIABAND_H */

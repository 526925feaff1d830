#ifndef QFI_H
#define QFI_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum QfiStatus {
  QFI_STATUS_OK = 0,
  QFI_STATUS_NULL_POINTER = 1,
  QFI_STATUS_DOMAIN = 2,
  QFI_STATUS_USAGE = 3,
  QFI_STATUS_NUMERICAL = 4,
  QFI_STATUS_TRUNCATION = 5,
  QFI_STATUS_CONFIG = 6,
  QFI_STATUS_RESOURCES = 7,
  QFI_STATUS_IO = 8,
  QFI_STATUS_PANIC = 9,
} QfiStatus;

/**
 * Hénon–Heiles quantum model in a truncated oscillator basis.
 */
typedef struct QfiHenonHeiles QfiHenonHeiles;

/**
 * Kicked top at fixed `(J, β, k, t)`. The exact propagator is built on the
 * first exact query and reused.
 */
typedef struct QfiKickedTop QfiKickedTop;

/**
 * Kicked rotor at fixed `(M, k, t)`.
 */
typedef struct QfiRotor QfiRotor;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread (empty if none). The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *qfi_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *qfi_version(void);

/**
 * `|I - I_sc|/(I + I_sc)`, with `0/0` taken as 0.
 */
double qfi_delta(double i_exact, double i_sc);

/**
 * # Safety
 * `out` must be null or point to writable storage for a handle pointer.
 */
enum QfiStatus qfi_kicked_top_new(double j,
                                  double beta,
                                  double k,
                                  uint64_t t,
                                  struct QfiKickedTop **out);

/**
 * # Safety
 * `handle` must be null or come from [`qfi_kicked_top_new`] and not be used
 * afterwards.
 */
void qfi_kicked_top_free(struct QfiKickedTop *handle);

/**
 * Exact QFI of the coherent state at `(φ, z)`.
 *
 * # Safety
 * `handle` must be valid and `out` writable.
 */
enum QfiStatus qfi_kicked_top_exact(const struct QfiKickedTop *handle,
                                    double phi,
                                    double z,
                                    double *out);

/**
 * Semiclassical QFI at `(φ, z)` on an `r`-resolution cap of radius
 * `reff_multiple` widths.
 *
 * # Safety
 * `handle` must be valid and `out` writable.
 */
enum QfiStatus qfi_kicked_top_semiclassical(const struct QfiKickedTop *handle,
                                            double phi,
                                            double z,
                                            uint32_t r,
                                            double reff_multiple,
                                            double *out);

/**
 * Builds the rotor propagator (dense, `M x M`).
 *
 * # Safety
 * `out` must be null or point to writable storage for a handle pointer.
 */
enum QfiStatus qfi_rotor_new(size_t m, double k, uint64_t t, struct QfiRotor **out);

/**
 * # Safety
 * `handle` must be null or come from [`qfi_rotor_new`] and not be used
 * afterwards.
 */
void qfi_rotor_free(struct QfiRotor *handle);

/**
 * # Safety
 * `handle` must be valid and `out` writable.
 */
enum QfiStatus qfi_rotor_exact(const struct QfiRotor *handle, double x, double p, double *out);

/**
 * # Safety
 * `handle` must be valid and `out` writable.
 */
enum QfiStatus qfi_rotor_semiclassical(const struct QfiRotor *handle,
                                       double x,
                                       double p,
                                       uint32_t r,
                                       double reff_multiple,
                                       double *out);

/**
 * # Safety
 * `out` must be null or point to writable storage for a handle pointer.
 */
enum QfiStatus qfi_henon_heiles_new(double hbar,
                                    size_t n_max,
                                    double lambda,
                                    struct QfiHenonHeiles **out);

/**
 * # Safety
 * `handle` must be null or come from [`qfi_henon_heiles_new`] and not be
 * used afterwards.
 */
void qfi_henon_heiles_free(struct QfiHenonHeiles *handle);

/**
 * Exact QFI at time `t` for the coherent state centered at
 * `(x, y, p_x, p_y)`.
 *
 * # Safety
 * `handle` must be valid and `out` writable.
 */
enum QfiStatus qfi_henon_heiles_exact(const struct QfiHenonHeiles *handle,
                                      double x,
                                      double y,
                                      double px,
                                      double py,
                                      double t,
                                      double *out);

/**
 * Heisenberg time `ħ/Δ` around `energy`.
 *
 * # Safety
 * `handle` must be valid and `out` writable.
 */
enum QfiStatus qfi_henon_heiles_heisenberg_time(const struct QfiHenonHeiles *handle,
                                                double energy,
                                                double *out);

/**
 * Monte Carlo semiclassical QFI with `n` samples and the scaled cutoff
 * `|z - z0|^2/ħ < cutoff` (no cutoff if `cutoff <= 0`).
 *
 * # Safety
 * `out` must be writable.
 */
enum QfiStatus qfi_henon_heiles_semiclassical(double hbar,
                                              double lambda,
                                              double x,
                                              double y,
                                              double px,
                                              double py,
                                              double t,
                                              double dt,
                                              size_t n,
                                              uint64_t seed,
                                              double cutoff,
                                              double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QFI_H */

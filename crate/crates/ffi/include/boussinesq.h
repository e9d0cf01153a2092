#ifndef BOUSSINESQ_H
#define BOUSSINESQ_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define BSQ_PROFILE_SOLITON 0

#define BSQ_PROFILE_GAUSSIAN 1

#define BSQ_PROFILE_THREE_GAUSSIANS 2

#define BSQ_PROFILE_PERTURBED_SOLITON 3

#define BSQ_PROFILE_ZERO 4

// Result of every fallible call.
typedef enum BsqStatus {
  BSQ_STATUS_OK = 0,
  BSQ_STATUS_NULL_POINTER = 1,
  BSQ_STATUS_INVALID_ARGUMENT = 2,
  BSQ_STATUS_NON_ZERO_MEAN = 3,
  BSQ_STATUS_BLOW_UP = 4,
  BSQ_STATUS_DOMAIN = 5,
  BSQ_STATUS_CONDITIONING = 6,
  BSQ_STATUS_DATA_INCONSISTENCY = 7,
  BSQ_STATUS_NORMING_SPREAD = 8,
  BSQ_STATUS_SYMMETRY_VIOLATION = 9,
  BSQ_STATUS_BRANCH = 10,
  BSQ_STATUS_MISSING_PREREQUISITE = 11,
  BSQ_STATUS_IO = 12,
  BSQ_STATUS_BUFFER_TOO_SMALL = 13,
  BSQ_STATUS_PANIC = 14,
} BsqStatus;

// Scattering data of one initial profile.
typedef struct BsqScattering BsqScattering;

// A running simulation.
typedef struct BsqSimulation BsqSimulation;

// Scheme settings; zero or negative `modes`, `dt` or `d0` select the defaults.
typedef struct BsqSchemeParams {
  double half_period;
  int64_t modes;
  bool damping;
  double d0;
  double dt;
} BsqSchemeParams;

// Catalog initial data. `kind` is one of the `BSQ_PROFILE_*` constants.
//
// soliton: `amplitude`, `x0`; gaussian: `a exp(-c (x - b)^2)`;
// three gaussians: `a`, `b`, `c`; perturbed soliton: `amplitude`.
typedef struct BsqProfile {
  uint32_t kind;
  double amplitude;
  double x0;
  double a;
  double b;
  double c;
} BsqProfile;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread; empty after a success.
// Valid until the next call into the library on the same thread.
const char *bsq_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *bsq_version(void);

// `A sech^2(sqrt(A/6)(x - x0 - c t))`; NaN for `A <= 0`.
double bsq_soliton_value(double amplitude, double x0, double x, double t);

// Amplitude `(3/8)(k0 - 1/k0)^2` of the soliton generated by a zero `k0`.
double bsq_soliton_amplitude_from_k0(double k0);

// Speed `(k0 + 1/k0)/2` of the soliton generated by a zero `k0`.
double bsq_soliton_speed_from_k0(double k0);

// Create a simulation of catalog data at `t = 0`.
//
// # Safety
// `params`, `profile` and `out` must be valid pointers.
enum BsqStatus bsq_simulation_new(const struct BsqSchemeParams *params,
                                  const struct BsqProfile *profile,
                                  struct BsqSimulation **out);

// Create a simulation from a JSON run config (the CLI schema).
//
// # Safety
// `json` must be NUL-terminated; `out` must be valid.
enum BsqStatus bsq_simulation_from_json(const char *json, struct BsqSimulation **out);

// Release a simulation; null is ignored.
//
// # Safety
// `sim` must come from a constructor above and not be used afterwards.
void bsq_simulation_free(struct BsqSimulation *sim);

// March to time `t`. On blow-up the simulation keeps its last finite state.
//
// # Safety
// `sim` must be a live handle.
enum BsqStatus bsq_simulation_advance(struct BsqSimulation *sim, double t);

// Current time; NaN for a null handle.
//
// # Safety
// `sim` must be null or a live handle.
double bsq_simulation_time(const struct BsqSimulation *sim);

// Mode cutoff `N`; the state holds `2N` coefficients per field.
//
// # Safety
// `sim` must be null or a live handle.
size_t bsq_simulation_modes(const struct BsqSimulation *sim);

// Evaluate `U(x, t)` at `n` points.
//
// # Safety
// `xs` and `out` must hold `n` doubles.
enum BsqStatus bsq_simulation_sample(const struct BsqSimulation *sim,
                                     const double *xs,
                                     size_t n,
                                     double *out);

// Mass mode `U^(0, t)`.
//
// # Safety
// `sim`, `re` and `im` must be valid.
enum BsqStatus bsq_simulation_mass(const struct BsqSimulation *sim, double *re, double *im);

// Scattering handle for catalog data, with the default solver options.
//
// # Safety
// `profile` and `out` must be valid.
enum BsqStatus bsq_scattering_new(const struct BsqProfile *profile, struct BsqScattering **out);

// Release a scattering handle; null is ignored.
//
// # Safety
// `h` must come from [`bsq_scattering_new`] and not be used afterwards.
void bsq_scattering_free(struct BsqScattering *h);

// `s(k)` row-major as 9 `(re, im)` pairs in `out[18]`. Entries that cannot be
// computed at this `k` are NaN; `r1_out[2]` receives `s12/s11` or NaN.
//
// # Safety
// `out` must hold 18 doubles and `r1_out` 2 (or be null).
enum BsqStatus bsq_scattering_matrix(const struct BsqScattering *h,
                                     double k_re,
                                     double k_im,
                                     double *out,
                                     double *r1_out);

// Zeros of `s11` on `(a, b)`, written to `zeros[..capacity]`; `count`
// receives the number found (0 for solitonless data). Returns
// `BufferTooSmall` if more than `capacity` zeros exist.
//
// # Safety
// `zeros` must hold `capacity` doubles; `count` must be valid.
enum BsqStatus bsq_scattering_find_k0(const struct BsqScattering *h,
                                      double a,
                                      double b,
                                      double *zeros,
                                      size_t capacity,
                                      size_t *count);

// Norming constant `c_k0` at a zero and the spread of its estimates.
//
// # Safety
// Output pointers must be valid; `spread` may be null.
enum BsqStatus bsq_scattering_norming_constant(const struct BsqScattering *h,
                                               double k0,
                                               double *re,
                                               double *im,
                                               double *spread);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BOUSSINESQ_H */

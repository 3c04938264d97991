#ifndef DOSC_H
#define DOSC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call. The first four values match the CLI exit codes.
 */
typedef enum DoscStatus {
  DOSC_STATUS_OK = 0,
  DOSC_STATUS_INVALID_ARGUMENT = 1,
  /**
   * The coupling violates `ω₀ > ∫V²/ω`.
   */
  DOSC_STATUS_POSITIVITY = 2,
  /**
   * A numerical procedure failed to converge.
   */
  DOSC_STATUS_NUMERICAL = 3,
  DOSC_STATUS_NULL_POINTER = 4,
  /**
   * A caller buffer is shorter than the data.
   */
  DOSC_STATUS_BUFFER_TOO_SMALL = 5,
  DOSC_STATUS_PANIC = 6,
} DoscStatus;

typedef enum DoscScheme {
  DOSC_SCHEME_UNIFORM = 0,
  DOSC_SCHEME_GAUSS_LIKE = 1,
} DoscScheme;

/**
 * A finite bath and its normal modes.
 */
typedef struct DoscOracle DoscOracle;

/**
 * `π(ω)` for one spectrum and unit system.
 */
typedef struct DoscSolution DoscSolution;

/**
 * A validated coupling spectrum `V(ω)`.
 */
typedef struct DoscSpectrum DoscSpectrum;

typedef struct DoscUnits {
  double hbar;
  double mass;
  double omega0;
} DoscUnits;

typedef struct DoscSolutionInfo {
  /**
   * Grid nodes, excluding bound states.
   */
  size_t nodes;
  size_t bound_states;
  double norm_defect;
  double sum_rule_defect;
  double resolution;
} DoscSolutionInfo;

/**
 * Reduced ground state of the oscillator.
 */
typedef struct DoscGroundState {
  double var_x;
  double var_p;
  double mean;
  double mean_inverse;
  double omega_c;
  double n_bar_c;
  double t_eff;
  double entropy;
  double mutual_info;
  double mean_energy;
} DoscGroundState;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *dosc_version(void);

/**
 * Message of the last failed call on this thread, or NULL. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *dosc_last_error_message(void);

/**
 * `ħ = m = ω₀ = 1`.
 */
struct DoscUnits dosc_units_default(void);

/**
 * `|V(ω)|² = κ²ω e^{-ω/Λ}`. `omega_max <= 0` selects the default `20Λ`.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for a handle.
 */
enum DoscStatus dosc_spectrum_ohmic_exp(double amplitude,
                                        double cutoff,
                                        double omega_max,
                                        struct DoscSpectrum **out);

/**
 * `V(ω) = level` on `[lower, upper]`.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for a handle.
 */
enum DoscStatus dosc_spectrum_flat_band(double level,
                                        double lower,
                                        double upper,
                                        struct DoscSpectrum **out);

/**
 * `|V(ω)|² = level²(ω/center) exp(-(ω-center)²/2width²)`.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for a handle.
 */
enum DoscStatus dosc_spectrum_gaussian_peak(double level,
                                            double center,
                                            double width,
                                            double omega_max,
                                            struct DoscSpectrum **out);

/**
 * Piecewise-linear `V` through `n` nodes.
 *
 * # Safety
 * `omegas` and `values` must point to `n` readable doubles; `out` as above.
 */
enum DoscStatus dosc_spectrum_tabulated(const double *omegas,
                                        const double *values,
                                        size_t n,
                                        struct DoscSpectrum **out);

/**
 * # Safety
 * `spec` must be NULL or a handle from this library not yet freed.
 */
void dosc_spectrum_free(struct DoscSpectrum *spec);

/**
 * `V(ω)`, or NaN for a NULL handle.
 *
 * # Safety
 * `spec` must be NULL or a live handle.
 */
double dosc_spectrum_coupling(const struct DoscSpectrum *spec, double omega);

/**
 * `∫V²/ω dω` and `ω₀` minus it. A non-positive margin is not an error here.
 *
 * # Safety
 * `spec` must be a live handle; `integral` and `margin` may be NULL.
 */
enum DoscStatus dosc_positivity(const struct DoscSpectrum *spec,
                                struct DoscUnits u,
                                double *integral,
                                double *margin);

/**
 * Solves for `π(ω)` with default tolerances.
 *
 * # Safety
 * `spec` must be a live handle; `out` a valid pointer.
 */
enum DoscStatus dosc_solve(const struct DoscSpectrum *spec,
                           struct DoscUnits u,
                           struct DoscSolution **out);

/**
 * # Safety
 * `sol` must be NULL or a live handle.
 */
void dosc_solution_free(struct DoscSolution *sol);

/**
 * # Safety
 * `sol` must be a live handle; `out` a valid pointer.
 */
enum DoscStatus dosc_solution_info(const struct DoscSolution *sol, struct DoscSolutionInfo *out);

/**
 * Copies the grid nodes, `π` at each node and the quadrature weights
 * (`Σ weight·pi` is the continuum part of `∫π`). Any output may be NULL;
 * each non-NULL buffer must hold `capacity >= nodes` doubles.
 *
 * # Safety
 * `sol` must be a live handle; non-NULL buffers must be writable for `capacity` doubles.
 */
enum DoscStatus dosc_solution_copy(const struct DoscSolution *sol,
                                   double *omega,
                                   double *pi,
                                   double *weight,
                                   size_t capacity);

/**
 * Copies bound-state frequencies and weights; buffers as in [`dosc_solution_copy`].
 *
 * # Safety
 * As for [`dosc_solution_copy`].
 */
enum DoscStatus dosc_solution_bound_states(const struct DoscSolution *sol,
                                           double *omega,
                                           double *weight,
                                           size_t capacity);

/**
 * # Safety
 * `sol` must be a live handle; `out` a valid pointer.
 */
enum DoscStatus dosc_solution_ground_state(const struct DoscSolution *sol,
                                           struct DoscGroundState *out);

/**
 * `⟨⟨cos ωt⟩⟩`, `⟨⟨ω⁻¹sin ωt⟩⟩`, `⟨⟨ω sin ωt⟩⟩` at `n` sorted times. Times beyond
 * the grid's anti-aliasing bound are rejected with `DOSC_STATUS_NUMERICAL`.
 *
 * # Safety
 * `times` must hold `n` doubles and each non-NULL output must be writable for `n` doubles.
 */
enum DoscStatus dosc_solution_kernels(const struct DoscSolution *sol,
                                      const double *times,
                                      size_t n,
                                      double *k_cos,
                                      double *k_sin_over,
                                      double *k_sin_times);

/**
 * Discretises `spec` into `modes` bath oscillators and diagonalises the result.
 *
 * # Safety
 * `spec` must be a live handle; `out` a valid pointer.
 */
enum DoscStatus dosc_oracle_discretize(const struct DoscSpectrum *spec,
                                       struct DoscUnits u,
                                       size_t modes,
                                       enum DoscScheme scheme,
                                       struct DoscOracle **out);

/**
 * A bath given mode by mode: `K₀k = couplings[k]·√(ω₀·bath_freqs[k])`.
 *
 * # Safety
 * `bath_freqs` and `couplings` must hold `n` doubles; `out` a valid pointer.
 */
enum DoscStatus dosc_oracle_manual(struct DoscUnits u,
                                   const double *bath_freqs,
                                   const double *couplings,
                                   size_t n,
                                   struct DoscOracle **out);

/**
 * # Safety
 * `oracle` must be NULL or a live handle.
 */
void dosc_oracle_free(struct DoscOracle *oracle);

/**
 * Number of normal modes (bath modes + 1), or 0 for NULL.
 *
 * # Safety
 * `oracle` must be NULL or a live handle.
 */
size_t dosc_oracle_len(const struct DoscOracle *oracle);

/**
 * Copies the eigenfrequencies `Ω_k` and oscillator weights `π_k`.
 *
 * # Safety
 * `oracle` must be a live handle; non-NULL buffers writable for `capacity` doubles.
 */
enum DoscStatus dosc_oracle_modes(const struct DoscOracle *oracle,
                                  double *omega,
                                  double *pi,
                                  size_t capacity);

/**
 * Ground state of the finite system. `var_x`/`var_p` come straight from the
 * normal-mode covariance; the remaining fields from the discrete moments.
 *
 * # Safety
 * `oracle` must be a live handle; `out` a valid pointer.
 */
enum DoscStatus dosc_oracle_ground_state(const struct DoscOracle *oracle,
                                         struct DoscGroundState *out);

/**
 * `Σ V_k²/ω_k` of the finite bath (positivity requires it below `ω₀`).
 *
 * # Safety
 * `oracle` must be NULL or a live handle.
 */
double dosc_oracle_positivity_sum(const struct DoscOracle *oracle);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DOSC_H */

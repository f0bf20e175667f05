#ifndef WAVEGUIDE_PST_H
#define WAVEGUIDE_PST_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Coupling profile selector for [`wpst_lattice_new`].
 */
typedef enum WpstProfile {
  WPST_PROFILE_DESIGNED = 0,
  WPST_PROFILE_UNIFORM = 1,
} WpstProfile;

/*
 Status codes.
 */
typedef enum WpstStatus {
  WPST_STATUS_OK = 0,
  WPST_STATUS_NULL_POINTER = -1,
  WPST_STATUS_INVALID_LATTICE = -2,
  WPST_STATUS_INVALID_PARAMETER = -3,
  WPST_STATUS_NUMERICAL = -4,
  WPST_STATUS_INVALID_STATE = -5,
  WPST_STATUS_RESOURCE = -6,
  WPST_STATUS_BUFFER_TOO_SMALL = -7,
  WPST_STATUS_INVALID_STRING = -8,
  WPST_STATUS_PANIC = -9,
} WpstStatus;

/*
 Opaque lattice handle.
 */
typedef struct WpstLattice WpstLattice;

/*
 Transfer verdict.
 */
typedef struct WpstVerdict {
  bool pass;
  double worst_deviation;
  double t_opt;
  double phase;
} WpstVerdict;

/*
 Builds a lattice of shape `l x b x h` with coupling scale `coupling`;
 `profile` is a [`WpstProfile`] value.

 # Safety
 `out_lattice` must be a valid pointer; on success it receives a handle
 that must be released with [`wpst_lattice_free`].
 */
enum WpstStatus wpst_lattice_new(size_t l,
                                 size_t b,
                                 size_t h,
                                 double coupling,
                                 int32_t profile,
                                 struct WpstLattice **out_lattice);

/*
 Releases a handle. Null is ignored.

 # Safety
 `lattice` must be null or a handle from [`wpst_lattice_new`] not yet freed.
 */
void wpst_lattice_free(struct WpstLattice *lattice);

/*
 Number of modes `L * B * H`.

 # Safety
 Pointers must be valid.
 */
enum WpstStatus wpst_lattice_num_modes(const struct WpstLattice *lattice, size_t *out_modes);

/*
 Copies the gap couplings of `axis` (0 = L, 1 = B, 2 = H) into `buf`.
 `out_len` always receives the number of gaps; if `capacity` is too small
 nothing is copied and `BufferTooSmall` is returned.

 # Safety
 `buf` must hold `capacity` doubles (may be null when `capacity` is 0).
 */
enum WpstStatus wpst_lattice_couplings(const struct WpstLattice *lattice,
                                       size_t axis,
                                       double *buf,
                                       size_t capacity,
                                       size_t *out_len);

/*
 `t_opt` for period index `n`.

 # Safety
 Pointers must be valid.
 */
enum WpstStatus wpst_lattice_optimal_time(const struct WpstLattice *lattice,
                                          uint32_t n,
                                          double *out_t);

/*
 Output phase-gate angle in radians.

 # Safety
 Pointers must be valid.
 */
enum WpstStatus wpst_lattice_correction_phase(const struct WpstLattice *lattice, double *out_phi);

/*
 Entry `A[from][to]` of `exp(-i M t)` (0-based row-major mode indices).

 # Safety
 Pointers must be valid.
 */
enum WpstStatus wpst_lattice_evolution_entry(const struct WpstLattice *lattice,
                                             double t,
                                             size_t from,
                                             size_t to,
                                             double *out_re,
                                             double *out_im);

/*
 Mirror-transfer check at `t_opt` for period index `n`.

 # Safety
 Pointers must be valid.
 */
enum WpstStatus wpst_lattice_verify_pst(const struct WpstLattice *lattice,
                                        uint32_t n,
                                        double tol,
                                        struct WpstVerdict *out_verdict);

/*
 Waveguide separations `kappa_j = ln(gamma / J_j) / eta`, axes L, B, H in
 turn. Buffer semantics as in [`wpst_lattice_couplings`].

 # Safety
 `buf` must hold `capacity` doubles.
 */
enum WpstStatus wpst_lattice_separations(const struct WpstLattice *lattice,
                                         double gamma,
                                         double eta,
                                         double *buf,
                                         size_t capacity,
                                         size_t *out_len);

/*
 Fidelity between the input `spec` (e.g. `"cat:1.0"`) placed on the first
 site and the phase-corrected state at its mirror site after time `t`.
 `cutoff < 0` picks the cutoff from the default leak budget.

 # Safety
 `spec` must be a NUL-terminated string; out-pointers must be valid.
 */
enum WpstStatus wpst_lattice_transfer_fidelity(const struct WpstLattice *lattice,
                                               const char *spec,
                                               int64_t cutoff,
                                               double t,
                                               double *out_fidelity,
                                               double *out_leak);

/*
 Uhlmann fidelity of two single-mode Gaussian states given as
 displacement `d[2]` and row-major covariance `xi[4]`.

 # Safety
 Arrays must hold 2 and 4 doubles.
 */
enum WpstStatus wpst_gaussian_fidelity(const double *d1,
                                       const double *xi1,
                                       const double *d2,
                                       const double *xi2,
                                       double *out_fidelity);

/*
 Copies the calling thread's last error message (NUL-terminated,
 truncated to fit) into `buf`.

 # Safety
 `buf` must hold `capacity` bytes.
 */
enum WpstStatus wpst_last_error_message(char *buf, size_t capacity);

/*
 Library version as a static NUL-terminated string.
 */
const char *wpst_version(void);

#endif  /* WAVEGUIDE_PST_H */

/* C API for the espace library: steady-state transaction fields, the
 * characteristic quartic of surface-like wave modes, dispersion solving,
 * and analytic mode evaluation on the 2D risk square.
 *
 * Handles are opaque; create with the matching *_new and release with the
 * matching *_free. All other calls are read-only on their handle and safe
 * to issue from multiple threads. Fallible calls return EspaceStatus and
 * write results through out-pointers only on ESPACE_OK (NULL out-pointers
 * are permitted to skip an output).
 */

#ifndef ESPACE_H
#define ESPACE_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum EspaceStatus {
  ESPACE_OK = 0,
  ESPACE_NULL_POINTER = 1,
  ESPACE_INVALID_PARAMS = 2,
  ESPACE_OUT_OF_DOMAIN = 3,
  ESPACE_DEGENERATE_QUARTIC = 4,
  ESPACE_COMPLEX_ROOTS = 5,
  ESPACE_NO_SOLUTION = 6,
  ESPACE_CONSTRAINT_INFEASIBLE = 7,
  ESPACE_UNSUPPORTED_MODE = 8,
  ESPACE_NUMERIC_FAILURE = 9,
} EspaceStatus;

/* Opaque validated model parameters. */
typedef struct EspaceParams EspaceParams;

/* Opaque analytic wave mode (bound to the parameters it was built with). */
typedef struct EspaceMode EspaceMode;

/* Creates a validated parameter handle. Sign conventions: a1 > 0, a2 < 0,
 * b > 0, d < 0, a0 > 0, b0 > 0, x_max > 0; the accelerations h and g are
 * unconstrained. t_window is metadata only; pass 1.0 when unused. */
EspaceStatus espace_params_new(double a0, double b0, double a1, double a2,
                               double b, double d, double h_x, double h_y,
                               double g_x, double g_y, double x_max,
                               double t_window, EspaceParams **out);

void espace_params_free(EspaceParams *params);

/* Steady-state credits rate A(x, y); ESPACE_OUT_OF_DOMAIN outside
 * [0, x_max]^2. */
EspaceStatus espace_steady_a(const EspaceParams *params, double x, double y,
                             double *out);

/* Steady-state payment rate B(x, y). */
EspaceStatus espace_steady_b(const EspaceParams *params, double x, double y,
                             double *out);

/* Coefficients (q4, q2, q0) of the fourth-order depth equation at
 * (k, omega); the odd coefficients vanish structurally. */
EspaceStatus espace_quartic_coefficients(const EspaceParams *params, double k,
                                         double omega, double *out_q4,
                                         double *out_q2, double *out_q0);

/* Characteristic roots at (k, omega). When *out_is_real == 1 the four roots
 * are {+s1, +s2, -s1, -s2} with s1 >= s2 written to out_s1/out_s2; when 0,
 * the squared roots form the conjugate pair out_s1 +/- i*out_s2. */
EspaceStatus espace_characteristic_roots(const EspaceParams *params, double k,
                                         double omega, double *out_s1,
                                         double *out_s2, int *out_is_real);

/* Smallest positive frequency whose boundary slope a0*omega^2/(b0*g_y) is a
 * real characteristic root at (k, omega). */
EspaceStatus espace_dispersion_solve(const EspaceParams *params, double k,
                                     double *out_omega, double *out_s);

/* Builds a wave mode at (k, omega). kind: 0 single-decay, 1 growth-pair,
 * 2 general (lambda2/lambda4 are the free weights on the +/-s2 roots and
 * are ignored for the other kinds). */
EspaceStatus espace_mode_new(const EspaceParams *params, double k,
                             double omega, int kind, double lambda2,
                             double lambda4, EspaceMode **out);

void espace_mode_free(EspaceMode *mode);

/* Depth profile f(y_rel) with y_rel = y - x_max; f(0) = 1. */
EspaceStatus espace_mode_profile(const EspaceMode *mode, double y_rel,
                                 double *out);

/* Perturbed fields (A, B) of the mode at (t, x, y). */
EspaceStatus espace_mode_fields(const EspaceMode *mode, double t, double x,
                                double y, double *out_a, double *out_b);

/* Border elevation xi(t, x); single-decay modes only. */
EspaceStatus espace_mode_surface_elevation(const EspaceMode *mode, double t,
                                           double x, double *out);

/* Total credits along the border y = x_max at time t: the closed form and
 * its adaptive-quadrature ground truth; single-decay modes only. */
EspaceStatus espace_mode_border_total(const EspaceMode *mode, double t,
                                      double *out_closed_form,
                                      double *out_quadrature);

/* Library version, static NUL-terminated string. */
const char *espace_version(void);

#ifdef __cplusplus
}
#endif

#endif /* ESPACE_H */

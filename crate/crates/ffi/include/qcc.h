#ifndef QCC_H
#define QCC_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum QccStatus {
  QCC_STATUS_OK = 0,
  QCC_STATUS_NULL_POINTER = 1,
  QCC_STATUS_INVALID_UTF8 = 2,
  QCC_STATUS_PARSE = 3,
  QCC_STATUS_DIMENSION_MISMATCH = 4,
  QCC_STATUS_INVALID_INPUT = 5,
  QCC_STATUS_SOLVER = 6,
  QCC_STATUS_PANIC = 7,
} QccStatus;

typedef enum QccMode {
  QCC_MODE_COMPAT = 0,
  QCC_MODE_JORDAN = 1,
  QCC_MODE_PPT_COMPAT = 2,
} QccMode;

typedef enum QccSolver {
  QCC_SOLVER_INTERIOR_POINT = 0,
  QCC_SOLVER_PROJECTION = 1,
} QccSolver;

typedef enum QccVerdict {
  QCC_VERDICT_COMPATIBLE = 0,
  QCC_VERDICT_INCOMPATIBLE = 1,
  QCC_VERDICT_INCONCLUSIVE = 2,
} QccVerdict;

// Opaque channel handle.
typedef struct QccChannel QccChannel;

// Opaque result of a compatibility decision.
typedef struct QccDecision QccDecision;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *qcc_version(void);

// Message of the last failure on this thread, or NULL. The pointer stays
// valid until the next failing call on the same thread.
const char *qcc_last_error(void);

// # Safety
// `s` must be NULL or a string returned by this library, not yet freed.
void qcc_string_free(char *s);

// Parses a channel from its JSON form (`d_in`, `d_out`, `choi`).
//
// # Safety
// `json` must be a NUL-terminated string and `out` a writable pointer.
enum QccStatus qcc_channel_from_json(const char *json, struct QccChannel **out);

// `Ω_q = q·Ω + (1−q)·I` on dimension `d`.
//
// # Safety
// `out` must be a writable pointer.
enum QccStatus qcc_channel_partial_depolarizing(size_t d, double q, struct QccChannel **out);

// `Ξ_{p,q} = (1−p−q)·I + p·Δ + q·Ω` on a qubit.
//
// # Safety
// `out` must be a writable pointer.
enum QccStatus qcc_channel_xi(double p, double q, struct QccChannel **out);

// Input and output dimensions of a channel.
//
// # Safety
// `ch` must be a live handle; `d_in` and `d_out` writable pointers.
enum QccStatus qcc_channel_dims(const struct QccChannel *ch, size_t *d_in, size_t *d_out);

// JSON form of a channel; free with [`qcc_string_free`]. NULL on error.
//
// # Safety
// `ch` must be a live handle.
char *qcc_channel_to_json(const struct QccChannel *ch);

// # Safety
// `ch` must be NULL or a handle not yet freed.
void qcc_channel_free(struct QccChannel *ch);

// Decides compatibility of `f` and `g`. `tol <= 0` keeps the default
// decision tolerance.
//
// # Safety
// `f`, `g` must be live handles and `out` a writable pointer.
enum QccStatus qcc_decide(const struct QccChannel *f,
                          const struct QccChannel *g,
                          enum QccMode mode,
                          enum QccSolver solver,
                          double tol,
                          struct QccDecision **out);

// Decides whether `k` copies of `f` are compatible.
//
// # Safety
// `f` must be a live handle and `out` a writable pointer.
enum QccStatus qcc_self_compat(const struct QccChannel *f,
                               size_t k,
                               enum QccSolver solver,
                               double tol,
                               struct QccDecision **out);

// # Safety
// `dec` must be a live handle.
enum QccVerdict qcc_decision_verdict(const struct QccDecision *dec);

// Optimal shift `α`; NaN for a NULL handle.
//
// # Safety
// `dec` must be NULL or a live handle.
double qcc_decision_alpha(const struct QccDecision *dec);

// Certificate JSON borrowed from the decision, or NULL when none was
// produced. Valid until the decision is freed.
//
// # Safety
// `dec` must be NULL or a live handle.
const char *qcc_decision_certificate(const struct QccDecision *dec);

// # Safety
// `dec` must be NULL or a handle not yet freed.
void qcc_decision_free(struct QccDecision *dec);

// Re-checks a certificate against its channels without a solver. `g` may
// be NULL for extension certificates. Writes validity and margin.
//
// # Safety
// `cert_json` must be a NUL-terminated string, `f` a live handle, `g` NULL
// or a live handle, and `valid`, `margin` writable pointers.
enum QccStatus qcc_certificate_verify(const char *cert_json,
                                      const struct QccChannel *f,
                                      const struct QccChannel *g,
                                      bool *valid,
                                      double *margin);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QCC_H */

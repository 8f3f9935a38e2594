#ifndef MSLAB_H
#define MSLAB_H

/* Generated by cbindgen from the mslab-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Outcome of a call across the C boundary.
 */
typedef enum MslabStatus {
  /**
   * The call succeeded.
   */
  MslabStatus_Ok = 0,
  /**
   * A required pointer argument was null.
   */
  MslabStatus_NullArgument = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  MslabStatus_InvalidUtf8 = 2,
  /**
   * An expression failed to parse.
   */
  MslabStatus_Syntax = 3,
  /**
   * A configuration (space JSON, tolerances, constants) was rejected.
   */
  MslabStatus_Config = 4,
  /**
   * The computation failed: a pole was hit, a quantity diverged, or
   * quadrature did not converge.
   */
  MslabStatus_Numeric = 5,
  /**
   * The self-verification suite did not pass.
   */
  MslabStatus_Verification = 6,
  /**
   * A panic was caught at the boundary.
   */
  MslabStatus_Internal = 7,
} MslabStatus;

/**
 * A parsed symbol: an expression in one complex variable.
 */
typedef struct MslabExpr MslabExpr;

/**
 * A reproducing-kernel space built from nodes and weights.
 */
typedef struct MslabSpace MslabSpace;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message from the most recent failing call on this thread.
 *
 * Never null; empty until the first failure. The pointer stays valid until
 * the next failing call on the same thread.
 */
const char *mslab_last_error_message(void);

/**
 * Release a string returned by this library. Null is a no-op.
 *
 * # Safety
 * `s` must be null or a string obtained from this library.
 */
void mslab_string_free(char *s);

/**
 * Parse an expression such as `log(z + 1i)` into a handle.
 *
 * On success `*out` owns the handle; release it with [`mslab_expr_free`].
 */
enum MslabStatus mslab_expr_parse(const char *src, struct MslabExpr **out);

/**
 * Differentiate an expression into a fresh handle.
 */
enum MslabStatus mslab_expr_derivative(const struct MslabExpr *expr, struct MslabExpr **out);

/**
 * Evaluate an expression at `re + i*im`, writing the result components.
 */
enum MslabStatus mslab_expr_eval(const struct MslabExpr *expr,
                                 double re,
                                 double im,
                                 double *out_re,
                                 double *out_im);

/**
 * Render an expression back to text. Release the string with
 * [`mslab_string_free`].
 */
enum MslabStatus mslab_expr_format(const struct MslabExpr *expr, char **out);

/**
 * Release an expression handle. Null is a no-op.
 *
 * # Safety
 * `expr` must be null or a pointer from [`mslab_expr_parse`] or
 * [`mslab_expr_derivative`] that has not been freed.
 */
void mslab_expr_free(struct MslabExpr *expr);

/**
 * Build a space from its JSON description: `gammas` as `[re, im]` pairs,
 * `weights`, and an optional `tail` block. Release the handle with
 * [`mslab_space_free`].
 */
enum MslabStatus mslab_space_parse_json(const char *json, struct MslabSpace **out);

/**
 * Number of nodes in the space; zero for a null handle.
 */
uintptr_t mslab_space_len(const struct MslabSpace *space);

/**
 * Sparseness ratio of the node moduli. Needs at least two nodes.
 */
enum MslabStatus mslab_space_sparseness(const struct MslabSpace *space, double *out);

/**
 * Truncated admissibility sum over the declared nodes (the geometric tail
 * bound, when one applies, is not included).
 */
enum MslabStatus mslab_space_admissibility_sum(const struct MslabSpace *space, double *out);

/**
 * Hex digest identifying the space configuration. Release the string with
 * [`mslab_string_free`].
 */
enum MslabStatus mslab_space_hash(const struct MslabSpace *space, char **out);

/**
 * Release a space handle. Null is a no-op.
 *
 * # Safety
 * `space` must be null or a pointer from [`mslab_space_parse_json`] that
 * has not been freed.
 */
void mslab_space_free(struct MslabSpace *space);

/**
 * Run the self-verification suite with the given area constant; pass a
 * non-positive value for the default 4.0.
 *
 * When `token_dir` is non-null and the suite passes, a token recording the
 * constant is written there; the command-line tool honors the same token.
 */
enum MslabStatus mslab_verify(double c_lp, const char *token_dir);

/**
 * Run the integral-operator analysis for a symbol over a space and hand
 * back the rendered JSON report. Pass non-positive `c_lp` or `rel_tol` for
 * the defaults (4.0 and the standard tolerance). Release the string with
 * [`mslab_string_free`].
 */
enum MslabStatus mslab_analyze_volterra(const struct MslabSpace *space,
                                        const char *symbol,
                                        double c_lp,
                                        double rel_tol,
                                        char **out_json);

/**
 * Run the composition-operator analysis for a holomorphic self-map of the
 * upper half-plane, returning the rendered JSON report. Pass non-positive
 * `rel_tol` for the default tolerance. Release the string with
 * [`mslab_string_free`].
 */
enum MslabStatus mslab_analyze_composition(const struct MslabSpace *space,
                                           const char *map,
                                           double rel_tol,
                                           char **out_json);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* MSLAB_H */

#ifndef LGEN_H
#define LGEN_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum LgenStatus {
  LGEN_STATUS_OK = 0,
  LGEN_STATUS_NULL_POINTER = 1,
  LGEN_STATUS_INVALID_ARGUMENT = 2,
  LGEN_STATUS_DEGENERATE_PRIOR = 3,
  LGEN_STATUS_VACUOUS_UTTERANCE = 4,
  LGEN_STATUS_INCONSISTENT_PRIOR = 5,
  LGEN_STATUS_NUMERICAL = 6,
  LGEN_STATUS_IO = 7,
  LGEN_STATUS_BUFFER_TOO_SMALL = 8,
  LGEN_STATUS_PANIC = 9,
} LgenStatus;

/**
 * A discretized prior and its threshold prior.
 */
typedef struct LgenPrior LgenPrior;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer
 * stays valid until the next lgen call on the same thread.
 */
const char *lgen_last_error(void);

/**
 * Static description of a status code.
 */
const char *lgen_status_str(enum LgenStatus status);

/**
 * Prevalence prior: weight `phi` on Beta with mean `gamma` and
 * concentration `xi`, the rest on the near-zero component.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage.
 */
enum LgenStatus lgen_prior_beta_mixture(double phi,
                                        double gamma,
                                        double xi,
                                        size_t bins,
                                        struct LgenPrior **out);

/**
 * Rate prior (events/year): weight `phi` on LogNormal(`mu`, `sigma`), the
 * rest at the floor rate.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage.
 */
enum LgenStatus lgen_prior_rate_mixture(double phi,
                                        double mu,
                                        double sigma,
                                        size_t bins,
                                        struct LgenPrior **out);

/**
 * Named fixture prior, e.g. "lays eggs" or "runs".
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` writable.
 */
enum LgenStatus lgen_prior_fixture(const char *name, size_t bins, struct LgenPrior **out);

/**
 * Release a prior. Null is ignored.
 *
 * # Safety
 * `prior` must come from an `lgen_prior_*` constructor and not be used
 * afterwards.
 */
void lgen_prior_free(struct LgenPrior *prior);

/**
 * Number of grid points.
 *
 * # Safety
 * `prior` must be a live handle or null.
 */
size_t lgen_prior_len(const struct LgenPrior *prior);

/**
 * Copy grid support and mass into caller buffers of length `len`.
 *
 * # Safety
 * `support` and `mass` must each hold `len` doubles.
 */
enum LgenStatus lgen_prior_grid(const struct LgenPrior *prior,
                                double *support,
                                double *mass,
                                size_t len);

/**
 * Listener posterior after `utterance` ("gen", "silence", "some", "most",
 * "quant:<t>"); writes the posterior mass into `mass` (length `len`) when
 * it is non-null and the posterior mean into `mean` when non-null.
 *
 * # Safety
 * Pointers must be valid for the given lengths.
 */
enum LgenStatus lgen_interpret(const struct LgenPrior *prior,
                               const char *utterance,
                               double *mass,
                               size_t len,
                               double *mean);

/**
 * Endorsement probability for a known referent prevalence or rate.
 *
 * # Safety
 * `prior` must be a live handle and `out` writable.
 */
enum LgenStatus lgen_endorse(const struct LgenPrior *prior,
                             double referent,
                             double lambda,
                             double *out);

/**
 * Endorsement when the speaker's referent belief is a distribution over
 * the prior's grid (`referent_mass`, length `len`).
 *
 * # Safety
 * `referent_mass` must hold `len` doubles.
 */
enum LgenStatus lgen_endorse_expectation(const struct LgenPrior *prior,
                                         const double *referent_mass,
                                         size_t len,
                                         double lambda,
                                         double *out);

/**
 * Endorsement of the fixed-threshold speaker with guessing rate `noise`.
 *
 * # Safety
 * `prior` must be a live handle and `out` writable.
 */
enum LgenStatus lgen_endorse_fixed(const struct LgenPrior *prior,
                                   double referent,
                                   double theta_star,
                                   double noise,
                                   double lambda,
                                   double *out);

/**
 * Events/year for "`times` times in `interval`" ("week", "month",
 * "5 years", ...).
 *
 * # Safety
 * `interval` must be a NUL-terminated string and `out` writable.
 */
enum LgenStatus lgen_rate_from_frequency(double times, const char *interval, double *out);

/**
 * Library version as a static string.
 */
const char *lgen_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LGEN_H */

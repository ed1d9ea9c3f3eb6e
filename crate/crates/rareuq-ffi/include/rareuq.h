/* C interface to the rareuq rare-event estimation library. */

#ifndef RAREUQ_H
#define RAREUQ_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Interval from the central limit theorem on one batch; covers
// simulation noise only.
#define RAREUQ_ESTIMATE_SIMULATION_ONLY 0

// Interval from bootstrap replicate quantiles; covers input-model
// uncertainty.
#define RAREUQ_ESTIMATE_BOOTSTRAP_QUANTILE 1

// Resample the original data with replacement and refit.
#define RAREUQ_BOOTSTRAP_PLAIN 0

// Draw fresh data of the original size from the fitted model and refit.
#define RAREUQ_BOOTSTRAP_PARAMETRIC 1

// Draw parameters from the closed-form Fisher normal approximation.
#define RAREUQ_BOOTSTRAP_CLOSED_FISHER 2

// Draw parameters from the empirical Fisher normal approximation.
#define RAREUQ_BOOTSTRAP_EMPIRICAL_FISHER 3

// Outcome of a fallible call.
typedef enum RareuqStatus {
  // The call succeeded and all output parameters are set.
  RAREUQ_STATUS_OK = 0,
  // A required pointer argument was null.
  RAREUQ_STATUS_NULL_ARGUMENT = 1,
  // A string argument was not valid UTF-8.
  RAREUQ_STATUS_UTF8 = 2,
  // JSON input could not be parsed or did not describe a model.
  RAREUQ_STATUS_JSON = 3,
  // An argument value was rejected (bad parameter, dimension
  // mismatch, empty or degenerate data, unknown scheme code).
  RAREUQ_STATUS_INVALID_INPUT = 4,
  // The computation itself failed (callback error, I/O, resampling
  // stuck, mismatched models).
  RAREUQ_STATUS_RUNTIME = 5,
  // A panic was caught at the boundary; state may be inconsistent.
  RAREUQ_STATUS_PANIC = 6,
} RareuqStatus;

// Opaque handle to a stored batch of importance-sampling draws with
// their performance outputs and sampling log-densities.
typedef struct RareuqBatch RareuqBatch;

// Opaque fitted-model handle: parameter estimates plus the Fisher
// information needed by the asymptotic bootstrap schemes.
typedef struct RareuqFitted RareuqFitted;

// Opaque parametric input model handle.
typedef struct RareuqModel RareuqModel;

// Performance function supplied by the caller.
//
// Receives one sample point (`dim` doubles) and the context pointer
// passed to `rareuq_run_batch`. Returning NaN reports evaluation
// failure and aborts the batch. Batches are filled from multiple
// threads, so the callback and its context must be safe to call
// concurrently.
typedef double (*RareuqPerfFn)(const double *point, size_t dim, void *ctx);

// Point estimate with a confidence interval. The standard error field
// avoids the name `stderr`, which C's stdio.h claims as a macro.
typedef struct RareuqEstimate {
  double point;
  double std_error;
  double lower;
  double upper;
  // Nominal miscoverage of `[lower, upper]`.
  double alpha;
  // `RAREUQ_ESTIMATE_SIMULATION_ONLY` or
  // `RAREUQ_ESTIMATE_BOOTSTRAP_QUANTILE`.
  int32_t kind;
} RareuqEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static string. Do not free.
const char *rareuq_version(void);

// Message for the most recent failure on the calling thread, or an
// empty string if none. The pointer stays valid until the next failing
// call on this thread. Do not free.
const char *rareuq_last_error_message(void);

// Releases a string allocated by this library.
void rareuq_string_free(char *string);

// Creates an exponential model with the given mean.
enum RareuqStatus rareuq_model_exponential(double mean, struct RareuqModel **out_model);

// Creates a Gaussian model with the given mean and standard deviation.
enum RareuqStatus rareuq_model_gaussian(double mean, double stdev, struct RareuqModel **out_model);

// Creates a product model over independent components. The components
// are copied; the caller still owns (and frees) the inputs.
enum RareuqStatus rareuq_model_product(const struct RareuqModel *const *components,
                                       size_t count,
                                       struct RareuqModel **out_model);

// Parses a model from its JSON form.
enum RareuqStatus rareuq_model_from_json(const char *json, struct RareuqModel **out_model);

// Serializes a model to JSON. The caller frees the string with
// `rareuq_string_free`.
enum RareuqStatus rareuq_model_to_json(const struct RareuqModel *model, char **out_json);

// Writes the model's sample dimension.
enum RareuqStatus rareuq_model_dim(const struct RareuqModel *model, size_t *out_dim);

// Evaluates the model's log-density at one point of `dim` coordinates.
enum RareuqStatus rareuq_model_log_density(const struct RareuqModel *model,
                                           const double *point,
                                           size_t dim,
                                           double *out_log_density);

// Creates the exponentially tilted version of a model, one tilt
// coordinate per sample coordinate.
enum RareuqStatus rareuq_model_tilt(const struct RareuqModel *model,
                                    const double *tilt,
                                    size_t dim,
                                    struct RareuqModel **out_model);

// Releases a model handle.
void rareuq_model_free(struct RareuqModel *model);

// Fits the template model's family to data by maximum likelihood.
// `data` holds `count` points of the template's dimension, row-major.
// Only the template's family matters; its parameter values do not.
enum RareuqStatus rareuq_fit(const struct RareuqModel *template_model,
                             const double *data,
                             size_t count,
                             struct RareuqFitted **out_fitted);

// Copies the fitted model out as a fresh model handle.
enum RareuqStatus rareuq_fitted_model(const struct RareuqFitted *fitted,
                                      struct RareuqModel **out_model);

// Writes the number of data points the model was fitted on.
enum RareuqStatus rareuq_fitted_sample_count(const struct RareuqFitted *fitted, size_t *out_count);

// Releases a fitted-model handle.
void rareuq_fitted_free(struct RareuqFitted *fitted);

// Draws `n` points from `sampling_model`, evaluates the performance
// callback on each, and stores the batch together with the densities
// needed for importance-sampling estimates against `nominal_model`.
// Pass the same model for both to sample crudely. Deterministic in
// `seed` regardless of thread count.
enum RareuqStatus rareuq_run_batch(const struct RareuqModel *sampling_model,
                                   const struct RareuqModel *nominal_model,
                                   RareuqPerfFn perf,
                                   void *perf_ctx,
                                   size_t n,
                                   uint64_t seed,
                                   struct RareuqBatch **out_batch);

// Writes the number of stored draws.
enum RareuqStatus rareuq_batch_n(const struct RareuqBatch *batch, size_t *out_n);

// Saves a batch as a CSV of draws plus a JSON sidecar holding the
// models. Both paths are created or truncated.
enum RareuqStatus rareuq_batch_save(const struct RareuqBatch *batch,
                                    const char *csv_path,
                                    const char *sidecar_path);

// Loads a batch saved by `rareuq_batch_save`.
enum RareuqStatus rareuq_batch_load(const char *csv_path,
                                    const char *sidecar_path,
                                    struct RareuqBatch **out_batch);

// Releases a batch handle.
void rareuq_batch_free(struct RareuqBatch *batch);

// Importance-sampling estimate of the mean performance under
// `target_model`, reweighting the stored batch. Pass a null target to
// estimate under the batch's own nominal model. The interval is the
// CLT one: simulation noise only.
enum RareuqStatus rareuq_is_estimate(const struct RareuqBatch *batch,
                                     const struct RareuqModel *target_model,
                                     double alpha,
                                     struct RareuqEstimate *out_estimate);

// Sample-mean estimate for a batch drawn directly from its nominal
// model. Fails on tilted batches; use `rareuq_is_estimate` there.
enum RareuqStatus rareuq_crude_estimate(const struct RareuqBatch *batch,
                                        double alpha,
                                        struct RareuqEstimate *out_estimate);

// Input-uncertainty interval by bootstrap with likelihood-ratio reuse:
// resamples parameters from `fitted` under the given scheme, then
// reweights the one stored batch per replicate, with no new
// performance evaluations.
//
// `scheme` is one of the `RAREUQ_BOOTSTRAP_*` codes. `data` holds the
// original fitting data (`data_count` rows, like `rareuq_fit`) and is
// required for `RAREUQ_BOOTSTRAP_PLAIN`; the other schemes accept null.
// On success writes the estimate whose `[lower, upper]` is the
// replicate quantile interval at miscoverage `alpha`, and, if
// `out_replicates` is non-null, fills it with `replicate_count`
// replicate estimates.
enum RareuqStatus rareuq_lr_uq_interval(const struct RareuqBatch *batch,
                                        const struct RareuqFitted *fitted,
                                        const double *data,
                                        size_t data_count,
                                        int32_t scheme,
                                        size_t replicate_count,
                                        double alpha,
                                        uint64_t seed,
                                        struct RareuqEstimate *out_estimate,
                                        double *out_replicates);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RAREUQ_H */

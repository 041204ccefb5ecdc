/* C interface for the emonli zero-shot emotion classification library.
 *
 * Handles are opaque pointers owned by the library. Every fallible call
 * returns an EMONLI_* status code; on failure a human-readable message is
 * available from emonli_last_error_message() until the next failing call on
 * the same thread. All strings are NUL-terminated UTF-8.
 *
 * Maintained by hand; keep in sync with crates/ffi/src/lib.rs.
 */

#ifndef EMONLI_H
#define EMONLI_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#define EMONLI_OK 0
#define EMONLI_ERR_NULL_POINTER 1
#define EMONLI_ERR_INVALID_UTF8 2
#define EMONLI_ERR_CATALOG 3
#define EMONLI_ERR_SCORE 4
#define EMONLI_ERR_METRICS 5
#define EMONLI_ERR_INVALID_ARGUMENT 6
/* Kendall's tau undefined: all values tied in one argument. */
#define EMONLI_ERR_DEGENERATE 7

/* Opaque prompt-catalog handle. */
typedef struct EmonliCatalog EmonliCatalog;

/* Message for the most recent failure on this thread; valid until the next
 * failing call on the same thread. Never NULL. */
const char *emonli_last_error_message(void);

/* Loads n_paths catalog files merged left-to-right into *out.
 * Free with emonli_catalog_free. */
int emonli_catalog_load(const char *const *paths, size_t n_paths,
                        EmonliCatalog **out);

void emonli_catalog_free(EmonliCatalog *catalog);

/* Number of languages present in the catalog (0 for NULL). */
size_t emonli_catalog_language_count(const EmonliCatalog *catalog);

/* Renders the hypothesis strings for (prompt_type, language, emotion):
 * six strings for the synonym prompt types (emo-s, expr-s, feels-s), one
 * otherwise. On success *out holds *out_len strings; release them with
 * emonli_strings_free. Prompt types: emo-name, emo-s, expr-emo, expr-s,
 * feels-emo, feels-s, wn-def. */
int emonli_catalog_render(const EmonliCatalog *catalog,
                          const char *prompt_type, const char *language,
                          const char *emotion, char ***out, size_t *out_len);

void emonli_strings_free(char **strings, size_t len);

/* Deterministic token-overlap entailment score. out_probs receives
 * (entail, neutral, contradict) and always sums to 1. */
int emonli_mock_score(const char *premise, const char *hypothesis,
                      double out_probs[3]);

/* Classifies one text with the mock scorer. out_scores receives the
 * aggregated entailment probability per label in the order given (room for
 * n_labels doubles); *out_predicted receives the index of the predicted
 * label. Ties break toward the lexicographically smallest label. */
int emonli_classify_mock(const EmonliCatalog *catalog, const char *text,
                         const char *const *labels, size_t n_labels,
                         const char *prompt_type, const char *language,
                         double *out_scores, size_t *out_predicted);

/* Macro-F1 of pred against gold (n parallel entries) over a label set. */
int emonli_macro_f1(const char *const *gold, const char *const *pred,
                    size_t n, const char *const *labels, size_t n_labels,
                    double *out_f1);

/* Tie-corrected Kendall rank correlation of two n-length arrays.
 * Returns EMONLI_ERR_DEGENERATE when tau is undefined. */
int emonli_kendall_tau_b(const double *x, const double *y, size_t n,
                         double *out_tau);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* EMONLI_H */

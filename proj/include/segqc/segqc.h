/* Segmentation quality control: stable C interface.
 *
 * Every function returns a segqc_status. On failure the message is available
 * from segqc_last_error() on the calling thread until the next call.
 * Strings returned through char** are owned by the caller and released with
 * segqc_string_free(). Handles are released with their matching *_free().
 */
#ifndef SEGQC_SEGQC_H
#define SEGQC_SEGQC_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(SEGQC_BUILDING)
#define SEGQC_API __declspec(dllexport)
#else
#define SEGQC_API __declspec(dllimport)
#endif
#else
#define SEGQC_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum segqc_status {
  SEGQC_OK = 0,
  SEGQC_ERR_USAGE = 1,    /* bad argument or option */
  SEGQC_ERR_DATA = 2,     /* unreadable or inconsistent input */
  SEGQC_ERR_INTERNAL = 3  /* anything else */
} segqc_status;

typedef struct segqc_image segqc_image;
typedef struct segqc_mask segqc_mask;
typedef struct segqc_index segqc_index;
typedef struct segqc_calibration segqc_calibration;

SEGQC_API const char* segqc_version(void);
SEGQC_API const char* segqc_last_error(void);
SEGQC_API void segqc_string_free(char* s);

/* Grayscale images, intensities in [0,1], row-major. */
SEGQC_API segqc_status segqc_image_load(const char* path, segqc_image** out);
SEGQC_API segqc_status segqc_image_create(int width, int height, const double* pixels, segqc_image** out);
SEGQC_API segqc_status segqc_image_save(const segqc_image* img, const char* path);
SEGQC_API segqc_status segqc_image_size(const segqc_image* img, int* width, int* height);
SEGQC_API segqc_status segqc_image_pixels(const segqc_image* img, double* out, size_t capacity);
SEGQC_API void segqc_image_free(segqc_image* img);

/* Label masks, labels in [0, class_count), row-major. */
SEGQC_API segqc_status segqc_mask_load(const char* path, int class_count, segqc_mask** out);
SEGQC_API segqc_status segqc_mask_create(int width, int height, int class_count, const int32_t* labels,
                                         segqc_mask** out);
SEGQC_API segqc_status segqc_mask_save(const segqc_mask* mask, const char* path);
SEGQC_API segqc_status segqc_mask_size(const segqc_mask* mask, int* width, int* height, int* class_count);
SEGQC_API segqc_status segqc_mask_labels(const segqc_mask* mask, int32_t* out, size_t capacity);
SEGQC_API void segqc_mask_free(segqc_mask* mask);

/* metric: "dsc", "hausdorff" or "assd". */
SEGQC_API segqc_status segqc_metric(const char* metric, const segqc_mask* pred, const segqc_mask* gt, double* out);

/* Affine registration of `moving` onto `fixed`. coeffs receives the pixel
 * transform (a, b, c, d, tx, ty) mapping fixed coordinates into moving ones:
 * x' = a*x + b*y + tx, y' = c*x + d*y + ty. Pass levels/iterations <= 0 for
 * defaults. */
SEGQC_API segqc_status segqc_atlas_register(const segqc_image* fixed, const segqc_image* moving, int levels,
                                            int iterations, double coeffs[6]);
/* Segments `query` by registering it onto the atlas image and carrying the
 * atlas labels across. */
SEGQC_API segqc_status segqc_atlas_segment(const segqc_image* atlas_image, const segqc_mask* atlas_mask,
                                           const segqc_image* query, segqc_mask** out);

/* Embedding index loaded from JSONL ({"id": str, "vec": [float]} per line). */
SEGQC_API segqc_status segqc_index_load(const char* path, segqc_index** out);
SEGQC_API segqc_status segqc_index_size(const segqc_index* index, size_t* count, size_t* dim);
/* similarity: "cosine", "euclidean" or "inner". Writes a JSON array of
 * {"id", "similarity"} in descending similarity order. */
SEGQC_API segqc_status segqc_index_top_k(const segqc_index* index, const float* query, size_t dim, size_t k,
                                         const char* similarity, char** out_json);
SEGQC_API void segqc_index_free(segqc_index* index);

/* Split conformal calibration. `scores` holds n score sets back to back,
 * set i spanning [offsets[i], offsets[i+1]). offsets has n+1 entries and
 * truths has n.
 * kind: "cqr", "residual" or "locally-weighted"; mode: "max" or "mean". */
SEGQC_API segqc_status segqc_calibration_fit(const double* scores, const size_t* offsets, const double* truths,
                                             size_t n, double alpha, double p_low, double p_high, const char* kind,
                                             const char* mode, const char* metric, segqc_calibration** out);
SEGQC_API segqc_status segqc_calibration_from_json(const char* json, segqc_calibration** out);
SEGQC_API segqc_status segqc_calibration_to_json(const segqc_calibration* calib, char** out_json);
/* +infinity when the calibration set is too small for the requested alpha. */
SEGQC_API segqc_status segqc_calibration_q_hat(const segqc_calibration* calib, double* out);
SEGQC_API segqc_status segqc_calibration_predict(const segqc_calibration* calib, const double* scores, size_t m,
                                                 double* lower, double* upper, int* degenerate);
SEGQC_API void segqc_calibration_free(segqc_calibration* calib);

/* Default value of every command option as a JSON object. */
SEGQC_API segqc_status segqc_default_config(char** out_json);
/* Help text of every command option as a JSON object. */
SEGQC_API segqc_status segqc_option_help(char** out_json);
/* Runs index | rca | calibrate | predict | synth | eval with options given as a
 * JSON object (keys as in segqc_default_config). out_json may be NULL. */
SEGQC_API segqc_status segqc_run(const char* command, const char* options_json, char** out_json);

#ifdef __cplusplus
}
#endif

#endif

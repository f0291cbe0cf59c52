#include "segqc/segqc.h"

#include <cstring>
#include <nlohmann/json.hpp>
#include <string>

#include "segqc/conformal.hpp"
#include "segqc/core.hpp"
#include "segqc/errors.hpp"
#include "segqc/io.hpp"
#include "segqc/metrics.hpp"
#include "segqc/pipeline.hpp"
#include "segqc/retrieval.hpp"
#include "segqc/segmenter.hpp"

struct segqc_image {
  segqc::GrayImage value;
};
struct segqc_mask {
  segqc::LabelMask value;
};
struct segqc_index {
  segqc::EmbeddingIndex value;
};
struct segqc_calibration {
  segqc::ConformalCalibration value;
};

namespace {

thread_local std::string g_last_error;

template <typename Fn>
segqc_status guarded(Fn&& fn) noexcept {
  g_last_error.clear();
  try {
    fn();
    return SEGQC_OK;
  } catch (const segqc::UsageError& e) {
    g_last_error = e.what();
    return SEGQC_ERR_USAGE;
  } catch (const segqc::DataError& e) {
    g_last_error = e.what();
    return SEGQC_ERR_DATA;
  } catch (const nlohmann::json::exception& e) {
    g_last_error = std::string("invalid JSON: ") + e.what();
    return SEGQC_ERR_USAGE;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SEGQC_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return SEGQC_ERR_INTERNAL;
  }
}

template <typename T>
void require(const T* p, const char* what) {
  if (p == nullptr) throw segqc::UsageError(std::string(what) + " must not be NULL");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

extern "C" {

const char* segqc_version(void) { return "1.0.0"; }

const char* segqc_last_error(void) { return g_last_error.c_str(); }

void segqc_string_free(char* s) { std::free(s); }

segqc_status segqc_image_load(const char* path, segqc_image** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new segqc_image{segqc::load_image(path)};
  });
}

segqc_status segqc_image_create(int width, int height, const double* pixels, segqc_image** out) {
  return guarded([&] {
    require(pixels, "pixels");
    require(out, "out");
    if (width < 1 || height < 1) throw segqc::UsageError("image dimensions must be positive");
    const auto n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    *out = new segqc_image{segqc::GrayImage(width, height, std::vector<double>(pixels, pixels + n))};
  });
}

segqc_status segqc_image_save(const segqc_image* img, const char* path) {
  return guarded([&] {
    require(img, "img");
    require(path, "path");
    segqc::save_image(img->value, path);
  });
}

segqc_status segqc_image_size(const segqc_image* img, int* width, int* height) {
  return guarded([&] {
    require(img, "img");
    if (width) *width = img->value.width();
    if (height) *height = img->value.height();
  });
}

segqc_status segqc_image_pixels(const segqc_image* img, double* out, size_t capacity) {
  return guarded([&] {
    require(img, "img");
    require(out, "out");
    const auto v = img->value.values();
    if (capacity < v.size()) throw segqc::UsageError("output buffer too small");
    std::copy(v.begin(), v.end(), out);
  });
}

void segqc_image_free(segqc_image* img) { delete img; }

segqc_status segqc_mask_load(const char* path, int class_count, segqc_mask** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new segqc_mask{segqc::load_mask(path, class_count)};
  });
}

segqc_status segqc_mask_create(int width, int height, int class_count, const int32_t* labels, segqc_mask** out) {
  return guarded([&] {
    require(labels, "labels");
    require(out, "out");
    if (width < 1 || height < 1) throw segqc::UsageError("mask dimensions must be positive");
    const auto n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    *out = new segqc_mask{segqc::LabelMask(width, height, class_count, std::vector<int32_t>(labels, labels + n))};
  });
}

segqc_status segqc_mask_save(const segqc_mask* mask, const char* path) {
  return guarded([&] {
    require(mask, "mask");
    require(path, "path");
    segqc::save_mask(mask->value, path);
  });
}

segqc_status segqc_mask_size(const segqc_mask* mask, int* width, int* height, int* class_count) {
  return guarded([&] {
    require(mask, "mask");
    if (width) *width = mask->value.width();
    if (height) *height = mask->value.height();
    if (class_count) *class_count = mask->value.class_count();
  });
}

segqc_status segqc_mask_labels(const segqc_mask* mask, int32_t* out, size_t capacity) {
  return guarded([&] {
    require(mask, "mask");
    require(out, "out");
    const auto v = mask->value.labels();
    if (capacity < v.size()) throw segqc::UsageError("output buffer too small");
    std::copy(v.begin(), v.end(), out);
  });
}

void segqc_mask_free(segqc_mask* mask) { delete mask; }

segqc_status segqc_metric(const char* metric, const segqc_mask* pred, const segqc_mask* gt, double* out) {
  return guarded([&] {
    require(metric, "metric");
    require(pred, "pred");
    require(gt, "gt");
    require(out, "out");
    *out = segqc::evaluate_metric(segqc::parse_metric(metric), pred->value, gt->value);
  });
}

segqc_status segqc_atlas_register(const segqc_image* fixed, const segqc_image* moving, int levels, int iterations,
                                  double coeffs[6]) {
  return guarded([&] {
    require(fixed, "fixed");
    require(moving, "moving");
    require(coeffs, "coeffs");
    segqc::AtlasConfig cfg;
    if (levels > 0) cfg.pyramid_levels = levels;
    if (iterations > 0) cfg.iterations_per_level = iterations;
    const auto t = segqc::atlas_register(moving->value, fixed->value, cfg);
    const double v[6] = {t.a, t.b, t.c, t.d, t.tx, t.ty};
    std::copy(v, v + 6, coeffs);
  });
}

segqc_status segqc_atlas_segment(const segqc_image* atlas_image, const segqc_mask* atlas_mask,
                                 const segqc_image* query, segqc_mask** out) {
  return guarded([&] {
    require(atlas_image, "atlas_image");
    require(atlas_mask, "atlas_mask");
    require(query, "query");
    require(out, "out");
    *out = new segqc_mask{segqc::atlas_segment(atlas_image->value, atlas_mask->value, query->value)};
  });
}

segqc_status segqc_index_load(const char* path, segqc_index** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new segqc_index{segqc::load_embeddings(path)};
  });
}

segqc_status segqc_index_size(const segqc_index* index, size_t* count, size_t* dim) {
  return guarded([&] {
    require(index, "index");
    if (count) *count = index->value.size();
    if (dim) *dim = index->value.dim();
  });
}

segqc_status segqc_index_top_k(const segqc_index* index, const float* query, size_t dim, size_t k,
                               const char* similarity, char** out_json) {
  return guarded([&] {
    require(index, "index");
    require(query, "query");
    require(out_json, "out_json");
    const auto kind = segqc::parse_similarity(similarity ? similarity : "cosine");
    const segqc::EmbeddingVector q{"", std::vector<float>(query, query + dim)};
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& n : index->value.top_k(q, k, kind)) arr.push_back({{"id", n.id}, {"similarity", n.similarity}});
    *out_json = dup_string(arr.dump());
  });
}

void segqc_index_free(segqc_index* index) { delete index; }

segqc_status segqc_calibration_fit(const double* scores, const size_t* offsets, const double* truths, size_t n,
                                   double alpha, double p_low, double p_high, const char* kind, const char* mode,
                                   const char* metric, segqc_calibration** out) {
  return guarded([&] {
    require(scores, "scores");
    require(offsets, "offsets");
    require(truths, "truths");
    require(out, "out");
    segqc::CalibrationOptions opts;
    opts.alpha = alpha;
    opts.p_low = p_low;
    opts.p_high = p_high;
    if (kind) opts.kind = segqc::parse_nonconformity(kind);
    if (mode) opts.mode = segqc::parse_estimate_mode(mode);
    if (metric) opts.metric = segqc::parse_metric(metric);
    std::vector<segqc::CalibrationRecord> records(n);
    for (size_t i = 0; i < n; ++i) {
      if (offsets[i + 1] < offsets[i]) throw segqc::UsageError("offsets must be non-decreasing");
      records[i].id = std::to_string(i);
      records[i].scores.assign(scores + offsets[i], scores + offsets[i + 1]);
      records[i].truth = truths[i];
    }
    *out = new segqc_calibration{segqc::calibrate(records, opts)};
  });
}

segqc_status segqc_calibration_from_json(const char* json, segqc_calibration** out) {
  return guarded([&] {
    require(json, "json");
    require(out, "out");
    const auto j = nlohmann::json::parse(json, nullptr, false);
    if (j.is_discarded()) throw segqc::DataError("calibration is not valid JSON");
    *out = new segqc_calibration{j.get<segqc::ConformalCalibration>()};
  });
}

segqc_status segqc_calibration_to_json(const segqc_calibration* calib, char** out_json) {
  return guarded([&] {
    require(calib, "calib");
    require(out_json, "out_json");
    *out_json = dup_string(nlohmann::json(calib->value).dump());
  });
}

segqc_status segqc_calibration_q_hat(const segqc_calibration* calib, double* out) {
  return guarded([&] {
    require(calib, "calib");
    require(out, "out");
    *out = calib->value.q_hat;
  });
}

segqc_status segqc_calibration_predict(const segqc_calibration* calib, const double* scores, size_t m, double* lower,
                                       double* upper, int* degenerate) {
  return guarded([&] {
    require(calib, "calib");
    require(scores, "scores");
    const auto iv = segqc::predict_interval(std::span<const double>(scores, m), calib->value);
    if (lower) *lower = iv.lower;
    if (upper) *upper = iv.upper;
    if (degenerate) *degenerate = iv.degenerate ? 1 : 0;
  });
}

void segqc_calibration_free(segqc_calibration* calib) { delete calib; }

segqc_status segqc_default_config(char** out_json) {
  return guarded([&] {
    require(out_json, "out_json");
    *out_json = dup_string(segqc::RunConfig{}.to_json().dump());
  });
}

segqc_status segqc_option_help(char** out_json) {
  return guarded([&] {
    require(out_json, "out_json");
    *out_json = dup_string(nlohmann::json(segqc::option_help()).dump());
  });
}

segqc_status segqc_run(const char* command, const char* options_json, char** out_json) {
  return guarded([&] {
    require(command, "command");
    nlohmann::json options = nlohmann::json::object();
    if (options_json != nullptr && *options_json != '\0') {
      options = nlohmann::json::parse(options_json, nullptr, false);
      if (options.is_discarded()) throw segqc::UsageError("options are not valid JSON");
    }
    const auto result = segqc::run_command(command, options);
    if (out_json) *out_json = dup_string(result.dump(2));
  });
}

}  // extern "C"

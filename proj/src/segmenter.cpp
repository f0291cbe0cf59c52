#include "segqc/segmenter.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>

#include "segqc/errors.hpp"
#include "segqc/io.hpp"

namespace segqc {

namespace {

using Params = std::array<double, 6>;  // a, b, c, d, tx, ty in normalized coordinates

constexpr Params kIdentity{1, 0, 0, 1, 0, 0};

// Raster plus the mapping between pixel and normalized coordinates:
// normalized = (pixel - center) / scale.
struct Level {
  int width = 0;
  int height = 0;
  std::vector<double> values;
  double cx = 0, cy = 0, scale = 1;

  double sample_clamped(double x, double y) const {
    x = std::clamp(x, 0.0, static_cast<double>(width - 1));
    y = std::clamp(y, 0.0, static_cast<double>(height - 1));
    const int x0 = static_cast<int>(x);
    const int y0 = static_cast<int>(y);
    const int x1 = std::min(x0 + 1, width - 1);
    const int y1 = std::min(y0 + 1, height - 1);
    const double wx = x - x0;
    const double wy = y - y0;
    const double* r0 = values.data() + static_cast<std::size_t>(y0) * width;
    const double* r1 = values.data() + static_cast<std::size_t>(y1) * width;
    const double top = r0[x0] + (r0[x1] - r0[x0]) * wx;
    const double bot = r1[x0] + (r1[x1] - r1[x0]) * wx;
    return top + (bot - top) * wy;
  }
};

Level make_level(int width, int height, std::vector<double> values) {
  Level l;
  l.width = width;
  l.height = height;
  l.values = std::move(values);
  l.cx = (width - 1) / 2.0;
  l.cy = (height - 1) / 2.0;
  l.scale = std::max(width, height) / 2.0;
  return l;
}

// Box-filter downsampling by an integer factor; partial edge blocks average
// the pixels they cover.
Level downsample(const GrayImage& img, int factor) {
  if (factor == 1) return make_level(img.width(), img.height(), {img.values().begin(), img.values().end()});
  const int w = (img.width() + factor - 1) / factor;
  const int h = (img.height() + factor - 1) / factor;
  std::vector<double> out(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double sum = 0;
      int n = 0;
      for (int yy = y * factor; yy < std::min((y + 1) * factor, img.height()); ++yy) {
        for (int xx = x * factor; xx < std::min((x + 1) * factor, img.width()); ++xx) {
          sum += img.at(xx, yy);
          ++n;
        }
      }
      out[static_cast<std::size_t>(y) * w + x] = sum / n;
    }
  }
  return make_level(w, h, std::move(out));
}

double level_cost(const Level& atlas, const Level& query, const Params& p) {
  double sum = 0;
  for (int y = 0; y < query.height; ++y) {
    const double yn = (y - query.cy) / query.scale;
    // Row start in atlas pixel coordinates; advances by a fixed increment per x.
    const double x0n = (0 - query.cx) / query.scale;
    double ax = (p[0] * x0n + p[1] * yn + p[4]) * atlas.scale + atlas.cx;
    double ay = (p[2] * x0n + p[3] * yn + p[5]) * atlas.scale + atlas.cy;
    const double dax = p[0] * atlas.scale / query.scale;
    const double day = p[2] * atlas.scale / query.scale;
    const double* qrow = query.values.data() + static_cast<std::size_t>(y) * query.width;
    for (int x = 0; x < query.width; ++x) {
      const double diff = atlas.sample_clamped(ax, ay) - qrow[x];
      sum += diff * diff;
      ax += dax;
      ay += day;
    }
  }
  return sum / (static_cast<double>(query.width) * query.height);
}

AffineTransform2D to_pixel_transform(const Params& p, const Level& atlas, const Level& query) {
  // atlas_px = s_a * (A * (x - c_q) / s_q + t) + c_a
  const double k = atlas.scale / query.scale;
  AffineTransform2D t;
  t.a = p[0] * k;
  t.b = p[1] * k;
  t.c = p[2] * k;
  t.d = p[3] * k;
  t.tx = atlas.cx + atlas.scale * p[4] - t.a * query.cx - t.b * query.cy;
  t.ty = atlas.cy + atlas.scale * p[5] - t.c * query.cx - t.d * query.cy;
  return t;
}

}  // namespace

bool AffineTransform2D::finite() const {
  return std::isfinite(a) && std::isfinite(b) && std::isfinite(c) && std::isfinite(d) && std::isfinite(tx) &&
         std::isfinite(ty);
}

void AtlasConfig::validate() const {
  if (pyramid_levels < 1 || iterations_per_level < 1 || !(fd_step > 0) || !(initial_step > 0) || !(min_step > 0)) {
    throw UsageError("atlas configuration values must all be positive");
  }
}

double registration_cost(const GrayImage& atlas, const GrayImage& query, const AffineTransform2D& t) {
  double sum = 0;
  for (int y = 0; y < query.height(); ++y) {
    for (int x = 0; x < query.width(); ++x) {
      auto [ax, ay] = t.apply(x, y);
      ax = std::clamp(ax, 0.0, static_cast<double>(atlas.width() - 1));
      ay = std::clamp(ay, 0.0, static_cast<double>(atlas.height() - 1));
      const int x0 = static_cast<int>(ax);
      const int y0 = static_cast<int>(ay);
      const int x1 = std::min(x0 + 1, atlas.width() - 1);
      const int y1 = std::min(y0 + 1, atlas.height() - 1);
      const double wx = ax - x0;
      const double wy = ay - y0;
      const double v = (atlas.at(x0, y0) * (1 - wx) + atlas.at(x1, y0) * wx) * (1 - wy) +
                       (atlas.at(x0, y1) * (1 - wx) + atlas.at(x1, y1) * wx) * wy;
      const double diff = v - query.at(x, y);
      sum += diff * diff;
    }
  }
  return sum / static_cast<double>(query.size());
}

RegistrationResult atlas_register_traced(const GrayImage& atlas, const GrayImage& query, const AtlasConfig& cfg) {
  cfg.validate();
  if (!same_dims(atlas, query)) throw DataError("atlas and query images must have equal dimensions");

  RegistrationResult result;
  Params p = kIdentity;

  for (int level = cfg.pyramid_levels - 1; level >= 0; --level) {
    const int factor = 1 << level;
    const Level a = downsample(atlas, factor);
    const Level q = downsample(query, factor);
    if (a.width < 4 || a.height < 4) continue;

    double cost = level_cost(a, q, p);
    auto& trace = result.level_traces.emplace_back(1, cost);
    double step = cfg.initial_step;
    Params dir{};
    bool need_gradient = true;

    for (int it = 0; it < cfg.iterations_per_level && step >= cfg.min_step; ++it) {
      if (need_gradient) {
        Params grad{};
        double norm = 0;
        for (int i = 0; i < 6; ++i) {
          Params hi = p, lo = p;
          hi[i] += cfg.fd_step;
          lo[i] -= cfg.fd_step;
          grad[i] = (level_cost(a, q, hi) - level_cost(a, q, lo)) / (2 * cfg.fd_step);
          norm += grad[i] * grad[i];
        }
        norm = std::sqrt(norm);
        if (!(norm > 1e-12)) break;  // flat objective
        for (int i = 0; i < 6; ++i) dir[i] = -grad[i] / norm;
        need_gradient = false;
      }
      Params trial = p;
      for (int i = 0; i < 6; ++i) trial[i] += step * dir[i];
      const double trial_cost = level_cost(a, q, trial);
      if (trial_cost < cost) {
        p = trial;
        cost = trial_cost;
        trace.push_back(cost);
        need_gradient = true;
      } else {
        step *= 0.5;
      }
    }
  }

  const Level full = downsample(atlas, 1);
  const Level fullq = downsample(query, 1);
  result.initial_cost = level_cost(full, fullq, kIdentity);
  const double found = level_cost(full, fullq, p);
  if (found <= result.initial_cost) {
    result.transform = to_pixel_transform(p, full, fullq);
    result.final_cost = found;
  } else {
    result.transform = AffineTransform2D::identity();
    result.final_cost = result.initial_cost;
  }
  return result;
}

AffineTransform2D atlas_register(const GrayImage& atlas, const GrayImage& query, const AtlasConfig& cfg) {
  return atlas_register_traced(atlas, query, cfg).transform;
}

LabelMask warp_mask(const LabelMask& pseudo_gt, const AffineTransform2D& t, int out_width, int out_height) {
  if (!t.finite()) throw DataError("warp_mask: transform has non-finite coefficients");
  if (out_width < 1 || out_height < 1) throw UsageError("warp_mask: output size must be positive");
  std::vector<LabelMask::Label> out(static_cast<std::size_t>(out_width) * out_height, 0);
  for (int y = 0; y < out_height; ++y) {
    for (int x = 0; x < out_width; ++x) {
      const auto [sx, sy] = t.apply(x, y);
      const double rx = std::floor(sx + 0.5);
      const double ry = std::floor(sy + 0.5);
      if (rx < 0 || ry < 0 || rx >= pseudo_gt.width() || ry >= pseudo_gt.height()) continue;
      out[static_cast<std::size_t>(y) * out_width + x] = pseudo_gt.at(static_cast<int>(rx), static_cast<int>(ry));
    }
  }
  return LabelMask(out_width, out_height, pseudo_gt.class_count(), std::move(out));
}

LabelMask atlas_segment(const GrayImage& target, const LabelMask& pseudo_gt, const GrayImage& query,
                        const AtlasConfig& cfg) {
  if (!same_dims(target, pseudo_gt)) throw DataError("target image and pseudo ground truth dimensions differ");
  if (pseudo_gt.count(0) == pseudo_gt.size()) {
    return LabelMask::filled(query.width(), query.height(), pseudo_gt.class_count());
  }
  if (same_dims(target, query)) {
    return warp_mask(pseudo_gt, atlas_register(target, query, cfg), query.width(), query.height());
  }
  // Different raster sizes: bring the atlas onto the query grid first.
  const GrayImage atlas = resize_bilinear(target, query.width(), query.height());
  const LabelMask labels = resize_nearest(pseudo_gt, query.width(), query.height());
  return warp_mask(labels, atlas_register(atlas, query, cfg), query.width(), query.height());
}

AtlasSegmenter::AtlasSegmenter(AtlasConfig cfg) : cfg_(cfg) { cfg_.validate(); }

LabelMask AtlasSegmenter::segment(const GrayImage& target, const LabelMask& pseudo_gt,
                                  const ReferenceRecord& query) const {
  return atlas_segment(target, pseudo_gt, query.image, cfg_);
}

ExternalManifest ExternalManifest::from_json_text(const std::string& text, const std::filesystem::path& base_dir) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("external manifest is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw DataError("external manifest must be a JSON object of id -> mask path");
  ExternalManifest m;
  for (const auto& [id, value] : j.items()) {
    if (!value.is_string()) throw DataError("external manifest entry '" + id + "' is not a path string");
    std::filesystem::path p = value.get<std::string>();
    m.masks.emplace(id, p.is_absolute() ? p : base_dir / p);
  }
  return m;
}

ExternalManifest ExternalManifest::load(const std::filesystem::path& path) {
  return from_json_text(read_text_file(path), path.parent_path());
}

LabelMask external_segment(const ExternalManifest& manifest, const std::string& query_id, int expected_width,
                           int expected_height, int class_count) {
  auto it = manifest.masks.find(query_id);
  if (it == manifest.masks.end()) throw DataError("external manifest has no mask for id '" + query_id + "'");
  LabelMask mask = load_mask(it->second, class_count);
  if (mask.width() != expected_width || mask.height() != expected_height) {
    throw DataError("external mask for '" + query_id + "' is " + std::to_string(mask.width()) + "x" +
                    std::to_string(mask.height()) + ", expected " + std::to_string(expected_width) + "x" +
                    std::to_string(expected_height));
  }
  return mask;
}

ExternalSegmenter::ExternalSegmenter(ExternalManifest manifest) : manifest_(std::move(manifest)) {}

LabelMask ExternalSegmenter::segment(const GrayImage&, const LabelMask& pseudo_gt, const ReferenceRecord& query) const {
  return external_segment(manifest_, query.id, query.image.width(), query.image.height(), pseudo_gt.class_count());
}

}  // namespace segqc

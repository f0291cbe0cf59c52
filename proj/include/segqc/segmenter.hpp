#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "segqc/core.hpp"

namespace segqc {

/// Maps query pixel coordinates (x, y) to atlas coordinates
/// (a*x + b*y + tx, c*x + d*y + ty). Pixel centers sit on integer coordinates.
struct AffineTransform2D {
  double a = 1, b = 0, c = 0, d = 1, tx = 0, ty = 0;

  static AffineTransform2D identity() { return {}; }
  std::array<double, 2> apply(double x, double y) const { return {a * x + b * y + tx, c * x + d * y + ty}; }
  bool finite() const;
};

struct AtlasConfig {
  int pyramid_levels = 3;         // coarsest level is downsampled by 2^(levels-1)
  int iterations_per_level = 100;
  double fd_step = 1e-3;          // central-difference step, normalized coordinates
  double initial_step = 0.1;      // descent step length, halved on non-improvement
  double min_step = 1e-6;

  void validate() const;
};

/// Outcome of a registration. `level_traces` holds, per pyramid level from
/// coarse to fine, the level's starting objective followed by the objective
/// after every accepted step.
struct RegistrationResult {
  AffineTransform2D transform;
  double initial_cost = 0;
  double final_cost = 0;
  std::vector<std::vector<double>> level_traces;
};

/// Mean squared difference between atlas(T(x)) and query(x), atlas sampled
/// bilinearly with edge clamping.
double registration_cost(const GrayImage& atlas, const GrayImage& query, const AffineTransform2D& t);

/// Multi-resolution gradient descent with central finite differences on the six
/// affine coefficients. Never returns a transform worse than the identity.
RegistrationResult atlas_register_traced(const GrayImage& atlas, const GrayImage& query, const AtlasConfig& cfg = {});
AffineTransform2D atlas_register(const GrayImage& atlas, const GrayImage& query, const AtlasConfig& cfg = {});

/// Nearest-neighbor label transfer: out(x) = pseudo_gt(round(T(x))), background
/// where T(x) falls outside pseudo_gt.
LabelMask warp_mask(const LabelMask& pseudo_gt, const AffineTransform2D& t, int out_width, int out_height);

/// Registers `query` onto `target` and carries pseudo_gt across. A target of a
/// different size is resampled onto the query grid first.
LabelMask atlas_segment(const GrayImage& target, const LabelMask& pseudo_gt, const GrayImage& query,
                        const AtlasConfig& cfg = {});

/// A model built from one (image, mask) pair and applied to reference images.
class ReverseSegmenter {
 public:
  virtual ~ReverseSegmenter() = default;

  /// Segments `query` using (target, pseudo_gt) as the only supervision. The
  /// result has the query's dimensions and pseudo_gt's class count.
  virtual LabelMask segment(const GrayImage& target, const LabelMask& pseudo_gt,
                            const ReferenceRecord& query) const = 0;
  virtual std::string name() const = 0;
};

class AtlasSegmenter final : public ReverseSegmenter {
 public:
  explicit AtlasSegmenter(AtlasConfig cfg = {});
  LabelMask segment(const GrayImage& target, const LabelMask& pseudo_gt, const ReferenceRecord& query) const override;
  std::string name() const override { return "atlas"; }

 private:
  AtlasConfig cfg_;
};

/// Reference id -> path of a mask produced by an external reverse segmenter.
struct ExternalManifest {
  std::map<std::string, std::filesystem::path> masks;

  /// Parses a JSON object {"<id>": "<path>"}; relative paths resolve against `base_dir`.
  static ExternalManifest from_json_text(const std::string& text, const std::filesystem::path& base_dir);
  static ExternalManifest load(const std::filesystem::path& path);
};

/// Loads the externally produced mask for `query_id`, checking it against the
/// expected dimensions and class count.
LabelMask external_segment(const ExternalManifest& manifest, const std::string& query_id, int expected_width,
                           int expected_height, int class_count);

class ExternalSegmenter final : public ReverseSegmenter {
 public:
  explicit ExternalSegmenter(ExternalManifest manifest);
  LabelMask segment(const GrayImage& target, const LabelMask& pseudo_gt, const ReferenceRecord& query) const override;
  std::string name() const override { return "external"; }

 private:
  ExternalManifest manifest_;
};

}  // namespace segqc

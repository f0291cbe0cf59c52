#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace segqc {

/// Grayscale raster with intensities normalized to [0,1], row-major.
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(int width, int height, std::vector<double> intensities);

  /// Image of the given size filled with a single value.
  static GrayImage filled(int width, int height, double value);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  double at(int x, int y) const { return values_[static_cast<std::size_t>(y) * width_ + x]; }
  std::span<const double> values() const { return values_; }

  bool operator==(const GrayImage&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> values_;
};

/// Integer label map; label 0 is background, labels lie in [0, class_count).
class LabelMask {
 public:
  using Label = std::int32_t;

  LabelMask() = default;
  LabelMask(int width, int height, int class_count, std::vector<Label> labels);

  static LabelMask filled(int width, int height, int class_count, Label value = 0);

  int width() const { return width_; }
  int height() const { return height_; }
  int class_count() const { return class_count_; }
  std::size_t size() const { return labels_.size(); }

  Label at(int x, int y) const { return labels_[static_cast<std::size_t>(y) * width_ + x]; }
  std::span<const Label> labels() const { return labels_; }

  /// Binary mask of pixels equal to `label` (class_count 2).
  LabelMask binary(Label label) const;
  /// Number of pixels carrying `label`.
  std::size_t count(Label label) const;
  /// Sorted distinct labels present.
  std::vector<Label> present_labels() const;

  bool operator==(const LabelMask&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  int class_count_ = 2;
  std::vector<Label> labels_;
};

bool same_dims(const GrayImage& a, const LabelMask& b);
bool same_dims(const LabelMask& a, const LabelMask& b);
bool same_dims(const GrayImage& a, const GrayImage& b);

/// Precomputed embedding vector attached to an image id.
struct EmbeddingVector {
  std::string id;
  std::vector<float> values;

  std::size_t dim() const { return values.size(); }
};

struct ReferenceRecord {
  std::string id;
  GrayImage image;
  LabelMask gt_mask;
  std::optional<EmbeddingVector> embedding;
};

/// Annotated reference set. Ids are unique and the set is never empty.
class ReferenceDatabase {
 public:
  explicit ReferenceDatabase(std::vector<ReferenceRecord> records);

  std::size_t size() const { return records_.size(); }
  const ReferenceRecord& operator[](std::size_t i) const { return records_[i]; }
  std::span<const ReferenceRecord> records() const { return records_; }
  const ReferenceRecord* find(const std::string& id) const;

  /// Subset in the given id order.
  ReferenceDatabase subset(std::span<const std::string> ids) const;

 private:
  std::vector<ReferenceRecord> records_;
};

GrayImage resize_bilinear(const GrayImage& img, int width, int height);
LabelMask resize_nearest(const LabelMask& mask, int width, int height);

}  // namespace segqc

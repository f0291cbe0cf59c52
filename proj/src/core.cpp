#include "segqc/core.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_set>

#include "segqc/errors.hpp"

namespace segqc {

namespace {

void check_dims(int width, int height, std::size_t n, const char* what) {
  if (width < 1 || height < 1) {
    throw DataError(std::string(what) + ": dimensions must be positive, got " + std::to_string(width) +
                    "x" + std::to_string(height));
  }
  if (n != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw DataError(std::string(what) + ": expected " + std::to_string(width) + "x" +
                    std::to_string(height) + " values, got " + std::to_string(n));
  }
}

}  // namespace

GrayImage::GrayImage(int width, int height, std::vector<double> intensities)
    : width_(width), height_(height), values_(std::move(intensities)) {
  check_dims(width_, height_, values_.size(), "GrayImage");
  for (double v : values_) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw DataError("GrayImage: intensity " + std::to_string(v) + " outside [0,1]");
    }
  }
}

GrayImage GrayImage::filled(int width, int height, double value) {
  return GrayImage(width, height,
                   std::vector<double>(static_cast<std::size_t>(std::max(width, 0)) * std::max(height, 0), value));
}

LabelMask::LabelMask(int width, int height, int class_count, std::vector<Label> labels)
    : width_(width), height_(height), class_count_(class_count), labels_(std::move(labels)) {
  check_dims(width_, height_, labels_.size(), "LabelMask");
  if (class_count_ < 2) {
    throw DataError("LabelMask: class_count must be >= 2, got " + std::to_string(class_count_));
  }
  for (Label l : labels_) {
    if (l < 0 || l >= class_count_) {
      throw DataError("invalid label " + std::to_string(l) + " for class_count " + std::to_string(class_count_));
    }
  }
}

LabelMask LabelMask::filled(int width, int height, int class_count, Label value) {
  return LabelMask(width, height, class_count,
                   std::vector<Label>(static_cast<std::size_t>(std::max(width, 0)) * std::max(height, 0), value));
}

LabelMask LabelMask::binary(Label label) const {
  std::vector<Label> out(labels_.size());
  std::transform(labels_.begin(), labels_.end(), out.begin(), [label](Label l) { return l == label ? 1 : 0; });
  return LabelMask(width_, height_, 2, std::move(out));
}

std::size_t LabelMask::count(Label label) const {
  return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), label));
}

std::vector<LabelMask::Label> LabelMask::present_labels() const {
  std::set<Label> seen(labels_.begin(), labels_.end());
  return {seen.begin(), seen.end()};
}

bool same_dims(const GrayImage& a, const LabelMask& b) {
  return a.width() == b.width() && a.height() == b.height();
}
bool same_dims(const LabelMask& a, const LabelMask& b) {
  return a.width() == b.width() && a.height() == b.height();
}
bool same_dims(const GrayImage& a, const GrayImage& b) {
  return a.width() == b.width() && a.height() == b.height();
}

ReferenceDatabase::ReferenceDatabase(std::vector<ReferenceRecord> records) : records_(std::move(records)) {
  if (records_.empty()) throw DataError("reference database is empty");
  std::unordered_set<std::string> ids;
  for (const auto& r : records_) {
    if (!ids.insert(r.id).second) throw DataError("duplicate reference id '" + r.id + "'");
    if (!same_dims(r.image, r.gt_mask)) {
      throw DataError("reference '" + r.id + "': image and mask dimensions differ");
    }
  }
}

const ReferenceRecord* ReferenceDatabase::find(const std::string& id) const {
  auto it = std::find_if(records_.begin(), records_.end(), [&](const auto& r) { return r.id == id; });
  return it == records_.end() ? nullptr : &*it;
}

ReferenceDatabase ReferenceDatabase::subset(std::span<const std::string> ids) const {
  std::vector<ReferenceRecord> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    const auto* r = find(id);
    if (r == nullptr) throw DataError("unknown reference id '" + id + "'");
    out.push_back(*r);
  }
  return ReferenceDatabase(std::move(out));
}

GrayImage resize_bilinear(const GrayImage& img, int width, int height) {
  if (width < 1 || height < 1) throw UsageError("resize target must be at least 1x1");
  if (width == img.width() && height == img.height()) return img;

  const double sx = static_cast<double>(img.width()) / width;
  const double sy = static_cast<double>(img.height()) / height;
  std::vector<double> out(static_cast<std::size_t>(width) * height);
  for (int y = 0; y < height; ++y) {
    double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(img.height() - 1));
    int y0 = static_cast<int>(fy);
    int y1 = std::min(y0 + 1, img.height() - 1);
    double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(img.width() - 1));
      int x0 = static_cast<int>(fx);
      int x1 = std::min(x0 + 1, img.width() - 1);
      double wx = fx - x0;
      double top = img.at(x0, y0) * (1 - wx) + img.at(x1, y0) * wx;
      double bot = img.at(x0, y1) * (1 - wx) + img.at(x1, y1) * wx;
      out[static_cast<std::size_t>(y) * width + x] = std::clamp(top * (1 - wy) + bot * wy, 0.0, 1.0);
    }
  }
  return GrayImage(width, height, std::move(out));
}

LabelMask resize_nearest(const LabelMask& mask, int width, int height) {
  if (width < 1 || height < 1) throw UsageError("resize target must be at least 1x1");
  if (width == mask.width() && height == mask.height()) return mask;

  const double sx = static_cast<double>(mask.width()) / width;
  const double sy = static_cast<double>(mask.height()) / height;
  std::vector<LabelMask::Label> out(static_cast<std::size_t>(width) * height);
  for (int y = 0; y < height; ++y) {
    int srcy = std::min(static_cast<int>(std::floor((y + 0.5) * sy)), mask.height() - 1);
    for (int x = 0; x < width; ++x) {
      int srcx = std::min(static_cast<int>(std::floor((x + 0.5) * sx)), mask.width() - 1);
      out[static_cast<std::size_t>(y) * width + x] = mask.at(srcx, srcy);
    }
  }
  return LabelMask(width, height, mask.class_count(), std::move(out));
}

}  // namespace segqc

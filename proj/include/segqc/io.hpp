#pragma once

#include <filesystem>
#include <string>

#include "segqc/core.hpp"

namespace segqc {

/// Loads a PNG as a normalized grayscale image. Values are divided by the
/// format's maximum (255 or 65535); color input is reduced with Rec. 601 luma
/// weights and alpha is ignored.
GrayImage load_image(const std::filesystem::path& path);

/// Loads a PNG whose pixel values (or palette indices) are class labels.
/// Throws DataError if any label is >= class_count.
LabelMask load_mask(const std::filesystem::path& path, int class_count);

/// 8-bit grayscale PNG; intensities are quantized to round(v * 255).
void save_image(const GrayImage& img, const std::filesystem::path& path);
/// 8-bit grayscale PNG with label = pixel value. class_count must be <= 256.
void save_mask(const LabelMask& mask, const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
/// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace segqc

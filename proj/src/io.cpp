#include "segqc/io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

#include "segqc/errors.hpp"

namespace segqc {

namespace fs = std::filesystem;

namespace {

struct PngErrorState {
  std::string message;
};

[[noreturn]] void png_error_handler(png_structp png, png_const_charp msg) {
  auto* state = static_cast<PngErrorState*>(png_get_error_ptr(png));
  if (state != nullptr) state->message = msg;
  png_longjmp(png, 1);
}

void png_warning_handler(png_structp, png_const_charp) {}

using FilePtr = std::unique_ptr<std::FILE, int (*)(std::FILE*)>;

FilePtr open_file(const fs::path& path, const char* mode) {
  FilePtr fp(std::fopen(path.c_str(), mode), &std::fclose);
  if (!fp) throw DataError("cannot open '" + path.string() + "'");
  return fp;
}

// Decoded samples after the requested transforms, one uint16 per channel.
struct RawPng {
  int width = 0;
  int height = 0;
  int channels = 0;
  int bit_depth = 8;
  std::vector<std::uint16_t> samples;
};

enum class PngPurpose { Intensity, Labels };

RawPng read_png(const fs::path& path, PngPurpose purpose) {
  FilePtr fp = open_file(path, "rb");
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw DataError("unsupported format: '" + path.string() + "' is not a PNG file");
  }

  PngErrorState err;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_error_handler, png_warning_handler);
  if (png == nullptr) throw std::runtime_error("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw std::runtime_error("png_create_info_struct failed");
  }

  RawPng out;
  std::vector<png_byte> buffer;
  std::vector<png_bytep> rows;
  volatile bool color_mask = false;

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("unreadable PNG '" + path.string() + "': " + err.message);
  }

  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const int color_type = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);

  if (purpose == PngPurpose::Labels) {
    if (color_type == PNG_COLOR_TYPE_RGB || color_type == PNG_COLOR_TYPE_RGB_ALPHA) {
      color_mask = true;
    }
    if (depth < 8) png_set_packing(png);
    if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  } else {
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  }
  png_read_update_info(png, info);

  if (!color_mask) {
    out.width = static_cast<int>(png_get_image_width(png, info));
    out.height = static_cast<int>(png_get_image_height(png, info));
    out.channels = png_get_channels(png, info);
    out.bit_depth = png_get_bit_depth(png, info);
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    buffer.resize(rowbytes * out.height);
    rows.resize(out.height);
    for (int y = 0; y < out.height; ++y) rows[y] = buffer.data() + rowbytes * y;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
  }
  png_destroy_read_struct(&png, &info, nullptr);

  if (color_mask) {
    throw DataError("unsupported format: mask '" + path.string() + "' must be grayscale or indexed");
  }

  const std::size_t n = static_cast<std::size_t>(out.width) * out.height * out.channels;
  out.samples.resize(n);
  if (out.bit_depth == 16) {
    for (std::size_t i = 0; i < n; ++i) {
      out.samples[i] = static_cast<std::uint16_t>((buffer[2 * i] << 8) | buffer[2 * i + 1]);
    }
  } else {
    std::copy(buffer.begin(), buffer.begin() + static_cast<std::ptrdiff_t>(n), out.samples.begin());
  }
  return out;
}

void write_gray8(const fs::path& path, int width, int height, const std::vector<png_byte>& pixels) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    FilePtr fp = open_file(tmp, "wb");
    PngErrorState err;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, png_error_handler, png_warning_handler);
    if (png == nullptr) throw std::runtime_error("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (info == nullptr) {
      png_destroy_write_struct(&png, nullptr);
      throw std::runtime_error("png_create_info_struct failed");
    }
    std::vector<png_bytep> rows(height);
    if (setjmp(png_jmpbuf(png))) {
      png_destroy_write_struct(&png, &info);
      throw DataError("failed writing PNG '" + path.string() + "': " + err.message);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, width, height, 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < height; ++y) {
      rows[y] = const_cast<png_bytep>(pixels.data() + static_cast<std::size_t>(y) * width);
    }
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
  }
  fs::rename(tmp, path);
}

}  // namespace

GrayImage load_image(const fs::path& path) {
  RawPng raw = read_png(path, PngPurpose::Intensity);
  const double max_value = raw.bit_depth == 16 ? 65535.0 : 255.0;
  const std::size_t n = static_cast<std::size_t>(raw.width) * raw.height;
  std::vector<double> values(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint16_t* px = raw.samples.data() + i * raw.channels;
    double v = raw.channels >= 3 ? 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2] : px[0];
    values[i] = std::clamp(v / max_value, 0.0, 1.0);
  }
  return GrayImage(raw.width, raw.height, std::move(values));
}

LabelMask load_mask(const fs::path& path, int class_count) {
  RawPng raw = read_png(path, PngPurpose::Labels);
  const std::size_t n = static_cast<std::size_t>(raw.width) * raw.height;
  std::vector<LabelMask::Label> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto v = static_cast<LabelMask::Label>(raw.samples[i * raw.channels]);
    if (v >= class_count) {
      throw DataError("invalid label " + std::to_string(v) + " in '" + path.string() + "' (class_count " +
                      std::to_string(class_count) + ")");
    }
    labels[i] = v;
  }
  return LabelMask(raw.width, raw.height, class_count, std::move(labels));
}

void save_image(const GrayImage& img, const fs::path& path) {
  std::vector<png_byte> px(img.size());
  std::transform(img.values().begin(), img.values().end(), px.begin(),
                 [](double v) { return static_cast<png_byte>(std::lround(v * 255.0)); });
  write_gray8(path, img.width(), img.height(), px);
}

void save_mask(const LabelMask& mask, const fs::path& path) {
  if (mask.class_count() > 256) throw UsageError("cannot store more than 256 classes in an 8-bit PNG");
  std::vector<png_byte> px(mask.size());
  std::transform(mask.labels().begin(), mask.labels().end(), px.begin(),
                 [](LabelMask::Label l) { return static_cast<png_byte>(l); });
  write_gray8(path, mask.width(), mask.height(), px);
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + tmp.string() + "'");
    out << contents;
    if (!out.flush()) throw DataError("failed writing '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

}  // namespace segqc

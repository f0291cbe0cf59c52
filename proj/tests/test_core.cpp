#include <doctest.h>

#include <png.h>

#include <cstdio>
#include <set>

#include "segqc/core.hpp"
#include "segqc/errors.hpp"
#include "segqc/io.hpp"
#include "support.hpp"

using namespace segqc;

namespace {

// Writes an 8-bit PNG of the given color type straight through libpng.
void write_raw_png(const std::filesystem::path& path, int w, int h, int color_type, int channels,
                   const std::vector<unsigned char>& data) {
  FILE* fp = std::fopen(path.c_str(), "wb");
  REQUIRE(fp != nullptr);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  png_init_io(png, fp);
  png_set_IHDR(png, info, w, h, 8, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < h; ++y) png_write_row(png, const_cast<unsigned char*>(data.data() + y * w * channels));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

}  // namespace

TEST_SUITE("core") {
  TEST_CASE("GrayImage validates dimensions and range") {
    CHECK_THROWS_AS(GrayImage(0, 4, {}), DataError);
    CHECK_THROWS_AS(GrayImage(2, 2, {0, 0, 0}), DataError);
    CHECK_THROWS_AS(GrayImage(1, 1, {1.5}), DataError);
    const GrayImage img(2, 1, {0.25, 0.75});
    CHECK(img.at(1, 0) == 0.75);
  }

  TEST_CASE("LabelMask validates labels") {
    CHECK_THROWS_AS(LabelMask(1, 1, 1, {0}), DataError);
    CHECK_THROWS_AS(LabelMask(2, 1, 2, {0, 2}), DataError);
    CHECK_THROWS_AS(LabelMask(2, 1, 2, {0, -1}), DataError);
    const LabelMask m(3, 1, 3, {0, 2, 2});
    CHECK(m.count(2) == 2);
    CHECK(m.present_labels() == std::vector<LabelMask::Label>{0, 2});
    CHECK(m.binary(2).labels()[1] == 1);
  }

  TEST_CASE("resize to the same size is the identity") {
    std::vector<double> v(256 * 256);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i % 97) / 96.0;
    const GrayImage img(256, 256, v);
    CHECK(resize_bilinear(img, 256, 256) == img);
  }

  TEST_CASE("constant image stays constant under bilinear resize") {
    const auto img = GrayImage::filled(7, 5, 0.3);
    for (auto [w, h] : {std::pair{3, 3}, std::pair{16, 9}, std::pair{1, 1}}) {
      const auto r = resize_bilinear(img, w, h);
      for (double x : r.values()) CHECK(x == doctest::Approx(0.3).epsilon(1e-12));
    }
  }

  TEST_CASE("nearest resize keeps the label set") {
    const LabelMask m(2, 2, 2, {0, 1, 0, 1});
    const auto r = resize_nearest(m, 4, 4);
    const std::vector<LabelMask::Label> expected{0, 0, 1, 1, 0, 0, 1, 1, 0, 0, 1, 1, 0, 0, 1, 1};
    CHECK(std::vector<LabelMask::Label>(r.labels().begin(), r.labels().end()) == expected);
  }

  TEST_CASE("ReferenceDatabase rejects duplicates and empty sets") {
    ReferenceRecord a{"a", GrayImage::filled(2, 2, 0), LabelMask::filled(2, 2, 2), std::nullopt};
    CHECK_THROWS_AS(ReferenceDatabase({}), DataError);
    CHECK_THROWS_AS(ReferenceDatabase({a, a}), DataError);
    ReferenceRecord b = a;
    b.id = "b";
    const ReferenceDatabase db({a, b});
    CHECK(db.find("b") != nullptr);
    CHECK(db.find("c") == nullptr);
    const std::vector<std::string> ids{"b"};
    CHECK(db.subset(ids).size() == 1);
  }
}

TEST_SUITE("io") {
  TEST_CASE("8-bit intensities are divided by 255") {
    testing::TempDir dir;
    write_raw_png(dir / "white.png", 3, 2, PNG_COLOR_TYPE_GRAY, 1, std::vector<unsigned char>(6, 255));
    write_raw_png(dir / "black.png", 3, 2, PNG_COLOR_TYPE_GRAY, 1, std::vector<unsigned char>(6, 0));
    write_raw_png(dir / "mid.png", 1, 1, PNG_COLOR_TYPE_GRAY, 1, {128});
    const auto white = load_image(dir / "white.png");
    const auto black = load_image(dir / "black.png");
    for (double v : white.values()) CHECK(v == 1.0);
    for (double v : black.values()) CHECK(v == 0.0);
    CHECK(load_image(dir / "mid.png").at(0, 0) == doctest::Approx(128.0 / 255.0).epsilon(1e-15));
  }

  TEST_CASE("RGB images are converted to luma") {
    testing::TempDir dir;
    write_raw_png(dir / "rgb.png", 1, 1, PNG_COLOR_TYPE_RGB, 3, {255, 0, 0});
    CHECK(load_image(dir / "rgb.png").at(0, 0) == doctest::Approx(0.299).epsilon(1e-9));
  }

  TEST_CASE("mask loading checks labels") {
    testing::TempDir dir;
    write_raw_png(dir / "zeros.png", 4, 4, PNG_COLOR_TYPE_GRAY, 1, std::vector<unsigned char>(16, 0));
    write_raw_png(dir / "three.png", 2, 1, PNG_COLOR_TYPE_GRAY, 1, {0, 3});
    write_raw_png(dir / "012.png", 3, 1, PNG_COLOR_TYPE_GRAY, 1, {0, 1, 2});
    write_raw_png(dir / "rgb.png", 1, 1, PNG_COLOR_TYPE_RGB, 3, {1, 1, 1});

    const auto zeros = load_mask(dir / "zeros.png", 2);
    CHECK(zeros.count(0) == 16);
    CHECK_THROWS_WITH_AS(load_mask(dir / "three.png", 2), doctest::Contains("invalid label"), DataError);
    const auto m = load_mask(dir / "012.png", 3);
    CHECK(m.class_count() == 3);
    CHECK(m.present_labels().size() == 3);
    CHECK_THROWS_WITH_AS(load_mask(dir / "rgb.png", 2), doctest::Contains("unsupported"), DataError);
  }

  TEST_CASE("missing and non-PNG files are data errors") {
    testing::TempDir dir;
    CHECK_THROWS_AS(load_image(dir / "nope.png"), DataError);
    write_file_atomic(dir / "text.png", "hello");
    CHECK_THROWS_WITH_AS(load_image(dir / "text.png"), doctest::Contains("unsupported"), DataError);
  }

  TEST_CASE("save then load round-trips") {
    testing::TempDir dir;
    std::vector<double> v;
    for (int i = 0; i < 12; ++i) v.push_back(i * 20 / 255.0);
    const GrayImage img(4, 3, v);
    save_image(img, dir / "sub" / "img.png");
    const auto back = load_image(dir / "sub" / "img.png");
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(back.values()[i] == doctest::Approx(v[i]).epsilon(1e-12));

    const LabelMask m(3, 2, 5, {0, 1, 2, 3, 4, 0});
    save_mask(m, dir / "m.png");
    CHECK(load_mask(dir / "m.png", 5) == m);
  }

  TEST_CASE("atomic writes leave no temp file") {
    testing::TempDir dir;
    write_file_atomic(dir / "a" / "b.txt", "x");
    CHECK(read_text_file(dir / "a" / "b.txt") == "x");
    std::set<std::string> names;
    for (const auto& e : std::filesystem::directory_iterator(dir / "a")) names.insert(e.path().filename().string());
    CHECK(names == std::set<std::string>{"b.txt"});
  }
}

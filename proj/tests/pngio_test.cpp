#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <doctest.h>

#include "debench/common.hpp"
#include "debench/plot.hpp"
#include "debench/pngio.hpp"

using namespace debench;

namespace {

std::string temp_path(const char* name) {
  static int counter = 0;
  const auto dir = std::filesystem::temp_directory_path() /
                   ("debench_pngio_" + std::to_string(++counter));
  std::filesystem::create_directories(dir);
  return (dir / name).string();
}

void write_bytes(const std::string& path, const unsigned char* data, std::size_t n) {
  std::ofstream f(path, std::ios::binary);
  f.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n));
  REQUIRE(f.good());
}

// Fixtures encoded by an independent PNG writer (Pillow), pixel values listed
// at the point of use.
const unsigned char kRgb3x2[] = {
    0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a, 0x00, 0x00, 0x00, 0x0d, 0x49, 0x48, 0x44,
    0x52, 0x00, 0x00, 0x00, 0x03, 0x00, 0x00, 0x00, 0x02, 0x08, 0x02, 0x00, 0x00, 0x00, 0x12,
    0x16, 0xf1, 0x4d, 0x00, 0x00, 0x00, 0x18, 0x49, 0x44, 0x41, 0x54, 0x78, 0x9c, 0x63, 0xf8,
    0xcf, 0xc0, 0xc0, 0x00, 0xc1, 0x5c, 0x22, 0x72, 0x0d, 0x0d, 0x0d, 0xff, 0xff, 0x33, 0x00,
    0x00, 0x3b, 0x2e, 0x06, 0xb8, 0xf2, 0xe2, 0x4b, 0x6d, 0x00, 0x00, 0x00, 0x00, 0x49, 0x45,
    0x4e, 0x44, 0xae, 0x42, 0x60, 0x82,
};
const unsigned char kGray4x3[] = {
    0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a, 0x00, 0x00, 0x00, 0x0d, 0x49, 0x48, 0x44,
    0x52, 0x00, 0x00, 0x00, 0x04, 0x00, 0x00, 0x00, 0x03, 0x08, 0x00, 0x00, 0x00, 0x00, 0x91,
    0x9f, 0xf1, 0x1a, 0x00, 0x00, 0x00, 0x17, 0x49, 0x44, 0x41, 0x54, 0x78, 0x9c, 0x63, 0x64,
    0x10, 0x14, 0x14, 0x64, 0x74, 0x11, 0x14, 0x14, 0x64, 0x71, 0x11, 0x14, 0x14, 0x04, 0x00,
    0x07, 0xdf, 0x01, 0x28, 0x9e, 0x71, 0xb6, 0xf5, 0x00, 0x00, 0x00, 0x00, 0x49, 0x45, 0x4e,
    0x44, 0xae, 0x42, 0x60, 0x82,
};
const unsigned char kRgba2x2[] = {
    0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a, 0x00, 0x00, 0x00, 0x0d, 0x49, 0x48, 0x44,
    0x52, 0x00, 0x00, 0x00, 0x02, 0x00, 0x00, 0x00, 0x02, 0x08, 0x06, 0x00, 0x00, 0x00, 0x72,
    0xb6, 0x0d, 0x24, 0x00, 0x00, 0x00, 0x1b, 0x49, 0x44, 0x41, 0x54, 0x78, 0x9c, 0x63, 0x38,
    0x91, 0x62, 0xf4, 0x9f, 0x81, 0x81, 0x81, 0x81, 0x29, 0xec, 0x86, 0x46, 0xe3, 0xff, 0xff,
    0xff, 0xff, 0x03, 0x00, 0x3a, 0x8f, 0x08, 0x33, 0x18, 0xb1, 0x26, 0xa2, 0x00, 0x00, 0x00,
    0x00, 0x49, 0x45, 0x4e, 0x44, 0xae, 0x42, 0x60, 0x82,
};

bool pixel_is(const Image& img, int r, int c, int r8, int g8, int b8) {
  const Eigen::Vector3f got = img.pixel(r, c) * 255.f;
  return std::lround(got[0]) == r8 && std::lround(got[1]) == g8 && std::lround(got[2]) == b8;
}

}  // namespace

TEST_CASE("png round trip preserves 8-bit quantized values") {
  Rng rng(41);
  Image img(13, 17);
  for (int r = 0; r < img.rows(); ++r)
    for (int c = 0; c < img.cols(); ++c)
      img.set_pixel(r, c,
                    {static_cast<float>(rng.uniform()), static_cast<float>(rng.uniform()),
                     static_cast<float>(rng.uniform())});

  const std::string path = temp_path("rt.png");
  pngio::write_png(path, img);
  const Image back = pngio::read_png(path);

  REQUIRE(back.rows() == 13);
  REQUIRE(back.cols() == 17);
  for (int r = 0; r < img.rows(); ++r)
    for (int c = 0; c < img.cols(); ++c)
      for (int k = 0; k < 3; ++k) {
        const float q = std::lround(img.rgb[k](r, c) * 255.f) / 255.f;
        CHECK(back.rgb[k](r, c) == doctest::Approx(q).epsilon(1e-6));
      }
}

TEST_CASE("write clamps out-of-range values") {
  Image img(2, 2);
  img.set_pixel(0, 0, {-0.5f, 2.f, 1.f});
  img.set_pixel(0, 1, {0.f, 0.f, 0.f});
  img.set_pixel(1, 0, {1.f, 1.f, 1.f});
  img.set_pixel(1, 1, {0.25f, 0.5f, 0.75f});
  const std::string path = temp_path("clamp.png");
  pngio::write_png(path, img);
  const Image back = pngio::read_png(path);
  CHECK(pixel_is(back, 0, 0, 0, 255, 255));
  CHECK(pixel_is(back, 1, 0, 255, 255, 255));
  CHECK(pixel_is(back, 1, 1, 64, 128, 191));
}

TEST_CASE("reads RGB bytes from an independent encoder") {
  const std::string path = temp_path("pil_rgb.png");
  write_bytes(path, kRgb3x2, sizeof kRgb3x2);
  const Image img = pngio::read_png(path);
  REQUIRE(img.rows() == 2);
  REQUIRE(img.cols() == 3);
  CHECK(pixel_is(img, 0, 0, 255, 0, 0));
  CHECK(pixel_is(img, 0, 1, 0, 255, 0));
  CHECK(pixel_is(img, 0, 2, 0, 0, 255));
  CHECK(pixel_is(img, 1, 0, 10, 20, 30));
  CHECK(pixel_is(img, 1, 1, 128, 128, 128));
  CHECK(pixel_is(img, 1, 2, 255, 255, 0));
}

TEST_CASE("grayscale and alpha variants are converted to RGB") {
  const std::string gpath = temp_path("pil_gray.png");
  write_bytes(gpath, kGray4x3, sizeof kGray4x3);
  const Image g = pngio::read_png(gpath);
  REQUIRE(g.rows() == 3);
  REQUIRE(g.cols() == 4);
  // Ramp 0, 17, 34, ... row-major; gray expands to equal channels.
  int v = 0;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c) {
      CHECK(pixel_is(g, r, c, v, v, v));
      v += 17;
    }

  const std::string apath = temp_path("pil_rgba.png");
  write_bytes(apath, kRgba2x2, sizeof kRgba2x2);
  const Image a = pngio::read_png(apath);
  REQUIRE(a.rows() == 2);
  REQUIRE(a.cols() == 2);
  // Alpha is dropped, not premultiplied.
  CHECK(pixel_is(a, 0, 0, 200, 100, 50));
  CHECK(pixel_is(a, 0, 1, 0, 0, 0));
  CHECK(pixel_is(a, 1, 0, 30, 60, 90));
  CHECK(pixel_is(a, 1, 1, 255, 255, 255));
}

TEST_CASE("read errors: missing file, not a png, truncated stream") {
  CHECK_THROWS_AS(pngio::read_png("/nonexistent/nope.png"), Error);

  const std::string bad = temp_path("bad.png");
  const unsigned char junk[] = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  write_bytes(bad, junk, sizeof junk);
  CHECK_THROWS_AS(pngio::read_png(bad), Error);

  const std::string trunc = temp_path("trunc.png");
  write_bytes(trunc, kRgb3x2, sizeof kRgb3x2 / 2);  // cut mid-IDAT
  CHECK_THROWS_AS(pngio::read_png(trunc), Error);
}

TEST_CASE("write errors: empty image, unwritable path") {
  Image empty;
  CHECK_THROWS_AS(pngio::write_png(temp_path("e.png"), empty), Error);
  Image ok(2, 2);
  CHECK_THROWS_AS(pngio::write_png("/nonexistent/dir/x.png", ok), Error);
}

// ---------------------------------------------------------------------------
// plot

TEST_CASE("text rendering matches the glyph table") {
  Image img(10, 10);
  img.fill({0.f, 0.f, 0.f});
  plot::draw_text(img, 1, 2, "I", {1.f, 0.f, 0.f}, 1);
  // 'I' is a 3-wide serif column: 3+1+1+1+1+1+3 = 11 lit pixels.
  int lit = 0;
  for (int r = 0; r < 10; ++r)
    for (int c = 0; c < 10; ++c)
      if (img.rgb[0](r, c) == 1.f) ++lit;
  CHECK(lit == 11);
  // Center column of the glyph runs through all 7 rows.
  for (int r = 1; r < 8; ++r) CHECK(img.rgb[0](r, 4) == 1.f);
  // Nothing outside the glyph box.
  CHECK(img.rgb[0](0, 4) == 0.f);
  CHECK(img.rgb[0](8, 4) == 0.f);

  CHECK(plot::text_width("") == 0);
  CHECK(plot::text_width("ab") == 11);     // 5 + 1 + 5
  CHECK(plot::text_width("ab", 2) == 22);
}

TEST_CASE("bar chart rendering: size, determinism, fill monotonicity") {
  plot::BarChart chart;
  chart.title = "demo";
  chart.series = {"one", "two"};
  chart.groups.push_back({"g1", {{0.9f, 0.85f, 0.95f}, {0.2f, 0.1f, 0.3f}}});
  chart.groups.push_back({"g2", {{0.5f, 0.5f, 0.5f}, {0.5f, 0.4f, 0.9f}}});

  const Image a = plot::render(chart, 400, 240);
  const Image b = plot::render(chart, 400, 240);
  REQUIRE(a.rows() == 240);
  REQUIRE(a.cols() == 400);
  CHECK(bitwise_equal(a, b));

  const auto count_color = [&](const Image& img, const Eigen::Vector3f& col) {
    int n = 0;
    for (int r = 0; r < img.rows(); ++r)
      for (int c = 0; c < img.cols(); ++c)
        if ((img.pixel(r, c) - col).cwiseAbs().maxCoeff() < 1e-6f) ++n;
    return n;
  };
  // Series 0 has means 0.9 + 0.5, series 1 has 0.2 + 0.5: more area for 0.
  CHECK(count_color(a, plot::series_color(0)) > count_color(a, plot::series_color(1)));

  SUBCASE("errors") {
    plot::BarChart bad;
    CHECK_THROWS_AS(plot::render(bad, 400, 240), Error);
    bad = chart;
    bad.groups[1].bars.pop_back();
    CHECK_THROWS_AS(plot::render(bad, 400, 240), Error);
    bad = chart;
    bad.ymax = bad.ymin;
    CHECK_THROWS_AS(plot::render(bad, 400, 240), Error);
  }
}

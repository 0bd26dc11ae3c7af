#include "debench/pngio.hpp"

#include <png.h>

#include <cstdio>
#include <memory>
#include <vector>

#include "debench/common.hpp"

namespace debench::pngio {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f != nullptr) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void png_error_fn(png_structp png, png_const_charp msg) {
  (void)png;
  throw Error(std::string("png: ") + msg);
}

void png_warn_fn(png_structp, png_const_charp msg) {
  DEBENCH_LOG_WARN("png: %s", msg);
}

std::uint8_t quantize(float v) {
  const float c = v < 0.f ? 0.f : (v > 1.f ? 1.f : v);
  return static_cast<std::uint8_t>(std::lround(c * 255.f));
}

}  // namespace

void write_png(const std::string& path, const Image& img) {
  const int h = img.rows();
  const int w = img.cols();
  if (h <= 0 || w <= 0) throw Error("write_png: empty image");

  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw Error("write_png: cannot open '" + path + "'");

  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn, png_warn_fn);
  if (png == nullptr) throw Error("write_png: png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    throw Error("write_png: png_create_info_struct failed");
  }

  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(h) * w * 3);
  std::vector<png_bytep> rows(static_cast<std::size_t>(h));
  for (int r = 0; r < h; ++r) {
    rows[r] = bytes.data() + static_cast<std::size_t>(r) * w * 3;
    for (int c = 0; c < w; ++c)
      for (int k = 0; k < 3; ++k) rows[r][3 * c + k] = quantize(img.rgb[k](r, c));
  }

  try {
    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, info);
  } catch (...) {
    png_destroy_write_struct(&png, &info);
    throw;
  }
  png_destroy_write_struct(&png, &info);
}

Image read_png(const std::string& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw Error("read_png: cannot open '" + path + "'");

  png_byte header[8];
  if (std::fread(header, 1, 8, file.get()) != 8 || png_sig_cmp(header, 0, 8) != 0)
    throw Error("read_png: '" + path + "' is not a PNG");

  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn, png_warn_fn);
  if (png == nullptr) throw Error("read_png: png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw Error("read_png: png_create_info_struct failed");
  }

  Image img;
  try {
    png_init_io(png, file.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    // Normalize every input variant to 8-bit RGB.
    png_set_palette_to_rgb(png);
    png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS) != 0) png_set_tRNS_to_alpha(png);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);

    const int h = static_cast<int>(png_get_image_height(png, info));
    const int w = static_cast<int>(png_get_image_width(png, info));
    if (png_get_channels(png, info) != 3 || png_get_bit_depth(png, info) != 8)
      throw Error("read_png: unsupported format after conversion");

    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(h) * w * 3);
    std::vector<png_bytep> rows(static_cast<std::size_t>(h));
    for (int r = 0; r < h; ++r) rows[r] = bytes.data() + static_cast<std::size_t>(r) * w * 3;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);

    img = Image(h, w);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c)
        for (int k = 0; k < 3; ++k)
          img.rgb[k](r, c) = static_cast<float>(rows[r][3 * c + k]) / 255.f;
  } catch (...) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

}  // namespace debench::pngio

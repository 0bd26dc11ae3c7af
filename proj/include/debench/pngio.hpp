#ifndef DEBENCH_PNGIO_HPP_
#define DEBENCH_PNGIO_HPP_

#include <string>

#include "debench/image.hpp"

namespace debench::pngio {

// Writes `img` as an 8-bit RGB PNG. Values are clamped to [0, 1] and
// quantized with round-to-nearest. Throws Error on I/O or encode failure.
void write_png(const std::string& path, const Image& img);

// Reads a PNG into a float RGB image with values in [0, 1]. Grayscale,
// palette, 16-bit, and alpha variants are converted to 8-bit RGB first
// (alpha is dropped). Throws Error on I/O or decode failure.
Image read_png(const std::string& path);

}  // namespace debench::pngio

#endif  // DEBENCH_PNGIO_HPP_

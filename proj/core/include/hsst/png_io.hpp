#pragma once

#include <string>

#include "hsst/image.hpp"

namespace hsst::png_io {

// 8-bit RGB PNG; values map linearly between [0,1] and [0,255] with
// round-half-away-from-zero quantization on write.
Image read_png(const std::string& path);
void write_png(const std::string& path, const Image& img);

}  // namespace hsst::png_io

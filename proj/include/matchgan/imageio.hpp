#ifndef MATCHGAN_IMAGEIO_HPP_
#define MATCHGAN_IMAGEIO_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "matchgan/common.hpp"

namespace matchgan {

/// Decoded 8-bit image, row-major HWC.
struct RawImage {
  int64_t width = 0;
  int64_t height = 0;
  int64_t channels = 0;  // 1 or 3
  std::vector<uint8_t> data;

  uint8_t& at(int64_t y, int64_t x, int64_t c) {
    return data[(y * width + x) * channels + c];
  }
  uint8_t at(int64_t y, int64_t x, int64_t c) const {
    return data[(y * width + x) * channels + c];
  }
};

/// 8-bit non-interlaced PNG (grayscale or RGB), zlib-compressed.
void write_png(const std::string& path, const RawImage& img);

/// Reads PNG (bit depth 8; gray/RGB/RGBA, alpha dropped), JPEG (when built
/// with libjpeg) or binary PGM/PPM, dispatched on file extension.
RawImage read_image(const std::string& path);

bool file_exists(const std::string& path);

}  // namespace matchgan

#endif  // MATCHGAN_IMAGEIO_HPP_

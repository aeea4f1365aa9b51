#pragma once

// Planar C×H×W images with values in [0,1], plus binary NetPBM (P5/P6) I/O.

#include <string>
#include <vector>

namespace btnet {

struct Image {
  int channels = 0;  // 1 or 3
  int height = 0;
  int width = 0;
  std::vector<float> values;  // planar, channel-major

  static Image create(int channels, int height, int width, float fill = 0.0f);

  float& at(int c, int y, int x) {
    return values[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  float at(int c, int y, int x) const {
    return values[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  std::size_t numel() const { return values.size(); }
};

// Reads a binary PGM (P5) or PPM (P6) file with maxval <= 255; pixel values
// land in [0,1]. Throws std::runtime_error on malformed input.
Image read_netpbm(const std::string& path);

// Writes P5 for 1 channel, P6 for 3; values are clamped to [0,1] and
// quantized to 8 bits.
void write_netpbm(const std::string& path, const Image& img);

// Channel mean; identity for grayscale input.
Image to_gray(const Image& img);

}  // namespace btnet

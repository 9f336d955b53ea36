#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace rsstitch {

// 8-bit image, row-major, interleaved channels (1 or 3). An empty mask means
// every pixel is valid; otherwise mask[y * width + x] != 0 marks valid pixels.
struct Raster {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<uint8_t> data;
  std::vector<uint8_t> mask;

  Raster() = default;
  Raster(int w, int h, int c, uint8_t fill = 0);

  uint8_t& at(int x, int y, int c = 0) { return data[(static_cast<size_t>(y) * width + x) * channels + c]; }
  uint8_t at(int x, int y, int c = 0) const { return data[(static_cast<size_t>(y) * width + x) * channels + c]; }
  bool Valid(int x, int y) const {
    return mask.empty() || mask[static_cast<size_t>(y) * width + x] != 0;
  }
  bool Empty() const { return width == 0 || height == 0; }
  void Validate() const;
};

// Gray or RGB output depending on the file; an alpha channel becomes the mask
// (alpha > 0 is valid). Throws kIo.
Raster ReadPng(const std::string& path);
// Writes the samples; a non-empty mask is written as alpha.
void WritePng(const Raster& raster, const std::string& path);
// Mask as an 8-bit gray image (255 valid, 0 invalid).
Raster MaskImage(const Raster& raster);

// Rec. 601 luma, rounded; masks are kept.
Raster ToGray(const Raster& raster);
Raster ToRgb(const Raster& raster);

// Bilinear sample at a pixel-center coordinate. Edges clamp; returns nullopt
// outside [-0.5, w - 0.5] x [-0.5, h - 0.5] or when the nearest pixel is
// masked out.
std::optional<double> SampleBilinear(const Raster& raster, double x, double y, int channel);

}  // namespace rsstitch

#include "rsstitch/raster.h"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "rsstitch/error.h"

namespace rsstitch {

Raster::Raster(int w, int h, int c, uint8_t fill) : width(w), height(h), channels(c) {
  Validate();
  data.assign(static_cast<size_t>(w) * h * c, fill);
}

void Raster::Validate() const {
  if (width < 1 || height < 1) {
    throw Error(ErrorCode::kParameterDomain, "raster dimensions must be >= 1");
  }
  if (channels != 1 && channels != 3) {
    throw Error(ErrorCode::kParameterDomain, "raster must have 1 or 3 channels");
  }
  if (!data.empty() && data.size() != static_cast<size_t>(width) * height * channels) {
    throw Error(ErrorCode::kParameterDomain, "raster data size mismatch");
  }
  if (!mask.empty() && mask.size() != static_cast<size_t>(width) * height) {
    throw Error(ErrorCode::kParameterDomain, "raster mask size mismatch");
  }
}

Raster ReadPng(const std::string& path) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw Error(ErrorCode::kIo, "cannot read PNG '" + path + "': " + image.message);
  }
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  const bool alpha = (image.format & PNG_FORMAT_FLAG_ALPHA) != 0;
  image.format = color ? (alpha ? PNG_FORMAT_RGBA : PNG_FORMAT_RGB)
                       : (alpha ? PNG_FORMAT_GA : PNG_FORMAT_GRAY);
  std::vector<uint8_t> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    png_image_free(&image);
    throw Error(ErrorCode::kIo, "cannot decode PNG '" + path + "': " + image.message);
  }
  const int w = static_cast<int>(image.width);
  const int h = static_cast<int>(image.height);
  const int ch = color ? 3 : 1;
  const int stride = ch + (alpha ? 1 : 0);
  Raster r(w, h, ch);
  if (alpha) r.mask.assign(static_cast<size_t>(w) * h, 0);
  for (size_t i = 0; i < static_cast<size_t>(w) * h; ++i) {
    for (int c = 0; c < ch; ++c) r.data[i * ch + c] = buffer[i * stride + c];
    if (alpha) r.mask[i] = buffer[i * stride + ch] > 0 ? 255 : 0;
  }
  return r;
}

void WritePng(const Raster& raster, const std::string& path) {
  raster.Validate();
  const bool alpha = !raster.mask.empty();
  const int stride = raster.channels + (alpha ? 1 : 0);
  std::vector<uint8_t> buffer(static_cast<size_t>(raster.width) * raster.height * stride);
  for (size_t i = 0; i < static_cast<size_t>(raster.width) * raster.height; ++i) {
    for (int c = 0; c < raster.channels; ++c) {
      buffer[i * stride + c] = raster.data[i * raster.channels + c];
    }
    if (alpha) buffer[i * stride + raster.channels] = raster.mask[i] ? 255 : 0;
  }
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(raster.width);
  image.height = static_cast<png_uint_32>(raster.height);
  image.format = raster.channels == 3 ? (alpha ? PNG_FORMAT_RGBA : PNG_FORMAT_RGB)
                                      : (alpha ? PNG_FORMAT_GA : PNG_FORMAT_GRAY);
  if (!png_image_write_to_file(&image, path.c_str(), 0, buffer.data(), 0, nullptr)) {
    throw Error(ErrorCode::kIo, "cannot write PNG '" + path + "': " + image.message);
  }
}

Raster MaskImage(const Raster& raster) {
  Raster m(raster.width, raster.height, 1, 255);
  if (!raster.mask.empty()) {
    for (size_t i = 0; i < m.data.size(); ++i) m.data[i] = raster.mask[i] ? 255 : 0;
  }
  return m;
}

Raster ToGray(const Raster& raster) {
  if (raster.channels == 1) return raster;
  Raster g(raster.width, raster.height, 1);
  for (size_t i = 0; i < g.data.size(); ++i) {
    const double v = 0.299 * raster.data[3 * i] + 0.587 * raster.data[3 * i + 1] +
                     0.114 * raster.data[3 * i + 2];
    g.data[i] = static_cast<uint8_t>(std::clamp(std::lround(v), 0L, 255L));
  }
  g.mask = raster.mask;
  return g;
}

Raster ToRgb(const Raster& raster) {
  if (raster.channels == 3) return raster;
  Raster c(raster.width, raster.height, 3);
  for (size_t i = 0; i < raster.data.size(); ++i) {
    c.data[3 * i] = c.data[3 * i + 1] = c.data[3 * i + 2] = raster.data[i];
  }
  c.mask = raster.mask;
  return c;
}

std::optional<double> SampleBilinear(const Raster& r, double x, double y, int channel) {
  if (!(x >= -0.5 && x <= r.width - 0.5 && y >= -0.5 && y <= r.height - 0.5)) {
    return std::nullopt;
  }
  const int nx = std::clamp(static_cast<int>(std::lround(x)), 0, r.width - 1);
  const int ny = std::clamp(static_cast<int>(std::lround(y)), 0, r.height - 1);
  if (!r.Valid(nx, ny)) return std::nullopt;
  const double cx = std::clamp(x, 0.0, r.width - 1.0);
  const double cy = std::clamp(y, 0.0, r.height - 1.0);
  const int x0 = std::min(static_cast<int>(cx), r.width - 1);
  const int y0 = std::min(static_cast<int>(cy), r.height - 1);
  const int x1 = std::min(x0 + 1, r.width - 1);
  const int y1 = std::min(y0 + 1, r.height - 1);
  const double fx = cx - x0;
  const double fy = cy - y0;
  const double top = (1 - fx) * r.at(x0, y0, channel) + fx * r.at(x1, y0, channel);
  const double bottom = (1 - fx) * r.at(x0, y1, channel) + fx * r.at(x1, y1, channel);
  return (1 - fy) * top + fy * bottom;
}

}  // namespace rsstitch

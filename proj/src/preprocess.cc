// Copyright 2026 The mlforge Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mlforge/preprocess.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <string>

#include "mlforge/error.h"
#include "mlforge/text.h"

namespace mlforge {
namespace {

bool Ordered(const std::array<double, 2>& r) { return r[0] <= r[1]; }
bool IsProbability(double p) { return p >= 0.0 && p <= 1.0; }

// Bilinear sample at continuous pixel-center coordinates (sy, sx).
double Sample(const Raster& img, double sy, double sx, std::size_t c) {
  const double max_y = static_cast<double>(img.height() - 1);
  const double max_x = static_cast<double>(img.width() - 1);
  sy = std::clamp(sy, 0.0, max_y);
  sx = std::clamp(sx, 0.0, max_x);
  const auto y0 = static_cast<std::size_t>(std::floor(sy));
  const auto x0 = static_cast<std::size_t>(std::floor(sx));
  const std::size_t y1 = std::min(y0 + 1, img.height() - 1);
  const std::size_t x1 = std::min(x0 + 1, img.width() - 1);
  const double fy = sy - static_cast<double>(y0);
  const double fx = sx - static_cast<double>(x0);
  const double top = img.at(y0, x0, c) * (1.0 - fx) + img.at(y0, x1, c) * fx;
  const double bottom = img.at(y1, x0, c) * (1.0 - fx) + img.at(y1, x1, c) * fx;
  return top * (1.0 - fy) + bottom * fy;
}

void RequireNonEmpty(const Raster& img, const char* what) {
  if (img.height() == 0 || img.width() == 0 || img.channels() == 0) {
    throw UsageError("preprocess", "empty-raster",
                     std::string(what) + ": raster has a zero dimension");
  }
}

}  // namespace

Raster::Raster(std::size_t height, std::size_t width, std::size_t channels,
               float fill)
    : height_(height),
      width_(width),
      channels_(channels),
      pixels_(height * width * channels, fill) {}

void PreprocessConfig::Validate() const {
  auto fail = [](const std::string& why) {
    return UsageError("preprocess", "config", why);
  };
  if (!Ordered(area_range) || area_range[0] <= 0.0 || area_range[1] > 1.0) {
    throw fail("area_range must satisfy 0 < lo <= hi <= 1");
  }
  if (!Ordered(aspect_range) || aspect_range[0] <= 0.0) {
    throw fail("aspect_range must satisfy 0 < lo <= hi");
  }
  if (!Ordered(rotate_range)) throw fail("rotate_range inverted");
  if (!IsProbability(flip_prob) || !IsProbability(rotate_prob) ||
      !IsProbability(color_prob)) {
    throw fail("probabilities must lie in [0,1]");
  }
  if (out_size == 0) throw fail("out_size must be positive");
  if (color_shift < 0.0) throw fail("color_shift must be non-negative");
}

CropBox SampleCrop(std::size_t height, std::size_t width,
                   const PreprocessConfig& config, Rng& rng) {
  if (height == 0 || width == 0) {
    throw UsageError("preprocess", "empty-raster", "crop of empty image");
  }
  const double total = static_cast<double>(height) * static_cast<double>(width);
  for (int attempt = 0; attempt < config.crop_attempts; ++attempt) {
    const double area = rng.Uniform(config.area_range[0], config.area_range[1]) * total;
    const double aspect = rng.Uniform(config.aspect_range[0], config.aspect_range[1]);
    const double bw = std::round(std::sqrt(area * aspect));
    const double bh = std::round(std::sqrt(area / aspect));
    if (bw < 1.0 || bh < 1.0 || bw > static_cast<double>(width) ||
        bh > static_cast<double>(height)) {
      continue;
    }
    // Rounding can push the realized box outside the ranges; re-check.
    const double frac = bw * bh / total;
    const double ratio = bw / bh;
    if (frac < config.area_range[0] || frac > config.area_range[1] ||
        ratio < config.aspect_range[0] || ratio > config.aspect_range[1]) {
      continue;
    }
    CropBox box;
    box.width = static_cast<std::size_t>(bw);
    box.height = static_cast<std::size_t>(bh);
    box.x = static_cast<std::size_t>(rng.Below(width - box.width + 1));
    box.y = static_cast<std::size_t>(rng.Below(height - box.height + 1));
    return box;
  }
  return CropBox{0, 0, height, width};
}

Raster Crop(const Raster& img, const CropBox& box) {
  if (box.width == 0 || box.height == 0 || box.x + box.width > img.width() ||
      box.y + box.height > img.height()) {
    throw UsageError("preprocess", "crop", "crop box outside image");
  }
  Raster out(box.height, box.width, img.channels());
  for (std::size_t y = 0; y < box.height; ++y) {
    for (std::size_t x = 0; x < box.width; ++x) {
      for (std::size_t c = 0; c < img.channels(); ++c) {
        out.at(y, x, c) = img.at(box.y + y, box.x + x, c);
      }
    }
  }
  return out;
}

Raster ResizeBilinear(const Raster& img, std::size_t out_height,
                      std::size_t out_width) {
  RequireNonEmpty(img, "resize");
  if (out_height == 0 || out_width == 0) {
    throw UsageError("preprocess", "resize", "output dimensions must be positive");
  }
  Raster out(out_height, out_width, img.channels());
  const double scale_y = static_cast<double>(img.height()) / static_cast<double>(out_height);
  const double scale_x = static_cast<double>(img.width()) / static_cast<double>(out_width);
  for (std::size_t y = 0; y < out_height; ++y) {
    const double sy = (static_cast<double>(y) + 0.5) * scale_y - 0.5;
    for (std::size_t x = 0; x < out_width; ++x) {
      const double sx = (static_cast<double>(x) + 0.5) * scale_x - 0.5;
      for (std::size_t c = 0; c < img.channels(); ++c) {
        out.at(y, x, c) = static_cast<float>(Sample(img, sy, sx, c));
      }
    }
  }
  return out;
}

Raster FlipHorizontal(const Raster& img) {
  Raster out(img.height(), img.width(), img.channels());
  for (std::size_t y = 0; y < img.height(); ++y) {
    for (std::size_t x = 0; x < img.width(); ++x) {
      for (std::size_t c = 0; c < img.channels(); ++c) {
        out.at(y, img.width() - 1 - x, c) = img.at(y, x, c);
      }
    }
  }
  return out;
}

Raster Rotate(const Raster& img, double degrees) {
  RequireNonEmpty(img, "rotate");
  const double theta = degrees * std::numbers::pi / 180.0;
  const double cos_t = std::cos(theta);
  const double sin_t = std::sin(theta);
  const double cy = static_cast<double>(img.height()) / 2.0;
  const double cx = static_cast<double>(img.width()) / 2.0;
  Raster out(img.height(), img.width(), img.channels());
  for (std::size_t y = 0; y < img.height(); ++y) {
    const double dy = static_cast<double>(y) + 0.5 - cy;
    for (std::size_t x = 0; x < img.width(); ++x) {
      const double dx = static_cast<double>(x) + 0.5 - cx;
      // Inverse-map the output pixel center into the source image.
      const double sx = cos_t * dx + sin_t * dy + cx - 0.5;
      const double sy = -sin_t * dx + cos_t * dy + cy - 0.5;
      for (std::size_t c = 0; c < img.channels(); ++c) {
        out.at(y, x, c) = static_cast<float>(Sample(img, sy, sx, c));
      }
    }
  }
  return out;
}

Raster ShiftColor(const Raster& img, const std::array<double, 3>& shift) {
  Raster out = img;
  const std::size_t channels = img.channels();
  auto& px = out.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) {
    const double v = px[i] + shift[std::min<std::size_t>(i % channels, 2)];
    px[i] = static_cast<float>(std::clamp(v, 0.0, 255.0));
  }
  return out;
}

Raster RescaleToUnit(const Raster& img) {
  Raster out = img;
  for (float& v : out.pixels()) {
    v = static_cast<float>(std::clamp(v / 127.5 - 1.0, -1.0, 1.0));
  }
  return out;
}

Raster PreprocessImage(const Raster& img, const PreprocessConfig& config,
                       Rng& rng, PreprocessTrace* trace) {
  config.Validate();
  RequireNonEmpty(img, "preprocess");
  if (img.channels() != 3) {
    throw DataError("preprocess", "channels", "expected a 3-channel raster");
  }
  for (float v : img.pixels()) {
    if (!(v >= 0.0f && v <= 255.0f)) {
      throw DataError("preprocess", "pixel-range", "input pixel outside [0,255]");
    }
  }
  PreprocessTrace local;
  PreprocessTrace& t = trace ? *trace : local;
  t = PreprocessTrace{};

  t.crop = SampleCrop(img.height(), img.width(), config, rng);
  Raster out = ResizeBilinear(Crop(img, t.crop), config.out_size, config.out_size);
  if (rng.Bernoulli(config.flip_prob)) {
    t.flipped = true;
    out = FlipHorizontal(out);
  }
  if (rng.Bernoulli(config.rotate_prob)) {
    t.rotation_degrees = rng.Uniform(config.rotate_range[0], config.rotate_range[1]);
    out = Rotate(out, *t.rotation_degrees);
  }
  if (rng.Bernoulli(config.color_prob)) {
    std::array<double, 3> shift;
    for (double& s : shift) s = rng.Uniform(-config.color_shift, config.color_shift);
    t.color_shift = shift;
    out = ShiftColor(out, shift);
  }
  return RescaleToUnit(out);
}

Raster ParseRaster(std::istream& in) {
  std::size_t h = 0, w = 0, c = 0;
  if (!(in >> h >> w >> c) || h == 0 || w == 0 || c == 0) {
    throw DataError("preprocess", "parse", "bad raster header");
  }
  Raster img(h, w, c);
  std::string token;
  for (float& v : img.pixels()) {
    if (!(in >> token)) throw DataError("preprocess", "parse", "truncated raster");
    auto parsed = ParseReal(token);
    if (!parsed) throw DataError("preprocess", "parse", "bad pixel '" + token + "'");
    v = static_cast<float>(*parsed);
  }
  if (in >> token) throw DataError("preprocess", "parse", "trailing data after raster");
  return img;
}

Raster ReadRaster(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("preprocess", "io", "cannot open " + path.string());
  return ParseRaster(in);
}

void WriteRaster(const Raster& img, std::ostream& out) {
  out << img.height() << ' ' << img.width() << ' ' << img.channels() << '\n';
  const std::size_t row = img.width() * img.channels();
  const auto& px = img.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) {
    out << FormatShortest(px[i]) << ((i + 1) % row == 0 ? '\n' : ' ');
  }
}

void WriteRaster(const Raster& img, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("preprocess", "io", "cannot write " + path.string());
  WriteRaster(img, out);
}

}  // namespace mlforge

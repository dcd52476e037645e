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

#ifndef MLFORGE_PREPROCESS_H_
#define MLFORGE_PREPROCESS_H_

#include <array>
#include <cstddef>
#include <filesystem>
#include <istream>
#include <optional>
#include <ostream>
#include <vector>

#include "mlforge/rng.h"

namespace mlforge {

// Interleaved H x W x C image. Pixel values are [0, 255] on input and
// [-1, 1] after preprocessing.
class Raster {
 public:
  Raster() = default;
  Raster(std::size_t height, std::size_t width, std::size_t channels = 3,
         float fill = 0.0f);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t channels() const { return channels_; }

  float& at(std::size_t y, std::size_t x, std::size_t c) {
    return pixels_[(y * width_ + x) * channels_ + c];
  }
  float at(std::size_t y, std::size_t x, std::size_t c) const {
    return pixels_[(y * width_ + x) * channels_ + c];
  }

  std::vector<float>& pixels() { return pixels_; }
  const std::vector<float>& pixels() const { return pixels_; }

  friend bool operator==(const Raster&, const Raster&) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t channels_ = 0;
  std::vector<float> pixels_;
};

struct CropBox {
  std::size_t x = 0;
  std::size_t y = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  friend bool operator==(const CropBox&, const CropBox&) = default;
};

struct PreprocessConfig {
  std::array<double, 2> area_range{0.05, 1.0};
  std::array<double, 2> aspect_range{3.0 / 4.0, 4.0 / 3.0};  // width / height
  std::size_t out_size = 224;
  double flip_prob = 0.5;
  double rotate_prob = 0.25;
  std::array<double, 2> rotate_range{-45.0, 45.0};  // degrees
  double color_prob = 0.5;
  double color_shift = 25.5;  // max per-channel additive shift
  int crop_attempts = 10;

  // Throws mlforge::Error when a range is inverted or a probability is
  // outside [0, 1].
  void Validate() const;
};

// What a single PreprocessImage call drew.
struct PreprocessTrace {
  CropBox crop;
  bool flipped = false;
  std::optional<double> rotation_degrees;
  std::optional<std::array<double, 3>> color_shift;
};

// Rejection-samples a box whose area fraction lies in area_range and whose
// width/height lies in aspect_range. Falls back to the full image after
// `crop_attempts` misses.
CropBox SampleCrop(std::size_t height, std::size_t width,
                   const PreprocessConfig& config, Rng& rng);

Raster Crop(const Raster& img, const CropBox& box);

// Bilinear resampling with half-pixel centers and edge clamping.
Raster ResizeBilinear(const Raster& img, std::size_t out_height,
                      std::size_t out_width);

Raster FlipHorizontal(const Raster& img);

// Rotates about the image center, resampling bilinearly; samples falling
// outside the image take the nearest edge value.
Raster Rotate(const Raster& img, double degrees);

// Adds shift[c] to channel c and clamps to [0, 255].
Raster ShiftColor(const Raster& img, const std::array<double, 3>& shift);

// v -> v / 127.5 - 1.
Raster RescaleToUnit(const Raster& img);

// Crop, resize, flip, rotate, color shift, rescale, in that order.
Raster PreprocessImage(const Raster& img, const PreprocessConfig& config,
                       Rng& rng, PreprocessTrace* trace = nullptr);

// Raster text format: "H W C" header, then whitespace-separated values.
Raster ParseRaster(std::istream& in);
Raster ReadRaster(const std::filesystem::path& path);
void WriteRaster(const Raster& img, std::ostream& out);
void WriteRaster(const Raster& img, const std::filesystem::path& path);

}  // namespace mlforge

#endif  // MLFORGE_PREPROCESS_H_

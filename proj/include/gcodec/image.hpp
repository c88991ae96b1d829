// Copyright 2026 the gcodec authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "gcodec/tensor.hpp"

namespace gcodec {

// 8-bit image in [0,1] doubles, shape (1, channels, h, w). PNG (RGB/RGBA/
// gray) and binary PPM/PGM are supported; everything is converted to the
// requested channel count on load.
Tensor load_image(const std::string& path, int channels = 3);
// Round-half-away 8-bit quantization, clamped to [0,1].
void save_image(const Tensor& img, const std::string& path);  // by extension: .png/.ppm

bool is_image_file(const std::string& path);

// Separable bicubic resampling (Catmull-Rom, a = -0.5), used for the 2x/4x
// downscaled ingest variants.
Tensor resize_bicubic(const Tensor& img, int out_h, int out_w);

// Reflect-pad bottom/right to the next multiple of `multiple`.
Tensor reflect_pad_to_multiple(const Tensor& img, int multiple);

// Non-overlapping patch grid; patches smaller than `patch` at the border are
// dropped.
std::vector<Tensor> tile_patches(const Tensor& img, int patch);

}  // namespace gcodec

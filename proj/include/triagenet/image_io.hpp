#pragma once

#include <filesystem>

#include "triagenet/dataset.hpp"
#include "triagenet/tensor.hpp"

namespace triagenet::data {

// Decodes an RGB raster image, resizes to (height, width) with bilinear
// interpolation and scales channel values to [0, 1].
ImageTensor load_image_file(const std::filesystem::path& path, int height,
                            int width);

ImageTensor load_image(const ManifestEntry& entry, int height, int width);

// Pixel-center-aligned bilinear resampling.
ImageTensor resize_bilinear(const ImageTensor& src, int out_height,
                            int out_width);

// 8-bit PNG writer for fixtures and tests. Values are clamped to [0, 1].
void write_png(const std::filesystem::path& path, const ImageTensor& image);

}  // namespace triagenet::data

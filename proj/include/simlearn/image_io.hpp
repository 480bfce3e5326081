#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "simlearn/tensor.hpp"

namespace simlearn {

/// 8-bit interleaved image.
struct Image8 {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 0;  // 1 (gray) or 3 (RGB)
  std::vector<std::uint8_t> pixels;
};

/// Decodes an 8-bit gray/RGB PNG (palette, alpha and 16-bit inputs are converted). Throws IoError.
Image8 read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image8& image);
void write_pgm(const std::filesystem::path& path, const Image8& image);

/// Bilinear resize and channel conversion to an [H x W x C] tensor scaled to [0, 1].
Tensor image_to_tensor(const Image8& image, std::size_t height, std::size_t width, std::size_t channels);

/// [H x W x C] tensor in [0, 1] (values are clamped) to an 8-bit image.
Image8 tensor_to_image(const Tensor& hwc);

}  // namespace simlearn

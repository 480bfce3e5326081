#include "simlearn/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <fstream>

#include "simlearn/errors.hpp"

namespace simlearn {

Image8 read_png(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw IoError("cannot read image '" + path.string() + "': " + image.message);
  }
  // Gray stays gray; anything with color is read as RGB. Alpha is composited away.
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  Image8 img{image.width, image.height, color ? 3u : 1u, {}};
  img.pixels.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, img.pixels.data(), 0, nullptr)) {
    png_image_free(&image);
    throw IoError("failed to decode '" + path.string() + "': " + image.message);
  }
  return img;
}

void write_png(const std::filesystem::path& path, const Image8& img) {
  if (img.channels != 1 && img.channels != 3) throw InvalidArgument("write_png: 1 or 3 channels required");
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = img.channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.c_str(), 0, img.pixels.data(), 0, nullptr)) {
    throw IoError("failed to write '" + path.string() + "': " + image.message);
  }
}

void write_pgm(const std::filesystem::path& path, const Image8& img) {
  if (img.channels != 1) throw InvalidArgument("write_pgm: grayscale image required");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  os << "P5\n" << img.width << ' ' << img.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
}

Tensor image_to_tensor(const Image8& img, std::size_t height, std::size_t width, std::size_t channels) {
  if (img.width == 0 || img.height == 0) throw InvalidArgument("image_to_tensor: empty image");
  if (channels != 1 && channels != 3) throw InvalidArgument("image_to_tensor: 1 or 3 channels supported");
  auto sample = [&](std::size_t x, std::size_t y, std::size_t c) -> double {
    const std::size_t src_c = img.channels == 1 ? 0 : c;
    return img.pixels[(y * img.width + x) * img.channels + src_c] / 255.0;
  };
  auto luminance = [&](std::size_t x, std::size_t y) -> double {
    if (img.channels == 1) return sample(x, y, 0);
    return 0.299 * sample(x, y, 0) + 0.587 * sample(x, y, 1) + 0.114 * sample(x, y, 2);
  };
  Tensor out({height, width, channels});
  const double sy = static_cast<double>(img.height) / static_cast<double>(height);
  const double sx = static_cast<double>(img.width) / static_cast<double>(width);
  for (std::size_t y = 0; y < height; ++y) {
    const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0, static_cast<double>(img.height - 1));
    const std::size_t y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, img.height - 1);
    const double wy = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < width; ++x) {
      const double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0, static_cast<double>(img.width - 1));
      const std::size_t x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, img.width - 1);
      const double wx = fx - static_cast<double>(x0);
      for (std::size_t c = 0; c < channels; ++c) {
        auto at = [&](std::size_t xx, std::size_t yy) { return channels == 1 ? luminance(xx, yy) : sample(xx, yy, c); };
        const double top = at(x0, y0) * (1 - wx) + at(x1, y0) * wx;
        const double bottom = at(x0, y1) * (1 - wx) + at(x1, y1) * wx;
        out[(y * width + x) * channels + c] = top * (1 - wy) + bottom * wy;
      }
    }
  }
  return out;
}

Image8 tensor_to_image(const Tensor& hwc) {
  if (hwc.rank() != 3) throw ShapeError("tensor_to_image: expected [H x W x C]");
  Image8 img{hwc.dim(1), hwc.dim(0), hwc.dim(2), std::vector<std::uint8_t>(hwc.size())};
  for (std::size_t i = 0; i < hwc.size(); ++i) {
    img.pixels[i] = static_cast<std::uint8_t>(std::lround(std::clamp(hwc[i], 0.0, 1.0) * 255.0));
  }
  return img;
}

}  // namespace simlearn

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "ctnet/errors.hpp"
#include "ctnet/io.hpp"

namespace ctnet {
namespace {

struct Decoded {
  std::size_t height = 0, width = 0, channels = 0;
  std::vector<std::uint8_t> pixels;
};

Decoded decode_png(const fs::path& path) {
  const std::vector<std::uint8_t> bytes = read_bytes(path);
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw IoError(path.string() + ": " + image.message);
  }
  const bool colour = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = colour ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  Decoded d{image.height, image.width, colour ? 3u : 1u, {}};
  d.pixels.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, d.pixels.data(), 0, nullptr)) {
    png_image_free(&image);
    throw IoError(path.string() + ": " + image.message);
  }
  return d;
}

void encode_png(const fs::path& path, std::size_t height, std::size_t width, std::size_t channels,
                const std::vector<std::uint8_t>& pixels) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, pixels.data(), 0, nullptr)) {
    throw IoError(path.string() + ": " + image.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, pixels.data(), 0, nullptr)) {
    throw IoError(path.string() + ": " + image.message);
  }
  out.resize(size);
  write_bytes(path, out);
}

std::uint8_t quantize(double v) { return static_cast<std::uint8_t>(std::floor(std::clamp(v, 0.0, 1.0) * 255.0 + 0.5)); }

}  // namespace

Tensor load_png(const fs::path& path) {
  const Decoded d = decode_png(path);
  std::vector<double> data(d.pixels.size());
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = d.pixels[i] / 255.0;
  return Tensor({d.height, d.width, d.channels}, std::move(data));
}

void save_png(const Tensor& image, const fs::path& path) {
  Tensor t = image.rank() == 2 ? image.reshaped({image.dim(0), image.dim(1), 1}) : image;
  require_rank(t, 3, "save_png");
  if (t.dim(2) != 1 && t.dim(2) != 3) throw ShapeError("save_png: expected 1 or 3 channels, got " + shape_string(t.dims()));
  std::vector<std::uint8_t> pixels(t.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) pixels[i] = quantize(t[i]);
  encode_png(path, t.dim(0), t.dim(1), t.dim(2), pixels);
}

Tensor load_mask_png(const fs::path& path) {
  const Decoded d = decode_png(path);
  if (d.channels != 1) throw ValidationError(path.string() + ": mask must be a greyscale PNG");
  std::vector<double> data(d.pixels.size());
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = d.pixels[i] / 255.0;
  return Tensor({d.height, d.width}, std::move(data));
}

SegmentationMap load_label_png(const fs::path& path) {
  Decoded d = decode_png(path);
  if (d.channels != 1) throw ValidationError(path.string() + ": layout must be a greyscale PNG of label indices");
  try {
    return SegmentationMap(d.height, d.width, std::move(d.pixels));
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void save_label_png(const SegmentationMap& s, const fs::path& path) {
  encode_png(path, s.height(), s.width(), 1, s.labels());
}

Tensor load_image_any(const fs::path& path) {
  if (path.extension() == ".cttn") return load_tensor(path);
  return load_png(path);
}

}  // namespace ctnet

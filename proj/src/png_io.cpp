#include "carotid/png_io.hpp"

#include <png.h>

#include <cstring>
#include <string>

namespace carotid::png {

Grid<std::uint8_t> read_gray8(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw FormatError("cannot read PNG " + path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_GRAY;
  Grid<std::uint8_t> out(static_cast<int>(image.height), static_cast<int>(image.width));
  if (!png_image_finish_read(&image, nullptr, out.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw FormatError("cannot decode PNG " + path.string() + ": " + msg);
  }
  return out;
}

void write_gray8(const std::filesystem::path& path, const Grid<std::uint8_t>& pixels) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(pixels.cols());
  image.height = static_cast<png_uint_32>(pixels.rows());
  image.format = PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&image, path.c_str(), 0, pixels.data(), 0, nullptr)) {
    throw IoError("cannot write PNG " + path.string() + ": " + image.message);
  }
}

void write_mask(const std::filesystem::path& path, const Mask& mask) {
  Grid<std::uint8_t> px(mask.rows(), mask.cols());
  for (std::size_t i = 0; i < mask.size(); ++i) px.values()[i] = mask.values()[i] ? 255 : 0;
  write_gray8(path, px);
}

Mask read_mask(const std::filesystem::path& path) {
  auto px = read_gray8(path);
  Mask m(px.rows(), px.cols());
  for (std::size_t i = 0; i < px.size(); ++i) m.values()[i] = px.values()[i] >= 128 ? 1 : 0;
  return m;
}

}  // namespace carotid::png

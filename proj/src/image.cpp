#include "esrgan/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "esrgan/errors.hpp"

namespace esrgan {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

ImageRGB load_image(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw DataError("cannot open image " + path.string());
  png_byte signature[8];
  if (std::fread(signature, 1, 8, file.get()) != 8 || png_sig_cmp(signature, 0, 8) != 0) {
    throw DataError("not a PNG file: " + path.string());
  }

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("libpng initialisation failed for " + path.string());
  }
  ImageRGB img;
  std::vector<png_byte> buffer;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("corrupt PNG data in " + path.string());
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const png_byte color = png_get_color_type(png, info);
  const png_byte depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  png_set_strip_alpha(png);
  if (depth == 16) png_set_swap(png);  // little-endian 16-bit samples
  png_read_update_info(png, info);

  const std::size_t width = png_get_image_width(png, info);
  const std::size_t height = png_get_image_height(png, info);
  const std::size_t row_bytes = png_get_rowbytes(png, info);
  const int out_depth = png_get_bit_depth(png, info);
  if (png_get_channels(png, info) != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("unsupported PNG layout in " + path.string());
  }
  buffer.resize(row_bytes * height);
  rows.resize(height);
  for (std::size_t y = 0; y < height; ++y) rows[y] = buffer.data() + y * row_bytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  img = ImageRGB(height, width);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        if (out_depth == 16) {
          const png_byte* p = rows[y] + (x * 3 + c) * 2;
          img.at(c, y, x) = static_cast<double>(p[0] | (p[1] << 8)) / 65535.0;
        } else {
          img.at(c, y, x) = static_cast<double>(rows[y][x * 3 + c]) / 255.0;
        }
      }
    }
  }
  return img;
}

std::uint8_t quantize_8bit(double v) {
  const double clamped = std::clamp(std::isnan(v) ? 0.0 : v, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::floor(clamped * 255.0 + 0.5));
}

void save_image(const ImageRGB& img, const std::filesystem::path& path) {
  if (img.height == 0 || img.width == 0) throw DataError("cannot save empty image to " + path.string());
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw DataError("cannot write image " + path.string());

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw DataError("libpng initialisation failed for " + path.string());
  }
  std::vector<png_byte> buffer(img.height * img.width * 3);
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      for (std::size_t c = 0; c < 3; ++c) buffer[(y * img.width + x) * 3 + c] = quantize_8bit(img.at(c, y, x));
    }
  }
  std::vector<png_bytep> rows(img.height);
  for (std::size_t y = 0; y < img.height; ++y) rows[y] = buffer.data() + y * img.width * 3;

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("failed writing PNG " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Tensor images_to_tensor(const std::vector<ImageRGB>& images) {
  if (images.empty()) throw DimensionError("images_to_tensor: no images");
  const std::size_t h = images.front().height;
  const std::size_t w = images.front().width;
  std::vector<double> data;
  data.reserve(images.size() * 3 * h * w);
  for (const auto& img : images) {
    if (img.height != h || img.width != w) throw DimensionError("images_to_tensor: images differ in size");
    data.insert(data.end(), img.pixels.begin(), img.pixels.end());
  }
  return Tensor::from_data(Shape{images.size(), 3, h, w}, std::move(data));
}

ImageRGB tensor_to_image(const Tensor& t, std::size_t index) {
  const Shape& s = t.shape();
  if (s.c != 3 || index >= s.n) throw DimensionError("tensor_to_image: cannot take image " + std::to_string(index) + " of " + s.str());
  ImageRGB img(s.h, s.w);
  const auto data = t.data();
  const std::size_t len = 3 * s.plane();
  std::copy(data.begin() + static_cast<long>(index * len), data.begin() + static_cast<long>((index + 1) * len),
            img.pixels.begin());
  return img;
}

ImageRGB crop(const ImageRGB& img, std::size_t top, std::size_t left, std::size_t h, std::size_t w) {
  if (top + h > img.height || left + w > img.width) throw DimensionError("crop window exceeds image bounds");
  ImageRGB out(h, w);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) out.at(c, y, x) = img.at(c, top + y, left + x);
    }
  }
  return out;
}

}  // namespace esrgan

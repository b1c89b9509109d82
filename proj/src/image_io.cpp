#include "wsol/image.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <vector>

#include "wsol/error.hpp"

namespace wsol {

Image resize_nearest(const Image& image, int height, int width) {
  if (height < 1 || width < 1) throw InputError("resize_nearest: empty target size");
  Image out(image.channels(), height, width);
  for (int r = 0; r < height; ++r) {
    const int sr = std::min(image.height - 1, static_cast<int>((r + 0.5) * image.height / height));
    for (int c = 0; c < width; ++c) {
      const int sc = std::min(image.width - 1, static_cast<int>((c + 0.5) * image.width / width));
      out.data.col(r * width + c) = image.data.col(sr * image.width + sc);
    }
  }
  return out;
}

namespace {

Image from_rgb8(const std::vector<unsigned char>& rgb, int height, int width) {
  Image img(3, height, width);
  for (int i = 0; i < height * width; ++i)
    for (int c = 0; c < 3; ++c) img.data(c, i) = rgb[3 * i + c] / 255.0f;
  return img;
}

std::vector<unsigned char> to_rgb8(const Image& image) {
  if (image.channels() != 3) throw InputError("image writer: expected 3 channels");
  std::vector<unsigned char> rgb(3 * image.pixels());
  for (int i = 0; i < image.pixels(); ++i)
    for (int c = 0; c < 3; ++c)
      rgb[3 * i + c] = static_cast<unsigned char>(std::lround(std::clamp(image.data(c, i), 0.0f, 1.0f) * 255.0f));
  return rgb;
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

Image read_png(const std::string& path) {
  File fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw LoadError("cannot open image " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw LoadError("libpng initialisation failed");
  }
  std::vector<unsigned char> rgb;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw LoadError("malformed PNG " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  const int width = static_cast<int>(png_get_image_width(png, info));
  const int height = static_cast<int>(png_get_image_height(png, info));
  const auto color = png_get_color_type(png, info);
  if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) {
    if (png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
    png_set_gray_to_rgb(png);
  }
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  rgb.resize(static_cast<std::size_t>(width) * height * 3);
  rows.resize(height);
  for (int r = 0; r < height; ++r) rows[r] = rgb.data() + static_cast<std::size_t>(r) * width * 3;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);
  return from_rgb8(rgb, height, width);
}

Image read_ppm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError("cannot open image " + path);
  std::string magic;
  int width = 0, height = 0, maxval = 0;
  is >> magic >> width >> height >> maxval;
  if (magic != "P6" || width <= 0 || height <= 0 || maxval != 255) throw LoadError("unsupported PPM " + path);
  is.get();
  std::vector<unsigned char> rgb(static_cast<std::size_t>(width) * height * 3);
  is.read(reinterpret_cast<char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
  if (!is) throw LoadError("truncated PPM " + path);
  return from_rgb8(rgb, height, width);
}

bool ends_with(const std::string& s, const std::string& suffix) {
  if (s.size() < suffix.size()) return false;
  return std::equal(suffix.rbegin(), suffix.rend(), s.rbegin(),
                    [](char a, char b) { return std::tolower(static_cast<unsigned char>(a)) == b; });
}

}  // namespace

Image read_image(const std::string& path) {
  if (ends_with(path, ".ppm")) return read_ppm(path);
  return read_png(path);
}

void write_png(const std::string& path, const Image& image) {
  const auto rgb = to_rgb8(image);
  File fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw LoadError("cannot open " + path + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw LoadError("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw LoadError("failed writing PNG " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, image.width, image.height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int r = 0; r < image.height; ++r)
    png_write_row(png, const_cast<png_bytep>(rgb.data() + static_cast<std::size_t>(r) * image.width * 3));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void write_ppm(const std::string& path, const Image& image) {
  const auto rgb = to_rgb8(image);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw LoadError("cannot open " + path + " for writing");
  os << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
}

void draw_box(Image& image, const Box& box, const std::array<float, 3>& rgb) {
  const auto c = clip(box).box;
  auto px = [](double v, int n) { return std::clamp(static_cast<int>(std::floor(v * n)), 0, n - 1); };
  const int x0 = px(c.x_min, image.width), x1 = px(c.x_max - 1e-9, image.width);
  const int y0 = px(c.y_min, image.height), y1 = px(c.y_max - 1e-9, image.height);
  auto set = [&](int r, int col) {
    for (int ch = 0; ch < 3; ++ch) image.at(ch, r, col) = rgb[ch];
  };
  for (int x = x0; x <= x1; ++x) {
    set(y0, x);
    set(y1, x);
  }
  for (int y = y0; y <= y1; ++y) {
    set(y, x0);
    set(y, x1);
  }
}

}  // namespace wsol

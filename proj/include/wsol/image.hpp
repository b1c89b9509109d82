#ifndef WSOL_IMAGE_HPP_
#define WSOL_IMAGE_HPP_

#include <array>
#include <string>

#include "wsol/geometry.hpp"
#include "wsol/tensor.hpp"

namespace wsol {

/// Nearest-neighbour resampling: output pixel (r, c) reads source pixel
/// (floor((r + 0.5) * H / h), floor((c + 0.5) * W / w)).
Image resize_nearest(const Image& image, int height, int width);

/// Reads an 8-bit RGB image (PNG or binary PPM) into [0,1] floats.
Image read_image(const std::string& path);

/// Writes an 8-bit RGB PNG; values are clamped to [0,1].
void write_png(const std::string& path, const Image& image);
void write_ppm(const std::string& path, const Image& image);

/// Draws a one-pixel box outline in place.
void draw_box(Image& image, const Box& box, const std::array<float, 3>& rgb);

}  // namespace wsol

#endif  // WSOL_IMAGE_HPP_

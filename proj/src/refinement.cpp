#include "wsol/refinement.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "wsol/error.hpp"
#include "wsol/image.hpp"

namespace wsol {

PixelRect pixel_rect(const Box& box, int height, int width) {
  // Centers (i + 0.5)/n inside [lo, hi) <=> ceil(lo*n - 0.5) <= i < hi*n - 0.5.
  auto span = [](double lo, double hi, int n, int& first, int& last) {
    first = std::max(0, static_cast<int>(std::ceil(lo * n - 0.5)));
    last = std::min(n - 1, static_cast<int>(std::ceil(hi * n - 0.5)) - 1);
    if (last < first) {
      const int mid = std::clamp(static_cast<int>(std::floor(0.5 * (lo + hi) * n)), 0, n - 1);
      first = last = mid;
    }
  };
  PixelRect r;
  span(box.y_min, box.y_max, height, r.row0, r.row1);
  span(box.x_min, box.x_max, width, r.col0, r.col1);
  return r;
}

Image crop_to_box(const Image& image, const Box& box, int out_height, int out_width) {
  if (!box.valid() || clip(box).degenerate) throw InputError("crop_to_box: degenerate box");
  const auto r = pixel_rect(box, image.height, image.width);
  const int h = r.row1 - r.row0 + 1;
  const int w = r.col1 - r.col0 + 1;
  Image crop(image.channels(), h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) crop.data.col(y * w + x) = image.data.col((r.row0 + y) * image.width + r.col0 + x);
  if (h == out_height && w == out_width) return crop;
  return resize_nearest(crop, out_height, out_width);
}

std::string format_pair_record(const std::string& image_id, const ConsistencyPair& pair, double tau) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(6);
  const auto& p = pair.params;
  os << image_id << ',' << format_box(pair.source_box) << ',' << p.scale_x << ',' << p.scale_y << ','
     << p.translate_x << ',' << p.translate_y << ',' << int(p.flip_h) << ',' << int(p.flip_v) << ','
     << format_box(pair.target_box) << ',' << pair.confidence.value << ','
     << int(!pair.degenerate && pair.confidence.value > tau);
  return os.str();
}

}  // namespace wsol

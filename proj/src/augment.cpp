#include "wsol/augment.hpp"

#include <cmath>

#include "wsol/error.hpp"
#include "wsol/image.hpp"

namespace wsol {

StrongAugParams sample_strong_params(std::mt19937_64& rng, const StrongAugSpec& spec) {
  std::uniform_real_distribution<double> scale(spec.scale_min, spec.scale_max);
  std::uniform_real_distribution<double> shift(-spec.translate_max, spec.translate_max);
  std::bernoulli_distribution translate_on(spec.translate_prob);
  std::bernoulli_distribution flip(spec.flip_prob);
  // Draw order is fixed so a seed always reproduces the same parameters.
  StrongAugParams p;
  p.scale_x = scale(rng);
  p.scale_y = scale(rng);
  p.translate_active = translate_on(rng);
  const double tx = shift(rng);
  const double ty = shift(rng);
  if (p.translate_active) {
    p.translate_x = tx;
    p.translate_y = ty;
  }
  p.flip_h = flip(rng);
  p.flip_v = flip(rng);
  return p;
}

AxisMap strong_axis_x(const StrongAugParams& p) {
  return {p.scale_x, 0.5 * (1.0 - p.scale_x) + p.translate_x, p.flip_h};
}

AxisMap strong_axis_y(const StrongAugParams& p) {
  return {p.scale_y, 0.5 * (1.0 - p.scale_y) + p.translate_y, p.flip_v};
}

BoxWarp warp_box(const Box& box, const AxisMap& mx, const AxisMap& my) {
  if (!box.valid()) throw InputError("warp_box: invalid box");
  const double xa = mx.forward(box.x_min), xb = mx.forward(box.x_max);
  const double ya = my.forward(box.y_min), yb = my.forward(box.y_max);
  const auto c = clip(Box(std::min(xa, xb), std::min(ya, yb), std::max(xa, xb), std::max(ya, yb)));
  return {c.box, c.degenerate};
}

Image warp_image(const Image& image, const AxisMap& mx, const AxisMap& my) {
  const int h = image.height;
  const int w = image.width;
  Image out(image.channels(), h, w);
  std::vector<int> src_col(w), src_row(h);
  for (int c = 0; c < w; ++c) {
    const double x = mx.inverse((c + 0.5) / w);
    src_col[c] = x >= 0.0 ? static_cast<int>(std::floor(x * w)) : -1;
    if (src_col[c] >= w) src_col[c] = -1;
  }
  for (int r = 0; r < h; ++r) {
    const double y = my.inverse((r + 0.5) / h);
    src_row[r] = y >= 0.0 ? static_cast<int>(std::floor(y * h)) : -1;
    if (src_row[r] >= h) src_row[r] = -1;
  }
  for (int r = 0; r < h; ++r) {
    if (src_row[r] < 0) continue;
    for (int c = 0; c < w; ++c) {
      if (src_col[c] < 0) continue;
      out.data.col(r * w + c) = image.data.col(src_row[r] * w + src_col[c]);
    }
  }
  return out;
}

BoxWarp apply_strong_box(const Box& box, const StrongAugParams& params) {
  return warp_box(box, strong_axis_x(params), strong_axis_y(params));
}

StrongResult apply_strong(const Image& image, const Box& box, const StrongAugParams& params) {
  const auto bw = apply_strong_box(box, params);
  return {warp_image(image, strong_axis_x(params), strong_axis_y(params)), bw.box, bw.degenerate};
}

GeneralAugParams sample_general_params(std::mt19937_64& rng, const Resolution& res) {
  if (res.crop > res.precrop || res.crop < 1) throw ConfigError("crop resolution must lie in [1, precrop]");
  std::uniform_int_distribution<int> offset(0, res.precrop - res.crop);
  std::bernoulli_distribution flip(0.5);
  GeneralAugParams p;
  p.crop_offset_x = offset(rng);
  p.crop_offset_y = offset(rng);
  p.flip_h = flip(rng);
  return p;
}

GeneralAugParams eval_general_params(const Resolution& res) {
  const int off = (res.precrop - res.crop) / 2;
  return {off, off, false};
}

namespace {
void require_window(const GeneralAugParams& p, const Resolution& res) {
  if (p.crop_offset_x < 0 || p.crop_offset_y < 0 || p.crop_offset_x + res.crop > res.precrop ||
      p.crop_offset_y + res.crop > res.precrop)
    throw InputError("apply_general: crop window outside the resized image");
}
}  // namespace

BoxWarp apply_general_box(const Box& box, const GeneralAugParams& params, const Resolution& res) {
  require_window(params, res);
  const double s = static_cast<double>(res.precrop) / res.crop;
  const AxisMap mx{s, -static_cast<double>(params.crop_offset_x) / res.crop, params.flip_h};
  const AxisMap my{s, -static_cast<double>(params.crop_offset_y) / res.crop, false};
  return warp_box(box, mx, my);
}

GeneralResult apply_general(const Image& image, const std::optional<Box>& box, const GeneralAugParams& params,
                            const Resolution& res) {
  require_window(params, res);
  const Image resized = (image.height == res.precrop && image.width == res.precrop)
                            ? image
                            : resize_nearest(image, res.precrop, res.precrop);
  GeneralResult out;
  out.image = Image(resized.channels(), res.crop, res.crop);
  for (int r = 0; r < res.crop; ++r)
    for (int c = 0; c < res.crop; ++c) {
      const int sc = params.flip_h ? res.crop - 1 - c : c;
      out.image.data.col(r * res.crop + c) =
          resized.data.col((r + params.crop_offset_y) * res.precrop + sc + params.crop_offset_x);
    }
  if (box) {
    const auto bw = apply_general_box(*box, params, res);
    out.box = bw.box;
    out.degenerate = bw.degenerate;
  }
  return out;
}

}  // namespace wsol

#ifndef WSOL_AUGMENT_HPP_
#define WSOL_AUGMENT_HPP_

#include <optional>
#include <random>

#include "wsol/geometry.hpp"
#include "wsol/tensor.hpp"

namespace wsol {

/// Ranges and probabilities of the strong (consistency) augmentation.
struct StrongAugSpec {
  double scale_min = 0.8;
  double scale_max = 1.2;
  double translate_max = 0.25;  // fraction of image extent
  double translate_prob = 0.5;
  double flip_prob = 0.5;
};

struct StrongAugParams {
  double scale_x = 1.0;
  double scale_y = 1.0;
  double translate_x = 0.0;
  double translate_y = 0.0;
  bool translate_active = false;
  bool flip_h = false;
  bool flip_v = false;

  static StrongAugParams identity() { return {}; }
  friend bool operator==(const StrongAugParams&, const StrongAugParams&) = default;
};

StrongAugParams sample_strong_params(std::mt19937_64& rng, const StrongAugSpec& spec = {});

/// 1-D affine coordinate map u = scale * x + offset, optionally mirrored.
/// scale about the image center, then translate, then flip.
struct AxisMap {
  double scale = 1.0;
  double offset = 0.0;
  bool flip = false;

  double forward(double x) const {
    const double u = scale * x + offset;
    return flip ? 1.0 - u : u;
  }
  double inverse(double u) const { return ((flip ? 1.0 - u : u) - offset) / scale; }
};

AxisMap strong_axis_x(const StrongAugParams& p);
AxisMap strong_axis_y(const StrongAugParams& p);

struct BoxWarp {
  Box box;
  bool degenerate = false;  // ejected from the frame or collapsed by clipping
};

/// Maps both corners through the per-axis maps, reorders after flips, clips.
BoxWarp warp_box(const Box& box, const AxisMap& mx, const AxisMap& my);

/// Nearest-neighbour inverse warp; source pixels outside the frame read 0.
Image warp_image(const Image& image, const AxisMap& mx, const AxisMap& my);

struct StrongResult {
  Image image;
  Box box;
  bool degenerate = false;
};

StrongResult apply_strong(const Image& image, const Box& box, const StrongAugParams& params);
BoxWarp apply_strong_box(const Box& box, const StrongAugParams& params);

/// Resize to `precrop` then crop a `crop` window; optional horizontal flip.
struct GeneralAugParams {
  int crop_offset_x = 0;
  int crop_offset_y = 0;
  bool flip_h = false;

  friend bool operator==(const GeneralAugParams&, const GeneralAugParams&) = default;
};

struct Resolution {
  int precrop = 64;
  int crop = 56;
};

GeneralAugParams sample_general_params(std::mt19937_64& rng, const Resolution& res);
/// Centered crop, no flip.
GeneralAugParams eval_general_params(const Resolution& res);

struct GeneralResult {
  Image image;
  std::optional<Box> box;
  bool degenerate = false;
};

GeneralResult apply_general(const Image& image, const std::optional<Box>& box, const GeneralAugParams& params,
                            const Resolution& res);
BoxWarp apply_general_box(const Box& box, const GeneralAugParams& params, const Resolution& res);

}  // namespace wsol

#endif  // WSOL_AUGMENT_HPP_

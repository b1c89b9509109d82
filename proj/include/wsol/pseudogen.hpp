#ifndef WSOL_PSEUDOGEN_HPP_
#define WSOL_PSEUDOGEN_HPP_

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "wsol/error.hpp"
#include "wsol/geometry.hpp"
#include "wsol/tensor.hpp"

namespace wsol {

/// Anything that maps an image to a feature grid. Implementations must say
/// whether concurrent extract() calls on one instance are safe.
template <typename Scalar>
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual FeatureStack<Scalar> extract(const Image& image) const = 0;
  virtual bool concurrent_safe() const = 0;
};

template <typename Scalar>
AttentionMap<Scalar> channel_mean(const FeatureStack<Scalar>& features) {
  if (features.channels() < 1 || features.height < 1 || features.width < 1)
    throw InputError("channel_mean: empty feature stack");
  const Vec<Scalar> mean = features.data.colwise().mean().transpose();
  // Spatial index is row-major; Eigen default storage is column-major.
  AttentionMap<Scalar> out(features.height, features.width);
  for (int r = 0; r < features.height; ++r)
    for (int c = 0; c < features.width; ++c) out(r, c) = mean(r * features.width + c);
  return out;
}

struct Binarized {
  BinaryMask mask;
  bool degenerate = false;  // constant map, nothing can be foreground
};

/// Min-max normalizes the map to [0,1] and marks cells strictly above delta.
template <typename Scalar>
Binarized binarize(const AttentionMap<Scalar>& a, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw InputError("binarize: delta must lie in (0,1)");
  if (!a.allFinite()) throw InputError("binarize: non-finite attention value");
  Binarized out;
  const Scalar lo = a.minCoeff();
  const Scalar hi = a.maxCoeff();
  if (!(hi > lo)) {
    out.mask = BinaryMask::Constant(a.rows(), a.cols(), false);
    out.degenerate = true;
    return out;
  }
  out.mask = ((a.array() - lo) / (hi - lo)).template cast<double>() > delta;
  return out;
}

/// Tight rectangle around foreground cells, mapped with cell-boundary
/// scaling: (c_min/W, r_min/H, (c_max+1)/W, (r_max+1)/H).
/// Returns nullopt for an empty mask.
inline std::optional<Box> foreground_box(const BinaryMask& mask) {
  const auto h = mask.rows();
  const auto w = mask.cols();
  Eigen::Index r0 = h, r1 = -1, c0 = w, c1 = -1;
  for (Eigen::Index r = 0; r < h; ++r)
    for (Eigen::Index c = 0; c < w; ++c)
      if (mask(r, c)) {
        r0 = std::min(r0, r);
        r1 = std::max(r1, r);
        c0 = std::min(c0, c);
        c1 = std::max(c1, c);
      }
  if (r1 < 0) return std::nullopt;
  return Box(double(c0) / double(w), double(r0) / double(h), double(c1 + 1) / double(w),
             double(r1 + 1) / double(h));
}

struct MaskOutResult {
  Image image;
  bool warning = false;  // degenerate box, image returned unchanged
};

/// Zeroes (in raw pixel space) every pixel whose center lies in the
/// half-open box [x_min, x_max) x [y_min, y_max).
MaskOutResult mask_out(const Image& image, const Box& box);

/// Output of the two-pass mask-based generator.
struct PseudoLabel {
  Box merged;
  Box raw_pass;
  Box masked_pass;
  bool fallback_used = false;
};

/// First pass on the raw image gives raw_pass; the raw-pass region is zeroed
/// and a second pass gives masked_pass; the label is their union. An empty
/// raw pass yields the full image, an empty masked pass yields raw_pass; both
/// set fallback_used.
template <typename Scalar>
PseudoLabel generate_pseudo_box(const Image& image, const FeatureExtractor<Scalar>& extractor, double delta) {
  auto locate = [&](const Image& img) -> std::optional<Box> {
    const auto bin = binarize<Scalar>(channel_mean<Scalar>(extractor.extract(img)), delta);
    if (bin.degenerate) return std::nullopt;
    return foreground_box(bin.mask);
  };

  PseudoLabel out;
  const auto raw = locate(image);
  if (!raw) {
    out.raw_pass = out.masked_pass = out.merged = Box::full();
    out.fallback_used = true;
    return out;
  }
  out.raw_pass = *raw;
  const auto masked = locate(mask_out(image, *raw).image);
  if (!masked) {
    out.masked_pass = *raw;
    out.merged = clip(*raw).box;
    out.fallback_used = true;
    return out;
  }
  out.masked_pass = *masked;
  out.merged = clip(union_box(*raw, *masked)).box;
  return out;
}

/// One line of the pseudo-label dump: image_id,x_min,y_min,x_max,y_max,fallback
std::string format_pseudo_record(const std::string& image_id, const PseudoLabel& label);

struct PseudoRecord {
  std::string image_id;
  Box box;
  bool fallback = false;
};

PseudoRecord parse_pseudo_record(const std::string& line);

}  // namespace wsol

#endif  // WSOL_PSEUDOGEN_HPP_

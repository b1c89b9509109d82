#ifndef WSOL_REFINEMENT_HPP_
#define WSOL_REFINEMENT_HPP_

#include <concepts>
#include <random>
#include <string>
#include <type_traits>

#include "wsol/augment.hpp"
#include "wsol/geometry.hpp"
#include "wsol/tensor.hpp"

namespace wsol {

/// Anything with classify(image) -> probability vector.
template <typename C>
concept ImageClassifier = requires(const C& c, const Image& img) {
  { c.classify(img).maxCoeff() };
};

/// Anything with localize(image) -> clipped Box (inference mode).
template <typename L>
concept BoxLocalizer = requires(const L& l, const Image& img) {
  { l.localize(img) } -> std::convertible_to<Box>;
};

/// Pixel rectangle (inclusive rows/cols) of pixels whose centers fall in the
/// half-open box. A box too thin to contain any center snaps to the pixel
/// under its center.
struct PixelRect {
  int row0 = 0, row1 = -1, col0 = 0, col1 = -1;
};
PixelRect pixel_rect(const Box& box, int height, int width);

/// Crops the box region and resizes it (nearest) to out_height x out_width.
/// Throws InputError for degenerate boxes.
Image crop_to_box(const Image& image, const Box& box, int out_height, int out_width);

struct ConfidenceScore {
  double value = 0.0;
  Box source_box;
};

/// Max class probability of the crop. Degenerate boxes score 0.
template <ImageClassifier C>
ConfidenceScore confidence_of(const C& classifier, const Image& image, const Box& box) {
  ConfidenceScore out{0.0, box};
  const auto c = clip(box);
  if (!box.valid() || c.degenerate) return out;
  out.value = static_cast<double>(classifier.classify(crop_to_box(image, c.box, image.height, image.width)).maxCoeff());
  return out;
}

struct ConsistencyPair {
  Image strong_image;
  Box source_box;   // Loc(I_r), clipped
  Box target_box;   // S(Loc(I_r)), constant during the update
  StrongAugParams params;
  ConfidenceScore confidence;
  bool degenerate = false;
};

/// Predicts the box on I_r, draws one set of strong parameters from
/// `sampler`, and applies that same set to the image and the box. The
/// confidence is scored on the raw-image crop at Loc(I_r).
template <BoxLocalizer L, ImageClassifier C, typename Sampler>
  requires std::invocable<Sampler&> && std::convertible_to<std::invoke_result_t<Sampler&>, StrongAugParams>
ConsistencyPair build_consistency_pair(const L& localizer, const C& classifier, const Image& image,
                                       Sampler&& sampler) {
  ConsistencyPair pair;
  pair.source_box = clip(static_cast<Box>(localizer.localize(image))).box;
  pair.params = sampler();
  const auto strong = apply_strong(image, pair.source_box, pair.params);
  pair.strong_image = std::move(strong.image);
  pair.target_box = strong.box;
  pair.degenerate = strong.degenerate || clip(pair.source_box).degenerate;
  pair.confidence = confidence_of(classifier, image, pair.source_box);
  return pair;
}

template <BoxLocalizer L, ImageClassifier C>
ConsistencyPair build_consistency_pair(const L& localizer, const C& classifier, const Image& image,
                                       std::mt19937_64& rng, const StrongAugSpec& spec = {}) {
  return build_consistency_pair(localizer, classifier, image, [&] { return sample_strong_params(rng, spec); });
}

/// Debug record: image_id,predicted box,params,transformed box,confidence,retained
std::string format_pair_record(const std::string& image_id, const ConsistencyPair& pair, double tau);

}  // namespace wsol

#endif  // WSOL_REFINEMENT_HPP_

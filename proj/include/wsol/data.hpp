#ifndef WSOL_DATA_HPP_
#define WSOL_DATA_HPP_

#include <array>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <variant>
#include <vector>

#include "wsol/geometry.hpp"
#include "wsol/tensor.hpp"

namespace wsol {

/// splitmix64-style combination of seed components; every random stream in
/// the pipeline is derived from such a key so results do not depend on the
/// order in which streams are consumed.
std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts);

/// What the training stages may see: an image and its class label, nothing
/// else. There is deliberately no box member.
struct TrainingSample {
  std::string image_id;
  Image image;
  int class_label = 0;
};

struct EvalSample {
  std::string image_id;
  Image image;
  int class_label = 0;
  std::vector<Box> gt_boxes;  // at least one
};

/// Read-only training interface. Implementations must not retain boxes.
class TrainingSource {
 public:
  virtual ~TrainingSource() = default;
  virtual std::size_t size() const = 0;
  virtual const TrainingSample& get(std::size_t i) const = 0;
  virtual int num_classes() const = 0;
};

class TrainingSet final : public TrainingSource {
 public:
  TrainingSet() = default;
  TrainingSet(std::vector<TrainingSample> samples, int num_classes)
      : samples_(std::move(samples)), num_classes_(num_classes) {}

  std::size_t size() const override { return samples_.size(); }
  const TrainingSample& get(std::size_t i) const override { return samples_.at(i); }
  int num_classes() const override { return num_classes_; }

 private:
  std::vector<TrainingSample> samples_;
  int num_classes_ = 0;
};

struct EvalSet {
  std::vector<EvalSample> samples;
  int num_classes = 0;

  /// Copy of images and labels only; boxes are not carried over.
  TrainingSet training_view() const;
};

/// Seeded permutation of [0, n) for one epoch.
std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed, int epoch);

// ---------------------------------------------------------------------------
// Synthetic shapes

enum class ShapeKind { Rectangle, Ellipse };

struct SynthSpec {
  std::uint64_t seed = 7;
  int n_train = 200;
  int n_test = 100;
  int num_classes = 8;
  int image_size = 64;
  double noise = 0.08;         // stddev of per-pixel background noise
  double size_min = 0.10;      // object extent per axis, fraction of image
  double size_max = 0.40;
  std::vector<ShapeKind> kinds{ShapeKind::Rectangle, ShapeKind::Ellipse};
  std::vector<std::array<float, 3>> palette{
      {0.95f, 0.05f, 0.05f}, {0.05f, 0.95f, 0.05f}, {0.05f, 0.05f, 0.95f}, {0.95f, 0.95f, 0.05f}};
};

struct SynthData {
  EvalSet train;  // full annotation; pass train.training_view() to training
  EvalSet test;
};

/// Class k draws shape kinds[k / palette.size()] in color palette[k % palette.size()].
SynthData generate_synthetic(const SynthSpec& spec);

/// Pixel mask (height x width) of a shape inscribed in the pixel rectangle
/// [x0, x0+w) x [y0, y0+h).
BinaryMask render_shape(ShapeKind kind, int size, int x0, int y0, int w, int h);

// ---------------------------------------------------------------------------
// Directory datasets: <root>/<split>.txt with lines
//   relpath,class_index[,x0,y0,x1,y1]...

TrainingSet load_training_split(const std::string& root, const std::string& split, int num_classes);
EvalSet load_eval_split(const std::string& root, const std::string& split, int num_classes);

/// "train" loads a box-less TrainingSet (box columns are dropped); any other
/// split name loads an EvalSet that requires at least one box per line.
std::variant<TrainingSet, EvalSet> load_directory(const std::string& root, const std::string& split,
                                                  int num_classes);

}  // namespace wsol

#endif  // WSOL_DATA_HPP_

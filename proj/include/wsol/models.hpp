#ifndef WSOL_MODELS_HPP_
#define WSOL_MODELS_HPP_

#include <iosfwd>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "wsol/geometry.hpp"
#include "wsol/nn.hpp"
#include "wsol/pseudogen.hpp"
#include "wsol/tensor.hpp"

namespace wsol {

/// Class probability vector; entries in [0,1] summing to 1.
template <typename Scalar>
using ProbDist = Vec<Scalar>;

template <typename Scalar>
bool is_prob_dist(const ProbDist<Scalar>& p, double tol = 1e-5) {
  if (p.size() == 0 || !p.allFinite()) return false;
  if ((p.array() < Scalar(0)).any() || (p.array() > Scalar(1)).any()) return false;
  return std::abs(static_cast<double>(p.sum()) - 1.0) <= tol;
}

/// Shape of the desk-scale networks. Classifier and localizer use the same
/// trunk layout but never share weights.
struct Architecture {
  TrunkSpec trunk;
  int input_size = 56;
  int num_classes = 8;

  int grid_size() const { return input_size / trunk.downsample(); }
  std::string id() const;
};

/// Trunk + global average pooling + linear + softmax. The trunk output is the
/// feature stack used for attention, so a classifier is also a feature
/// extractor.
template <typename Scalar>
class Classifier : public FeatureExtractor<Scalar> {
 public:
  struct Cache {
    nn::TrunkCache<Scalar> trunk;
    Vec<Scalar> pooled;
    int grid_h = 0, grid_w = 0;
  };

  Classifier() = default;
  Classifier(const Architecture& arch, std::uint64_t seed) : arch_(arch) {
    std::mt19937_64 rng(seed);
    trunk_first_ = nn::add_trunk_params(params_, "cls", arch.trunk, rng);
    const int c = arch.trunk.out_channels();
    std::normal_distribution<double> normal(0.0, std::sqrt(1.0 / c));
    Mat<Scalar> w(arch.num_classes, c);
    for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = static_cast<Scalar>(normal(rng));
    head_w_ = params_.add("cls.fc.weight", std::move(w));
    head_b_ = params_.add("cls.fc.bias", Mat<Scalar>::Zero(arch.num_classes, 1));
  }

  const Architecture& arch() const { return arch_; }
  ParameterSet<Scalar>& params() { return params_; }
  const ParameterSet<Scalar>& params() const { return params_; }
  int num_classes() const { return arch_.num_classes; }

  FeatureStack<Scalar> extract(const Image& image) const override {
    check_input(image);
    return nn::trunk_forward<Scalar>(params_, trunk_first_, arch_.trunk, image, nullptr);
  }
  bool concurrent_safe() const override { return true; }

  Vec<Scalar> logits(const Image& image, Cache* cache = nullptr) const {
    check_input(image);
    const auto f = nn::trunk_forward(params_, trunk_first_, arch_.trunk, image, cache ? &cache->trunk : nullptr);
    Vec<Scalar> pooled = f.data.rowwise().mean();
    Vec<Scalar> z = params_[head_w_] * pooled + params_[head_b_].col(0);
    if (cache) {
      cache->pooled = std::move(pooled);
      cache->grid_h = f.height;
      cache->grid_w = f.width;
    }
    return z;
  }

  ProbDist<Scalar> classify(const Image& image) const { return softmax<Scalar>(logits(image)); }

  void backward(const Cache& cache, const Vec<Scalar>& dlogits, ParameterSet<Scalar>& grads) const {
    grads[head_w_].noalias() += dlogits * cache.pooled.transpose();
    grads[head_b_].col(0) += dlogits;
    const Vec<Scalar> dpooled = params_[head_w_].transpose() * dlogits;
    const int n = cache.grid_h * cache.grid_w;
    Planes<Scalar> df(arch_.trunk.out_channels(), cache.grid_h, cache.grid_w);
    df.data = (dpooled / static_cast<Scalar>(n)).replicate(1, n);
    nn::trunk_backward(params_, trunk_first_, arch_.trunk, cache.trunk, std::move(df), grads);
  }

 private:
  void check_input(const Image& image) const {
    if (image.height != arch_.input_size || image.width != arch_.input_size || image.channels() != 3)
      throw InputError("classifier: image shape does not match the configured input resolution");
  }

  Architecture arch_;
  ParameterSet<Scalar> params_;
  std::size_t trunk_first_ = 0;
  std::size_t head_w_ = 0;
  std::size_t head_b_ = 0;
};

/// Trunk + attention-weighted global pooling. A 1x1 score map is
/// softmax-normalized over grid cells; the box center is the expected cell
/// center under that distribution and the box size is a linear function of
/// the L2-normalized attention-pooled feature vector. Raw outputs are
/// unconstrained; localize() clips them.
template <typename Scalar>
class Localizer {
 public:
  using Raw = Eigen::Matrix<Scalar, 4, 1>;
  struct Cache {
    nn::TrunkCache<Scalar> trunk;
    Planes<Scalar> features;
    Vec<Scalar> attention;  // per cell, sums to 1
    Vec<Scalar> pooled;  // normalized
    Scalar pooled_norm = 0;
  };

  Localizer() = default;
  Localizer(const Architecture& arch, std::uint64_t seed) : arch_(arch) {
    std::mt19937_64 rng(seed);
    trunk_first_ = nn::add_trunk_params(params_, "loc", arch.trunk, rng);
    const int c = arch.trunk.out_channels();
    std::normal_distribution<double> score_init(0.0, kScoreInit), size_init(0.0, 0.01);
    Mat<Scalar> score(1, c), size(2, c);
    for (Eigen::Index i = 0; i < score.size(); ++i) score(i) = static_cast<Scalar>(score_init(rng));
    for (Eigen::Index i = 0; i < size.size(); ++i) size(i) = static_cast<Scalar>(size_init(rng));
    score_w_ = params_.add("loc.score.weight", std::move(score));
    size_w_ = params_.add("loc.size.weight", std::move(size));
    size_b_ = params_.add("loc.size.bias", Mat<Scalar>::Constant(2, 1, Scalar(0.5)));
  }

  const Architecture& arch() const { return arch_; }
  ParameterSet<Scalar>& params() { return params_; }
  const ParameterSet<Scalar>& params() const { return params_; }

  Raw raw(const Image& image, Cache* cache = nullptr) const {
    if (image.height != arch_.input_size || image.width != arch_.input_size || image.channels() != 3)
      throw InputError("localizer: image shape does not match the configured input resolution");
    Planes<Scalar> f = nn::trunk_forward(params_, trunk_first_, arch_.trunk, image, cache ? &cache->trunk : nullptr);
    const Vec<Scalar> a = softmax<Scalar>((params_[score_w_] * f.data).transpose());
    const Vec<Scalar> pooled = f.data * a;
    const Scalar norm = pooled.norm() + kNormEps;
    const Vec<Scalar> g = pooled / norm;
    const Eigen::Matrix<Scalar, 2, 1> center = cell_centers(f) * a;
    const Eigen::Matrix<Scalar, 2, 1> half = (params_[size_w_] * g + params_[size_b_].col(0)) / Scalar(2);
    Raw out;
    out << center - half, center + half;
    if (cache) {
      cache->features = std::move(f);
      cache->attention = a;
      cache->pooled = g;
      cache->pooled_norm = norm;
    }
    return out;
  }

  Box localize(const Image& image) const {
    const Raw r = raw(image);
    const Box b(std::min(r(0), r(2)), std::min(r(1), r(3)), std::max(r(0), r(2)), std::max(r(1), r(3)));
    return clip(b).box;
  }

  void backward(const Cache& cache, const Raw& dout, ParameterSet<Scalar>& grads) const {
    const auto& f = cache.features;
    const auto& a = cache.attention;
    const Eigen::Matrix<Scalar, 2, 1> dcenter(dout(0) + dout(2), dout(1) + dout(3));
    const Eigen::Matrix<Scalar, 2, 1> dsize(Scalar(0.5) * (dout(2) - dout(0)), Scalar(0.5) * (dout(3) - dout(1)));
    grads[size_w_].noalias() += dsize * cache.pooled.transpose();
    grads[size_b_].col(0) += dsize;
    const Vec<Scalar> dg_hat = params_[size_w_].transpose() * dsize;
    const Vec<Scalar> dg = (dg_hat - cache.pooled * cache.pooled.dot(dg_hat)) / cache.pooled_norm;
    // d/d(attention) from the center and the pooled features, then softmax.
    const Vec<Scalar> da = (cell_centers(f).transpose() * dcenter) + f.data.transpose() * dg;
    const Vec<Scalar> ds = a.cwiseProduct(da - Vec<Scalar>::Constant(a.size(), a.dot(da)));
    grads[score_w_].noalias() += ds.transpose() * f.data.transpose();
    Planes<Scalar> df(f.channels(), f.height, f.width);
    df.data.noalias() = dg * a.transpose() + params_[score_w_].transpose() * ds.transpose();
    nn::trunk_backward(params_, trunk_first_, arch_.trunk, cache.trunk, std::move(df), grads);
  }

 private:
  static constexpr Scalar kNormEps = Scalar(1e-6);
  static constexpr double kScoreInit = 0.1;
  // 2 x cells matrix of normalized (x, y) cell centers.
  static Mat<Scalar> cell_centers(const Planes<Scalar>& f) {
    Mat<Scalar> c(2, f.pixels());
    for (int r = 0; r < f.height; ++r)
      for (int col = 0; col < f.width; ++col) {
        c(0, r * f.width + col) = (static_cast<Scalar>(col) + Scalar(0.5)) / static_cast<Scalar>(f.width);
        c(1, r * f.width + col) = (static_cast<Scalar>(r) + Scalar(0.5)) / static_cast<Scalar>(f.height);
      }
    return c;
  }

  Architecture arch_;
  ParameterSet<Scalar> params_;
  std::size_t trunk_first_ = 0;
  std::size_t score_w_ = 0;
  std::size_t size_w_ = 0;
  std::size_t size_b_ = 0;
};

// ---------------------------------------------------------------------------
// Checkpoint container: a metadata block of key=value lines followed by named
// float32 arrays with shapes.

struct Checkpoint {
  std::map<std::string, std::string> metadata;
  std::vector<std::pair<std::string, Mat<float>>> arrays;

  void put(const std::string& prefix, const ParameterSet<float>& params);
  /// Fills `params` (layout already set) from arrays stored under `prefix`.
  void take(const std::string& prefix, ParameterSet<float>& params) const;
  bool has_prefix(const std::string& prefix) const;
  const std::string& meta(const std::string& key) const;
};

void write_checkpoint(std::ostream& os, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& is);
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace wsol

#endif  // WSOL_MODELS_HPP_

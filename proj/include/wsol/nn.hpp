#ifndef WSOL_NN_HPP_
#define WSOL_NN_HPP_

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "wsol/error.hpp"
#include "wsol/tensor.hpp"

namespace wsol {

/// Ordered collection of named arrays holding the weights of one network.
template <typename Scalar>
class ParameterSet {
 public:
  std::size_t add(std::string name, Mat<Scalar> value) {
    names_.push_back(std::move(name));
    arrays_.push_back(std::move(value));
    return arrays_.size() - 1;
  }

  std::size_t size() const { return arrays_.size(); }
  const std::string& name(std::size_t i) const { return names_[i]; }
  Mat<Scalar>& operator[](std::size_t i) { return arrays_[i]; }
  const Mat<Scalar>& operator[](std::size_t i) const { return arrays_[i]; }

  const Mat<Scalar>& get(const std::string& name) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
      if (names_[i] == name) return arrays_[i];
    throw InputError("ParameterSet: no array named '" + name + "'");
  }

  Eigen::Index total_size() const {
    Eigen::Index n = 0;
    for (const auto& a : arrays_) n += a.size();
    return n;
  }

  bool same_layout(const ParameterSet& other) const {
    if (names_ != other.names_) return false;
    for (std::size_t i = 0; i < arrays_.size(); ++i)
      if (arrays_[i].rows() != other.arrays_[i].rows() || arrays_[i].cols() != other.arrays_[i].cols())
        return false;
    return true;
  }

  ParameterSet zeros_like() const {
    ParameterSet out;
    for (std::size_t i = 0; i < arrays_.size(); ++i)
      out.add(names_[i], Mat<Scalar>::Zero(arrays_[i].rows(), arrays_[i].cols()));
    return out;
  }

  void set_zero() {
    for (auto& a : arrays_) a.setZero();
  }

  ParameterSet& operator+=(const ParameterSet& other) {
    require_same_layout(other, "ParameterSet::operator+=");
    for (std::size_t i = 0; i < arrays_.size(); ++i) arrays_[i] += other.arrays_[i];
    return *this;
  }

  /// Largest absolute entrywise difference; layouts must match.
  Scalar max_abs_diff(const ParameterSet& other) const {
    require_same_layout(other, "ParameterSet::max_abs_diff");
    Scalar d = 0;
    for (std::size_t i = 0; i < arrays_.size(); ++i)
      if (arrays_[i].size() > 0) d = std::max(d, (arrays_[i] - other.arrays_[i]).cwiseAbs().maxCoeff());
    return d;
  }

  bool all_finite() const {
    for (const auto& a : arrays_)
      if (!a.allFinite()) return false;
    return true;
  }

  void require_same_layout(const ParameterSet& other, const char* what) const {
    if (!same_layout(other)) throw InputError(std::string(what) + ": parameter layouts differ");
  }

  template <typename Other>
  ParameterSet<Other> cast() const {
    ParameterSet<Other> out;
    for (std::size_t i = 0; i < arrays_.size(); ++i) out.add(names_[i], arrays_[i].template cast<Other>());
    return out;
  }

  friend bool operator==(const ParameterSet& a, const ParameterSet& b) {
    return a.same_layout(b) && a.arrays_ == b.arrays_;
  }

 private:
  std::vector<std::string> names_;
  std::vector<Mat<Scalar>> arrays_;
};

/// Momentum update theta_shadow <- beta * theta_shadow + (1 - beta) * theta_live.
template <typename Scalar>
void ema_update_inplace(ParameterSet<Scalar>& shadow, const ParameterSet<Scalar>& live, double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw InputError("ema_update: beta must lie in [0,1]");
  shadow.require_same_layout(live, "ema_update");
  const Scalar b = static_cast<Scalar>(beta);
  const Scalar one_minus_b = static_cast<Scalar>(1.0 - beta);
  for (std::size_t i = 0; i < shadow.size(); ++i) shadow[i] = b * shadow[i] + one_minus_b * live[i];
}

template <typename Scalar>
ParameterSet<Scalar> ema_update(ParameterSet<Scalar> shadow, const ParameterSet<Scalar>& live, double beta) {
  ema_update_inplace(shadow, live, beta);
  return shadow;
}

/// Numerically stable softmax.
template <typename Scalar>
Vec<Scalar> softmax(const Vec<Scalar>& logits) {
  const Vec<Scalar> e = (logits.array() - logits.maxCoeff()).exp().matrix();
  return e / e.sum();
}

// ---------------------------------------------------------------------------
// Convolutional trunk: 3x3 same-padded convolutions with ReLU, the first
// `pooled_stages` followed by 2x2 max pooling.

struct TrunkSpec {
  int in_channels = 3;
  std::vector<int> widths{16, 32, 32, 64};
  int pooled_stages = 3;

  int out_channels() const { return widths.back(); }
  int downsample() const { return 1 << pooled_stages; }
};

namespace nn {

/// (channels*9) x (h*w) patch matrix for a 3x3 kernel with zero padding.
template <typename Scalar>
void im2col3x3(const Planes<Scalar>& in, Mat<Scalar>& cols) {
  const int c_in = in.channels();
  const int h = in.height;
  const int w = in.width;
  cols.setZero(c_in * 9, h * w);
  for (int c = 0; c < c_in; ++c)
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx) {
        const int row = c * 9 + ky * 3 + kx;
        const int dx = kx - 1;
        const int x_lo = std::max(0, -dx);
        const int x_hi = std::min(w, w - dx);
        for (int y = 0; y < h; ++y) {
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= h) continue;
          for (int x = x_lo; x < x_hi; ++x) cols(row, y * w + x) = in.data(c, sy * w + x + dx);
        }
      }
}

template <typename Scalar>
void col2im3x3(const Mat<Scalar>& dcols, Planes<Scalar>& din) {
  const int c_in = din.channels();
  const int h = din.height;
  const int w = din.width;
  din.data.setZero();
  for (int c = 0; c < c_in; ++c)
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx) {
        const int row = c * 9 + ky * 3 + kx;
        const int dx = kx - 1;
        const int x_lo = std::max(0, -dx);
        const int x_hi = std::min(w, w - dx);
        for (int y = 0; y < h; ++y) {
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= h) continue;
          for (int x = x_lo; x < x_hi; ++x) din.data(c, sy * w + x + dx) += dcols(row, y * w + x);
        }
      }
}

template <typename Scalar>
struct StageCache {
  Mat<Scalar> cols;        // im2col of the stage input
  Mat<Scalar> activation;  // post-ReLU output before pooling
  Eigen::ArrayXi argmax;   // pooled cell -> source spatial index, per channel
  int in_h = 0, in_w = 0, in_c = 0;
};

template <typename Scalar>
struct TrunkCache {
  std::vector<StageCache<Scalar>> stages;
};

/// Registers trunk weights under `prefix` and returns the index of the first one.
template <typename Scalar>
std::size_t add_trunk_params(ParameterSet<Scalar>& params, const std::string& prefix, const TrunkSpec& spec,
                             std::mt19937_64& rng) {
  std::size_t first = params.size();
  int c_in = spec.in_channels;
  for (std::size_t s = 0; s < spec.widths.size(); ++s) {
    const int c_out = spec.widths[s];
    const double stddev = std::sqrt(2.0 / (9.0 * c_in));
    std::normal_distribution<double> normal(0.0, stddev);
    Mat<Scalar> w(c_out, c_in * 9);
    for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = static_cast<Scalar>(normal(rng));
    params.add(prefix + ".conv" + std::to_string(s) + ".weight", std::move(w));
    params.add(prefix + ".conv" + std::to_string(s) + ".bias", Mat<Scalar>::Zero(c_out, 1));
    c_in = c_out;
  }
  return first;
}

template <typename Scalar>
Planes<Scalar> normalize_input(const Image& image) {
  Planes<Scalar> x;
  x.height = image.height;
  x.width = image.width;
  x.data = ((image.data.array() - 0.5f) * 4.0f).matrix().template cast<Scalar>();
  return x;
}

template <typename Scalar>
FeatureStack<Scalar> trunk_forward(const ParameterSet<Scalar>& params, std::size_t first, const TrunkSpec& spec,
                                   const Image& image, TrunkCache<Scalar>* cache) {
  if (image.channels() != spec.in_channels) throw InputError("trunk: unexpected channel count");
  if (image.height % spec.downsample() != 0 || image.width % spec.downsample() != 0)
    throw InputError("trunk: input size must be divisible by the downsampling factor");
  Planes<Scalar> x = normalize_input<Scalar>(image);
  if (cache) cache->stages.assign(spec.widths.size(), {});
  Mat<Scalar> cols_local;
  for (std::size_t s = 0; s < spec.widths.size(); ++s) {
    const auto& w = params[first + 2 * s];
    const auto& b = params[first + 2 * s + 1];
    Mat<Scalar>& cols = cache ? cache->stages[s].cols : cols_local;
    im2col3x3(x, cols);
    Planes<Scalar> a;
    a.height = x.height;
    a.width = x.width;
    a.data.noalias() = w * cols;
    a.data.colwise() += b.col(0);
    a.data = a.data.cwiseMax(Scalar(0));
    if (cache) {
      auto& sc = cache->stages[s];
      sc.in_h = x.height;
      sc.in_w = x.width;
      sc.in_c = x.channels();
      sc.activation = a.data;
    }
    if (static_cast<int>(s) < spec.pooled_stages) {
      const int ph = a.height / 2;
      const int pw = a.width / 2;
      Planes<Scalar> p(a.channels(), ph, pw);
      Eigen::ArrayXi arg;
      if (cache) arg.resize(a.channels() * ph * pw);
      for (int c = 0; c < a.channels(); ++c)
        for (int r = 0; r < ph; ++r)
          for (int q = 0; q < pw; ++q) {
            int best = (2 * r) * a.width + 2 * q;
            for (int dy = 0; dy < 2; ++dy)
              for (int dx = 0; dx < 2; ++dx) {
                const int idx = (2 * r + dy) * a.width + 2 * q + dx;
                if (a.data(c, idx) > a.data(c, best)) best = idx;
              }
            p.data(c, r * pw + q) = a.data(c, best);
            if (cache) arg(c * ph * pw + r * pw + q) = best;
          }
      if (cache) cache->stages[s].argmax = std::move(arg);
      x = std::move(p);
    } else {
      x = std::move(a);
    }
  }
  return x;
}

/// Accumulates trunk weight gradients into `grads` given dL/d(features).
template <typename Scalar>
void trunk_backward(const ParameterSet<Scalar>& params, std::size_t first, const TrunkSpec& spec,
                    const TrunkCache<Scalar>& cache, Planes<Scalar> dout, ParameterSet<Scalar>& grads) {
  for (int s = static_cast<int>(spec.widths.size()) - 1; s >= 0; --s) {
    const auto& sc = cache.stages[s];
    const int c_out = spec.widths[s];
    Mat<Scalar> da;
    if (s < spec.pooled_stages) {
      da = Mat<Scalar>::Zero(c_out, sc.in_h * sc.in_w);
      const int pp = dout.pixels();
      for (int c = 0; c < c_out; ++c)
        for (int i = 0; i < pp; ++i) da(c, sc.argmax(c * pp + i)) += dout.data(c, i);
    } else {
      da = std::move(dout.data);
    }
    da = (sc.activation.array() > Scalar(0)).select(da, Scalar(0));
    grads[first + 2 * s].noalias() += da * sc.cols.transpose();
    grads[first + 2 * s + 1].col(0) += da.rowwise().sum();
    if (s == 0) break;
    const Mat<Scalar> dcols = params[first + 2 * s].transpose() * da;
    dout = Planes<Scalar>(sc.in_c, sc.in_h, sc.in_w);
    col2im3x3(dcols, dout);
  }
}

}  // namespace nn

/// SGD with momentum and L2 weight decay, torch-style:
/// v <- m v + (g + wd p);  p <- p - lr v.
template <typename Scalar>
class Sgd {
 public:
  Sgd() = default;
  Sgd(const ParameterSet<Scalar>& like, double momentum, double weight_decay)
      : velocity_(like.zeros_like()), momentum_(momentum), weight_decay_(weight_decay) {}

  void step(ParameterSet<Scalar>& params, const ParameterSet<Scalar>& grads, double lr) {
    params.require_same_layout(grads, "Sgd::step");
    const Scalar m = static_cast<Scalar>(momentum_);
    const Scalar wd = static_cast<Scalar>(weight_decay_);
    const Scalar eta = static_cast<Scalar>(lr);
    for (std::size_t i = 0; i < params.size(); ++i) {
      velocity_[i] = m * velocity_[i] + grads[i] + wd * params[i];
      params[i] -= eta * velocity_[i];
    }
  }

  ParameterSet<Scalar>& velocity() { return velocity_; }
  const ParameterSet<Scalar>& velocity() const { return velocity_; }

 private:
  ParameterSet<Scalar> velocity_;
  double momentum_ = 0.9;
  double weight_decay_ = 1e-5;
};

}  // namespace wsol

#endif  // WSOL_NN_HPP_

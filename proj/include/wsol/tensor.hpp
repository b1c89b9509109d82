#ifndef WSOL_TENSOR_HPP_
#define WSOL_TENSOR_HPP_

#include <Eigen/Dense>

#include <cassert>

namespace wsol {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// A stack of equally sized 2-D planes. Storage is channels x (height*width)
/// with the spatial index laid out row-major (index = row * width + col), so
/// a 3x3 convolution becomes one GEMM against an im2col matrix.
template <typename Scalar>
struct Planes {
  int height = 0;
  int width = 0;
  Mat<Scalar> data;

  Planes() = default;
  Planes(int channels, int h, int w) : height(h), width(w), data(Mat<Scalar>::Zero(channels, h * w)) {}

  int channels() const { return static_cast<int>(data.rows()); }
  int pixels() const { return height * width; }

  Scalar& at(int c, int row, int col) { return data(c, row * width + col); }
  Scalar at(int c, int row, int col) const { return data(c, row * width + col); }

  template <typename Other>
  Planes<Other> cast() const {
    Planes<Other> out;
    out.height = height;
    out.width = width;
    out.data = data.template cast<Other>();
    return out;
  }

  friend bool operator==(const Planes& a, const Planes& b) {
    return a.height == b.height && a.width == b.width && a.data.rows() == b.data.rows() &&
           a.data == b.data;
  }
};

/// Raw RGB image, three planes with pixel values in [0,1]. Model input
/// normalization happens inside the networks, never on the stored image.
using Image = Planes<float>;

/// Channel-first feature grid produced by a convolutional trunk.
template <typename Scalar>
using FeatureStack = Planes<Scalar>;

/// Single-channel spatial grid (height x width).
template <typename Scalar>
using AttentionMap = Mat<Scalar>;

using BinaryMask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

}  // namespace wsol

#endif  // WSOL_TENSOR_HPP_

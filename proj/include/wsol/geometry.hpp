#ifndef WSOL_GEOMETRY_HPP_
#define WSOL_GEOMETRY_HPP_

#include <Eigen/Core>

#include <algorithm>
#include <ostream>
#include <sstream>
#include <string>

#include "wsol/error.hpp"

namespace wsol {

/// Axis-aligned rectangle in normalized image coordinates. Origin is the
/// top-left corner, x grows rightward, y downward; the full image is
/// (0, 0, 1, 1).
template <typename Scalar>
struct BoxT {
  Scalar x_min = 0;
  Scalar y_min = 0;
  Scalar x_max = 0;
  Scalar y_max = 0;

  constexpr BoxT() = default;
  constexpr BoxT(Scalar x0, Scalar y0, Scalar x1, Scalar y1) : x_min(x0), y_min(y0), x_max(x1), y_max(y1) {}

  static constexpr BoxT full() { return BoxT(0, 0, 1, 1); }

  bool valid() const { return x_min <= x_max && y_min <= y_max; }
  Scalar width() const { return x_max - x_min; }
  Scalar height() const { return y_max - y_min; }

  Eigen::Matrix<Scalar, 4, 1> vec() const { return {x_min, y_min, x_max, y_max}; }
  template <typename Derived>
  static BoxT from_vec(const Eigen::MatrixBase<Derived>& v) {
    return BoxT(static_cast<Scalar>(v(0)), static_cast<Scalar>(v(1)), static_cast<Scalar>(v(2)),
                static_cast<Scalar>(v(3)));
  }

  template <typename Other>
  BoxT<Other> cast() const {
    return BoxT<Other>(static_cast<Other>(x_min), static_cast<Other>(y_min), static_cast<Other>(x_max),
                       static_cast<Other>(y_max));
  }

  bool contains(const BoxT& inner) const {
    return x_min <= inner.x_min && y_min <= inner.y_min && x_max >= inner.x_max && y_max >= inner.y_max;
  }

  friend bool operator==(const BoxT& a, const BoxT& b) {
    return a.x_min == b.x_min && a.y_min == b.y_min && a.x_max == b.x_max && a.y_max == b.y_max;
  }
};

using Box = BoxT<double>;

template <typename Scalar>
std::ostream& operator<<(std::ostream& os, const BoxT<Scalar>& b) {
  return os << '(' << b.x_min << ", " << b.y_min << ", " << b.x_max << ", " << b.y_max << ')';
}

namespace detail {
template <typename Scalar>
void require_valid(const BoxT<Scalar>& b, const char* what) {
  if (!b.valid()) {
    std::ostringstream msg;
    msg << what << ": invalid box " << b << " (min > max)";
    throw InputError(msg.str());
  }
}
}  // namespace detail

template <typename Scalar>
Scalar area(const BoxT<Scalar>& a) {
  return std::max<Scalar>(a.width(), 0) * std::max<Scalar>(a.height(), 0);
}

/// Intersection over union with continuous-area semantics: boxes that only
/// share an edge have IoU 0, and a zero-area union yields 0.
template <typename Scalar>
Scalar iou(const BoxT<Scalar>& a, const BoxT<Scalar>& b) {
  detail::require_valid(a, "iou");
  detail::require_valid(b, "iou");
  const Scalar iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const Scalar ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  const Scalar inter = (iw > 0 && ih > 0) ? iw * ih : Scalar(0);
  // Ordered sum keeps iou(a, b) == iou(b, a) bitwise under FMA contraction.
  const Scalar aa = area(a), ab = area(b);
  const Scalar uni = std::max(aa, ab) + std::min(aa, ab) - inter;
  if (uni <= 0) return Scalar(0);
  return std::clamp<Scalar>(inter / uni, 0, 1);
}

/// Smallest box containing both inputs.
template <typename Scalar>
BoxT<Scalar> union_box(const BoxT<Scalar>& a, const BoxT<Scalar>& b) {
  detail::require_valid(a, "union_box");
  detail::require_valid(b, "union_box");
  return BoxT<Scalar>(std::min(a.x_min, b.x_min), std::min(a.y_min, b.y_min), std::max(a.x_max, b.x_max),
                      std::max(a.y_max, b.y_max));
}

template <typename Scalar>
struct ClipResult {
  BoxT<Scalar> box;
  bool degenerate = false;  // zero or negative extent after clamping
};

template <typename Scalar>
ClipResult<Scalar> clip(const BoxT<Scalar>& a) {
  auto c = [](Scalar v) { return std::clamp<Scalar>(v, 0, 1); };
  ClipResult<Scalar> out;
  out.box = BoxT<Scalar>(c(a.x_min), c(a.y_min), c(a.x_max), c(a.y_max));
  out.degenerate = !(out.box.x_max > out.box.x_min && out.box.y_max > out.box.y_min);
  return out;
}

/// "x_min,y_min,x_max,y_max" with fixed decimals.
template <typename Scalar>
std::string format_box(const BoxT<Scalar>& b, int decimals = 6) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(decimals);
  os << b.x_min << ',' << b.y_min << ',' << b.x_max << ',' << b.y_max;
  return os.str();
}

}  // namespace wsol

#endif  // WSOL_GEOMETRY_HPP_

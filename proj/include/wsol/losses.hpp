#ifndef WSOL_LOSSES_HPP_
#define WSOL_LOSSES_HPP_

#include <algorithm>
#include <cmath>
#include <span>
#include <string>

#include "wsol/error.hpp"
#include "wsol/tensor.hpp"

// Batches are row-per-sample matrices: probability batches are N x C, box
// batches are N x 4 in (x_min, y_min, x_max, y_max) order.

namespace wsol {

struct LossValue {
  double value = 0.0;
  int batch_size = 0;
  int retained_count = 0;  // consistency loss only
};

inline constexpr double kProbFloor = 1e-12;

namespace detail {
inline void require_batch(Eigen::Index n, const char* what) {
  if (n < 1) throw InputError(std::string(what) + ": empty batch");
}
template <typename A, typename B>
void require_same_shape(const A& a, const B& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw InputError(std::string(what) + ": batch shape mismatch");
}
inline void require_labels(std::span<const int> labels, Eigen::Index n, Eigen::Index classes, const char* what) {
  if (static_cast<Eigen::Index>(labels.size()) != n) throw InputError(std::string(what) + ": label count mismatch");
  for (int y : labels)
    if (y < 0 || y >= classes) throw InputError(std::string(what) + ": class label out of range");
}
}  // namespace detail

/// Average of the raw-image and masked-image cross entropies:
/// -(1/2N) sum_i [log p_raw[i, y_i] + log p_masked[i, y_i]].
template <typename Scalar>
LossValue cls_loss(const Mat<Scalar>& p_raw, const Mat<Scalar>& p_masked, std::span<const int> labels) {
  detail::require_batch(p_raw.rows(), "cls_loss");
  detail::require_same_shape(p_raw, p_masked, "cls_loss");
  detail::require_labels(labels, p_raw.rows(), p_raw.cols(), "cls_loss");
  const auto n = p_raw.rows();
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    sum += std::log(std::max<double>(p_raw(i, labels[i]), kProbFloor));
    sum += std::log(std::max<double>(p_masked(i, labels[i]), kProbFloor));
  }
  return {-sum / (2.0 * static_cast<double>(n)), static_cast<int>(n), 0};
}

/// dL_cls / d(logits) for one stream when the probabilities come from a
/// softmax: (p - onehot) / (2N). Apply to the raw and the masked stream.
template <typename Scalar>
Mat<Scalar> cls_loss_logit_grad(const Mat<Scalar>& probs, std::span<const int> labels) {
  detail::require_batch(probs.rows(), "cls_loss_logit_grad");
  detail::require_labels(labels, probs.rows(), probs.cols(), "cls_loss_logit_grad");
  Mat<Scalar> g = probs;
  for (Eigen::Index i = 0; i < g.rows(); ++i) g(i, labels[i]) -= Scalar(1);
  return g / static_cast<Scalar>(2 * probs.rows());
}

/// (1/N) sum_i ||pred_i - target_i||^2.
template <typename Scalar>
LossValue reg_loss(const Mat<Scalar>& pred, const Mat<Scalar>& target) {
  detail::require_batch(pred.rows(), "reg_loss");
  detail::require_same_shape(pred, target, "reg_loss");
  const double v = static_cast<double>((pred - target).squaredNorm()) / static_cast<double>(pred.rows());
  return {v, static_cast<int>(pred.rows()), 0};
}

template <typename Scalar>
Mat<Scalar> reg_loss_grad(const Mat<Scalar>& pred, const Mat<Scalar>& target) {
  detail::require_batch(pred.rows(), "reg_loss_grad");
  detail::require_same_shape(pred, target, "reg_loss_grad");
  return (pred - target) * (Scalar(2) / static_cast<Scalar>(pred.rows()));
}

/// L_cls + alpha * L_reg. Its gradient is the matching combination of the
/// per-term gradients, see the helpers above.
inline LossValue init_loss(const LossValue& cls, const LossValue& reg, double alpha) {
  if (!(alpha >= 0.0)) throw InputError("init_loss: alpha must be non-negative");
  return {cls.value + alpha * reg.value, std::max(cls.batch_size, reg.batch_size), 0};
}

/// Indicator of confidence_i > tau.
template <typename Scalar>
Eigen::Array<bool, Eigen::Dynamic, 1> retained_mask(const Vec<Scalar>& confidences, double tau) {
  return confidences.array().template cast<double>() > tau;
}

/// (1/N) sum_i 1(conf_i > tau) ||pred_i - target_i||^2. The divisor is the
/// full batch size, not the retained count. Targets are constants.
template <typename Scalar>
LossValue refine_loss(const Mat<Scalar>& pred, const Mat<Scalar>& target, const Vec<Scalar>& confidences,
                      double tau) {
  detail::require_batch(pred.rows(), "refine_loss");
  detail::require_same_shape(pred, target, "refine_loss");
  if (confidences.size() != pred.rows()) throw InputError("refine_loss: confidence count mismatch");
  if (!(tau >= 0.0 && tau <= 1.0)) throw InputError("refine_loss: tau must lie in [0,1]");
  const auto keep = retained_mask(confidences, tau);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < pred.rows(); ++i)
    if (keep(i)) sum += static_cast<double>((pred.row(i) - target.row(i)).squaredNorm());
  return {sum / static_cast<double>(pred.rows()), static_cast<int>(pred.rows()), static_cast<int>(keep.count())};
}

template <typename Scalar>
Mat<Scalar> refine_loss_grad(const Mat<Scalar>& pred, const Mat<Scalar>& target, const Vec<Scalar>& confidences,
                             double tau) {
  detail::require_batch(pred.rows(), "refine_loss_grad");
  detail::require_same_shape(pred, target, "refine_loss_grad");
  if (confidences.size() != pred.rows()) throw InputError("refine_loss_grad: confidence count mismatch");
  const auto keep = retained_mask(confidences, tau);
  Mat<Scalar> g = (pred - target) * (Scalar(2) / static_cast<Scalar>(pred.rows()));
  for (Eigen::Index i = 0; i < g.rows(); ++i)
    if (!keep(i)) g.row(i).setZero();
  return g;
}

}  // namespace wsol

#endif  // WSOL_LOSSES_HPP_

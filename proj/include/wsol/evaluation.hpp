#ifndef WSOL_EVALUATION_HPP_
#define WSOL_EVALUATION_HPP_

#include <iosfwd>
#include <string>
#include <vector>

#include "wsol/geometry.hpp"
#include "wsol/tensor.hpp"

namespace wsol {

inline constexpr double kGtKnownIou = 0.5;  // inclusive

struct EvalRecord {
  std::string image_id;
  Box predicted;
  Vec<double> pred_dist;
  std::vector<Box> gt_boxes;
  int gt_label = 0;
};

struct MetricsReport {
  double gt_known_acc = 0.0;
  double top1_loc_acc = 0.0;
  double top5_loc_acc = 0.0;
  double top1_cls_acc = 0.0;
  double top5_cls_acc = 0.0;
  int n_images = 0;

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

/// Best IoU against any ground-truth box. Throws on an empty list.
double best_iou(const Box& pred, const std::vector<Box>& gt_boxes);

/// True when the prediction overlaps any ground-truth box with IoU >= 0.5.
bool gt_known_correct(const Box& pred, const std::vector<Box>& gt_boxes);

/// True when gt_label is among the k most probable classes; ties go to the
/// lower class index.
bool topk_correct(const Vec<double>& pred_dist, int gt_label, int k);

/// Aggregates GT-Known, Top-1/5 localization and Top-1/5 classification
/// accuracy. k is clamped to the class count for Top-5 when fewer than five
/// classes exist.
MetricsReport evaluate(const std::vector<EvalRecord>& records);

/// "metric,value,n_images" lines with values to 4 decimals.
void write_report(std::ostream& os, const MetricsReport& report);
/// Per-image debug lines: image_id,pred box,best_iou,gt_known,top1,top5
void write_per_image(std::ostream& os, const std::vector<EvalRecord>& records);

}  // namespace wsol

#endif  // WSOL_EVALUATION_HPP_

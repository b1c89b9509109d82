#include "wsol/evaluation.hpp"

#include <algorithm>
#include <ostream>

#include "wsol/error.hpp"

namespace wsol {

double best_iou(const Box& pred, const std::vector<Box>& gt_boxes) {
  if (gt_boxes.empty()) throw InputError("gt_known_correct: empty ground-truth list");
  double best = 0.0;
  for (const auto& g : gt_boxes) best = std::max(best, iou(pred, g));
  return best;
}

bool gt_known_correct(const Box& pred, const std::vector<Box>& gt_boxes) {
  return best_iou(pred, gt_boxes) >= kGtKnownIou;
}

bool topk_correct(const Vec<double>& pred_dist, int gt_label, int k) {
  if (k < 1) throw InputError("topk_correct: k must be >= 1");
  if (k > pred_dist.size()) throw InputError("topk_correct: k exceeds the class count");
  if (gt_label < 0 || gt_label >= pred_dist.size()) throw InputError("topk_correct: label out of range");
  // Rank of gt_label = classes that beat it, where equal probability with a
  // lower index also beats it.
  const double p = pred_dist(gt_label);
  int ahead = 0;
  for (int c = 0; c < pred_dist.size(); ++c)
    if (pred_dist(c) > p || (pred_dist(c) == p && c < gt_label)) ++ahead;
  return ahead < k;
}

MetricsReport evaluate(const std::vector<EvalRecord>& records) {
  if (records.empty()) throw InputError("evaluate: no records");
  MetricsReport r;
  long known = 0, loc1 = 0, loc5 = 0, cls1 = 0, cls5 = 0;
  for (const auto& rec : records) {
    const bool ok = gt_known_correct(rec.predicted, rec.gt_boxes);
    const int k5 = std::min<int>(5, static_cast<int>(rec.pred_dist.size()));
    const bool t1 = topk_correct(rec.pred_dist, rec.gt_label, 1);
    const bool t5 = topk_correct(rec.pred_dist, rec.gt_label, k5);
    known += ok;
    cls1 += t1;
    cls5 += t5;
    loc1 += ok && t1;
    loc5 += ok && t5;
  }
  const double n = static_cast<double>(records.size());
  r.gt_known_acc = known / n;
  r.top1_loc_acc = loc1 / n;
  r.top5_loc_acc = loc5 / n;
  r.top1_cls_acc = cls1 / n;
  r.top5_cls_acc = cls5 / n;
  r.n_images = static_cast<int>(records.size());
  return r;
}

void write_report(std::ostream& os, const MetricsReport& report) {
  const auto flags = os.flags();
  const auto prec = os.precision();
  os.setf(std::ios::fixed);
  os.precision(4);
  os << "metric,value,n_images\n";
  os << "gt_known_acc," << report.gt_known_acc << ',' << report.n_images << '\n';
  os << "top1_loc_acc," << report.top1_loc_acc << ',' << report.n_images << '\n';
  os << "top5_loc_acc," << report.top5_loc_acc << ',' << report.n_images << '\n';
  os << "top1_cls_acc," << report.top1_cls_acc << ',' << report.n_images << '\n';
  os << "top5_cls_acc," << report.top5_cls_acc << ',' << report.n_images << '\n';
  os.flags(flags);
  os.precision(prec);
}

void write_per_image(std::ostream& os, const std::vector<EvalRecord>& records) {
  for (const auto& rec : records) {
    const double b = best_iou(rec.predicted, rec.gt_boxes);
    const int k5 = std::min<int>(5, static_cast<int>(rec.pred_dist.size()));
    os << rec.image_id << ',' << format_box(rec.predicted) << ',' << b << ',' << int(b >= kGtKnownIou) << ','
       << int(topk_correct(rec.pred_dist, rec.gt_label, 1)) << ','
       << int(topk_correct(rec.pred_dist, rec.gt_label, k5)) << '\n';
  }
}

}  // namespace wsol

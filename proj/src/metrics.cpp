#include "statfuse/metrics.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>

namespace statfuse {

EvalReport report_from_confusion(ConfusionMatrix confusion,
                                 const ClassSet& classes) {
  const int kk = classes.count;
  EvalReport report;
  report.per_class_iou.assign(kk, 0.0);
  report.per_class_precision.assign(kk, 0.0);
  report.iou_valid.assign(kk, false);
  report.precision_valid.assign(kk, false);
  report.element_count = confusion.total();

  double iou_sum = 0.0, prec_sum = 0.0;
  int iou_n = 0, prec_n = 0;
  for (int k = 0; k < kk; ++k) {
    if (classes.ignore_index && k == *classes.ignore_index) continue;
    const std::int64_t tp = confusion.at(k, k);
    const std::int64_t pred = confusion.row_sum(k);
    const std::int64_t gt = confusion.column_sum(k);
    const std::int64_t uni = pred + gt - tp;
    if (uni > 0) {
      report.per_class_iou[k] = static_cast<double>(tp) / uni;
      report.iou_valid[k] = true;
      iou_sum += report.per_class_iou[k];
      ++iou_n;
    }
    if (pred > 0) {
      report.per_class_precision[k] = static_cast<double>(tp) / pred;
      report.precision_valid[k] = true;
      prec_sum += report.per_class_precision[k];
      ++prec_n;
    }
  }
  report.mean_iou = iou_n > 0 ? iou_sum / iou_n : 0.0;
  report.mean_precision = prec_n > 0 ? prec_sum / prec_n : 0.0;
  report.eval_confusion = std::move(confusion);
  return report;
}

EvalReport evaluate(const LabelMap& pred, const LabelMap& gt,
                    const ClassSet& classes) {
  return evaluate_batch({&pred, 1}, {&gt, 1}, classes);
}

EvalReport evaluate_batch(std::span<const LabelMap> preds,
                          std::span<const LabelMap> gts,
                          const ClassSet& classes) {
  if (preds.size() != gts.size())
    throw std::invalid_argument("evaluate_batch: list length mismatch");
  ConfusionMatrix confusion(classes.count);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i].height() != gts[i].height() ||
        preds[i].width() != gts[i].width())
      throw std::invalid_argument("evaluate_batch: shape mismatch at pair " +
                                  std::to_string(i));
    const auto p = preds[i].raw();
    const auto g = gts[i].raw();
    for (std::size_t n = 0; n < p.size(); ++n) {
      if (classes.ignore_index && g[n] == *classes.ignore_index) continue;
      if (p[n] >= classes.count || g[n] >= classes.count)
        throw std::invalid_argument("evaluate_batch: label out of range");
      ++confusion.at(p[n], g[n]);
    }
  }
  return report_from_confusion(std::move(confusion), classes);
}

BenchResult bench_inference(const std::function<void()>& run_once, int trials) {
  if (trials < 2)
    throw std::invalid_argument("bench_inference: need at least 2 trials");
  std::vector<double> ms(trials);
  for (int t = 0; t < trials; ++t) {
    const auto start = std::chrono::steady_clock::now();
    run_once();
    const auto stop = std::chrono::steady_clock::now();
    ms[t] = std::chrono::duration<double, std::milli>(stop - start).count();
  }
  double mean = 0.0;
  for (double v : ms) mean += v;
  mean /= trials;
  double var = 0.0;
  for (double v : ms) var += (v - mean) * (v - mean);
  var /= (trials - 1);
  return {mean, std::sqrt(var)};
}

void write_report_text(std::ostream& os, const EvalReport& report,
                       const ClassSet& classes) {
  std::size_t name_width = 5;
  for (const auto& n : classes.names) name_width = std::max(name_width, n.size());
  os << std::left << std::setw(static_cast<int>(name_width) + 2) << "class"
     << std::right << std::setw(10) << "IoU" << std::setw(12) << "precision"
     << "\n";
  os << std::fixed << std::setprecision(4);
  for (int k = 0; k < classes.count; ++k) {
    if (classes.ignore_index && k == *classes.ignore_index) continue;
    os << std::left << std::setw(static_cast<int>(name_width) + 2)
       << classes.names[k] << std::right;
    if (report.iou_valid[k])
      os << std::setw(10) << report.per_class_iou[k];
    else
      os << std::setw(10) << "-";
    if (report.precision_valid[k])
      os << std::setw(12) << report.per_class_precision[k];
    else
      os << std::setw(12) << "-";
    os << "\n";
  }
  os << std::left << std::setw(static_cast<int>(name_width) + 2) << "mean"
     << std::right << std::setw(10) << report.mean_iou << std::setw(12)
     << report.mean_precision << "\n";
  os << "elements evaluated: " << report.element_count << "\n";
}

void write_report_tsv(std::ostream& os, const EvalReport& report,
                      const ClassSet& classes) {
  os << std::setprecision(17);
  for (int k = 0; k < classes.count; ++k) {
    if (classes.ignore_index && k == *classes.ignore_index) continue;
    if (report.iou_valid[k])
      os << classes.names[k] << "\tiou\t" << report.per_class_iou[k] << "\n";
    if (report.precision_valid[k])
      os << classes.names[k] << "\tprecision\t" << report.per_class_precision[k]
         << "\n";
  }
  os << "mean\tiou\t" << report.mean_iou << "\n";
  os << "mean\tprecision\t" << report.mean_precision << "\n";
  os << "all\telements\t" << report.element_count << "\n";
}

}  // namespace statfuse

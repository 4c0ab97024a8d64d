#pragma once

#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "statfuse/core.hpp"

namespace statfuse {

struct EvalReport {
  std::vector<double> per_class_iou;
  std::vector<double> per_class_precision;
  std::vector<bool> iou_valid;        // class has gt or prediction mass
  std::vector<bool> precision_valid;  // class has prediction mass
  double mean_iou = 0.0;
  double mean_precision = 0.0;
  ConfusionMatrix eval_confusion;
  std::int64_t element_count = 0;
};

/// Per-class IoU and precision from a pred/gt pair; ignore_index skipped.
EvalReport evaluate(const LabelMap& pred, const LabelMap& gt,
                    const ClassSet& classes);

/// Dataset-level report: counts are summed over all pairs before ratios.
EvalReport evaluate_batch(std::span<const LabelMap> preds,
                          std::span<const LabelMap> gts,
                          const ClassSet& classes);

/// Report from an already accumulated evaluation confusion matrix.
EvalReport report_from_confusion(ConfusionMatrix confusion,
                                 const ClassSet& classes);

struct BenchResult {
  double mean_ms = 0.0;
  double stddev_ms = 0.0;
};

/// Wall-clock statistics of `run_once` over `trials` repetitions.
/// The callable must hold its inputs in memory already.
BenchResult bench_inference(const std::function<void()>& run_once, int trials);

/// Aligned human-readable table, one class per row.
void write_report_text(std::ostream& os, const EvalReport& report,
                       const ClassSet& classes);

/// Machine-readable lines: class_name<TAB>metric<TAB>value.
void write_report_tsv(std::ostream& os, const EvalReport& report,
                      const ClassSet& classes);

}  // namespace statfuse

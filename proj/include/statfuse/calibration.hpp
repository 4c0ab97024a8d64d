#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "statfuse/core.hpp"

namespace statfuse {

/// Mergeable per-class sums of log score vectors over a dev set.
struct SuffStats {
  explicit SuffStats(int classes);
  SuffStats() = default;

  int classes = 0;
  std::vector<std::vector<double>> sum_log;  // sum_log[k][j]
  std::vector<std::int64_t> counts;          // n_k
  std::vector<double> total_sum_log;
  std::int64_t total_count = 0;

  void merge(const SuffStats& other);

  /// Mean log vector for class k, or nullopt when n_k == 0.
  std::optional<std::vector<double>> class_mean(int k) const;
};

struct RegularizationConfig {
  double beta = 0.0;   // in [0, 1)
  double delta = 0.0;  // >= 0
  int max_iterations = 1000;
  double loss_tolerance = 1e-8;
};

struct FitResult {
  std::vector<double> alpha;
  bool converged = false;
  int iterations = 0;
};

/// Optional per-image random element subsample for suff-stat accumulation.
struct Subsample {
  double rate = 1.0;
  std::uint64_t seed = 0;
};

/// Adds pred/gt pairs to a confusion matrix, skipping ignore_index elements.
void accumulate_confusion(const LabelMap& pred, const LabelMap& gt,
                          const ClassSet& classes, ConfusionMatrix& m);

/// Adds clipped log scores per ground-truth class to the accumulator.
void accumulate_suffstats(const ScoreMap& scores, const LabelMap& gt,
                          const ClassSet& classes, SuffStats& acc,
                          std::optional<Subsample> subsample = std::nullopt);

struct ComplementStats {
  std::vector<double> mean_log;  // s-bar
  std::int64_t count = 0;        // N-bar
};

/// Mean log statistic over all elements whose ground truth differs from k.
/// Throws std::domain_error when no such elements exist.
ComplementStats complement_stats(const SuffStats& acc, int k);

/// Dirichlet MLE by Minka's fixed point on the mean-log statistic s.
FitResult fit_dirichlet_mle(std::span<const double> s, std::int64_t n,
                            int max_iter = 1000, double tol = 1e-8);

/// The regularized fitting objective (per-sample, constant N omitted).
double regularized_loss(std::span<const double> alpha,
                        std::span<const double> s,
                        std::span<const double> s_bar,
                        const RegularizationConfig& cfg);

/// Maximizes regularized_loss by gradient ascent in log(alpha) with
/// backtracking line search; initialized from the unregularized MLE
/// unless `init` is given. The accepted-iterate loss never decreases.
FitResult fit_dirichlet_regularized(
    std::span<const double> s, std::span<const double> s_bar,
    const RegularizationConfig& cfg,
    std::optional<std::vector<double>> init = std::nullopt);

/// Fits one expert's per-class Dirichlet model from its suff stats.
/// Classes absent from the dev set get all-ones parameters and are listed
/// in fallback_classes; an empty complement forces beta = 0 for that class.
DirichletModel fit_expert_dirichlet(const SuffStats& stats,
                                    const RegularizationConfig& cfg);

struct GridPoint {
  double beta = 0.0;
  double delta = 0.0;
  double mean_iou = 0.0;
  int mle_fallbacks = 0;  // classes where the regularized fit failed
};

struct GridSearchResult {
  double beta = 0.0;
  double delta = 0.0;
  std::vector<GridPoint> table;  // beta-major scan order
};

/// Fits Dirichlet models and evaluates dev mean IoU for every (beta, delta)
/// pair; returns the maximizer (ties go to the first pair in scan order).
/// dev_experts is indexed [expert][image], aligned with dev_gt.
GridSearchResult grid_search(
    const std::vector<std::vector<ScoreMap>>& dev_experts,
    const std::vector<LabelMap>& dev_gt, FusionModel model,
    std::span<const double> beta_grid, std::span<const double> delta_grid,
    std::optional<Subsample> subsample = std::nullopt);

}  // namespace statfuse

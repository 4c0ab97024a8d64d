#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "statfuse/core.hpp"

namespace statfuse {

/// Monte-Carlo score draws from one expert; T >= 2 so variance is defined.
struct SampleStack {
  std::string expert_id;
  std::vector<ScoreMap> samples;

  void validate() const;
};

/// Dense per-element K-vectors of fused scores or log-posteriors.
struct DenseScores {
  int height = 0, width = 0, classes = 0;
  std::vector<double> values;  // [y][x][k]

  DenseScores() = default;
  DenseScores(int h, int w, int k)
      : height(h), width(w), classes(k),
        values(static_cast<std::size_t>(h) * w * k, 0.0) {}
  double& at(int y, int x, int k) {
    return values[(static_cast<std::size_t>(y) * width + x) * classes + k];
  }
  double at(int y, int x, int k) const {
    return values[(static_cast<std::size_t>(y) * width + x) * classes + k];
  }
};

struct FusedResult {
  LabelMap labels;
  std::optional<DenseScores> scores;
};

struct FusionOptions {
  double smoothing = 1.0;    // add-c confusion smoothing at fusion time
  bool keep_scores = false;  // retain per-element score grids
};

/// Bayes categorical fusion of hard expert outputs via confusion-matrix
/// conditionals and the class prior. `expert_ids` align with `expert_labels`
/// and must all be present in the model.
FusedResult fuse_bayes(std::span<const std::string> expert_ids,
                       std::span<const LabelMap> expert_labels,
                       const FusionModel& model, const FusionOptions& opts = {});

/// Dirichlet fusion of full score vectors. Every expert needs fitted
/// concentration parameters in the model.
FusedResult fuse_dirichlet(std::span<const std::string> expert_ids,
                           std::span<const ScoreMap> expert_scores,
                           const FusionModel& model,
                           const FusionOptions& opts = {});

/// Arithmetic mean of score vectors; needs no calibrated model.
FusedResult fuse_average(std::span<const ScoreMap> expert_scores,
                         bool keep_scores = false);

/// Certainty-weighted averaging: per element, each expert's mean score
/// vector is weighted by the reciprocal mean per-class sample variance.
/// Elements where every expert has zero variance fall back to the
/// unweighted mean; a strict subset with zero variance dominates the sum.
FusedResult fuse_variance(std::span<const SampleStack> stacks,
                          bool keep_scores = false);

}  // namespace statfuse

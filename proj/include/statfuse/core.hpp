#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace statfuse {

/// Class inventory shared by every map, matrix and model.
struct ClassSet {
  int count = 0;
  std::vector<std::string> names;
  std::optional<int> ignore_index;

  static ClassSet with_default_names(int k,
                                     std::optional<int> ignore = std::nullopt);
  void validate() const;  // throws std::invalid_argument
};

/// Per-element class scores for one expert. Stored planar (class, row, col)
/// to match the on-disk tensor layout.
class ScoreMap {
 public:
  ScoreMap() = default;
  ScoreMap(int height, int width, int classes);

  int height() const { return height_; }
  int width() const { return width_; }
  int classes() const { return classes_; }
  std::int64_t pixels() const {
    return static_cast<std::int64_t>(height_) * width_;
  }

  float& at(int k, int y, int x) { return data_[plane_ * k + idx(y, x)]; }
  float at(int k, int y, int x) const { return data_[plane_ * k + idx(y, x)]; }

  /// Copies the K raw scores of one element into `out`.
  void scores_at(int y, int x, std::span<double> out) const;

  std::span<const float> raw() const { return data_; }
  std::span<float> raw() { return data_; }

 private:
  std::int64_t idx(int y, int x) const {
    return static_cast<std::int64_t>(y) * width_ + x;
  }
  int height_ = 0, width_ = 0, classes_ = 0;
  std::int64_t plane_ = 0;
  std::vector<float> data_;
};

/// Ground-truth or predicted class indices.
class LabelMap {
 public:
  LabelMap() = default;
  LabelMap(int height, int width, std::uint16_t fill = 0);

  int height() const { return height_; }
  int width() const { return width_; }
  std::int64_t pixels() const {
    return static_cast<std::int64_t>(height_) * width_;
  }

  std::uint16_t& at(int y, int x) {
    return labels_[static_cast<std::int64_t>(y) * width_ + x];
  }
  std::uint16_t at(int y, int x) const {
    return labels_[static_cast<std::int64_t>(y) * width_ + x];
  }

  std::span<const std::uint16_t> raw() const { return labels_; }
  std::span<std::uint16_t> raw() { return labels_; }

  bool operator==(const LabelMap&) const = default;

 private:
  int height_ = 0, width_ = 0;
  std::vector<std::uint16_t> labels_;
};

/// K x K count matrix, row = predicted output, column = ground truth.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(int classes);

  int classes() const { return classes_; }
  std::int64_t& at(int pred, int gt) { return counts_[pred * classes_ + gt]; }
  std::int64_t at(int pred, int gt) const {
    return counts_[pred * classes_ + gt];
  }
  std::int64_t column_sum(int gt) const;
  std::int64_t row_sum(int pred) const;
  std::int64_t total() const;

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  int classes_ = 0;
  std::vector<std::int64_t> counts_;
};

/// Log of the marginal class distribution p(k).
struct ClassPrior {
  std::vector<double> log_probs;
};

/// Per-ground-truth-class Dirichlet concentration vectors for one expert.
struct DirichletModel {
  std::vector<std::vector<double>> alphas;  // alphas[k][j], all > 0
  std::vector<int> fallback_classes;        // classes fitted as all-ones

  void validate(int classes) const;
};

/// Calibrated statistics consumed at inference time.
struct FusionModel {
  struct Expert {
    std::string id;
    ConfusionMatrix confusion;
    std::optional<DirichletModel> dirichlet;
  };

  ClassSet class_set;
  std::vector<Expert> experts;
  ClassPrior prior;
  double beta = 0.0;
  double delta = 0.0;

  const Expert* find_expert(const std::string& id) const;
  void validate() const;
};

/// Clips entries to [kProbClipMin, 1] and renormalizes to the simplex.
void clip_to_simplex(std::span<double> y);

/// log p(out | k) from a confusion matrix column with additive smoothing.
/// Throws std::domain_error when the smoothed column sum is zero.
double conditional_log_likelihood(const ConfusionMatrix& m, int out, int k,
                                  double smoothing);

/// Class prior proportional to total ground-truth occurrence across matrices.
/// Throws std::domain_error when some class never occurs.
ClassPrior prior_from_confusions(std::span<const ConfusionMatrix> ms);

/// ln pdf of Dirichlet(alpha) at y. y is expected clipped to the simplex.
double dirichlet_log_pdf(std::span<const double> y,
                         std::span<const double> alpha);

/// Argmax with ties broken toward the lowest index.
int argmax_lowest(std::span<const double> v);

/// Per-element argmax of a score map (hard expert output).
LabelMap argmax_labels(const ScoreMap& scores);

}  // namespace statfuse

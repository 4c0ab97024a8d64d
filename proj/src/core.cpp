#include "statfuse/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "statfuse/numerics.hpp"

namespace statfuse {

ClassSet ClassSet::with_default_names(int k, std::optional<int> ignore) {
  ClassSet cs;
  cs.count = k;
  cs.names.reserve(k);
  for (int i = 0; i < k; ++i) cs.names.push_back("class" + std::to_string(i));
  cs.ignore_index = ignore;
  cs.validate();
  return cs;
}

void ClassSet::validate() const {
  if (count < 2) throw std::invalid_argument("ClassSet: need at least 2 classes");
  if (static_cast<int>(names.size()) != count)
    throw std::invalid_argument("ClassSet: name count mismatch");
  std::set<std::string> unique(names.begin(), names.end());
  if (static_cast<int>(unique.size()) != count)
    throw std::invalid_argument("ClassSet: names must be unique");
  if (ignore_index && (*ignore_index < 0 || *ignore_index >= count))
    throw std::invalid_argument("ClassSet: ignore_index out of range");
}

ScoreMap::ScoreMap(int height, int width, int classes)
    : height_(height),
      width_(width),
      classes_(classes),
      plane_(static_cast<std::int64_t>(height) * width),
      data_(plane_ * classes, 0.0f) {
  if (height <= 0 || width <= 0 || classes < 2)
    throw std::invalid_argument("ScoreMap: invalid dimensions");
}

void ScoreMap::scores_at(int y, int x, std::span<double> out) const {
  const std::int64_t p = idx(y, x);
  for (int k = 0; k < classes_; ++k) out[k] = data_[plane_ * k + p];
}

LabelMap::LabelMap(int height, int width, std::uint16_t fill)
    : height_(height),
      width_(width),
      labels_(static_cast<std::int64_t>(height) * width, fill) {
  if (height <= 0 || width <= 0)
    throw std::invalid_argument("LabelMap: invalid dimensions");
}

ConfusionMatrix::ConfusionMatrix(int classes)
    : classes_(classes), counts_(static_cast<std::size_t>(classes) * classes, 0) {
  if (classes < 2) throw std::invalid_argument("ConfusionMatrix: K >= 2 required");
}

std::int64_t ConfusionMatrix::column_sum(int gt) const {
  std::int64_t s = 0;
  for (int j = 0; j < classes_; ++j) s += at(j, gt);
  return s;
}

std::int64_t ConfusionMatrix::row_sum(int pred) const {
  std::int64_t s = 0;
  for (int j = 0; j < classes_; ++j) s += at(pred, j);
  return s;
}

std::int64_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::int64_t{0});
}

void DirichletModel::validate(int classes) const {
  if (static_cast<int>(alphas.size()) != classes)
    throw std::invalid_argument("DirichletModel: class count mismatch");
  for (const auto& a : alphas) {
    if (static_cast<int>(a.size()) != classes)
      throw std::invalid_argument("DirichletModel: alpha dimension mismatch");
    for (double v : a)
      if (!(v > 0.0))
        throw std::invalid_argument("DirichletModel: alpha entries must be > 0");
  }
}

const FusionModel::Expert* FusionModel::find_expert(const std::string& id) const {
  for (const auto& e : experts)
    if (e.id == id) return &e;
  return nullptr;
}

void FusionModel::validate() const {
  class_set.validate();
  if (experts.empty())
    throw std::invalid_argument("FusionModel: at least one expert required");
  if (static_cast<int>(prior.log_probs.size()) != class_set.count)
    throw std::invalid_argument("FusionModel: prior dimension mismatch");
  for (const auto& e : experts) {
    if (e.confusion.classes() != class_set.count)
      throw std::invalid_argument("FusionModel: confusion dimension mismatch");
    if (e.dirichlet) e.dirichlet->validate(class_set.count);
  }
}

void clip_to_simplex(std::span<double> y) {
  double sum = 0.0;
  for (double& v : y) {
    v = std::clamp(v, numerics::kProbClipMin, 1.0);
    sum += v;
  }
  for (double& v : y) v /= sum;
}

double conditional_log_likelihood(const ConfusionMatrix& m, int out, int k,
                                  double smoothing) {
  if (smoothing < 0.0)
    throw std::domain_error("conditional_log_likelihood: negative smoothing");
  const double denom =
      static_cast<double>(m.column_sum(k)) + smoothing * m.classes();
  if (denom <= 0.0)
    throw std::domain_error(
        "conditional_log_likelihood: degenerate confusion column " +
        std::to_string(k));
  return std::log((static_cast<double>(m.at(out, k)) + smoothing) / denom);
}

ClassPrior prior_from_confusions(std::span<const ConfusionMatrix> ms) {
  if (ms.empty()) throw std::domain_error("prior_from_confusions: no matrices");
  const int k = ms.front().classes();
  std::vector<double> occ(k, 0.0);
  double total = 0.0;
  for (const auto& m : ms) {
    if (m.classes() != k)
      throw std::invalid_argument("prior_from_confusions: dimension mismatch");
    for (int c = 0; c < k; ++c) {
      occ[c] += static_cast<double>(m.column_sum(c));
      total += static_cast<double>(m.column_sum(c));
    }
  }
  ClassPrior prior;
  prior.log_probs.resize(k);
  for (int c = 0; c < k; ++c) {
    if (occ[c] <= 0.0)
      throw std::domain_error("prior_from_confusions: class " +
                              std::to_string(c) + " never occurs");
    prior.log_probs[c] = std::log(occ[c] / total);
  }
  return prior;
}

double dirichlet_log_pdf(std::span<const double> y,
                         std::span<const double> alpha) {
  if (y.size() != alpha.size())
    throw std::invalid_argument("dirichlet_log_pdf: dimension mismatch");
  double alpha_sum = 0.0;
  double result = 0.0;
  for (std::size_t j = 0; j < alpha.size(); ++j) {
    if (!(alpha[j] > 0.0))
      throw std::domain_error("dirichlet_log_pdf: alpha entries must be > 0");
    alpha_sum += alpha[j];
    result -= numerics::ln_gamma(alpha[j]);
    result += (alpha[j] - 1.0) * std::log(y[j]);
  }
  return result + numerics::ln_gamma(alpha_sum);
}

int argmax_lowest(std::span<const double> v) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

LabelMap argmax_labels(const ScoreMap& scores) {
  LabelMap labels(scores.height(), scores.width());
  std::vector<double> y(scores.classes());
  for (int r = 0; r < scores.height(); ++r)
    for (int c = 0; c < scores.width(); ++c) {
      scores.scores_at(r, c, y);
      labels.at(r, c) = static_cast<std::uint16_t>(argmax_lowest(y));
    }
  return labels;
}

}  // namespace statfuse

#include "statfuse/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "statfuse/fusion.hpp"
#include "statfuse/metrics.hpp"
#include "statfuse/numerics.hpp"
#include "statfuse/rng.hpp"

namespace statfuse {

using numerics::digamma;
using numerics::inv_digamma;
using numerics::kProbClipMin;
using numerics::ln_gamma;

SuffStats::SuffStats(int k)
    : classes(k),
      sum_log(k, std::vector<double>(k, 0.0)),
      counts(k, 0),
      total_sum_log(k, 0.0) {}

void SuffStats::merge(const SuffStats& other) {
  if (other.classes != classes)
    throw std::invalid_argument("SuffStats::merge: class count mismatch");
  for (int k = 0; k < classes; ++k) {
    counts[k] += other.counts[k];
    for (int j = 0; j < classes; ++j) sum_log[k][j] += other.sum_log[k][j];
  }
  for (int j = 0; j < classes; ++j) total_sum_log[j] += other.total_sum_log[j];
  total_count += other.total_count;
}

std::optional<std::vector<double>> SuffStats::class_mean(int k) const {
  if (counts[k] == 0) return std::nullopt;
  std::vector<double> s(classes);
  for (int j = 0; j < classes; ++j)
    s[j] = sum_log[k][j] / static_cast<double>(counts[k]);
  return s;
}

void accumulate_confusion(const LabelMap& pred, const LabelMap& gt,
                          const ClassSet& classes, ConfusionMatrix& m) {
  if (pred.height() != gt.height() || pred.width() != gt.width())
    throw std::invalid_argument("accumulate_confusion: shape mismatch");
  if (m.classes() != classes.count)
    throw std::invalid_argument("accumulate_confusion: matrix dimension mismatch");
  const auto p = pred.raw();
  const auto g = gt.raw();
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (classes.ignore_index && g[i] == *classes.ignore_index) continue;
    if (p[i] >= classes.count || g[i] >= classes.count)
      throw std::invalid_argument("accumulate_confusion: label out of range");
    ++m.at(p[i], g[i]);
  }
}

void accumulate_suffstats(const ScoreMap& scores, const LabelMap& gt,
                          const ClassSet& classes, SuffStats& acc,
                          std::optional<Subsample> subsample) {
  if (scores.height() != gt.height() || scores.width() != gt.width())
    throw std::invalid_argument("accumulate_suffstats: shape mismatch");
  if (scores.classes() != classes.count || acc.classes != classes.count)
    throw std::invalid_argument("accumulate_suffstats: class count mismatch");
  const int kk = classes.count;
  std::vector<double> y(kk);
  for (int r = 0; r < gt.height(); ++r) {
    for (int c = 0; c < gt.width(); ++c) {
      const int k = gt.at(r, c);
      if (classes.ignore_index && k == *classes.ignore_index) continue;
      if (k >= kk)
        throw std::invalid_argument("accumulate_suffstats: label out of range");
      if (subsample && subsample->rate < 1.0) {
        const std::uint64_t idx =
            static_cast<std::uint64_t>(r) * gt.width() + c;
        if (Rng::stream(subsample->seed, idx).next_double() >= subsample->rate)
          continue;
      }
      scores.scores_at(r, c, y);
      clip_to_simplex(y);
      for (int j = 0; j < kk; ++j) {
        const double lg = std::log(y[j]);
        acc.sum_log[k][j] += lg;
        acc.total_sum_log[j] += lg;
      }
      ++acc.counts[k];
      ++acc.total_count;
    }
  }
}

ComplementStats complement_stats(const SuffStats& acc, int k) {
  const std::int64_t n_bar = acc.total_count - acc.counts[k];
  if (n_bar <= 0)
    throw std::domain_error("complement_stats: no elements outside class " +
                            std::to_string(k));
  ComplementStats out;
  out.count = n_bar;
  out.mean_log.resize(acc.classes);
  for (int j = 0; j < acc.classes; ++j)
    out.mean_log[j] = (acc.total_sum_log[j] - acc.sum_log[k][j]) /
                      static_cast<double>(n_bar);
  return out;
}

namespace {

void check_mean_log(std::span<const double> s) {
  for (double v : s)
    if (!std::isfinite(v) || v >= 0.0)
      throw std::domain_error("dirichlet fit: mean-log statistic must be finite and < 0");
}

}  // namespace

FitResult fit_dirichlet_mle(std::span<const double> s, std::int64_t n,
                            int max_iter, double tol) {
  check_mean_log(s);
  if (n < 2) throw std::domain_error("fit_dirichlet_mle: need N >= 2");
  const int kk = static_cast<int>(s.size());

  // moment-flavored start: direction from exp(s), unit total concentration
  std::vector<double> alpha(kk);
  double norm = 0.0;
  for (int j = 0; j < kk; ++j) norm += std::exp(s[j]);
  for (int j = 0; j < kk; ++j)
    alpha[j] = std::max(std::exp(s[j]) / norm * kk, 1e-6);

  FitResult result;
  for (int it = 0; it < max_iter; ++it) {
    double alpha_sum = 0.0;
    for (double a : alpha) alpha_sum += a;
    const double psi_sum = digamma(alpha_sum);
    double max_change = 0.0;
    for (int j = 0; j < kk; ++j) {
      const double next = inv_digamma(psi_sum + s[j]);
      max_change = std::max(max_change, std::abs(next - alpha[j]));
      alpha[j] = next;
    }
    result.iterations = it + 1;
    if (max_change < tol) {
      result.converged = true;
      break;
    }
  }
  result.alpha = std::move(alpha);
  return result;
}

double regularized_loss(std::span<const double> alpha,
                        std::span<const double> s,
                        std::span<const double> s_bar,
                        const RegularizationConfig& cfg) {
  double alpha_sum = 0.0;
  double lgam = 0.0, target = 0.0, discrim = 0.0, norm = 0.0;
  for (std::size_t j = 0; j < alpha.size(); ++j) {
    if (!(alpha[j] > 0.0))
      throw std::domain_error("regularized_loss: alpha entries must be > 0");
    alpha_sum += alpha[j];
    lgam -= ln_gamma(alpha[j]);
    target += (alpha[j] - 1.0) * s[j];
    discrim += (alpha[j] - 1.0) * s_bar[j];
    norm += alpha[j] * alpha[j];
  }
  lgam += ln_gamma(alpha_sum);
  return (1.0 - cfg.beta) * lgam - cfg.beta * discrim + target -
         cfg.delta * norm;
}

FitResult fit_dirichlet_regularized(std::span<const double> s,
                                    std::span<const double> s_bar,
                                    const RegularizationConfig& cfg,
                                    std::optional<std::vector<double>> init) {
  check_mean_log(s);
  if (cfg.beta > 0.0) check_mean_log(s_bar);
  if (cfg.beta < 0.0 || cfg.beta >= 1.0)
    throw std::domain_error("fit_dirichlet_regularized: beta must be in [0, 1)");
  if (cfg.delta < 0.0)
    throw std::domain_error("fit_dirichlet_regularized: delta must be >= 0");
  const int kk = static_cast<int>(s.size());

  if (cfg.beta == 0.0 && cfg.delta == 0.0)
    return fit_dirichlet_mle(s, 2, cfg.max_iterations, 1e-10);

  std::vector<double> alpha;
  if (init) {
    alpha = std::move(*init);
    for (double a : alpha)
      if (!(a > 0.0))
        throw std::domain_error("fit_dirichlet_regularized: init must be > 0");
  } else {
    alpha = fit_dirichlet_mle(s, 2, cfg.max_iterations, 1e-10).alpha;
  }

  // ascent on theta = log(alpha), backtracking line search
  std::vector<double> theta(kk), grad(kk), trial(kk), trial_alpha(kk);
  for (int j = 0; j < kk; ++j) theta[j] = std::log(alpha[j]);
  double loss = regularized_loss(alpha, s, s_bar, cfg);

  FitResult result;
  constexpr double kArmijo = 1e-4;
  for (int it = 0; it < cfg.max_iterations; ++it) {
    double alpha_sum = 0.0;
    for (double a : alpha) alpha_sum += a;
    const double psi_sum = digamma(alpha_sum);
    double grad_norm2 = 0.0;
    for (int j = 0; j < kk; ++j) {
      const double d_alpha = (1.0 - cfg.beta) * (psi_sum - digamma(alpha[j])) -
                             cfg.beta * s_bar[j] + s[j] -
                             2.0 * cfg.delta * alpha[j];
      grad[j] = d_alpha * alpha[j];  // chain rule through exp
      grad_norm2 += grad[j] * grad[j];
    }

    double step = 1.0;
    double new_loss = loss;
    bool accepted = false;
    // box keeping alpha in [1e-8, 1e12] so the loss stays evaluable
    constexpr double kThetaMin = -18.42068074395236;
    constexpr double kThetaMax = 27.631021115928547;
    for (int half = 0; half < 60; ++half) {
      for (int j = 0; j < kk; ++j) {
        trial[j] = std::clamp(theta[j] + step * grad[j], kThetaMin, kThetaMax);
        trial_alpha[j] = std::exp(trial[j]);
      }
      const double candidate = regularized_loss(trial_alpha, s, s_bar, cfg);
      if (std::isfinite(candidate) &&
          candidate >= loss + kArmijo * step * grad_norm2) {
        new_loss = candidate;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    result.iterations = it + 1;
    if (!accepted) {
      result.converged = true;  // no ascent direction left at this scale
      break;
    }
    theta = trial;
    alpha = trial_alpha;
    const double improvement = new_loss - loss;
    loss = new_loss;
    if (improvement < cfg.loss_tolerance) {
      result.converged = true;
      break;
    }
  }
  result.alpha = std::move(alpha);
  return result;
}

DirichletModel fit_expert_dirichlet(const SuffStats& stats,
                                    const RegularizationConfig& cfg) {
  DirichletModel model;
  model.alphas.resize(stats.classes);
  for (int k = 0; k < stats.classes; ++k) {
    const auto s = stats.class_mean(k);
    if (!s) {
      model.alphas[k].assign(stats.classes, 1.0);
      model.fallback_classes.push_back(k);
      continue;
    }
    RegularizationConfig local = cfg;
    std::vector<double> s_bar(stats.classes, 0.0);
    if (cfg.beta > 0.0) {
      try {
        s_bar = complement_stats(stats, k).mean_log;
      } catch (const std::domain_error&) {
        local.beta = 0.0;  // no complement data for this class
      }
    }
    model.alphas[k] =
        fit_dirichlet_regularized(*s, s_bar, local, std::nullopt).alpha;
  }
  return model;
}

GridSearchResult grid_search(
    const std::vector<std::vector<ScoreMap>>& dev_experts,
    const std::vector<LabelMap>& dev_gt, FusionModel model,
    std::span<const double> beta_grid, std::span<const double> delta_grid,
    std::optional<Subsample> subsample) {
  if (beta_grid.empty() || delta_grid.empty())
    throw std::invalid_argument("grid_search: empty grid");
  if (dev_gt.empty() || dev_experts.empty())
    throw std::invalid_argument("grid_search: empty dev set");
  if (dev_experts.size() != model.experts.size())
    throw std::invalid_argument("grid_search: expert count mismatch");

  const int num_experts = static_cast<int>(dev_experts.size());
  std::vector<SuffStats> stats(num_experts, SuffStats(model.class_set.count));
  for (int e = 0; e < num_experts; ++e) {
    if (dev_experts[e].size() != dev_gt.size())
      throw std::invalid_argument("grid_search: image count mismatch");
    for (std::size_t i = 0; i < dev_gt.size(); ++i)
      accumulate_suffstats(dev_experts[e][i], dev_gt[i], model.class_set,
                           stats[e], subsample);
  }

  std::vector<std::string> ids;
  for (const auto& e : model.experts) ids.push_back(e.id);

  GridSearchResult result;
  bool have_best = false;
  double best_iou = 0.0;
  for (double beta : beta_grid) {
    for (double delta : delta_grid) {
      RegularizationConfig cfg;
      cfg.beta = beta;
      cfg.delta = delta;
      GridPoint point;
      point.beta = beta;
      point.delta = delta;
      for (int e = 0; e < num_experts; ++e) {
        DirichletModel dm = fit_expert_dirichlet(stats[e], cfg);
        point.mle_fallbacks += static_cast<int>(dm.fallback_classes.size());
        model.experts[e].dirichlet = std::move(dm);
      }
      model.beta = beta;
      model.delta = delta;

      std::vector<LabelMap> fused;
      std::vector<ScoreMap> frame(num_experts);
      for (std::size_t i = 0; i < dev_gt.size(); ++i) {
        for (int e = 0; e < num_experts; ++e) frame[e] = dev_experts[e][i];
        fused.push_back(fuse_dirichlet(ids, frame, model).labels);
      }
      point.mean_iou =
          evaluate_batch(fused, dev_gt, model.class_set).mean_iou;
      if (!have_best || point.mean_iou > best_iou) {
        best_iou = point.mean_iou;
        result.beta = beta;
        result.delta = delta;
        have_best = true;
      }
      result.table.push_back(point);
    }
  }
  return result;
}

}  // namespace statfuse

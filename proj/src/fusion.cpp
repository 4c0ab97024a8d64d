#include "statfuse/fusion.hpp"

#include <cmath>
#include <stdexcept>

#include "statfuse/numerics.hpp"

namespace statfuse {

namespace {

void check_same_shape(int h, int w, int h2, int w2, const char* what) {
  if (h != h2 || w != w2)
    throw std::invalid_argument(std::string(what) + ": shape mismatch");
}

const FusionModel::Expert& require_expert(const FusionModel& model,
                                          const std::string& id) {
  const auto* e = model.find_expert(id);
  if (!e)
    throw std::invalid_argument("fusion: expert '" + id +
                                "' not present in the model");
  return *e;
}

}  // namespace

void SampleStack::validate() const {
  if (samples.size() < 2)
    throw std::invalid_argument("SampleStack: need T >= 2 samples");
  for (const auto& s : samples)
    check_same_shape(s.height(), s.width(), samples.front().height(),
                     samples.front().width(), "SampleStack");
}

FusedResult fuse_bayes(std::span<const std::string> expert_ids,
                       std::span<const LabelMap> expert_labels,
                       const FusionModel& model, const FusionOptions& opts) {
  if (expert_ids.size() != expert_labels.size() || expert_ids.empty())
    throw std::invalid_argument("fuse_bayes: ids and label maps must align");
  const int kk = model.class_set.count;
  const int h = expert_labels.front().height();
  const int w = expert_labels.front().width();

  // conditional tables are reused across all elements
  std::vector<std::vector<double>> cond;  // [expert][out * K + k]
  for (std::size_t e = 0; e < expert_ids.size(); ++e) {
    check_same_shape(expert_labels[e].height(), expert_labels[e].width(), h, w,
                     "fuse_bayes");
    const auto& expert = require_expert(model, expert_ids[e]);
    std::vector<double> table(static_cast<std::size_t>(kk) * kk);
    for (int out = 0; out < kk; ++out)
      for (int k = 0; k < kk; ++k)
        table[out * kk + k] =
            conditional_log_likelihood(expert.confusion, out, k, opts.smoothing);
    cond.push_back(std::move(table));
  }

  FusedResult result;
  result.labels = LabelMap(h, w);
  if (opts.keep_scores) result.scores = DenseScores(h, w, kk);
  std::vector<double> score(kk);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int k = 0; k < kk; ++k) score[k] = model.prior.log_probs[k];
      for (std::size_t e = 0; e < expert_ids.size(); ++e) {
        const int out = expert_labels[e].at(y, x);
        if (out >= kk)
          throw std::invalid_argument("fuse_bayes: label out of range");
        for (int k = 0; k < kk; ++k) score[k] += cond[e][out * kk + k];
      }
      result.labels.at(y, x) = static_cast<std::uint16_t>(argmax_lowest(score));
      if (result.scores)
        for (int k = 0; k < kk; ++k) result.scores->at(y, x, k) = score[k];
    }
  }
  return result;
}

FusedResult fuse_dirichlet(std::span<const std::string> expert_ids,
                           std::span<const ScoreMap> expert_scores,
                           const FusionModel& model,
                           const FusionOptions& opts) {
  if (expert_ids.size() != expert_scores.size() || expert_ids.empty())
    throw std::invalid_argument("fuse_dirichlet: ids and score maps must align");
  const int kk = model.class_set.count;
  const int h = expert_scores.front().height();
  const int w = expert_scores.front().width();

  // pdf(y | alpha) = exp(lnG(sum a) - sum lnG(a_j) + sum (a_j - 1) ln y_j);
  // the Gamma part is constant per (expert, class), precomputed here.
  struct ExpertParams {
    std::vector<double> log_norm;        // [k]
    std::vector<double> alpha_minus_one; // [k * K + j]
  };
  std::vector<ExpertParams> params;
  for (std::size_t e = 0; e < expert_ids.size(); ++e) {
    check_same_shape(expert_scores[e].height(), expert_scores[e].width(), h, w,
                     "fuse_dirichlet");
    if (expert_scores[e].classes() != kk)
      throw std::invalid_argument("fuse_dirichlet: class count mismatch");
    const auto& expert = require_expert(model, expert_ids[e]);
    if (!expert.dirichlet)
      throw std::invalid_argument("fuse_dirichlet: expert '" + expert.id +
                                  "' has no Dirichlet parameters");
    ExpertParams p;
    p.log_norm.resize(kk);
    p.alpha_minus_one.resize(static_cast<std::size_t>(kk) * kk);
    for (int k = 0; k < kk; ++k) {
      const auto& alpha = expert.dirichlet->alphas[k];
      double alpha_sum = 0.0, lg = 0.0;
      for (int j = 0; j < kk; ++j) {
        alpha_sum += alpha[j];
        lg += numerics::ln_gamma(alpha[j]);
        p.alpha_minus_one[static_cast<std::size_t>(k) * kk + j] = alpha[j] - 1.0;
      }
      p.log_norm[k] = numerics::ln_gamma(alpha_sum) - lg;
    }
    params.push_back(std::move(p));
  }

  FusedResult result;
  result.labels = LabelMap(h, w);
  if (opts.keep_scores) result.scores = DenseScores(h, w, kk);
  std::vector<double> score(kk), y(kk), log_y(kk);
  for (int yy = 0; yy < h; ++yy) {
    for (int xx = 0; xx < w; ++xx) {
      for (int k = 0; k < kk; ++k) score[k] = model.prior.log_probs[k];
      for (std::size_t e = 0; e < expert_ids.size(); ++e) {
        expert_scores[e].scores_at(yy, xx, y);
        clip_to_simplex(y);
        for (int j = 0; j < kk; ++j) log_y[j] = std::log(y[j]);
        const auto& p = params[e];
        for (int k = 0; k < kk; ++k) {
          double dot = 0.0;
          const double* am1 = &p.alpha_minus_one[static_cast<std::size_t>(k) * kk];
          for (int j = 0; j < kk; ++j) dot += am1[j] * log_y[j];
          score[k] += p.log_norm[k] + dot;
        }
      }
      result.labels.at(yy, xx) =
          static_cast<std::uint16_t>(argmax_lowest(score));
      if (result.scores)
        for (int k = 0; k < kk; ++k) result.scores->at(yy, xx, k) = score[k];
    }
  }
  return result;
}

FusedResult fuse_average(std::span<const ScoreMap> expert_scores,
                         bool keep_scores) {
  if (expert_scores.empty())
    throw std::domain_error("fuse_average: no experts");
  const int kk = expert_scores.front().classes();
  const int h = expert_scores.front().height();
  const int w = expert_scores.front().width();
  for (const auto& s : expert_scores) {
    check_same_shape(s.height(), s.width(), h, w, "fuse_average");
    if (s.classes() != kk)
      throw std::invalid_argument("fuse_average: class count mismatch");
  }

  FusedResult result;
  result.labels = LabelMap(h, w);
  if (keep_scores) result.scores = DenseScores(h, w, kk);
  std::vector<double> mean(kk), y(kk);
  const double inv_m = 1.0 / static_cast<double>(expert_scores.size());
  for (int yy = 0; yy < h; ++yy) {
    for (int xx = 0; xx < w; ++xx) {
      std::fill(mean.begin(), mean.end(), 0.0);
      for (const auto& s : expert_scores) {
        s.scores_at(yy, xx, y);
        for (int k = 0; k < kk; ++k) mean[k] += y[k];
      }
      for (int k = 0; k < kk; ++k) mean[k] *= inv_m;
      result.labels.at(yy, xx) = static_cast<std::uint16_t>(argmax_lowest(mean));
      if (result.scores)
        for (int k = 0; k < kk; ++k) result.scores->at(yy, xx, k) = mean[k];
    }
  }
  return result;
}

FusedResult fuse_variance(std::span<const SampleStack> stacks,
                          bool keep_scores) {
  if (stacks.empty()) throw std::domain_error("fuse_variance: no experts");
  for (const auto& st : stacks) st.validate();
  const int kk = stacks.front().samples.front().classes();
  const int h = stacks.front().samples.front().height();
  const int w = stacks.front().samples.front().width();
  for (const auto& st : stacks) {
    check_same_shape(st.samples.front().height(), st.samples.front().width(),
                     h, w, "fuse_variance");
    if (st.samples.front().classes() != kk)
      throw std::invalid_argument("fuse_variance: class count mismatch");
  }
  const int num_experts = static_cast<int>(stacks.size());

  FusedResult result;
  result.labels = LabelMap(h, w);
  if (keep_scores) result.scores = DenseScores(h, w, kk);
  std::vector<double> y(kk), fused(kk);
  std::vector<std::vector<double>> means(num_experts,
                                         std::vector<double>(kk));
  std::vector<double> mean_var(num_experts);

  for (int yy = 0; yy < h; ++yy) {
    for (int xx = 0; xx < w; ++xx) {
      for (int e = 0; e < num_experts; ++e) {
        const auto& samples = stacks[e].samples;
        const int t = static_cast<int>(samples.size());
        auto& mean = means[e];
        std::fill(mean.begin(), mean.end(), 0.0);
        for (const auto& s : samples) {
          s.scores_at(yy, xx, y);
          for (int k = 0; k < kk; ++k) mean[k] += y[k];
        }
        for (int k = 0; k < kk; ++k) mean[k] /= t;
        double var_sum = 0.0;  // unbiased, divisor T-1
        for (const auto& s : samples) {
          s.scores_at(yy, xx, y);
          for (int k = 0; k < kk; ++k) {
            const double d = y[k] - mean[k];
            var_sum += d * d;
          }
        }
        mean_var[e] = var_sum / (static_cast<double>(t - 1) * kk);
      }

      std::fill(fused.begin(), fused.end(), 0.0);
      bool any_zero = false;
      for (int e = 0; e < num_experts; ++e)
        if (mean_var[e] == 0.0) any_zero = true;
      if (any_zero) {
        // infinite certainty dominates: unweighted mean over the
        // zero-variance experts only
        int zero_count = 0;
        for (int e = 0; e < num_experts; ++e) {
          if (mean_var[e] != 0.0) continue;
          ++zero_count;
          for (int k = 0; k < kk; ++k) fused[k] += means[e][k];
        }
        for (int k = 0; k < kk; ++k) fused[k] /= zero_count;
      } else {
        double weight_sum = 0.0;
        for (int e = 0; e < num_experts; ++e) {
          const double omega = 1.0 / mean_var[e];
          weight_sum += omega;
          for (int k = 0; k < kk; ++k) fused[k] += omega * means[e][k];
        }
        for (int k = 0; k < kk; ++k) fused[k] /= weight_sum;
      }
      result.labels.at(yy, xx) = static_cast<std::uint16_t>(argmax_lowest(fused));
      if (result.scores)
        for (int k = 0; k < kk; ++k) result.scores->at(yy, xx, k) = fused[k];
    }
  }
  return result;
}

}  // namespace statfuse

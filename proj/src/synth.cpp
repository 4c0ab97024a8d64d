#include "statfuse/synth.hpp"

#include <cmath>
#include <stdexcept>

#include "statfuse/rng.hpp"

namespace statfuse::synth {

void ExpertSpec::validate() const {
  if (generative_alphas.size() < 2)
    throw std::invalid_argument("ExpertSpec: K >= 2 required");
  const std::size_t kk = generative_alphas.size();
  for (const auto& a : generative_alphas) {
    if (a.size() != kk)
      throw std::invalid_argument("ExpertSpec: alpha dimension mismatch");
    for (double v : a)
      if (!(v > 0.0))
        throw std::invalid_argument("ExpertSpec: alpha entries must be > 0");
  }
}

void SceneSpec::validate() const {
  if (height <= 0 || width <= 0)
    throw std::invalid_argument("SceneSpec: zero-area image");
  if (region_size <= 0)
    throw std::invalid_argument("SceneSpec: region_size must be positive");
  double sum = 0.0;
  for (double f : class_frequencies) {
    if (f < 0.0)
      throw std::invalid_argument("SceneSpec: negative class frequency");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("SceneSpec: frequencies must sum to 1");
}

LabelMap generate_scene(const SceneSpec& spec) {
  spec.validate();
  LabelMap map(spec.height, spec.width);
  const int regions_x = (spec.width + spec.region_size - 1) / spec.region_size;
  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      const std::uint64_t region =
          static_cast<std::uint64_t>(y / spec.region_size) * regions_x +
          (x / spec.region_size);
      Rng rng = Rng::stream(spec.seed, region);
      map.at(y, x) =
          static_cast<std::uint16_t>(rng.next_categorical(spec.class_frequencies));
    }
  }
  return map;
}

ScoreMap simulate_expert(const LabelMap& gt, const ExpertSpec& spec,
                         std::uint64_t seed) {
  spec.validate();
  const int kk = static_cast<int>(spec.generative_alphas.size());
  ScoreMap scores(gt.height(), gt.width(), kk);
  std::vector<double> y(kk);
  for (int r = 0; r < gt.height(); ++r) {
    for (int c = 0; c < gt.width(); ++c) {
      const int k = gt.at(r, c);
      if (k >= kk)
        throw std::invalid_argument("simulate_expert: label out of range");
      const std::uint64_t idx = static_cast<std::uint64_t>(r) * gt.width() + c;
      Rng rng = Rng::stream(seed, idx);
      rng.next_dirichlet(spec.generative_alphas[k], y);
      for (int j = 0; j < kk; ++j)
        scores.at(j, r, c) = static_cast<float>(y[j]);
    }
  }
  return scores;
}

std::vector<ScoreMap> simulate_expert_stack(const LabelMap& gt,
                                            const ExpertSpec& spec,
                                            std::uint64_t seed, int samples) {
  if (samples < 2)
    throw std::invalid_argument("simulate_expert_stack: need T >= 2");
  std::vector<ScoreMap> stack;
  stack.reserve(samples);
  for (int t = 0; t < samples; ++t)
    stack.push_back(simulate_expert(gt, spec, Rng::mix(seed) + t + 1));
  return stack;
}

namespace {

std::vector<std::vector<double>> sharp_alphas(int kk, double sharp) {
  std::vector<std::vector<double>> alphas(kk, std::vector<double>(kk, 1.0));
  for (int k = 0; k < kk; ++k) alphas[k][k] += sharp;
  return alphas;
}

}  // namespace

Scenario complementary_scenario(int classes, double sharp, double pair_total,
                                double pair_tilt) {
  if (classes < 4)
    throw std::invalid_argument("complementary_scenario: need K >= 4");
  Scenario sc;
  sc.classes = ClassSet::with_default_names(classes);

  ExpertSpec a{"expert_a", sharp_alphas(classes, sharp)};
  // expert A spreads its concentration across classes {0,1} with only a
  // mild tilt toward the true one
  for (int k : {0, 1}) {
    a.generative_alphas[k].assign(classes, 1.0);
    a.generative_alphas[k][k] += pair_total * pair_tilt;
    a.generative_alphas[k][1 - k] += pair_total * (1.0 - pair_tilt);
  }
  ExpertSpec b{"expert_b", sharp_alphas(classes, sharp)};
  for (int k : {2, 3}) {
    b.generative_alphas[k].assign(classes, 1.0);
    b.generative_alphas[k][k] += pair_total * pair_tilt;
    b.generative_alphas[k][5 - k] += pair_total * (1.0 - pair_tilt);
  }
  sc.experts = {std::move(a), std::move(b)};
  return sc;
}

Scenario degraded_scenario(int classes, double sharp) {
  Scenario sc;
  sc.classes = ClassSet::with_default_names(classes);
  ExpertSpec good{"good", sharp_alphas(classes, sharp)};
  // near-uniform scores regardless of the ground truth
  ExpertSpec degraded{"degraded",
                      std::vector<std::vector<double>>(
                          classes, std::vector<double>(classes, 4.0))};
  sc.experts = {std::move(good), std::move(degraded)};
  return sc;
}

Scenario sample_stacks_scenario(int classes, int samples) {
  Scenario sc;
  sc.classes = ClassSet::with_default_names(classes);
  ExpertSpec steady{"steady", sharp_alphas(classes, 40.0)};
  ExpertSpec noisy{"noisy", sharp_alphas(classes, 4.0)};
  sc.experts = {std::move(steady), std::move(noisy)};
  sc.sample_count = samples;
  return sc;
}

}  // namespace statfuse::synth

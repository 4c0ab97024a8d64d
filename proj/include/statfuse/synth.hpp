#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "statfuse/core.hpp"

namespace statfuse::synth {

/// Generative description of one synthetic expert: the Dirichlet the
/// expert's score vector follows for each ground-truth class.
struct ExpertSpec {
  std::string id;
  std::vector<std::vector<double>> generative_alphas;  // [k][j], all > 0

  void validate() const;
};

struct SceneSpec {
  int height = 0, width = 0;
  std::vector<double> class_frequencies;  // sums to 1
  int region_size = 8;                    // side of square patches
  std::uint64_t seed = 0;

  void validate() const;
};

/// Tiles the image with square regions, each assigned a class drawn from
/// class_frequencies. Deterministic given the seed.
LabelMap generate_scene(const SceneSpec& spec);

/// Per element with ground truth k, draws y ~ Dirichlet(alpha[k]).
/// Each element's draw comes from its own counter-keyed stream.
ScoreMap simulate_expert(const LabelMap& gt, const ExpertSpec& spec,
                         std::uint64_t seed);

/// T independent Monte-Carlo draws per element, for variance fusion.
std::vector<ScoreMap> simulate_expert_stack(const LabelMap& gt,
                                            const ExpertSpec& spec,
                                            std::uint64_t seed, int samples);

/// A ready-made scenario: class set plus expert specs.
struct Scenario {
  ClassSet classes;
  std::vector<ExpertSpec> experts;
  int sample_count = 0;  // > 0 means emit sample stacks
};

/// Two experts with complementary strengths: expert A shares concentration
/// between classes {0,1} (with a mild tilt toward the true one) but is sharp
/// elsewhere; expert B mirrors this on classes {2,3}.
Scenario complementary_scenario(int classes = 6, double sharp = 30.0,
                                double pair_total = 12.0,
                                double pair_tilt = 0.62);

/// A decent expert plus a near-uniform one.
Scenario degraded_scenario(int classes = 6, double sharp = 6.0);

/// Two moderately sharp experts emitting Monte-Carlo sample stacks, the
/// second with a larger noise scale (lower concentration).
Scenario sample_stacks_scenario(int classes = 6, int samples = 8);

}  // namespace statfuse::synth

/*
 * Copyright 2026 The cfdet Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef CFDET_SYNTH_H_
#define CFDET_SYNTH_H_

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "cfdet/consensus.h"
#include "cfdet/evaluation.h"
#include "cfdet/fusion.h"

namespace cfdet {

// Portable random stream for scenario generation. The engine is
// std::mt19937_64, whose output sequence the C++ standard fixes (the 10000th
// draw of a default-seeded engine is 9981545732273789042); the transforms
// below avoid the implementation-defined standard distributions.
class ScenarioRng {
 public:
  explicit ScenarioRng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t NextU64() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double Uniform();
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }
  // Standard normal via Box-Muller (one draw per call).
  double Normal();
  // Knuth's product-of-uniforms method; fine for the small rates used here.
  int Poisson(double rate);
  // Index drawn with probability proportional to weights[k].
  std::size_t Categorical(const std::vector<double>& weights);
  int UniformInt(int lo, int hi);  // inclusive

 private:
  std::mt19937_64 engine_;
};

struct ScenarioClass {
  std::string name;
  double frequency = 1.0;
};

struct SimulatedSource {
  std::string name;
  std::int64_t dataset_size = 1;
  // One detection probability per class.
  std::vector<double> detect_prob;
  // Standard deviation of the per-coordinate jitter, normalized units.
  double coord_noise = 0.0;
  // True-positive confidence ~ clip(Normal(mean, stddev), 0, 1).
  double true_conf_mean = 0.8;
  double true_conf_stddev = 0.1;
  // Mean false positives per image; confidences uniform in the range below.
  double fp_rate = 0.0;
  double fp_conf_lo = 0.05;
  double fp_conf_hi = 0.6;
  // A poisonous source ignores the ground truth and emits `poison_rate`
  // uniform random boxes per image with uniform [0,1] confidence.
  bool poisonous = false;
  double poison_rate = 3.0;
};

struct ScenarioSpec {
  std::uint64_t seed = 0;
  int num_images = 1;
  std::vector<ScenarioClass> classes;
  int min_objects = 1;
  int max_objects = 5;
  // Side lengths of ground-truth boxes, normalized.
  double min_box_size = 0.05;
  double max_box_size = 0.3;
  std::vector<SimulatedSource> sources;
  // Gates and label filter shipped with the scenario's manifest.
  ConfidenceGates gates;
  LabelSpaceFilter filter;

  // Throws SpecError when an invariant is violated.
  void Validate() const;
};

struct Scenario {
  GroundTruth ground_truth;
  std::vector<SourceDomain> sources;
  // "img_00000", "img_00001", ...
  std::vector<std::string> image_ids;

  SourceEnsemble Ensemble() const { return {sources, image_ids}; }
};

// Pure function of `spec`: ground truth first, then each source in order, all
// from one sequential stream seeded with spec.seed.
Scenario Generate(const ScenarioSpec& spec);

// Frozen scenarios used by the acceptance suite: "three_good",
// "two_good_one_poison" and "long_tail_gated".
std::map<std::string, ScenarioSpec> ReferenceScenarios();

}  // namespace cfdet

#endif  // CFDET_SYNTH_H_

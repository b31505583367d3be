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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "cfdet/consensus.h"
#include "cfdet/errors.h"
#include "cfdet/evaluation.h"
#include "cfdet/synth.h"
#include "test_support.h"

namespace cfdet {
namespace {

Box MakeBox(unsigned cls, double x1, double y1, double x2, double y2,
            double conf, int source) {
  return {ClassId(cls), x1, y1, x2, y2, conf, source};
}

SourceDomain Source(int id, std::vector<std::pair<std::string, Box>> boxes,
                    std::int64_t size = 1) {
  SourceDomain s;
  s.source_id = id;
  s.name = "s" + std::to_string(id);
  s.dataset_size = size;
  for (auto& [image, b] : boxes) {
    b.source = id;
    s.detections[image].image_id = image;
    s.detections[image].boxes.push_back(b);
  }
  return s;
}

std::vector<const SourceDomain*> Ptrs(const std::vector<SourceDomain>& v) {
  std::vector<const SourceDomain*> out;
  for (const SourceDomain& s : v) out.push_back(&s);
  return out;
}

// Random ensemble of `n` sources over `images` images.
SourceEnsemble RandomEnsemble(testing::Gen& gen, int n, int images) {
  SourceEnsemble e;
  for (int i = 0; i < n; ++i) {
    SourceDomain s;
    s.source_id = i + 1;
    s.name = "src" + std::to_string(i + 1);
    s.dataset_size = gen.Int(1, 1000);
    e.sources.push_back(s);
  }
  for (int j = 0; j < images; ++j) {
    const std::string id = "img" + std::to_string(j);
    e.target_image_ids.push_back(id);
    auto per_model = gen.RandomImage(n, 2, 4, id);
    for (int i = 0; i < n; ++i) {
      if (!per_model[i].boxes.empty()) e.sources[i].detections[id] = per_model[i];
    }
  }
  return e;
}

std::vector<std::map<std::string, DetectionSet>> DetectionsOf(
    const std::vector<const SourceDomain*>& subset) {
  std::vector<std::map<std::string, DetectionSet>> out;
  for (const SourceDomain* s : subset) out.push_back(s->detections);
  return out;
}

TEST(ConsensusQualityTest, TwoModelPair) {
  std::vector<SourceDomain> sources = {
      Source(1, {{"a", MakeBox(0, 0, 0, 0.5, 0.5, 0.8, 0)}}),
      Source(2, {{"a", MakeBox(0, 0.01, 0, 0.5, 0.5, 0.6, 0)}})};
  const double q = ConsensusQuality(Ptrs(sources), {"a"}, {});
  EXPECT_NEAR(q, 2 * 0.7, 1e-15);
  EXPECT_NEAR(q, 1.4, 1e-12);
}

TEST(ConsensusQualityTest, EmptyAfterGatesIsZero) {
  std::vector<SourceDomain> sources = {
      Source(1, {{"a", MakeBox(0, 0, 0, 0.5, 0.5, 0.3, 0)}})};
  ConsensusSettings settings;
  settings.gates.default_gate = 0.5;
  EXPECT_EQ(ConsensusQuality(Ptrs(sources), {"a", "b"}, settings), 0.0);
}

TEST(ConsensusQualityTest, SingleBoxIsItsConfidence) {
  std::vector<SourceDomain> sources = {
      Source(1, {{"a", MakeBox(0, 0, 0, 0.5, 0.5, 0.37, 0)}})};
  EXPECT_EQ(ConsensusQuality(Ptrs(sources), {"a"}, {}), 0.37);
}

TEST(ConsensusQualityTest, EmptySubsetThrows) {
  EXPECT_THROW(ConsensusQuality({}, {"a"}, {}), EmptySubset);
}

TEST(ConsensusQualityTest, IgnoresRescaleAndWeights) {
  std::vector<SourceDomain> sources = {
      Source(1, {{"a", MakeBox(0, 0, 0, 0.5, 0.5, 0.8, 0)}}),
      Source(2, {{"b", MakeBox(0, 0, 0, 0.5, 0.5, 0.6, 0)}})};
  ConsensusSettings settings;
  settings.params.confidence_rescale = ConfidenceRescale::kSupportRatio;
  settings.params.model_weights = {1.0, 0.1};
  EXPECT_NEAR(ConsensusQuality(Ptrs(sources), {"a", "b"}, settings), 1.4,
              1e-15);
}

TEST(ConsensusQualityProperty, MatchesBruteForceOracle) {
  testing::Gen gen(51);
  for (int t = 0; t < 200; ++t) {
    const int n = gen.Int(1, 4);
    const SourceEnsemble e = RandomEnsemble(gen, n, gen.Int(1, 5));
    ConsensusSettings settings;
    settings.gates.default_gate = gen.Coin() ? 0.0 : gen.Uniform(0, 0.5);
    for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
      std::vector<const SourceDomain*> subset;
      for (int k = 0; k < n; ++k) {
        if (mask >> k & 1u) subset.push_back(&e.sources[k]);
      }
      const double q = ConsensusQuality(subset, e.target_image_ids, settings);
      const double oracle =
          testing::OracleQuality(DetectionsOf(subset), e.target_image_ids,
                                 settings.gates, kDefaultWbfIouThreshold);
      EXPECT_NEAR(q, oracle, 1e-12);
    }
  }
}

TEST(ConsensusQualityProperty, AdditiveOverImages) {
  testing::Gen gen(52);
  for (int t = 0; t < 200; ++t) {
    const SourceEnsemble e = RandomEnsemble(gen, 3, 6);
    const auto subset = Ptrs(e.sources);
    const double whole = ConsensusQuality(subset, e.target_image_ids, {});
    std::vector<std::string> left, right;
    for (const std::string& id : e.target_image_ids) {
      (gen.Coin() ? left : right).push_back(id);
    }
    const double l = left.empty() ? 0.0 : ConsensusQuality(subset, left, {});
    const double r = right.empty() ? 0.0 : ConsensusQuality(subset, right, {});
    EXPECT_NEAR(whole, l + r, 1e-12);
    double per_image = 0.0;
    for (const std::string& id : e.target_image_ids) {
      per_image += ImageConsensusQuality(subset, id, {});
    }
    EXPECT_EQ(whole, per_image);
  }
}

TEST(ConsensusFocusTest, IdenticalSourcesAreSymmetric) {
  testing::Gen gen(53);
  SourceEnsemble e = RandomEnsemble(gen, 1, 5);
  SourceDomain twin = e.sources[0];
  twin.source_id = 2;
  twin.name = "twin";
  for (auto& [id, set] : twin.detections) {
    for (Box& b : set.boxes) b.source = 2;
  }
  e.sources.push_back(twin);
  const ContributionReport r = ConsensusFocusScores(e, {});
  EXPECT_EQ(r.cf.at(1), r.cf.at(2));
  EXPECT_EQ(r.q_leave_one_out.at(1), r.q_leave_one_out.at(2));
}

TEST(ConsensusFocusTest, GatedOutSourceContributesNothing) {
  std::vector<SourceDomain> sources = {
      Source(1, {{"a", MakeBox(0, 0, 0, 0.5, 0.5, 0.9, 0)}}),
      Source(2, {{"a", MakeBox(0, 0, 0, 0.5, 0.5, 0.9, 0)},
                 {"b", MakeBox(1, 0.2, 0.2, 0.6, 0.6, 0.95, 0)}}),
      Source(3, {{"a", MakeBox(0, 0, 0, 0.5, 0.5, 0.2, 0)},
                 {"b", MakeBox(1, 0.2, 0.2, 0.6, 0.6, 0.3, 0)}})};
  ConsensusSettings settings;
  settings.gates.default_gate = 0.5;
  const ContributionReport r =
      ConsensusFocusScores({sources, {"a", "b"}}, settings);
  EXPECT_EQ(r.q_leave_one_out.at(3), r.q_full);
  EXPECT_EQ(r.cf.at(3), 0.0);
  EXPECT_EQ(r.cf_clamped.at(3), kContributionFloor);
  EXPECT_GT(r.cf.at(1), 0.0);
}

TEST(ConsensusFocusTest, SingleSourceIsDegenerate) {
  std::vector<SourceDomain> sources = {
      Source(1, {{"a", MakeBox(0, 0, 0, 0.5, 0.5, 0.9, 0)}})};
  EXPECT_THROW(ConsensusFocusScores({sources, {"a"}}, {}), DegenerateEnsemble);
}

TEST(ConsensusFocusTest, NegativeContributionIsClampedButKept) {
  // Source 3 adds a weak box that drags down a strong pair's mean.
  std::vector<SourceDomain> sources = {
      Source(1, {{"a", MakeBox(0, 0, 0, 0.5, 0.5, 0.9, 0)}}),
      Source(2, {{"a", MakeBox(0, 0, 0, 0.5, 0.5, 0.9, 0)}}),
      Source(3, {{"a", MakeBox(0, 0.3, 0.3, 0.8, 0.8, 0.05, 0)},
                 {"a", MakeBox(0, 0.0, 0.0, 0.5, 0.5, 0.01, 0)}})};
  const ContributionReport r = ConsensusFocusScores({sources, {"a"}}, {});
  EXPECT_EQ(r.cf.at(3), r.q_full - r.q_leave_one_out.at(3));
  if (r.cf.at(3) < 0) EXPECT_EQ(r.cf_clamped.at(3), kContributionFloor);
  EXPECT_EQ(r.cf_clamped.at(1), std::max(r.cf.at(1), kContributionFloor));
}

TEST(ConsensusFocusProperty, LeaveOneOutMatchesDirectCalls) {
  testing::Gen gen(54);
  for (int t = 0; t < 100; ++t) {
    const int n = gen.Int(2, 5);
    const SourceEnsemble e = RandomEnsemble(gen, n, gen.Int(1, 6));
    ConsensusSettings settings;
    settings.threads = static_cast<unsigned>(gen.Int(1, 4));
    const ContributionReport r = ConsensusFocusScores(e, settings);
    EXPECT_EQ(r.q_full, ConsensusQuality(Ptrs(e.sources), e.target_image_ids,
                                         settings));
    for (int i = 0; i < n; ++i) {
      std::vector<const SourceDomain*> rest;
      for (int k = 0; k < n; ++k) {
        if (k != i) rest.push_back(&e.sources[k]);
      }
      EXPECT_EQ(r.q_leave_one_out.at(i + 1),
                ConsensusQuality(rest, e.target_image_ids, {}));
    }
  }
}

TEST(ConsensusFocusProperty, DuplicatedSourceGetsEqualCf) {
  testing::Gen gen(55);
  for (int t = 0; t < 100; ++t) {
    SourceEnsemble e = RandomEnsemble(gen, 3, 4);
    SourceDomain copy = e.sources[gen.Int(0, 2)];
    const int original = copy.source_id;
    copy.source_id = 4;
    copy.name = "copy";
    e.sources.push_back(copy);
    const ContributionReport r = ConsensusFocusScores(e, {});
    EXPECT_EQ(r.cf.at(original), r.cf.at(4));
  }
}

TEST(ConsensusFocusTest, ThreadCountDoesNotChangeReport) {
  testing::Gen gen(56);
  const SourceEnsemble e = RandomEnsemble(gen, 4, 20);
  ConsensusSettings one, many;
  many.threads = 8;
  EXPECT_EQ(RunConsensusFocus(e, one, true), RunConsensusFocus(e, many, true));
}

TEST(ConsensusFocusTest, PoisonousSourceHasSmallestCf) {
  const ScenarioSpec spec = ReferenceScenarios().at("two_good_one_poison");
  const Scenario scenario = Generate(spec);
  ConsensusSettings settings;
  settings.gates = spec.gates;
  settings.filter = spec.filter;
  const ContributionReport r =
      ConsensusFocusScores(scenario.Ensemble(), settings);
  int poison = 0;
  for (std::size_t i = 0; i < spec.sources.size(); ++i) {
    if (spec.sources[i].poisonous) poison = static_cast<int>(i) + 1;
  }
  ASSERT_NE(poison, 0);
  // Oracle: the four subsets needed, evaluated by explicit clustering.
  std::vector<std::map<std::string, DetectionSet>> all;
  for (const SourceDomain& s : scenario.sources) all.push_back(s.detections);
  const double q_full = testing::OracleQuality(
      all, scenario.image_ids, settings.gates, kDefaultWbfIouThreshold);
  EXPECT_NEAR(r.q_full, q_full, 1e-9);
  std::map<int, double> oracle_cf;
  for (std::size_t i = 0; i < all.size(); ++i) {
    auto rest = all;
    rest.erase(rest.begin() + static_cast<long>(i));
    oracle_cf[static_cast<int>(i) + 1] =
        q_full - testing::OracleQuality(rest, scenario.image_ids,
                                        settings.gates,
                                        kDefaultWbfIouThreshold);
  }
  for (const auto& [id, cf] : r.cf) {
    EXPECT_NEAR(cf, oracle_cf.at(id), 1e-9);
    if (id != poison) {
      EXPECT_LT(r.cf.at(poison), cf);
      EXPECT_LT(oracle_cf.at(poison), oracle_cf.at(id));
    }
  }
}

// ---- weights ----

TEST(ComputeWeightsTest, ExtendedWeightIsTargetShare) {
  ContributionReport r;
  r.cf_clamped = {{1, 1.0}, {2, 1.0}};
  const ContributionReport w = ComputeWeights(r, {{1, 100}, {2, 100}}, 100);
  EXPECT_DOUBLE_EQ(w.alpha_extended, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(w.alpha.at(1), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(w.alpha.at(2), 1.0 / 3.0);
}

TEST(ComputeWeightsTest, EqualSourcesShareEvenly) {
  for (int n = 1; n <= 8; ++n) {
    ContributionReport r;
    std::map<int, std::int64_t> sizes;
    for (int i = 1; i <= n; ++i) {
      r.cf_clamped[i] = 0.37;
      sizes[i] = 50;
    }
    const ContributionReport w = ComputeWeights(r, sizes, 70);
    for (int i = 1; i <= n; ++i) {
      EXPECT_NEAR(w.alpha.at(i), (1.0 - w.alpha_extended) / n, 1e-15);
    }
  }
}

TEST(ComputeWeightsTest, WorkedExample) {
  ContributionReport r;
  r.cf_clamped = {{1, 2.0}, {2, 1.0}};
  const ContributionReport w = ComputeWeights(r, {{1, 200}, {2, 100}}, 100);
  EXPECT_EQ(w.alpha_extended, 0.25);
  EXPECT_EQ(w.alpha.at(1), 0.6);
  EXPECT_EQ(w.alpha.at(2), 0.15);
  // Independent evaluation of the two formulas.
  const double ext = 100.0 / (100.0 + 200.0 + 100.0);
  const double total = 200.0 * 2.0 + 100.0 * 1.0;
  EXPECT_EQ(w.alpha_extended, ext);
  EXPECT_NEAR(w.alpha.at(1), (1 - ext) * 400.0 / total, 1e-15);
  EXPECT_NEAR(w.alpha.at(2), (1 - ext) * 100.0 / total, 1e-15);
}

TEST(ComputeWeightsTest, Errors) {
  ContributionReport r;
  r.cf_clamped = {{1, 1.0}};
  EXPECT_THROW(ComputeWeights(r, {{1, 1}}, 0), ConfigError);
  EXPECT_THROW(ComputeWeights(r, {{1, 0}}, 1), ConfigError);
  EXPECT_THROW(ComputeWeights(r, {}, 1), ConfigError);
  r.cf_clamped = {{1, 0.0}};
  EXPECT_THROW(ComputeWeights(r, {{1, 1}}, 1), AllZeroContribution);
}

TEST(ComputeWeightsProperty, Simplex) {
  testing::Gen gen(57);
  for (int t = 0; t < 1000; ++t) {
    const int n = gen.Int(1, 12);
    ContributionReport r;
    std::map<int, std::int64_t> sizes;
    for (int i = 1; i <= n; ++i) {
      const double cf = gen.Coin(0.2) ? -gen.Uniform(0, 5) : gen.Uniform(0, 50);
      r.cf[i] = cf;
      r.cf_clamped[i] = std::max(cf, kContributionFloor);
      sizes[i] = gen.Int(1, 100000);
    }
    const ContributionReport w = ComputeWeights(r, sizes, gen.Int(1, 100000));
    double sum = w.alpha_extended;
    EXPECT_GE(w.alpha_extended, 0.0);
    for (const auto& [id, a] : w.alpha) {
      EXPECT_GE(a, 0.0);
      sum += a;
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
}

TEST(ComputeWeightsProperty, UniformSizeScalingKeepsRatios) {
  testing::Gen gen(58);
  for (int t = 0; t < 500; ++t) {
    const int n = gen.Int(2, 6);
    ContributionReport r;
    std::map<int, std::int64_t> sizes, scaled;
    const int factor = gen.Int(2, 50);
    for (int i = 1; i <= n; ++i) {
      r.cf_clamped[i] = gen.Uniform(1e-9, 10);
      sizes[i] = gen.Int(1, 1000);
      scaled[i] = sizes[i] * factor;
    }
    const ContributionReport a = ComputeWeights(r, sizes, 100);
    const ContributionReport b = ComputeWeights(r, scaled, 100);
    for (int i = 2; i <= n; ++i) {
      EXPECT_NEAR(a.alpha.at(i) / a.alpha.at(1), b.alpha.at(i) / b.alpha.at(1),
                  1e-12 * (1 + a.alpha.at(i) / a.alpha.at(1)));
    }
    const auto argmax = [](const std::map<int, double>& m) {
      return std::max_element(m.begin(), m.end(), [](auto& x, auto& y) {
               return x.second < y.second;
             })->first;
    };
    EXPECT_EQ(argmax(a.alpha), argmax(b.alpha));
  }
}

// ---- Shapley ----

TEST(ShapleyTest, TwoSourcesAverageBothOrders) {
  testing::Gen gen(59);
  for (int t = 0; t < 50; ++t) {
    const SourceEnsemble e = RandomEnsemble(gen, 2, 4);
    const auto phi = ShapleyValues(e, {});
    const double q12 = ConsensusQuality(Ptrs(e.sources), e.target_image_ids, {});
    const double q1 = ConsensusQuality({&e.sources[0]}, e.target_image_ids, {});
    const double q2 = ConsensusQuality({&e.sources[1]}, e.target_image_ids, {});
    EXPECT_NEAR(phi.at(1), 0.5 * ((q1 - 0.0) + (q12 - q2)), 1e-12);
    EXPECT_NEAR(phi.at(2), 0.5 * ((q2 - 0.0) + (q12 - q1)), 1e-12);
  }
}

TEST(ShapleyTest, EfficiencyOnThreeSources) {
  testing::Gen gen(60);
  for (int t = 0; t < 30; ++t) {
    const SourceEnsemble e = RandomEnsemble(gen, 3, 3);
    const auto phi = ShapleyValues(e, {});
    const double q = ConsensusQuality(Ptrs(e.sources), e.target_image_ids, {});
    EXPECT_NEAR(phi.at(1) + phi.at(2) + phi.at(3), q, 1e-12);
  }
}

TEST(ShapleyTest, TooManySourcesRejected) {
  testing::Gen gen(61);
  const SourceEnsemble e = RandomEnsemble(gen, kMaxShapleySources + 1, 1);
  EXPECT_THROW(ShapleyValues(e, {}), ConfigError);
}

// ---- weighted fusion ----

TEST(WeightedFusionTest, EqualAlphaMatchesUnweighted) {
  testing::Gen gen(62);
  for (int t = 0; t < 50; ++t) {
    const SourceEnsemble e = RandomEnsemble(gen, 3, 4);
    ContributionReport r;
    const double a = gen.Uniform(0.01, 0.4);
    r.alpha = {{1, a}, {2, a}, {3, a}};
    ConsensusSettings settings;
    settings.params.confidence_rescale =
        static_cast<ConfidenceRescale>(gen.Int(0, 2));
    const FusedDetections fused = WeightedFusion(e, r, settings);
    for (const std::string& id : e.target_image_ids) {
      std::vector<DetectionSet> per_model;
      for (const SourceDomain& s : e.sources) {
        per_model.push_back(s.DetectionsFor(id));
      }
      EXPECT_EQ(testing::Multiset(fused.at(id)),
                testing::Multiset(KnowledgeVote(per_model, {}, {},
                                                settings.params)));
    }
  }
}

TEST(WeightedFusionTest, ZeroAlphaDropsSource) {
  const ScenarioSpec spec = ReferenceScenarios().at("three_good");
  ScenarioSpec small = spec;
  small.num_images = 30;
  const Scenario scenario = Generate(small);
  const SourceEnsemble e = scenario.Ensemble();
  ContributionReport r;
  r.alpha = {{1, 0.3}, {2, 0.0}, {3, 0.2}};
  ConsensusSettings settings;
  settings.gates = spec.gates;
  settings.params.confidence_rescale = ConfidenceRescale::kWeightedSupport;
  const FusedDetections fused = WeightedFusion(e, r, settings);
  FusionParams subset_params = settings.params;
  subset_params.model_weights = {0.3, 0.2};
  for (const std::string& id : e.target_image_ids) {
    std::vector<DetectionSet> kept = {e.sources[0].DetectionsFor(id),
                                      e.sources[2].DetectionsFor(id)};
    EXPECT_EQ(testing::Multiset(fused.at(id)),
              testing::Multiset(
                  KnowledgeVote(kept, settings.gates, {}, subset_params)));
  }
}

TEST(WeightedFusionTest, MissingAlphaIsConfigError) {
  testing::Gen gen(63);
  const SourceEnsemble e = RandomEnsemble(gen, 2, 1);
  ContributionReport r;
  r.alpha = {{1, 0.5}};
  EXPECT_THROW(WeightedFusion(e, r, {}), ConfigError);
}

// Best same-class fused box for a ground-truth box, or nullptr below 0.5.
const FusedBox* MatchOf(const std::vector<FusedBox>& fused,
                        const GroundTruthBox& g) {
  const FusedBox* best = nullptr;
  double best_iou = 0.5;
  for (const FusedBox& f : fused) {
    if (f.cls != g.cls) continue;
    const double iou = Iou(f.x1, f.y1, f.x2, f.y2, g.x1, g.y1, g.x2, g.y2);
    if (iou >= best_iou) {
      best_iou = iou;
      best = &f;
    }
  }
  return best;
}

TEST(WeightedFusionTest, PoisonScenarioRaisesMatchedConfidence) {
  const ScenarioSpec spec = ReferenceScenarios().at("two_good_one_poison");
  const Scenario scenario = Generate(spec);
  const SourceEnsemble e = scenario.Ensemble();
  ConsensusSettings settings;
  settings.gates = spec.gates;
  settings.filter = spec.filter;
  settings.params.confidence_rescale = ConfidenceRescale::kWeightedSupport;
  const ContributionReport r = RunConsensusFocus(e, settings);
  const FusedDetections weighted = WeightedFusion(e, r, settings);
  int compared = 0, lower = 0;
  for (const std::string& id : e.target_image_ids) {
    std::vector<DetectionSet> per_model;
    for (const SourceDomain& s : e.sources) per_model.push_back(s.DetectionsFor(id));
    const auto plain = Wbf(per_model, settings.params);
    auto gt = scenario.ground_truth.entries.find(id);
    if (gt == scenario.ground_truth.entries.end()) continue;
    for (const GroundTruthBox& g : gt->second) {
      const FusedBox* w = MatchOf(weighted.at(id), g);
      const FusedBox* u = MatchOf(plain, g);
      if (!w || !u) continue;
      ++compared;
      if (w->confidence < u->confidence) ++lower;
    }
  }
  EXPECT_GT(compared, 100);
  EXPECT_EQ(lower, 0);
}

// ---- pseudo labels ----

TEST(PseudoLabelTest, EmptyDetectionsGiveEmptyEntries) {
  PseudoLabelProvenance p;
  p.target_image_ids = {"a", "b", "c"};
  FusedDetections fused = {{"a", {}}, {"b", {}}, {"c", {}}};
  const PseudoLabelDataset d = EmitPseudoLabels(fused, p);
  EXPECT_EQ(d.entries.size(), 3u);
  for (const auto& [id, boxes] : d.entries) EXPECT_TRUE(boxes.empty());
}

TEST(PseudoLabelTest, PassesFusedBoxesThrough) {
  FusedBox f{ClassId(1), 0.1, 0.2, 0.3, 0.4, 0.55, 2, {}};
  PseudoLabelProvenance p;
  p.target_image_ids = {"a"};
  const PseudoLabelDataset d = EmitPseudoLabels({{"a", {f}}}, p);
  ASSERT_EQ(d.entries.at("a").size(), 1u);
  EXPECT_EQ(d.entries.at("a")[0].support_count, 2);
  EXPECT_EQ(d.entries.at("a")[0].confidence, 0.55);
}

TEST(PseudoLabelTest, MissingImageThrows) {
  PseudoLabelProvenance p;
  p.target_image_ids = {"a", "b"};
  EXPECT_THROW(EmitPseudoLabels({{"a", {}}}, p), MissingImage);
}

}  // namespace
}  // namespace cfdet

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

#ifndef CFDET_CONSENSUS_H_
#define CFDET_CONSENSUS_H_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cfdet/fusion.h"
#include "cfdet/geometry.h"

namespace cfdet {

// Detections of one source model over the target images.
struct SourceDomain {
  // 1-based; every box in `detections` carries source == source_id.
  int source_id = 1;
  std::string name;
  // Training-set size M(i) of the source, in images.
  std::int64_t dataset_size = 1;
  std::map<std::string, DetectionSet> detections;

  // The image's detections, or an empty set when the source has none.
  DetectionSet DetectionsFor(const std::string& image_id) const;

  friend bool operator==(const SourceDomain&, const SourceDomain&) = default;
};

struct SourceEnsemble {
  std::vector<SourceDomain> sources;
  // Target image set, in evaluation order.
  std::vector<std::string> target_image_ids;

  // Throws ConfigError unless ids are 1..I in order and the target set is
  // non-empty.
  void Validate() const;
};

// Raw leave-one-out contributions are clamped to this before weighting.
inline constexpr double kContributionFloor = 1e-9;

struct ContributionReport {
  double q_full = 0.0;
  std::map<int, double> q_leave_one_out;
  // q_full - q_leave_one_out, unclamped.
  std::map<int, double> cf;
  std::map<int, double> cf_clamped;
  double alpha_extended = 0.0;
  std::map<int, double> alpha;
  // Exact Shapley values of the consensus quality game, when requested.
  std::optional<std::map<int, double>> shapley;

  friend bool operator==(const ContributionReport&,
                         const ContributionReport&) = default;
};

// Settings shared by every consensus computation of a run.
struct ConsensusSettings {
  ConfidenceGates gates;
  LabelSpaceFilter filter;
  FusionParams params;
  unsigned threads = 1;
};

// Consensus quality of the sources in `subset` on one image: the sum of
// support_count * confidence over the knowledge-vote output with uniform
// weights and no confidence rescaling.
double ImageConsensusQuality(const std::vector<const SourceDomain*>& subset,
                             const std::string& image_id,
                             const ConsensusSettings& settings);

// Consensus quality summed over `target_image_ids` in order. Throws
// EmptySubset for an empty subset.
double ConsensusQuality(const std::vector<const SourceDomain*>& subset,
                        const std::vector<std::string>& target_image_ids,
                        const ConsensusSettings& settings);

// Leave-one-out contributions of every source. Populates q_full,
// q_leave_one_out, cf and cf_clamped. Throws DegenerateEnsemble for a single
// source.
ContributionReport ConsensusFocusScores(const SourceEnsemble& ensemble,
                                        const ConsensusSettings& settings);

// Exact Shapley values over all 2^I subsets with Q(empty) = 0. Limited to
// kMaxShapleySources sources.
inline constexpr int kMaxShapleySources = 12;
std::map<int, double> ShapleyValues(const SourceEnsemble& ensemble,
                                    const ConsensusSettings& settings);

// Fills alpha_extended = M(T) / (M(T) + sum M(i)) and
// alpha[i] = (1 - alpha_extended) * M(i) cf_clamped[i] / sum_k M(k)
// cf_clamped[k].
ContributionReport ComputeWeights(
    ContributionReport report, const std::map<int, std::int64_t>& source_sizes,
    std::int64_t target_size);

using FusedDetections = std::map<std::string, std::vector<FusedBox>>;

// Knowledge vote over every target image with the sources weighted by
// report.alpha.
FusedDetections WeightedFusion(const SourceEnsemble& ensemble,
                               const ContributionReport& report,
                               const ConsensusSettings& settings);

// Runs scores and weights end to end.
ContributionReport RunConsensusFocus(const SourceEnsemble& ensemble,
                                     const ConsensusSettings& settings,
                                     bool with_shapley = false);

struct PseudoLabelProvenance {
  std::string algorithm;
  std::vector<std::string> source_names;
  std::vector<std::string> target_image_ids;
  ConfidenceGates gates;
  LabelSpaceFilter filter;
  FusionParams params;

  friend bool operator==(const PseudoLabelProvenance&,
                         const PseudoLabelProvenance&) = default;
};

// Target images paired with their fused boxes.
struct PseudoLabelDataset {
  FusedDetections entries;
  PseudoLabelProvenance provenance;

  friend bool operator==(const PseudoLabelDataset&,
                         const PseudoLabelDataset&) = default;
};

// Packages fused boxes for exactly provenance.target_image_ids. Throws
// MissingImage when one of them has no entry in `fused`.
PseudoLabelDataset EmitPseudoLabels(const FusedDetections& fused,
                                    PseudoLabelProvenance provenance);

}  // namespace cfdet

#endif  // CFDET_CONSENSUS_H_

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

#ifndef CFDET_FUSION_H_
#define CFDET_FUSION_H_

#include <cstddef>
#include <map>
#include <set>
#include <span>
#include <vector>

#include "cfdet/geometry.h"

namespace cfdet {

// Per-class minimum confidence a box needs to take part in fusion.
struct ConfidenceGates {
  std::map<ClassId, double> gates;
  double default_gate = 0.0;

  double GateFor(ClassId cls) const;
  // Throws ConfigError when a gate falls outside [0,1].
  void Validate() const;

  friend bool operator==(const ConfidenceGates&,
                         const ConfidenceGates&) = default;
};

// Restricts fusion to a chosen target label space.
struct LabelSpaceFilter {
  enum class Mode { kKeepAll, kKeepListed };

  Mode mode = Mode::kKeepAll;
  std::set<ClassId> classes;

  bool Admits(ClassId cls) const;
  void Validate() const;

  friend bool operator==(const LabelSpaceFilter&,
                         const LabelSpaceFilter&) = default;
};

// How a fused confidence is rescaled by cluster support.
//   kNone:            weighted mean of member confidences.
//   kSupportRatio:    times min(n_b, N) / N, N = models with positive weight.
//   kWeightedSupport: times (sum of the weights of the distinct contributing
//                     models) / (sum of all positive weights); identical to
//                     kSupportRatio when weights are uniform.
enum class ConfidenceRescale { kNone, kSupportRatio, kWeightedSupport };

inline constexpr double kDefaultWbfIouThreshold = 0.55;
inline constexpr double kDefaultNmsIouThreshold = 0.5;
inline constexpr double kDefaultSoftNmsSigma = 0.5;
inline constexpr double kDefaultScoreFloor = 0.001;

struct FusionParams {
  // Clustering threshold for WBF, suppression threshold for NMS.
  double iou_threshold = kDefaultWbfIouThreshold;
  double soft_nms_sigma = kDefaultSoftNmsSigma;
  double score_floor = kDefaultScoreFloor;
  // One weight per model; empty means uniform.
  std::vector<double> model_weights;
  ConfidenceRescale confidence_rescale = ConfidenceRescale::kNone;

  // Throws ConfigError on out-of-range values.
  void Validate() const;

  friend bool operator==(const FusionParams&, const FusionParams&) = default;
};

// A box contributed to a fused cluster.
struct FusedMember {
  // Position of the contributing model in the list handed to Wbf.
  std::size_t model = 0;
  Box box;

  friend bool operator==(const FusedMember&, const FusedMember&) = default;
};

struct FusedBox {
  ClassId cls;
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;
  // Fused confidence p_b.
  double confidence = 0.0;
  // Number of distinct models in `members` (n_b).
  int support_count = 0;
  std::vector<FusedMember> members;

  friend bool operator==(const FusedBox&, const FusedBox&) = default;
};

// Keeps boxes whose class passes `filter` and whose confidence reaches the
// class gate. Relative order is preserved.
DetectionSet ApplyGates(const DetectionSet& dets, const ConfidenceGates& gates,
                        const LabelSpaceFilter& filter);

// Greedy class-wise non-maximum suppression. Boxes overlapping an already kept
// box of the same class with iou > params.iou_threshold are discarded.
// Output is sorted by confidence, highest first.
DetectionSet Nms(const DetectionSet& dets, const FusionParams& params);

// Gaussian soft-NMS: overlapping same-class boxes have their confidence
// multiplied by exp(-iou^2 / sigma) each time a higher box is selected, and are
// dropped once below params.score_floor.
DetectionSet SoftNms(const DetectionSet& dets, const FusionParams& params);

// Weighted box fusion over one image. `per_model[m]` holds the boxes of model
// m; params.model_weights (uniform if empty) must have one entry per model.
// Boxes from zero-weight models and zero-area boxes are ignored.
std::vector<FusedBox> Wbf(std::span<const DetectionSet> per_model,
                          const FusionParams& params);

// Class-gated WBF: Wbf over ApplyGates of every model's set.
std::vector<FusedBox> KnowledgeVote(std::span<const DetectionSet> per_model,
                                    const ConfidenceGates& gates,
                                    const LabelSpaceFilter& filter,
                                    const FusionParams& params);

// Concatenates the boxes of every set (in set order) into one set labelled
// with `image_id`; used to feed NMS variants with a multi-model pool.
DetectionSet PoolDetections(std::span<const DetectionSet> per_model,
                            const std::string& image_id);

}  // namespace cfdet

#endif  // CFDET_FUSION_H_

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

#ifndef CFDET_EVALUATION_H_
#define CFDET_EVALUATION_H_

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "cfdet/fusion.h"
#include "cfdet/geometry.h"

namespace cfdet {

struct GroundTruthBox {
  ClassId cls;
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  friend bool operator==(const GroundTruthBox&,
                         const GroundTruthBox&) = default;
};

struct GroundTruth {
  std::map<std::string, std::vector<GroundTruthBox>> entries;

  std::size_t BoxCount() const;

  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

// Any detection reduced to what scoring needs.
struct ScoredBox {
  ClassId cls;
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;
  double confidence = 0.0;
};

ScoredBox ToScored(const Box& b);
ScoredBox ToScored(const FusedBox& b);

using ScoredDetections = std::map<std::string, std::vector<ScoredBox>>;

ScoredDetections ToScored(const std::map<std::string, DetectionSet>& dets);
ScoredDetections ToScored(
    const std::map<std::string, std::vector<FusedBox>>& dets);

struct MatchResult {
  // Index into the detection list handed to MatchDetections.
  std::size_t detection = 0;
  double confidence = 0.0;
  bool matched = false;
};

// Greedy matching for one image and one class. Detections are visited by
// descending confidence (ties by input order); each takes the unmatched ground
// truth box of highest iou when that iou >= iou_threshold. Results come back
// in visiting order.
std::vector<MatchResult> MatchDetections(
    const std::vector<ScoredBox>& dets,
    const std::vector<GroundTruthBox>& gt, double iou_threshold);

// 101-point interpolated average precision over a class's matches pooled from
// all images. Matches are ranked by descending confidence with ties kept in
// input order. Returns 0 when num_gt is 0.
double AveragePrecision(const std::vector<MatchResult>& matches,
                        std::size_t num_gt);

struct ClassMetrics {
  std::size_t num_gt = 0;
  std::size_t num_detections = 0;
  double precision = 0.0;
  double recall = 0.0;
  double ap50 = 0.0;
  double ap5095 = 0.0;

  friend bool operator==(const ClassMetrics&, const ClassMetrics&) = default;
};

struct AggregateMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double map50 = 0.0;
  double map5095 = 0.0;

  friend bool operator==(const AggregateMetrics&,
                         const AggregateMetrics&) = default;
};

struct MetricsReport {
  // Classes seen in ground truth or detections. Aggregates average over the
  // classes with num_gt > 0 only.
  std::map<ClassId, ClassMetrics> per_class;
  AggregateMetrics aggregate;
  double confidence_threshold = 0.0;

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

// The ten iou thresholds 0.50, 0.55, ..., 0.95.
std::vector<double> CocoIouThresholds();

// Scores detections with confidence >= confidence_threshold. P and R are taken
// at iou 0.5; precision is 0 when nothing is detected. Throws
// EmptyGroundTruth when `gt` has no boxes.
MetricsReport Evaluate(const ScoredDetections& dets, const GroundTruth& gt,
                       double confidence_threshold);

struct F1Point {
  double confidence = 0.0;
  std::map<ClassId, double> f1_per_class;
  double f1_mean = 0.0;

  friend bool operator==(const F1Point&, const F1Point&) = default;
};

struct F1Curve {
  std::vector<F1Point> points;

  // Classes in column order (those with ground truth).
  std::vector<ClassId> Classes() const;

  friend bool operator==(const F1Curve&, const F1Curve&) = default;
};

// 200 evenly spaced confidences from 0.0001 to 1.
std::vector<double> DefaultF1Grid();

// F1 = 2PR/(P+R) at iou 0.5 for every grid confidence, per ground-truth class
// and as the unweighted class mean. The grid must be non-empty and strictly
// increasing (ConfigError otherwise).
F1Curve ComputeF1Curve(const ScoredDetections& dets, const GroundTruth& gt,
                       const std::vector<double>& grid);

// Grid confidence with the highest mean F1; the lowest such confidence on
// ties.
double ArgmaxConfidence(const F1Curve& curve);

}  // namespace cfdet

#endif  // CFDET_EVALUATION_H_

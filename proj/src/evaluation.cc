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

#include "cfdet/evaluation.h"

#include <algorithm>
#include <numeric>
#include <set>
#include <tuple>

#include "cfdet/errors.h"

namespace cfdet {

std::size_t GroundTruth::BoxCount() const {
  std::size_t n = 0;
  for (const auto& [id, boxes] : entries) n += boxes.size();
  return n;
}

ScoredBox ToScored(const Box& b) {
  return {b.cls, b.x1, b.y1, b.x2, b.y2, b.confidence};
}

ScoredBox ToScored(const FusedBox& b) {
  return {b.cls, b.x1, b.y1, b.x2, b.y2, b.confidence};
}

ScoredDetections ToScored(const std::map<std::string, DetectionSet>& dets) {
  ScoredDetections out;
  for (const auto& [id, set] : dets) {
    auto& boxes = out[id];
    for (const Box& b : set.boxes) boxes.push_back(ToScored(b));
  }
  return out;
}

ScoredDetections ToScored(
    const std::map<std::string, std::vector<FusedBox>>& dets) {
  ScoredDetections out;
  for (const auto& [id, fused] : dets) {
    auto& boxes = out[id];
    for (const FusedBox& b : fused) boxes.push_back(ToScored(b));
  }
  return out;
}

std::vector<MatchResult> MatchDetections(
    const std::vector<ScoredBox>& dets,
    const std::vector<GroundTruthBox>& gt, double iou_threshold) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  // Confidence ties are broken by geometry, not input position, so the
  // outcome depends only on the set of detections.
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     const ScoredBox& x = dets[a];
                     const ScoredBox& y = dets[b];
                     if (x.confidence != y.confidence) {
                       return x.confidence > y.confidence;
                     }
                     return std::tie(x.x1, x.y1, x.x2, x.y2) <
                            std::tie(y.x1, y.y1, y.x2, y.y2);
                   });
  std::vector<bool> taken(gt.size(), false);
  std::vector<MatchResult> out;
  out.reserve(dets.size());
  for (std::size_t i : order) {
    const ScoredBox& d = dets[i];
    double best_iou = -1.0;
    std::size_t best = gt.size();
    for (std::size_t g = 0; g < gt.size(); ++g) {
      if (taken[g]) continue;
      const double overlap = Iou(d.x1, d.y1, d.x2, d.y2, gt[g].x1, gt[g].y1,
                                 gt[g].x2, gt[g].y2);
      if (overlap > best_iou) {
        best_iou = overlap;
        best = g;
      }
    }
    const bool matched = best < gt.size() && best_iou >= iou_threshold;
    if (matched) taken[best] = true;
    out.push_back({i, d.confidence, matched});
  }
  return out;
}

double AveragePrecision(const std::vector<MatchResult>& matches,
                        std::size_t num_gt) {
  if (num_gt == 0 || matches.empty()) return 0.0;
  std::vector<std::size_t> order(matches.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return matches[a].confidence > matches[b].confidence;
                   });

  const std::size_t n = order.size();
  std::vector<std::size_t> tp(n);
  std::vector<double> precision(n);
  std::size_t hits = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (matches[order[k]].matched) ++hits;
    tp[k] = hits;
    precision[k] = static_cast<double>(hits) / static_cast<double>(k + 1);
  }
  // Precision envelope: best precision at this rank or any later one.
  for (std::size_t k = n - 1; k > 0; --k) {
    precision[k - 1] = std::max(precision[k - 1], precision[k]);
  }

  // Recall threshold r/100 is reached at rank k when tp[k]*100 >= r*num_gt;
  // integer arithmetic keeps the grid comparison exact.
  double sum = 0.0;
  std::size_t k = 0;
  for (std::size_t r = 0; r <= 100; ++r) {
    while (k < n && tp[k] * 100 < r * num_gt) ++k;
    if (k == n) break;
    sum += precision[k];
  }
  return sum / 101.0;
}

std::vector<double> CocoIouThresholds() {
  std::vector<double> t;
  for (int k = 0; k < 10; ++k) t.push_back((50 + 5 * k) / 100.0);
  return t;
}

namespace {

struct ClassSlices {
  // Image ids in lexicographic order with the class's boxes on each.
  std::vector<std::vector<ScoredBox>> dets;
  std::vector<std::vector<GroundTruthBox>> gt;
  std::size_t num_gt = 0;
  std::size_t num_dets = 0;
};

std::map<ClassId, ClassSlices> SliceByClass(const ScoredDetections& dets,
                                            const GroundTruth& gt,
                                            double confidence_threshold) {
  std::set<std::string> images;
  std::set<ClassId> classes;
  for (const auto& [id, boxes] : gt.entries) {
    images.insert(id);
    for (const auto& b : boxes) classes.insert(b.cls);
  }
  for (const auto& [id, boxes] : dets) {
    images.insert(id);
    for (const auto& b : boxes) {
      if (b.confidence >= confidence_threshold) classes.insert(b.cls);
    }
  }

  std::map<ClassId, ClassSlices> slices;
  for (ClassId c : classes) {
    ClassSlices& s = slices[c];
    s.dets.resize(images.size());
    s.gt.resize(images.size());
  }
  std::size_t j = 0;
  for (const std::string& id : images) {
    if (auto it = gt.entries.find(id); it != gt.entries.end()) {
      for (const auto& b : it->second) {
        ClassSlices& s = slices[b.cls];
        s.gt[j].push_back(b);
        ++s.num_gt;
      }
    }
    if (auto it = dets.find(id); it != dets.end()) {
      for (const auto& b : it->second) {
        if (b.confidence < confidence_threshold) continue;
        ClassSlices& s = slices[b.cls];
        s.dets[j].push_back(b);
        ++s.num_dets;
      }
    }
    ++j;
  }
  return slices;
}

double SafeRatio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

double F1(double precision, double recall) {
  const double s = precision + recall;
  return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

}  // namespace

MetricsReport Evaluate(const ScoredDetections& dets, const GroundTruth& gt,
                       double confidence_threshold) {
  if (gt.BoxCount() == 0) throw EmptyGroundTruth();
  const std::vector<double> thresholds = CocoIouThresholds();

  MetricsReport report;
  report.confidence_threshold = confidence_threshold;
  for (const auto& [cls, slice] :
       SliceByClass(dets, gt, confidence_threshold)) {
    ClassMetrics m;
    m.num_gt = slice.num_gt;
    m.num_detections = slice.num_dets;
    double ap_sum = 0.0;
    for (std::size_t t = 0; t < thresholds.size(); ++t) {
      std::vector<MatchResult> pooled;
      for (std::size_t j = 0; j < slice.dets.size(); ++j) {
        auto matches =
            MatchDetections(slice.dets[j], slice.gt[j], thresholds[t]);
        pooled.insert(pooled.end(), matches.begin(), matches.end());
      }
      const double ap = AveragePrecision(pooled, slice.num_gt);
      ap_sum += ap;
      if (t == 0) {
        const auto tp = static_cast<std::size_t>(
            std::count_if(pooled.begin(), pooled.end(),
                          [](const MatchResult& r) { return r.matched; }));
        m.precision = SafeRatio(tp, slice.num_dets);
        m.recall = SafeRatio(tp, slice.num_gt);
        m.ap50 = ap;
      }
    }
    m.ap5095 = ap_sum / static_cast<double>(thresholds.size());
    report.per_class[cls] = m;
  }

  std::size_t counted = 0;
  AggregateMetrics& agg = report.aggregate;
  for (const auto& [cls, m] : report.per_class) {
    if (m.num_gt == 0) continue;
    ++counted;
    agg.precision += m.precision;
    agg.recall += m.recall;
    agg.map50 += m.ap50;
    agg.map5095 += m.ap5095;
  }
  const double n = static_cast<double>(counted);
  agg.precision /= n;
  agg.recall /= n;
  agg.map50 /= n;
  agg.map5095 /= n;
  return report;
}

std::vector<ClassId> F1Curve::Classes() const {
  std::vector<ClassId> out;
  if (points.empty()) return out;
  for (const auto& [cls, f1] : points.front().f1_per_class) out.push_back(cls);
  return out;
}

std::vector<double> DefaultF1Grid() {
  constexpr int kPoints = 200;
  constexpr double kLo = 0.0001;
  constexpr double kHi = 1.0;
  std::vector<double> grid(kPoints);
  for (int k = 0; k < kPoints; ++k) {
    grid[k] = kLo + (kHi - kLo) * k / (kPoints - 1);
  }
  grid.back() = kHi;
  return grid;
}

F1Curve ComputeF1Curve(const ScoredDetections& dets, const GroundTruth& gt,
                       const std::vector<double>& grid) {
  if (grid.empty()) throw ConfigError("F1 grid is empty");
  for (std::size_t k = 1; k < grid.size(); ++k) {
    if (!(grid[k] > grid[k - 1])) {
      throw ConfigError("F1 grid must be strictly increasing");
    }
  }

  // Matching at the lowest grid confidence once is enough: greedy matching in
  // descending confidence order is unaffected by dropping the tail.
  struct ClassCurve {
    std::size_t num_gt = 0;
    std::vector<MatchResult> matches;  // descending confidence
  };
  std::map<ClassId, ClassCurve> curves;
  for (const auto& [cls, slice] : SliceByClass(dets, gt, grid.front())) {
    if (slice.num_gt == 0) continue;
    ClassCurve& c = curves[cls];
    c.num_gt = slice.num_gt;
    for (std::size_t j = 0; j < slice.dets.size(); ++j) {
      auto m = MatchDetections(slice.dets[j], slice.gt[j], 0.5);
      c.matches.insert(c.matches.end(), m.begin(), m.end());
    }
    std::stable_sort(c.matches.begin(), c.matches.end(),
                     [](const MatchResult& a, const MatchResult& b) {
                       return a.confidence > b.confidence;
                     });
  }

  F1Curve curve;
  curve.points.reserve(grid.size());
  for (double c : grid) {
    F1Point p;
    p.confidence = c;
    double sum = 0.0;
    for (const auto& [cls, cc] : curves) {
      std::size_t kept = 0;
      std::size_t tp = 0;
      for (const MatchResult& r : cc.matches) {
        if (r.confidence < c) break;
        ++kept;
        if (r.matched) ++tp;
      }
      const double f1 = F1(SafeRatio(tp, kept), SafeRatio(tp, cc.num_gt));
      p.f1_per_class[cls] = f1;
      sum += f1;
    }
    p.f1_mean = curves.empty() ? 0.0 : sum / static_cast<double>(curves.size());
    curve.points.push_back(std::move(p));
  }
  return curve;
}

double ArgmaxConfidence(const F1Curve& curve) {
  if (curve.points.empty()) return 0.0;
  const F1Point* best = &curve.points.front();
  for (const F1Point& p : curve.points) {
    if (p.f1_mean > best->f1_mean) best = &p;
  }
  return best->confidence;
}

}  // namespace cfdet

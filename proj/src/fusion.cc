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

#include "cfdet/fusion.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <string>

#include "cfdet/errors.h"

namespace cfdet {

double ConfidenceGates::GateFor(ClassId cls) const {
  auto it = gates.find(cls);
  return it == gates.end() ? default_gate : it->second;
}

void ConfidenceGates::Validate() const {
  auto in_unit = [](double g) { return g >= 0.0 && g <= 1.0; };
  if (!in_unit(default_gate)) {
    throw ConfigError("default gate must lie in [0,1]");
  }
  for (const auto& [cls, gate] : gates) {
    if (!in_unit(gate)) {
      throw ConfigError("gate for class " + std::to_string(cls.value) +
                        " must lie in [0,1]");
    }
  }
}

bool LabelSpaceFilter::Admits(ClassId cls) const {
  return mode == Mode::kKeepAll || classes.contains(cls);
}

void LabelSpaceFilter::Validate() const {
  if (mode == Mode::kKeepListed && classes.empty()) {
    throw ConfigError("keep_listed label filter needs at least one class");
  }
}

void FusionParams::Validate() const {
  if (!(iou_threshold > 0.0 && iou_threshold < 1.0)) {
    throw ConfigError("iou_threshold must lie in (0,1)");
  }
  if (!(soft_nms_sigma > 0.0) || !std::isfinite(soft_nms_sigma)) {
    throw ConfigError("soft_nms_sigma must be positive");
  }
  if (!(score_floor >= 0.0 && score_floor <= 1.0)) {
    throw ConfigError("score_floor must lie in [0,1]");
  }
  bool any_positive = model_weights.empty();
  for (double w : model_weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw ConfigError("model weights must be finite and non-negative");
    }
    any_positive = any_positive || w > 0.0;
  }
  if (!any_positive) {
    throw ConfigError("at least one model weight must be positive");
  }
}

DetectionSet ApplyGates(const DetectionSet& dets, const ConfidenceGates& gates,
                        const LabelSpaceFilter& filter) {
  DetectionSet out{dets.image_id, {}};
  out.boxes.reserve(dets.boxes.size());
  for (const Box& b : dets.boxes) {
    if (filter.Admits(b.cls) && b.confidence >= gates.GateFor(b.cls)) {
      out.boxes.push_back(b);
    }
  }
  return out;
}

DetectionSet PoolDetections(std::span<const DetectionSet> per_model,
                            const std::string& image_id) {
  DetectionSet out{image_id, {}};
  for (const DetectionSet& set : per_model) {
    out.boxes.insert(out.boxes.end(), set.boxes.begin(), set.boxes.end());
  }
  return out;
}

namespace {

// Confidence descending; ties by source index, then ingestion order.
struct RankedBox {
  Box box;
  std::size_t order = 0;
};

bool RanksBefore(double score_a, const RankedBox& a, double score_b,
                 const RankedBox& b) {
  if (score_a != score_b) return score_a > score_b;
  if (a.box.source != b.box.source) return a.box.source < b.box.source;
  return a.order < b.order;
}

std::map<ClassId, std::vector<RankedBox>> GroupByClass(
    const DetectionSet& dets) {
  std::map<ClassId, std::vector<RankedBox>> groups;
  for (std::size_t i = 0; i < dets.boxes.size(); ++i) {
    const Box& b = dets.boxes[i];
    if (b.IsDegenerate()) continue;
    groups[b.cls].push_back({b, i});
  }
  return groups;
}

DetectionSet SortedOutput(const std::string& image_id,
                          std::vector<RankedBox> kept) {
  std::sort(kept.begin(), kept.end(),
            [](const RankedBox& a, const RankedBox& b) {
              return RanksBefore(a.box.confidence, a, b.box.confidence, b);
            });
  DetectionSet out{image_id, {}};
  out.boxes.reserve(kept.size());
  for (const RankedBox& r : kept) out.boxes.push_back(r.box);
  return out;
}

}  // namespace

DetectionSet Nms(const DetectionSet& dets, const FusionParams& params) {
  std::vector<RankedBox> kept;
  for (auto& [cls, group] : GroupByClass(dets)) {
    std::sort(group.begin(), group.end(),
              [](const RankedBox& a, const RankedBox& b) {
                return RanksBefore(a.box.confidence, a, b.box.confidence, b);
              });
    std::vector<RankedBox> kept_in_class;
    for (const RankedBox& candidate : group) {
      bool suppressed = false;
      for (const RankedBox& k : kept_in_class) {
        if (Iou(k.box, candidate.box) > params.iou_threshold) {
          suppressed = true;
          break;
        }
      }
      if (!suppressed) kept_in_class.push_back(candidate);
    }
    kept.insert(kept.end(), kept_in_class.begin(), kept_in_class.end());
  }
  return SortedOutput(dets.image_id, std::move(kept));
}

DetectionSet SoftNms(const DetectionSet& dets, const FusionParams& params) {
  std::vector<RankedBox> kept;
  for (auto& [cls, group] : GroupByClass(dets)) {
    std::vector<RankedBox> pending;
    for (const RankedBox& r : group) {
      if (r.box.confidence >= params.score_floor) pending.push_back(r);
    }
    while (!pending.empty()) {
      auto best = std::min_element(
          pending.begin(), pending.end(),
          [](const RankedBox& a, const RankedBox& b) {
            return RanksBefore(a.box.confidence, a, b.box.confidence, b);
          });
      const RankedBox selected = *best;
      pending.erase(best);
      kept.push_back(selected);

      std::vector<RankedBox> survivors;
      survivors.reserve(pending.size());
      for (RankedBox r : pending) {
        const double overlap = Iou(selected.box, r.box);
        r.box.confidence *=
            std::exp(-(overlap * overlap) / params.soft_nms_sigma);
        if (r.box.confidence >= params.score_floor) survivors.push_back(r);
      }
      pending = std::move(survivors);
    }
  }
  return SortedOutput(dets.image_id, std::move(kept));
}

namespace {

struct WeightedEntry {
  Box box;
  std::size_t model = 0;
  std::size_t order = 0;
  double weight = 0.0;
  double score = 0.0;  // confidence * weight, the processing key
};

// Summing in sorted order keeps the result independent of model order.
double SortedSum(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum;
}

class Cluster {
 public:
  void Add(const WeightedEntry& e) {
    members_.push_back({e.model, e.box});
    const double cw = e.box.confidence * e.weight;
    sum_cw_ += cw;
    sum_w_ += e.weight;
    sum_cw_coords_[0] += cw * e.box.x1;
    sum_cw_coords_[1] += cw * e.box.y1;
    sum_cw_coords_[2] += cw * e.box.x2;
    sum_cw_coords_[3] += cw * e.box.y2;
    sum_w_coords_[0] += e.weight * e.box.x1;
    sum_w_coords_[1] += e.weight * e.box.y1;
    sum_w_coords_[2] += e.weight * e.box.x2;
    sum_w_coords_[3] += e.weight * e.box.y2;
    if (members_.size() == 1) {
      lo_ = {e.box.x1, e.box.y1, e.box.x2, e.box.y2, e.box.confidence};
      hi_ = lo_;
    } else {
      const std::array<double, 5> v = {e.box.x1, e.box.y1, e.box.x2, e.box.y2,
                                       e.box.confidence};
      for (int k = 0; k < 5; ++k) {
        lo_[k] = std::min(lo_[k], v[k]);
        hi_[k] = std::max(hi_[k], v[k]);
      }
    }
    Refresh();
  }

  const FusedBox& fused() const { return fused_; }
  FusedBox& fused() { return fused_; }

  std::vector<FusedMember> TakeMembers() { return std::move(members_); }

 private:
  // Weighted means are clamped to the member range so a singleton cluster
  // reproduces its box exactly.
  void Refresh() {
    const bool by_confidence = sum_cw_ > 0.0;
    const auto& sums = by_confidence ? sum_cw_coords_ : sum_w_coords_;
    const double denom = by_confidence ? sum_cw_ : sum_w_;
    double* coords[4] = {&fused_.x1, &fused_.y1, &fused_.x2, &fused_.y2};
    for (int k = 0; k < 4; ++k) {
      *coords[k] = std::clamp(sums[k] / denom, lo_[k], hi_[k]);
    }
    fused_.confidence = std::clamp(sum_cw_ / sum_w_, lo_[4], hi_[4]);
  }

  std::vector<FusedMember> members_;
  FusedBox fused_;
  double sum_cw_ = 0.0;
  double sum_w_ = 0.0;
  std::array<double, 4> sum_cw_coords_{};
  std::array<double, 4> sum_w_coords_{};
  std::array<double, 5> lo_{};
  std::array<double, 5> hi_{};
};

}  // namespace

std::vector<FusedBox> Wbf(std::span<const DetectionSet> per_model,
                          const FusionParams& params) {
  std::vector<double> weights = params.model_weights;
  if (weights.empty()) weights.assign(per_model.size(), 1.0);
  if (weights.size() != per_model.size()) {
    throw WeightArityMismatch(weights.size(), per_model.size());
  }
  double max_weight = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw ConfigError("model weights must be finite and non-negative");
    }
    max_weight = std::max(max_weight, w);
  }
  if (per_model.empty()) return {};
  if (max_weight <= 0.0) {
    throw ConfigError("at least one model weight must be positive");
  }
  // Only weight ratios matter; normalizing by the largest weight makes equal
  // weights exactly 1 whatever their common value.
  int positive_models = 0;
  for (double& w : weights) {
    w /= max_weight;
    if (w > 0.0) ++positive_models;
  }
  const double total_weight = SortedSum(weights);

  std::map<ClassId, std::vector<WeightedEntry>> by_class;
  for (std::size_t m = 0; m < per_model.size(); ++m) {
    if (weights[m] <= 0.0) continue;
    const auto& boxes = per_model[m].boxes;
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      if (boxes[i].IsDegenerate()) continue;
      by_class[boxes[i].cls].push_back(
          {boxes[i], m, i, weights[m], boxes[i].confidence * weights[m]});
    }
  }

  std::vector<FusedBox> out;
  for (auto& [cls, entries] : by_class) {
    std::sort(entries.begin(), entries.end(),
              [](const WeightedEntry& a, const WeightedEntry& b) {
                if (a.score != b.score) return a.score > b.score;
                if (a.box.source != b.box.source) {
                  return a.box.source < b.box.source;
                }
                if (a.model != b.model) return a.model < b.model;
                return a.order < b.order;
              });

    std::vector<Cluster> clusters;
    for (const WeightedEntry& e : entries) {
      Cluster* target = nullptr;
      for (Cluster& c : clusters) {
        const FusedBox& f = c.fused();
        if (Iou(f.x1, f.y1, f.x2, f.y2, e.box.x1, e.box.y1, e.box.x2,
                e.box.y2) > params.iou_threshold) {
          target = &c;
          break;
        }
      }
      if (target == nullptr) {
        clusters.emplace_back();
        target = &clusters.back();
      }
      target->Add(e);
    }

    for (Cluster& c : clusters) {
      FusedBox fused = c.fused();
      fused.cls = cls;
      fused.members = c.TakeMembers();
      std::set<std::size_t> models;
      for (const FusedMember& m : fused.members) models.insert(m.model);
      fused.support_count = static_cast<int>(models.size());
      if (params.confidence_rescale == ConfidenceRescale::kSupportRatio) {
        const int n = std::min(fused.support_count, positive_models);
        fused.confidence *= static_cast<double>(n) / positive_models;
      } else if (params.confidence_rescale ==
                 ConfidenceRescale::kWeightedSupport) {
        std::vector<double> support;
        for (std::size_t m : models) support.push_back(weights[m]);
        const double support_weight = SortedSum(std::move(support));
        fused.confidence *= std::min(1.0, support_weight / total_weight);
      }
      out.push_back(std::move(fused));
    }
  }

  std::stable_sort(out.begin(), out.end(),
                   [](const FusedBox& a, const FusedBox& b) {
                     return a.confidence > b.confidence;
                   });
  return out;
}

std::vector<FusedBox> KnowledgeVote(std::span<const DetectionSet> per_model,
                                    const ConfidenceGates& gates,
                                    const LabelSpaceFilter& filter,
                                    const FusionParams& params) {
  std::vector<DetectionSet> gated;
  gated.reserve(per_model.size());
  for (const DetectionSet& set : per_model) {
    gated.push_back(ApplyGates(set, gates, filter));
  }
  return Wbf(gated, params);
}

}  // namespace cfdet

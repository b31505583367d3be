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

#include "cfdet/consensus.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>

#include "cfdet/errors.h"
#include "cfdet/parallel.h"

namespace cfdet {

DetectionSet SourceDomain::DetectionsFor(const std::string& image_id) const {
  auto it = detections.find(image_id);
  if (it == detections.end()) return DetectionSet{image_id, {}};
  return it->second;
}

void SourceEnsemble::Validate() const {
  if (sources.empty()) throw ConfigError("ensemble has no sources");
  for (std::size_t i = 0; i < sources.size(); ++i) {
    if (sources[i].source_id != static_cast<int>(i) + 1) {
      throw ConfigError("source ids must be contiguous from 1");
    }
    if (sources[i].dataset_size < 1) {
      throw ConfigError("source '" + sources[i].name +
                        "' must have dataset_size >= 1");
    }
  }
  if (target_image_ids.empty()) throw ConfigError("target image set is empty");
}

namespace {

ConsensusSettings QualitySettings(const ConsensusSettings& settings,
                                  std::size_t models) {
  ConsensusSettings q = settings;
  q.params.model_weights.assign(models, 1.0);
  q.params.confidence_rescale = ConfidenceRescale::kNone;
  return q;
}

double QualityOfFused(const std::vector<FusedBox>& fused) {
  double q = 0.0;
  for (const FusedBox& f : fused) q += f.support_count * f.confidence;
  return q;
}

double ImageQualityPrepared(const std::vector<const SourceDomain*>& subset,
                            const std::string& image_id,
                            const ConsensusSettings& prepared) {
  std::vector<DetectionSet> per_model;
  per_model.reserve(subset.size());
  for (const SourceDomain* s : subset) {
    per_model.push_back(s->DetectionsFor(image_id));
  }
  return QualityOfFused(KnowledgeVote(per_model, prepared.gates,
                                      prepared.filter, prepared.params));
}

// Q for each subset, evaluated in parallel over (subset, image) pairs and
// summed per subset in image order.
std::vector<double> QualitiesOf(
    const std::vector<std::vector<const SourceDomain*>>& subsets,
    const std::vector<std::string>& image_ids,
    const ConsensusSettings& settings) {
  const std::size_t images = image_ids.size();
  std::vector<ConsensusSettings> prepared;
  prepared.reserve(subsets.size());
  for (const auto& subset : subsets) {
    if (subset.empty()) throw EmptySubset();
    prepared.push_back(QualitySettings(settings, subset.size()));
  }
  std::vector<double> per_task(subsets.size() * images, 0.0);
  ParallelFor(per_task.size(), settings.threads, [&](std::size_t t) {
    const std::size_t s = t / images;
    per_task[t] = ImageQualityPrepared(subsets[s], image_ids[t % images],
                                       prepared[s]);
  });
  std::vector<double> totals(subsets.size(), 0.0);
  for (std::size_t s = 0; s < subsets.size(); ++s) {
    double q = 0.0;
    for (std::size_t j = 0; j < images; ++j) q += per_task[s * images + j];
    totals[s] = q;
  }
  return totals;
}

}  // namespace

double ImageConsensusQuality(const std::vector<const SourceDomain*>& subset,
                             const std::string& image_id,
                             const ConsensusSettings& settings) {
  if (subset.empty()) throw EmptySubset();
  return ImageQualityPrepared(subset, image_id,
                              QualitySettings(settings, subset.size()));
}

double ConsensusQuality(const std::vector<const SourceDomain*>& subset,
                        const std::vector<std::string>& target_image_ids,
                        const ConsensusSettings& settings) {
  if (subset.empty()) throw EmptySubset();
  return QualitiesOf({subset}, target_image_ids, settings).front();
}

ContributionReport ConsensusFocusScores(const SourceEnsemble& ensemble,
                                        const ConsensusSettings& settings) {
  ensemble.Validate();
  if (ensemble.sources.size() < 2) throw DegenerateEnsemble();

  std::vector<std::vector<const SourceDomain*>> subsets;
  std::vector<const SourceDomain*> all;
  for (const SourceDomain& s : ensemble.sources) all.push_back(&s);
  subsets.push_back(all);
  for (std::size_t left_out = 0; left_out < all.size(); ++left_out) {
    std::vector<const SourceDomain*> rest;
    for (std::size_t k = 0; k < all.size(); ++k) {
      if (k != left_out) rest.push_back(all[k]);
    }
    subsets.push_back(std::move(rest));
  }

  const std::vector<double> q =
      QualitiesOf(subsets, ensemble.target_image_ids, settings);
  ContributionReport report;
  report.q_full = q[0];
  for (std::size_t i = 0; i < all.size(); ++i) {
    const int id = all[i]->source_id;
    report.q_leave_one_out[id] = q[i + 1];
    report.cf[id] = report.q_full - q[i + 1];
    report.cf_clamped[id] = std::max(report.cf[id], kContributionFloor);
  }
  return report;
}

std::map<int, double> ShapleyValues(const SourceEnsemble& ensemble,
                                    const ConsensusSettings& settings) {
  ensemble.Validate();
  const int n = static_cast<int>(ensemble.sources.size());
  if (n > kMaxShapleySources) {
    throw ConfigError("exact Shapley enumeration supports at most " +
                      std::to_string(kMaxShapleySources) + " sources");
  }
  const std::uint32_t full = (1u << n);
  std::vector<std::vector<const SourceDomain*>> subsets;
  subsets.reserve(full - 1);
  for (std::uint32_t mask = 1; mask < full; ++mask) {
    std::vector<const SourceDomain*> subset;
    for (int k = 0; k < n; ++k) {
      if (mask & (1u << k)) subset.push_back(&ensemble.sources[k]);
    }
    subsets.push_back(std::move(subset));
  }
  const std::vector<double> q_nonempty =
      QualitiesOf(subsets, ensemble.target_image_ids, settings);
  auto quality = [&](std::uint32_t mask) {
    return mask == 0 ? 0.0 : q_nonempty[mask - 1];
  };

  std::vector<double> factorial(n + 1, 1.0);
  for (int k = 1; k <= n; ++k) factorial[k] = factorial[k - 1] * k;

  std::map<int, double> values;
  for (int i = 0; i < n; ++i) {
    const std::uint32_t bit = 1u << i;
    double phi = 0.0;
    for (std::uint32_t mask = 0; mask < full; ++mask) {
      if (mask & bit) continue;
      const int size = std::popcount(mask);
      const double weight =
          factorial[size] * factorial[n - size - 1] / factorial[n];
      phi += weight * (quality(mask | bit) - quality(mask));
    }
    values[ensemble.sources[i].source_id] = phi;
  }
  return values;
}

ContributionReport ComputeWeights(
    ContributionReport report, const std::map<int, std::int64_t>& source_sizes,
    std::int64_t target_size) {
  if (target_size < 1) throw ConfigError("target size must be >= 1");
  double total_size = 0.0;
  double total_contribution = 0.0;
  for (const auto& [id, cf] : report.cf_clamped) {
    auto it = source_sizes.find(id);
    if (it == source_sizes.end()) {
      throw ConfigError("no dataset size for source " + std::to_string(id));
    }
    if (it->second < 1) {
      throw ConfigError("dataset size of source " + std::to_string(id) +
                        " must be >= 1");
    }
    total_size += static_cast<double>(it->second);
    total_contribution += static_cast<double>(it->second) * cf;
  }
  if (!(total_contribution > 0.0)) throw AllZeroContribution();

  const double target = static_cast<double>(target_size);
  report.alpha_extended = target / (target + total_size);
  const double remaining = 1.0 - report.alpha_extended;
  report.alpha.clear();
  for (const auto& [id, cf] : report.cf_clamped) {
    const double size = static_cast<double>(source_sizes.at(id));
    report.alpha[id] = remaining * (size * cf) / total_contribution;
  }
  return report;
}

FusedDetections WeightedFusion(const SourceEnsemble& ensemble,
                               const ContributionReport& report,
                               const ConsensusSettings& settings) {
  FusionParams params = settings.params;
  params.model_weights.clear();
  for (const SourceDomain& s : ensemble.sources) {
    auto it = report.alpha.find(s.source_id);
    if (it == report.alpha.end()) {
      throw ConfigError("report has no alpha for source " +
                        std::to_string(s.source_id));
    }
    params.model_weights.push_back(it->second);
  }

  const auto& ids = ensemble.target_image_ids;
  std::vector<std::vector<FusedBox>> per_image(ids.size());
  ParallelFor(ids.size(), settings.threads, [&](std::size_t j) {
    std::vector<DetectionSet> per_model;
    per_model.reserve(ensemble.sources.size());
    for (const SourceDomain& s : ensemble.sources) {
      per_model.push_back(s.DetectionsFor(ids[j]));
    }
    per_image[j] =
        KnowledgeVote(per_model, settings.gates, settings.filter, params);
  });
  FusedDetections out;
  for (std::size_t j = 0; j < ids.size(); ++j) {
    out[ids[j]] = std::move(per_image[j]);
  }
  return out;
}

ContributionReport RunConsensusFocus(const SourceEnsemble& ensemble,
                                     const ConsensusSettings& settings,
                                     bool with_shapley) {
  ContributionReport report = ConsensusFocusScores(ensemble, settings);
  std::map<int, std::int64_t> sizes;
  for (const SourceDomain& s : ensemble.sources) {
    sizes[s.source_id] = s.dataset_size;
  }
  report = ComputeWeights(std::move(report), sizes,
                          static_cast<std::int64_t>(
                              ensemble.target_image_ids.size()));
  if (with_shapley) report.shapley = ShapleyValues(ensemble, settings);
  return report;
}

PseudoLabelDataset EmitPseudoLabels(const FusedDetections& fused,
                                    PseudoLabelProvenance provenance) {
  PseudoLabelDataset dataset;
  for (const std::string& id : provenance.target_image_ids) {
    auto it = fused.find(id);
    if (it == fused.end()) throw MissingImage(id);
    dataset.entries[id] = it->second;
  }
  dataset.provenance = std::move(provenance);
  return dataset;
}

}  // namespace cfdet

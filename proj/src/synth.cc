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

#include "cfdet/synth.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <set>

#include "cfdet/errors.h"

namespace cfdet {

double ScenarioRng::Uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double ScenarioRng::Normal() {
  const double u1 = 1.0 - Uniform();  // (0, 1]
  const double u2 = Uniform();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

int ScenarioRng::Poisson(double rate) {
  const double limit = std::exp(-rate);
  int k = 0;
  double p = 1.0;
  do {
    ++k;
    p *= Uniform();
  } while (p > limit);
  return k - 1;
}

std::size_t ScenarioRng::Categorical(const std::vector<double>& weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  const double u = Uniform() * total;
  double acc = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    acc += weights[k];
    if (u < acc) return k;
  }
  return weights.size() - 1;
}

int ScenarioRng::UniformInt(int lo, int hi) {
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  return lo + static_cast<int>(Uniform() * static_cast<double>(span));
}

void ScenarioSpec::Validate() const {
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (num_images < 1) throw SpecError("num_images must be >= 1");
  if (classes.empty()) throw SpecError("at least one class is required");
  for (const ScenarioClass& c : classes) {
    if (!(c.frequency > 0.0)) throw SpecError("class frequencies must be > 0");
  }
  if (min_objects < 0 || max_objects < min_objects) {
    throw SpecError("object count range is invalid");
  }
  if (!(min_box_size > 0.0 && min_box_size <= max_box_size &&
        max_box_size <= 1.0)) {
    throw SpecError("box size range must satisfy 0 < min <= max <= 1");
  }
  if (sources.empty()) throw SpecError("at least one source is required");
  std::set<std::string> names;
  for (const SimulatedSource& s : sources) {
    if (!names.insert(s.name).second) {
      throw SpecError("duplicate source name '" + s.name + "'");
    }
    if (s.dataset_size < 1) throw SpecError("dataset_size must be >= 1");
    if (!s.poisonous && s.detect_prob.size() != classes.size()) {
      throw SpecError("source '" + s.name +
                      "' needs one detect_prob per class");
    }
    for (double p : s.detect_prob) {
      if (!prob(p)) throw SpecError("detect_prob must lie in [0,1]");
    }
    if (!(s.coord_noise >= 0.0) || !(s.true_conf_stddev >= 0.0)) {
      throw SpecError("standard deviations must be >= 0");
    }
    if (!prob(s.true_conf_mean)) {
      throw SpecError("true_conf_mean must lie in [0,1]");
    }
    if (!(s.fp_rate >= 0.0) || !(s.poison_rate >= 0.0)) {
      throw SpecError("rates must be >= 0");
    }
    if (!prob(s.fp_conf_lo) || !prob(s.fp_conf_hi) ||
        s.fp_conf_lo > s.fp_conf_hi) {
      throw SpecError("false-positive confidence range must lie in [0,1]");
    }
  }
  gates.Validate();
  filter.Validate();
}

namespace {

struct Rect {
  double x1, y1, x2, y2;
};

Rect RandomRect(ScenarioRng& rng, double min_size, double max_size) {
  const double w = rng.Uniform(min_size, max_size);
  const double h = rng.Uniform(min_size, max_size);
  const double x1 = rng.Uniform(0.0, 1.0 - w);
  const double y1 = rng.Uniform(0.0, 1.0 - h);
  return {x1, y1, std::min(1.0, x1 + w), std::min(1.0, y1 + h)};
}

double Clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace

Scenario Generate(const ScenarioSpec& spec) {
  spec.Validate();
  ScenarioRng rng(spec.seed);
  Scenario out;

  std::vector<double> frequencies;
  for (const ScenarioClass& c : spec.classes) {
    frequencies.push_back(c.frequency);
  }

  for (int j = 0; j < spec.num_images; ++j) {
    char id[32];
    std::snprintf(id, sizeof(id), "img_%05d", j);
    out.image_ids.emplace_back(id);
  }

  for (const std::string& id : out.image_ids) {
    auto& boxes = out.ground_truth.entries[id];
    const int n = rng.UniformInt(spec.min_objects, spec.max_objects);
    for (int k = 0; k < n; ++k) {
      const auto cls = static_cast<std::uint32_t>(rng.Categorical(frequencies));
      const Rect r = RandomRect(rng, spec.min_box_size, spec.max_box_size);
      boxes.push_back({ClassId(cls), r.x1, r.y1, r.x2, r.y2});
    }
  }

  for (std::size_t s = 0; s < spec.sources.size(); ++s) {
    const SimulatedSource& src = spec.sources[s];
    SourceDomain domain;
    domain.source_id = static_cast<int>(s) + 1;
    domain.name = src.name;
    domain.dataset_size = src.dataset_size;

    for (const std::string& id : out.image_ids) {
      std::vector<Box> boxes;
      auto emit = [&](std::uint32_t cls, Rect r, double conf) {
        boxes.push_back({ClassId(cls), r.x1, r.y1, r.x2, r.y2, conf,
                         domain.source_id});
      };

      if (src.poisonous) {
        const int n = rng.Poisson(src.poison_rate);
        for (int k = 0; k < n; ++k) {
          const auto cls =
              static_cast<std::uint32_t>(rng.Categorical(frequencies));
          const Rect r = RandomRect(rng, spec.min_box_size, spec.max_box_size);
          emit(cls, r, rng.Uniform());
        }
      } else {
        for (const GroundTruthBox& g : out.ground_truth.entries.at(id)) {
          if (!(rng.Uniform() < src.detect_prob[g.cls.value])) continue;
          double x1 = Clamp01(g.x1 + src.coord_noise * rng.Normal());
          double y1 = Clamp01(g.y1 + src.coord_noise * rng.Normal());
          double x2 = Clamp01(g.x2 + src.coord_noise * rng.Normal());
          double y2 = Clamp01(g.y2 + src.coord_noise * rng.Normal());
          if (x1 > x2) std::swap(x1, x2);
          if (y1 > y2) std::swap(y1, y2);
          const double conf = Clamp01(src.true_conf_mean +
                                      src.true_conf_stddev * rng.Normal());
          emit(g.cls.value, {x1, y1, x2, y2}, conf);
        }
        const int fps = rng.Poisson(src.fp_rate);
        for (int k = 0; k < fps; ++k) {
          const auto cls =
              static_cast<std::uint32_t>(rng.Categorical(frequencies));
          const Rect r = RandomRect(rng, spec.min_box_size, spec.max_box_size);
          emit(cls, r, rng.Uniform(src.fp_conf_lo, src.fp_conf_hi));
        }
      }
      if (!boxes.empty()) domain.detections[id] = {id, std::move(boxes)};
    }
    out.sources.push_back(std::move(domain));
  }
  return out;
}

namespace {

std::vector<ScenarioClass> DrivingClasses() {
  // Per-class sample counts of a driving target set.
  return {{"pedestrian", 1333.0},
          {"motorized_vehicle", 4556.0},
          {"non_motorized_vehicle", 234.0}};
}

SimulatedSource GoodSource(std::string name, std::int64_t size,
                           std::vector<double> detect_prob, double noise,
                           double conf_mean) {
  SimulatedSource s;
  s.name = std::move(name);
  s.dataset_size = size;
  s.detect_prob = std::move(detect_prob);
  s.coord_noise = noise;
  s.true_conf_mean = conf_mean;
  s.true_conf_stddev = 0.1;
  s.fp_rate = 0.6;
  return s;
}

SimulatedSource PoisonSource(std::string name, std::int64_t size) {
  SimulatedSource s;
  s.name = std::move(name);
  s.dataset_size = size;
  s.poisonous = true;
  s.poison_rate = 3.0;
  return s;
}

}  // namespace

std::map<std::string, ScenarioSpec> ReferenceScenarios() {
  std::map<std::string, ScenarioSpec> out;

  ScenarioSpec three_good;
  three_good.seed = 20240311;
  three_good.num_images = 200;
  three_good.classes = DrivingClasses();
  three_good.min_objects = 2;
  three_good.max_objects = 6;
  three_good.sources = {
      GoodSource("source_a", 900, {0.90, 0.92, 0.80}, 0.010, 0.78),
      GoodSource("source_b", 700, {0.85, 0.90, 0.75}, 0.015, 0.74),
      GoodSource("source_c", 500, {0.80, 0.88, 0.70}, 0.020, 0.70)};
  out["three_good"] = three_good;

  ScenarioSpec poisoned;
  poisoned.seed = 20240312;
  poisoned.num_images = 200;
  poisoned.classes = DrivingClasses();
  poisoned.min_objects = 2;
  poisoned.max_objects = 6;
  poisoned.sources = {
      GoodSource("source_a", 800, {0.90, 0.92, 0.80}, 0.010, 0.78),
      GoodSource("source_b", 800, {0.85, 0.90, 0.75}, 0.015, 0.74),
      PoisonSource("source_poison", 800)};
  out["two_good_one_poison"] = poisoned;

  ScenarioSpec long_tail;
  long_tail.seed = 20240313;
  long_tail.num_images = 200;
  long_tail.classes = DrivingClasses();
  long_tail.min_objects = 2;
  long_tail.max_objects = 6;
  long_tail.sources = {
      GoodSource("source_a", 900, {0.85, 0.95, 0.60}, 0.010, 0.82),
      GoodSource("source_b", 600, {0.80, 0.93, 0.55}, 0.015, 0.80),
      GoodSource("source_c", 300, {0.75, 0.90, 0.50}, 0.020, 0.78)};
  // Tolerant gate for the tail class, strict for the rest.
  long_tail.gates.default_gate = 0.8;
  long_tail.gates.gates[ClassId(2)] = 0.5;
  out["long_tail_gated"] = long_tail;

  return out;
}

}  // namespace cfdet

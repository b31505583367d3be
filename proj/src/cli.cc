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

#include "cfdet/cli.h"

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "cfdet/errors.h"
#include "cfdet/evaluation.h"
#include "cfdet/fusion.h"
#include "cfdet/parallel.h"
#include "json.hpp"

namespace cfdet::cli {

namespace fs = std::filesystem;

namespace {

constexpr char kConsensusAlgorithm[] = "consensus-wbf";
constexpr double kDefaultConfidenceThreshold = 0.0001;

bool IsNmsFamily(const std::string& algorithm) {
  return algorithm == "nms" || algorithm == "soft-nms";
}

struct CommonOptions {
  std::string manifest;
  std::string out = ".";
  std::optional<double> iou_threshold;
  std::vector<std::string> overrides;
  unsigned threads = 1;
};

// Applies `--set key=value` overrides to a loaded manifest.
void ApplyOverrides(EnsembleManifest& m, const CommonOptions& opts) {
  for (const std::string& kv : opts.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("override '" + kv + "' is not key=value");
    }
    const std::string key = kv.substr(0, eq);
    const std::string value = kv.substr(eq + 1);
    auto real = [&] {
      try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
      } catch (const std::exception&) {
        throw ConfigError("override '" + key + "' needs a number");
      }
    };
    if (key == "fusion.iou_threshold") {
      m.fusion.iou_threshold = real();
    } else if (key == "fusion.nms_iou_threshold") {
      m.nms_iou_threshold = real();
    } else if (key == "fusion.soft_nms_sigma") {
      m.fusion.soft_nms_sigma = real();
    } else if (key == "fusion.score_floor") {
      m.fusion.score_floor = real();
    } else if (key == "fusion.confidence_rescale") {
      m.fusion.confidence_rescale = RescaleFromName(value);
    } else if (key == "gates.default") {
      m.gates.default_gate = real();
    } else if (key.rfind("gates.", 0) == 0) {
      m.gates.gates[m.ClassByName(key.substr(6))] = real();
    } else {
      throw ConfigError("unknown override key '" + key + "'");
    }
  }
  if (opts.iou_threshold) {
    m.fusion.iou_threshold = *opts.iou_threshold;
    m.nms_iou_threshold = *opts.iou_threshold;
  }
  m.fusion.Validate();
  m.gates.Validate();
  if (!(m.nms_iou_threshold > 0.0 && m.nms_iou_threshold < 1.0)) {
    throw ConfigError("nms iou threshold must lie in (0,1)");
  }
}

EnsembleManifest LoadManifest(const CommonOptions& opts) {
  if (opts.manifest.empty()) throw ConfigError("--manifest is required");
  EnsembleManifest m = ParseManifest(opts.manifest);
  ApplyOverrides(m, opts);
  return m;
}

ConsensusSettings SettingsFor(const EnsembleManifest& m, unsigned threads) {
  ConsensusSettings s;
  s.gates = m.gates;
  s.filter = m.filter;
  s.params = m.fusion;
  s.threads = threads;
  return s;
}

std::map<std::string, DetectionSet> AsDetections(const FusedDetections& f) {
  std::map<std::string, DetectionSet> out;
  for (const auto& [id, boxes] : f) {
    DetectionSet& set = out[id];
    set.image_id = id;
    for (const FusedBox& b : boxes) {
      set.boxes.push_back(
          {b.cls, b.x1, b.y1, b.x2, b.y2, b.confidence, 0});
    }
  }
  return out;
}

fs::path FusedPath(const fs::path& dir, const std::string& algorithm) {
  return dir / ("fused_" + algorithm + ".txt");
}

void WriteFusedFor(const std::string& algorithm, const FusedDetections& fused,
                   const fs::path& dir) {
  if (IsNmsFamily(algorithm)) {
    WriteDetections(AsDetections(fused), FusedPath(dir, algorithm));
  } else {
    WriteFused(fused, FusedPath(dir, algorithm));
  }
}

std::size_t CountBoxes(const FusedDetections& f) {
  std::size_t n = 0;
  for (const auto& [id, boxes] : f) n += boxes.size();
  return n;
}

void WriteFuseSummary(const std::string& algorithm,
                      const EnsembleManifest& m, const LoadedEnsemble& loaded,
                      const FusedDetections& fused, const fs::path& dir) {
  std::size_t input = 0;
  std::size_t gated_out = 0;
  const bool gated = algorithm == "knowledge-vote" ||
                     algorithm == kConsensusAlgorithm;
  for (const SourceDomain& s : loaded.ensemble.sources) {
    for (const std::string& id : loaded.ensemble.target_image_ids) {
      const DetectionSet set = s.DetectionsFor(id);
      input += set.boxes.size();
      if (gated) {
        gated_out +=
            set.boxes.size() - ApplyGates(set, m.gates, m.filter).boxes.size();
      }
    }
  }
  nlohmann::json zero_area = nlohmann::json::object();
  for (const auto& [name, n] : loaded.zero_area_dropped) zero_area[name] = n;
  nlohmann::json doc = {
      {"algorithm", algorithm},
      {"gate_dropped_boxes", gated_out},
      {"images", loaded.ensemble.target_image_ids.size()},
      {"input_boxes", input},
      {"output_boxes", CountBoxes(fused)},
      {"sources", loaded.ensemble.sources.size()},
      {"zero_area_dropped", zero_area}};
  WriteFile(dir / ("fuse_summary_" + algorithm + ".json"), doc.dump(2) + "\n");
}

void WarnZeroArea(const LoadedEnsemble& loaded, std::ostream& err) {
  for (const auto& [name, n] : loaded.zero_area_dropped) {
    if (n > 0) {
      err << "warning: dropped " << n << " zero-area boxes from source '"
          << name << "'\n";
    }
  }
}

struct ConsensusOutputs {
  ContributionReport report;
  FusedDetections fused;
  PseudoLabelDataset pseudo_labels;
};

ConsensusOutputs RunConsensus(const EnsembleManifest& m,
                              const LoadedEnsemble& loaded, unsigned threads,
                              bool shapley) {
  const SourceEnsemble& ensemble = loaded.ensemble;
  const ConsensusSettings settings = SettingsFor(m, threads);
  ConsensusOutputs out;
  out.report = RunConsensusFocus(ensemble, settings, shapley);
  out.fused = WeightedFusion(ensemble, out.report, settings);

  PseudoLabelProvenance provenance;
  provenance.algorithm = kConsensusAlgorithm;
  for (const SourceDomain& s : ensemble.sources) {
    provenance.source_names.push_back(s.name);
  }
  provenance.target_image_ids = ensemble.target_image_ids;
  provenance.gates = m.gates;
  provenance.filter = m.filter;
  provenance.params = m.fusion;
  provenance.params.model_weights.clear();
  for (const SourceDomain& s : ensemble.sources) {
    provenance.params.model_weights.push_back(out.report.alpha.at(s.source_id));
  }
  out.pseudo_labels = EmitPseudoLabels(out.fused, std::move(provenance));
  return out;
}

void PrintContribution(const ContributionReport& r,
                       const SourceEnsemble& ensemble, std::ostream& out) {
  char line[256];
  std::snprintf(line, sizeof(line), "%-24s %14s %14s %12s\n", "source", "cf",
                "q_without", "alpha");
  out << line;
  for (const SourceDomain& s : ensemble.sources) {
    std::snprintf(line, sizeof(line), "%-24s %14.6f %14.6f %12.6f\n",
                  s.name.c_str(), r.cf.at(s.source_id),
                  r.q_leave_one_out.at(s.source_id), r.alpha.at(s.source_id));
    out << line;
  }
  std::snprintf(line, sizeof(line), "q_full = %.6f, alpha_extended = %.6f\n",
                r.q_full, r.alpha_extended);
  out << line;
}

// --- subcommands ----------------------------------------------------------

struct SimulateOptions {
  std::string scenario = "two_good_one_poison";
  std::optional<std::uint64_t> seed;
  std::optional<int> images;
  std::string out = ".";
};

EnsembleManifest DoSimulate(const SimulateOptions& opts, std::ostream& out) {
  auto scenarios = ReferenceScenarios();
  auto it = scenarios.find(opts.scenario);
  if (it == scenarios.end()) {
    std::string names;
    for (const auto& [name, spec] : scenarios) {
      names += (names.empty() ? "" : ", ") + name;
    }
    throw ConfigError("unknown scenario '" + opts.scenario +
                      "'; valid: " + names);
  }
  ScenarioSpec spec = it->second;
  if (opts.seed) spec.seed = *opts.seed;
  if (opts.images) spec.num_images = *opts.images;
  const Scenario scenario = Generate(spec);
  EnsembleManifest m = WriteScenario(spec, scenario, opts.out);
  out << "simulated '" << opts.scenario << "' (seed " << spec.seed << ", "
      << spec.num_images << " images, " << spec.sources.size()
      << " sources) into " << opts.out << "\n";
  return m;
}

void DoFuse(const std::string& algorithm, const CommonOptions& opts,
            std::ostream& out, std::ostream& err) {
  const EnsembleManifest m = LoadManifest(opts);
  const LoadedEnsemble loaded = LoadEnsemble(m);
  WarnZeroArea(loaded, err);
  const FusedDetections fused =
      FuseWithAlgorithm(algorithm, m, loaded, opts.threads);
  WriteFusedFor(algorithm, fused, opts.out);
  WriteFuseSummary(algorithm, m, loaded, fused, opts.out);
  out << algorithm << ": " << CountBoxes(fused) << " boxes over "
      << loaded.ensemble.target_image_ids.size() << " images -> "
      << FusedPath(opts.out, algorithm).string() << "\n";
}

void DoConsensus(const CommonOptions& opts, bool shapley, std::ostream& out,
                 std::ostream& err) {
  const EnsembleManifest m = LoadManifest(opts);
  const LoadedEnsemble loaded = LoadEnsemble(m);
  WarnZeroArea(loaded, err);
  const ConsensusOutputs result =
      RunConsensus(m, loaded, opts.threads, shapley);
  const fs::path dir = opts.out;
  WriteReport(result.report, dir / "contribution_report.json");
  WriteFusedFor(kConsensusAlgorithm, result.fused, dir);
  WriteReport(result.pseudo_labels, dir / "pseudo_labels.txt");
  PrintContribution(result.report, loaded.ensemble, out);
}

std::string LabelFromPath(const fs::path& p) {
  std::string stem = p.stem().string();
  if (stem.rfind("fused_", 0) == 0) stem = stem.substr(6);
  return stem;
}

MetricsReport DoEval(const CommonOptions& opts, const std::string& detections,
                     std::string label, double threshold, std::ostream& out) {
  const EnsembleManifest m = LoadManifest(opts);
  if (m.target.ground_truth.empty()) {
    throw ConfigError("manifest has no target.ground_truth; eval needs one");
  }
  if (detections.empty()) throw ConfigError("--detections is required");
  const auto num_classes = static_cast<std::uint32_t>(m.classes.size());
  const GroundTruth gt =
      ParseGroundTruth(m.Resolve(m.target.ground_truth), {num_classes, 0});
  const ScoredDetections dets = ParseScored(detections, {num_classes, 0});
  if (label.empty()) label = LabelFromPath(detections);

  const MetricsReport report = Evaluate(dets, gt, threshold);
  const F1Curve curve = ComputeF1Curve(dets, gt, DefaultF1Grid());
  const fs::path dir = opts.out;
  WriteReport(report, dir / ("metrics_" + label + ".json"));
  WriteReport(curve, dir / ("f1_curve_" + label + ".csv"));

  char line[256];
  std::snprintf(line, sizeof(line),
                "%s @ %g: P %.3f  R %.3f  mAP@0.5 %.3f  mAP@.5:.95 %.3f  "
                "best F1 at %.3f\n",
                label.c_str(), threshold, report.aggregate.precision,
                report.aggregate.recall, report.aggregate.map50,
                report.aggregate.map5095, ArgmaxConfidence(curve));
  out << line;
  return report;
}

struct PipelineOptions {
  std::optional<std::string> scenario;
  std::optional<std::uint64_t> seed;
  std::optional<int> images;
  double confidence_threshold = kDefaultConfidenceThreshold;
  bool shapley = false;
};

void DoPipeline(CommonOptions opts, const PipelineOptions& p,
                std::ostream& out, std::ostream& err) {
  using Clock = std::chrono::steady_clock;
  if (p.scenario) {
    SimulateOptions sim;
    sim.scenario = *p.scenario;
    sim.seed = p.seed;
    sim.images = p.images;
    sim.out = opts.out;
    DoSimulate(sim, out);
    opts.manifest = (fs::path(opts.out) / "manifest.json").string();
  } else if (opts.manifest.empty()) {
    throw ConfigError("pipeline needs --manifest or --scenario");
  }

  std::map<std::string, double> seconds;
  for (const std::string algorithm : {"nms", "soft-nms", "wbf"}) {
    const auto t0 = Clock::now();
    DoFuse(algorithm, opts, out, err);
    seconds[algorithm] =
        std::chrono::duration<double>(Clock::now() - t0).count();
  }
  {
    const auto t0 = Clock::now();
    DoConsensus(opts, p.shapley, out, err);
    seconds[kConsensusAlgorithm] =
        std::chrono::duration<double>(Clock::now() - t0).count();
  }

  // Rows in the order ours, nms, soft-nms, wbf.
  const std::vector<std::pair<std::string, std::string>> rows = {
      {"ours", kConsensusAlgorithm},
      {"nms", "nms"},
      {"soft-nms", "soft-nms"},
      {"wbf", "wbf"}};
  std::string table = "method,confidence_threshold,precision,recall,map50,map5095\n";
  for (const auto& [method, algorithm] : rows) {
    const MetricsReport r =
        DoEval(opts, FusedPath(opts.out, algorithm).string(), algorithm,
               p.confidence_threshold, out);
    table += method + "," + FormatReal(p.confidence_threshold) + "," +
             FormatReal(r.aggregate.precision) + "," +
             FormatReal(r.aggregate.recall) + "," +
             FormatReal(r.aggregate.map50) + "," +
             FormatReal(r.aggregate.map5095) + "\n";
  }
  WriteFile(fs::path(opts.out) / "comparison.csv", table);

  char line[256];
  std::snprintf(line, sizeof(line),
                "runtime: nms %.3fs, consensus %.3fs, ratio %.2fx\n",
                seconds["nms"], seconds[kConsensusAlgorithm],
                seconds["nms"] > 0.0
                    ? seconds[kConsensusAlgorithm] / seconds["nms"]
                    : 0.0);
  out << line;
}

int ExitCodeFor(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::kConfig:
      return kExitConfig;
    case ErrorCategory::kData:
      return kExitData;
    case ErrorCategory::kInternal:
      return kExitInternal;
  }
  return kExitInternal;
}

}  // namespace

const std::vector<std::string>& AlgorithmNames() {
  static const std::vector<std::string> names = {
      "nms", "soft-nms", "wbf", "knowledge-vote", kConsensusAlgorithm};
  return names;
}

FusedDetections FuseWithAlgorithm(const std::string& algorithm,
                                  const EnsembleManifest& m,
                                  const LoadedEnsemble& loaded,
                                  unsigned threads) {
  const SourceEnsemble& ensemble = loaded.ensemble;
  if (algorithm == kConsensusAlgorithm) {
    return RunConsensus(m, loaded, threads, false).fused;
  }

  std::function<std::vector<FusedBox>(const std::vector<DetectionSet>&,
                                      const std::string&)>
      fuse;
  if (IsNmsFamily(algorithm)) {
    FusionParams params = m.fusion;
    params.iou_threshold = m.nms_iou_threshold;
    const bool soft = algorithm == "soft-nms";
    fuse = [params, soft](const std::vector<DetectionSet>& per_model,
                          const std::string& id) {
      const DetectionSet pooled = PoolDetections(per_model, id);
      const DetectionSet kept =
          soft ? SoftNms(pooled, params) : Nms(pooled, params);
      std::vector<FusedBox> out;
      for (const Box& b : kept.boxes) {
        out.push_back({b.cls, b.x1, b.y1, b.x2, b.y2, b.confidence, 1,
                       {{static_cast<std::size_t>(b.source), b}}});
      }
      return out;
    };
  } else if (algorithm == "wbf") {
    fuse = [&m](const std::vector<DetectionSet>& per_model,
                const std::string&) { return Wbf(per_model, m.fusion); };
  } else if (algorithm == "knowledge-vote") {
    fuse = [&m](const std::vector<DetectionSet>& per_model,
                const std::string&) {
      return KnowledgeVote(per_model, m.gates, m.filter, m.fusion);
    };
  } else {
    std::string valid;
    for (const std::string& n : AlgorithmNames()) {
      valid += (valid.empty() ? "" : ", ") + n;
    }
    throw ConfigError("unknown algorithm '" + algorithm + "'; valid: " + valid);
  }

  const auto& ids = ensemble.target_image_ids;
  std::vector<std::vector<FusedBox>> per_image(ids.size());
  ParallelFor(ids.size(), threads, [&](std::size_t j) {
    std::vector<DetectionSet> per_model;
    for (const SourceDomain& s : ensemble.sources) {
      per_model.push_back(s.DetectionsFor(ids[j]));
    }
    per_image[j] = fuse(per_model, ids[j]);
  });
  FusedDetections out;
  for (std::size_t j = 0; j < ids.size(); ++j) {
    out[ids[j]] = std::move(per_image[j]);
  }
  return out;
}

EnsembleManifest WriteScenario(const ScenarioSpec& spec,
                               const Scenario& scenario, const fs::path& dir) {
  EnsembleManifest m;
  m.base_dir = dir;
  for (const ScenarioClass& c : spec.classes) m.classes.push_back(c.name);
  for (const SourceDomain& s : scenario.sources) {
    const std::string file = "detections_" + s.name + ".txt";
    WriteDetections(s.detections, dir / file);
    m.sources.push_back({s.name, s.dataset_size, file});
  }
  WriteGroundTruth(scenario.ground_truth, dir / "ground_truth.txt");
  m.target.image_glob = "img_*";
  m.target.ground_truth = "ground_truth.txt";
  m.gates = spec.gates;
  m.filter = spec.filter;
  m.fusion.confidence_rescale = ConfidenceRescale::kWeightedSupport;
  m.seed = spec.seed;
  WriteManifest(m, dir / "manifest.json");
  return m;
}

int Run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"cfdet: detection ensemble fusion with consensus focus"};
  app.require_subcommand(1);

  CommonOptions common;
  auto add_common = [&common](CLI::App* sub, bool with_iou) {
    sub->add_option("--manifest", common.manifest, "ensemble manifest (JSON)");
    sub->add_option("--out", common.out, "output directory");
    sub->add_option("--threads", common.threads, "worker threads")
        ->check(CLI::Range(1u, 1024u));
    sub->add_option("--set", common.overrides,
                    "override, e.g. gates.pedestrian=0.5 or "
                    "fusion.iou_threshold=0.6");
    if (with_iou) {
      sub->add_option("--iou-threshold", common.iou_threshold,
                      "clustering / suppression iou threshold")
          ->check(CLI::Range(0.0, 1.0));
    }
  };

  SimulateOptions sim;
  auto* simulate = app.add_subcommand("simulate", "generate a scenario");
  simulate->add_option("--scenario", sim.scenario, "reference scenario name");
  simulate->add_option("--seed", sim.seed, "override the scenario seed");
  simulate->add_option("--images", sim.images, "override the image count")
      ->check(CLI::PositiveNumber);
  simulate->add_option("--out", sim.out, "output directory");

  std::string algorithm;
  auto* fuse = app.add_subcommand("fuse", "fuse detections of all sources");
  add_common(fuse, true);
  fuse->add_option("--algorithm", algorithm, "fusion algorithm")
      ->required()
      ->check(CLI::IsMember(AlgorithmNames()));

  bool shapley = false;
  auto* consensus =
      app.add_subcommand("consensus", "source contributions and weights");
  add_common(consensus, true);
  consensus->add_flag("--shapley", shapley, "also report exact Shapley values");

  std::string detections;
  std::string label;
  double threshold = kDefaultConfidenceThreshold;
  auto* eval = app.add_subcommand("eval", "score detections against truth");
  add_common(eval, false);
  eval->add_option("--detections", detections, "detections to score")
      ->required();
  eval->add_option("--label", label, "name used in output file names");
  eval->add_option("--confidence-threshold", threshold,
                   "discard detections below this confidence");

  PipelineOptions pipe;
  auto* pipeline =
      app.add_subcommand("pipeline", "simulate, fuse, consensus and eval");
  add_common(pipeline, true);
  pipeline->add_option("--scenario", pipe.scenario, "simulate this scenario");
  pipeline->add_option("--seed", pipe.seed, "override the scenario seed");
  pipeline->add_option("--images", pipe.images, "override the image count")
      ->check(CLI::PositiveNumber);
  pipeline->add_option("--confidence-threshold", pipe.confidence_threshold,
                       "evaluation operating point");
  pipeline->add_flag("--shapley", pipe.shapley,
                     "also report exact Shapley values");

  std::vector<std::string> argv_storage = {"cfdet"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (std::string& a : argv_storage) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (simulate->parsed()) {
      DoSimulate(sim, out);
    } else if (fuse->parsed()) {
      DoFuse(algorithm, common, out, err);
    } else if (consensus->parsed()) {
      DoConsensus(common, shapley, out, err);
    } else if (eval->parsed()) {
      DoEval(common, detections, label, threshold, out);
    } else if (pipeline->parsed()) {
      DoPipeline(common, pipe, out, err);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return ExitCodeFor(e.category());
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitOk;
}

}  // namespace cfdet::cli

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

#ifndef CFDET_DATA_IO_H_
#define CFDET_DATA_IO_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cfdet/consensus.h"
#include "cfdet/evaluation.h"
#include "cfdet/fusion.h"
#include "cfdet/geometry.h"

namespace cfdet {

// Text formats. One record per line, whitespace separated, normalized corner
// coordinates:
//
//   detections:    image_id class_id x1 y1 x2 y2 confidence
//   pseudo-labels: image_id class_id x1 y1 x2 y2 confidence n_b
//   ground truth:  image_id class_id x1 y1 x2 y2
//
// Blank lines and lines starting with '#' are skipped. Writers emit records
// sorted by image id, then by confidence descending, with every real printed
// to 9 significant digits.

const char* RescaleName(ConfidenceRescale r);
// Throws ConfigError for unknown names.
ConfidenceRescale RescaleFromName(const std::string& name);

// Formats a real with 9 significant digits ("%.9g").
std::string FormatReal(double value);

struct DetectionLoad {
  std::map<std::string, DetectionSet> sets;
  // Zero-area boxes dropped while loading.
  std::size_t zero_area_dropped = 0;
};

struct ParseOptions {
  // When set, class ids must be below this value.
  std::optional<std::uint32_t> num_classes;
  // Source tag stamped on every parsed box.
  int source = 0;
};

// Parses a detection file. An eighth n_b column, if present, is accepted and
// ignored. Throws IoError, ParseError (with line) or a ParseError wrapping an
// invalid box.
DetectionLoad ParseDetections(const std::filesystem::path& path,
                              const ParseOptions& options = {});
DetectionLoad ParseDetectionsText(const std::string& text,
                                  const std::string& source_name,
                                  const ParseOptions& options = {});

std::string SerializeDetections(
    const std::map<std::string, DetectionSet>& sets);
void WriteDetections(const std::map<std::string, DetectionSet>& sets,
                     const std::filesystem::path& path);

// Fused boxes in the pseudo-label format. Member lists are not serialized.
std::string SerializeFused(const FusedDetections& fused);
void WriteFused(const FusedDetections& fused,
                const std::filesystem::path& path);
// Requires the n_b column.
FusedDetections ParseFusedText(const std::string& text,
                               const std::string& source_name,
                               const ParseOptions& options = {});
FusedDetections ParseFused(const std::filesystem::path& path,
                           const ParseOptions& options = {});

GroundTruth ParseGroundTruthText(const std::string& text,
                                 const std::string& source_name,
                                 const ParseOptions& options = {});
GroundTruth ParseGroundTruth(const std::filesystem::path& path,
                             const ParseOptions& options = {});
std::string SerializeGroundTruth(const GroundTruth& gt);
void WriteGroundTruth(const GroundTruth& gt,
                      const std::filesystem::path& path);

// Reads scored detections from either the 7- or the 8-column format.
ScoredDetections ParseScored(const std::filesystem::path& path,
                             const ParseOptions& options = {});

struct ManifestSource {
  std::string name;
  std::int64_t dataset_size = 1;
  // As written in the manifest; relative paths resolve against the manifest
  // directory.
  std::string detections;

  friend bool operator==(const ManifestSource&,
                         const ManifestSource&) = default;
};

struct ManifestTarget {
  std::vector<std::string> image_ids;
  // fnmatch pattern over the image ids present in the inputs.
  std::string image_glob;
  std::string ground_truth;

  friend bool operator==(const ManifestTarget&,
                         const ManifestTarget&) = default;
};

struct EnsembleManifest {
  std::vector<std::string> classes;
  std::vector<ManifestSource> sources;
  ManifestTarget target;
  ConfidenceGates gates;
  LabelSpaceFilter filter;
  // iou_threshold here is the WBF clustering threshold.
  FusionParams fusion;
  double nms_iou_threshold = kDefaultNmsIouThreshold;
  std::optional<std::uint64_t> seed;
  // Directory of the manifest file; not serialized.
  std::filesystem::path base_dir;

  std::filesystem::path Resolve(const std::string& path) const;
  // ClassId for a class name; throws ConfigError for unknown names.
  ClassId ClassByName(const std::string& name) const;

  friend bool operator==(const EnsembleManifest&,
                         const EnsembleManifest&) = default;
};

// Strict parse: unknown keys, unknown class names in gates or filters, and
// missing referenced files are errors (ParseError / ConfigError).
EnsembleManifest ParseManifest(const std::filesystem::path& path);
EnsembleManifest ParseManifestText(const std::string& text,
                                   const std::filesystem::path& base_dir,
                                   bool check_paths = true);
std::string SerializeManifest(const EnsembleManifest& manifest);
void WriteManifest(const EnsembleManifest& manifest,
                   const std::filesystem::path& path);

struct LoadedEnsemble {
  SourceEnsemble ensemble;
  std::optional<GroundTruth> ground_truth;
  std::map<std::string, std::size_t> zero_area_dropped;
};

// Reads every file the manifest references and resolves the target image set:
// the explicit list, else the glob, else every image id seen in the inputs.
LoadedEnsemble LoadEnsemble(const EnsembleManifest& manifest);

std::string SerializeContributionReport(const ContributionReport& report);
ContributionReport ParseContributionReportText(const std::string& text);

std::string SerializeMetricsReport(const MetricsReport& report);
MetricsReport ParseMetricsReportText(const std::string& text);

// CSV with header `confidence,class_<id>...,mean`.
std::string SerializeF1Curve(const F1Curve& curve);
F1Curve ParseF1CurveText(const std::string& text);

std::string SerializeProvenance(const PseudoLabelProvenance& provenance);
PseudoLabelProvenance ParseProvenanceText(const std::string& text);

// A pseudo-label dataset is stored as `<path>` (pseudo-label text format) and
// `<path>.provenance.json`.
std::filesystem::path ProvenancePathFor(const std::filesystem::path& path);
void WritePseudoLabels(const PseudoLabelDataset& dataset,
                       const std::filesystem::path& path);
PseudoLabelDataset ReadPseudoLabels(const std::filesystem::path& path);

void WriteReport(const ContributionReport& report,
                 const std::filesystem::path& path);
void WriteReport(const MetricsReport& report,
                 const std::filesystem::path& path);
void WriteReport(const F1Curve& curve, const std::filesystem::path& path);
void WriteReport(const PseudoLabelDataset& dataset,
                 const std::filesystem::path& path);

std::string ReadFile(const std::filesystem::path& path);
void WriteFile(const std::filesystem::path& path, const std::string& content);

}  // namespace cfdet

#endif  // CFDET_DATA_IO_H_

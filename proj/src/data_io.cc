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

#include "cfdet/data_io.h"

#include <fnmatch.h>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>
#include <string_view>
#include <system_error>

#include "cfdet/errors.h"
#include "json.hpp"

namespace cfdet {

using nlohmann::json;
namespace fs = std::filesystem;

std::string FormatReal(double value) {
  if (value == 0.0) value = 0.0;  // no "-0"
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", value);
  return buf;
}

std::string ReadFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteFile(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << content;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

namespace {

// Value rounded to what FormatReal prints, so JSON output carries at most 9
// significant digits.
double Round9(double value) {
  return std::strtod(FormatReal(value).c_str(), nullptr);
}

std::vector<std::string_view> SplitFields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i])))
      ++i;
    std::size_t j = i;
    while (j < line.size() &&
           !std::isspace(static_cast<unsigned char>(line[j])))
      ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

struct Record {
  std::size_t line = 0;
  std::string image_id;
  ClassId cls;
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;
  std::optional<double> confidence;
  std::optional<int> support;
};

class RecordReader {
 public:
  RecordReader(std::string source, const ParseOptions& options)
      : source_(std::move(source)), options_(options) {}

  // `columns` lists the accepted field counts.
  std::vector<Record> Read(const std::string& text,
                           std::initializer_list<std::size_t> columns) const {
    std::vector<Record> out;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      std::size_t end = text.find('\n', pos);
      if (end == std::string::npos) end = text.size();
      std::string_view line(text.data() + pos, end - pos);
      ++line_no;
      pos = end + 1;
      auto fields = SplitFields(line);
      if (fields.empty() || fields.front().front() == '#') continue;
      if (std::find(columns.begin(), columns.end(), fields.size()) ==
          columns.end()) {
        throw ParseError(source_, line_no,
                         "unexpected field count " +
                             std::to_string(fields.size()));
      }
      Record r;
      r.line = line_no;
      r.image_id = std::string(fields[0]);
      r.cls = ClassId(ParseClass(fields[1], line_no));
      r.x1 = ParseReal(fields[2], line_no);
      r.y1 = ParseReal(fields[3], line_no);
      r.x2 = ParseReal(fields[4], line_no);
      r.y2 = ParseReal(fields[5], line_no);
      if (fields.size() >= 7) r.confidence = ParseReal(fields[6], line_no);
      if (fields.size() >= 8) r.support = ParseSupport(fields[7], line_no);
      out.push_back(std::move(r));
    }
    return out;
  }

  Box ToBox(const Record& r, double confidence) const {
    Box b{r.cls, r.x1, r.y1, r.x2, r.y2, confidence, options_.source};
    try {
      return ValidateBox(b);
    } catch (const InvalidBox& e) {
      throw ParseError(source_, r.line, e.what());
    }
  }

 private:
  std::uint32_t ParseClass(std::string_view s, std::size_t line) const {
    std::uint32_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) {
      throw ParseError(source_, line,
                       "bad class id '" + std::string(s) + "'");
    }
    if (options_.num_classes && v >= *options_.num_classes) {
      throw ParseError(source_, line,
                       "class id " + std::to_string(v) + " out of range");
    }
    return v;
  }

  int ParseSupport(std::string_view s, std::size_t line) const {
    int v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || v < 1) {
      throw ParseError(source_, line, "bad n_b '" + std::string(s) + "'");
    }
    return v;
  }

  double ParseReal(std::string_view s, std::size_t line) const {
    double v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) {
      throw ParseError(source_, line, "bad number '" + std::string(s) + "'");
    }
    return v;
  }

  std::string source_;
  ParseOptions options_;
};

void AppendLine(std::string& out, const std::string& image_id, ClassId cls,
                double x1, double y1, double x2, double y2,
                std::optional<double> confidence, std::optional<int> support) {
  out += image_id;
  out += ' ';
  out += std::to_string(cls.value);
  for (double v : {x1, y1, x2, y2}) {
    out += ' ';
    out += FormatReal(v);
  }
  if (confidence) {
    out += ' ';
    out += FormatReal(*confidence);
  }
  if (support) {
    out += ' ';
    out += std::to_string(*support);
  }
  out += '\n';
}

template <typename T>
std::vector<const T*> ByConfidence(const std::vector<T>& items) {
  std::vector<const T*> out;
  out.reserve(items.size());
  for (const T& item : items) out.push_back(&item);
  std::stable_sort(out.begin(), out.end(), [](const T* a, const T* b) {
    return a->confidence > b->confidence;
  });
  return out;
}

}  // namespace

DetectionLoad ParseDetectionsText(const std::string& text,
                                  const std::string& source_name,
                                  const ParseOptions& options) {
  RecordReader reader(source_name, options);
  DetectionLoad load;
  for (const Record& r : reader.Read(text, {7, 8})) {
    Box b = reader.ToBox(r, *r.confidence);
    DetectionSet& set = load.sets[r.image_id];
    set.image_id = r.image_id;
    if (b.IsDegenerate()) {
      ++load.zero_area_dropped;
      continue;
    }
    set.boxes.push_back(b);
  }
  return load;
}

DetectionLoad ParseDetections(const fs::path& path,
                              const ParseOptions& options) {
  return ParseDetectionsText(ReadFile(path), path.string(), options);
}

std::string SerializeDetections(
    const std::map<std::string, DetectionSet>& sets) {
  std::string out;
  for (const auto& [id, set] : sets) {
    for (const Box* b : ByConfidence(set.boxes)) {
      AppendLine(out, id, b->cls, b->x1, b->y1, b->x2, b->y2, b->confidence,
                 std::nullopt);
    }
  }
  return out;
}

void WriteDetections(const std::map<std::string, DetectionSet>& sets,
                     const fs::path& path) {
  WriteFile(path, SerializeDetections(sets));
}

std::string SerializeFused(const FusedDetections& fused) {
  std::string out;
  for (const auto& [id, boxes] : fused) {
    for (const FusedBox* b : ByConfidence(boxes)) {
      AppendLine(out, id, b->cls, b->x1, b->y1, b->x2, b->y2, b->confidence,
                 b->support_count);
    }
  }
  return out;
}

void WriteFused(const FusedDetections& fused, const fs::path& path) {
  WriteFile(path, SerializeFused(fused));
}

FusedDetections ParseFusedText(const std::string& text,
                               const std::string& source_name,
                               const ParseOptions& options) {
  RecordReader reader(source_name, options);
  FusedDetections out;
  for (const Record& r : reader.Read(text, {8})) {
    const Box b = reader.ToBox(r, *r.confidence);
    FusedBox f;
    f.cls = b.cls;
    f.x1 = b.x1;
    f.y1 = b.y1;
    f.x2 = b.x2;
    f.y2 = b.y2;
    f.confidence = b.confidence;
    f.support_count = *r.support;
    out[r.image_id].push_back(std::move(f));
  }
  return out;
}

FusedDetections ParseFused(const fs::path& path, const ParseOptions& options) {
  return ParseFusedText(ReadFile(path), path.string(), options);
}

GroundTruth ParseGroundTruthText(const std::string& text,
                                 const std::string& source_name,
                                 const ParseOptions& options) {
  RecordReader reader(source_name, options);
  GroundTruth gt;
  for (const Record& r : reader.Read(text, {6})) {
    const Box b = reader.ToBox(r, 1.0);
    gt.entries[r.image_id].push_back({b.cls, b.x1, b.y1, b.x2, b.y2});
  }
  return gt;
}

GroundTruth ParseGroundTruth(const fs::path& path,
                             const ParseOptions& options) {
  return ParseGroundTruthText(ReadFile(path), path.string(), options);
}

std::string SerializeGroundTruth(const GroundTruth& gt) {
  std::string out;
  for (const auto& [id, boxes] : gt.entries) {
    for (const GroundTruthBox& b : boxes) {
      AppendLine(out, id, b.cls, b.x1, b.y1, b.x2, b.y2, std::nullopt,
                 std::nullopt);
    }
  }
  return out;
}

void WriteGroundTruth(const GroundTruth& gt, const fs::path& path) {
  WriteFile(path, SerializeGroundTruth(gt));
}

ScoredDetections ParseScored(const fs::path& path,
                             const ParseOptions& options) {
  const std::string text = ReadFile(path);
  RecordReader reader(path.string(), options);
  ScoredDetections out;
  for (const Record& r : reader.Read(text, {7, 8})) {
    out[r.image_id].push_back(ToScored(reader.ToBox(r, *r.confidence)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON documents.

namespace {

void CheckKeys(const json& obj, std::initializer_list<std::string_view> allowed,
               const std::string& where) {
  if (!obj.is_object()) throw ParseError(where, 0, "expected an object");
  for (const auto& [key, value] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ParseError(where, 0, "unknown key '" + key + "'");
    }
  }
}

}  // namespace

const char* RescaleName(ConfidenceRescale r) {
  switch (r) {
    case ConfidenceRescale::kSupportRatio:
      return "support_ratio";
    case ConfidenceRescale::kWeightedSupport:
      return "weighted_support";
    case ConfidenceRescale::kNone:
      break;
  }
  return "none";
}

ConfidenceRescale RescaleFromName(const std::string& name) {
  if (name == "none") return ConfidenceRescale::kNone;
  if (name == "support_ratio") return ConfidenceRescale::kSupportRatio;
  if (name == "weighted_support") return ConfidenceRescale::kWeightedSupport;
  throw ConfigError(
      "confidence_rescale must be 'none', 'support_ratio' or "
      "'weighted_support'");
}

namespace {

json FusionToJson(const FusionParams& p) {
  json weights = json::array();
  for (double w : p.model_weights) weights.push_back(Round9(w));
  return json{{"confidence_rescale", RescaleName(p.confidence_rescale)},
              {"iou_threshold", Round9(p.iou_threshold)},
              {"model_weights", weights},
              {"score_floor", Round9(p.score_floor)},
              {"soft_nms_sigma", Round9(p.soft_nms_sigma)}};
}

void FusionFromJson(const json& j, FusionParams& p, const std::string& where,
                    std::initializer_list<std::string_view> extra_keys = {}) {
  std::vector<std::string_view> keys = {"confidence_rescale", "iou_threshold",
                                        "model_weights", "score_floor",
                                        "soft_nms_sigma"};
  keys.insert(keys.end(), extra_keys.begin(), extra_keys.end());
  for (const auto& [key, value] : j.items()) {
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      throw ParseError(where, 0, "unknown key '" + key + "'");
    }
  }
  if (j.contains("confidence_rescale")) {
    p.confidence_rescale =
        RescaleFromName(j.at("confidence_rescale").get<std::string>());
  }
  if (j.contains("iou_threshold")) {
    p.iou_threshold = j.at("iou_threshold").get<double>();
  }
  if (j.contains("score_floor")) p.score_floor = j.at("score_floor").get<double>();
  if (j.contains("soft_nms_sigma")) {
    p.soft_nms_sigma = j.at("soft_nms_sigma").get<double>();
  }
  if (j.contains("model_weights")) {
    p.model_weights = j.at("model_weights").get<std::vector<double>>();
  }
  p.Validate();
}

std::string Dump(const json& j) { return j.dump(2) + "\n"; }

json RealMap(const std::map<int, double>& m) {
  json out = json::object();
  for (const auto& [id, v] : m) out[std::to_string(id)] = Round9(v);
  return out;
}

std::map<int, double> RealMapFrom(const json& j) {
  std::map<int, double> out;
  for (const auto& [key, value] : j.items()) {
    out[std::stoi(key)] = value.get<double>();
  }
  return out;
}

template <typename Fn>
auto WithJsonErrors(const std::string& where, Fn&& fn) {
  try {
    return fn();
  } catch (const json::exception& e) {
    throw ParseError(where, 0, e.what());
  } catch (const std::invalid_argument& e) {
    throw ParseError(where, 0, e.what());
  } catch (const std::out_of_range& e) {
    throw ParseError(where, 0, e.what());
  }
}

}  // namespace

fs::path EnsembleManifest::Resolve(const std::string& path) const {
  fs::path p(path);
  return p.is_absolute() ? p : base_dir / p;
}

ClassId EnsembleManifest::ClassByName(const std::string& name) const {
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (classes[i] == name) return ClassId(static_cast<std::uint32_t>(i));
  }
  throw ConfigError("unknown class name '" + name + "'");
}

EnsembleManifest ParseManifestText(const std::string& text,
                                   const fs::path& base_dir,
                                   bool check_paths) {
  const std::string where = "manifest";
  EnsembleManifest m = WithJsonErrors(where, [&] {
    EnsembleManifest m;
    m.base_dir = base_dir;
    const json doc = json::parse(text);
    CheckKeys(doc, {"classes", "filter", "fusion", "gates", "seed", "sources",
                    "target"},
              where);

    m.classes = doc.at("classes").get<std::vector<std::string>>();
    if (m.classes.empty()) throw ConfigError("manifest declares no classes");
    std::set<std::string> class_names(m.classes.begin(), m.classes.end());
    if (class_names.size() != m.classes.size()) {
      throw ConfigError("class names must be unique");
    }

    std::set<std::string> names;
    for (const json& s : doc.at("sources")) {
      CheckKeys(s, {"dataset_size", "detections", "name"}, where + ".sources");
      ManifestSource src;
      src.name = s.at("name").get<std::string>();
      src.detections = s.at("detections").get<std::string>();
      if (s.contains("dataset_size")) {
        src.dataset_size = s.at("dataset_size").get<std::int64_t>();
      }
      if (src.dataset_size < 1) {
        throw ConfigError("source '" + src.name +
                          "' must have dataset_size >= 1");
      }
      if (!names.insert(src.name).second) {
        throw ConfigError("duplicate source name '" + src.name + "'");
      }
      m.sources.push_back(std::move(src));
    }
    if (m.sources.empty()) throw ConfigError("manifest declares no sources");

    if (doc.contains("target")) {
      const json& t = doc.at("target");
      CheckKeys(t, {"ground_truth", "image_glob", "image_ids"},
                where + ".target");
      if (t.contains("image_ids")) {
        m.target.image_ids = t.at("image_ids").get<std::vector<std::string>>();
      }
      if (t.contains("image_glob")) {
        m.target.image_glob = t.at("image_glob").get<std::string>();
      }
      if (t.contains("ground_truth")) {
        m.target.ground_truth = t.at("ground_truth").get<std::string>();
      }
    }

    if (doc.contains("gates")) {
      const json& g = doc.at("gates");
      CheckKeys(g, {"default", "per_class"}, where + ".gates");
      if (g.contains("default")) {
        m.gates.default_gate = g.at("default").get<double>();
      }
      if (g.contains("per_class")) {
        for (const auto& [name, value] : g.at("per_class").items()) {
          ClassId cls;
          try {
            cls = m.ClassByName(name);
          } catch (const ConfigError& e) {
            throw ParseError(where + ".gates", 0, e.what());
          }
          m.gates.gates[cls] = value.get<double>();
        }
      }
      m.gates.Validate();
    }

    if (doc.contains("filter")) {
      const json& f = doc.at("filter");
      CheckKeys(f, {"classes", "mode"}, where + ".filter");
      const std::string mode = f.value("mode", "keep_all");
      if (mode == "keep_all") {
        m.filter.mode = LabelSpaceFilter::Mode::kKeepAll;
      } else if (mode == "keep_listed") {
        m.filter.mode = LabelSpaceFilter::Mode::kKeepListed;
      } else {
        throw ConfigError("filter mode must be 'keep_all' or 'keep_listed'");
      }
      if (f.contains("classes")) {
        for (const auto& name : f.at("classes").get<std::vector<std::string>>()) {
          try {
            m.filter.classes.insert(m.ClassByName(name));
          } catch (const ConfigError& e) {
            throw ParseError(where + ".filter", 0, e.what());
          }
        }
      }
      m.filter.Validate();
    }

    m.fusion.confidence_rescale = ConfidenceRescale::kWeightedSupport;
    if (doc.contains("fusion")) {
      const json& f = doc.at("fusion");
      if (!f.is_object()) throw ParseError(where, 0, "fusion must be an object");
      FusionFromJson(f, m.fusion, where + ".fusion", {"nms_iou_threshold"});
      if (f.contains("nms_iou_threshold")) {
        m.nms_iou_threshold = f.at("nms_iou_threshold").get<double>();
        if (!(m.nms_iou_threshold > 0.0 && m.nms_iou_threshold < 1.0)) {
          throw ConfigError("nms_iou_threshold must lie in (0,1)");
        }
      }
    }
    if (!m.fusion.model_weights.empty() &&
        m.fusion.model_weights.size() != m.sources.size()) {
      throw WeightArityMismatch(m.fusion.model_weights.size(),
                                m.sources.size());
    }

    if (doc.contains("seed")) m.seed = doc.at("seed").get<std::uint64_t>();
    return m;
  });

  if (check_paths) {
    for (const ManifestSource& s : m.sources) {
      if (!fs::exists(m.Resolve(s.detections))) {
        throw ConfigError("detections file '" +
                          m.Resolve(s.detections).string() +
                          "' of source '" + s.name + "' does not exist");
      }
    }
    if (!m.target.ground_truth.empty() &&
        !fs::exists(m.Resolve(m.target.ground_truth))) {
      throw ConfigError("ground truth file '" +
                        m.Resolve(m.target.ground_truth).string() +
                        "' does not exist");
    }
  }
  return m;
}

EnsembleManifest ParseManifest(const fs::path& path) {
  return ParseManifestText(ReadFile(path), path.parent_path());
}

std::string SerializeManifest(const EnsembleManifest& m) {
  json doc;
  doc["classes"] = m.classes;
  json sources = json::array();
  for (const ManifestSource& s : m.sources) {
    sources.push_back({{"dataset_size", s.dataset_size},
                       {"detections", s.detections},
                       {"name", s.name}});
  }
  doc["sources"] = sources;

  json target = json::object();
  if (!m.target.image_ids.empty()) target["image_ids"] = m.target.image_ids;
  if (!m.target.image_glob.empty()) target["image_glob"] = m.target.image_glob;
  if (!m.target.ground_truth.empty()) {
    target["ground_truth"] = m.target.ground_truth;
  }
  doc["target"] = target;

  json per_class = json::object();
  for (const auto& [cls, gate] : m.gates.gates) {
    per_class[m.classes.at(cls.value)] = Round9(gate);
  }
  doc["gates"] = {{"default", Round9(m.gates.default_gate)},
                  {"per_class", per_class}};

  json filter_classes = json::array();
  for (ClassId cls : m.filter.classes) {
    filter_classes.push_back(m.classes.at(cls.value));
  }
  doc["filter"] = {
      {"classes", filter_classes},
      {"mode", m.filter.mode == LabelSpaceFilter::Mode::kKeepAll
                   ? "keep_all"
                   : "keep_listed"}};

  json fusion = FusionToJson(m.fusion);
  fusion["nms_iou_threshold"] = Round9(m.nms_iou_threshold);
  doc["fusion"] = fusion;
  if (m.seed) doc["seed"] = *m.seed;
  return Dump(doc);
}

void WriteManifest(const EnsembleManifest& manifest, const fs::path& path) {
  WriteFile(path, SerializeManifest(manifest));
}

LoadedEnsemble LoadEnsemble(const EnsembleManifest& m) {
  LoadedEnsemble loaded;
  const auto num_classes = static_cast<std::uint32_t>(m.classes.size());
  std::set<std::string> seen_ids;
  int id = 1;
  for (const ManifestSource& s : m.sources) {
    ParseOptions options{num_classes, id};
    DetectionLoad load = ParseDetections(m.Resolve(s.detections), options);
    SourceDomain domain;
    domain.source_id = id++;
    domain.name = s.name;
    domain.dataset_size = s.dataset_size;
    domain.detections = std::move(load.sets);
    for (const auto& [image, set] : domain.detections) seen_ids.insert(image);
    loaded.zero_area_dropped[s.name] = load.zero_area_dropped;
    loaded.ensemble.sources.push_back(std::move(domain));
  }
  if (!m.target.ground_truth.empty()) {
    loaded.ground_truth = ParseGroundTruth(m.Resolve(m.target.ground_truth),
                                           ParseOptions{num_classes, 0});
    for (const auto& [image, boxes] : loaded.ground_truth->entries) {
      seen_ids.insert(image);
    }
  }

  auto& targets = loaded.ensemble.target_image_ids;
  if (!m.target.image_ids.empty()) {
    targets = m.target.image_ids;
  } else if (!m.target.image_glob.empty()) {
    for (const std::string& image : seen_ids) {
      if (fnmatch(m.target.image_glob.c_str(), image.c_str(), 0) == 0) {
        targets.push_back(image);
      }
    }
  } else {
    targets.assign(seen_ids.begin(), seen_ids.end());
  }
  if (targets.empty()) throw ConfigError("target image set is empty");
  return loaded;
}

std::string SerializeContributionReport(const ContributionReport& r) {
  json doc;
  doc["alpha"] = RealMap(r.alpha);
  doc["alpha_extended"] = Round9(r.alpha_extended);
  doc["cf"] = RealMap(r.cf);
  doc["cf_clamped"] = RealMap(r.cf_clamped);
  doc["q_full"] = Round9(r.q_full);
  doc["q_leave_one_out"] = RealMap(r.q_leave_one_out);
  if (r.shapley) doc["shapley"] = RealMap(*r.shapley);
  return Dump(doc);
}

ContributionReport ParseContributionReportText(const std::string& text) {
  const std::string where = "contribution report";
  return WithJsonErrors(where, [&] {
    const json doc = json::parse(text);
    CheckKeys(doc, {"alpha", "alpha_extended", "cf", "cf_clamped", "q_full",
                    "q_leave_one_out", "shapley"},
              where);
    ContributionReport r;
    r.alpha = RealMapFrom(doc.at("alpha"));
    r.alpha_extended = doc.at("alpha_extended").get<double>();
    r.cf = RealMapFrom(doc.at("cf"));
    r.cf_clamped = RealMapFrom(doc.at("cf_clamped"));
    r.q_full = doc.at("q_full").get<double>();
    r.q_leave_one_out = RealMapFrom(doc.at("q_leave_one_out"));
    if (doc.contains("shapley")) r.shapley = RealMapFrom(doc.at("shapley"));
    return r;
  });
}

std::string SerializeMetricsReport(const MetricsReport& r) {
  json doc;
  doc["aggregate"] = {{"map50", Round9(r.aggregate.map50)},
                      {"map5095", Round9(r.aggregate.map5095)},
                      {"precision", Round9(r.aggregate.precision)},
                      {"recall", Round9(r.aggregate.recall)}};
  doc["confidence_threshold"] = Round9(r.confidence_threshold);
  json per_class = json::object();
  for (const auto& [cls, m] : r.per_class) {
    per_class[std::to_string(cls.value)] = {
        {"ap50", Round9(m.ap50)},
        {"ap5095", Round9(m.ap5095)},
        {"num_detections", m.num_detections},
        {"num_gt", m.num_gt},
        {"precision", Round9(m.precision)},
        {"recall", Round9(m.recall)}};
  }
  doc["per_class"] = per_class;
  return Dump(doc);
}

MetricsReport ParseMetricsReportText(const std::string& text) {
  const std::string where = "metrics report";
  return WithJsonErrors(where, [&] {
    const json doc = json::parse(text);
    CheckKeys(doc, {"aggregate", "confidence_threshold", "per_class"}, where);
    MetricsReport r;
    const json& a = doc.at("aggregate");
    CheckKeys(a, {"map50", "map5095", "precision", "recall"}, where);
    r.aggregate.map50 = a.at("map50").get<double>();
    r.aggregate.map5095 = a.at("map5095").get<double>();
    r.aggregate.precision = a.at("precision").get<double>();
    r.aggregate.recall = a.at("recall").get<double>();
    r.confidence_threshold = doc.at("confidence_threshold").get<double>();
    for (const auto& [key, value] : doc.at("per_class").items()) {
      CheckKeys(value, {"ap50", "ap5095", "num_detections", "num_gt",
                        "precision", "recall"},
                where);
      ClassMetrics m;
      m.ap50 = value.at("ap50").get<double>();
      m.ap5095 = value.at("ap5095").get<double>();
      m.num_detections = value.at("num_detections").get<std::size_t>();
      m.num_gt = value.at("num_gt").get<std::size_t>();
      m.precision = value.at("precision").get<double>();
      m.recall = value.at("recall").get<double>();
      r.per_class[ClassId(static_cast<std::uint32_t>(std::stoul(key)))] = m;
    }
    return r;
  });
}

std::string SerializeF1Curve(const F1Curve& curve) {
  const std::vector<ClassId> classes = curve.Classes();
  std::string out = "confidence";
  for (ClassId c : classes) out += ",class_" + std::to_string(c.value);
  out += ",mean\n";
  for (const F1Point& p : curve.points) {
    out += FormatReal(p.confidence);
    for (ClassId c : classes) {
      out += ',';
      out += FormatReal(p.f1_per_class.at(c));
    }
    out += ',';
    out += FormatReal(p.f1_mean);
    out += '\n';
  }
  return out;
}

F1Curve ParseF1CurveText(const std::string& text) {
  const std::string where = "f1 curve";
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(where, 1, "missing header");
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(s);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    return cells;
  };
  const auto header = split(line);
  if (header.size() < 2 || header.front() != "confidence" ||
      header.back() != "mean") {
    throw ParseError(where, 1, "header must be confidence,class_<id>...,mean");
  }
  std::vector<ClassId> classes;
  for (std::size_t k = 1; k + 1 < header.size(); ++k) {
    if (header[k].rfind("class_", 0) != 0) {
      throw ParseError(where, 1, "bad column '" + header[k] + "'");
    }
    classes.emplace_back(
        static_cast<std::uint32_t>(std::stoul(header[k].substr(6))));
  }
  F1Curve curve;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) {
      throw ParseError(where, line_no, "wrong column count");
    }
    F1Point p;
    try {
      p.confidence = std::stod(cells.front());
      for (std::size_t k = 0; k < classes.size(); ++k) {
        p.f1_per_class[classes[k]] = std::stod(cells[k + 1]);
      }
      p.f1_mean = std::stod(cells.back());
    } catch (const std::exception&) {
      throw ParseError(where, line_no, "bad number");
    }
    curve.points.push_back(std::move(p));
  }
  return curve;
}

std::string SerializeProvenance(const PseudoLabelProvenance& p) {
  json doc;
  doc["algorithm"] = p.algorithm;
  json filter_classes = json::array();
  for (ClassId c : p.filter.classes) filter_classes.push_back(c.value);
  doc["filter"] = {
      {"classes", filter_classes},
      {"mode", p.filter.mode == LabelSpaceFilter::Mode::kKeepAll
                   ? "keep_all"
                   : "keep_listed"}};
  doc["fusion"] = FusionToJson(p.params);
  json per_class = json::object();
  for (const auto& [cls, gate] : p.gates.gates) {
    per_class[std::to_string(cls.value)] = Round9(gate);
  }
  doc["gates"] = {{"default", Round9(p.gates.default_gate)},
                  {"per_class", per_class}};
  doc["sources"] = p.source_names;
  doc["target_image_ids"] = p.target_image_ids;
  return Dump(doc);
}

PseudoLabelProvenance ParseProvenanceText(const std::string& text) {
  const std::string where = "provenance";
  return WithJsonErrors(where, [&] {
    const json doc = json::parse(text);
    CheckKeys(doc, {"algorithm", "filter", "fusion", "gates", "sources",
                    "target_image_ids"},
              where);
    PseudoLabelProvenance p;
    p.algorithm = doc.at("algorithm").get<std::string>();
    const json& f = doc.at("filter");
    CheckKeys(f, {"classes", "mode"}, where);
    p.filter.mode = f.at("mode").get<std::string>() == "keep_listed"
                        ? LabelSpaceFilter::Mode::kKeepListed
                        : LabelSpaceFilter::Mode::kKeepAll;
    for (std::uint32_t c : f.at("classes").get<std::vector<std::uint32_t>>()) {
      p.filter.classes.insert(ClassId(c));
    }
    FusionFromJson(doc.at("fusion"), p.params, where);
    const json& g = doc.at("gates");
    CheckKeys(g, {"default", "per_class"}, where);
    p.gates.default_gate = g.at("default").get<double>();
    for (const auto& [key, value] : g.at("per_class").items()) {
      p.gates.gates[ClassId(static_cast<std::uint32_t>(std::stoul(key)))] =
          value.get<double>();
    }
    p.source_names = doc.at("sources").get<std::vector<std::string>>();
    p.target_image_ids =
        doc.at("target_image_ids").get<std::vector<std::string>>();
    return p;
  });
}

fs::path ProvenancePathFor(const fs::path& path) {
  fs::path p = path;
  p += ".provenance.json";
  return p;
}

void WritePseudoLabels(const PseudoLabelDataset& dataset,
                       const fs::path& path) {
  WriteFile(path, SerializeFused(dataset.entries));
  WriteFile(ProvenancePathFor(path), SerializeProvenance(dataset.provenance));
}

PseudoLabelDataset ReadPseudoLabels(const fs::path& path) {
  PseudoLabelDataset dataset;
  dataset.provenance = ParseProvenanceText(ReadFile(ProvenancePathFor(path)));
  FusedDetections fused = ParseFused(path);
  for (const std::string& id : dataset.provenance.target_image_ids) {
    auto it = fused.find(id);
    dataset.entries[id] =
        it == fused.end() ? std::vector<FusedBox>{} : std::move(it->second);
  }
  return dataset;
}

void WriteReport(const ContributionReport& report, const fs::path& path) {
  WriteFile(path, SerializeContributionReport(report));
}

void WriteReport(const MetricsReport& report, const fs::path& path) {
  WriteFile(path, SerializeMetricsReport(report));
}

void WriteReport(const F1Curve& curve, const fs::path& path) {
  WriteFile(path, SerializeF1Curve(curve));
}

void WriteReport(const PseudoLabelDataset& dataset, const fs::path& path) {
  WritePseudoLabels(dataset, path);
}

}  // namespace cfdet

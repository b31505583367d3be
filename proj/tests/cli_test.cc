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

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "cfdet/cli.h"
#include "cfdet/data_io.h"
#include "test_support.h"

#ifndef CFDET_TEST_DATA_DIR
#error "CFDET_TEST_DATA_DIR must be defined"
#endif

namespace cfdet {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  int code = 0;
  std::string out;
  std::string err;
};

Outcome RunCli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  Outcome o;
  o.code = cli::Run(args, out, err);
  o.out = out.str();
  o.err = err.str();
  return o;
}

// Simulates `scenario` with `images` images into `dir`.
void Simulate(const fs::path& dir, const std::string& scenario,
              int images = 40) {
  const Outcome o = RunCli({"simulate", "--scenario", scenario, "--images",
                            std::to_string(images), "--out", dir.string()});
  ASSERT_EQ(o.code, 0) << o.err;
}

std::string Manifest(const fs::path& dir) {
  return (dir / "manifest.json").string();
}

std::vector<std::string> Lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

std::map<std::string, std::string> Tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) {
      files[fs::relative(e.path(), root).string()] = ReadFile(e.path());
    }
  }
  return files;
}

TEST(CliTest, HelpAndUsageErrors) {
  EXPECT_EQ(RunCli({"--help"}).code, cli::kExitOk);
  EXPECT_EQ(RunCli({}).code, cli::kExitConfig);
  EXPECT_EQ(RunCli({"frobnicate"}).code, cli::kExitConfig);
  EXPECT_EQ(RunCli({"fuse", "--manifest", "x.json"}).code, cli::kExitConfig);
  EXPECT_EQ(RunCli({"simulate", "--scenario", "nope"}).code, cli::kExitConfig);
}

TEST(CliTest, UnknownAlgorithmNamesValidSet) {
  const Outcome o =
      RunCli({"fuse", "--manifest",
              (fs::path(CFDET_TEST_DATA_DIR) / "manifest_minimal.json").string(),
              "--algorithm", "bogus"});
  EXPECT_EQ(o.code, cli::kExitConfig);
  for (const std::string& name : cli::AlgorithmNames()) {
    EXPECT_NE(o.err.find(name), std::string::npos) << o.err;
  }
}

TEST(CliTest, SimulateWritesScenario) {
  testing::TempDir dir;
  Simulate(dir.path(), "two_good_one_poison");
  EXPECT_TRUE(fs::exists(dir.path() / "ground_truth.txt"));
  const EnsembleManifest m = ParseManifest(Manifest(dir.path()));
  EXPECT_EQ(m.sources.size(), 3u);
  EXPECT_EQ(m.seed, std::optional<std::uint64_t>(20240312u));
  const LoadedEnsemble loaded = LoadEnsemble(m);
  EXPECT_EQ(loaded.ensemble.target_image_ids.size(), 40u);
  EXPECT_TRUE(loaded.ground_truth.has_value());
}

TEST(CliTest, SimulateSeedOverride) {
  testing::TempDir a, b;
  Simulate(a.path(), "three_good");
  ASSERT_EQ(RunCli({"simulate", "--scenario", "three_good", "--images", "40",
                    "--seed", "99", "--out", b.path().string()})
                .code,
            0);
  EXPECT_NE(ReadFile(a.path() / "ground_truth.txt"),
            ReadFile(b.path() / "ground_truth.txt"));
  EXPECT_EQ(ParseManifest(Manifest(b.path())).seed,
            std::optional<std::uint64_t>(99u));
}

TEST(CliTest, FuseNmsWritesDetectionFormat) {
  testing::TempDir dir;
  Simulate(dir.path(), "three_good");
  const Outcome o = RunCli({"fuse", "--manifest", Manifest(dir.path()),
                            "--algorithm", "nms", "--out", dir.path().string()});
  ASSERT_EQ(o.code, 0) << o.err;
  const fs::path fused = dir.path() / "fused_nms.txt";
  const DetectionLoad load = ParseDetections(fused);
  EXPECT_FALSE(load.sets.empty());
  for (const std::string& line : Lines(ReadFile(fused))) {
    EXPECT_EQ(std::count(line.begin(), line.end(), ' '), 6) << line;
  }
  EXPECT_TRUE(fs::exists(dir.path() / "fuse_summary_nms.json"));
}

TEST(CliTest, ZeroGateKnowledgeVoteEqualsWbf) {
  testing::TempDir dir;
  Simulate(dir.path(), "three_good");
  for (const std::string algo : {"wbf", "knowledge-vote"}) {
    ASSERT_EQ(RunCli({"fuse", "--manifest", Manifest(dir.path()), "--algorithm",
                      algo, "--out", dir.path().string()})
                  .code,
              0);
  }
  const std::string wbf = ReadFile(dir.path() / "fused_wbf.txt");
  EXPECT_FALSE(wbf.empty());
  EXPECT_EQ(ReadFile(dir.path() / "fused_knowledge-vote.txt"), wbf);
}

TEST(CliTest, OverridesApply) {
  testing::TempDir dir;
  Simulate(dir.path(), "three_good");
  const auto fuse = [&](std::vector<std::string> extra) {
    std::vector<std::string> args = {"fuse", "--manifest", Manifest(dir.path()),
                                     "--algorithm", "knowledge-vote", "--out",
                                     dir.path().string()};
    args.insert(args.end(), extra.begin(), extra.end());
    return RunCli(args);
  };
  ASSERT_EQ(fuse({}).code, 0);
  const std::string open_gates = ReadFile(dir.path() / "fused_knowledge-vote.txt");
  ASSERT_EQ(fuse({"--set", "gates.default=0.9"}).code, 0);
  const std::string strict = ReadFile(dir.path() / "fused_knowledge-vote.txt");
  EXPECT_LT(Lines(strict).size(), Lines(open_gates).size());
  ASSERT_EQ(fuse({"--set", "gates.default=0.9", "--set",
                  "gates.non_motorized_vehicle=0.5"})
                .code,
            0);
  EXPECT_GE(Lines(ReadFile(dir.path() / "fused_knowledge-vote.txt")).size(),
            Lines(strict).size());
  EXPECT_EQ(fuse({"--set", "gates.truck=0.5"}).code, cli::kExitConfig);
  EXPECT_EQ(fuse({"--set", "nonsense"}).code, cli::kExitConfig);
  EXPECT_EQ(fuse({"--set", "fusion.iou_threshold=abc"}).code, cli::kExitConfig);
  EXPECT_EQ(fuse({"--iou-threshold", "0.7"}).code, 0);
}

TEST(CliTest, ConsensusFlagsPoisonAndWritesArtifacts) {
  testing::TempDir dir;
  Simulate(dir.path(), "two_good_one_poison", 200);
  const Outcome o = RunCli({"consensus", "--manifest", Manifest(dir.path()),
                            "--out", dir.path().string(), "--shapley"});
  ASSERT_EQ(o.code, 0) << o.err;
  const ContributionReport r = ParseContributionReportText(
      ReadFile(dir.path() / "contribution_report.json"));
  ASSERT_EQ(r.alpha.size(), 3u);
  EXPECT_LT(r.alpha.at(3), r.alpha.at(1));
  EXPECT_LT(r.alpha.at(3), r.alpha.at(2));
  ASSERT_TRUE(r.shapley.has_value());
  EXPECT_EQ(r.shapley->size(), 3u);
  const PseudoLabelDataset d = ReadPseudoLabels(dir.path() / "pseudo_labels.txt");
  EXPECT_EQ(d.entries.size(), 200u);
  EXPECT_EQ(d.provenance.source_names.size(), 3u);
  EXPECT_TRUE(fs::exists(dir.path() / "fused_consensus-wbf.txt"));
}

TEST(CliTest, DuplicateSourcesGetEqualAlpha) {
  testing::TempDir dir;
  Simulate(dir.path(), "three_good");
  EnsembleManifest m = ParseManifest(Manifest(dir.path()));
  ManifestSource copy = m.sources[0];
  copy.name = "copy_of_a";
  m.sources.push_back(copy);
  WriteManifest(m, dir.path() / "dup.json");
  const Outcome o = RunCli({"consensus", "--manifest",
                            (dir.path() / "dup.json").string(), "--out",
                            (dir.path() / "dup").string()});
  ASSERT_EQ(o.code, 0) << o.err;
  const ContributionReport r = ParseContributionReportText(
      ReadFile(dir.path() / "dup" / "contribution_report.json"));
  EXPECT_EQ(r.alpha.at(1), r.alpha.at(4));
}

TEST(CliTest, SingleSourceConsensusIsConfigError) {
  const Outcome o =
      RunCli({"consensus", "--manifest",
              (fs::path(CFDET_TEST_DATA_DIR) / "manifest_minimal.json").string(),
              "--out", (fs::temp_directory_path() / "cfdet_single").string()});
  EXPECT_EQ(o.code, cli::kExitConfig);
  EXPECT_FALSE(o.err.empty());
  fs::remove_all(fs::temp_directory_path() / "cfdet_single");
}

TEST(CliTest, EvalNeedsGroundTruth) {
  const fs::path data = CFDET_TEST_DATA_DIR;
  const Outcome o = RunCli({"eval", "--manifest",
                            (data / "manifest_minimal.json").string(),
                            "--detections",
                            (data / "detections_minimal.txt").string()});
  EXPECT_EQ(o.code, cli::kExitConfig);
  EXPECT_NE(o.err.find("ground"), std::string::npos);
}

TEST(CliTest, EvalPerfectDetectionsAndThreshold) {
  testing::TempDir dir;
  Simulate(dir.path(), "three_good");
  // Ground truth re-emitted as detections at confidence 1.
  const GroundTruth gt = ParseGroundTruth(dir.path() / "ground_truth.txt");
  std::map<std::string, DetectionSet> perfect;
  for (const auto& [id, boxes] : gt.entries) {
    for (const auto& g : boxes) {
      perfect[id].image_id = id;
      perfect[id].boxes.push_back({g.cls, g.x1, g.y1, g.x2, g.y2, 1.0, 0});
    }
  }
  WriteDetections(perfect, dir.path() / "perfect.txt");
  const Outcome o = RunCli({"eval", "--manifest", Manifest(dir.path()),
                            "--detections", (dir.path() / "perfect.txt").string(),
                            "--out", dir.path().string()});
  ASSERT_EQ(o.code, 0) << o.err;
  const MetricsReport r =
      ParseMetricsReportText(ReadFile(dir.path() / "metrics_perfect.json"));
  EXPECT_EQ(r.aggregate.precision, 1.0);
  EXPECT_EQ(r.aggregate.recall, 1.0);
  EXPECT_EQ(r.aggregate.map50, 1.0);
  EXPECT_EQ(r.aggregate.map5095, 1.0);
  EXPECT_EQ(r.confidence_threshold, 0.0001);
  EXPECT_TRUE(fs::exists(dir.path() / "f1_curve_perfect.csv"));

  ASSERT_EQ(RunCli({"eval", "--manifest", Manifest(dir.path()), "--detections",
                    (dir.path() / "perfect.txt").string(), "--label", "op",
                    "--confidence-threshold", "0.0003", "--out",
                    dir.path().string()})
                .code,
            0);
  EXPECT_EQ(ParseMetricsReportText(ReadFile(dir.path() / "metrics_op.json"))
                .confidence_threshold,
            0.0003);
}

TEST(CliTest, DataErrorsExitThree) {
  testing::TempDir dir;
  WriteFile(dir.path() / "bad.txt", "img 0 0.1 0.1 0.5\n");
  WriteFile(dir.path() / "m.json",
            R"({"classes":["a"],"sources":[{"name":"s","detections":"bad.txt"},)"
            R"({"name":"t","detections":"bad.txt"}]})");
  const Outcome o = RunCli({"fuse", "--manifest", (dir.path() / "m.json").string(),
                            "--algorithm", "wbf", "--out", dir.path().string()});
  EXPECT_EQ(o.code, cli::kExitData);
  EXPECT_NE(o.err.find("bad.txt"), std::string::npos) << o.err;

  WriteFile(dir.path() / "broken.json", "{\"classes\": [");
  EXPECT_EQ(RunCli({"fuse", "--manifest", (dir.path() / "broken.json").string(),
                    "--algorithm", "wbf"})
                .code,
            cli::kExitData);
}

TEST(CliTest, PipelineTableAndSubcommandEquivalence) {
  testing::TempDir piped, manual;
  const Outcome o = RunCli({"pipeline", "--scenario", "two_good_one_poison",
                            "--images", "40", "--out", piped.path().string()});
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_NE(o.out.find("ratio"), std::string::npos);

  const auto lines = Lines(ReadFile(piped.path() / "comparison.csv"));
  ASSERT_EQ(lines.size(), 5u);
  EXPECT_EQ(lines[0], "method,confidence_threshold,precision,recall,map50,map5095");
  EXPECT_EQ(lines[1].substr(0, 5), "ours,");
  EXPECT_EQ(lines[2].substr(0, 4), "nms,");
  EXPECT_EQ(lines[3].substr(0, 9), "soft-nms,");
  EXPECT_EQ(lines[4].substr(0, 4), "wbf,");

  const std::string out = manual.path().string();
  Simulate(manual.path(), "two_good_one_poison", 40);
  const std::string m = Manifest(manual.path());
  for (const std::string algo : {"nms", "soft-nms", "wbf"}) {
    ASSERT_EQ(RunCli({"fuse", "--manifest", m, "--algorithm", algo, "--out", out})
                  .code,
              0);
  }
  ASSERT_EQ(RunCli({"consensus", "--manifest", m, "--out", out}).code, 0);
  for (const std::string algo : {"consensus-wbf", "nms", "soft-nms", "wbf"}) {
    ASSERT_EQ(RunCli({"eval", "--manifest", m, "--detections",
                      (manual.path() / ("fused_" + algo + ".txt")).string(),
                      "--out", out})
                  .code,
              0);
  }
  auto pipeline_tree = Tree(piped.path());
  pipeline_tree.erase("comparison.csv");
  EXPECT_EQ(Tree(manual.path()), pipeline_tree);
}

}  // namespace
}  // namespace cfdet

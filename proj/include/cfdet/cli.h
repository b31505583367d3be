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

#ifndef CFDET_CLI_H_
#define CFDET_CLI_H_

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "cfdet/consensus.h"
#include "cfdet/data_io.h"
#include "cfdet/synth.h"

namespace cfdet::cli {

// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;

// Runs the tool with `args` (without the program name). Artifacts go to the
// --out directory, human-readable summaries to `out`, diagnostics to `err`.
int Run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

// Algorithms accepted by `fuse --algorithm`.
const std::vector<std::string>& AlgorithmNames();

// Fuses every target image with the named algorithm. NMS variants pool all
// sources; the WBF family uses the manifest's fusion parameters.
FusedDetections FuseWithAlgorithm(const std::string& algorithm,
                                  const EnsembleManifest& manifest,
                                  const LoadedEnsemble& loaded,
                                  unsigned threads);

// Writes the ground truth, one detection file per source and a manifest
// referencing them (relative paths) into `dir`.
EnsembleManifest WriteScenario(const ScenarioSpec& spec, const Scenario& scenario,
                               const std::filesystem::path& dir);

}  // namespace cfdet::cli

#endif  // CFDET_CLI_H_

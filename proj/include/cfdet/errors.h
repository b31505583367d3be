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

#ifndef CFDET_ERRORS_H_
#define CFDET_ERRORS_H_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cfdet {

// Broad failure categories. The CLI maps these onto its exit codes.
enum class ErrorCategory {
  kInternal,  // exit 1
  kConfig,    // exit 2
  kData,      // exit 3
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const { return category_; }

 private:
  ErrorCategory category_;
};

class InvalidBox : public Error {
 public:
  explicit InvalidBox(const std::string& reason)
      : Error(ErrorCategory::kData, "invalid box: " + reason) {}
};

class ParseError : public Error {
 public:
  ParseError(std::string source, std::size_t line, const std::string& reason)
      : Error(ErrorCategory::kData,
              source + (line > 0 ? ":" + std::to_string(line) : "") + ": " +
                  reason),
        line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what)
      : Error(ErrorCategory::kConfig, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what)
      : Error(ErrorCategory::kData, what) {}
};

class WeightArityMismatch : public Error {
 public:
  WeightArityMismatch(std::size_t weights, std::size_t models)
      : Error(ErrorCategory::kConfig,
              "model_weights has " + std::to_string(weights) +
                  " entries but there are " + std::to_string(models) +
                  " models") {}
};

class EmptySubset : public Error {
 public:
  EmptySubset()
      : Error(ErrorCategory::kInternal,
              "consensus quality requested for an empty source subset") {}
};

class DegenerateEnsemble : public Error {
 public:
  DegenerateEnsemble()
      : Error(ErrorCategory::kConfig,
              "consensus focus needs at least two sources; with a single "
              "source assign it the full weight 1 - alpha_extended") {}
};

class AllZeroContribution : public Error {
 public:
  AllZeroContribution()
      : Error(ErrorCategory::kInternal,
              "every source has zero size-weighted contribution") {}
};

class MissingImage : public Error {
 public:
  explicit MissingImage(const std::string& image_id)
      : Error(ErrorCategory::kData,
              "fused output has no entry for target image '" + image_id + "'") {}
};

class EmptyGroundTruth : public Error {
 public:
  EmptyGroundTruth()
      : Error(ErrorCategory::kData, "ground truth contains no boxes") {}
};

class SpecError : public Error {
 public:
  explicit SpecError(const std::string& what)
      : Error(ErrorCategory::kConfig, "scenario spec: " + what) {}
};

}  // namespace cfdet

#endif  // CFDET_ERRORS_H_

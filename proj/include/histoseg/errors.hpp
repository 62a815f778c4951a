// Copyright 2026 The histoseg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace histoseg {

enum class ErrorCode {
  EmptyMask,
  MaskLargerThanImage,
  InvalidRecord,
  ParseError,
  EmptyDataset,
  MismatchedPair,
  TooSmall,
  BadRatios,
  EmptyIds,
  TargetSmaller,
  OverlappingSets,
  EmptyEval,
  ShapeMismatch,
  BadConfig,
  NoTape,
  MissingGrad,
  NonFinite,
  EmptyMatrix,
  EmptyValues,
  EmptyResults,
  MissingMetric,
  ConfigError,
  IoError,
  FormatError,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library. `module()` names the component that
/// raised it so the CLI can report where a pipeline stage broke.
class Error : public std::runtime_error {
 public:
  Error(std::string_view module, ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }
  const std::string& module() const noexcept { return module_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::string module_;
  ErrorCode code_;
  std::string detail_;
};

}  // namespace histoseg

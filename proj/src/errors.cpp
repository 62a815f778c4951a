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

#include "histoseg/errors.hpp"

namespace histoseg {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::MaskLargerThanImage: return "MaskLargerThanImage";
    case ErrorCode::InvalidRecord: return "InvalidRecord";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::MismatchedPair: return "MismatchedPair";
    case ErrorCode::TooSmall: return "TooSmall";
    case ErrorCode::BadRatios: return "BadRatios";
    case ErrorCode::EmptyIds: return "EmptyIds";
    case ErrorCode::TargetSmaller: return "TargetSmaller";
    case ErrorCode::OverlappingSets: return "OverlappingSets";
    case ErrorCode::EmptyEval: return "EmptyEval";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::BadConfig: return "BadConfig";
    case ErrorCode::NoTape: return "NoTape";
    case ErrorCode::MissingGrad: return "MissingGrad";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::EmptyMatrix: return "EmptyMatrix";
    case ErrorCode::EmptyValues: return "EmptyValues";
    case ErrorCode::EmptyResults: return "EmptyResults";
    case ErrorCode::MissingMetric: return "MissingMetric";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::FormatError: return "FormatError";
  }
  return "Unknown";
}

Error::Error(std::string_view module, ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(module) + ": " + std::string(to_string(code)) +
                         ": " + message),
      module_(module),
      code_(code),
      detail_(message) {}

}  // namespace histoseg

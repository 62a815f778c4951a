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

#include <string>
#include <string_view>
#include <vector>

namespace histoseg::csv {

using Row = std::vector<std::string>;

/// RFC 4180 reader: comma separated, double-quoted fields may contain commas,
/// newlines and doubled quotes. Accepts LF or CRLF line ends; blank lines are
/// skipped.
std::vector<Row> parse(std::string_view text);

/// Quotes a field when it contains a comma, quote or newline.
std::string escape(std::string_view field);

}  // namespace histoseg::csv

// Copyright 2026 The kdcot Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace kdcot::io {

using nlohmann::json;

/// Raised for unreadable files and malformed records; carries the location.
class FormatError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

/// One JSON value per non-blank line. Errors name the file and line.
std::vector<json> read_jsonl(const std::filesystem::path& path);

void write_jsonl_atomic(const std::filesystem::path& path, const std::vector<json>& records);

std::vector<std::string> string_list(const json& j, const char* field);

}  // namespace kdcot::io

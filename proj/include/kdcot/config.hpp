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

// Run configuration: one JSON file, relative paths resolved against the
// file's directory, optional dotted-path overrides from the command line.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "kdcot/clients.hpp"
#include "kdcot/io.hpp"

namespace kdcot::config {

/// Carries the dotted field path of the offending setting.
class ValidationError : public std::invalid_argument {
  public:
    ValidationError(std::string field, const std::string& message)
        : std::invalid_argument(field + ": " + message), field_(std::move(field)) {}
    [[nodiscard]] const std::string& field() const { return field_; }

  private:
    std::string field_;
};

enum class Backend { Bm25, Dense, Hybrid };

/// Generation modes accepted by `run`.
inline const std::vector<std::string> kRunModes = {
    "kdcot", "vanilla-cot", "no-retrieve-then-read", "no-verifier", "retrieval-4", "qa-pairs-4", "cot-fixed",
};

struct RunConfig {
    std::filesystem::path base_dir;  // directory relative paths resolve against
    io::json raw;                    // the merged document, for error messages and dumps

    std::map<std::string, std::filesystem::path> paths;
    std::map<std::string, clients::EndpointSpec> endpoints;  // llm, embed, reader, verifier

    Backend backend = Backend::Bm25;
    std::size_t passages = 100;
    double bm25_k1 = 0.9;
    double bm25_b = 0.4;
    std::size_t chunk_words = 100;

    int max_iterations = 3;
    int require_finish_retries = 1;
    int max_rounds = 10;
    int collection_iterations = 5;

    std::string mode = "kdcot";
    std::string instruction;
    std::string baseline_instruction;
    std::string cot_fixed_rationale;

    std::uint64_t seed = 0;
    std::size_t parallel = 1;

    /// Path by key, or nullopt when unset.
    [[nodiscard]] std::optional<std::filesystem::path> path(const std::string& key) const;
    /// Path by key; throws ValidationError("paths.<key>") when unset.
    std::filesystem::path require_path(const std::string& key) const;
    /// Like require_path and the file or directory must exist.
    std::filesystem::path require_existing(const std::string& key) const;
    /// Endpoint by role; throws ValidationError("endpoints.<role>") when unset.
    const clients::EndpointSpec& endpoint(const std::string& role) const;
    [[nodiscard]] bool has_endpoint(const std::string& role) const { return endpoints.contains(role); }
};

/// Applies "a.b.c=value" to a JSON document. The value is parsed as JSON
/// when it parses, otherwise stored as a string.
void apply_override(io::json& doc, const std::string& assignment);

/// Validates and converts a document. Relative paths (including endpoint
/// mock scripts) resolve against base_dir.
RunConfig from_json(const io::json& doc, const std::filesystem::path& base_dir);

/// Reads the file, applies the overrides in order and validates.
RunConfig load(const std::optional<std::filesystem::path>& file, const std::vector<std::string>& overrides);

std::string_view to_string(Backend backend);

}  // namespace kdcot::config

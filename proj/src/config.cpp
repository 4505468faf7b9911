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

#include "kdcot/config.hpp"

#include <algorithm>

#include "kdcot/text.hpp"

namespace kdcot::config {

namespace fs = std::filesystem;
using io::json;

namespace {

const std::vector<std::string> kEndpointRoles = {"llm", "embed", "reader", "verifier"};

template <typename T>
T field(const json& obj, const std::string& where, const char* key, T fallback) {
    if (!obj.contains(key) || obj[key].is_null()) return fallback;
    try {
        return obj[key].get<T>();
    } catch (const json::exception&) {
        throw ValidationError(where.empty() ? std::string(key) : where + "." + key, "wrong type (" + std::string(obj[key].type_name()) + ")");
    }
}

const json& section(const json& doc, const char* key) {
    static const json empty = json::object();
    if (!doc.contains(key)) return empty;
    if (!doc[key].is_object()) throw ValidationError(key, "must be an object");
    return doc[key];
}

fs::path resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    return path.is_relative() ? (base / path).lexically_normal() : path;
}

int positive_int(const json& obj, const std::string& where, const char* key, int fallback, int min) {
    const int v = field<int>(obj, where, key, fallback);
    if (v < min) throw ValidationError(where.empty() ? std::string(key) : where + "." + key, "must be >= " + std::to_string(min));
    return v;
}

}  // namespace

std::optional<fs::path> RunConfig::path(const std::string& key) const {
    auto it = paths.find(key);
    if (it == paths.end()) return std::nullopt;
    return it->second;
}

fs::path RunConfig::require_path(const std::string& key) const {
    auto p = path(key);
    if (!p) throw ValidationError("paths." + key, "required but not set");
    return *p;
}

fs::path RunConfig::require_existing(const std::string& key) const {
    auto p = require_path(key);
    if (!fs::exists(p)) throw ValidationError("paths." + key, "not found: " + p.string());
    return p;
}

const clients::EndpointSpec& RunConfig::endpoint(const std::string& role) const {
    auto it = endpoints.find(role);
    if (it == endpoints.end()) throw ValidationError("endpoints." + role, "required but not set");
    return it->second;
}

void apply_override(json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ValidationError(assignment, "override must look like key.path=value");
    }
    const std::string key = assignment.substr(0, eq);
    const std::string value = assignment.substr(eq + 1);
    json* node = &doc;
    const auto parts = text::split(key, ".");
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (parts[i].empty()) throw ValidationError(key, "empty path component");
        if (!node->is_object()) throw ValidationError(key, "cannot descend into a non-object");
        node = &(*node)[parts[i]];
    }
    json parsed = json::parse(value, nullptr, /*allow_exceptions=*/false);
    *node = parsed.is_discarded() ? json(value) : parsed;
}

RunConfig from_json(const json& doc, const fs::path& base_dir) {
    if (!doc.is_object()) throw ValidationError("<root>", "config must be a JSON object");
    RunConfig c;
    c.base_dir = base_dir;
    c.raw = doc;

    for (const auto& [key, value] : section(doc, "paths").items()) {
        if (!value.is_string()) throw ValidationError("paths." + key, "must be a string");
        c.paths[key] = resolve(base_dir, value.get<std::string>());
    }

    const auto& endpoints = section(doc, "endpoints");
    for (const auto& [role, value] : endpoints.items()) {
        if (std::find(kEndpointRoles.begin(), kEndpointRoles.end(), role) == kEndpointRoles.end()) {
            throw ValidationError("endpoints." + role, "unknown role (expected llm, embed, reader or verifier)");
        }
        if (!value.is_object()) throw ValidationError("endpoints." + role, "must be an object");
        const auto kind = role == "embed" ? clients::EndpointKind::Embed : clients::EndpointKind::Chat;
        try {
            auto spec = clients::endpoint_from_json(value, kind);
            if (!spec.mock_script.empty()) spec.mock_script = resolve(base_dir, spec.mock_script).string();
            if (spec.provider != "openai" && spec.provider != "mock") {
                throw ValidationError("endpoints." + role + ".provider", "must be 'openai' or 'mock'");
            }
            c.endpoints[role] = std::move(spec);
        } catch (const ValidationError&) {
            throw;
        } catch (const json::exception& e) {
            throw ValidationError("endpoints." + role, e.what());
        } catch (const std::invalid_argument& e) {
            throw ValidationError("endpoints." + role, e.what());
        }
    }

    const auto& retrieval = section(doc, "retrieval");
    const auto backend = field<std::string>(retrieval, "retrieval", "backend", "bm25");
    if (backend == "bm25") c.backend = Backend::Bm25;
    else if (backend == "dense") c.backend = Backend::Dense;
    else if (backend == "hybrid") c.backend = Backend::Hybrid;
    else throw ValidationError("retrieval.backend", "must be bm25, dense or hybrid");
    c.passages = static_cast<std::size_t>(positive_int(retrieval, "retrieval", "n", 100, 1));
    c.bm25_k1 = field<double>(retrieval, "retrieval", "k1", 0.9);
    c.bm25_b = field<double>(retrieval, "retrieval", "b", 0.4);
    if (c.bm25_k1 < 0) throw ValidationError("retrieval.k1", "must be >= 0");
    if (c.bm25_b < 0 || c.bm25_b > 1) throw ValidationError("retrieval.b", "must be in [0, 1]");
    c.chunk_words = static_cast<std::size_t>(positive_int(retrieval, "retrieval", "chunk_words", 100, 1));

    const auto& interaction = section(doc, "interaction");
    c.max_iterations = positive_int(interaction, "interaction", "max_iterations", 3, 0);
    c.require_finish_retries = positive_int(interaction, "interaction", "require_finish_retries", 1, 0);
    c.max_rounds = positive_int(interaction, "interaction", "max_rounds", 10, 1);

    const auto& collection = section(doc, "collection");
    c.collection_iterations = positive_int(collection, "collection", "max_iterations", 5, 0);

    c.mode = field<std::string>(doc, "", "mode", "kdcot");
    if (std::find(kRunModes.begin(), kRunModes.end(), c.mode) == kRunModes.end()) {
        throw ValidationError("mode", "unknown mode '" + c.mode + "'");
    }
    c.instruction = field<std::string>(doc, "", "instruction", "");
    const auto& baseline = section(doc, "baseline");
    c.baseline_instruction = field<std::string>(baseline, "baseline", "instruction", c.instruction);
    c.cot_fixed_rationale = field<std::string>(baseline, "baseline", "cot_fixed_rationale", "");

    if (doc.contains("seed")) {
        if (!doc["seed"].is_number_integer()) throw ValidationError("seed", "must be an integer");
        c.seed = doc["seed"].get<std::uint64_t>();
    }
    c.parallel = static_cast<std::size_t>(positive_int(doc, "", "parallel", 1, 1));
    return c;
}

RunConfig load(const std::optional<fs::path>& file, const std::vector<std::string>& overrides) {
    json doc = json::object();
    fs::path base = fs::current_path();
    if (file) {
        if (!fs::exists(*file)) throw ValidationError("--config", "not found: " + file->string());
        try {
            doc = json::parse(io::read_file(*file));
        } catch (const json::parse_error& e) {
            throw ValidationError("--config", std::string("invalid JSON: ") + e.what());
        }
        base = fs::absolute(*file).parent_path();
    }
    for (const auto& o : overrides) apply_override(doc, o);
    return config::from_json(doc, base);
}

std::string_view to_string(Backend backend) {
    switch (backend) {
        case Backend::Bm25: return "bm25";
        case Backend::Dense: return "dense";
        case Backend::Hybrid: return "hybrid";
    }
    return "unknown";
}

}  // namespace kdcot::config

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

// Iterative rationale collection growth. Each pass selects the most similar
// demonstration for every unresolved training question, asks the chat model
// for a hinted rationale and keeps only rationales whose Finish answers match
// the gold answers. Kept rationales join the pool at the end of the pass.

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "kdcot/clients.hpp"
#include "kdcot/io.hpp"
#include "kdcot/prompt_store.hpp"

namespace kdcot::collection {

inline constexpr int kDefaultMaxIterations = 5;

struct TrainItem {
    std::string id;
    std::string question;
    std::vector<std::string> answers;
    std::optional<std::vector<std::string>> composition_answers;
};

struct BuildReport {
    int iterations_run = 0;
    std::vector<int> admitted_per_iteration;
    std::vector<std::string> unresolved;  // item ids, input order
    int endpoint_failures = 0;            // chat errors, counted per attempt
};

struct BuildOptions {
    std::string instruction;
    int max_iterations = kDefaultMaxIterations;
    std::size_t parallelism = 1;
};

/// Parses the output as a finished rationale and checks that some normalized
/// gold answer equals a normalized Finish answer. Malformed output -> false.
bool answer_match(std::string_view output, const std::vector<std::string>& gold);

/// Turns a completion of a prompt ending in "Thought 1:" into full rationale
/// text, adding the stub back when the model continued after it.
std::string complete_from_stub(std::string_view stub, std::string_view completion);

struct BuildResult {
    prompts::Pool pool;
    BuildReport report;
};

/// `anchors` must be non-empty and carry embeddings of the embed endpoint's
/// dimension. Items are embedded once up front.
BuildResult build_collection(const std::vector<TrainItem>& train, const std::vector<prompts::Demonstration>& anchors,
                             clients::ChatEndpoint& chat, clients::EmbedEndpoint& embed,
                             const BuildOptions& options = {});

std::vector<TrainItem> read_train_jsonl(const std::filesystem::path& path);
io::json to_json(const BuildReport& report);

}  // namespace kdcot::collection

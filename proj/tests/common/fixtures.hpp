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

// Scripted scenarios and hand-computed expectations shared by the unit and
// acceptance suites. Nothing here calls into the code under test to derive
// an expected value.

#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "kdcot/clients.hpp"
#include "kdcot/collection_builder.hpp"
#include "kdcot/corpus.hpp"
#include "kdcot/cot_format.hpp"
#include "kdcot/eval.hpp"
#include "kdcot/interaction.hpp"
#include "kdcot/prompt_store.hpp"

namespace kdcot::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
  public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    [[nodiscard]] const std::filesystem::path& path() const { return path_; }
    [[nodiscard]] std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

  private:
    std::filesystem::path path_;
};

std::string regex_escape(std::string_view s);
clients::MockScript script(const io::json& j);
void write_text(const std::filesystem::path& path, const std::string& content);

// ---------------------------------------------------------------------------
// Rationale generators

/// Random record satisfying every CoTRecord invariant, with or without Finish.
cot::CoTRecord random_record(std::mt19937_64& rng);

/// Corrupts a serialized finished record so that it can no longer parse with
/// require_finish=true. `kind` selects one of kMutationKinds corruptions.
inline constexpr int kMutationKinds = 10;
std::string corrupt(const cot::CoTRecord& record, int kind, std::mt19937_64& rng);

// ---------------------------------------------------------------------------
// Collection construction: 6 items answered in iteration 1, 2 more in
// iteration 2 (once item 6 is in the pool), 2 never.

struct CollectionFixture {
    std::vector<collection::TrainItem> train;
    std::vector<prompts::Demonstration> anchors;
    io::json script;  // mock chat script
    std::map<std::string, Embedding> vectors;  // question -> embedding
    std::vector<int> expected_admitted;        // per iteration
    std::size_t expected_pool;
};

CollectionFixture collection_fixture();

// ---------------------------------------------------------------------------
// Mining: 12 hand-classified passages.

struct MinerFixture {
    collection::TrainItem item;
    cot::CoTRecord rationale;
    std::vector<corpus::Passage> passages;
    std::vector<std::string> co_occurrence;  // answer and entity
    std::vector<std::string> answer_only;
    std::vector<std::string> entity_only;
    std::vector<std::string> neither;
};

MinerFixture miner_fixture();

// ---------------------------------------------------------------------------
// Interaction scenarios

inline constexpr std::size_t kWorldDim = 16;

struct InteractionWorld {
    std::string anchor_question;
    std::string anchor_cot;  // rounds only
    Embedding anchor_embedding;
    std::vector<corpus::Passage> passages;
    prompts::Pool pool;  // the anchor above
    corpus::PassageStore store;
    io::json llm;  // mock chat scripts
    io::json reader;
    io::json verifier;
    std::vector<std::pair<std::string, std::string>> questions;  // id, question
    eval::GoldMap gold;
    std::string instruction;
};

/// A two-hop question whose second sub-answer is hallucinated; the reader and
/// verifier fix it and the regenerated Finish is correct.
InteractionWorld correction_world();

/// Ten single-hop questions scripted as 3 corrected, 1 broken, 4 kept
/// correct and 2 kept incorrect.
InteractionWorld transition_world();

inline constexpr interaction::Transitions kExpectedTransitions{3, 1, 4, 2};

/// Verdict tally of transition_world in KdCoT mode: all in iteration 1.
inline constexpr interaction::SourceCounts kExpectedSources{5, 4, 1};

// ---------------------------------------------------------------------------
// Metrics

/// The 5-prediction eval fixture: 3 hits, per-item F1 {1, 0.4, 0, 1, 0}.
struct EvalFixture {
    std::vector<eval::Prediction> predictions;
    eval::GoldMap gold;
};
EvalFixture eval_fixture();

/// Toy corpus whose dense ranking is p01 > p02 > ... > p30 for every query,
/// with answers planted at known ranks.
struct PlantedQuery {
    std::vector<std::string> answers;
    std::map<std::size_t, bool> hit;       // N -> expected Hit@N
    std::map<std::size_t, double> recall;  // N -> expected Recall@N
};
struct PlantedCorpus {
    std::vector<corpus::Passage> passages;
    std::vector<std::pair<std::string, Embedding>> vectors;
    Embedding query;
    std::vector<PlantedQuery> queries;
};
PlantedCorpus planted_corpus();

// ---------------------------------------------------------------------------
// End-to-end CLI workspace: corpus, pool, questions, gold and mock scripts
// for the ten-question transition world, plus a config file.

struct Workspace {
    std::filesystem::path config;
    std::filesystem::path questions;
    std::filesystem::path gold;
    std::filesystem::path llm_script;
};

Workspace write_workspace(const std::filesystem::path& dir, const InteractionWorld& world);

}  // namespace kdcot::testing

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

// Verify-and-regenerate reasoning loop.
//
// The model first produces a structured rationale from a one-shot prompt.
// Each iteration then takes the earliest unverified sub-question, asks the QA
// pipeline for a candidate answer and lets the verifier arbitrate. A changed
// answer rewrites that round's Observation, drops everything after it and
// asks the model to continue from the corrected prefix. The Finish round is
// never verified.

#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "kdcot/clients.hpp"
#include "kdcot/corpus.hpp"
#include "kdcot/cot_format.hpp"
#include "kdcot/eval.hpp"
#include "kdcot/io.hpp"
#include "kdcot/prompt_store.hpp"
#include "kdcot/qa_pipeline.hpp"

namespace kdcot::interaction {

inline constexpr std::string_view kTraceSchema = "kdcot.trace.v1";

enum class Mode {
    KdCoT,               // retrieve-then-read + verifier
    NoRetrieveThenRead,  // verifier sees only the model's answer
    NoVerifier,          // the reader's candidate always replaces the answer
    VanillaCoT,          // one-shot rationale, no interaction
    Retrieval4,          // unstructured answer over 4 retrieved passages
    QaPairs4,            // unstructured answer after 4 question/answer pairs
    CoTFixed,            // unstructured answer after one fixed rationale
};

/// True for the unstructured baseline modes handled by run_baseline.
bool is_baseline(Mode mode);

std::string_view to_string(Mode mode);
std::optional<Mode> mode_from_string(std::string_view name);

struct Config {
    std::string instruction;
    int max_iterations = 3;
    int require_finish_retries = 1;
    int max_rounds = 10;
    std::size_t passages = qa::kDefaultPassages;
    Mode mode = Mode::KdCoT;
};

/// Everything the loop talks to. Retrieval, store and reader may be null in
/// NoRetrieveThenRead and VanillaCoT modes; the verifier may be null in
/// NoVerifier and VanillaCoT modes.
struct Services {
    clients::ChatEndpoint* llm = nullptr;
    clients::EmbedEndpoint* embed = nullptr;
    qa::RetrievalBackend* retriever = nullptr;
    const corpus::PassageStore* store = nullptr;
    clients::ChatEndpoint* reader = nullptr;
    clients::ChatEndpoint* verifier = nullptr;
};

struct IterationRecord {
    int iteration = 0;
    int round_index = 0;
    std::string subquestion;
    std::string original_answer;
    std::string candidate_answer;
    std::vector<std::string> supporting_passages;
    qa::Verdict verdict;
    bool regenerated = false;
};

enum class Status { Finished, MalformedFailure, IterationCapReached };

std::string_view to_string(Status status);

using CoTOutcome = std::variant<cot::CoTRecord, cot::MalformedError>;

struct InteractionTrace {
    std::string id;
    std::string question;
    Mode mode = Mode::KdCoT;
    std::optional<CoTOutcome> initial_cot;  // absent for unstructured baselines
    std::vector<IterationRecord> iterations;
    std::optional<CoTOutcome> final_cot;
    std::vector<std::string> final_answers;
    Status status = Status::Finished;
    std::optional<std::string> raw_output;  // unstructured baselines only
};

/// Runs the loop for one question. Chat or embed endpoint errors from the
/// reasoning model propagate; QA pipeline errors keep the original answer.
InteractionTrace run_kdcot(std::string_view question, const prompts::Pool& pool, const Services& services,
                           const Config& config);

struct BaselineConfig {
    std::string instruction;
    std::string cot_fixed_rationale;  // CoTFixed only
    std::size_t shots = 4;            // passages or question/answer pairs
};

/// One unstructured baseline answer. Retrieval4 needs retriever and store,
/// QaPairs4 needs embed and a non-empty pool. final_answers holds the trimmed
/// output when it is non-empty.
InteractionTrace run_baseline(std::string_view question, Mode mode, const prompts::Pool& pool,
                              const Services& services, const BaselineConfig& config);

struct Transitions {
    int corrected = 0;
    int broken = 0;
    int kept_correct = 0;
    int kept_incorrect = 0;
};

/// Hits@1 of the initial rationale versus the final answers. Gold is looked
/// up by trace id, then by question text; a miss throws std::out_of_range.
Transitions correctness_transitions(const std::vector<InteractionTrace>& traces, const eval::GoldMap& gold);

struct SourceCounts {
    int kept_by_verifier = 0;
    int replaced_by_qa = 0;
    int new_by_verifier = 0;
};

/// Verdict counts per iteration number; with per_iteration=false everything
/// is reported under key 0.
std::map<int, SourceCounts> answer_source_tally(const std::vector<InteractionTrace>& traces, bool per_iteration);

io::json to_json(const InteractionTrace& trace);
InteractionTrace trace_from_json(const io::json& j);

}  // namespace kdcot::interaction

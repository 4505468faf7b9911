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

// Retriever training data mined from rationale feedback: the question is
// augmented with the rationale's last sub-question, BM25 runs over the
// augmented query plus answers, and the top passages are split into
// positives and hard negatives by entity/answer co-occurrence.

#pragma once

#include <functional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "kdcot/collection_builder.hpp"
#include "kdcot/corpus.hpp"
#include "kdcot/cot_format.hpp"
#include "kdcot/io.hpp"
#include "kdcot/retrieval.hpp"

namespace kdcot::miner {

inline constexpr std::size_t kMiningDepth = 100;

enum class Rule { CoOccurrence, AnswerOnlyFallback };

std::string_view to_string(Rule rule);

struct MinedExample {
    std::string question;  // the original question, never the augmented one
    std::vector<std::string> answers;
    std::vector<std::string> positives;
    std::vector<std::string> hard_negatives;
    Rule rule = Rule::AnswerOnlyFallback;
};

using EntityRecognizer = std::function<std::set<std::string>(std::string_view)>;

/// question + " " + the question of the last Ask round (unchanged when the
/// rationale has none).
std::string augment_query(std::string_view question, const cot::CoTRecord& cot);

/// Default recognizer: maximal runs of capitalized tokens, where the
/// connectives de/of/the/da/von/van may bridge two capitalized tokens, plus
/// double-quoted spans. A leading stopword at a sentence start is dropped.
std::set<std::string> extract_entities(std::string_view text);

MinedExample mine_examples(const collection::TrainItem& item, const cot::CoTRecord& cot,
                           const retrieval::Bm25Index& index, const corpus::PassageStore& store,
                           const EntityRecognizer& recognizer = extract_entities);

/// DPR training record: {question, answers, positive_ctxs, hard_negative_ctxs,
/// rule}; contexts are {id, title, text}.
io::json to_dpr_json(const MinedExample& example, const corpus::PassageStore& store);

}  // namespace kdcot::miner

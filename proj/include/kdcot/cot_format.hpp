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

// Structured multi-round rationale format.
//
// The wire grammar is line oriented:
//
//   Question: <question>                      (optional header)
//   Hint: <a1>; <a2>                          (optional header)
//   Thought 1: <text>
//   Action 1: Question[<sub-question>]
//   Observation 1: <sub-answer>               (optional)
//   ...
//   Thought K: <text>
//   Action K: Finish[<a1>; <a2>]
//
// Fields are trimmed, blank lines are ignored and a line without a recognized
// prefix continues the preceding field (joined with one space).

#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace kdcot::cot {

struct Ask {
    std::string question;
    bool operator==(const Ask&) const = default;
};

struct Finish {
    std::vector<std::string> answers;
    bool operator==(const Finish&) const = default;
};

using Action = std::variant<Ask, Finish>;

struct Round {
    int index = 0;
    std::string thought;
    Action action;
    std::optional<std::string> observation;

    [[nodiscard]] bool is_finish() const { return std::holds_alternative<Finish>(action); }
    [[nodiscard]] bool is_ask() const { return std::holds_alternative<Ask>(action); }
    bool operator==(const Round&) const = default;
};

struct CoTRecord {
    std::string question;
    std::optional<std::vector<std::string>> hint;
    std::vector<Round> rounds;
    bool finished = false;

    /// Finish answers of the terminal round; empty when unfinished.
    [[nodiscard]] std::vector<std::string> final_answers() const;
    bool operator==(const CoTRecord&) const = default;
};

enum class MalformedReason {
    MissingThought,
    MissingAction,
    BadIndexSequence,
    NoFinish,
    UnparseableAction,
    EmptyField,
};

std::string_view to_string(MalformedReason reason);
std::optional<MalformedReason> reason_from_string(std::string_view name);

struct MalformedError {
    MalformedReason reason = MalformedReason::MissingThought;
    int line = 1;  // 1-based; one past the last line for end-of-input errors
    bool operator==(const MalformedError&) const = default;
};

/// Either a parsed record or the first rejection encountered.
class ParseResult {
  public:
    ParseResult(CoTRecord record) : value_(std::move(record)) {}
    ParseResult(MalformedError error) : value_(error) {}

    [[nodiscard]] bool ok() const { return std::holds_alternative<CoTRecord>(value_); }
    explicit operator bool() const { return ok(); }

    [[nodiscard]] const CoTRecord& record() const { return std::get<CoTRecord>(value_); }
    [[nodiscard]] CoTRecord& record() { return std::get<CoTRecord>(value_); }
    [[nodiscard]] const MalformedError& error() const { return std::get<MalformedError>(value_); }

  private:
    std::variant<CoTRecord, MalformedError> value_;
};

/// Parses raw LLM output. Never throws on content; every rejection path maps
/// to a MalformedReason.
ParseResult parse_cot(std::string_view text, bool require_finish);

/// Deterministic rendering; the Question header is emitted when the record
/// carries a question and the Hint line only when `include_hint` is set.
std::string serialize_cot(const CoTRecord& record, bool include_hint);

/// Renders only the rounds (no Question/Hint headers).
std::string serialize_rounds(const CoTRecord& record);

/// Earliest Ask round whose index is not in `verified`.
std::optional<std::pair<int, std::string>> pending_subquestion(const CoTRecord& record,
                                                               const std::set<int>& verified);

/// Copy holding rounds 1..round_index. Throws std::out_of_range.
CoTRecord truncate_after(const CoTRecord& record, int round_index);

/// Checks the record invariants (consecutive indices, single trailing
/// Finish, no Observation on Finish, non-empty fields).
bool is_well_formed(const CoTRecord& record);

}  // namespace kdcot::cot

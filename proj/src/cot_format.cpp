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

#include "kdcot/cot_format.hpp"

#include <array>
#include <stdexcept>

#include "kdcot/text.hpp"

namespace kdcot::cot {

namespace {

enum class FieldKind { Question, Hint, Thought, Action, Observation };

struct Field {
    FieldKind kind;
    int index = 0;  // -1 when the number could not be read
    std::string text;
    int line = 0;
};

struct Prefix {
    std::string_view word;
    FieldKind kind;
};

constexpr std::array<Prefix, 3> kRoundPrefixes = {{
    {"Thought", FieldKind::Thought},
    {"Action", FieldKind::Action},
    {"Observation", FieldKind::Observation},
}};

// Recognizes "<Word> <digits>:" and returns the field with the remainder.
std::optional<Field> match_round_prefix(std::string_view line) {
    for (const auto& p : kRoundPrefixes) {
        if (!text::starts_with(line, p.word)) continue;
        std::size_t i = p.word.size();
        std::size_t spaces = 0;
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) {
            ++i;
            ++spaces;
        }
        if (spaces == 0) continue;
        const std::size_t digits_begin = i;
        while (i < line.size() && line[i] >= '0' && line[i] <= '9') ++i;
        if (i == digits_begin) continue;
        const std::string_view digits = line.substr(digits_begin, i - digits_begin);
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
        if (i >= line.size() || line[i] != ':') continue;
        Field f{p.kind, -1, std::string(text::trim(line.substr(i + 1))), 0};
        if (digits.size() <= 6) f.index = std::stoi(std::string(digits));
        return f;
    }
    return std::nullopt;
}

std::optional<Field> match_header(std::string_view line) {
    if (text::starts_with(line, "Question:")) {
        return Field{FieldKind::Question, 0, std::string(text::trim(line.substr(9))), 0};
    }
    if (text::starts_with(line, "Hint:")) {
        return Field{FieldKind::Hint, 0, std::string(text::trim(line.substr(5))), 0};
    }
    return std::nullopt;
}

std::vector<std::string> split_answers(std::string_view s) {
    std::vector<std::string> out;
    for (auto& piece : text::split(s, ";")) out.emplace_back(text::trim(piece));
    return out;
}

struct ActionParse {
    std::optional<Action> action;
    MalformedReason error = MalformedReason::UnparseableAction;
};

ActionParse parse_action(std::string_view body) {
    auto bracketed = [&](std::string_view keyword) -> std::optional<std::string_view> {
        if (!text::starts_with(body, keyword)) return std::nullopt;
        std::string_view rest = text::trim(body.substr(keyword.size()));
        if (rest.size() < 2 || rest.front() != '[' || rest.back() != ']') return std::nullopt;
        return rest.substr(1, rest.size() - 2);
    };
    if (auto inner = bracketed("Question")) {
        auto q = text::trim(*inner);
        if (q.empty()) return {std::nullopt, MalformedReason::EmptyField};
        return {Action{Ask{std::string(q)}}, {}};
    }
    if (auto inner = bracketed("Finish")) {
        auto answers = split_answers(*inner);
        bool any = false;
        for (const auto& a : answers) any = any || !a.empty();
        if (!any) return {std::nullopt, MalformedReason::EmptyField};
        return {Action{Finish{std::move(answers)}}, {}};
    }
    return {std::nullopt, MalformedReason::UnparseableAction};
}

}  // namespace

std::vector<std::string> CoTRecord::final_answers() const {
    if (!finished || rounds.empty()) return {};
    if (const auto* fin = std::get_if<Finish>(&rounds.back().action)) return fin->answers;
    return {};
}

std::string_view to_string(MalformedReason reason) {
    switch (reason) {
        case MalformedReason::MissingThought: return "MissingThought";
        case MalformedReason::MissingAction: return "MissingAction";
        case MalformedReason::BadIndexSequence: return "BadIndexSequence";
        case MalformedReason::NoFinish: return "NoFinish";
        case MalformedReason::UnparseableAction: return "UnparseableAction";
        case MalformedReason::EmptyField: return "EmptyField";
    }
    return "Unknown";
}

std::optional<MalformedReason> reason_from_string(std::string_view name) {
    for (auto r : {MalformedReason::MissingThought, MalformedReason::MissingAction,
                   MalformedReason::BadIndexSequence, MalformedReason::NoFinish,
                   MalformedReason::UnparseableAction, MalformedReason::EmptyField}) {
        if (to_string(r) == name) return r;
    }
    return std::nullopt;
}

ParseResult parse_cot(std::string_view input, bool require_finish) {
    // Pass 1: split into fields, folding continuation lines.
    std::vector<Field> fields;
    int line_no = 0;
    int last_content_line = 0;
    bool in_rounds = false;
    for (const auto& raw : text::split(input, "\n")) {
        ++line_no;
        const std::string_view line = text::trim(raw);
        if (line.empty()) continue;
        last_content_line = line_no;
        auto field = match_round_prefix(line);
        if (!field && !in_rounds) field = match_header(line);
        if (field) {
            field->line = line_no;
            in_rounds = in_rounds || (field->kind != FieldKind::Question && field->kind != FieldKind::Hint);
            fields.push_back(std::move(*field));
            continue;
        }
        if (fields.empty()) return MalformedError{MalformedReason::MissingThought, line_no};
        auto& prev = fields.back().text;
        if (!prev.empty()) prev.push_back(' ');
        prev.append(line);
    }
    const int end_line = last_content_line + 1;

    // Pass 2: validate the round sequence.
    CoTRecord record;
    enum class State { ExpectThought, ExpectAction, ExpectObservationOrThought, Done };
    State state = State::ExpectThought;
    Round current;
    int expected = 1;

    auto close_round = [&] {
        record.rounds.push_back(std::move(current));
        current = Round{};
        ++expected;
    };

    for (auto& f : fields) {
        if (f.kind == FieldKind::Question) {
            record.question = f.text;
            continue;
        }
        if (f.kind == FieldKind::Hint) {
            std::vector<std::string> hint;
            for (auto& a : split_answers(f.text)) {
                if (!a.empty()) hint.push_back(std::move(a));
            }
            record.hint = std::move(hint);
            continue;
        }
        if (state == State::Done) return MalformedError{MalformedReason::BadIndexSequence, f.line};

        if (state == State::ExpectObservationOrThought) {
            if (f.kind == FieldKind::Observation) {
                if (f.index != current.index) return MalformedError{MalformedReason::BadIndexSequence, f.line};
                if (f.text.empty()) return MalformedError{MalformedReason::EmptyField, f.line};
                current.observation = f.text;
                close_round();
                state = State::ExpectThought;
                continue;
            }
            close_round();
            state = State::ExpectThought;
        }

        if (state == State::ExpectThought) {
            if (f.kind != FieldKind::Thought) return MalformedError{MalformedReason::MissingThought, f.line};
            if (f.index != expected) return MalformedError{MalformedReason::BadIndexSequence, f.line};
            if (f.text.empty()) return MalformedError{MalformedReason::EmptyField, f.line};
            current.index = f.index;
            current.thought = f.text;
            state = State::ExpectAction;
            continue;
        }

        // ExpectAction
        if (f.kind != FieldKind::Action) return MalformedError{MalformedReason::MissingAction, f.line};
        if (f.index != current.index) return MalformedError{MalformedReason::BadIndexSequence, f.line};
        auto parsed = parse_action(f.text);
        if (!parsed.action) return MalformedError{parsed.error, f.line};
        current.action = std::move(*parsed.action);
        if (current.is_finish()) {
            close_round();
            record.finished = true;
            state = State::Done;
        } else {
            state = State::ExpectObservationOrThought;
        }
    }

    switch (state) {
        case State::ExpectThought:
            if (record.rounds.empty()) return MalformedError{MalformedReason::MissingThought, end_line};
            break;
        case State::ExpectAction:
            return MalformedError{MalformedReason::MissingAction, end_line};
        case State::ExpectObservationOrThought:
            close_round();
            break;
        case State::Done:
            break;
    }
    if (require_finish && !record.finished) return MalformedError{MalformedReason::NoFinish, end_line};
    return record;
}

std::string serialize_rounds(const CoTRecord& record) {
    std::string out;
    for (const auto& r : record.rounds) {
        if (!out.empty()) out.push_back('\n');
        const auto idx = std::to_string(r.index);
        out += "Thought " + idx + ": " + r.thought + "\n";
        out += "Action " + idx + ": ";
        if (const auto* ask = std::get_if<Ask>(&r.action)) {
            out += "Question[" + ask->question + "]";
        } else {
            out += "Finish[" + text::join(std::get<Finish>(r.action).answers, "; ") + "]";
        }
        if (r.observation) out += "\nObservation " + idx + ": " + *r.observation;
    }
    return out;
}

std::string serialize_cot(const CoTRecord& record, bool include_hint) {
    std::string out;
    if (!record.question.empty()) out += "Question: " + record.question + "\n";
    if (include_hint && record.hint && !record.hint->empty()) {
        out += "Hint: " + text::join(*record.hint, "; ") + "\n";
    }
    out += serialize_rounds(record);
    return out;
}

std::optional<std::pair<int, std::string>> pending_subquestion(const CoTRecord& record,
                                                               const std::set<int>& verified) {
    for (const auto& r : record.rounds) {
        const auto* ask = std::get_if<Ask>(&r.action);
        if (ask && !verified.contains(r.index)) return std::make_pair(r.index, ask->question);
    }
    return std::nullopt;
}

CoTRecord truncate_after(const CoTRecord& record, int round_index) {
    if (round_index < 1 || round_index > static_cast<int>(record.rounds.size())) {
        throw std::out_of_range("truncate_after: round " + std::to_string(round_index) + " outside 1.." +
                                std::to_string(record.rounds.size()));
    }
    CoTRecord out;
    out.question = record.question;
    out.hint = record.hint;
    out.rounds.assign(record.rounds.begin(), record.rounds.begin() + round_index);
    out.finished = out.rounds.back().is_finish();
    return out;
}

bool is_well_formed(const CoTRecord& record) {
    auto clean = [](const std::string& s) {
        return !s.empty() && text::trim(s) == s && s.find('\n') == std::string::npos &&
               s.find('\r') == std::string::npos;
    };
    if (record.rounds.empty()) return false;
    if (!record.question.empty() && !clean(record.question)) return false;
    if (record.hint) {
        if (record.hint->empty()) return false;
        for (const auto& h : *record.hint) {
            if (!clean(h) || h.find(';') != std::string::npos) return false;
        }
    }
    for (std::size_t i = 0; i < record.rounds.size(); ++i) {
        const auto& r = record.rounds[i];
        if (r.index != static_cast<int>(i) + 1 || !clean(r.thought)) return false;
        if (r.observation && !clean(*r.observation)) return false;
        if (const auto* ask = std::get_if<Ask>(&r.action)) {
            if (!clean(ask->question)) return false;
        } else {
            const auto& answers = std::get<Finish>(r.action).answers;
            bool any = false;
            for (const auto& a : answers) {
                if (a.find(';') != std::string::npos || text::trim(a) != a) return false;
                any = any || !a.empty();
            }
            if (!any || r.observation || i + 1 != record.rounds.size()) return false;
        }
    }
    const bool ends_with_finish = !record.rounds.empty() && record.rounds.back().is_finish();
    return record.finished == ends_with_finish;
}

}  // namespace kdcot::cot

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

#include "kdcot/miner.hpp"

#include <cctype>

#include "kdcot/eval.hpp"
#include "kdcot/text.hpp"

namespace kdcot::miner {

namespace {

const std::set<std::string, std::less<>> kConnectives = {"de", "of", "the", "da", "von", "van"};

const std::set<std::string, std::less<>> kStopwords = {
    "a",     "an",   "the",   "who",  "whom",  "whose", "what", "when", "where", "which", "why",   "how",
    "is",    "are",  "was",   "were", "do",    "does",  "did",  "in",   "on",    "at",    "of",    "for",
    "to",    "and",  "or",    "but",  "this",  "that",  "these", "those", "it",  "its",   "name",  "list",
    "tell",  "give", "i",     "we",   "you",   "he",    "she",  "they", "can",   "could", "would", "should",
    "will",  "has",  "have",  "had",  "be",    "been",  "from", "by",   "with",  "as",    "if",    "then",
    "there", "so",   "after", "before", "during", "since"};

bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }

struct Token {
    std::string core;
    bool leading_punct = false;
    bool trailing_punct = false;
    bool sentence_start = false;
    bool capitalized = false;
};

std::vector<Token> tokens_of(std::string_view input) {
    std::vector<Token> out;
    bool next_starts_sentence = true;
    for (const auto& raw : text::split_ws(input)) {
        Token t;
        std::size_t b = 0;
        std::size_t e = raw.size();
        while (b < e && is_punct(raw[b])) ++b;
        while (e > b && is_punct(raw[e - 1])) --e;
        t.core = raw.substr(b, e - b);
        t.leading_punct = b > 0;
        t.trailing_punct = e < raw.size();
        t.sentence_start = next_starts_sentence;
        if (!t.core.empty()) {
            std::size_t pos = 0;
            t.capitalized = text::is_upper_codepoint(text::next_codepoint(t.core, pos));
        }
        const char last = raw.back();
        next_starts_sentence = last == '.' || last == '!' || last == '?';
        out.push_back(std::move(t));
    }
    return out;
}

void add_quoted_spans(std::string_view input, std::set<std::string>& out) {
    auto scan = [&](std::string_view open, std::string_view close) {
        std::size_t pos = 0;
        while (true) {
            const auto b = input.find(open, pos);
            if (b == std::string_view::npos) return;
            const auto e = input.find(close, b + open.size());
            if (e == std::string_view::npos) return;
            const auto span = text::trim(input.substr(b + open.size(), e - b - open.size()));
            if (!span.empty()) out.emplace(span);
            pos = e + close.size();
        }
    };
    scan("\"", "\"");
    scan("“", "”");
}

}  // namespace

std::string_view to_string(Rule rule) {
    return rule == Rule::CoOccurrence ? "CoOccurrence" : "AnswerOnlyFallback";
}

std::string augment_query(std::string_view question, const cot::CoTRecord& cot) {
    const cot::Ask* last = nullptr;
    for (const auto& r : cot.rounds) {
        if (const auto* ask = std::get_if<cot::Ask>(&r.action)) last = ask;
    }
    std::string out(question);
    if (last) out += " " + last->question;
    return out;
}

std::set<std::string> extract_entities(std::string_view input) {
    std::set<std::string> out;
    const auto tokens = tokens_of(input);

    std::vector<const Token*> run;
    std::vector<const Token*> pending;  // connectives waiting for a capitalized token
    auto flush = [&] {
        pending.clear();
        if (run.empty()) return;
        std::size_t first = 0;
        if (run.front()->sentence_start && kStopwords.contains(text::ascii_lower(run.front()->core))) first = 1;
        while (first < run.size() && kConnectives.contains(run[first]->core)) ++first;
        std::vector<std::string> words;
        for (std::size_t i = first; i < run.size(); ++i) words.push_back(run[i]->core);
        if (!words.empty()) out.insert(text::join(words, " "));
        run.clear();
    };

    for (const auto& t : tokens) {
        if (t.core.empty()) {
            flush();
            continue;
        }
        if (t.capitalized) {
            if (t.leading_punct) flush();
            run.insert(run.end(), pending.begin(), pending.end());
            pending.clear();
            run.push_back(&t);
            if (t.trailing_punct) flush();
            continue;
        }
        if (!run.empty() && kConnectives.contains(t.core) && !t.leading_punct && !t.trailing_punct) {
            pending.push_back(&t);
            continue;
        }
        flush();
    }
    flush();
    add_quoted_spans(input, out);
    return out;
}

MinedExample mine_examples(const collection::TrainItem& item, const cot::CoTRecord& cot,
                           const retrieval::Bm25Index& index, const corpus::PassageStore& store,
                           const EntityRecognizer& recognizer) {
    const std::string augmented = augment_query(item.question, cot);
    const std::string search_text = augmented + " " + text::join(item.answers, "; ");
    const auto results = index.search(search_text, kMiningDepth);

    std::vector<std::string> answers;
    for (const auto& a : item.answers) {
        if (auto n = eval::normalize(a); !n.empty()) answers.push_back(std::move(n));
    }
    std::vector<std::string> entities;
    for (const auto& e : recognizer(augmented)) {
        if (auto n = eval::normalize(e); !n.empty()) entities.push_back(std::move(n));
    }
    auto contains_any = [](const std::string& body, const std::vector<std::string>& needles) {
        for (const auto& n : needles) {
            if (body.find(n) != std::string::npos) return true;
        }
        return false;
    };

    std::vector<std::string> co, answer_only, entity_only;
    for (const auto& r : results) {
        const auto body = eval::normalize(store.at(r.id).body);
        const bool has_answer = contains_any(body, answers);
        const bool has_entity = contains_any(body, entities);
        if (has_answer && has_entity) {
            co.push_back(r.id);
        } else if (has_answer) {
            answer_only.push_back(r.id);
        } else if (has_entity) {
            entity_only.push_back(r.id);
        }
    }

    MinedExample ex;
    ex.question = item.question;
    ex.answers = item.answers;
    if (!co.empty()) {
        ex.rule = Rule::CoOccurrence;
        ex.positives = std::move(co);
        // Keep the retrieval order across both negative kinds.
        for (const auto& r : results) {
            if (std::find(answer_only.begin(), answer_only.end(), r.id) != answer_only.end() ||
                std::find(entity_only.begin(), entity_only.end(), r.id) != entity_only.end()) {
                ex.hard_negatives.push_back(r.id);
            }
        }
    } else {
        ex.rule = Rule::AnswerOnlyFallback;
        ex.positives = std::move(answer_only);
        ex.hard_negatives = std::move(entity_only);
    }
    return ex;
}

io::json to_dpr_json(const MinedExample& example, const corpus::PassageStore& store) {
    auto ctxs = [&](const std::vector<std::string>& ids) {
        io::json arr = io::json::array();
        for (const auto& id : ids) {
            const auto& p = store.at(id);
            arr.push_back({{"id", p.id}, {"title", p.title}, {"text", p.body}});
        }
        return arr;
    };
    return {
        {"question", example.question},
        {"answers", example.answers},
        {"positive_ctxs", ctxs(example.positives)},
        {"hard_negative_ctxs", ctxs(example.hard_negatives)},
        {"rule", std::string(to_string(example.rule))},
    };
}

}  // namespace kdcot::miner

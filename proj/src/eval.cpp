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

#include "kdcot/eval.hpp"

#include <cctype>
#include <set>
#include <stdexcept>

#include "kdcot/text.hpp"

namespace kdcot::eval {

namespace {

bool is_ascii_punct(char c) {
    return std::ispunct(static_cast<unsigned char>(c)) != 0;
}

std::string fold_and_lower(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    std::size_t pos = 0;
    while (pos < s.size()) {
        const char32_t cp = text::next_codepoint(s, pos);
        if (cp >= 0x300 && cp <= 0x36F) continue;  // combining marks
        if (auto folded = text::fold_accent(cp); !folded.empty()) {
            out += text::ascii_lower(folded);
        } else if (cp < 0x80) {
            out.push_back(static_cast<char>(std::tolower(static_cast<int>(cp))));
        } else {
            text::append_utf8(out, cp);
        }
    }
    return out;
}

std::string one_pass(std::string_view s) {
    std::vector<std::string> kept;
    for (auto& tok : text::split_ws(s)) {
        if (tok == "a" || tok == "an" || tok == "the") continue;
        kept.push_back(std::move(tok));
    }
    std::string joined = text::join(kept, " ");
    std::size_t b = 0;
    std::size_t e = joined.size();
    while (b < e && (is_ascii_punct(joined[b]) || joined[b] == ' ')) ++b;
    while (e > b && (is_ascii_punct(joined[e - 1]) || joined[e - 1] == ' ')) --e;
    return joined.substr(b, e - b);
}

std::set<std::string> normalized_set(const std::vector<std::string>& xs) {
    std::set<std::string> out;
    for (const auto& x : xs) {
        auto n = normalize(x);
        if (!n.empty()) out.insert(std::move(n));
    }
    return out;
}

}  // namespace

std::string normalize(std::string_view s) {
    std::string cur = fold_and_lower(s);
    // Article removal and punctuation stripping can expose each other
    // ("the." or ". the"); iterate to a fixpoint so the result is idempotent.
    while (true) {
        std::string next = one_pass(cur);
        if (next == cur) return cur;
        cur = std::move(next);
    }
}

bool contains_normalized(std::string_view haystack, std::string_view needle) {
    const auto n = normalize(needle);
    if (n.empty()) return false;
    return normalize(haystack).find(n) != std::string::npos;
}

bool hits_at_1(const Prediction& pred, const std::vector<std::string>& gold) {
    if (gold.empty()) throw std::invalid_argument("hits_at_1: empty gold answer list");
    if (pred.malformed) return false;
    const auto hay = normalize(text::join(pred.answer_texts, " "));
    for (const auto& g : gold) {
        const auto n = normalize(g);
        if (!n.empty() && hay.find(n) != std::string::npos) return true;
    }
    return false;
}

double f1(const std::vector<std::string>& pred_answers, const std::vector<std::string>& gold) {
    if (gold.empty()) throw std::invalid_argument("f1: empty gold answer list");
    const auto p = normalized_set(pred_answers);
    const auto g = normalized_set(gold);
    if (p.empty() || g.empty()) return 0.0;
    std::size_t common = 0;
    for (const auto& x : p) common += g.count(x);
    if (common == 0) return 0.0;
    const double precision = static_cast<double>(common) / static_cast<double>(p.size());
    const double recall = static_cast<double>(common) / static_cast<double>(g.size());
    return 2.0 * precision * recall / (precision + recall);
}

MetricsReport aggregate(const std::vector<Prediction>& predictions, const GoldMap& gold) {
    MetricsReport report;
    double hits = 0.0;
    double f1_sum = 0.0;
    for (const auto& pred : predictions) {
        auto it = gold.find(pred.id);
        if (it == gold.end()) throw std::out_of_range("aggregate: no gold answers for id '" + pred.id + "'");
        ++report.n_questions;
        if (pred.malformed) {
            ++report.n_malformed;
            continue;
        }
        if (hits_at_1(pred, it->second)) hits += 1.0;
        f1_sum += f1(pred.answer_texts, it->second);
    }
    if (report.n_questions > 0) {
        report.hits_at_1 = hits / report.n_questions;
        report.f1_macro = f1_sum / report.n_questions;
    }
    return report;
}

}  // namespace kdcot::eval

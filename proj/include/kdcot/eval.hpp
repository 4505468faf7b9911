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

#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace kdcot::eval {

/// Canonical answer form shared by every containment and membership test:
/// lower-case, accents folded to base letters, articles (a/an/the) removed as
/// whole words, whitespace collapsed, leading/trailing punctuation stripped.
/// Idempotent.
std::string normalize(std::string_view s);

/// True iff normalize(needle) is non-empty and occurs in normalize(haystack).
bool contains_normalized(std::string_view haystack, std::string_view needle);

struct Prediction {
    std::string id;
    std::vector<std::string> answer_texts;
    bool malformed = false;
};

struct MetricsReport {
    double hits_at_1 = 0.0;
    double f1_macro = 0.0;
    int n_questions = 0;
    int n_malformed = 0;
};

using GoldMap = std::map<std::string, std::vector<std::string>, std::less<>>;

/// Containment criterion: a gold answer appears inside the concatenated
/// prediction. Throws std::invalid_argument on empty gold.
bool hits_at_1(const Prediction& pred, const std::vector<std::string>& gold);

/// Set-based F1 with exact normalized membership. Throws on empty gold.
double f1(const std::vector<std::string>& pred_answers, const std::vector<std::string>& gold);

/// Macro-averaged report. Throws std::out_of_range when a prediction has no
/// gold entry.
MetricsReport aggregate(const std::vector<Prediction>& predictions, const GoldMap& gold);

}  // namespace kdcot::eval

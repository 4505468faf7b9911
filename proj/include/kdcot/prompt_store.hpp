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

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "kdcot/cot_format.hpp"
#include "kdcot/vector.hpp"

namespace kdcot::prompts {

enum class DemoSource { HumanAnchor, Constructed };

std::string_view to_string(DemoSource source);

struct Demonstration {
    cot::CoTRecord record;
    Embedding embedding;  // unit norm
    DemoSource source = DemoSource::HumanAnchor;
};

/// Ordered demonstration pool. Insertion order is the tie-breaker for
/// selection; the first insert fixes the embedding dimension.
class Pool {
  public:
    Pool() = default;
    explicit Pool(std::vector<Demonstration> items);

    /// Normalizes the embedding and appends. Throws std::invalid_argument on
    /// a dimension mismatch or a zero vector.
    void add(Demonstration demo);

    [[nodiscard]] const std::vector<Demonstration>& items() const { return items_; }
    [[nodiscard]] std::size_t size() const { return items_.size(); }
    [[nodiscard]] bool empty() const { return items_.empty(); }
    [[nodiscard]] std::size_t dim() const { return dim_; }

  private:
    std::vector<Demonstration> items_;
    std::size_t dim_ = 0;
};

/// Argmax of the dot product; ties go to the lowest insertion index.
const Demonstration& select_top1(const Pool& pool, std::span<const double> query);

/// The k best items by dot product, best first, ties by insertion index.
std::vector<const Demonstration*> select_topk(const Pool& pool, std::span<const double> query, std::size_t k);

/// instruction, blank line, demonstration without its Hint, blank line, the
/// target question and a "Thought 1:" stub.
std::string assemble_inference_prompt(std::string_view instruction, const Demonstration& demo,
                                      std::string_view question);

/// Like the inference prompt but the demonstration keeps its Hint and the
/// target question carries "Hint: gold; composition".
std::string assemble_construction_prompt(std::string_view instruction, const Demonstration& demo,
                                         std::string_view question, const std::vector<std::string>& gold,
                                         const std::optional<std::vector<std::string>>& composition);

struct PassageBlock {
    std::string title;
    std::string body;
};

struct QaPair {
    std::string question;
    std::string answer;
};

struct Retrieval4Passages {
    std::vector<PassageBlock> passages;
};
struct QaPairs4Shot {
    std::vector<QaPair> pairs;
};
struct CoTFixed {
    std::string rationale;
};

using BaselineContext = std::variant<Retrieval4Passages, QaPairs4Shot, CoTFixed>;

std::string assemble_baseline_prompt(std::string_view instruction, const BaselineContext& context,
                                     std::string_view question);

/// Pool JSONL: {question, hint, cot_text, embedding, source}; cot_text holds
/// the rounds only.
void save_pool(const Pool& pool, const std::filesystem::path& path);

using EmbedFn = std::function<Embedding(const std::string&)>;

/// Records without an embedding are embedded with `embed_missing` when given,
/// otherwise rejected.
Pool load_pool(const std::filesystem::path& path, const EmbedFn& embed_missing = nullptr);

}  // namespace kdcot::prompts

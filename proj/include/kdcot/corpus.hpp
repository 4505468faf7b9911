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
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace kdcot::corpus {

enum class Source { KB, Text };

std::string_view to_string(Source source);

struct Triple {
    std::string head;
    std::string relation;
    std::string tail;
};

struct Passage {
    std::string id;
    std::string title;
    std::string body;
    Source source = Source::Text;

    bool operator==(const Passage&) const = default;
};

inline constexpr std::size_t kDefaultChunkWords = 100;

class DuplicatePassageId : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Passages keyed by id, iterated in insertion order.
class PassageStore {
  public:
    PassageStore() = default;
    explicit PassageStore(std::vector<Passage> passages);

    /// Throws DuplicatePassageId, or std::invalid_argument for an empty body.
    void add(Passage p);
    void merge(const std::vector<Passage>& passages);

    [[nodiscard]] const Passage* find(std::string_view id) const;
    [[nodiscard]] const Passage& at(std::string_view id) const;
    [[nodiscard]] const std::vector<Passage>& passages() const { return passages_; }
    [[nodiscard]] std::size_t size() const { return passages_.size(); }
    [[nodiscard]] bool empty() const { return passages_.empty(); }

  private:
    std::vector<Passage> passages_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

/// "<head> <relation> <tail>."
std::string render_triple(const Triple& t);

/// Renders one head's 1-hop triples into passages of at most `chunk_words`
/// words, splitting only on triple boundaries. A single chunk keeps the head
/// as its id; several chunks are suffixed "#0", "#1", ... A triple longer
/// than the budget becomes its own chunk. Throws on mixed heads or empty
/// fields.
std::vector<Passage> linearize_subgraph(const std::string& head, const std::vector<Triple>& triples,
                                        std::size_t chunk_words = kDefaultChunkWords);

/// Groups triples by head (first-appearance order) and linearizes each group.
std::vector<Passage> linearize_kb(const std::vector<Triple>& triples, std::size_t chunk_words = kDefaultChunkWords);

struct Document {
    std::string title;
    std::string body;
};

/// Whole-word chunks of at most `chunk_words`, ids "<title>#k".
std::vector<Passage> ingest_text(const std::vector<Document>& documents,
                                 std::size_t chunk_words = kDefaultChunkWords);

std::vector<Triple> read_triples_tsv(const std::filesystem::path& path);
std::vector<Document> read_documents_jsonl(const std::filesystem::path& path);

/// Header "id\ttitle\ttext\tsource"; tabs and newlines in fields become spaces.
void write_store_tsv(const PassageStore& store, const std::filesystem::path& path);
PassageStore read_store_tsv(const std::filesystem::path& path);

}  // namespace kdcot::corpus

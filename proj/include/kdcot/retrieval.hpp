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

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "kdcot/corpus.hpp"
#include "kdcot/vector.hpp"

namespace kdcot::retrieval {

struct ScoredPassage {
    std::string id;
    double score = 0.0;
    bool operator==(const ScoredPassage&) const = default;
};

/// Sorted by score descending, ties by ascending id; ids are unique.
using RankedList = std::vector<ScoredPassage>;

/// Orders by score descending, then id ascending, and keeps the first n.
void sort_and_truncate(RankedList& list, std::size_t n);

/// Lower-cases ASCII and splits on anything that is not [A-Za-z0-9]; bytes
/// >= 0x80 are kept inside tokens so UTF-8 words stay whole. No stemming, no
/// stopwords.
std::vector<std::string> tokenize(std::string_view text);

struct Bm25Params {
    double k1 = 0.9;
    double b = 0.4;
};

struct Posting {
    std::uint32_t doc = 0;  // position in doc_ids()
    std::uint32_t tf = 0;
};

/// Okapi BM25 with idf = ln(1 + (N - df + 0.5) / (df + 0.5)). Query tokens
/// are summed with multiplicity. Immutable once built.
class Bm25Index {
  public:
    static Bm25Index build(const corpus::PassageStore& store, Bm25Params params = {});

    /// Top-n passages with positive score. Empty query -> empty list.
    [[nodiscard]] RankedList search(std::string_view query, std::size_t n) const;

    [[nodiscard]] const Bm25Params& params() const { return params_; }
    [[nodiscard]] std::size_t n_docs() const { return doc_ids_.size(); }
    [[nodiscard]] double avg_doc_length() const { return avg_doc_length_; }
    [[nodiscard]] const std::vector<std::string>& doc_ids() const { return doc_ids_; }
    [[nodiscard]] const std::vector<std::uint32_t>& doc_lengths() const { return doc_lengths_; }
    [[nodiscard]] std::span<const Posting> postings(std::string_view term) const;
    [[nodiscard]] std::size_t vocabulary_size() const { return postings_.size(); }
    [[nodiscard]] double idf(std::size_t df) const;

    /// Single file: a "kdcot-bm25 v1" header line followed by a JSON body.
    void save(const std::filesystem::path& path) const;
    static Bm25Index load(const std::filesystem::path& path);

  private:
    Bm25Params params_;
    std::vector<std::string> doc_ids_;
    std::vector<std::uint32_t> doc_lengths_;
    double avg_doc_length_ = 0.0;
    std::unordered_map<std::string, std::vector<Posting>> postings_;
};

inline RankedList bm25_search(const Bm25Index& index, std::string_view query, std::size_t n) {
    return index.search(query, n);
}

/// Passage id -> unit-norm vector of one shared dimension.
class DenseVectors {
  public:
    /// Normalizes on insert. Throws on dimension mismatch, duplicate id or a
    /// zero vector.
    void add(std::string id, Embedding vector);

    [[nodiscard]] std::size_t dim() const { return dim_; }
    [[nodiscard]] std::size_t size() const { return ids_.size(); }
    [[nodiscard]] const std::vector<std::string>& ids() const { return ids_; }
    [[nodiscard]] const std::vector<Embedding>& vectors() const { return vectors_; }

    /// JSONL {id, vector} when the extension is .jsonl, otherwise the binary
    /// layout: "KDVEC1\0\0", u32 dim, u64 count, then per entry u32 id length,
    /// id bytes and dim little-endian float32 values.
    static DenseVectors load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

  private:
    std::size_t dim_ = 0;
    std::vector<std::string> ids_;
    std::vector<Embedding> vectors_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

/// Exhaustive inner-product search.
RankedList dense_search(const DenseVectors& vectors, std::span<const double> query, std::size_t n);

/// Any of the top-n bodies contains any normalized answer.
bool hit_at_n(const RankedList& results, const corpus::PassageStore& store, const std::vector<std::string>& answers,
              std::size_t n);

/// Fraction of distinct normalized answers found in the union of the top-n
/// bodies. Throws std::invalid_argument on empty answers.
double recall_at_n(const RankedList& results, const corpus::PassageStore& store,
                   const std::vector<std::string>& answers, std::size_t n);

/// Reciprocal-rank fusion: score = sum over lists of 1 / (k + rank).
RankedList reciprocal_rank_fusion(const std::vector<RankedList>& lists, std::size_t n, double k = 60.0);

}  // namespace kdcot::retrieval

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

#include <atomic>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "kdcot/clients.hpp"
#include "kdcot/corpus.hpp"
#include "kdcot/retrieval.hpp"

namespace kdcot::qa {

inline constexpr std::size_t kDefaultPassages = 100;
inline constexpr double kRrfConstant = 60.0;

// ---------------------------------------------------------------------------
// Retrieval backends

/// Counts every search so callers can assert whether retrieval happened.
class RetrievalBackend {
  public:
    virtual ~RetrievalBackend() = default;
    retrieval::RankedList search(std::string_view query, std::size_t n) {
        ++calls_;
        return do_search(query, n);
    }
    [[nodiscard]] std::uint64_t calls() const { return calls_; }

  protected:
    virtual retrieval::RankedList do_search(std::string_view query, std::size_t n) = 0;

  private:
    std::atomic<std::uint64_t> calls_{0};
};

class Bm25Backend final : public RetrievalBackend {
  public:
    explicit Bm25Backend(std::shared_ptr<const retrieval::Bm25Index> index) : index_(std::move(index)) {}

  protected:
    retrieval::RankedList do_search(std::string_view query, std::size_t n) override;

  private:
    std::shared_ptr<const retrieval::Bm25Index> index_;
};

/// Embeds the query through the embed endpoint, then scores exhaustively.
class DenseBackend final : public RetrievalBackend {
  public:
    DenseBackend(std::shared_ptr<const retrieval::DenseVectors> vectors, std::shared_ptr<clients::EmbedEndpoint> embed)
        : vectors_(std::move(vectors)), embed_(std::move(embed)) {}

  protected:
    retrieval::RankedList do_search(std::string_view query, std::size_t n) override;

  private:
    std::shared_ptr<const retrieval::DenseVectors> vectors_;
    std::shared_ptr<clients::EmbedEndpoint> embed_;
};

/// Reciprocal-rank fusion of the member backends' top-n lists.
class HybridBackend final : public RetrievalBackend {
  public:
    explicit HybridBackend(std::vector<std::shared_ptr<RetrievalBackend>> members, double k = kRrfConstant)
        : members_(std::move(members)), k_(k) {}

  protected:
    retrieval::RankedList do_search(std::string_view query, std::size_t n) override;

  private:
    std::vector<std::shared_ptr<RetrievalBackend>> members_;
    double k_;
};

// ---------------------------------------------------------------------------
// Reader and verifier

struct FiDInput {
    /// "question: <q> title: <title> context: <body>", one per passage.
    std::vector<std::string> segments;
};

/// Throws std::invalid_argument for an empty passage list.
FiDInput assemble_fid_inputs(std::string_view question, const std::vector<corpus::Passage>& passages);

/// Reader request body: segments separated by newlines.
std::string reader_prompt(const FiDInput& input);

struct CandidateAnswer {
    std::string text;
    std::vector<std::string> supporting_passages;
    std::string reader_raw;
};

/// Retrieves top-n for the sub-question and reads a candidate from the first
/// line of the reader's output. With no passages the reader sees a single
/// "title: none context: none" segment. Endpoint errors propagate.
CandidateAnswer answer_subquestion(std::string_view subquestion, RetrievalBackend& retriever,
                                   const corpus::PassageStore& store, clients::ChatEndpoint& reader,
                                   std::size_t n = kDefaultPassages);

enum class Choice { KeepOriginal, UseCandidate, NewAnswer };

std::string_view to_string(Choice choice);

struct Verdict {
    Choice choice = Choice::KeepOriginal;
    std::string final_text;
    bool verifier_called = false;
};

std::string verifier_prompt(std::string_view subquestion, std::string_view original, std::string_view candidate);

/// Prompt used when no candidate exists: the verifier can only keep or
/// correct the original answer.
std::string verifier_prompt_without_candidate(std::string_view subquestion, std::string_view original);

/// Arbitrates between the model's sub-answer (A) and the candidate (B).
/// Equal answers after normalization skip the call. Endpoint failures keep
/// the original.
Verdict verify(std::string_view subquestion, std::string_view original, const CandidateAnswer& candidate,
               clients::ChatEndpoint& verifier);

/// Verification with no candidate: "A" keeps, anything else non-empty is a
/// new answer ("B" is treated as keep since there is nothing to switch to).
Verdict verify_without_candidate(std::string_view subquestion, std::string_view original,
                                 clients::ChatEndpoint& verifier);

}  // namespace kdcot::qa

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

#include "kdcot/qa_pipeline.hpp"

#include "kdcot/eval.hpp"
#include "kdcot/text.hpp"

namespace kdcot::qa {

retrieval::RankedList Bm25Backend::do_search(std::string_view query, std::size_t n) {
    return index_->search(query, n);
}

retrieval::RankedList DenseBackend::do_search(std::string_view query, std::size_t n) {
    const auto q = embed_->embed({std::string(query)});
    return retrieval::dense_search(*vectors_, q.front(), n);
}

retrieval::RankedList HybridBackend::do_search(std::string_view query, std::size_t n) {
    std::vector<retrieval::RankedList> lists;
    lists.reserve(members_.size());
    for (auto& m : members_) lists.push_back(m->search(query, n));
    return retrieval::reciprocal_rank_fusion(lists, n, k_);
}

FiDInput assemble_fid_inputs(std::string_view question, const std::vector<corpus::Passage>& passages) {
    if (passages.empty()) throw std::invalid_argument("assemble_fid_inputs: no passages");
    FiDInput input;
    input.segments.reserve(passages.size());
    for (const auto& p : passages) {
        input.segments.push_back("question: " + std::string(question) + " title: " + p.title + " context: " + p.body);
    }
    return input;
}

std::string reader_prompt(const FiDInput& input) {
    std::vector<std::string> lines;
    lines.reserve(input.segments.size());
    for (const auto& s : input.segments) lines.push_back(text::flatten_line(s));
    return text::join(lines, "\n");
}

CandidateAnswer answer_subquestion(std::string_view subquestion, RetrievalBackend& retriever,
                                   const corpus::PassageStore& store, clients::ChatEndpoint& reader, std::size_t n) {
    const auto ranked = retriever.search(subquestion, n);
    std::vector<corpus::Passage> passages;
    CandidateAnswer out;
    for (const auto& r : ranked) {
        passages.push_back(store.at(r.id));
        out.supporting_passages.push_back(r.id);
    }
    FiDInput input;
    if (passages.empty()) {
        input.segments.push_back("question: " + std::string(subquestion) + " title: none context: none");
    } else {
        input = assemble_fid_inputs(subquestion, passages);
    }
    out.reader_raw = reader.chat(reader_prompt(input));
    const auto first_line = text::split(out.reader_raw, "\n").front();
    out.text = std::string(text::trim(first_line));
    return out;
}

std::string_view to_string(Choice choice) {
    switch (choice) {
        case Choice::KeepOriginal: return "KeepOriginal";
        case Choice::UseCandidate: return "UseCandidate";
        case Choice::NewAnswer: return "NewAnswer";
    }
    return "Unknown";
}

std::string verifier_prompt(std::string_view subquestion, std::string_view original, std::string_view candidate) {
    return "Question: " + std::string(subquestion) + "\nAnswer A: " + std::string(original) +
           "\nAnswer B: " + std::string(candidate) +
           "\nWhich answer is correct? Reply 'A', 'B', or give the correct answer.";
}

std::string verifier_prompt_without_candidate(std::string_view subquestion, std::string_view original) {
    return "Question: " + std::string(subquestion) + "\nAnswer A: " + std::string(original) +
           "\nIs answer A correct? Reply 'A', or give the correct answer.";
}

namespace {

// Strips wrapping such as "(A)", "A." or "'B'" down to the bare label.
std::string bare_label(std::string_view response) {
    std::string s(text::trim(response));
    auto strip = [](char c) { return c == '(' || c == ')' || c == '.' || c == '\'' || c == '"' || c == ':'; };
    while (!s.empty() && strip(s.front())) s.erase(s.begin());
    while (!s.empty() && strip(s.back())) s.pop_back();
    return s;
}

}  // namespace

Verdict verify(std::string_view subquestion, std::string_view original, const CandidateAnswer& candidate,
               clients::ChatEndpoint& verifier) {
    if (eval::normalize(original) == eval::normalize(candidate.text)) {
        return {Choice::KeepOriginal, std::string(original), false};
    }
    std::string response;
    try {
        response = verifier.chat(verifier_prompt(subquestion, original, candidate.text));
    } catch (const clients::EndpointError&) {
        return {Choice::KeepOriginal, std::string(original), true};
    } catch (const clients::ProtocolError&) {
        return {Choice::KeepOriginal, std::string(original), true};
    }
    const auto first_line = std::string(text::trim(text::split(text::trim(response), "\n").front()));
    const auto label = bare_label(first_line);
    if (label == "A") return {Choice::KeepOriginal, std::string(original), true};
    if (label == "B") return {Choice::UseCandidate, candidate.text, true};
    if (first_line.empty()) return {Choice::KeepOriginal, std::string(original), true};
    // A verbatim restatement of either answer counts as choosing it.
    const auto restated = eval::normalize(first_line);
    if (restated == eval::normalize(original)) return {Choice::KeepOriginal, std::string(original), true};
    if (restated == eval::normalize(candidate.text)) return {Choice::UseCandidate, candidate.text, true};
    return {Choice::NewAnswer, first_line, true};
}

Verdict verify_without_candidate(std::string_view subquestion, std::string_view original,
                                 clients::ChatEndpoint& verifier) {
    std::string response;
    try {
        response = verifier.chat(verifier_prompt_without_candidate(subquestion, original));
    } catch (const clients::EndpointError&) {
        return {Choice::KeepOriginal, std::string(original), true};
    } catch (const clients::ProtocolError&) {
        return {Choice::KeepOriginal, std::string(original), true};
    }
    const auto first_line = std::string(text::trim(text::split(text::trim(response), "\n").front()));
    const auto label = bare_label(first_line);
    if (first_line.empty() || label == "A" || label == "B" ||
        eval::normalize(first_line) == eval::normalize(original)) {
        return {Choice::KeepOriginal, std::string(original), true};
    }
    return {Choice::NewAnswer, first_line, true};
}

}  // namespace kdcot::qa

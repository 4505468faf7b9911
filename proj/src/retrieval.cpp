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

#include "kdcot/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>

#include "kdcot/eval.hpp"
#include "kdcot/io.hpp"
#include "kdcot/text.hpp"

namespace kdcot::retrieval {

namespace {

constexpr std::string_view kIndexHeader = "kdcot-bm25 v1";
constexpr char kVectorMagic[8] = {'K', 'D', 'V', 'E', 'C', '1', '\0', '\0'};

bool ranks_before(const ScoredPassage& a, const ScoredPassage& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
}

}  // namespace

void sort_and_truncate(RankedList& list, std::size_t n) {
    if (list.size() > n) {
        std::partial_sort(list.begin(), list.begin() + static_cast<std::ptrdiff_t>(n), list.end(), ranks_before);
        list.resize(n);
    } else {
        std::sort(list.begin(), list.end(), ranks_before);
    }
}

std::vector<std::string> tokenize(std::string_view input) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : input) {
        const auto u = static_cast<unsigned char>(c);
        if ((u >= '0' && u <= '9') || (u >= 'a' && u <= 'z') || u >= 0x80) {
            cur.push_back(c);
        } else if (u >= 'A' && u <= 'Z') {
            cur.push_back(static_cast<char>(u - 'A' + 'a'));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

// ---------------------------------------------------------------------------
// BM25

Bm25Index Bm25Index::build(const corpus::PassageStore& store, Bm25Params params) {
    if (store.empty()) throw std::invalid_argument("build_index: empty passage store");
    Bm25Index index;
    index.params_ = params;
    std::uint64_t total = 0;
    for (const auto& p : store.passages()) {
        const auto doc = static_cast<std::uint32_t>(index.doc_ids_.size());
        index.doc_ids_.push_back(p.id);
        const auto tokens = tokenize(p.body);
        index.doc_lengths_.push_back(static_cast<std::uint32_t>(tokens.size()));
        total += tokens.size();
        std::map<std::string_view, std::uint32_t> tf;
        for (const auto& t : tokens) ++tf[t];
        for (const auto& [term, count] : tf) index.postings_[std::string(term)].push_back({doc, count});
    }
    index.avg_doc_length_ = static_cast<double>(total) / static_cast<double>(index.doc_ids_.size());
    return index;
}

std::span<const Posting> Bm25Index::postings(std::string_view term) const {
    auto it = postings_.find(std::string(term));
    if (it == postings_.end()) return {};
    return it->second;
}

double Bm25Index::idf(std::size_t df) const {
    const double n = static_cast<double>(doc_ids_.size());
    const double d = static_cast<double>(df);
    return std::log(1.0 + (n - d + 0.5) / (d + 0.5));
}

RankedList Bm25Index::search(std::string_view query, std::size_t n) const {
    if (n == 0) throw std::invalid_argument("bm25_search: N must be >= 1");
    std::vector<double> scores(doc_ids_.size(), 0.0);
    std::vector<std::uint32_t> touched;
    const double k1 = params_.k1;
    const double b = params_.b;
    for (const auto& term : tokenize(query)) {
        auto plist = postings(term);
        if (plist.empty()) continue;
        const double w = idf(plist.size());
        for (const auto& p : plist) {
            const double tf = p.tf;
            const double dl = doc_lengths_[p.doc];
            const double norm = k1 * (1.0 - b + b * dl / avg_doc_length_);
            if (scores[p.doc] == 0.0) touched.push_back(p.doc);
            scores[p.doc] += w * (tf * (k1 + 1.0)) / (tf + norm);
        }
    }
    RankedList out;
    out.reserve(touched.size());
    for (auto doc : touched) {
        if (scores[doc] > 0.0) out.push_back({doc_ids_[doc], scores[doc]});
    }
    sort_and_truncate(out, n);
    return out;
}

void Bm25Index::save(const std::filesystem::path& path) const {
    io::json j;
    j["k1"] = params_.k1;
    j["b"] = params_.b;
    j["doc_ids"] = doc_ids_;
    j["doc_lengths"] = doc_lengths_;
    io::json postings = io::json::object();
    for (const auto& [term, plist] : postings_) {
        io::json arr = io::json::array();
        for (const auto& p : plist) arr.push_back({p.doc, p.tf});
        postings[term] = std::move(arr);
    }
    j["postings"] = std::move(postings);
    io::write_file_atomic(path, std::string(kIndexHeader) + "\n" + j.dump() + "\n");
}

Bm25Index Bm25Index::load(const std::filesystem::path& path) {
    const std::string content = io::read_file(path);
    const auto nl = content.find('\n');
    if (nl == std::string::npos || content.substr(0, nl) != kIndexHeader) {
        throw io::FormatError(path.string() + ": not a kdcot BM25 index (expected header '" + std::string(kIndexHeader) +
                              "')");
    }
    Bm25Index index;
    try {
        const auto j = io::json::parse(content.substr(nl + 1));
        index.params_ = {j.at("k1").get<double>(), j.at("b").get<double>()};
        index.doc_ids_ = j.at("doc_ids").get<std::vector<std::string>>();
        index.doc_lengths_ = j.at("doc_lengths").get<std::vector<std::uint32_t>>();
        if (index.doc_ids_.size() != index.doc_lengths_.size() || index.doc_ids_.empty()) {
            throw io::FormatError(path.string() + ": inconsistent document tables");
        }
        std::uint64_t total = 0;
        for (auto l : index.doc_lengths_) total += l;
        index.avg_doc_length_ = static_cast<double>(total) / static_cast<double>(index.doc_ids_.size());
        for (const auto& [term, arr] : j.at("postings").items()) {
            auto& plist = index.postings_[term];
            for (const auto& p : arr) {
                Posting posting{p.at(0).get<std::uint32_t>(), p.at(1).get<std::uint32_t>()};
                if (posting.doc >= index.doc_ids_.size()) throw io::FormatError(path.string() + ": posting out of range");
                plist.push_back(posting);
            }
        }
    } catch (const io::json::exception& e) {
        throw io::FormatError(path.string() + ": " + e.what());
    }
    return index;
}

// ---------------------------------------------------------------------------
// Dense

void DenseVectors::add(std::string id, Embedding vector) {
    if (vector.empty()) throw std::invalid_argument("dense vector for '" + id + "' is empty");
    if (dim_ == 0) {
        dim_ = vector.size();
    } else if (vector.size() != dim_) {
        throw std::invalid_argument("dense vector for '" + id + "' has dimension " + std::to_string(vector.size()) +
                                    ", expected " + std::to_string(dim_));
    }
    if (by_id_.contains(id)) throw std::invalid_argument("duplicate dense vector id '" + id + "'");
    by_id_.emplace(id, ids_.size());
    ids_.push_back(std::move(id));
    vectors_.push_back(normalized(std::move(vector)));
}

DenseVectors DenseVectors::load(const std::filesystem::path& path) {
    DenseVectors out;
    if (path.extension() == ".jsonl") {
        for (const auto& j : io::read_jsonl(path)) {
            try {
                out.add(j.at("id").get<std::string>(), j.at("vector").get<Embedding>());
            } catch (const io::json::exception& e) {
                throw io::FormatError(path.string() + ": " + e.what());
            }
        }
        return out;
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io::FormatError("cannot open " + path.string());
    char magic[8];
    std::uint32_t dim = 0;
    std::uint64_t count = 0;
    in.read(magic, 8);
    in.read(reinterpret_cast<char*>(&dim), sizeof dim);
    in.read(reinterpret_cast<char*>(&count), sizeof count);
    if (!in || std::memcmp(magic, kVectorMagic, 8) != 0) throw io::FormatError(path.string() + ": bad vector file header");
    std::vector<float> buf(dim);
    for (std::uint64_t i = 0; i < count; ++i) {
        std::uint32_t len = 0;
        in.read(reinterpret_cast<char*>(&len), sizeof len);
        std::string id(len, '\0');
        in.read(id.data(), len);
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(dim * sizeof(float)));
        if (!in) throw io::FormatError(path.string() + ": truncated vector file");
        out.add(std::move(id), Embedding(buf.begin(), buf.end()));
    }
    return out;
}

void DenseVectors::save(const std::filesystem::path& path) const {
    if (path.extension() == ".jsonl") {
        std::vector<io::json> lines;
        for (std::size_t i = 0; i < ids_.size(); ++i) lines.push_back({{"id", ids_[i]}, {"vector", vectors_[i]}});
        io::write_jsonl_atomic(path, lines);
        return;
    }
    std::string out(kVectorMagic, 8);
    auto put = [&](const void* p, std::size_t n) { out.append(static_cast<const char*>(p), n); };
    const auto dim = static_cast<std::uint32_t>(dim_);
    const auto count = static_cast<std::uint64_t>(ids_.size());
    put(&dim, sizeof dim);
    put(&count, sizeof count);
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        const auto len = static_cast<std::uint32_t>(ids_[i].size());
        put(&len, sizeof len);
        out += ids_[i];
        for (double x : vectors_[i]) {
            const auto f = static_cast<float>(x);
            put(&f, sizeof f);
        }
    }
    io::write_file_atomic(path, out);
}

RankedList dense_search(const DenseVectors& vectors, std::span<const double> query, std::size_t n) {
    if (n == 0) throw std::invalid_argument("dense_search: N must be >= 1");
    if (vectors.size() == 0) return {};
    if (query.size() != vectors.dim()) {
        throw std::invalid_argument("dense_search: query dimension " + std::to_string(query.size()) +
                                    " does not match " + std::to_string(vectors.dim()));
    }
    RankedList out;
    out.reserve(vectors.size());
    for (std::size_t i = 0; i < vectors.size(); ++i) out.push_back({vectors.ids()[i], dot(vectors.vectors()[i], query)});
    sort_and_truncate(out, n);
    return out;
}

// ---------------------------------------------------------------------------
// Metrics

namespace {

std::vector<std::string> top_bodies(const RankedList& results, const corpus::PassageStore& store, std::size_t n) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < std::min(n, results.size()); ++i) {
        out.push_back(eval::normalize(store.at(results[i].id).body));
    }
    return out;
}

}  // namespace

bool hit_at_n(const RankedList& results, const corpus::PassageStore& store, const std::vector<std::string>& answers,
              std::size_t n) {
    if (n == 0) throw std::invalid_argument("hit_at_n: n must be >= 1");
    const auto bodies = top_bodies(results, store, n);
    for (const auto& a : answers) {
        const auto na = eval::normalize(a);
        if (na.empty()) continue;
        for (const auto& body : bodies) {
            if (body.find(na) != std::string::npos) return true;
        }
    }
    return false;
}

double recall_at_n(const RankedList& results, const corpus::PassageStore& store,
                   const std::vector<std::string>& answers, std::size_t n) {
    if (answers.empty()) throw std::invalid_argument("recall_at_n: empty answer list");
    if (n == 0) throw std::invalid_argument("recall_at_n: n must be >= 1");
    std::set<std::string> distinct;
    for (const auto& a : answers) {
        auto na = eval::normalize(a);
        if (!na.empty()) distinct.insert(std::move(na));
    }
    if (distinct.empty()) return 0.0;
    const auto bodies = top_bodies(results, store, n);
    std::size_t covered = 0;
    for (const auto& a : distinct) {
        for (const auto& body : bodies) {
            if (body.find(a) != std::string::npos) {
                ++covered;
                break;
            }
        }
    }
    return static_cast<double>(covered) / static_cast<double>(distinct.size());
}

RankedList reciprocal_rank_fusion(const std::vector<RankedList>& lists, std::size_t n, double k) {
    std::map<std::string, double> fused;
    for (const auto& list : lists) {
        for (std::size_t rank = 0; rank < list.size(); ++rank) fused[list[rank].id] += 1.0 / (k + static_cast<double>(rank + 1));
    }
    RankedList out;
    out.reserve(fused.size());
    for (auto& [id, score] : fused) out.push_back({id, score});
    sort_and_truncate(out, n);
    return out;
}

}  // namespace kdcot::retrieval

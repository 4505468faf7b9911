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

#include "kdcot/corpus.hpp"

#include <map>

#include "kdcot/io.hpp"
#include "kdcot/text.hpp"

namespace kdcot::corpus {

std::string_view to_string(Source source) { return source == Source::KB ? "kb" : "text"; }

PassageStore::PassageStore(std::vector<Passage> passages) {
    for (auto& p : passages) add(std::move(p));
}

void PassageStore::add(Passage p) {
    if (text::trim(p.body).empty()) throw std::invalid_argument("passage '" + p.id + "' has an empty body");
    if (by_id_.contains(p.id)) throw DuplicatePassageId("duplicate passage id '" + p.id + "'");
    by_id_.emplace(p.id, passages_.size());
    passages_.push_back(std::move(p));
}

void PassageStore::merge(const std::vector<Passage>& passages) {
    for (const auto& p : passages) add(p);
}

const Passage* PassageStore::find(std::string_view id) const {
    auto it = by_id_.find(std::string(id));
    return it == by_id_.end() ? nullptr : &passages_[it->second];
}

const Passage& PassageStore::at(std::string_view id) const {
    if (const auto* p = find(id)) return *p;
    throw std::out_of_range("no passage with id '" + std::string(id) + "'");
}

std::string render_triple(const Triple& t) { return t.head + " " + t.relation + " " + t.tail + "."; }

std::vector<Passage> linearize_subgraph(const std::string& head, const std::vector<Triple>& triples,
                                        std::size_t chunk_words) {
    if (chunk_words == 0) throw std::invalid_argument("chunk budget must be positive");
    std::vector<std::vector<std::string>> chunks;
    std::size_t words_in_chunk = 0;
    for (const auto& t : triples) {
        if (t.head != head) {
            throw std::invalid_argument("linearize_subgraph: triple head '" + t.head + "' differs from '" + head + "'");
        }
        if (text::trim(t.head).empty() || text::trim(t.relation).empty() || text::trim(t.tail).empty()) {
            throw std::invalid_argument("linearize_subgraph: empty triple field under head '" + head + "'");
        }
        std::string rendition = render_triple(t);
        const std::size_t words = text::split_ws(rendition).size();
        if (chunks.empty() || words_in_chunk + words > chunk_words) {
            chunks.emplace_back();
            words_in_chunk = 0;
        }
        chunks.back().push_back(std::move(rendition));
        words_in_chunk += words;
    }
    std::vector<Passage> out;
    for (std::size_t k = 0; k < chunks.size(); ++k) {
        Passage p;
        p.id = chunks.size() == 1 ? head : head + "#" + std::to_string(k);
        p.title = head;
        p.body = text::join(chunks[k], " ");
        p.source = Source::KB;
        out.push_back(std::move(p));
    }
    return out;
}

std::vector<Passage> linearize_kb(const std::vector<Triple>& triples, std::size_t chunk_words) {
    std::vector<std::string> order;
    std::map<std::string, std::vector<Triple>> groups;
    for (const auto& t : triples) {
        auto [it, inserted] = groups.try_emplace(t.head);
        if (inserted) order.push_back(t.head);
        it->second.push_back(t);
    }
    std::vector<Passage> out;
    for (const auto& head : order) {
        auto chunk = linearize_subgraph(head, groups.at(head), chunk_words);
        out.insert(out.end(), std::make_move_iterator(chunk.begin()), std::make_move_iterator(chunk.end()));
    }
    return out;
}

std::vector<Passage> ingest_text(const std::vector<Document>& documents, std::size_t chunk_words) {
    if (chunk_words == 0) throw std::invalid_argument("chunk budget must be positive");
    std::vector<Passage> out;
    for (const auto& doc : documents) {
        const auto words = text::split_ws(doc.body);
        for (std::size_t begin = 0, k = 0; begin < words.size(); begin += chunk_words, ++k) {
            const std::size_t end = std::min(words.size(), begin + chunk_words);
            Passage p;
            p.id = doc.title + "#" + std::to_string(k);
            p.title = doc.title;
            p.body = text::join(std::vector<std::string>(words.begin() + static_cast<std::ptrdiff_t>(begin),
                                                         words.begin() + static_cast<std::ptrdiff_t>(end)),
                                " ");
            p.source = Source::Text;
            out.push_back(std::move(p));
        }
    }
    return out;
}

std::vector<Triple> read_triples_tsv(const std::filesystem::path& path) {
    std::vector<Triple> out;
    int line_no = 0;
    for (const auto& raw : text::split(io::read_file(path), "\n")) {
        ++line_no;
        std::string line = raw;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (text::trim(line).empty()) continue;
        auto cols = text::split(line, "\t");
        if (cols.size() != 3) {
            throw io::FormatError(path.string() + ":" + std::to_string(line_no) + ": expected 3 tab-separated columns");
        }
        Triple t{std::string(text::trim(cols[0])), std::string(text::trim(cols[1])),
                 std::string(text::trim(cols[2]))};
        if (t.head.empty() || t.relation.empty() || t.tail.empty()) {
            throw io::FormatError(path.string() + ":" + std::to_string(line_no) + ": empty triple field");
        }
        out.push_back(std::move(t));
    }
    return out;
}

std::vector<Document> read_documents_jsonl(const std::filesystem::path& path) {
    std::vector<Document> out;
    for (const auto& j : io::read_jsonl(path)) {
        try {
            out.push_back({j.at("title").get<std::string>(), j.at("text").get<std::string>()});
        } catch (const io::json::exception& e) {
            throw io::FormatError(path.string() + ": document record: " + e.what());
        }
    }
    return out;
}

void write_store_tsv(const PassageStore& store, const std::filesystem::path& path) {
    std::string content = "id\ttitle\ttext\tsource\n";
    for (const auto& p : store.passages()) {
        content += text::flatten_line(p.id) + "\t" + text::flatten_line(p.title) + "\t" + text::flatten_line(p.body) +
                   "\t" + std::string(to_string(p.source)) + "\n";
    }
    io::write_file_atomic(path, content);
}

PassageStore read_store_tsv(const std::filesystem::path& path) {
    PassageStore store;
    int line_no = 0;
    for (const auto& raw : text::split(io::read_file(path), "\n")) {
        ++line_no;
        std::string line = raw;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line_no == 1 && text::starts_with(line, "id\t")) continue;
        auto cols = text::split(line, "\t");
        if (cols.size() != 4) {
            throw io::FormatError(path.string() + ":" + std::to_string(line_no) + ": expected 4 tab-separated columns");
        }
        Passage p{cols[0], cols[1], cols[2], cols[3] == "kb" ? Source::KB : Source::Text};
        try {
            store.add(std::move(p));
        } catch (const std::invalid_argument& e) {
            throw io::FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return store;
}

}  // namespace kdcot::corpus

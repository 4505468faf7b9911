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

#include "kdcot/prompt_store.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "kdcot/io.hpp"
#include "kdcot/text.hpp"

namespace kdcot::prompts {

std::string_view to_string(DemoSource source) {
    return source == DemoSource::HumanAnchor ? "anchor" : "constructed";
}

Pool::Pool(std::vector<Demonstration> items) {
    for (auto& d : items) add(std::move(d));
}

void Pool::add(Demonstration demo) {
    if (demo.embedding.empty()) throw std::invalid_argument("Pool::add: empty embedding");
    if (dim_ == 0) {
        dim_ = demo.embedding.size();
    } else if (demo.embedding.size() != dim_) {
        throw std::invalid_argument("Pool::add: embedding dimension " + std::to_string(demo.embedding.size()) +
                                    " does not match pool dimension " + std::to_string(dim_));
    }
    demo.embedding = normalized(std::move(demo.embedding));
    items_.push_back(std::move(demo));
}

const Demonstration& select_top1(const Pool& pool, std::span<const double> query) {
    auto best = select_topk(pool, query, 1);
    return *best.front();
}

std::vector<const Demonstration*> select_topk(const Pool& pool, std::span<const double> query, std::size_t k) {
    if (pool.empty()) throw std::invalid_argument("select: empty pool");
    if (query.size() != pool.dim()) {
        throw std::invalid_argument("select: query dimension " + std::to_string(query.size()) +
                                    " does not match pool dimension " + std::to_string(pool.dim()));
    }
    const auto& items = pool.items();
    std::vector<double> scores(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) scores[i] = dot(items[i].embedding, query);
    std::vector<std::size_t> order(items.size());
    std::iota(order.begin(), order.end(), 0);
    k = std::min(k, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](std::size_t a, std::size_t b) {
                          if (scores[a] != scores[b]) return scores[a] > scores[b];
                          return a < b;
                      });
    std::vector<const Demonstration*> out;
    for (std::size_t i = 0; i < k; ++i) out.push_back(&items[order[i]]);
    return out;
}

std::string assemble_inference_prompt(std::string_view instruction, const Demonstration& demo,
                                      std::string_view question) {
    if (!demo.record.finished) throw std::invalid_argument("inference prompt: demonstration is not finished");
    std::string out(instruction);
    out += "\n\n";
    out += cot::serialize_cot(demo.record, /*include_hint=*/false);
    out += "\n\nQuestion: ";
    out += question;
    out += "\nThought 1:";
    return out;
}

std::string assemble_construction_prompt(std::string_view instruction, const Demonstration& demo,
                                         std::string_view question, const std::vector<std::string>& gold,
                                         const std::optional<std::vector<std::string>>& composition) {
    if (gold.empty()) throw std::invalid_argument("construction prompt: empty gold answers");
    if (!demo.record.finished) throw std::invalid_argument("construction prompt: demonstration is not finished");
    std::vector<std::string> hint = gold;
    if (composition) hint.insert(hint.end(), composition->begin(), composition->end());
    std::string out(instruction);
    out += "\n\n";
    out += cot::serialize_cot(demo.record, /*include_hint=*/true);
    out += "\n\nQuestion: ";
    out += question;
    out += "\nHint: " + text::join(hint, "; ");
    out += "\nThought 1:";
    return out;
}

std::string assemble_baseline_prompt(std::string_view instruction, const BaselineContext& context,
                                     std::string_view question) {
    std::string out(instruction);
    out += "\n\n";
    if (const auto* r = std::get_if<Retrieval4Passages>(&context)) {
        if (r->passages.size() != 4) {
            throw std::invalid_argument("baseline prompt: expected 4 passages, got " +
                                        std::to_string(r->passages.size()));
        }
        for (const auto& p : r->passages) out += "Title: " + p.title + "\n" + p.body + "\n\n";
    } else if (const auto* q = std::get_if<QaPairs4Shot>(&context)) {
        if (q->pairs.size() != 4) {
            throw std::invalid_argument("baseline prompt: expected 4 QA pairs, got " +
                                        std::to_string(q->pairs.size()));
        }
        for (const auto& p : q->pairs) out += "Question: " + p.question + "\nAnswer: " + p.answer + "\n\n";
    } else {
        out += std::get<CoTFixed>(context).rationale + "\n\n";
    }
    out += "Question: ";
    out += question;
    out += "\nAnswer:";
    return out;
}

void save_pool(const Pool& pool, const std::filesystem::path& path) {
    std::vector<io::json> lines;
    lines.reserve(pool.size());
    for (const auto& d : pool.items()) {
        io::json j;
        j["question"] = d.record.question;
        j["hint"] = d.record.hint ? io::json(*d.record.hint) : io::json(nullptr);
        j["cot_text"] = cot::serialize_rounds(d.record);
        j["embedding"] = d.embedding;
        j["source"] = to_string(d.source);
        lines.push_back(std::move(j));
    }
    io::write_jsonl_atomic(path, lines);
}

Pool load_pool(const std::filesystem::path& path, const EmbedFn& embed_missing) {
    Pool pool;
    int line = 0;
    for (const auto& j : io::read_jsonl(path)) {
        ++line;
        const std::string where = path.string() + ": record " + std::to_string(line);
        try {
            auto parsed = cot::parse_cot(j.at("cot_text").get<std::string>(), /*require_finish=*/true);
            if (!parsed) {
                throw io::FormatError(where + ": cot_text rejected (" + std::string(cot::to_string(parsed.error().reason)) +
                                      " at line " + std::to_string(parsed.error().line) + ")");
            }
            Demonstration d;
            d.record = std::move(parsed.record());
            d.record.question = j.at("question").get<std::string>();
            if (j.contains("hint") && !j.at("hint").is_null()) d.record.hint = io::string_list(j, "hint");
            if (j.contains("embedding") && !j["embedding"].is_null()) {
                d.embedding = j["embedding"].get<Embedding>();
            } else if (embed_missing) {
                d.embedding = embed_missing(d.record.question);
            } else {
                throw io::FormatError(where + ": missing embedding");
            }
            d.source = j.value("source", std::string("anchor")) == "constructed" ? DemoSource::Constructed
                                                                                 : DemoSource::HumanAnchor;
            pool.add(std::move(d));
        } catch (const io::json::exception& e) {
            throw io::FormatError(where + ": " + e.what());
        } catch (const std::invalid_argument& e) {
            throw io::FormatError(where + ": " + e.what());
        }
    }
    return pool;
}

}  // namespace kdcot::prompts

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

#include "kdcot/collection_builder.hpp"

#include <future>
#include <set>

#include "kdcot/eval.hpp"
#include "kdcot/text.hpp"

namespace kdcot::collection {

namespace {

struct Attempt {
    std::optional<prompts::Demonstration> admitted;
    bool endpoint_failed = false;
};

Attempt attempt_item(const TrainItem& item, const Embedding& embedding, const prompts::Pool& snapshot,
                     clients::ChatEndpoint& chat, const BuildOptions& options) {
    const auto& demo = prompts::select_top1(snapshot, embedding);
    const auto prompt = prompts::assemble_construction_prompt(options.instruction, demo, item.question, item.answers,
                                                              item.composition_answers);
    std::string output;
    try {
        output = chat.chat(prompt);
    } catch (const clients::EndpointError&) {
        return {std::nullopt, true};
    } catch (const clients::ProtocolError&) {
        return {std::nullopt, true};
    }
    const std::string full = complete_from_stub("Thought 1:", output);
    if (!answer_match(full, item.answers)) return {};
    auto parsed = cot::parse_cot(full, /*require_finish=*/true);
    prompts::Demonstration d;
    d.record = std::move(parsed.record());
    d.record.question = item.question;
    std::vector<std::string> hint = item.answers;
    if (item.composition_answers) {
        hint.insert(hint.end(), item.composition_answers->begin(), item.composition_answers->end());
    }
    d.record.hint = std::move(hint);
    d.embedding = embedding;
    d.source = prompts::DemoSource::Constructed;
    return {std::move(d), false};
}

}  // namespace

bool answer_match(std::string_view output, const std::vector<std::string>& gold) {
    auto parsed = cot::parse_cot(output, /*require_finish=*/true);
    if (!parsed) return false;
    std::set<std::string> finish;
    for (const auto& a : parsed.record().final_answers()) {
        if (auto n = eval::normalize(a); !n.empty()) finish.insert(std::move(n));
    }
    for (const auto& g : gold) {
        if (auto n = eval::normalize(g); !n.empty() && finish.contains(n)) return true;
    }
    return false;
}

std::string complete_from_stub(std::string_view stub, std::string_view completion) {
    const auto body = text::trim(completion);
    if (text::starts_with(body, "Thought ") || text::starts_with(body, "Question:") ||
        text::starts_with(body, "Hint:")) {
        return std::string(body);
    }
    return std::string(stub) + " " + std::string(body);
}

BuildResult build_collection(const std::vector<TrainItem>& train, const std::vector<prompts::Demonstration>& anchors,
                             clients::ChatEndpoint& chat, clients::EmbedEndpoint& embed,
                             const BuildOptions& options) {
    if (anchors.empty()) throw std::invalid_argument("build_collection: empty anchor set");
    if (options.max_iterations < 0) throw std::invalid_argument("build_collection: negative iteration cap");

    BuildResult result;
    for (const auto& a : anchors) {
        if (!a.record.finished) throw std::invalid_argument("build_collection: anchor without Finish");
        result.pool.add(a);
    }

    std::vector<Embedding> embeddings;
    if (!train.empty()) {
        std::vector<std::string> questions;
        questions.reserve(train.size());
        for (const auto& item : train) questions.push_back(item.question);
        embeddings = embed.embed(questions);
    }

    std::set<std::string> seen_ids;
    for (const auto& item : train) {
        if (item.answers.empty()) throw std::invalid_argument("training item '" + item.id + "' has no answers");
        if (!seen_ids.insert(item.id).second) throw std::invalid_argument("duplicate training item id '" + item.id + "'");
    }

    std::vector<std::size_t> remaining(train.size());
    for (std::size_t i = 0; i < train.size(); ++i) remaining[i] = i;

    auto& report = result.report;
    while (!remaining.empty() && report.iterations_run < options.max_iterations) {
        const prompts::Pool snapshot = result.pool;
        std::vector<Attempt> attempts(remaining.size());
        const std::size_t width = std::max<std::size_t>(1, options.parallelism);
        for (std::size_t begin = 0; begin < remaining.size(); begin += width) {
            const std::size_t end = std::min(remaining.size(), begin + width);
            if (width == 1) {
                const auto idx = remaining[begin];
                attempts[begin] = attempt_item(train[idx], embeddings[idx], snapshot, chat, options);
                continue;
            }
            std::vector<std::future<Attempt>> futures;
            for (std::size_t k = begin; k < end; ++k) {
                const auto idx = remaining[k];
                futures.push_back(std::async(std::launch::async, [&, idx] {
                    return attempt_item(train[idx], embeddings[idx], snapshot, chat, options);
                }));
            }
            for (std::size_t k = begin; k < end; ++k) attempts[k] = futures[k - begin].get();
        }

        int admitted = 0;
        std::vector<std::size_t> still;
        for (std::size_t k = 0; k < remaining.size(); ++k) {
            auto& a = attempts[k];
            if (a.endpoint_failed) ++report.endpoint_failures;
            if (a.admitted) {
                result.pool.add(std::move(*a.admitted));
                ++admitted;
            } else {
                still.push_back(remaining[k]);
            }
        }
        remaining = std::move(still);
        report.admitted_per_iteration.push_back(admitted);
        ++report.iterations_run;
    }
    for (auto idx : remaining) report.unresolved.push_back(train[idx].id);
    return result;
}

std::vector<TrainItem> read_train_jsonl(const std::filesystem::path& path) {
    std::vector<TrainItem> out;
    int n = 0;
    for (const auto& j : io::read_jsonl(path)) {
        ++n;
        try {
            TrainItem item;
            item.id = j.contains("id") ? (j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump())
                                       : std::to_string(n);
            item.question = j.at("question").get<std::string>();
            item.answers = io::string_list(j, "answers");
            if (j.contains("composition_answers") && !j["composition_answers"].is_null()) {
                item.composition_answers = io::string_list(j, "composition_answers");
            }
            if (item.answers.empty()) throw io::FormatError("no answers");
            out.push_back(std::move(item));
        } catch (const std::exception& e) {
            throw io::FormatError(path.string() + ": record " + std::to_string(n) + ": " + e.what());
        }
    }
    return out;
}

io::json to_json(const BuildReport& report) {
    return {
        {"iterations_run", report.iterations_run},
        {"admitted_per_iteration", report.admitted_per_iteration},
        {"unresolved", report.unresolved},
        {"endpoint_failures", report.endpoint_failures},
    };
}

}  // namespace kdcot::collection

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

#include "kdcot/interaction.hpp"

#include <set>
#include <stdexcept>

#include "kdcot/collection_builder.hpp"
#include "kdcot/text.hpp"

namespace kdcot::interaction {

namespace {

constexpr std::string_view kFirstStub = "Thought 1:";

bool within_round_cap(const cot::CoTRecord& record, const Config& config) {
    return static_cast<int>(record.rounds.size()) <= config.max_rounds;
}

// Asks the model until a finished rationale parses, at most
// 1 + require_finish_retries times.
CoTOutcome generate(clients::ChatEndpoint& llm, const std::string& prompt, const Config& config,
                    const std::function<std::string(const std::string&)>& assemble) {
    cot::MalformedError last{cot::MalformedReason::MissingThought, 1};
    for (int attempt = 0; attempt <= config.require_finish_retries; ++attempt) {
        const std::string full = assemble(llm.chat(prompt));
        auto parsed = cot::parse_cot(full, /*require_finish=*/true);
        if (!parsed) {
            last = parsed.error();
            continue;
        }
        if (!within_round_cap(parsed.record(), config)) {
            last = {cot::MalformedReason::NoFinish, config.max_rounds + 1};
            continue;
        }
        return std::move(parsed.record());
    }
    return last;
}

// Joins the corrected prefix with the model's continuation. A continuation
// that restates the chain from round 1 contributes only its later rounds.
std::string continue_prefix(const cot::CoTRecord& prefix, std::string_view completion) {
    const int k = static_cast<int>(prefix.rounds.size());
    const std::string next_stub = "Thought " + std::to_string(k + 1) + ":";
    const auto body = text::trim(completion);
    const std::string prefix_text = cot::serialize_rounds(prefix);
    if (k > 0 && text::starts_with(body, "Thought 1:")) {
        auto restated = cot::parse_cot(body, /*require_finish=*/false);
        if (restated && static_cast<int>(restated.record().rounds.size()) > k) {
            cot::CoTRecord tail;
            tail.rounds.assign(restated.record().rounds.begin() + k, restated.record().rounds.end());
            return prefix_text + "\n" + cot::serialize_rounds(tail);
        }
    }
    if (text::starts_with(body, next_stub)) return prefix_text + "\n" + std::string(body);
    return prefix_text + "\n" + next_stub + " " + std::string(body);
}

bool correct(const std::vector<std::string>& answers, bool malformed, const std::vector<std::string>& gold) {
    eval::Prediction p;
    p.answer_texts = answers;
    p.malformed = malformed;
    return eval::hits_at_1(p, gold);
}

const std::vector<std::string>& gold_for(const InteractionTrace& t, const eval::GoldMap& gold) {
    if (!t.id.empty()) {
        if (auto it = gold.find(t.id); it != gold.end()) return it->second;
    }
    if (auto it = gold.find(t.question); it != gold.end()) return it->second;
    throw std::out_of_range("no gold answers for question '" + (t.id.empty() ? t.question : t.id) + "'");
}

}  // namespace

std::string_view to_string(Mode mode) {
    switch (mode) {
        case Mode::KdCoT: return "kdcot";
        case Mode::NoRetrieveThenRead: return "no-retrieve-then-read";
        case Mode::NoVerifier: return "no-verifier";
        case Mode::VanillaCoT: return "vanilla-cot";
        case Mode::Retrieval4: return "retrieval-4";
        case Mode::QaPairs4: return "qa-pairs-4";
        case Mode::CoTFixed: return "cot-fixed";
    }
    return "unknown";
}

std::optional<Mode> mode_from_string(std::string_view name) {
    for (auto m : {Mode::KdCoT, Mode::NoRetrieveThenRead, Mode::NoVerifier, Mode::VanillaCoT, Mode::Retrieval4,
                   Mode::QaPairs4, Mode::CoTFixed}) {
        if (to_string(m) == name) return m;
    }
    return std::nullopt;
}

bool is_baseline(Mode mode) {
    return mode == Mode::Retrieval4 || mode == Mode::QaPairs4 || mode == Mode::CoTFixed;
}

std::string_view to_string(Status status) {
    switch (status) {
        case Status::Finished: return "Finished";
        case Status::MalformedFailure: return "MalformedFailure";
        case Status::IterationCapReached: return "IterationCapReached";
    }
    return "Unknown";
}

InteractionTrace run_kdcot(std::string_view question, const prompts::Pool& pool, const Services& services,
                           const Config& config) {
    if (is_baseline(config.mode)) throw std::invalid_argument("run_kdcot: baseline modes go through run_baseline");
    if (pool.empty()) throw std::invalid_argument("run_kdcot: empty demonstration pool");
    if (!services.llm || !services.embed) throw std::invalid_argument("run_kdcot: llm and embed endpoints are required");
    const bool needs_reader = config.mode == Mode::KdCoT || config.mode == Mode::NoVerifier;
    const bool needs_verifier = config.mode == Mode::KdCoT || config.mode == Mode::NoRetrieveThenRead;
    if (needs_reader && (!services.retriever || !services.store || !services.reader)) {
        throw std::invalid_argument("run_kdcot: mode " + std::string(to_string(config.mode)) +
                                    " needs a retriever, a passage store and a reader");
    }
    if (needs_verifier && !services.verifier) {
        throw std::invalid_argument("run_kdcot: mode " + std::string(to_string(config.mode)) + " needs a verifier");
    }

    InteractionTrace trace;
    trace.question = text::flatten_line(question);
    trace.mode = config.mode;

    const auto embedding = services.embed->embed({trace.question}).front();
    const auto& demo = prompts::select_top1(pool, embedding);
    const std::string prompt = prompts::assemble_inference_prompt(config.instruction, demo, trace.question);
    // The regeneration prompt replaces the trailing "Thought 1:" stub with
    // the corrected partial rationale.
    const std::string prompt_head = prompt.substr(0, prompt.size() - kFirstStub.size());

    auto initial = generate(*services.llm, prompt, config, [](const std::string& completion) {
        return collection::complete_from_stub(kFirstStub, completion);
    });
    if (auto* rec = std::get_if<cot::CoTRecord>(&initial)) rec->question = trace.question;
    trace.initial_cot = initial;
    if (std::holds_alternative<cot::MalformedError>(initial)) {
        trace.final_cot = initial;
        trace.status = Status::MalformedFailure;
        return trace;
    }

    cot::CoTRecord current = std::get<cot::CoTRecord>(initial);
    if (config.mode == Mode::VanillaCoT) {
        trace.final_cot = current;
        trace.final_answers = current.final_answers();
        trace.status = Status::Finished;
        return trace;
    }

    std::set<int> verified;
    for (int iteration = 1;; ++iteration) {
        const auto pending = cot::pending_subquestion(current, verified);
        if (!pending) {
            trace.status = Status::Finished;
            break;
        }
        if (iteration > config.max_iterations) {
            trace.status = Status::IterationCapReached;
            break;
        }
        const auto& [k, subquestion] = *pending;
        const std::string original = current.rounds[static_cast<std::size_t>(k - 1)].observation.value_or("");

        IterationRecord rec;
        rec.iteration = iteration;
        rec.round_index = k;
        rec.subquestion = subquestion;
        rec.original_answer = original;

        if (config.mode == Mode::NoRetrieveThenRead) {
            rec.verdict = qa::verify_without_candidate(subquestion, original, *services.verifier);
        } else {
            std::optional<qa::CandidateAnswer> candidate;
            try {
                candidate = qa::answer_subquestion(subquestion, *services.retriever, *services.store,
                                                   *services.reader, config.passages);
            } catch (const clients::EndpointError&) {
            } catch (const clients::ProtocolError&) {
            }
            if (!candidate) {
                rec.verdict = {qa::Choice::KeepOriginal, original, false};
            } else {
                rec.candidate_answer = candidate->text;
                rec.supporting_passages = candidate->supporting_passages;
                if (config.mode == Mode::NoVerifier) {
                    rec.verdict = candidate->text.empty() ? qa::Verdict{qa::Choice::KeepOriginal, original, false}
                                                          : qa::Verdict{qa::Choice::UseCandidate, candidate->text, false};
                } else {
                    rec.verdict = qa::verify(subquestion, original, *candidate, *services.verifier);
                }
            }
        }
        if (rec.verdict.choice != qa::Choice::KeepOriginal && text::trim(rec.verdict.final_text).empty()) {
            rec.verdict = {qa::Choice::KeepOriginal, original, rec.verdict.verifier_called};
        }

        if (rec.verdict.choice == qa::Choice::KeepOriginal) {
            verified.insert(k);
            trace.iterations.push_back(std::move(rec));
            continue;
        }

        rec.regenerated = true;
        cot::CoTRecord prefix = cot::truncate_after(current, k);
        prefix.rounds.back().observation = text::flatten_line(text::trim(rec.verdict.final_text));
        const std::string regen_prompt =
            prompt_head + cot::serialize_rounds(prefix) + "\nThought " + std::to_string(k + 1) + ":";
        trace.iterations.push_back(std::move(rec));

        auto regenerated = generate(*services.llm, regen_prompt, config, [&](const std::string& completion) {
            return continue_prefix(prefix, completion);
        });
        if (auto* err = std::get_if<cot::MalformedError>(&regenerated)) {
            trace.final_cot = *err;
            trace.status = Status::MalformedFailure;
            return trace;
        }
        current = std::move(std::get<cot::CoTRecord>(regenerated));
        current.question = trace.question;
        std::set<int> kept;
        for (int v : verified) {
            if (v < k) kept.insert(v);
        }
        kept.insert(k);
        verified = std::move(kept);
    }
    trace.final_cot = current;
    trace.final_answers = current.final_answers();
    return trace;
}

InteractionTrace run_baseline(std::string_view question, Mode mode, const prompts::Pool& pool,
                              const Services& services, const BaselineConfig& config) {
    if (!services.llm) throw std::invalid_argument("run_baseline: llm endpoint is required");
    InteractionTrace trace;
    trace.question = text::flatten_line(question);
    trace.mode = mode;
    prompts::BaselineContext context;
    switch (mode) {
        case Mode::Retrieval4: {
            if (!services.retriever || !services.store) {
                throw std::invalid_argument("run_baseline: retrieval-4 needs a retriever and a passage store");
            }
            prompts::Retrieval4Passages blocks;
            for (const auto& r : services.retriever->search(trace.question, config.shots)) {
                const auto& p = services.store->at(r.id);
                blocks.passages.push_back({p.title, p.body});
            }
            context = std::move(blocks);
            break;
        }
        case Mode::QaPairs4: {
            if (!services.embed || pool.empty()) {
                throw std::invalid_argument("run_baseline: qa-pairs-4 needs an embed endpoint and a pool");
            }
            const auto embedding = services.embed->embed({trace.question}).front();
            prompts::QaPairs4Shot pairs;
            for (const auto* d : prompts::select_topk(pool, embedding, config.shots)) {
                pairs.pairs.push_back({d->record.question, text::join(d->record.final_answers(), "; ")});
            }
            context = std::move(pairs);
            break;
        }
        case Mode::CoTFixed:
            context = prompts::CoTFixed{config.cot_fixed_rationale};
            break;
        default:
            throw std::invalid_argument("run_baseline: not a baseline mode: " + std::string(to_string(mode)));
    }
    const auto raw = services.llm->chat(prompts::assemble_baseline_prompt(config.instruction, context, trace.question));
    trace.raw_output = raw;
    if (auto answer = text::trim(raw); !answer.empty()) trace.final_answers.emplace_back(answer);
    trace.status = Status::Finished;
    return trace;
}

Transitions correctness_transitions(const std::vector<InteractionTrace>& traces, const eval::GoldMap& gold) {
    Transitions out;
    for (const auto& t : traces) {
        const auto& answers = gold_for(t, gold);
        bool before = false;
        if (t.initial_cot) {
            if (const auto* rec = std::get_if<cot::CoTRecord>(&*t.initial_cot)) {
                before = correct(rec->final_answers(), false, answers);
            }
        } else if (t.raw_output) {
            before = correct({*t.raw_output}, false, answers);
        }
        const bool after = correct(t.final_answers, t.status == Status::MalformedFailure, answers);
        if (!before && after) ++out.corrected;
        else if (before && !after) ++out.broken;
        else if (before) ++out.kept_correct;
        else ++out.kept_incorrect;
    }
    return out;
}

std::map<int, SourceCounts> answer_source_tally(const std::vector<InteractionTrace>& traces, bool per_iteration) {
    std::map<int, SourceCounts> table;
    for (const auto& t : traces) {
        for (const auto& r : t.iterations) {
            auto& row = table[per_iteration ? r.iteration : 0];
            switch (r.verdict.choice) {
                case qa::Choice::KeepOriginal: ++row.kept_by_verifier; break;
                case qa::Choice::UseCandidate: ++row.replaced_by_qa; break;
                case qa::Choice::NewAnswer: ++row.new_by_verifier; break;
            }
        }
    }
    return table;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

io::json outcome_json(const std::optional<CoTOutcome>& outcome) {
    if (!outcome) return nullptr;
    if (const auto* rec = std::get_if<cot::CoTRecord>(&*outcome)) {
        return {{"text", cot::serialize_cot(*rec, /*include_hint=*/true)}, {"finished", rec->finished}};
    }
    const auto& err = std::get<cot::MalformedError>(*outcome);
    return {{"error", {{"reason", std::string(cot::to_string(err.reason))}, {"line", err.line}}}};
}

std::optional<CoTOutcome> outcome_from_json(const io::json& j) {
    if (j.is_null()) return std::nullopt;
    if (j.contains("error")) {
        auto reason = cot::reason_from_string(j["error"].at("reason").get<std::string>());
        if (!reason) throw io::FormatError("unknown malformed reason in trace");
        return CoTOutcome{cot::MalformedError{*reason, j["error"].at("line").get<int>()}};
    }
    auto parsed = cot::parse_cot(j.at("text").get<std::string>(), /*require_finish=*/false);
    if (!parsed) throw io::FormatError("trace rationale text does not parse");
    return CoTOutcome{parsed.record()};
}

}  // namespace

io::json to_json(const InteractionTrace& trace) {
    io::json iterations = io::json::array();
    for (const auto& r : trace.iterations) {
        iterations.push_back({
            {"iteration", r.iteration},
            {"round_index", r.round_index},
            {"subquestion", r.subquestion},
            {"original_answer", r.original_answer},
            {"candidate_answer", r.candidate_answer},
            {"supporting_passages", r.supporting_passages},
            {"verdict",
             {{"choice", std::string(qa::to_string(r.verdict.choice))},
              {"final_text", r.verdict.final_text},
              {"verifier_called", r.verdict.verifier_called}}},
            {"regenerated", r.regenerated},
        });
    }
    io::json j = {
        {"schema", std::string(kTraceSchema)},
        {"id", trace.id},
        {"question", trace.question},
        {"mode", std::string(to_string(trace.mode))},
        {"initial_cot", outcome_json(trace.initial_cot)},
        {"iterations", std::move(iterations)},
        {"final_cot", outcome_json(trace.final_cot)},
        {"final_answers", trace.final_answers},
        {"status", std::string(to_string(trace.status))},
    };
    if (trace.raw_output) j["raw_output"] = *trace.raw_output;
    return j;
}

InteractionTrace trace_from_json(const io::json& j) {
    if (j.value("schema", std::string()) != kTraceSchema) {
        throw io::FormatError("unsupported trace schema '" + j.value("schema", std::string()) + "'");
    }
    try {
        InteractionTrace t;
        t.id = j.value("id", std::string());
        t.question = j.at("question").get<std::string>();
        const auto mode = j.value("mode", std::string("kdcot"));
        t.mode = mode_from_string(mode).value_or(Mode::KdCoT);
        if (!mode_from_string(mode)) throw io::FormatError("unknown trace mode '" + mode + "'");
        t.initial_cot = outcome_from_json(j.at("initial_cot"));
        t.final_cot = outcome_from_json(j.at("final_cot"));
        t.final_answers = io::string_list(j, "final_answers");
        const auto status = j.at("status").get<std::string>();
        if (status == "Finished") t.status = Status::Finished;
        else if (status == "MalformedFailure") t.status = Status::MalformedFailure;
        else if (status == "IterationCapReached") t.status = Status::IterationCapReached;
        else throw io::FormatError("unknown trace status '" + status + "'");
        if (j.contains("raw_output")) t.raw_output = j["raw_output"].get<std::string>();
        for (const auto& r : j.at("iterations")) {
            IterationRecord rec;
            rec.iteration = r.at("iteration").get<int>();
            rec.round_index = r.at("round_index").get<int>();
            rec.subquestion = r.at("subquestion").get<std::string>();
            rec.original_answer = r.at("original_answer").get<std::string>();
            rec.candidate_answer = r.at("candidate_answer").get<std::string>();
            rec.supporting_passages = io::string_list(r, "supporting_passages");
            const auto& v = r.at("verdict");
            const auto choice = v.at("choice").get<std::string>();
            if (choice == "KeepOriginal") rec.verdict.choice = qa::Choice::KeepOriginal;
            else if (choice == "UseCandidate") rec.verdict.choice = qa::Choice::UseCandidate;
            else if (choice == "NewAnswer") rec.verdict.choice = qa::Choice::NewAnswer;
            else throw io::FormatError("unknown verdict choice '" + choice + "'");
            rec.verdict.final_text = v.at("final_text").get<std::string>();
            rec.verdict.verifier_called = v.value("verifier_called", false);
            rec.regenerated = r.at("regenerated").get<bool>();
            t.iterations.push_back(std::move(rec));
        }
        return t;
    } catch (const io::json::exception& e) {
        throw io::FormatError(std::string("malformed trace: ") + e.what());
    }
}

}  // namespace kdcot::interaction

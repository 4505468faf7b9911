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

#include "kdcot/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <atomic>
#include <iomanip>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include "kdcot/collection_builder.hpp"
#include "kdcot/config.hpp"
#include "kdcot/corpus.hpp"
#include "kdcot/eval.hpp"
#include "kdcot/interaction.hpp"
#include "kdcot/miner.hpp"
#include "kdcot/prompt_store.hpp"
#include "kdcot/qa_pipeline.hpp"
#include "kdcot/retrieval.hpp"
#include "kdcot/text.hpp"

namespace kdcot::cli {

namespace fs = std::filesystem;
using io::json;
using config::RunConfig;
using config::ValidationError;

namespace {

struct Globals {
    std::optional<fs::path> config_file;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> parallel;
};

// Flag values are relative to the working directory, unlike config paths.
void set_path(RunConfig& c, const std::string& key, const std::optional<std::string>& value) {
    if (value) c.paths[key] = fs::absolute(*value).lexically_normal();
}

RunConfig load_config(const Globals& g) {
    auto c = config::load(g.config_file, g.overrides);
    if (g.seed) c.seed = *g.seed;
    if (g.parallel) {
        if (*g.parallel == 0) throw ValidationError("--parallel", "must be >= 1");
        c.parallel = *g.parallel;
    }
    return c;
}

clients::ClientOptions client_options(const RunConfig& c) {
    clients::ClientOptions o;
    o.seed = c.seed;
    if (auto root = c.path("cache")) o.cache = std::make_shared<clients::ResponseCache>(*root);
    return o;
}

struct Question {
    std::string id;
    std::string question;
    std::vector<std::string> answers;
};

std::vector<Question> read_questions(const fs::path& path) {
    std::vector<Question> out;
    std::set<std::string> ids;
    int n = 0;
    for (const auto& j : io::read_jsonl(path)) {
        ++n;
        try {
            Question q;
            q.id = j.contains("id") ? (j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump())
                                    : std::to_string(n);
            q.question = j.at("question").get<std::string>();
            if (j.contains("answers")) q.answers = io::string_list(j, "answers");
            if (!ids.insert(q.id).second) throw io::FormatError("duplicate id '" + q.id + "'");
            out.push_back(std::move(q));
        } catch (const json::exception& e) {
            throw io::FormatError(path.string() + ": record " + std::to_string(n) + ": " + e.what());
        }
    }
    return out;
}

eval::GoldMap read_gold(const fs::path& path) {
    eval::GoldMap gold;
    for (const auto& q : read_questions(path)) {
        if (q.answers.empty()) throw io::FormatError(path.string() + ": '" + q.id + "' has no answers");
        gold[q.id] = q.answers;
        gold.emplace(q.question, q.answers);
    }
    return gold;
}

std::string dump_jsonl(const std::vector<json>& records) {
    std::string s;
    for (const auto& r : records) s += r.dump() + "\n";
    return s;
}

std::shared_ptr<retrieval::Bm25Index> load_or_build_index(const RunConfig& c, const corpus::PassageStore& store) {
    if (auto p = c.path("index"); p && fs::exists(*p)) {
        return std::make_shared<retrieval::Bm25Index>(retrieval::Bm25Index::load(*p));
    }
    return std::make_shared<retrieval::Bm25Index>(retrieval::Bm25Index::build(store, {c.bm25_k1, c.bm25_b}));
}

std::shared_ptr<qa::RetrievalBackend> make_retriever(const RunConfig& c, const corpus::PassageStore& store,
                                                     const std::shared_ptr<clients::EmbedEndpoint>& embed) {
    std::shared_ptr<qa::RetrievalBackend> sparse;
    std::shared_ptr<qa::RetrievalBackend> dense;
    if (c.backend != config::Backend::Dense) sparse = std::make_shared<qa::Bm25Backend>(load_or_build_index(c, store));
    if (c.backend != config::Backend::Bm25) {
        if (!embed) throw ValidationError("endpoints.embed", "dense retrieval needs an embed endpoint");
        auto vectors = std::make_shared<retrieval::DenseVectors>(
            retrieval::DenseVectors::load(c.require_existing("vectors")));
        dense = std::make_shared<qa::DenseBackend>(std::move(vectors), embed);
    }
    if (c.backend == config::Backend::Bm25) return sparse;
    if (c.backend == config::Backend::Dense) return dense;
    return std::make_shared<qa::HybridBackend>(std::vector<std::shared_ptr<qa::RetrievalBackend>>{sparse, dense});
}

void check_backend_inputs(const RunConfig& c) {
    if (!c.path("index") || !fs::exists(*c.path("index"))) c.require_existing("corpus");
    if (c.backend != config::Backend::Bm25) {
        c.require_existing("vectors");
        c.endpoint("embed");
    }
}

// ---------------------------------------------------------------------------
// ingest-corpus

struct IngestArgs {
    std::optional<std::string> triples, documents, out;
};

int cmd_ingest(const Globals& g, const IngestArgs& a, std::ostream& out, std::ostream& err) {
    auto c = load_config(g);
    set_path(c, "triples", a.triples);
    set_path(c, "documents", a.documents);
    set_path(c, "corpus", a.out);
    const auto triples = c.path("triples");
    const auto documents = c.path("documents");
    if (!triples && !documents) throw ValidationError("paths.triples", "need paths.triples or paths.documents");
    if (triples) c.require_existing("triples");
    if (documents) c.require_existing("documents");
    const auto target = c.require_path("corpus");

    corpus::PassageStore store;
    std::size_t kb = 0;
    std::size_t txt = 0;
    if (triples) {
        auto passages = corpus::linearize_kb(corpus::read_triples_tsv(*triples), c.chunk_words);
        kb = passages.size();
        store.merge(passages);
    }
    if (documents) {
        auto passages = corpus::ingest_text(corpus::read_documents_jsonl(*documents), c.chunk_words);
        txt = passages.size();
        store.merge(passages);
    }
    corpus::write_store_tsv(store, target);
    err << "ingest-corpus: wrote " << store.size() << " passages to " << target.string() << "\n";
    out << json{{"passages", store.size()}, {"kb", kb}, {"text", txt}}.dump() << "\n";
    return kOk;
}

// ---------------------------------------------------------------------------
// index

struct IndexArgs {
    std::optional<std::string> corpus, out, vectors_out;
    bool dense = false;
};

int cmd_index(const Globals& g, const IndexArgs& a, std::ostream& out, std::ostream& err) {
    auto c = load_config(g);
    set_path(c, "corpus", a.corpus);
    set_path(c, "index", a.out);
    set_path(c, "vectors", a.vectors_out);
    const auto corpus_path = c.require_existing("corpus");
    const auto index_path = c.require_path("index");
    const bool dense = a.dense || c.backend != config::Backend::Bm25;
    if (dense) {
        c.require_path("vectors");
        c.endpoint("embed");
    }

    const auto store = corpus::read_store_tsv(corpus_path);
    const auto index = retrieval::Bm25Index::build(store, {c.bm25_k1, c.bm25_b});
    index.save(index_path);
    json summary = {{"passages", index.n_docs()}, {"vocabulary", index.vocabulary_size()},
                    {"avg_doc_length", index.avg_doc_length()}};
    err << "index: bm25 over " << index.n_docs() << " passages -> " << index_path.string() << "\n";

    if (dense) {
        auto embed = clients::make_embed(c.endpoint("embed"), client_options(c));
        retrieval::DenseVectors vectors;
        const auto& passages = store.passages();
        const std::size_t batch = std::max<std::size_t>(1, c.endpoint("embed").batch_size);
        for (std::size_t i = 0; i < passages.size(); i += batch) {
            std::vector<std::string> texts;
            for (std::size_t k = i; k < std::min(passages.size(), i + batch); ++k) texts.push_back(passages[k].body);
            auto vs = embed->embed(texts);
            for (std::size_t k = 0; k < vs.size(); ++k) vectors.add(passages[i + k].id, std::move(vs[k]));
        }
        vectors.save(c.require_path("vectors"));
        summary["vectors"] = vectors.size();
        summary["dim"] = vectors.dim();
        err << "index: " << vectors.size() << " dense vectors -> " << c.require_path("vectors").string() << "\n";
    }
    out << summary.dump() << "\n";
    return kOk;
}

// ---------------------------------------------------------------------------
// retrieve

struct RetrieveArgs {
    std::vector<std::string> queries;
    std::optional<std::string> queries_file, out;
    std::optional<std::size_t> n;
};

int cmd_retrieve(const Globals& g, const RetrieveArgs& a, std::ostream& out, std::ostream& err) {
    auto c = load_config(g);
    set_path(c, "queries", a.queries_file);
    if (a.n) c.passages = *a.n;
    std::vector<Question> queries;
    for (std::size_t i = 0; i < a.queries.size(); ++i) queries.push_back({"q" + std::to_string(i + 1), a.queries[i], {}});
    if (a.queries_file) {
        auto more = read_questions(c.require_existing("queries"));
        queries.insert(queries.end(), more.begin(), more.end());
    }
    if (queries.empty()) throw ValidationError("--query", "give --query or --queries");
    check_backend_inputs(c);
    const auto store = c.path("corpus") && fs::exists(*c.path("corpus"))
                           ? corpus::read_store_tsv(*c.path("corpus"))
                           : corpus::PassageStore{};
    std::shared_ptr<clients::EmbedEndpoint> embed;
    if (c.has_endpoint("embed")) embed = clients::make_embed(c.endpoint("embed"), client_options(c));
    auto retriever = make_retriever(c, store, embed);

    std::vector<json> lines;
    const std::vector<std::size_t> cutoffs = {1, 5, 20, 100};
    std::map<std::size_t, double> hits;
    std::map<std::size_t, double> recall;
    std::size_t judged = 0;
    for (const auto& q : queries) {
        const auto ranked = retriever->search(q.question, c.passages);
        json results = json::array();
        for (const auto& r : ranked) results.push_back({{"id", r.id}, {"score", r.score}});
        lines.push_back({{"id", q.id}, {"query", q.question}, {"results", std::move(results)}});
        if (q.answers.empty() || store.empty()) continue;
        ++judged;
        for (auto n : cutoffs) {
            if (n > c.passages) continue;
            hits[n] += retrieval::hit_at_n(ranked, store, q.answers, n) ? 1.0 : 0.0;
            recall[n] += retrieval::recall_at_n(ranked, store, q.answers, n);
        }
    }
    if (a.out) {
        io::write_file_atomic(fs::absolute(*a.out), dump_jsonl(lines));
        err << "retrieve: " << lines.size() << " result lists -> " << *a.out << "\n";
    } else {
        out << dump_jsonl(lines);
    }
    if (judged > 0) {
        json summary = {{"questions", judged}};
        for (auto n : cutoffs) {
            if (!hits.contains(n)) continue;
            summary["hit@" + std::to_string(n)] = hits[n] / static_cast<double>(judged);
            summary["recall@" + std::to_string(n)] = recall[n] / static_cast<double>(judged);
        }
        (a.out ? out : err) << summary.dump() << "\n";
    }
    return kOk;
}

// ---------------------------------------------------------------------------
// build-collection

struct BuildArgs {
    std::optional<std::string> anchors, train, out, report;
};

int cmd_build(const Globals& g, const BuildArgs& a, std::ostream& out, std::ostream& err) {
    auto c = load_config(g);
    set_path(c, "anchors", a.anchors);
    set_path(c, "train", a.train);
    set_path(c, "pool", a.out);
    set_path(c, "report", a.report);
    const auto anchors_path = c.require_existing("anchors");
    const auto train_path = c.require_existing("train");
    const auto pool_path = c.require_path("pool");
    const auto& llm_spec = c.endpoint("llm");
    const auto& embed_spec = c.endpoint("embed");

    const auto opts = client_options(c);
    auto embed = clients::make_embed(embed_spec, opts);
    auto llm = clients::make_chat(llm_spec, opts);
    const auto train = collection::read_train_jsonl(train_path);
    const auto anchors = prompts::load_pool(anchors_path, [&](const std::string& q) { return embed->embed({q}).front(); });

    collection::BuildOptions options;
    options.instruction = c.instruction;
    options.max_iterations = c.collection_iterations;
    options.parallelism = c.parallel;
    const auto result = collection::build_collection(train, anchors.items(), *llm, *embed, options);

    prompts::save_pool(result.pool, pool_path);
    const auto report = collection::to_json(result.report);
    if (auto p = c.path("report")) io::write_file_atomic(*p, report.dump(2) + "\n");
    err << "build-collection: pool " << result.pool.size() << " (" << anchors.size() << " anchors) -> "
        << pool_path.string() << "\n";
    out << report.dump() << "\n";
    return result.report.endpoint_failures > 0 ? kPartial : kOk;
}

// ---------------------------------------------------------------------------
// mine-dpr-data

struct MineArgs {
    std::optional<std::string> train, pool, corpus, index, out;
};

int cmd_mine(const Globals& g, const MineArgs& a, std::ostream& out, std::ostream& err) {
    auto c = load_config(g);
    set_path(c, "train", a.train);
    set_path(c, "pool", a.pool);
    set_path(c, "corpus", a.corpus);
    set_path(c, "index", a.index);
    set_path(c, "dpr", a.out);
    const auto train = collection::read_train_jsonl(c.require_existing("train"));
    const auto pool = prompts::load_pool(c.require_existing("pool"));
    const auto store = corpus::read_store_tsv(c.require_existing("corpus"));
    const auto target = c.require_path("dpr");
    const auto index = load_or_build_index(c, store);

    std::map<std::string, const cot::CoTRecord*> rationale;
    for (const auto& d : pool.items()) rationale.emplace(d.record.question, &d.record);

    std::vector<json> lines;
    std::size_t skipped = 0;
    std::size_t fallback = 0;
    for (const auto& item : train) {
        auto it = rationale.find(item.question);
        if (it == rationale.end()) {
            ++skipped;
            continue;
        }
        const auto mined = miner::mine_examples(item, *it->second, *index, store);
        if (mined.rule == miner::Rule::AnswerOnlyFallback) ++fallback;
        lines.push_back(miner::to_dpr_json(mined, store));
    }
    io::write_jsonl_atomic(target, lines);
    err << "mine-dpr-data: " << lines.size() << " examples -> " << target.string() << "\n";
    out << json{{"mined", lines.size()}, {"skipped_without_rationale", skipped}, {"answer_only_fallback", fallback}}
               .dump()
        << "\n";
    return kOk;
}

// ---------------------------------------------------------------------------
// run

struct RunArgs {
    std::optional<std::string> questions, out, mode;
    std::optional<std::size_t> limit;
};

int cmd_run(const Globals& g, const RunArgs& a, std::ostream& out, std::ostream& err) {
    auto c = load_config(g);
    set_path(c, "questions", a.questions);
    set_path(c, "traces", a.out);
    if (a.mode) {
        if (std::find(config::kRunModes.begin(), config::kRunModes.end(), *a.mode) == config::kRunModes.end()) {
            throw ValidationError("--mode", "unknown mode '" + *a.mode + "'");
        }
        c.mode = *a.mode;
    }
    const auto mode = *interaction::mode_from_string(c.mode);

    // Validate every input before touching an endpoint or the output.
    auto questions = read_questions(c.require_existing("questions"));
    if (a.limit && *a.limit < questions.size()) questions.resize(*a.limit);
    const auto target = c.require_path("traces");
    const bool needs_pool = !interaction::is_baseline(mode) || mode == interaction::Mode::QaPairs4;
    const bool needs_retrieval = mode == interaction::Mode::KdCoT || mode == interaction::Mode::NoVerifier ||
                                 mode == interaction::Mode::Retrieval4;
    const bool needs_reader = mode == interaction::Mode::KdCoT || mode == interaction::Mode::NoVerifier;
    const bool needs_verifier = mode == interaction::Mode::KdCoT || mode == interaction::Mode::NoRetrieveThenRead;
    c.endpoint("llm");
    if (needs_pool) {
        c.require_existing("pool");
        c.endpoint("embed");
    }
    if (needs_retrieval) {
        c.require_existing("corpus");
        check_backend_inputs(c);
    }
    if (needs_reader) c.endpoint("reader");
    if (needs_verifier) c.endpoint("verifier");
    if (mode == interaction::Mode::CoTFixed && c.cot_fixed_rationale.empty()) {
        throw ValidationError("baseline.cot_fixed_rationale", "required for mode cot-fixed");
    }

    const auto opts = client_options(c);
    auto llm = clients::make_chat(c.endpoint("llm"), opts);
    std::shared_ptr<clients::EmbedEndpoint> embed;
    if (c.has_endpoint("embed")) embed = clients::make_embed(c.endpoint("embed"), opts);
    std::shared_ptr<clients::ChatEndpoint> reader;
    std::shared_ptr<clients::ChatEndpoint> verifier;
    if (needs_reader) reader = clients::make_chat(c.endpoint("reader"), opts);
    if (needs_verifier) verifier = clients::make_chat(c.endpoint("verifier"), opts);

    prompts::Pool pool;
    if (needs_pool) pool = prompts::load_pool(c.require_existing("pool"));
    corpus::PassageStore store;
    std::shared_ptr<qa::RetrievalBackend> retriever;
    if (needs_retrieval) {
        store = corpus::read_store_tsv(c.require_existing("corpus"));
        retriever = make_retriever(c, store, embed);
    }

    interaction::Services services{llm.get(), embed.get(), retriever.get(), &store, reader.get(), verifier.get()};
    interaction::Config icfg;
    icfg.instruction = c.instruction;
    icfg.max_iterations = c.max_iterations;
    icfg.require_finish_retries = c.require_finish_retries;
    icfg.max_rounds = c.max_rounds;
    icfg.passages = c.passages;
    icfg.mode = mode;
    interaction::BaselineConfig bcfg{c.baseline_instruction, c.cot_fixed_rationale, 4};

    std::vector<std::optional<interaction::InteractionTrace>> traces(questions.size());
    std::vector<std::string> failures(questions.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < questions.size(); i = next++) {
            try {
                auto t = interaction::is_baseline(mode)
                             ? interaction::run_baseline(questions[i].question, mode, pool, services, bcfg)
                             : interaction::run_kdcot(questions[i].question, pool, services, icfg);
                t.id = questions[i].id;
                traces[i] = std::move(t);
            } catch (const std::exception& e) {
                failures[i] = e.what();
            }
        }
    };
    const std::size_t workers = std::min<std::size_t>(c.parallel, std::max<std::size_t>(1, questions.size()));
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool_threads;
        for (std::size_t w = 0; w < workers; ++w) pool_threads.emplace_back(worker);
        for (auto& t : pool_threads) t.join();
    }

    std::vector<json> lines;
    std::size_t failed = 0;
    std::map<std::string, int> statuses;
    for (std::size_t i = 0; i < questions.size(); ++i) {
        if (traces[i]) {
            ++statuses[std::string(interaction::to_string(traces[i]->status))];
            lines.push_back(interaction::to_json(*traces[i]));
        } else {
            ++failed;
            err << "run: question '" << questions[i].id << "' failed: " << failures[i] << "\n";
        }
    }
    if (lines.empty() && failed > 0) {
        err << "run: every question failed; no trace file written\n";
        return kEndpointFailure;
    }
    io::write_file_atomic(target, dump_jsonl(lines));
    json summary = {{"traces", lines.size()},
                    {"failed", failed},
                    {"status", statuses},
                    {"retrieval_requests", retriever ? retriever->calls() : 0}};
    err << "run: " << lines.size() << " traces -> " << target.string() << "\n";
    out << summary.dump() << "\n";
    return failed > 0 ? kPartial : kOk;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
    std::optional<std::string> predictions, gold, out;
};

std::vector<eval::Prediction> read_predictions(const fs::path& path) {
    std::vector<eval::Prediction> preds;
    int n = 0;
    for (const auto& j : io::read_jsonl(path)) {
        ++n;
        eval::Prediction p;
        if (j.contains("schema")) {
            const auto t = interaction::trace_from_json(j);
            p.id = t.id.empty() ? t.question : t.id;
            p.answer_texts = t.final_answers;
            p.malformed = t.status == interaction::Status::MalformedFailure;
        } else {
            try {
                p.id = j.at("id").is_string() ? j["id"].get<std::string>() : j["id"].dump();
                p.malformed = j.value("malformed", false);
                if (j.contains("answers")) p.answer_texts = io::string_list(j, "answers");
            } catch (const json::exception& e) {
                throw io::FormatError(path.string() + ": record " + std::to_string(n) + ": " + e.what());
            }
            if (p.malformed && !p.answer_texts.empty()) {
                throw io::FormatError(path.string() + ": record " + std::to_string(n) +
                                      ": malformed prediction with answers");
            }
        }
        preds.push_back(std::move(p));
    }
    return preds;
}

int cmd_eval(const Globals& g, const EvalArgs& a, std::ostream& out, std::ostream& err) {
    auto c = load_config(g);
    set_path(c, "predictions", a.predictions);
    set_path(c, "gold", a.gold);
    set_path(c, "report", a.out);
    const auto preds = read_predictions(c.require_existing("predictions"));
    const auto gold = read_gold(c.require_existing("gold"));
    const auto report = eval::aggregate(preds, gold);
    const json j = {{"hits_at_1", report.hits_at_1},
                    {"f1_macro", report.f1_macro},
                    {"n_questions", report.n_questions},
                    {"n_malformed", report.n_malformed}};
    if (auto p = c.path("report")) {
        io::write_file_atomic(*p, j.dump(2) + "\n");
        err << "eval: report -> " << p->string() << "\n";
    }
    out << j.dump() << "\n";
    return kOk;
}

// ---------------------------------------------------------------------------
// stats

struct StatsArgs {
    std::optional<std::string> traces, gold, out;
};

std::string pad(const std::string& s, std::size_t width) {
    return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

int cmd_stats(const Globals& g, const StatsArgs& a, std::ostream& out, std::ostream& err) {
    auto c = load_config(g);
    set_path(c, "traces", a.traces);
    set_path(c, "gold", a.gold);
    set_path(c, "stats", a.out);
    std::vector<interaction::InteractionTrace> traces;
    for (const auto& j : io::read_jsonl(c.require_existing("traces"))) traces.push_back(interaction::trace_from_json(j));

    json report;
    std::ostringstream table;
    if (c.path("gold")) {
        const auto tr = interaction::correctness_transitions(traces, read_gold(c.require_existing("gold")));
        report["transitions"] = {{"corrected", tr.corrected},
                                 {"broken", tr.broken},
                                 {"kept_correct", tr.kept_correct},
                                 {"kept_incorrect", tr.kept_incorrect}};
        table << "correctness transitions\n";
        for (const auto& [name, v] : report["transitions"].items()) {
            table << "  " << std::left << std::setw(16) << name << pad(std::to_string(v.get<int>()), 6) << "\n";
        }
    }
    json sources = json::object();
    table << "answer sources per iteration\n"
          << "  " << std::left << std::setw(10) << "iteration" << pad("kept", 8) << pad("qa", 8) << pad("new", 8)
          << "\n";
    for (const auto& [it, s] : interaction::answer_source_tally(traces, true)) {
        sources[std::to_string(it)] = {{"kept_by_verifier", s.kept_by_verifier},
                                       {"replaced_by_qa", s.replaced_by_qa},
                                       {"new_by_verifier", s.new_by_verifier}};
        table << "  " << std::left << std::setw(10) << it << pad(std::to_string(s.kept_by_verifier), 8)
              << pad(std::to_string(s.replaced_by_qa), 8) << pad(std::to_string(s.new_by_verifier), 8) << "\n";
    }
    report["sources"] = sources;
    std::map<std::string, int> statuses;
    for (const auto& t : traces) ++statuses[std::string(interaction::to_string(t.status))];
    report["status"] = statuses;
    report["traces"] = traces.size();

    out << table.str();
    if (auto p = c.path("stats")) {
        io::write_file_atomic(*p, report.dump(2) + "\n");
        err << "stats: report -> " << p->string() << "\n";
    } else {
        out << report.dump() << "\n";
    }
    return kOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Knowledge-grounded chain-of-thought QA toolkit"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    std::string config_file;
    app.add_option("-c,--config", config_file, "JSON run configuration");
    app.add_option("--set", g.overrides, "Override a config field, e.g. --set retrieval.n=20");
    app.add_option("--seed", g.seed, "Seed for every stochastic choice");
    app.add_option("--parallel", g.parallel, "Questions processed concurrently");

    IngestArgs ingest;
    auto* s_ingest = app.add_subcommand("ingest-corpus", "Linearize KB triples and chunk documents into a passage store");
    s_ingest->add_option("--triples", ingest.triples, "TSV head<TAB>relation<TAB>tail");
    s_ingest->add_option("--documents", ingest.documents, "JSONL {title, text}");
    s_ingest->add_option("-o,--out", ingest.out, "Passage store TSV");

    IndexArgs index;
    auto* s_index = app.add_subcommand("index", "Build the BM25 index (and dense vectors)");
    s_index->add_option("--corpus", index.corpus, "Passage store TSV");
    s_index->add_option("-o,--out", index.out, "Index file");
    s_index->add_option("--vectors-out", index.vectors_out, "Dense vector file");
    s_index->add_flag("--dense", index.dense, "Also embed every passage");

    RetrieveArgs retrieve;
    auto* s_retrieve = app.add_subcommand("retrieve", "Rank passages for queries");
    s_retrieve->add_option("-q,--query", retrieve.queries, "Query text");
    s_retrieve->add_option("--queries", retrieve.queries_file, "JSONL {id, question, answers?}");
    s_retrieve->add_option("-n", retrieve.n, "Passages per query");
    s_retrieve->add_option("-o,--out", retrieve.out, "Result JSONL");

    BuildArgs build;
    auto* s_build = app.add_subcommand("build-collection", "Grow the demonstration pool from anchors");
    s_build->add_option("--anchors", build.anchors, "Anchor pool JSONL");
    s_build->add_option("--train", build.train, "Training JSONL {id, question, answers, composition_answers?}");
    s_build->add_option("-o,--out", build.out, "Pool JSONL");
    s_build->add_option("--report", build.report, "Build report JSON");

    MineArgs mine;
    auto* s_mine = app.add_subcommand("mine-dpr-data", "Mine retriever training data from rationales");
    s_mine->add_option("--train", mine.train, "Training JSONL");
    s_mine->add_option("--pool", mine.pool, "Pool JSONL holding the rationales");
    s_mine->add_option("--corpus", mine.corpus, "Passage store TSV");
    s_mine->add_option("--index", mine.index, "BM25 index");
    s_mine->add_option("-o,--out", mine.out, "DPR JSONL");

    RunArgs run;
    auto* s_run = app.add_subcommand("run", "Answer questions and write traces");
    s_run->add_option("--questions", run.questions, "JSONL {id, question}");
    s_run->add_option("-o,--out", run.out, "Trace JSONL");
    s_run->add_option("--mode", run.mode, "kdcot, vanilla-cot, no-retrieve-then-read, no-verifier, retrieval-4, "
                                          "qa-pairs-4 or cot-fixed");
    s_run->add_option("--limit", run.limit, "Only the first N questions");

    EvalArgs ev;
    auto* s_eval = app.add_subcommand("eval", "Score predictions or traces against gold answers");
    s_eval->add_option("--predictions", ev.predictions, "Prediction or trace JSONL");
    s_eval->add_option("--gold", ev.gold, "Gold JSONL {id, question, answers}");
    s_eval->add_option("-o,--out", ev.out, "Report JSON");

    StatsArgs st;
    auto* s_stats = app.add_subcommand("stats", "Correctness transitions and answer sources of a trace file");
    s_stats->add_option("--traces", st.traces, "Trace JSONL");
    s_stats->add_option("--gold", st.gold, "Gold JSONL");
    s_stats->add_option("-o,--out", st.out, "Report JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kValidation;
    }
    if (!config_file.empty()) g.config_file = fs::path(config_file);

    try {
        if (*s_ingest) return cmd_ingest(g, ingest, out, err);
        if (*s_index) return cmd_index(g, index, out, err);
        if (*s_retrieve) return cmd_retrieve(g, retrieve, out, err);
        if (*s_build) return cmd_build(g, build, out, err);
        if (*s_mine) return cmd_mine(g, mine, out, err);
        if (*s_run) return cmd_run(g, run, out, err);
        if (*s_eval) return cmd_eval(g, ev, out, err);
        if (*s_stats) return cmd_stats(g, st, out, err);
    } catch (const clients::EndpointError& e) {
        err << "endpoint error: " << e.what() << "\n";
        return kEndpointFailure;
    } catch (const clients::ProtocolError& e) {
        err << "endpoint error: " << e.what() << "\n";
        return kEndpointFailure;
    } catch (const ValidationError& e) {
        err << "invalid configuration: " << e.what() << "\n";
        return kValidation;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kValidation;
    }
    return kValidation;
}

}  // namespace kdcot::cli

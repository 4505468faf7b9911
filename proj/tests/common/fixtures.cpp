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

#include "fixtures.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace kdcot::testing {

namespace fs = std::filesystem;
using io::json;

TempDir::TempDir() {
    std::random_device rd;
    const auto base = fs::temp_directory_path();
    for (int attempt = 0; attempt < 100; ++attempt) {
        std::ostringstream name;
        name << "kdcot-test-" << std::hex << rd() << rd();
        path_ = base / name.str();
        if (fs::create_directory(path_)) return;
    }
    throw std::runtime_error("TempDir: could not create a directory");
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

std::string regex_escape(std::string_view s) {
    static const std::string special = R"(\^$.|?*+()[]{}/)";
    std::string out;
    for (char c : s) {
        if (special.find(c) != std::string::npos) out.push_back('\\');
        out.push_back(c);
    }
    return out;
}

clients::MockScript script(const json& j) { return clients::MockScript::from_json(j); }

void write_text(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    f << content;
    if (!f) throw std::runtime_error("write_text: " + path.string());
}

// ---------------------------------------------------------------------------
// Rationale generators

namespace {

const std::vector<std::string> kWords = {
    "the",   "artist", "album",  "Olívia", "Hime",  "released", "in",   "1999", "São",   "Paulo", "(live)",
    "who",   "what?",  "x,y",    "a.b",    "50%",   "Gone",     "Girl", "ß",    "naïve", "#tag",  "don't",
    "colon:", "Ångström", "東京", "e=mc2", "-dash", "quote\"",  "under_score",
};

// Free text may also carry brackets and semicolons.
const std::vector<std::string> kFreeExtras = {"[note]", "a;b", "x]", "[y", ";"};

std::string words(std::mt19937_64& rng, int lo, int hi, bool free_text) {
    std::uniform_int_distribution<int> count(lo, hi);
    const int n = count(rng);
    std::string out;
    for (int i = 0; i < n; ++i) {
        if (!out.empty()) out.push_back(' ');
        if (free_text && rng() % 6 == 0) {
            out += kFreeExtras[rng() % kFreeExtras.size()];
        } else {
            out += kWords[rng() % kWords.size()];
        }
    }
    return out;
}

}  // namespace

cot::CoTRecord random_record(std::mt19937_64& rng) {
    cot::CoTRecord r;
    if (rng() % 10 < 7) r.question = words(rng, 1, 8, true);
    if (rng() % 2 == 0) {
        std::vector<std::string> hint;
        const int n = 1 + static_cast<int>(rng() % 3);
        for (int i = 0; i < n; ++i) hint.push_back(words(rng, 1, 3, false));
        r.hint = std::move(hint);
    }
    const int rounds = 1 + static_cast<int>(rng() % 6);
    const bool finished = rng() % 5 != 0;
    for (int i = 1; i <= rounds; ++i) {
        cot::Round round;
        round.index = i;
        round.thought = words(rng, 1, 12, true);
        if (finished && i == rounds) {
            std::vector<std::string> answers;
            const int n = 1 + static_cast<int>(rng() % 3);
            for (int k = 0; k < n; ++k) answers.push_back(words(rng, 1, 3, false));
            // An empty element between real answers is legal.
            if (n > 1 && rng() % 4 == 0) answers[rng() % n].clear();
            if (std::all_of(answers.begin(), answers.end(), [](const auto& a) { return a.empty(); })) {
                answers.front() = "answer";
            }
            round.action = cot::Finish{std::move(answers)};
        } else {
            round.action = cot::Ask{words(rng, 1, 8, true)};
            if (rng() % 10 < 7) round.observation = words(rng, 1, 5, true);
        }
        r.rounds.push_back(std::move(round));
    }
    r.finished = finished;
    return r;
}

std::string corrupt(const cot::CoTRecord& record, int kind, std::mt19937_64& rng) {
    // Rendered by hand so the corruption does not depend on the serializer.
    std::vector<std::string> lines;
    std::vector<std::size_t> thought_at, action_at;
    if (!record.question.empty()) lines.push_back("Question: " + record.question);
    if (record.hint) {
        std::string h;
        for (const auto& x : *record.hint) h += (h.empty() ? "" : "; ") + x;
        lines.push_back("Hint: " + h);
    }
    for (const auto& r : record.rounds) {
        const auto i = std::to_string(r.index);
        thought_at.push_back(lines.size());
        lines.push_back("Thought " + i + ": " + r.thought);
        action_at.push_back(lines.size());
        if (const auto* ask = std::get_if<cot::Ask>(&r.action)) {
            lines.push_back("Action " + i + ": Question[" + ask->question + "]");
        } else {
            std::string a;
            const auto& answers = std::get<cot::Finish>(r.action).answers;
            for (std::size_t k = 0; k < answers.size(); ++k) a += (k ? "; " : "") + answers[k];
            lines.push_back("Action " + i + ": Finish[" + a + "]");
        }
        if (r.observation) lines.push_back("Observation " + i + ": " + *r.observation);
    }
    const std::size_t k = rng() % record.rounds.size();
    const int last = static_cast<int>(record.rounds.size());
    auto drop = [&](std::size_t at) { lines.erase(lines.begin() + static_cast<std::ptrdiff_t>(at)); };
    switch (kind % kMutationKinds) {
        case 0:
            lines[thought_at[k]] = "Thought " + std::to_string(record.rounds[k].index + 7) + ": " + record.rounds[k].thought;
            break;
        case 1:
            drop(action_at[k]);
            break;
        case 2:
            lines[action_at.back()].pop_back();  // closing bracket of Finish
            break;
        case 3:
            lines.insert(lines.begin(), "Sure! Here is my reasoning.");
            break;
        case 4: {
            auto& l = lines[action_at.back()];
            l.replace(l.find("Finish["), 7, "Finsh[");
            break;
        }
        case 5:
            lines[thought_at[k]] = "Thought " + std::to_string(record.rounds[k].index) + ":";
            break;
        case 6:
            lines.push_back("Thought " + std::to_string(last + 1) + ": one more step");
            break;
        case 7:
            lines.push_back("Observation " + std::to_string(last) + ": extra");
            break;
        case 8:
            std::swap(lines[thought_at[k]], lines[action_at[k]]);
            break;
        case 9:
            drop(action_at.back());
            drop(thought_at.back());
            break;
    }
    std::string out;
    for (std::size_t i = 0; i < lines.size(); ++i) out += (i ? "\n" : "") + lines[i];
    return out;
}

// ---------------------------------------------------------------------------
// Collection construction

namespace {

const char* kCities[] = {"Avalon", "Brigadoon", "Camelot", "Dunwich", "Eldorado",
                         "Florin", "Gondor",    "Hobbiton", "Ithaca", "Jericho"};

std::string city_question(int i) { return std::string("Which river flows through ") + kCities[i] + "?"; }
std::string city_answer(int i) { return std::string("River ") + kCities[i]; }

}  // namespace

CollectionFixture collection_fixture() {
    CollectionFixture f;
    prompts::Demonstration anchor;
    anchor.record.question = "What is the capital of France?";
    anchor.record.hint = std::vector<std::string>{"Paris"};
    cot::Round r;
    r.index = 1;
    r.thought = "The capital of France is Paris.";
    r.action = cot::Finish{{"Paris"}};
    anchor.record.rounds.push_back(r);
    anchor.record.finished = true;
    anchor.embedding = {1, 0, 0, 0};
    anchor.source = prompts::DemoSource::HumanAnchor;
    f.anchors.push_back(anchor);

    for (int i = 0; i < 10; ++i) {
        collection::TrainItem item;
        item.id = "t" + std::to_string(i + 1);
        item.question = city_question(i);
        item.answers = {city_answer(i)};
        f.train.push_back(item);
    }
    // Items 1-5 look like the anchor, item 6 is orthogonal, items 7-8 lean
    // towards item 6, items 9-10 are orthogonal to everything.
    const std::vector<Embedding> vecs = {
        {1, 0, 0, 0}, {1, 0, 0, 0},     {1, 0, 0, 0},     {1, 0, 0, 0}, {1, 0, 0, 0},
        {0, 1, 0, 0}, {0.6, 0.8, 0, 0}, {0.6, 0.8, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1},
    };
    for (int i = 0; i < 10; ++i) f.vectors[f.train[i].question] = vecs[i];

    json rules = json::array();
    auto target = [](int i) {
        return "Question: " + regex_escape(city_question(i)) + "\\nHint: " + regex_escape(city_answer(i)) +
               "\\nThought 1:$";
    };
    auto correct = [](int i) {
        const std::string body = "The river there is " + city_answer(i) + ".\nAction 1: Finish[" + city_answer(i) + "]";
        // Half the replies restate the stub, half continue after it.
        return i % 2 == 0 ? " " + body : "Thought 1: " + body;
    };
    // Items 7 and 8 succeed only when item 6's rationale is the demonstration.
    for (int i : {6, 7}) {
        rules.push_back({{"pattern", "Question: " + regex_escape(city_question(5)) + "[\\s\\S]*" + target(i)},
                         {"response", correct(i)}});
    }
    for (int i = 0; i < 6; ++i) rules.push_back({{"pattern", target(i)}, {"response", correct(i)}});
    f.script = {{"default", " I am not sure.\nAction 1: Finish[River Styx]"}, {"rules", rules}};
    f.expected_admitted = {6, 2, 0, 0, 0};
    f.expected_pool = 1 + 8;
    return f;
}

// ---------------------------------------------------------------------------
// Mining

MinerFixture miner_fixture() {
    MinerFixture f;
    f.item.id = "m1";
    f.item.question = "Who recorded Palavras de Guerra Ao Vivo?";
    f.item.answers = {"Olívia Hime"};
    auto parsed = cot::parse_cot(
        "Thought 1: The album is a live recording.\n"
        "Action 1: Question[Which artist released the album Palavras de Guerra Ao Vivo?]\n"
        "Observation 1: Olívia Hime\n"
        "Thought 2: So the artist is Olívia Hime.\n"
        "Action 2: Finish[Olívia Hime]",
        true);
    f.rationale = parsed.record();

    auto add = [&](std::string id, std::string body, std::vector<std::string>& bucket) {
        f.passages.push_back({id, "t-" + id, std::move(body), corpus::Source::Text});
        bucket.push_back(std::move(id));
    };
    add("co1", "Palavras de Guerra Ao Vivo is a live album by Olívia Hime.", f.co_occurrence);
    add("co2", "Olivia Hime recorded Palavras de Guerra Ao Vivo in Rio.", f.co_occurrence);
    add("co3", "music recording releases Palavras de Guerra Ao Vivo. music recording artist Olívia Hime.",
        f.co_occurrence);
    add("ans1", "Olívia Hime is a Brazilian singer and composer.", f.answer_only);
    add("ans2", "The singer Olívia Hime released several albums.", f.answer_only);
    add("ans3", "OLÍVIA HIME performed at a festival in 1982.", f.answer_only);
    add("ans4", "Songs written by Olívia Hime were recorded by other artists.", f.answer_only);
    add("ent1", "Palavras de Guerra Ao Vivo was released on a small label.", f.entity_only);
    add("ent2", "Critics reviewed Palavras de Guerra Ao Vivo favourably.", f.entity_only);
    add("nei1", "Who recorded the first album about war was never recorded.", f.neither);
    add("nei2", "A live album captures a concert performance.", f.neither);
    add("nei3", "Guerra is a common surname in Portugal.", f.neither);
    return f;
}

// ---------------------------------------------------------------------------
// Interaction scenarios

namespace {

constexpr const char* kAnchorQuestion = "Who directed the film that won Best Picture in 1998?";
constexpr const char* kAnchorCot =
    "Thought 1: First find the film that won Best Picture in 1998.\n"
    "Action 1: Question[Which film won Best Picture in 1998?]\n"
    "Observation 1: Titanic\n"
    "Thought 2: Now find the director of Titanic.\n"
    "Action 2: Question[Who directed Titanic?]\n"
    "Observation 2: James Cameron\n"
    "Thought 3: The director is James Cameron.\n"
    "Action 3: Finish[James Cameron]";
constexpr const char* kInstruction =
    "Answer the question by decomposing it into sub-questions. Use the format of the example.";

void init_world(InteractionWorld& w) {
    w.anchor_question = kAnchorQuestion;
    w.anchor_cot = kAnchorCot;
    w.anchor_embedding = Embedding(kWorldDim, 1.0);
    w.instruction = kInstruction;
    prompts::Demonstration d;
    d.record = cot::parse_cot(kAnchorCot, true).record();
    d.record.question = kAnchorQuestion;
    d.embedding = w.anchor_embedding;
    w.pool.add(d);
}

std::string initial_rule(const std::string& question) {
    return "Question: " + regex_escape(question) + "\\nThought 1:$";
}

}  // namespace

InteractionWorld correction_world() {
    InteractionWorld w;
    init_world(w);
    const std::string q = "Where did the author of Gone Girl go to college?";
    w.questions = {{"gone-girl", q}};
    w.gold[std::string("gone-girl")] = {"University of Kansas"};
    w.passages = {
        {"Gone Girl", "Gone Girl", "Gone Girl is a 2012 thriller novel written by Gillian Flynn.", corpus::Source::Text},
        {"Gillian Flynn", "Gillian Flynn",
         "Gillian Flynn is an American author. Flynn went to college at the University of Kansas.",
         corpus::Source::Text},
        {"Collin College", "Collin College", "Collin College is a community college in Texas.", corpus::Source::Text},
        {"Kansas", "Kansas", "Kansas is a state in the Midwestern United States.", corpus::Source::Text},
    };
    for (const auto& p : w.passages) w.store.add(p);

    w.llm = {{"default", ""},
             {"rules",
              {{{"pattern", initial_rule(q)},
                {"response",
                 " I need to find the author of Gone Girl first.\n"
                 "Action 1: Question[Who wrote Gone Girl?]\n"
                 "Observation 1: Gillian Flynn\n"
                 "Thought 2: Now find where Gillian Flynn went to college.\n"
                 "Action 2: Question[Where did Gillian Flynn go to college?]\n"
                 "Observation 2: Collin College\n"
                 "Thought 3: So the answer is Collin College.\n"
                 "Action 3: Finish[Collin College]"}},
               {{"pattern", "Observation 2: University of Kansas\\nThought 3:$"},
                {"response", " Gillian Flynn went to the University of Kansas.\nAction 3: Finish[University of Kansas]"}}}}};
    w.reader = {{"default", ""},
                {"rules",
                 {{{"substring", "question: Who wrote Gone Girl? title:"}, {"response", "Gillian Flynn"}},
                  {{"substring", "question: Where did Gillian Flynn go to college? title:"},
                   {"response", "University of Kansas\nextra reader text"}}}}};
    w.verifier = {{"default", "A"},
                  {"rules", {{{"substring", "Answer B: University of Kansas"}, {"response", "B"}}}}};
    return w;
}

namespace {

struct Case {
    std::string id;
    std::string question;
    std::string gold;
    std::string initial;   // Finish answer of the first rationale
    std::string subq;
    std::string original;  // Observation 1
    std::string reader;    // candidate
    std::string verifier;  // reply
    std::string final;     // Finish after regeneration (when one happens)
};

// Hand-scripted: the comment on each row is its expected transition.
std::vector<Case> transition_cases() {
    return {
        // corrected
        {"q01", "Which country is the birthplace of the painter of Guernica?", "Spain", "France",
         "Who painted Guernica?", "Henri Matisse", "Pablo Picasso", "B", "Spain"},
        {"q02", "What language is spoken where the Danube delta lies?", "Romanian", "German",
         "In which country is the Danube delta?", "Germany", "Romania", "B", "Romanian"},
        {"q03", "Which team does the tallest player of the 1999 draft play for?", "Oakland Falcons", "Boston Crows",
         "Who was the tallest player of the 1999 draft?", "Carl Mott", "Dan Roe", "Eli Stone", "Oakland Falcons"},
        // broken
        {"q04", "Which sea borders the home country of the feta cheese?", "Aegean Sea", "Aegean Sea",
         "Which country is feta cheese from?", "Greece", "Denmark", "B", "North Sea"},
        // kept correct
        {"q05", "Who founded the company that makes the iPhone?", "Steve Jobs", "Steve Jobs",
         "Which company makes the iPhone?", "Apple", "Apple", "A", ""},
        {"q06", "What is the currency of the country whose capital is Tokyo?", "Yen", "Yen",
         "Which country has Tokyo as capital?", "Japan", "Japan.", "A", ""},
        {"q07", "Which ocean is west of the country where Lisbon is?", "Atlantic Ocean", "Atlantic Ocean",
         "In which country is Lisbon?", "Portugal", "Spain", "A", ""},
        {"q08", "Which planet is the god Ares named after?", "Mars", "Mars", "What is the Roman name of Ares?", "Mars",
         "Jupiter", "(A)", ""},
        // kept incorrect
        {"q09", "Who wrote the novel adapted into the film Psycho?", "Robert Bloch", "Alfred Hitchcock",
         "Which novel was adapted into Psycho?", "Rebecca", "Psycho", "A", ""},
        {"q10", "Which river runs through the capital of Hungary?", "Danube", "Tisza",
         "What is the capital of Hungary?", "Debrecen", "Szeged", "B", "Tisza"},
    };
}

}  // namespace

InteractionWorld transition_world() {
    InteractionWorld w;
    init_world(w);
    json llm_rules = json::array();
    json reader_rules = json::array();
    json verifier_rules = json::array();
    for (const auto& c : transition_cases()) {
        w.questions.emplace_back(c.id, c.question);
        w.gold[c.id] = {c.gold};
        w.passages.push_back({c.id + "-p", c.subq, c.subq + " The answer is " + c.reader + ".", corpus::Source::Text});
        llm_rules.push_back({{"pattern", initial_rule(c.question)},
                             {"response", " Let me find out.\nAction 1: Question[" + c.subq + "]\nObservation 1: " +
                                              c.original + "\nThought 2: That settles it.\nAction 2: Finish[" +
                                              c.initial + "]"}});
        if (!c.final.empty()) {
            const std::string replaced = c.verifier == "B" ? c.reader : c.verifier;
            llm_rules.push_back({{"pattern", "Question\\[" + regex_escape(c.subq) + "\\]\\nObservation 1: " +
                                                 regex_escape(replaced) + "\\nThought 2:$"},
                                 {"response", " With the corrected fact.\nAction 2: Finish[" + c.final + "]"}});
        }
        reader_rules.push_back({{"substring", "question: " + c.subq + " title:"}, {"response", c.reader}});
        verifier_rules.push_back({{"substring", "Question: " + c.subq + "\nAnswer A:"}, {"response", c.verifier}});
    }
    for (const auto& p : w.passages) w.store.add(p);
    w.llm = {{"default", " I am not sure.\nAction 2: Finish[unknown]"}, {"rules", llm_rules}};
    w.reader = {{"default", ""}, {"rules", reader_rules}};
    w.verifier = {{"default", "A"}, {"rules", verifier_rules}};
    return w;
}

// ---------------------------------------------------------------------------
// Metrics

EvalFixture eval_fixture() {
    EvalFixture f;
    // id, prediction, gold; hit / F1 by hand in the trailing comment
    f.predictions = {
        {"e1", {"Olívia Hime"}, false},            // exact: hit, F1 1
        {"e2", {"x"}, false},                      // 1 of 4 gold: hit, P 1 R 0.25 F1 0.4
        {"e3", {"Lyon"}, false},                   // miss, F1 0
        {"e4", {"The USA", "Canada"}, false},      // both gold after normalization: hit, F1 1
        {"e5", {}, true},                          // malformed: miss, F1 0
    };
    f.gold["e1"] = {"Olívia Hime"};
    f.gold["e2"] = {"x", "y", "z", "w"};
    f.gold["e3"] = {"Paris"};
    f.gold["e4"] = {"usa", "canada"};
    f.gold["e5"] = {"anything"};
    return f;
}

PlantedCorpus planted_corpus() {
    PlantedCorpus c;
    const double step = 0.04;
    std::map<int, std::string> planted = {{1, "alpha"}, {3, "bravo"}, {15, "charlie"}, {25, "delta"}};
    for (int i = 1; i <= 30; ++i) {
        char id[8];
        std::snprintf(id, sizeof id, "p%02d", i);
        std::string body = "filler passage number " + std::to_string(i);
        if (auto it = planted.find(i); it != planted.end()) body += " mentions " + it->second;
        c.passages.push_back({id, id, body, corpus::Source::Text});
        const double theta = step * i;
        c.vectors.emplace_back(id, Embedding{std::cos(theta), std::sin(theta)});
    }
    c.query = {1.0, 0.0};
    // alpha at rank 1.
    c.queries.push_back({{"alpha"}, {{1, true}, {5, true}, {20, true}}, {{1, 1.0}, {5, 1.0}, {20, 1.0}}});
    // bravo at rank 3, charlie at rank 15.
    c.queries.push_back({{"bravo", "Charlie"}, {{1, false}, {5, true}, {20, true}}, {{1, 0.0}, {5, 0.5}, {20, 1.0}}});
    // delta at rank 25, the rest nowhere.
    c.queries.push_back({{"delta", "echo", "foxtrot", "golf"},
                         {{1, false}, {5, false}, {20, false}},
                         {{1, 0.0}, {5, 0.0}, {20, 0.0}}});
    return c;
}

// ---------------------------------------------------------------------------
// CLI workspace

Workspace write_workspace(const fs::path& dir, const InteractionWorld& world) {
    Workspace ws;
    fs::create_directories(dir);
    std::string tsv = "id\ttitle\ttext\tsource\n";
    for (const auto& p : world.passages) tsv += p.id + "\t" + p.title + "\t" + p.body + "\ttext\n";
    write_text(dir / "corpus.tsv", tsv);

    const json anchor = {{"question", world.anchor_question},
                         {"hint", nullptr},
                         {"cot_text", world.anchor_cot},
                         {"embedding", world.anchor_embedding},
                         {"source", "anchor"}};
    write_text(dir / "pool.jsonl", anchor.dump() + "\n");

    std::string questions;
    std::string gold;
    for (const auto& [id, q] : world.questions) {
        questions += json{{"id", id}, {"question", q}}.dump() + "\n";
        gold += json{{"id", id}, {"question", q}, {"answers", world.gold.at(id)}}.dump() + "\n";
    }
    ws.questions = dir / "questions.jsonl";
    ws.gold = dir / "gold.jsonl";
    write_text(ws.questions, questions);
    write_text(ws.gold, gold);
    ws.llm_script = dir / "llm.json";
    write_text(ws.llm_script, world.llm.dump(2));
    write_text(dir / "reader.json", world.reader.dump(2));
    write_text(dir / "verifier.json", world.verifier.dump(2));

    const json config = {
        {"paths",
         {{"corpus", "corpus.tsv"},
          {"pool", "pool.jsonl"},
          {"questions", "questions.jsonl"},
          {"gold", "gold.jsonl"},
          {"traces", "traces.jsonl"},
          {"cache", "cache"}}},
        {"endpoints",
         {{"llm", {{"provider", "mock"}, {"model", "scripted-llm"}, {"script", "llm.json"}}},
          {"embed", {{"provider", "mock"}, {"model", "hashed-bow"}, {"dim", kWorldDim}}},
          {"reader", {{"provider", "mock"}, {"model", "scripted-reader"}, {"script", "reader.json"}}},
          {"verifier", {{"provider", "mock"}, {"model", "scripted-verifier"}, {"script", "verifier.json"}}}}},
        {"retrieval", {{"backend", "bm25"}, {"n", 5}}},
        {"interaction", {{"max_iterations", 3}, {"require_finish_retries", 1}}},
        {"instruction", world.instruction},
        {"seed", 7},
    };
    ws.config = dir / "config.json";
    write_text(ws.config, config.dump(2));
    return ws;
}

}  // namespace kdcot::testing

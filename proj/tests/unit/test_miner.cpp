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

#include <gtest/gtest.h>

#include <random>
#include <set>

#include "fixtures.hpp"
#include "kdcot/eval.hpp"
#include "kdcot/miner.hpp"

namespace kdcot::miner {
namespace {

using Ids = std::set<std::string>;

Ids set_of(const std::vector<std::string>& v) { return {v.begin(), v.end()}; }

Ids merged(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    Ids out = set_of(a);
    out.insert(b.begin(), b.end());
    return out;
}

TEST(Entities, CapitalizedRunsWithConnectives) {
    EXPECT_EQ(extract_entities("Who recorded Palavras de Guerra Ao Vivo?"), (Ids{"Palavras de Guerra Ao Vivo"}));
    EXPECT_EQ(extract_entities("Where did the author of Gone Girl go?"), (Ids{"Gone Girl"}));
    EXPECT_EQ(extract_entities("Is the Bank of England in London?"), (Ids{"Bank of England", "London"}));
    EXPECT_EQ(extract_entities("the film \"up in the air\" won"), (Ids{"up in the air"}));
    EXPECT_TRUE(extract_entities("what is this").empty());
}

TEST(Augment, AppendsLastSubquestion) {
    const auto f = testing::miner_fixture();
    EXPECT_EQ(augment_query(f.item.question, f.rationale),
              "Who recorded Palavras de Guerra Ao Vivo? Which artist released the album Palavras de Guerra Ao Vivo?");
    cot::CoTRecord plain;
    EXPECT_EQ(augment_query("q", plain), "q");
}

TEST(Mine, CoOccurrenceFixture) {
    const auto f = testing::miner_fixture();
    corpus::PassageStore store(f.passages);
    const auto index = retrieval::Bm25Index::build(store);
    const auto ex = mine_examples(f.item, f.rationale, index, store);
    EXPECT_EQ(ex.rule, Rule::CoOccurrence);
    EXPECT_EQ(ex.question, f.item.question);
    EXPECT_EQ(set_of(ex.positives), set_of(f.co_occurrence));
    EXPECT_EQ(set_of(ex.hard_negatives), merged(f.answer_only, f.entity_only));
}

TEST(Mine, FallbackFixture) {
    const auto f = testing::miner_fixture();
    std::vector<corpus::Passage> without;
    for (const auto& p : f.passages) {
        if (!set_of(f.co_occurrence).contains(p.id)) without.push_back(p);
    }
    corpus::PassageStore store(without);
    const auto index = retrieval::Bm25Index::build(store);
    const auto ex = mine_examples(f.item, f.rationale, index, store);
    EXPECT_EQ(ex.rule, Rule::AnswerOnlyFallback);
    EXPECT_EQ(set_of(ex.positives), set_of(f.answer_only));
    EXPECT_EQ(set_of(ex.hard_negatives), set_of(f.entity_only));
}

TEST(Mine, DprJsonShape) {
    const auto f = testing::miner_fixture();
    corpus::PassageStore store(f.passages);
    const auto ex = mine_examples(f.item, f.rationale, retrieval::Bm25Index::build(store), store);
    const auto j = to_dpr_json(ex, store);
    EXPECT_EQ(j["question"], f.item.question);
    EXPECT_EQ(j["rule"], "CoOccurrence");
    EXPECT_EQ(j["positive_ctxs"].size(), 3u);
    EXPECT_TRUE(j["positive_ctxs"][0].contains("title"));
    EXPECT_EQ(j["hard_negative_ctxs"].size(), 6u);
}

// Invariants over random corpora: positives and negatives are disjoint,
// every positive contains an answer, CoOccurrence positives also contain an
// entity, negatives never contain both, and the rule matches the presence of
// co-occurring passages.
TEST(Property, MinerInvariants) {
    std::mt19937_64 rng(31);
    const std::vector<std::string> vocab = {"river", "album", "Nile", "Delta", "Blue Note", "live", "city", "the"};
    for (int trial = 0; trial < 2000; ++trial) {
        collection::TrainItem item{"x", "Which album did Blue Note release?", {"Nile Delta"}, std::nullopt};
        cot::CoTRecord cot;
        corpus::PassageStore store;
        const int n = 1 + static_cast<int>(rng() % 12);
        for (int i = 0; i < n; ++i) {
            std::string body;
            for (int w = 1 + static_cast<int>(rng() % 8); w > 0; --w) body += vocab[rng() % vocab.size()] + " ";
            store.add({"p" + std::to_string(i), "t", body, corpus::Source::Text});
        }
        const auto index = retrieval::Bm25Index::build(store);
        const auto ex = mine_examples(item, cot, index, store);
        const auto entities = extract_entities(augment_query(item.question, cot));
        auto has = [](const std::string& body, const std::string& needle) {
            return eval::normalize(body).find(eval::normalize(needle)) != std::string::npos;
        };
        auto has_entity = [&](const std::string& body) {
            for (const auto& e : entities) {
                if (has(body, e)) return true;
            }
            return false;
        };
        bool any_co = false;
        for (const auto& r : index.search(item.question + " " + item.answers[0], 100)) {
            const auto& body = store.at(r.id).body;
            any_co = any_co || (has(body, item.answers[0]) && has_entity(body));
        }
        EXPECT_EQ(ex.rule == Rule::CoOccurrence, any_co);
        const Ids pos = set_of(ex.positives);
        for (const auto& id : ex.hard_negatives) {
            EXPECT_FALSE(pos.contains(id));
            const auto& body = store.at(id).body;
            EXPECT_FALSE(has(body, item.answers[0]) && has_entity(body));
        }
        for (const auto& id : ex.positives) {
            const auto& body = store.at(id).body;
            EXPECT_TRUE(has(body, item.answers[0]));
            if (ex.rule == Rule::CoOccurrence) EXPECT_TRUE(has_entity(body));
            else EXPECT_FALSE(has_entity(body));
        }
        EXPECT_EQ(pos.size(), ex.positives.size());
    }
}

}  // namespace
}  // namespace kdcot::miner

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

#include "fixtures.hpp"
#include "kdcot/qa_pipeline.hpp"

namespace kdcot::qa {
namespace {

using clients::MockChat;
using clients::MockScript;

struct Setup {
    corpus::PassageStore store;
    std::shared_ptr<const retrieval::Bm25Index> index;
};

Setup gone_girl() {
    Setup s;
    for (const auto& p : testing::correction_world().passages) s.store.add(p);
    s.index = std::make_shared<const retrieval::Bm25Index>(retrieval::Bm25Index::build(s.store));
    return s;
}

CandidateAnswer candidate(std::string text) { return {std::move(text), {}, ""}; }

TEST(Reader, FidSegmentsAndPrompt) {
    const std::vector<corpus::Passage> ps = {{"a", "T1", "body one", corpus::Source::Text},
                                             {"b", "T2", "line\nbreak", corpus::Source::Text}};
    const auto in = assemble_fid_inputs("Who?", ps);
    ASSERT_EQ(in.segments.size(), 2u);
    EXPECT_EQ(in.segments[0], "question: Who? title: T1 context: body one");
    EXPECT_EQ(reader_prompt(in), "question: Who? title: T1 context: body one\nquestion: Who? title: T2 context: line break");
    EXPECT_THROW((void)assemble_fid_inputs("Who?", {}), std::invalid_argument);
}

TEST(Reader, AnswerSubquestionUsesTopPassagesAndFirstLine) {
    auto s = gone_girl();
    Bm25Backend backend(s.index);
    MockChat reader(MockScript{}.substring("title: Gillian Flynn context:", "  University of Kansas \nmore"));
    const auto c = answer_subquestion("Where did Gillian Flynn go to college?", backend, s.store, reader, 2);
    EXPECT_EQ(c.text, "University of Kansas");
    ASSERT_EQ(c.supporting_passages.size(), 2u);
    EXPECT_EQ(c.supporting_passages[0], "Gillian Flynn");
    EXPECT_EQ(backend.calls(), 1u);
}

TEST(Reader, NoPassagesStillAsksReader) {
    auto s = gone_girl();
    Bm25Backend backend(s.index);
    MockChat reader(MockScript{}.exact("question: zzz title: none context: none", "none"));
    const auto c = answer_subquestion("zzz", backend, s.store, reader, 5);
    EXPECT_EQ(c.text, "none");
    EXPECT_TRUE(c.supporting_passages.empty());
}

TEST(Reader, EndpointErrorsPropagate) {
    auto s = gone_girl();
    Bm25Backend backend(s.index);
    MockChat reader(MockScript{}.failing(clients::MockRule::Matcher::Substring, "question:"));
    EXPECT_THROW(answer_subquestion("Gone Girl", backend, s.store, reader), clients::EndpointError);
}

TEST(Verify, EqualAnswersSkipTheVerifier) {
    MockChat verifier(MockScript{});
    const auto v = verify("q", "The Beatles", candidate("beatles"), verifier);
    EXPECT_EQ(v.choice, Choice::KeepOriginal);
    EXPECT_FALSE(v.verifier_called);
    EXPECT_EQ(verifier.calls(), 0u);
}

TEST(Verify, ReplyMapping) {
    struct Case {
        std::string reply;
        Choice choice;
        std::string final_text;
    };
    const std::vector<Case> cases = {
        {"A", Choice::KeepOriginal, "orig"},
        {"(B)", Choice::UseCandidate, "cand"},
        {" 'B'.\nbecause", Choice::UseCandidate, "cand"},
        {"Orig.", Choice::KeepOriginal, "orig"},
        {"the cand", Choice::UseCandidate, "cand"},
        {"Something Else\nreason", Choice::NewAnswer, "Something Else"},
        {"", Choice::KeepOriginal, "orig"},
    };
    for (const auto& c : cases) {
        MockChat verifier(MockScript{.rules = {}, .default_response = c.reply});
        const auto v = verify("q", "orig", candidate("cand"), verifier);
        EXPECT_EQ(v.choice, c.choice) << c.reply;
        EXPECT_EQ(v.final_text, c.final_text) << c.reply;
        EXPECT_TRUE(v.verifier_called);
    }
}

TEST(Verify, PromptLayout) {
    EXPECT_EQ(verifier_prompt("Q?", "x", "y"),
              "Question: Q?\nAnswer A: x\nAnswer B: y\nWhich answer is correct? Reply 'A', 'B', or give the correct answer.");
    EXPECT_EQ(verifier_prompt_without_candidate("Q?", "x"),
              "Question: Q?\nAnswer A: x\nIs answer A correct? Reply 'A', or give the correct answer.");
}

TEST(Verify, EndpointFailureKeepsOriginal) {
    MockChat verifier(MockScript{}.failing(clients::MockRule::Matcher::Substring, "Question"));
    const auto v = verify("q", "orig", candidate("cand"), verifier);
    EXPECT_EQ(v.choice, Choice::KeepOriginal);
    EXPECT_EQ(v.final_text, "orig");
    const auto w = verify_without_candidate("q", "orig", verifier);
    EXPECT_EQ(w.choice, Choice::KeepOriginal);
}

TEST(Verify, WithoutCandidate) {
    MockChat keep(MockScript{.rules = {}, .default_response = "B"});
    EXPECT_EQ(verify_without_candidate("q", "orig", keep).choice, Choice::KeepOriginal);
    MockChat fix(MockScript{.rules = {}, .default_response = "Fixed"});
    const auto v = verify_without_candidate("q", "orig", fix);
    EXPECT_EQ(v.choice, Choice::NewAnswer);
    EXPECT_EQ(v.final_text, "Fixed");
}

TEST(Backends, DenseAndHybrid) {
    auto s = gone_girl();
    auto vectors = std::make_shared<retrieval::DenseVectors>();
    auto embed = std::make_shared<clients::MockEmbed>(2, std::map<std::string, Embedding>{{"q", {1, 0}}});
    vectors->add("Gone Girl", {0, 1});
    vectors->add("Kansas", {1, 0.1});
    DenseBackend dense(vectors, embed);
    const auto d = dense.search("q", 1);
    ASSERT_EQ(d.size(), 1u);
    EXPECT_EQ(d[0].id, "Kansas");

    auto bm25 = std::make_shared<Bm25Backend>(s.index);
    auto dense_ptr = std::make_shared<DenseBackend>(vectors, embed);
    HybridBackend hybrid({bm25, dense_ptr});
    const auto h = hybrid.search("q", 5);
    EXPECT_EQ(hybrid.calls(), 1u);
    EXPECT_EQ(bm25->calls(), 1u);
    EXPECT_EQ(dense_ptr->calls(), 1u);
    ASSERT_EQ(h.size(), 2u);
    EXPECT_EQ(h[0].id, "Kansas");
}

}  // namespace
}  // namespace kdcot::qa

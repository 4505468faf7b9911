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
#include "kdcot/collection_builder.hpp"

namespace kdcot::collection {
namespace {

struct Built {
    BuildResult result;
    std::uint64_t chat_calls = 0;
};

Built build_fixture(std::size_t parallelism, int max_iterations = kDefaultMaxIterations) {
    const auto f = testing::collection_fixture();
    clients::MockChat chat(testing::script(f.script));
    clients::MockEmbed embed(4, f.vectors);
    BuildOptions options;
    options.instruction = "Write a rationale that reaches the hinted answer.";
    options.max_iterations = max_iterations;
    options.parallelism = parallelism;
    Built b{build_collection(f.train, f.anchors, chat, embed, options), 0};
    b.chat_calls = chat.calls();
    return b;
}

TEST(AnswerMatch, FinishMembershipAfterNormalization) {
    EXPECT_TRUE(answer_match("Thought 1: t\nAction 1: Finish[The Beatles]", {"beatles"}));
    EXPECT_TRUE(answer_match("Thought 1: t\nAction 1: Finish[x; Paris]", {"paris"}));
    EXPECT_FALSE(answer_match("Thought 1: t\nAction 1: Finish[Paris, Texas]", {"Paris"}));
    EXPECT_FALSE(answer_match("Thought 1: Paris\nAction 1: Question[Paris?]", {"Paris"}));
    EXPECT_FALSE(answer_match("no structure Paris", {"Paris"}));
}

TEST(Stub, CompletionOrRestatement) {
    EXPECT_EQ(complete_from_stub("Thought 1:", " t\nAction 1: Finish[x]"), "Thought 1: t\nAction 1: Finish[x]");
    EXPECT_EQ(complete_from_stub("Thought 1:", "Thought 1: t\nAction 1: Finish[x]\n"),
              "Thought 1: t\nAction 1: Finish[x]");
}

TEST(Build, AdmissionScheduleOnFixture) {
    const auto f = testing::collection_fixture();
    const auto b = build_fixture(1);
    const auto& report = b.result.report;
    EXPECT_EQ(report.admitted_per_iteration, f.expected_admitted);
    EXPECT_EQ(report.iterations_run, 5);
    EXPECT_EQ(b.result.pool.size(), f.expected_pool);
    EXPECT_EQ(report.unresolved, (std::vector<std::string>{"t9", "t10"}));
    EXPECT_EQ(report.endpoint_failures, 0);
    // 10 + 4 + 2 + 2 + 2 attempts.
    EXPECT_EQ(b.chat_calls, 20u);
}

TEST(Build, AdmittedRecordsCarryQuestionHintAndPassAnswerMatch) {
    const auto f = testing::collection_fixture();
    const auto b = build_fixture(1);
    const auto& items = b.result.pool.items();
    EXPECT_EQ(items[0].source, prompts::DemoSource::HumanAnchor);
    for (std::size_t i = 1; i < items.size(); ++i) {
        const auto& d = items[i];
        EXPECT_EQ(d.source, prompts::DemoSource::Constructed);
        EXPECT_TRUE(cot::is_well_formed(d.record));
        const auto it = std::find_if(f.train.begin(), f.train.end(),
                                     [&](const TrainItem& t) { return t.question == d.record.question; });
        ASSERT_NE(it, f.train.end());
        ASSERT_TRUE(d.record.hint.has_value());
        EXPECT_EQ(*d.record.hint, it->answers);
        EXPECT_TRUE(answer_match(cot::serialize_rounds(d.record), it->answers));
    }
}

TEST(Build, ParallelRunGivesTheSamePool) {
    const auto serial = build_fixture(1);
    const auto parallel = build_fixture(4);
    EXPECT_EQ(parallel.result.report.admitted_per_iteration, serial.result.report.admitted_per_iteration);
    ASSERT_EQ(parallel.result.pool.size(), serial.result.pool.size());
    for (std::size_t i = 0; i < serial.result.pool.size(); ++i) {
        EXPECT_EQ(parallel.result.pool.items()[i].record, serial.result.pool.items()[i].record);
    }
}

TEST(Build, IterationCapStopsEarly) {
    const auto b = build_fixture(1, 1);
    EXPECT_EQ(b.result.report.admitted_per_iteration, std::vector<int>{6});
    EXPECT_EQ(b.result.report.unresolved.size(), 4u);
    const auto none = build_fixture(1, 0);
    EXPECT_EQ(none.result.pool.size(), 1u);
    EXPECT_EQ(none.result.report.iterations_run, 0);
}

TEST(Build, EndpointFailuresAreCountedNotFatal) {
    const auto f = testing::collection_fixture();
    auto script = testing::script(f.script);
    script.rules.insert(script.rules.begin(), clients::MockScript{}
                                                  .failing(clients::MockRule::Matcher::Substring, "Question: Which river flows through Avalon?\nHint")
                                                  .rules.front());
    clients::MockChat chat(std::move(script));
    clients::MockEmbed embed(4, f.vectors);
    BuildOptions options;
    options.max_iterations = 2;
    const auto r = build_collection(f.train, f.anchors, chat, embed, options);
    EXPECT_EQ(r.report.endpoint_failures, 2);
    EXPECT_EQ(r.report.admitted_per_iteration, (std::vector<int>{5, 2}));
}

TEST(Build, InputValidation) {
    const auto f = testing::collection_fixture();
    clients::MockChat chat(testing::script(f.script));
    clients::MockEmbed embed(4, f.vectors);
    EXPECT_THROW(build_collection(f.train, {}, chat, embed), std::invalid_argument);
    auto dup = f.train;
    dup.push_back(dup.front());
    EXPECT_THROW(build_collection(dup, f.anchors, chat, embed), std::invalid_argument);
    auto unfinished = f.anchors;
    unfinished[0].record.finished = false;
    EXPECT_THROW(build_collection(f.train, unfinished, chat, embed), std::invalid_argument);
}

TEST(Build, ReadTrainJsonl) {
    testing::TempDir dir;
    testing::write_text(dir / "t.jsonl",
                        "{\"id\":7,\"question\":\"q\",\"answers\":\"a\"}\n"
                        "{\"question\":\"r\",\"answers\":[\"b\",\"c\"],\"composition_answers\":[\"d\"]}\n");
    const auto items = read_train_jsonl(dir / "t.jsonl");
    ASSERT_EQ(items.size(), 2u);
    EXPECT_EQ(items[0].id, "7");
    EXPECT_EQ(items[0].answers, std::vector<std::string>{"a"});
    EXPECT_EQ(items[1].id, "2");
    EXPECT_EQ(items[1].composition_answers, std::vector<std::string>{"d"});
    testing::write_text(dir / "bad.jsonl", "{\"question\":\"q\",\"answers\":[]}\n");
    EXPECT_THROW((void)read_train_jsonl(dir / "bad.jsonl"), io::FormatError);
}

}  // namespace
}  // namespace kdcot::collection

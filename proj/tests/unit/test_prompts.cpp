// Copyright 2026 The dsu-toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <functional>
#include <map>

#include "dsu/error.hpp"
#include "dsu/prompts.hpp"
#include "dsu/rng.hpp"

using namespace dsu;
using namespace dsu::prompts;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return ErrorCode::Io;
}

std::vector<PromptExample> batch(Task task, std::size_t n, const std::string& tag) {
    std::vector<PromptExample> out;
    InstructionParams p;
    p.question = "what is said?";
    p.language = "German";
    for (std::size_t i = 0; i < n; ++i) {
        const std::vector<std::uint32_t> ids{static_cast<std::uint32_t>(i), 7};
        const std::string output = task == Task::SA ? "neutral" : "text " + std::to_string(i);
        out.push_back(build_example(task, ids, 100, p, output, tag + std::to_string(i)));
    }
    return out;
}

}  // namespace

TEST_CASE("instruction templates") {
    CHECK(render_instruction(Task::ASR) == "Generate transcription of the given speech input");
    CHECK(render_instruction(Task::SA) ==
          "Classify the given speech into one of positive, neutral and negative sentiments");
    CHECK(render_instruction(Task::NER) == "Find named entity in the speech.");
    CHECK(render_instruction(Task::S2TT, {.language = "German"}) == "Translate the input to German");
    CHECK(render_instruction(Task::SQA, {.question = "Who is speaking?"}) == "Who is speaking?");
}

TEST_CASE("missing template parameters") {
    CHECK(code_of([] { render_instruction(Task::S2TT); }) == ErrorCode::MissingParam);
    CHECK(code_of([] { render_instruction(Task::SQA); }) == ErrorCode::MissingParam);
    CHECK(code_of([] { render_instruction(Task::SQA, {.question = ""}); }) == ErrorCode::MissingParam);
}

TEST_CASE("task names") {
    for (Task t : {Task::SQA, Task::ASR, Task::SA, Task::NER, Task::S2TT}) CHECK(parse_task(task_name(t)) == t);
    CHECK(parse_task("s2tt") == Task::S2TT);
    CHECK(code_of([] { parse_task("asr?"); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("token rendering is a bijection") {
    CHECK(render_dsu_token(0) == "<dsu_0>");
    CHECK(render_dsu_token(1999) == "<dsu_1999>");
    Rng rng(5);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<std::uint32_t> ids(rng.index(40));
        for (auto& x : ids) x = static_cast<std::uint32_t>(rng.index(5000));
        const auto toks = render_dsu_tokens(ids);
        REQUIRE(parse_dsu_tokens(toks) == ids);
    }
    for (const char* bad : {"<dsu_>", "<dsu_01>", "dsu_3", "<dsu_3", "<dsu_-1>", "<dsu_4294967296>", "<DSU_1>"}) {
        const std::vector<std::string> toks{bad};
        CHECK(code_of([&] { parse_dsu_tokens(toks); }) == ErrorCode::CorruptFile);
    }
}

TEST_CASE("example validation") {
    const std::vector<std::uint32_t> ids{1, 2, 3};
    CHECK(code_of([&] { build_example(Task::ASR, ids, 3, {}, "x"); }) == ErrorCode::UnknownUnit);
    CHECK(code_of([&] { build_example(Task::SA, ids, 10, {}, "happy"); }) == ErrorCode::InvalidLabel);
    for (auto label : kSentimentLabels) CHECK(build_example(Task::SA, ids, 10, {}, label).output == label);
    CHECK(build_example(Task::ASR, ids, 10, {}, "Hello, World!").output == "hello world");
    CHECK(build_example(Task::NER, ids, 10, {}, "Paris, France").output == "Paris, France");
}

TEST_CASE("layout puts speech before the instruction") {
    const std::vector<std::uint32_t> ids{4, 9};
    const auto ex = build_example(Task::ASR, ids, 10, {}, "hi", "a");
    const auto parts = prompt_layout(ex);
    CHECK(parts[0].segment == Segment::Speech);
    CHECK(parts[0].text == "<dsu_4><dsu_9>");
    CHECK(parts[1].segment == Segment::Instruction);
    CHECK(parts[1].text == render_instruction(Task::ASR));
    CHECK(parts[2].segment == Segment::Output);
    CHECK(parts[2].text == "hi");
}

TEST_CASE("manifest round trip keeps UTF-8") {
    const std::vector<std::uint32_t> ids{0, 1};
    std::vector<PromptExample> exs;
    exs.push_back(build_example(Task::S2TT, ids, 5, {.language = "Deutsch"}, "Grüße aus Köln", "utt-ü"));
    exs.push_back(build_example(Task::SQA, ids, 5, {.question = "¿Quién habla?"}, "nadie", "q"));
    exs.push_back(build_example(Task::ASR, std::vector<std::uint32_t>{}, 5, {}, "", "empty"));
    const std::string text = write_manifest(exs);
    CHECK(read_manifest(text) == exs);
    CHECK(read_manifest(write_manifest(std::vector<PromptExample>{})).empty());
}

TEST_CASE("manifest corruption") {
    CHECK(code_of([] { read_manifest(""); }) == ErrorCode::CorruptFile);
    CHECK(code_of([] { read_manifest("{\"format\":\"other\"}\n"); }) == ErrorCode::CorruptFile);
    const auto good = write_manifest(batch(Task::SA, 2, "s"));
    std::string bad = good;
    bad.replace(bad.find("\"output\":\"neutral\""), 18, "\"output\":\"furious\"");
    try {
        read_manifest(bad);
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InvalidLabel);
        CHECK(e.message().find("line 2") != std::string::npos);
    }
    CHECK(code_of([&] { read_manifest(good + "{\"task\":\"ASR\"}\n"); }) == ErrorCode::CorruptFile);
}

TEST_CASE("mixing keeps every example and is seed deterministic") {
    const std::vector<std::vector<PromptExample>> sets{batch(Task::ASR, 30, "a"), batch(Task::SA, 20, "s"),
                                                       batch(Task::S2TT, 10, "t")};
    const auto mixed = mix_datasets(sets, 11);
    REQUIRE(mixed.size() == 60);
    std::map<Task, int> counts;
    for (const auto& ex : mixed) ++counts[ex.task];
    CHECK(counts[Task::ASR] == 30);
    CHECK(counts[Task::SA] == 20);
    CHECK(counts[Task::S2TT] == 10);
    CHECK(mix_datasets(sets, 11) == mixed);
    CHECK(mix_datasets(sets, 12) != mixed);

    std::vector<std::string> ids_in, ids_out;
    for (const auto& s : sets)
        for (const auto& ex : s) ids_in.push_back(ex.source_id);
    for (const auto& ex : mixed) ids_out.push_back(ex.source_id);
    std::ranges::sort(ids_in);
    std::ranges::sort(ids_out);
    CHECK(ids_in == ids_out);
}

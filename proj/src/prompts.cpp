// Copyright 2026 The dsu-toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "dsu/prompts.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>

#include "dsu/error.hpp"
#include "dsu/metrics.hpp"
#include "dsu/rng.hpp"

namespace dsu::prompts {

namespace {

using Json = nlohmann::json;

constexpr std::string_view kPrefix = "<dsu_";

std::optional<std::uint32_t> parse_token(std::string_view tok) {
    if (!tok.starts_with(kPrefix) || !tok.ends_with(">")) return std::nullopt;
    const std::string_view digits = tok.substr(kPrefix.size(), tok.size() - kPrefix.size() - 1);
    if (digits.empty() || (digits.size() > 1 && digits[0] == '0')) return std::nullopt;
    std::uint32_t value = 0;
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
    if (ec != std::errc{} || ptr != digits.data() + digits.size()) return std::nullopt;
    return value;
}

void check_output(Task task, const std::string& output) {
    if (task == Task::SA && std::ranges::find(kSentimentLabels, output) == kSentimentLabels.end()) {
        raise(ErrorCode::InvalidLabel, "sentiment output must be positive, neutral or negative, got '" + output + "'");
    }
}

}  // namespace

std::string_view task_name(Task task) {
    switch (task) {
        case Task::SQA: return "SQA";
        case Task::ASR: return "ASR";
        case Task::SA: return "SA";
        case Task::NER: return "NER";
        case Task::S2TT: return "S2TT";
    }
    return "?";
}

Task parse_task(std::string_view name) {
    for (Task t : {Task::SQA, Task::ASR, Task::SA, Task::NER, Task::S2TT}) {
        const std::string_view canon = task_name(t);
        if (std::ranges::equal(canon, name, [](char a, char b) {
                return std::toupper(static_cast<unsigned char>(a)) == std::toupper(static_cast<unsigned char>(b));
            })) {
            return t;
        }
    }
    raise(ErrorCode::InvalidArgument, "unknown task '" + std::string(name) + "'");
}

std::string render_instruction(Task task, const InstructionParams& params) {
    switch (task) {
        case Task::SQA:
            if (!params.question || params.question->empty()) raise(ErrorCode::MissingParam, "SQA needs a question");
            return *params.question;
        case Task::ASR:
            return "Generate transcription of the given speech input";
        case Task::SA:
            return "Classify the given speech into one of positive, neutral and negative sentiments";
        case Task::NER:
            return "Find named entity in the speech.";
        case Task::S2TT:
            if (!params.language || params.language->empty()) raise(ErrorCode::MissingParam, "S2TT needs a language");
            return "Translate the input to " + *params.language;
    }
    raise(ErrorCode::InvalidArgument, "unknown task");
}

std::string render_dsu_token(std::uint32_t id) { return std::string(kPrefix) + std::to_string(id) + ">"; }

std::vector<std::string> render_dsu_tokens(std::span<const std::uint32_t> ids) {
    std::vector<std::string> out;
    out.reserve(ids.size());
    for (std::uint32_t id : ids) out.push_back(render_dsu_token(id));
    return out;
}

std::vector<std::uint32_t> parse_dsu_tokens(std::span<const std::string> tokens) {
    std::vector<std::uint32_t> out;
    out.reserve(tokens.size());
    for (const auto& tok : tokens) {
        const auto id = parse_token(tok);
        if (!id) raise(ErrorCode::CorruptFile, "malformed DSU token '" + tok + "'");
        out.push_back(*id);
    }
    return out;
}

PromptExample build_example(Task task, std::span<const std::uint32_t> ids, std::size_t vocab_size,
                            const InstructionParams& params, std::string_view output_text, std::string source_id) {
    for (std::uint32_t id : ids) {
        if (id >= vocab_size) {
            raise(ErrorCode::UnknownUnit,
                  "token " + std::to_string(id) + " outside vocabulary of size " + std::to_string(vocab_size));
        }
    }
    PromptExample ex;
    ex.task = task;
    ex.instruction = render_instruction(task, params);
    ex.dsu_tokens = render_dsu_tokens(ids);
    ex.output = task == Task::ASR ? metrics::normalize_text(output_text) : std::string(output_text);
    ex.source_id = std::move(source_id);
    check_output(task, ex.output);
    return ex;
}

std::array<PromptPart, 3> prompt_layout(const PromptExample& ex) {
    std::string speech;
    for (const auto& t : ex.dsu_tokens) speech += t;
    return {PromptPart{Segment::Speech, std::move(speech)}, PromptPart{Segment::Instruction, ex.instruction},
            PromptPart{Segment::Output, ex.output}};
}

std::string write_manifest(std::span<const PromptExample> examples) {
    std::string out = Json{{"format", "dsu-prompt"}, {"version", 1}, {"layout", "speech-first"}}.dump() + "\n";
    for (const auto& ex : examples) {
        Json j;
        j["task"] = task_name(ex.task);
        j["instruction"] = ex.instruction;
        j["dsu"] = ex.dsu_tokens;
        j["output"] = ex.output;
        j["id"] = ex.source_id;
        out += j.dump() + "\n";
    }
    return out;
}

std::vector<PromptExample> read_manifest(std::string_view text) {
    std::vector<PromptExample> out;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    bool header_seen = false;
    while (pos < text.size()) {
        const std::size_t nl = text.find('\n', pos);
        const std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() : nl + 1;
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
        try {
            const Json j = Json::parse(line);
            if (!header_seen) {
                if (!j.is_object() || j.value("format", "") != "dsu-prompt" || j.value("version", 0) != 1 ||
                    j.value("layout", "") != "speech-first") {
                    raise(ErrorCode::CorruptFile, "missing or unsupported dsu-prompt header");
                }
                header_seen = true;
                continue;
            }
            for (const char* key : {"task", "instruction", "output", "id"}) {
                if (!j.contains(key) || !j[key].is_string()) {
                    raise(ErrorCode::CorruptFile, std::string("field '") + key + "' missing or not a string");
                }
            }
            if (!j.contains("dsu") || !j["dsu"].is_array()) raise(ErrorCode::CorruptFile, "field 'dsu' must be an array");
            PromptExample ex;
            ex.task = parse_task(j["task"].get<std::string>());
            ex.instruction = j["instruction"].get<std::string>();
            ex.dsu_tokens = j["dsu"].get<std::vector<std::string>>();
            ex.output = j["output"].get<std::string>();
            ex.source_id = j["id"].get<std::string>();
            if (ex.instruction.empty()) raise(ErrorCode::CorruptFile, "empty instruction");
            parse_dsu_tokens(ex.dsu_tokens);
            check_output(ex.task, ex.output);
            out.push_back(std::move(ex));
        } catch (const Json::exception& e) {
            raise(ErrorCode::CorruptFile, "line " + std::to_string(line_no) + ": " + e.what());
        } catch (const Error& e) {
            throw e.with_context("line " + std::to_string(line_no));
        }
    }
    if (!header_seen) raise(ErrorCode::CorruptFile, "prompt manifest has no header line");
    return out;
}

std::vector<PromptExample> mix_datasets(std::span<const std::vector<PromptExample>> manifests, std::uint64_t seed) {
    std::vector<PromptExample> all;
    for (const auto& m : manifests) all.insert(all.end(), m.begin(), m.end());
    Rng rng(seed);
    rng.shuffle(std::span(all));
    return all;
}

}  // namespace dsu::prompts

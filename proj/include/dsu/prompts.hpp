// Copyright 2026 The dsu-toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dsu::prompts {

enum class Task { SQA, ASR, SA, NER, S2TT };

std::string_view task_name(Task task);
Task parse_task(std::string_view name);  // case-insensitive; InvalidArgument on unknown names

struct InstructionParams {
    std::optional<std::string> question;  // SQA
    std::optional<std::string> language;  // S2TT
};

std::string render_instruction(Task task, const InstructionParams& params = {});

std::string render_dsu_token(std::uint32_t id);
std::vector<std::string> render_dsu_tokens(std::span<const std::uint32_t> ids);
// Inverse of render_dsu_tokens; CorruptFile on anything not shaped <dsu_INT>.
std::vector<std::uint32_t> parse_dsu_tokens(std::span<const std::string> tokens);

inline constexpr std::array<std::string_view, 3> kSentimentLabels = {"positive", "neutral", "negative"};

struct PromptExample {
    Task task = Task::ASR;
    std::string instruction;
    std::vector<std::string> dsu_tokens;
    std::string output;
    std::string source_id;

    bool operator==(const PromptExample&) const = default;
};

// Validates the example invariants. ASR outputs are normalized text;
// SA outputs must be one of kSentimentLabels.
PromptExample build_example(Task task, std::span<const std::uint32_t> ids, std::size_t vocab_size,
                            const InstructionParams& params, std::string_view output_text,
                            std::string source_id = {});

enum class Segment { Speech, Instruction, Output };

struct PromptPart {
    Segment segment;
    std::string text;
};

// Prompt layout is speech first, then instruction, then output; no boundary
// tokens are inserted between them.
std::array<PromptPart, 3> prompt_layout(const PromptExample& ex);

std::string write_manifest(std::span<const PromptExample> examples);
std::vector<PromptExample> read_manifest(std::string_view text);

// Deterministic seeded shuffle of the concatenation.
std::vector<PromptExample> mix_datasets(std::span<const std::vector<PromptExample>> manifests, std::uint64_t seed);

}  // namespace dsu::prompts

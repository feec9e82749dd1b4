// Copyright 2026 The dsu-toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "dsu/adapter.hpp"
#include "dsu/features.hpp"
#include "dsu/metrics.hpp"

namespace dsu::cli {

struct VqSection {
    std::size_t k = 1000;
    std::size_t max_iters = 300;
    double rel_tol = 1e-4;
    std::optional<std::size_t> sample_cap;
};

struct ReduceSection {
    std::size_t subword_vocab = 2000;
    std::uint32_t blank = 0;
};

struct PromptsSection {
    std::string task = "asr";
    std::string language;
};

struct AdapterSection {
    adapter::AdapterConfig model;
    adapter::AdamWOptions optimizer;
    std::size_t steps = 500;
    std::size_t examples = 4;
    std::size_t frames = 16;
};

/// Everything a pipeline run can be configured with. Loaded from JSON;
/// command-line flags override individual fields.
struct PipelineConfig {
    std::uint64_t seed = 0;
    features::MfccConfig features;
    VqSection vq;
    ReduceSection reduce;
    PromptsSection prompts;
    AdapterSection adapter;
    metrics::BleuOptions metrics;
};

PipelineConfig parse_config(std::string_view json_text);
PipelineConfig load_config(const std::filesystem::path& path);
std::string dump_config(const PipelineConfig& cfg);

// Entry point for the `dsu` tool; returns the process exit code.
int run(int argc, char** argv);

}  // namespace dsu::cli

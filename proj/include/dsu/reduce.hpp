// Copyright 2026 The dsu-toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dsu/features.hpp"
#include "dsu/vq.hpp"

namespace dsu::reduce {

using vq::DsuSequence;

// Collapses runs of equal adjacent units to one unit.
std::vector<std::uint32_t> dedup_units(std::span<const std::uint32_t> units);
DsuSequence dedup(const DsuSequence& z);

struct Merge {
    std::uint32_t left = 0;
    std::uint32_t right = 0;
    std::uint32_t token = 0;

    bool operator==(const Merge&) const = default;
};

/// BPE merge table over DSU ids. Tokens [0, base_k) are the units
/// themselves; merge i creates token base_k + i.
class SubwordModel {
public:
    SubwordModel() = default;
    SubwordModel(std::uint32_t base_k, std::vector<Merge> merges, std::size_t target_vocab = 0);

    std::uint32_t base_k() const { return base_k_; }
    std::size_t target_vocab() const { return target_vocab_; }
    std::size_t vocab_size() const { return base_k_ + merges_.size(); }
    const std::vector<Merge>& merges() const { return merges_; }
    // Underlying DSU ids of a token.
    std::span<const std::uint32_t> expansion(std::uint32_t token) const;

    bool operator==(const SubwordModel& other) const {
        return base_k_ == other.base_k_ && merges_ == other.merges_;
    }

private:
    std::uint32_t base_k_ = 0;
    std::size_t target_vocab_ = 0;
    std::vector<Merge> merges_;
    std::vector<std::uint32_t> base_ids_;
    std::vector<std::vector<std::uint32_t>> expansions_;  // merged tokens only
};

/// Subword-encoded sequence Z~ of length T~.
struct ReducedSequence {
    std::vector<std::uint32_t> tokens;
    std::uint32_t vocab_size = 0;
    std::string source_id;

    bool operator==(const ReducedSequence&) const = default;
};

// Greedy most-frequent-pair merging; pairs are counted inside utterances
// only, ties go to the smallest (left, right), and training stops at
// target_vocab or when no pair occurs at least twice.
SubwordModel bpe_train(std::span<const DsuSequence> corpus, std::size_t target_vocab = 2000);

ReducedSequence bpe_encode(const SubwordModel& model, const DsuSequence& z);
DsuSequence bpe_decode(const SubwordModel& model, const ReducedSequence& r);

double reduction_ratio(std::size_t before_len, std::size_t after_len);

// Total-length ratio over a corpus; sequences are paired by position.
double corpus_reduction_ratio(std::span<const DsuSequence> before, std::span<const DsuSequence> after);

features::FeatureSequence ctc_blank_removal(std::span<const std::uint32_t> labels,
                                            const features::FeatureSequence& emb, std::uint32_t blank = 0);

// Blanks are dropped first and break runs: [a, -, a] yields two frames.
features::FeatureSequence ctc_frame_average(std::span<const std::uint32_t> labels,
                                            const features::FeatureSequence& emb, std::uint32_t blank = 0);

std::size_t count_label_runs(std::span<const std::uint32_t> labels, std::uint32_t blank);

// JSON-lines manifests: {"id": str, "k": int, "units": [int, ...]}.
std::string write_units_manifest(std::span<const DsuSequence> seqs);
std::vector<DsuSequence> read_units_manifest(std::string_view text);

ReducedSequence to_reduced(const DsuSequence& record);
DsuSequence to_record(const ReducedSequence& r);

std::string write_subword_model(const SubwordModel& model);
SubwordModel read_subword_model(std::string_view text);

}  // namespace dsu::reduce

// Copyright 2026 The dsu-toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dsu::metrics {

// Normalization rule set version, bumped whenever the rules change.
inline constexpr int kNormalizationVersion = 1;

// Lowercase ASCII, replace punctuation with spaces except apostrophes between
// two word characters, collapse whitespace, trim. Non-ASCII bytes are word
// characters.
std::string normalize_text(std::string_view s);

std::vector<std::string> split_words(std::string_view s);

struct WerBreakdown {
    std::size_t substitutions = 0;
    std::size_t deletions = 0;
    std::size_t insertions = 0;
    std::size_t ref_words = 0;
    double wer = 0.0;

    std::size_t errors() const { return substitutions + deletions + insertions; }
};

// Word-level Levenshtein alignment after normalize_text. Traceback prefers
// substitution (or match), then insertion, then deletion.
WerBreakdown wer(std::string_view ref, std::string_view hyp);
WerBreakdown align_words(std::span<const std::string> ref, std::span<const std::string> hyp);

// Sums alignments across pairs; only the corpus total must have reference words.
WerBreakdown corpus_wer(std::span<const std::string> refs, std::span<const std::string> hyps);

struct BleuOptions {
    int max_order = 4;
    bool smooth = false;  // add-one on orders >= 2
};

struct BleuStats {
    std::vector<std::size_t> matches;  // clipped, per order
    std::vector<std::size_t> totals;   // hypothesis n-grams, per order
    std::size_t hyp_len = 0;
    std::size_t ref_len = 0;
    double brevity_penalty = 0.0;
    double score = 0.0;
};

// Corpus BLEU in [0, 1] over normalized, whitespace-split text.
BleuStats bleu_stats(std::span<const std::string> refs, std::span<const std::string> hyps, const BleuOptions& opts = {});
double bleu(std::span<const std::string> refs, std::span<const std::string> hyps, const BleuOptions& opts = {});
double bleu1(std::span<const std::string> refs, std::span<const std::string> hyps);

}  // namespace dsu::metrics

// Copyright 2026 The dsu-toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "dsu/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "dsu/error.hpp"

namespace dsu::metrics {

namespace {

bool is_word_char(unsigned char c) { return c >= 0x80 || std::isalnum(c); }
bool is_space(unsigned char c) { return c < 0x80 && std::isspace(c); }

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts ngrams(const std::vector<std::string>& words, std::size_t n) {
    NgramCounts counts;
    for (std::size_t i = 0; i + n <= words.size(); ++i) {
        ++counts[std::vector<std::string>(words.begin() + static_cast<std::ptrdiff_t>(i),
                                          words.begin() + static_cast<std::ptrdiff_t>(i + n))];
    }
    return counts;
}

}  // namespace

std::string normalize_text(std::string_view s) {
    std::string spaced;
    spaced.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        const auto c = static_cast<unsigned char>(s[i]);
        if (c == '\'') {
            const bool inner = i > 0 && i + 1 < s.size() && is_word_char(static_cast<unsigned char>(s[i - 1])) &&
                               is_word_char(static_cast<unsigned char>(s[i + 1]));
            spaced.push_back(inner ? '\'' : ' ');
        } else if (c < 0x80 && std::ispunct(c)) {
            spaced.push_back(' ');
        } else if (is_space(c)) {
            spaced.push_back(' ');
        } else {
            spaced.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
        }
    }
    std::string out;
    out.reserve(spaced.size());
    for (char c : spaced) {
        if (c == ' ' && (out.empty() || out.back() == ' ')) continue;
        out.push_back(c);
    }
    if (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

std::vector<std::string> split_words(std::string_view s) {
    std::vector<std::string> words;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && is_space(static_cast<unsigned char>(s[i]))) ++i;
        std::size_t j = i;
        while (j < s.size() && !is_space(static_cast<unsigned char>(s[j]))) ++j;
        if (j > i) words.emplace_back(s.substr(i, j - i));
        i = j;
    }
    return words;
}

WerBreakdown align_words(std::span<const std::string> ref, std::span<const std::string> hyp) {
    const std::size_t n = ref.size();
    const std::size_t m = hyp.size();
    // cost[i][j]: edit distance between ref[:i] and hyp[:j]
    std::vector<std::vector<std::size_t>> cost(n + 1, std::vector<std::size_t>(m + 1));
    for (std::size_t i = 0; i <= n; ++i) cost[i][0] = i;
    for (std::size_t j = 0; j <= m; ++j) cost[0][j] = j;
    for (std::size_t i = 1; i <= n; ++i) {
        for (std::size_t j = 1; j <= m; ++j) {
            const std::size_t diag = cost[i - 1][j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
            cost[i][j] = std::min({diag, cost[i][j - 1] + 1, cost[i - 1][j] + 1});
        }
    }

    WerBreakdown out;
    out.ref_words = n;
    std::size_t i = n;
    std::size_t j = m;
    while (i > 0 || j > 0) {
        if (i > 0 && j > 0) {
            const bool same = ref[i - 1] == hyp[j - 1];
            if (cost[i][j] == cost[i - 1][j - 1] + (same ? 0 : 1)) {
                if (!same) ++out.substitutions;
                --i;
                --j;
                continue;
            }
        }
        if (j > 0 && cost[i][j] == cost[i][j - 1] + 1) {
            ++out.insertions;
            --j;
        } else {
            ++out.deletions;
            --i;
        }
    }
    out.wer = n == 0 ? 0.0 : static_cast<double>(out.errors()) / static_cast<double>(n);
    return out;
}

WerBreakdown wer(std::string_view ref, std::string_view hyp) {
    const auto ref_words = split_words(normalize_text(ref));
    if (ref_words.empty()) raise(ErrorCode::EmptyReference, "reference has no words after normalization");
    const auto hyp_words = split_words(normalize_text(hyp));
    return align_words(ref_words, hyp_words);
}

WerBreakdown corpus_wer(std::span<const std::string> refs, std::span<const std::string> hyps) {
    require(refs.size() == hyps.size(), ErrorCode::DimMismatch,
            std::to_string(refs.size()) + " references vs " + std::to_string(hyps.size()) + " hypotheses");
    WerBreakdown total;
    for (std::size_t i = 0; i < refs.size(); ++i) {
        const auto r = split_words(normalize_text(refs[i]));
        const auto h = split_words(normalize_text(hyps[i]));
        const WerBreakdown one = align_words(r, h);
        total.substitutions += one.substitutions;
        total.deletions += one.deletions;
        total.insertions += one.insertions;
        total.ref_words += one.ref_words;
    }
    if (total.ref_words == 0) raise(ErrorCode::EmptyReference, "corpus references contain no words");
    total.wer = static_cast<double>(total.errors()) / static_cast<double>(total.ref_words);
    return total;
}

BleuStats bleu_stats(std::span<const std::string> refs, std::span<const std::string> hyps, const BleuOptions& opts) {
    require(refs.size() == hyps.size(), ErrorCode::DimMismatch,
            std::to_string(refs.size()) + " references vs " + std::to_string(hyps.size()) + " hypotheses");
    require(!refs.empty(), ErrorCode::EmptyInput, "BLEU needs at least one pair");
    require(opts.max_order >= 1, ErrorCode::InvalidArgument, "max_order must be >= 1");

    const auto orders = static_cast<std::size_t>(opts.max_order);
    BleuStats st;
    st.matches.assign(orders, 0);
    st.totals.assign(orders, 0);
    for (std::size_t p = 0; p < refs.size(); ++p) {
        const auto r = split_words(normalize_text(refs[p]));
        const auto h = split_words(normalize_text(hyps[p]));
        st.ref_len += r.size();
        st.hyp_len += h.size();
        for (std::size_t n = 1; n <= orders; ++n) {
            const NgramCounts hc = ngrams(h, n);
            const NgramCounts rc = ngrams(r, n);
            for (const auto& [gram, count] : hc) {
                auto it = rc.find(gram);
                st.matches[n - 1] += std::min(count, it == rc.end() ? std::size_t{0} : it->second);
                st.totals[n - 1] += count;
            }
        }
    }

    if (st.hyp_len == 0) return st;
    st.brevity_penalty =
        st.hyp_len < st.ref_len ? std::exp(1.0 - static_cast<double>(st.ref_len) / static_cast<double>(st.hyp_len)) : 1.0;

    // Orders longer than every hypothesis have no n-grams at all; they are
    // left out of the mean so identical corpora score 1 at any max_order.
    double log_sum = 0.0;
    std::size_t used = 0;
    for (std::size_t n = 0; n < orders; ++n) {
        if (st.totals[n] == 0) break;
        double num = static_cast<double>(st.matches[n]);
        double den = static_cast<double>(st.totals[n]);
        if (opts.smooth && n >= 1) {
            num += 1.0;
            den += 1.0;
        }
        if (num == 0.0) return st;  // score stays 0
        log_sum += std::log(num / den);
        ++used;
    }
    st.score = st.brevity_penalty * std::exp(log_sum / static_cast<double>(used));
    return st;
}

double bleu(std::span<const std::string> refs, std::span<const std::string> hyps, const BleuOptions& opts) {
    return bleu_stats(refs, hyps, opts).score;
}

double bleu1(std::span<const std::string> refs, std::span<const std::string> hyps) {
    return bleu(refs, hyps, BleuOptions{1, false});
}

}  // namespace dsu::metrics

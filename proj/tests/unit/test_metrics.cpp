// Copyright 2026 The dsu-toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <functional>

#include "dsu/error.hpp"
#include "dsu/metrics.hpp"
#include "dsu/rng.hpp"
#include "oracles/oracles.hpp"

using namespace dsu;
using namespace dsu::metrics;

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

std::string join(const std::vector<std::string>& words) {
    std::string s;
    for (const auto& w : words) {
        if (!s.empty()) s += ' ';
        s += w;
    }
    return s;
}

std::vector<std::string> random_words(Rng& rng, std::size_t max_len) {
    static const std::vector<std::string> lexicon{"a", "b", "c", "d", "e"};
    std::vector<std::string> out(rng.index(max_len + 1));
    for (auto& w : out) w = lexicon[rng.index(lexicon.size())];
    return out;
}

}  // namespace

TEST_CASE("normalization") {
    CHECK(normalize_text("Hello, World!") == "hello world");
    CHECK(normalize_text("  Don't   STOP  ") == "don't stop");
    CHECK(normalize_text("'quoted' text") == "quoted text");
    CHECK(normalize_text("rock'n'roll") == "rock'n'roll");
    CHECK(normalize_text("tab\tand\nnewline") == "tab and newline");
    CHECK(normalize_text("Grüße, Köln") == "grüße köln");
    CHECK(normalize_text("...").empty());
    for (const char* s : {"Hello, World!", "  a--b  ", "x'", "O'Neil's", "Ünïcode ok?"}) {
        const auto once = normalize_text(s);
        CHECK(normalize_text(once) == once);
    }
}

TEST_CASE("wer examples") {
    CHECK(wer("the cat sat", "the cat sat").wer == 0.0);
    const auto sub = wer("the cat sat", "the dog sat");
    CHECK(sub.substitutions == 1);
    CHECK(sub.wer == doctest::Approx(1.0 / 3.0));
    const auto del = wer("a b c d", "a d");
    CHECK(del.deletions == 2);
    CHECK(del.errors() == 2);
    const auto ins = wer("a", "x y z");
    CHECK(ins.errors() == 3);
    CHECK(ins.wer == 3.0);
    CHECK(wer("Hello, World", "hello world").wer == 0.0);
    CHECK(code_of([] { wer("", "x"); }) == ErrorCode::EmptyReference);
    CHECK(code_of([] { wer("?!", "x"); }) == ErrorCode::EmptyReference);
}

TEST_CASE("wer matches a plain edit distance") {
    Rng rng(1);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto r = random_words(rng, 12);
        const auto h = random_words(rng, 12);
        const auto a = align_words(r, h);
        REQUIRE(a.errors() == oracle::edit_distance(r, h));
        REQUIRE(a.ref_words == r.size());
        if (!r.empty()) {
            const auto w = wer(join(r), join(h));
            REQUIRE(w.errors() == a.errors());
            REQUIRE(w.wer == doctest::Approx(double(a.errors()) / double(r.size())));
        }
    }
}

TEST_CASE("corpus wer") {
    const std::vector<std::string> refs{"a b", "", "c d e"};
    const std::vector<std::string> hyps{"a b", "x", "c e"};
    const auto w = corpus_wer(refs, hyps);
    CHECK(w.ref_words == 5);
    CHECK(w.errors() == 2);
    CHECK(w.wer == doctest::Approx(0.4));
    const std::vector<std::string> empty{"", ""};
    CHECK(code_of([&] { corpus_wer(empty, empty); }) == ErrorCode::EmptyReference);
    CHECK(code_of([&] { corpus_wer(refs, empty); }) == ErrorCode::DimMismatch);
}

TEST_CASE("bleu-1 hand example") {
    const std::vector<std::string> refs{"the cat sat on the mat"};
    const std::vector<std::string> hyps{"the cat sat on"};
    CHECK(std::abs(bleu1(refs, hyps) - std::exp(-0.5)) < 1e-9);
    const auto st = bleu_stats(refs, hyps, {1, false});
    CHECK(st.matches[0] == 4);
    CHECK(st.totals[0] == 4);
    CHECK(st.ref_len == 6);
    CHECK(st.hyp_len == 4);
}

TEST_CASE("bleu clipping") {
    const std::vector<std::string> refs{"the cat"};
    const std::vector<std::string> hyps{"the the the"};
    const auto st = bleu_stats(refs, hyps, {1, false});
    CHECK(st.matches[0] == 1);
    CHECK(st.totals[0] == 3);
    CHECK(st.score == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("bleu bounds") {
    const std::vector<std::string> refs{"one two three four five", "six seven"};
    CHECK(bleu(refs, refs) == doctest::Approx(1.0).epsilon(1e-12));
    const std::vector<std::string> none{"alpha beta gamma delta", "omega"};
    CHECK(bleu(refs, none) == 0.0);
    const std::vector<std::string> blank{"", ""};
    CHECK(bleu(refs, blank) == 0.0);
    const std::vector<std::string> partial{"one two three four six", "six seven"};
    const double s = bleu(refs, partial);
    CHECK(s > 0.0);
    CHECK(s < 1.0);
    CHECK(bleu(refs, partial, {4, true}) >= s);
}

TEST_CASE("bleu ignores pair order") {
    Rng rng(2);
    std::vector<std::string> refs, hyps;
    for (int i = 0; i < 30; ++i) {
        refs.push_back(join(random_words(rng, 10)));
        hyps.push_back(join(random_words(rng, 10)));
    }
    const double base = bleu(refs, hyps);
    std::vector<std::size_t> perm(refs.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    rng.shuffle(std::span(perm));
    std::vector<std::string> pr, ph;
    for (auto i : perm) {
        pr.push_back(refs[i]);
        ph.push_back(hyps[i]);
    }
    CHECK(bleu(pr, ph) == doctest::Approx(base).epsilon(1e-12));
    CHECK(base >= 0.0);
    CHECK(base <= 1.0);
}

TEST_CASE("bleu argument errors") {
    const std::vector<std::string> one{"a"};
    const std::vector<std::string> two{"a", "b"};
    CHECK(code_of([&] { bleu(one, two); }) == ErrorCode::DimMismatch);
    CHECK(code_of([&] { bleu(std::vector<std::string>{}, std::vector<std::string>{}); }) == ErrorCode::EmptyInput);
    CHECK(code_of([&] { bleu(one, one, {0, false}); }) == ErrorCode::InvalidArgument);
}

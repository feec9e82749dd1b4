// Copyright 2026 The dsu-toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <functional>

#include "dsu/adapter.hpp"
#include "dsu/error.hpp"
#include "dsu/rng.hpp"

using namespace dsu;
using namespace dsu::adapter;

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

std::vector<std::uint32_t> random_units(Rng& rng, std::size_t n, std::size_t vocab) {
    std::vector<std::uint32_t> u(n);
    for (auto& x : u) x = static_cast<std::uint32_t>(rng.index(vocab));
    return u;
}

AdapterConfig small_config() {
    AdapterConfig cfg = AdapterConfig::tiny();
    cfg.vocab = 50;
    cfg.n_heads = 2;
    return cfg;
}

}  // namespace

TEST_CASE("output length examples") {
    CHECK(output_length(100) == 25);
    CHECK(output_length(1) == 1);
    CHECK(output_length(7) == 2);
    CHECK(output_length(4) == 1);
    CHECK(output_length(5) == 2);
}

TEST_CASE("forward output shape follows the length law") {
    const AdapterConfig cfg = small_config();
    const AdapterParams p = init_params(cfg, 1);
    Rng rng(2);
    for (std::size_t t = 1; t <= 64; ++t) {
        const auto y = forward(p, random_units(rng, t, cfg.vocab)).output;
        REQUIRE(static_cast<std::size_t>(y.rows()) == output_length(cfg, t));
        REQUIRE(static_cast<std::size_t>(y.cols()) == cfg.out_dim);
        REQUIRE(y.allFinite());
    }
}

TEST_CASE("presets") {
    const auto full = AdapterConfig::full_width();
    CHECK(full.out_dim == 4096);
    CHECK(full.model_dim == 512);
    CHECK(full.n_layers == 4);
    CHECK(full.n_heads == 8);
    CHECK(full.ffn_dim == 2048);
    CHECK(output_length(full, 100) == 25);
    CHECK(config_from_json(config_to_json(full)) == full);
    CHECK(code_of([] { config_from_json("{\"vocab\":10,\"width\":3}"); }) == ErrorCode::InvalidArgument);
    AdapterConfig bad;
    bad.model_dim = 30;
    bad.n_heads = 4;
    CHECK(code_of([&] { bad.validate(); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("layer norm and attention invariants") {
    const AdapterConfig cfg = small_config();
    AdapterParams p = init_params(cfg, 3);
    Rng rng(4);
    const auto fr = forward(p, random_units(rng, 40, cfg.vocab));
    auto check_norm = [](const LayerNormCache& c) {
        for (Eigen::Index r = 0; r < c.normalized.rows(); ++r) {
            const auto row = c.normalized.row(r);
            const double mean = row.mean();
            const double var = (row.array() - mean).square().mean();
            REQUIRE(std::abs(mean) < 1e-6);
            REQUIRE(std::abs(var - 1.0) < 1e-6);
        }
    };
    for (const auto& layer : fr.cache.layers) {
        check_norm(layer.ln_attn);
        check_norm(layer.ln_ffn);
        REQUIRE(layer.attn.probs.size() == cfg.n_heads);
        for (const auto& probs : layer.attn.probs) {
            for (Eigen::Index r = 0; r < probs.rows(); ++r) {
                REQUIRE(std::abs(probs.row(r).sum() - 1.0) < 1e-6);
                REQUIRE(probs.row(r).minCoeff() >= 0.0);
            }
        }
    }
    check_norm(fr.cache.final_norm);
}

TEST_CASE("zero weights reduce the adapter to its output bias") {
    const AdapterConfig cfg = small_config();
    AdapterParams p = zeros_like(cfg);
    for (Eigen::Index i = 0; i < p.out.bias.size(); ++i) p.out.bias[i] = 0.25 * static_cast<double>(i) - 1.0;
    const std::vector<std::uint32_t> units{1, 2, 3, 4, 5, 6, 7, 8, 9};
    const auto y = forward(p, units).output;
    for (Eigen::Index r = 0; r < y.rows(); ++r) CHECK((y.row(r).transpose() - p.out.bias).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("forward is pure") {
    const AdapterConfig cfg = small_config();
    const AdapterParams p = init_params(cfg, 5);
    const std::vector<std::uint32_t> units{3, 1, 4, 1, 5, 9, 2, 6};
    CHECK(forward(p, units).output == forward(p, units).output);
    CHECK(code_of([&] { forward(p, std::vector<std::uint32_t>{50}); }) == ErrorCode::UnknownUnit);
    CHECK(code_of([&] { forward(p, std::vector<std::uint32_t>{}); }) == ErrorCode::EmptyInput);
}

TEST_CASE("backward contracts") {
    const AdapterConfig cfg = small_config();
    const AdapterParams p = init_params(cfg, 6);
    const std::vector<std::uint32_t> units{1, 2, 3, 4, 5, 6};
    const auto fr = forward(p, units);
    AdapterParams g = backward(p, fr.cache, Matrix::Zero(fr.output.rows(), fr.output.cols()));
    for (const auto& t : g.tensors()) {
        for (std::size_t i = 0; i < t.size; ++i) REQUIRE(t.data[i] == 0.0);
    }
    CHECK(code_of([&] { backward(p, fr.cache, Matrix::Zero(fr.output.rows() + 1, fr.output.cols())); }) ==
          ErrorCode::StateMismatch);
    const AdapterParams other = init_params(AdapterConfig::tiny(), 6);
    CHECK(code_of([&] { backward(other, fr.cache, Matrix::Ones(fr.output.rows(), fr.output.cols())); }) ==
          ErrorCode::StateMismatch);
}

TEST_CASE("analytic gradients match central differences") {
    const auto report = grad_check(AdapterConfig::tiny(), 7);
    CHECK(report.checked == init_params(AdapterConfig::tiny(), 7).parameter_count());
    CHECK(report.max_rel_error < 1e-5);
    const auto coarse = grad_check(AdapterConfig::tiny(), 7, 1e-1);
    CHECK(coarse.max_rel_error > report.max_rel_error);
    CHECK(code_of([] { grad_check(AdapterConfig::tiny(), 7, 0.0); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("initialization") {
    const AdapterConfig cfg = small_config();
    AdapterParams a = init_params(cfg, 8);
    AdapterParams b = init_params(cfg, 8);
    AdapterParams c = init_params(cfg, 9);
    CHECK(write_checkpoint(a) == write_checkpoint(b));
    CHECK(a.embedding != c.embedding);
    for (const auto& t : a.tensors()) {
        for (std::size_t i = 0; i < t.size; ++i) {
            switch (t.kind) {
                case TensorKind::Weight: REQUIRE(std::abs(t.data[i]) <= t.init_limit); break;
                case TensorKind::Bias: REQUIRE(t.data[i] == 0.0); break;
                case TensorKind::Gain: REQUIRE(t.data[i] == 1.0); break;
            }
        }
    }
    const auto refs = a.tensors();
    CHECK(refs.front().name == "embedding");
    CHECK(refs.back().name == "out.bias");
}

TEST_CASE("toy fit drives the loss down") {
    AdapterConfig cfg = small_config();
    cfg.out_dim = 64;
    const auto data = make_toy_dataset(cfg, 3, 12, 10);
    const auto fit = toy_fit(init_params(cfg, 11), data, 300);
    REQUIRE(fit.losses.size() == 301);
    CHECK(fit.losses.back() < 0.1 * fit.losses.front());
    CHECK(fit.losses.back() == doctest::Approx(mse_loss(fit.params, data)).epsilon(1e-12));
    const auto again = toy_fit(init_params(cfg, 11), data, 300);
    CHECK(again.losses == fit.losses);
}

TEST_CASE("zero learning rate freezes the loss") {
    const AdapterConfig cfg = small_config();
    const auto data = make_toy_dataset(cfg, 2, 8, 12);
    AdamWOptions opts;
    opts.lr = 0.0;
    const auto fit = toy_fit(init_params(cfg, 13), data, 5, opts);
    for (double l : fit.losses) CHECK(l == fit.losses.front());
}

TEST_CASE("checkpoint round trip") {
    const AdapterConfig cfg = small_config();
    AdapterParams p = init_params(cfg, 14);
    const Bytes bytes = write_checkpoint(p);
    AdapterParams q = read_checkpoint(bytes);
    CHECK(q.config == cfg);
    CHECK(q.init_seed == 14);
    CHECK(write_checkpoint(q) == bytes);
    auto pr = p.tensors();
    auto qr = q.tensors();
    for (std::size_t ti = 0; ti < pr.size(); ++ti) {
        for (std::size_t i = 0; i < pr[ti].size; ++i) {
            REQUIRE(qr[ti].data[i] == static_cast<double>(static_cast<float>(pr[ti].data[i])));
        }
    }
}

TEST_CASE("checkpoint corruption") {
    const Bytes bytes = write_checkpoint(init_params(small_config(), 15));
    Bytes bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK(code_of([&] { read_checkpoint(bad_magic); }) == ErrorCode::CorruptFile);
    Bytes truncated(bytes.begin(), bytes.end() - 4);
    CHECK(code_of([&] { read_checkpoint(truncated); }) == ErrorCode::CorruptFile);
    Bytes extended = bytes;
    extended.push_back(0);
    CHECK(code_of([&] { read_checkpoint(extended); }) == ErrorCode::CorruptFile);
    Bytes nan = bytes;
    const float q = std::nanf("");
    std::memcpy(nan.data() + nan.size() - 4, &q, 4);
    CHECK(code_of([&] { read_checkpoint(nan); }) == ErrorCode::CorruptFile);
    CHECK(code_of([&] { read_checkpoint(Bytes{}); }) == ErrorCode::CorruptFile);
}

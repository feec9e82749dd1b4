// Copyright 2026 The dsu-toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dsu/binary.hpp"

namespace dsu::adapter {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Speech adapter geometry: embedding -> 2D conv stack over the (time x
/// embedding) grid -> per-frame projection -> pre-LN transformer encoder ->
/// linear to the LLM embedding width.
struct AdapterConfig {
    std::size_t vocab = 2000;
    std::size_t embed_dim = 32;
    std::vector<std::size_t> conv_channels = {16, 32};
    std::size_t conv_kernel = 3;
    std::size_t conv_stride_time = 2;
    std::size_t conv_stride_feature = 2;
    std::size_t conv_padding = 1;
    std::size_t model_dim = 32;
    std::size_t n_layers = 2;
    std::size_t n_heads = 4;
    std::size_t ffn_dim = 64;
    std::size_t out_dim = 4096;

    // 512-wide embedding and encoder, 4 layers x 8 heads, FFN 2048, 4096 out.
    static AdapterConfig full_width();
    // Gradient-check geometry: vocab 20, width 8, 1 head, 2 layers, FFN 16, out 12.
    static AdapterConfig tiny();

    void validate() const;
    std::size_t conv_out_features() const;
    std::size_t flattened_dim() const;

    bool operator==(const AdapterConfig&) const = default;
};

std::string config_to_json(const AdapterConfig& cfg);
AdapterConfig config_from_json(std::string_view text);

// Time-axis length after the conv stack: T -> floor((T + 2p - k) / s) + 1 per layer.
std::size_t output_length(const AdapterConfig& cfg, std::size_t t_in);
std::size_t output_length(std::size_t t_in);

struct LinearParams {
    Matrix weight;  // out x in
    Vector bias;
};

struct ConvParams {
    Matrix weight;  // out_channels x (in_channels * k * k)
    Vector bias;
};

struct LayerNormParams {
    Vector gain;
    Vector bias;
};

struct EncoderLayerParams {
    LayerNormParams ln_attn;
    LinearParams query, key, value, attn_out;
    LayerNormParams ln_ffn;
    LinearParams ffn_in, ffn_out;
};

enum class TensorKind { Weight, Bias, Gain };

struct ParamRef {
    std::string name;
    TensorKind kind;
    double* data;
    std::size_t size;
    double init_limit;  // uniform bound for weights; 0 otherwise
};

struct AdapterParams {
    AdapterConfig config;
    std::uint64_t init_seed = 0;

    Matrix embedding;  // vocab x embed_dim
    std::vector<ConvParams> conv;
    LinearParams proj;
    std::vector<EncoderLayerParams> layers;
    LayerNormParams final_norm;
    LinearParams out;

    // Tensors in declaration order; the order is the checkpoint layout.
    std::vector<ParamRef> tensors();
    std::size_t parameter_count() const;
};

// Calls fn(name, kind, tensor, init_limit) for every tensor in declaration
// order; `tensor` is a (const) Matrix or Vector matching Self's constness.
template <typename Self, typename Fn>
void visit_tensors(Self& p, Fn&& fn) {
    const auto& cfg = p.config;
    auto xavier = [](double fan_in, double fan_out) { return std::sqrt(6.0 / (fan_in + fan_out)); };
    auto linear = [&](const std::string& name, auto& lin, std::size_t in, std::size_t out) {
        fn(name + ".weight", TensorKind::Weight, lin.weight, xavier(double(in), double(out)));
        fn(name + ".bias", TensorKind::Bias, lin.bias, 0.0);
    };
    auto norm = [&](const std::string& name, auto& ln) {
        fn(name + ".gain", TensorKind::Gain, ln.gain, 0.0);
        fn(name + ".bias", TensorKind::Bias, ln.bias, 0.0);
    };

    fn(std::string("embedding"), TensorKind::Weight, p.embedding, xavier(double(cfg.vocab), double(cfg.embed_dim)));
    std::size_t in_c = 1;
    const double taps = double(cfg.conv_kernel * cfg.conv_kernel);
    for (std::size_t i = 0; i < p.conv.size(); ++i) {
        const std::size_t out_c = cfg.conv_channels[i];
        const std::string name = "conv." + std::to_string(i);
        fn(name + ".weight", TensorKind::Weight, p.conv[i].weight, xavier(double(in_c) * taps, double(out_c) * taps));
        fn(name + ".bias", TensorKind::Bias, p.conv[i].bias, 0.0);
        in_c = out_c;
    }
    linear("proj", p.proj, cfg.flattened_dim(), cfg.model_dim);
    for (std::size_t i = 0; i < p.layers.size(); ++i) {
        const std::string name = "layers." + std::to_string(i);
        auto& layer = p.layers[i];
        norm(name + ".ln_attn", layer.ln_attn);
        linear(name + ".query", layer.query, cfg.model_dim, cfg.model_dim);
        linear(name + ".key", layer.key, cfg.model_dim, cfg.model_dim);
        linear(name + ".value", layer.value, cfg.model_dim, cfg.model_dim);
        linear(name + ".attn_out", layer.attn_out, cfg.model_dim, cfg.model_dim);
        norm(name + ".ln_ffn", layer.ln_ffn);
        linear(name + ".ffn_in", layer.ffn_in, cfg.model_dim, cfg.ffn_dim);
        linear(name + ".ffn_out", layer.ffn_out, cfg.ffn_dim, cfg.model_dim);
    }
    norm("final_norm", p.final_norm);
    linear("out", p.out, cfg.model_dim, cfg.out_dim);
}

// Same shapes, all zeros (used for gradients and optimizer state).
AdapterParams zeros_like(const AdapterConfig& cfg);

// Xavier-uniform weights, zero biases, unit layer-norm gains.
AdapterParams init_params(const AdapterConfig& cfg, std::uint64_t seed);

inline constexpr double kLayerNormEps = 1e-12;

struct LayerNormCache {
    Matrix normalized;  // pre-gain x-hat
    Vector inv_std;
};

struct AttentionCache {
    Matrix q, k, v;
    std::vector<Matrix> probs;  // one T x T matrix per head
    Matrix context;             // concatenated heads
};

struct EncoderLayerCache {
    Matrix input;
    LayerNormCache ln_attn;
    Matrix ln_attn_out;
    AttentionCache attn;
    Matrix mid;
    LayerNormCache ln_ffn;
    Matrix ln_ffn_out;
    Matrix ffn_pre;
    Matrix ffn_act;
};

struct ConvCache {
    std::size_t in_h = 0, in_w = 0, out_h = 0, out_w = 0;
    Matrix cols;  // (in_c * k * k) x (out_h * out_w)
    Matrix pre;   // out_c x (out_h * out_w)
    Matrix act;
};

struct ForwardCache {
    AdapterConfig config;
    std::vector<std::uint32_t> units;
    std::vector<ConvCache> conv;
    Matrix flattened;
    std::vector<EncoderLayerCache> layers;
    Matrix encoder_out;
    LayerNormCache final_norm;
    Matrix final_norm_out;
};

struct ForwardResult {
    Matrix output;  // output_length(T) x out_dim
    ForwardCache cache;
};

ForwardResult forward(const AdapterParams& params, std::span<const std::uint32_t> units);

AdapterParams backward(const AdapterParams& params, const ForwardCache& cache, const Matrix& upstream);

double gelu(double x);
double gelu_grad(double x);
Matrix sinusoidal_positions(std::size_t frames, std::size_t dim);

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::string worst_tensor;
    std::size_t worst_index = 0;
    std::size_t checked = 0;
};

// Central differences of sum(outputs) against the analytic gradient for every
// parameter of `cfg` on T = `frames` random units. Error per scalar is
// |a - n| / max(1, |a|, |n|).
GradCheckReport grad_check(const AdapterConfig& cfg, std::uint64_t seed, double eps = 1e-5, std::size_t frames = 6);

struct AdamWOptions {
    double lr = 0.005;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double weight_decay = 0.01;
    double eps = 1e-8;
};

struct ToyExample {
    std::vector<std::uint32_t> units;
    Matrix target;  // output_length(T) x out_dim
};

std::vector<ToyExample> make_toy_dataset(const AdapterConfig& cfg, std::size_t examples, std::size_t frames,
                                         std::uint64_t seed);

struct FitResult {
    std::vector<double> losses;  // losses[0] at init, losses[i] after update i
    AdapterParams params;
};

// Full-batch MSE fit with AdamW.
FitResult toy_fit(AdapterParams params, std::span<const ToyExample> data, std::size_t steps,
                  const AdamWOptions& opts = {});

double mse_loss(const AdapterParams& params, std::span<const ToyExample> data);

Bytes write_checkpoint(const AdapterParams& params);
AdapterParams read_checkpoint(std::span<const std::uint8_t> bytes);
void write_checkpoint_file(const AdapterParams& params, const std::filesystem::path& path);
AdapterParams read_checkpoint_file(const std::filesystem::path& path);

}  // namespace dsu::adapter

// Copyright 2026 The dsu-toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <json.hpp>

#include <functional>
#include <map>
#include <type_traits>

#include "dsu/binary.hpp"
#include "dsu/cli.hpp"
#include "dsu/error.hpp"

namespace dsu::cli {

namespace {

using Json = nlohmann::json;

// A setter per key; anything not in the table is rejected.
using Setter = std::function<void(const Json&)>;

struct WrongType {};

void apply(const Json& obj, const std::string& section, const std::map<std::string, Setter>& keys) {
    if (!obj.is_object()) raise(ErrorCode::InvalidArgument, "config section '" + section + "' must be an object");
    for (const auto& [key, value] : obj.items()) {
        const auto it = keys.find(key);
        if (it == keys.end()) raise(ErrorCode::InvalidArgument, "unknown config key '" + section + "." + key + "'");
        try {
            it->second(value);
        } catch (const Json::exception&) {
            raise(ErrorCode::InvalidArgument, "config key '" + section + "." + key + "' has the wrong type");
        } catch (const WrongType&) {
            raise(ErrorCode::InvalidArgument, "config key '" + section + "." + key + "' has the wrong type");
        }
    }
}

template <typename T>
Setter set(T& field) {
    return [&field](const Json& v) {
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) throw WrongType{};
        } else if constexpr (std::is_unsigned_v<T>) {
            if (!v.is_number_unsigned()) throw WrongType{};
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) throw WrongType{};
        } else if constexpr (std::is_same_v<T, int>) {
            if (!v.is_number_integer()) throw WrongType{};
        }
        field = v.get<T>();
    };
}

}  // namespace

PipelineConfig parse_config(std::string_view json_text) {
    Json root;
    try {
        root = Json::parse(json_text);
    } catch (const Json::parse_error& e) {
        raise(ErrorCode::InvalidArgument, std::string("config is not valid JSON: ") + e.what());
    }

    PipelineConfig cfg;
    auto& f = cfg.features;
    auto& a = cfg.adapter;
    auto& m = a.model;
    const std::map<std::string, Setter> features_keys = {
        {"preemphasis", set(f.preemphasis)},   {"frame_len_ms", set(f.frame_len_ms)}, {"hop_ms", set(f.hop_ms)},
        {"fft_size", set(f.fft_size)},         {"n_mels", set(f.n_mels)},             {"mel_low_hz", set(f.mel_low_hz)},
        {"mel_high_hz", set(f.mel_high_hz)},   {"n_ceps", set(f.n_ceps)},             {"delta_window", set(f.delta_window)},
        {"log_floor", set(f.log_floor)},
    };
    const std::map<std::string, Setter> vq_keys = {
        {"k", set(cfg.vq.k)},
        {"max_iters", set(cfg.vq.max_iters)},
        {"rel_tol", set(cfg.vq.rel_tol)},
        {"sample_cap",
         [&](const Json& v) {
             if (v.is_null()) cfg.vq.sample_cap.reset();
             else if (v.is_number_unsigned()) cfg.vq.sample_cap = v.get<std::size_t>();
             else throw WrongType{};
         }},
    };
    const std::map<std::string, Setter> reduce_keys = {
        {"subword_vocab", set(cfg.reduce.subword_vocab)},
        {"blank", set(cfg.reduce.blank)},
    };
    const std::map<std::string, Setter> prompts_keys = {
        {"task", set(cfg.prompts.task)},
        {"language", set(cfg.prompts.language)},
    };
    const std::map<std::string, Setter> adapter_keys = {
        {"vocab", set(m.vocab)},
        {"embed_dim", set(m.embed_dim)},
        {"conv_channels", set(m.conv_channels)},
        {"conv_kernel", set(m.conv_kernel)},
        {"conv_stride_time", set(m.conv_stride_time)},
        {"conv_stride_feature", set(m.conv_stride_feature)},
        {"conv_padding", set(m.conv_padding)},
        {"model_dim", set(m.model_dim)},
        {"n_layers", set(m.n_layers)},
        {"n_heads", set(m.n_heads)},
        {"ffn_dim", set(m.ffn_dim)},
        {"out_dim", set(m.out_dim)},
        {"lr", set(a.optimizer.lr)},
        {"beta1", set(a.optimizer.beta1)},
        {"beta2", set(a.optimizer.beta2)},
        {"weight_decay", set(a.optimizer.weight_decay)},
        {"adam_eps", set(a.optimizer.eps)},
        {"steps", set(a.steps)},
        {"examples", set(a.examples)},
        {"frames", set(a.frames)},
    };
    const std::map<std::string, Setter> metrics_keys = {
        {"bleu_max_order", set(cfg.metrics.max_order)},
        {"bleu_smooth", set(cfg.metrics.smooth)},
    };

    apply(root, "config",
          {
              {"seed", set(cfg.seed)},
              {"features", [&](const Json& v) { apply(v, "features", features_keys); }},
              {"vq", [&](const Json& v) { apply(v, "vq", vq_keys); }},
              {"reduce", [&](const Json& v) { apply(v, "reduce", reduce_keys); }},
              {"prompts", [&](const Json& v) { apply(v, "prompts", prompts_keys); }},
              {"adapter", [&](const Json& v) { apply(v, "adapter", adapter_keys); }},
              {"metrics", [&](const Json& v) { apply(v, "metrics", metrics_keys); }},
          });
    cfg.adapter.model.validate();
    require(cfg.metrics.max_order >= 1, ErrorCode::InvalidArgument, "metrics.bleu_max_order must be at least 1");
    return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    const std::string text = read_text_file(path);
    try {
        return parse_config(text);
    } catch (const Error& e) {
        throw e.with_context(path.string());
    }
}

std::string dump_config(const PipelineConfig& cfg) {
    const auto& f = cfg.features;
    const auto& a = cfg.adapter;
    Json adapter = Json::parse(adapter::config_to_json(a.model));
    adapter["lr"] = a.optimizer.lr;
    adapter["beta1"] = a.optimizer.beta1;
    adapter["beta2"] = a.optimizer.beta2;
    adapter["weight_decay"] = a.optimizer.weight_decay;
    adapter["adam_eps"] = a.optimizer.eps;
    adapter["steps"] = a.steps;
    adapter["examples"] = a.examples;
    adapter["frames"] = a.frames;
    Json root{
        {"seed", cfg.seed},
        {"features",
         {{"preemphasis", f.preemphasis},
          {"frame_len_ms", f.frame_len_ms},
          {"hop_ms", f.hop_ms},
          {"fft_size", f.fft_size},
          {"n_mels", f.n_mels},
          {"mel_low_hz", f.mel_low_hz},
          {"mel_high_hz", f.mel_high_hz},
          {"n_ceps", f.n_ceps},
          {"delta_window", f.delta_window},
          {"log_floor", f.log_floor}}},
        {"vq",
         {{"k", cfg.vq.k},
          {"max_iters", cfg.vq.max_iters},
          {"rel_tol", cfg.vq.rel_tol},
          {"sample_cap", cfg.vq.sample_cap ? Json(*cfg.vq.sample_cap) : Json(nullptr)}}},
        {"reduce", {{"subword_vocab", cfg.reduce.subword_vocab}, {"blank", cfg.reduce.blank}}},
        {"prompts", {{"task", cfg.prompts.task}, {"language", cfg.prompts.language}}},
        {"adapter", adapter},
        {"metrics", {{"bleu_max_order", cfg.metrics.max_order}, {"bleu_smooth", cfg.metrics.smooth}}},
    };
    return root.dump(2);
}

}  // namespace dsu::cli

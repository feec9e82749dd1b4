// Copyright 2026 The dsu-toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "dsu/adapter.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dsu/error.hpp"
#include "dsu/rng.hpp"

namespace dsu::adapter {

namespace {

using Json = nlohmann::json;

constexpr std::uint32_t kCheckpointVersion = 1;

std::size_t conv_out(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad) {
    return (in + 2 * pad - kernel) / stride + 1;
}

Matrix linear_forward(const Matrix& x, const LinearParams& p) {
    Matrix y(x.rows(), p.weight.rows());
    y.noalias() = x * p.weight.transpose();
    y.rowwise() += p.bias.transpose();
    return y;
}

// Accumulates parameter gradients into g and returns dL/dx.
Matrix linear_backward(const Matrix& x, const LinearParams& p, const Matrix& dy, LinearParams& g) {
    g.weight.noalias() += dy.transpose() * x;
    g.bias += dy.colwise().sum().transpose();
    Matrix dx(dy.rows(), p.weight.cols());
    dx.noalias() = dy * p.weight;
    return dx;
}

Matrix layer_norm_forward(const Matrix& x, const LayerNormParams& p, LayerNormCache& cache) {
    const auto d = static_cast<double>(x.cols());
    cache.normalized.resize(x.rows(), x.cols());
    cache.inv_std.resize(x.rows());
    Matrix y(x.rows(), x.cols());
    for (Eigen::Index t = 0; t < x.rows(); ++t) {
        const double mean = x.row(t).sum() / d;
        const double var = (x.row(t).array() - mean).square().sum() / d;
        const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
        cache.inv_std(t) = inv;
        cache.normalized.row(t) = (x.row(t).array() - mean) * inv;
        y.row(t) = cache.normalized.row(t).array() * p.gain.transpose().array() + p.bias.transpose().array();
    }
    return y;
}

Matrix layer_norm_backward(const LayerNormCache& cache, const LayerNormParams& p, const Matrix& dy,
                           LayerNormParams& g) {
    const auto d = static_cast<double>(dy.cols());
    g.gain += (dy.array() * cache.normalized.array()).colwise().sum().transpose().matrix();
    g.bias += dy.colwise().sum().transpose();
    Matrix dx(dy.rows(), dy.cols());
    for (Eigen::Index t = 0; t < dy.rows(); ++t) {
        const Eigen::RowVectorXd gx = dy.row(t).array() * p.gain.transpose().array();
        const double mean_g = gx.sum() / d;
        const double mean_gx = (gx.array() * cache.normalized.row(t).array()).sum() / d;
        dx.row(t) = cache.inv_std(t) * (gx.array() - mean_g - cache.normalized.row(t).array() * mean_gx);
    }
    return dx;
}

Matrix apply_gelu(const Matrix& x) { return x.unaryExpr([](double v) { return gelu(v); }); }

Matrix gelu_backward(const Matrix& pre, const Matrix& dy) {
    return dy.array() * pre.unaryExpr([](double v) { return gelu_grad(v); }).array();
}

Matrix attention_forward(const Matrix& x, const EncoderLayerParams& p, std::size_t heads, AttentionCache& cache) {
    const Eigen::Index frames = x.rows();
    const auto head_dim = static_cast<Eigen::Index>(static_cast<std::size_t>(x.cols()) / heads);
    const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
    cache.q = linear_forward(x, p.query);
    cache.k = linear_forward(x, p.key);
    cache.v = linear_forward(x, p.value);
    cache.context.resize(frames, x.cols());
    cache.probs.assign(heads, Matrix());
    for (std::size_t h = 0; h < heads; ++h) {
        const Eigen::Index c0 = static_cast<Eigen::Index>(h) * head_dim;
        Matrix scores = (cache.q.middleCols(c0, head_dim) * cache.k.middleCols(c0, head_dim).transpose()) * scale;
        for (Eigen::Index r = 0; r < frames; ++r) {
            const double mx = scores.row(r).maxCoeff();
            scores.row(r) = (scores.row(r).array() - mx).exp();
            scores.row(r) /= scores.row(r).sum();
        }
        cache.context.middleCols(c0, head_dim).noalias() = scores * cache.v.middleCols(c0, head_dim);
        cache.probs[h] = std::move(scores);
    }
    return linear_forward(cache.context, p.attn_out);
}

Matrix attention_backward(const Matrix& x, const EncoderLayerParams& p, std::size_t heads,
                          const AttentionCache& cache, const Matrix& dy, EncoderLayerParams& g) {
    const auto head_dim = static_cast<Eigen::Index>(static_cast<std::size_t>(x.cols()) / heads);
    const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
    const Matrix dcontext = linear_backward(cache.context, p.attn_out, dy, g.attn_out);

    Matrix dq = Matrix::Zero(x.rows(), x.cols());
    Matrix dk = Matrix::Zero(x.rows(), x.cols());
    Matrix dv = Matrix::Zero(x.rows(), x.cols());
    for (std::size_t h = 0; h < heads; ++h) {
        const Eigen::Index c0 = static_cast<Eigen::Index>(h) * head_dim;
        const Matrix& probs = cache.probs[h];
        const auto dctx = dcontext.middleCols(c0, head_dim);
        const Matrix dprobs = dctx * cache.v.middleCols(c0, head_dim).transpose();
        dv.middleCols(c0, head_dim).noalias() = probs.transpose() * dctx;
        // softmax Jacobian, row by row
        const Eigen::VectorXd row_dot = (dprobs.array() * probs.array()).rowwise().sum();
        const Matrix dscores = probs.array() * (dprobs.colwise() - row_dot).array();
        dq.middleCols(c0, head_dim).noalias() = scale * dscores * cache.k.middleCols(c0, head_dim);
        dk.middleCols(c0, head_dim).noalias() = scale * dscores.transpose() * cache.q.middleCols(c0, head_dim);
    }
    Matrix dx = linear_backward(x, p.query, dq, g.query);
    dx += linear_backward(x, p.key, dk, g.key);
    dx += linear_backward(x, p.value, dv, g.value);
    return dx;
}

// Unfolds a (channels x h*w) image into (channels*k*k) x (out_h*out_w) patches.
Matrix im2col(const Matrix& img, std::size_t h, std::size_t w, const AdapterConfig& cfg, std::size_t out_h,
              std::size_t out_w) {
    const std::size_t k = cfg.conv_kernel;
    const auto channels = static_cast<std::size_t>(img.rows());
    Matrix cols = Matrix::Zero(static_cast<Eigen::Index>(channels * k * k), static_cast<Eigen::Index>(out_h * out_w));
    for (std::size_t c = 0; c < channels; ++c) {
        for (std::size_t ki = 0; ki < k; ++ki) {
            for (std::size_t kj = 0; kj < k; ++kj) {
                const auto row = static_cast<Eigen::Index>((c * k + ki) * k + kj);
                for (std::size_t oh = 0; oh < out_h; ++oh) {
                    const auto ih = static_cast<std::ptrdiff_t>(oh * cfg.conv_stride_time + ki) -
                                    static_cast<std::ptrdiff_t>(cfg.conv_padding);
                    if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(h)) continue;
                    for (std::size_t ow = 0; ow < out_w; ++ow) {
                        const auto iw = static_cast<std::ptrdiff_t>(ow * cfg.conv_stride_feature + kj) -
                                        static_cast<std::ptrdiff_t>(cfg.conv_padding);
                        if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(w)) continue;
                        cols(row, static_cast<Eigen::Index>(oh * out_w + ow)) =
                            img(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(ih) * static_cast<Eigen::Index>(w) + iw);
                    }
                }
            }
        }
    }
    return cols;
}

Matrix col2im(const Matrix& dcols, std::size_t channels, std::size_t h, std::size_t w, const AdapterConfig& cfg,
              std::size_t out_h, std::size_t out_w) {
    const std::size_t k = cfg.conv_kernel;
    Matrix img = Matrix::Zero(static_cast<Eigen::Index>(channels), static_cast<Eigen::Index>(h * w));
    for (std::size_t c = 0; c < channels; ++c) {
        for (std::size_t ki = 0; ki < k; ++ki) {
            for (std::size_t kj = 0; kj < k; ++kj) {
                const auto row = static_cast<Eigen::Index>((c * k + ki) * k + kj);
                for (std::size_t oh = 0; oh < out_h; ++oh) {
                    const auto ih = static_cast<std::ptrdiff_t>(oh * cfg.conv_stride_time + ki) -
                                    static_cast<std::ptrdiff_t>(cfg.conv_padding);
                    if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(h)) continue;
                    for (std::size_t ow = 0; ow < out_w; ++ow) {
                        const auto iw = static_cast<std::ptrdiff_t>(ow * cfg.conv_stride_feature + kj) -
                                        static_cast<std::ptrdiff_t>(cfg.conv_padding);
                        if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(w)) continue;
                        img(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(ih) * static_cast<Eigen::Index>(w) + iw) +=
                            dcols(row, static_cast<Eigen::Index>(oh * out_w + ow));
                    }
                }
            }
        }
    }
    return img;
}

void shape_linear(LinearParams& p, std::size_t in, std::size_t out) {
    p.weight = Matrix::Zero(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
    p.bias = Vector::Zero(static_cast<Eigen::Index>(out));
}

void shape_norm(LayerNormParams& p, std::size_t dim) {
    p.gain = Vector::Zero(static_cast<Eigen::Index>(dim));
    p.bias = Vector::Zero(static_cast<Eigen::Index>(dim));
}

Json config_json(const AdapterConfig& cfg) {
    return Json{{"vocab", cfg.vocab},
                {"embed_dim", cfg.embed_dim},
                {"conv_channels", cfg.conv_channels},
                {"conv_kernel", cfg.conv_kernel},
                {"conv_stride_time", cfg.conv_stride_time},
                {"conv_stride_feature", cfg.conv_stride_feature},
                {"conv_padding", cfg.conv_padding},
                {"model_dim", cfg.model_dim},
                {"n_layers", cfg.n_layers},
                {"n_heads", cfg.n_heads},
                {"ffn_dim", cfg.ffn_dim},
                {"out_dim", cfg.out_dim}};
}

AdapterConfig config_from(const Json& j) {
    if (!j.is_object()) raise(ErrorCode::CorruptFile, "adapter config must be a JSON object");
    AdapterConfig cfg;
    for (const auto& [key, value] : j.items()) {
        auto size = [&]() -> std::size_t {
            if (!value.is_number_unsigned()) raise(ErrorCode::CorruptFile, "adapter." + key + " must be a non-negative integer");
            return value.get<std::size_t>();
        };
        if (key == "vocab") cfg.vocab = size();
        else if (key == "embed_dim") cfg.embed_dim = size();
        else if (key == "conv_channels") {
            if (!value.is_array()) raise(ErrorCode::CorruptFile, "adapter.conv_channels must be an array");
            cfg.conv_channels = value.get<std::vector<std::size_t>>();
        }
        else if (key == "conv_kernel") cfg.conv_kernel = size();
        else if (key == "conv_stride_time") cfg.conv_stride_time = size();
        else if (key == "conv_stride_feature") cfg.conv_stride_feature = size();
        else if (key == "conv_padding") cfg.conv_padding = size();
        else if (key == "model_dim") cfg.model_dim = size();
        else if (key == "n_layers") cfg.n_layers = size();
        else if (key == "n_heads") cfg.n_heads = size();
        else if (key == "ffn_dim") cfg.ffn_dim = size();
        else if (key == "out_dim") cfg.out_dim = size();
        else raise(ErrorCode::InvalidArgument, "unknown adapter key '" + key + "'");
    }
    cfg.validate();
    return cfg;
}

}  // namespace

AdapterConfig AdapterConfig::full_width() {
    AdapterConfig cfg;
    cfg.embed_dim = 512;
    cfg.model_dim = 512;
    cfg.n_layers = 4;
    cfg.n_heads = 8;
    cfg.ffn_dim = 2048;
    cfg.out_dim = 4096;
    return cfg;
}

AdapterConfig AdapterConfig::tiny() {
    AdapterConfig cfg;
    cfg.vocab = 20;
    cfg.embed_dim = 8;
    cfg.model_dim = 8;
    cfg.n_layers = 2;
    cfg.n_heads = 1;
    cfg.ffn_dim = 16;
    cfg.out_dim = 12;
    return cfg;
}

void AdapterConfig::validate() const {
    require(vocab >= 1 && embed_dim >= 1 && model_dim >= 1 && ffn_dim >= 1 && out_dim >= 1, ErrorCode::InvalidArgument,
            "adapter dimensions must be positive");
    require(n_heads >= 1 && model_dim % n_heads == 0, ErrorCode::InvalidArgument,
            "model_dim must be divisible by n_heads");
    require(!conv_channels.empty(), ErrorCode::InvalidArgument, "adapter needs at least one conv layer");
    require(std::ranges::all_of(conv_channels, [](std::size_t c) { return c >= 1; }), ErrorCode::InvalidArgument,
            "conv channel counts must be positive");
    require(conv_kernel >= 1 && conv_stride_time >= 1 && conv_stride_feature >= 1, ErrorCode::InvalidArgument,
            "conv kernel and strides must be positive");
    require(1 + 2 * conv_padding >= conv_kernel, ErrorCode::InvalidArgument,
            "conv padding too small for a length-1 input");
}

std::size_t AdapterConfig::conv_out_features() const {
    std::size_t w = embed_dim;
    for (std::size_t i = 0; i < conv_channels.size(); ++i) w = conv_out(w, conv_kernel, conv_stride_feature, conv_padding);
    return w;
}

std::size_t AdapterConfig::flattened_dim() const { return conv_channels.back() * conv_out_features(); }

std::string config_to_json(const AdapterConfig& cfg) { return config_json(cfg).dump(); }

AdapterConfig config_from_json(std::string_view text) {
    try {
        return config_from(Json::parse(text));
    } catch (const Json::exception& e) {
        raise(ErrorCode::CorruptFile, std::string("adapter config: ") + e.what());
    }
}

std::size_t output_length(const AdapterConfig& cfg, std::size_t t_in) {
    require(t_in >= 1, ErrorCode::EmptyInput, "adapter input must have at least one unit");
    std::size_t t = t_in;
    for (std::size_t i = 0; i < cfg.conv_channels.size(); ++i) t = conv_out(t, cfg.conv_kernel, cfg.conv_stride_time, cfg.conv_padding);
    return t;
}

std::size_t output_length(std::size_t t_in) { return output_length(AdapterConfig{}, t_in); }

std::vector<ParamRef> AdapterParams::tensors() {
    std::vector<ParamRef> out;
    visit_tensors(*this, [&](const std::string& name, TensorKind kind, auto& t, double limit) {
        out.push_back({name, kind, t.data(), static_cast<std::size_t>(t.size()), limit});
    });
    return out;
}

std::size_t AdapterParams::parameter_count() const {
    std::size_t n = 0;
    visit_tensors(*this, [&](const std::string&, TensorKind, const auto& t, double) { n += static_cast<std::size_t>(t.size()); });
    return n;
}

AdapterParams zeros_like(const AdapterConfig& cfg) {
    cfg.validate();
    AdapterParams p;
    p.config = cfg;
    p.embedding = Matrix::Zero(static_cast<Eigen::Index>(cfg.vocab), static_cast<Eigen::Index>(cfg.embed_dim));
    std::size_t in_c = 1;
    for (std::size_t c : cfg.conv_channels) {
        ConvParams conv;
        conv.weight = Matrix::Zero(static_cast<Eigen::Index>(c),
                                   static_cast<Eigen::Index>(in_c * cfg.conv_kernel * cfg.conv_kernel));
        conv.bias = Vector::Zero(static_cast<Eigen::Index>(c));
        p.conv.push_back(std::move(conv));
        in_c = c;
    }
    shape_linear(p.proj, cfg.flattened_dim(), cfg.model_dim);
    p.layers.resize(cfg.n_layers);
    for (auto& layer : p.layers) {
        shape_norm(layer.ln_attn, cfg.model_dim);
        shape_linear(layer.query, cfg.model_dim, cfg.model_dim);
        shape_linear(layer.key, cfg.model_dim, cfg.model_dim);
        shape_linear(layer.value, cfg.model_dim, cfg.model_dim);
        shape_linear(layer.attn_out, cfg.model_dim, cfg.model_dim);
        shape_norm(layer.ln_ffn, cfg.model_dim);
        shape_linear(layer.ffn_in, cfg.model_dim, cfg.ffn_dim);
        shape_linear(layer.ffn_out, cfg.ffn_dim, cfg.model_dim);
    }
    shape_norm(p.final_norm, cfg.model_dim);
    shape_linear(p.out, cfg.model_dim, cfg.out_dim);
    return p;
}

AdapterParams init_params(const AdapterConfig& cfg, std::uint64_t seed) {
    AdapterParams p = zeros_like(cfg);
    p.init_seed = seed;
    Rng rng(seed);
    for (auto& t : p.tensors()) {
        if (t.kind == TensorKind::Weight) {
            for (std::size_t i = 0; i < t.size; ++i) t.data[i] = rng.uniform(-t.init_limit, t.init_limit);
        } else if (t.kind == TensorKind::Gain) {
            std::fill(t.data, t.data + t.size, 1.0);
        }
    }
    return p;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_grad(double x) {
    const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    return cdf + x * pdf;
}

Matrix sinusoidal_positions(std::size_t frames, std::size_t dim) {
    Matrix pe(static_cast<Eigen::Index>(frames), static_cast<Eigen::Index>(dim));
    for (std::size_t t = 0; t < frames; ++t) {
        for (std::size_t i = 0; i < dim; ++i) {
            const double rate = std::pow(10000.0, -static_cast<double>(i - i % 2) / static_cast<double>(dim));
            const double angle = static_cast<double>(t) * rate;
            pe(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i)) = i % 2 == 0 ? std::sin(angle) : std::cos(angle);
        }
    }
    return pe;
}

ForwardResult forward(const AdapterParams& params, std::span<const std::uint32_t> units) {
    const AdapterConfig& cfg = params.config;
    require(!units.empty(), ErrorCode::EmptyInput, "adapter input must have at least one unit");
    for (std::uint32_t u : units) {
        if (u >= cfg.vocab) {
            raise(ErrorCode::UnknownUnit, "unit " + std::to_string(u) + " outside adapter vocab " + std::to_string(cfg.vocab));
        }
    }

    ForwardResult res;
    ForwardCache& cache = res.cache;
    cache.config = cfg;
    cache.units.assign(units.begin(), units.end());

    // (time x embed) grid as a one-channel image
    std::size_t h = units.size();
    std::size_t w = cfg.embed_dim;
    Matrix img(1, static_cast<Eigen::Index>(h * w));
    for (std::size_t t = 0; t < h; ++t) {
        img.block(0, static_cast<Eigen::Index>(t * w), 1, static_cast<Eigen::Index>(w)) = params.embedding.row(units[t]);
    }

    for (const auto& conv : params.conv) {
        ConvCache cc;
        cc.in_h = h;
        cc.in_w = w;
        cc.out_h = conv_out(h, cfg.conv_kernel, cfg.conv_stride_time, cfg.conv_padding);
        cc.out_w = conv_out(w, cfg.conv_kernel, cfg.conv_stride_feature, cfg.conv_padding);
        cc.cols = im2col(img, h, w, cfg, cc.out_h, cc.out_w);
        cc.pre.noalias() = conv.weight * cc.cols;
        cc.pre.colwise() += conv.bias;
        cc.act = apply_gelu(cc.pre);
        img = cc.act;
        h = cc.out_h;
        w = cc.out_w;
        cache.conv.push_back(std::move(cc));
    }

    const auto channels = static_cast<std::size_t>(img.rows());
    cache.flattened.resize(static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(channels * w));
    for (std::size_t t = 0; t < h; ++t) {
        for (std::size_t c = 0; c < channels; ++c) {
            cache.flattened.block(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(c * w), 1, static_cast<Eigen::Index>(w)) =
                img.block(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(t * w), 1, static_cast<Eigen::Index>(w));
        }
    }

    Matrix x = linear_forward(cache.flattened, params.proj) + sinusoidal_positions(h, cfg.model_dim);
    for (const auto& layer : params.layers) {
        EncoderLayerCache lc;
        lc.input = x;
        lc.ln_attn_out = layer_norm_forward(x, layer.ln_attn, lc.ln_attn);
        lc.mid = x + attention_forward(lc.ln_attn_out, layer, cfg.n_heads, lc.attn);
        lc.ln_ffn_out = layer_norm_forward(lc.mid, layer.ln_ffn, lc.ln_ffn);
        lc.ffn_pre = linear_forward(lc.ln_ffn_out, layer.ffn_in);
        lc.ffn_act = apply_gelu(lc.ffn_pre);
        x = lc.mid + linear_forward(lc.ffn_act, layer.ffn_out);
        cache.layers.push_back(std::move(lc));
    }
    cache.encoder_out = x;
    cache.final_norm_out = layer_norm_forward(x, params.final_norm, cache.final_norm);
    res.output = linear_forward(cache.final_norm_out, params.out);
    return res;
}

AdapterParams backward(const AdapterParams& params, const ForwardCache& cache, const Matrix& upstream) {
    const AdapterConfig& cfg = params.config;
    if (!(cache.config == cfg) || cache.layers.size() != params.layers.size() || cache.conv.size() != params.conv.size() ||
        cache.units.empty()) {
        raise(ErrorCode::StateMismatch, "forward cache was produced by a different adapter configuration");
    }
    if (upstream.rows() != cache.final_norm_out.rows() || upstream.cols() != static_cast<Eigen::Index>(cfg.out_dim)) {
        raise(ErrorCode::StateMismatch, "upstream gradient shape does not match the cached forward pass");
    }

    AdapterParams g = zeros_like(cfg);
    Matrix dx = linear_backward(cache.final_norm_out, params.out, upstream, g.out);
    dx = layer_norm_backward(cache.final_norm, params.final_norm, dx, g.final_norm);

    for (std::size_t li = params.layers.size(); li-- > 0;) {
        const auto& layer = params.layers[li];
        const auto& lc = cache.layers[li];
        auto& gl = g.layers[li];
        // x_out = mid + ffn(ln_ffn(mid))
        Matrix dact = linear_backward(lc.ffn_act, layer.ffn_out, dx, gl.ffn_out);
        Matrix dpre = gelu_backward(lc.ffn_pre, dact);
        Matrix dln = linear_backward(lc.ln_ffn_out, layer.ffn_in, dpre, gl.ffn_in);
        Matrix dmid = dx + layer_norm_backward(lc.ln_ffn, layer.ln_ffn, dln, gl.ln_ffn);
        // mid = x_in + attn(ln_attn(x_in))
        Matrix dattn_in = attention_backward(lc.ln_attn_out, layer, cfg.n_heads, lc.attn, dmid, gl);
        dx = dmid + layer_norm_backward(lc.ln_attn, layer.ln_attn, dattn_in, gl.ln_attn);
    }

    Matrix dflat = linear_backward(cache.flattened, params.proj, dx, g.proj);

    const ConvCache& last = cache.conv.back();
    const std::size_t channels = cfg.conv_channels.back();
    Matrix dimg(static_cast<Eigen::Index>(channels), static_cast<Eigen::Index>(last.out_h * last.out_w));
    for (std::size_t t = 0; t < last.out_h; ++t) {
        for (std::size_t c = 0; c < channels; ++c) {
            dimg.block(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(t * last.out_w), 1, static_cast<Eigen::Index>(last.out_w)) =
                dflat.block(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(c * last.out_w), 1, static_cast<Eigen::Index>(last.out_w));
        }
    }

    for (std::size_t ci = params.conv.size(); ci-- > 0;) {
        const ConvCache& cc = cache.conv[ci];
        const Matrix dpre = gelu_backward(cc.pre, dimg);
        g.conv[ci].weight.noalias() += dpre * cc.cols.transpose();
        g.conv[ci].bias += dpre.rowwise().sum();
        const Matrix dcols = params.conv[ci].weight.transpose() * dpre;
        const std::size_t in_c = ci == 0 ? 1 : cfg.conv_channels[ci - 1];
        dimg = col2im(dcols, in_c, cc.in_h, cc.in_w, cfg, cc.out_h, cc.out_w);
    }

    const std::size_t w = cfg.embed_dim;
    for (std::size_t t = 0; t < cache.units.size(); ++t) {
        g.embedding.row(cache.units[t]) += dimg.block(0, static_cast<Eigen::Index>(t * w), 1, static_cast<Eigen::Index>(w));
    }
    return g;
}

GradCheckReport grad_check(const AdapterConfig& cfg, std::uint64_t seed, double eps, std::size_t frames) {
    require(eps > 0.0, ErrorCode::InvalidArgument, "finite-difference step must be positive");
    AdapterParams params = init_params(cfg, seed);
    Rng rng(derive_seed(seed, "adapter.gradcheck"));
    // Move biases and gains off their init values so every path carries signal.
    for (auto& t : params.tensors()) {
        if (t.kind != TensorKind::Weight) {
            for (std::size_t i = 0; i < t.size; ++i) t.data[i] += rng.uniform(-0.1, 0.1);
        }
    }
    std::vector<std::uint32_t> units(frames);
    for (auto& u : units) u = static_cast<std::uint32_t>(rng.index(cfg.vocab));

    const ForwardResult base = forward(params, units);
    const Matrix ones = Matrix::Ones(base.output.rows(), base.output.cols());
    AdapterParams grads = backward(params, base.cache, ones);
    const auto grad_refs = grads.tensors();

    GradCheckReport report;
    auto param_refs = params.tensors();
    for (std::size_t ti = 0; ti < param_refs.size(); ++ti) {
        const ParamRef& t = param_refs[ti];
        for (std::size_t i = 0; i < t.size; ++i) {
            const double original = t.data[i];
            t.data[i] = original + eps;
            const double plus = forward(params, units).output.sum();
            t.data[i] = original - eps;
            const double minus = forward(params, units).output.sum();
            t.data[i] = original;

            const double numeric = (plus - minus) / (2.0 * eps);
            const double analytic = grad_refs[ti].data[i];
            const double err = std::abs(analytic - numeric) / std::max({1.0, std::abs(analytic), std::abs(numeric)});
            if (err > report.max_rel_error || report.checked == 0) {
                report.max_rel_error = err;
                report.worst_tensor = t.name;
                report.worst_index = i;
            }
            ++report.checked;
        }
    }
    return report;
}

std::vector<ToyExample> make_toy_dataset(const AdapterConfig& cfg, std::size_t examples, std::size_t frames,
                                         std::uint64_t seed) {
    Rng rng(seed);
    std::vector<ToyExample> out(examples);
    const std::size_t t_out = output_length(cfg, frames);
    for (auto& ex : out) {
        ex.units.resize(frames);
        for (auto& u : ex.units) u = static_cast<std::uint32_t>(rng.index(cfg.vocab));
        ex.target.resize(static_cast<Eigen::Index>(t_out), static_cast<Eigen::Index>(cfg.out_dim));
        for (Eigen::Index i = 0; i < ex.target.size(); ++i) ex.target.data()[i] = rng.normal();
    }
    return out;
}

double mse_loss(const AdapterParams& params, std::span<const ToyExample> data) {
    require(!data.empty(), ErrorCode::EmptyInput, "toy dataset is empty");
    double total = 0.0;
    for (const auto& ex : data) {
        const Matrix y = forward(params, ex.units).output;
        require(y.rows() == ex.target.rows() && y.cols() == ex.target.cols(), ErrorCode::DimMismatch,
                "target shape does not match adapter output");
        total += (y - ex.target).squaredNorm() / static_cast<double>(y.size());
    }
    return total / static_cast<double>(data.size());
}

FitResult toy_fit(AdapterParams params, std::span<const ToyExample> data, std::size_t steps, const AdamWOptions& opts) {
    require(!data.empty(), ErrorCode::EmptyInput, "toy dataset is empty");
    AdapterParams m = zeros_like(params.config);
    AdapterParams v = zeros_like(params.config);
    auto p_refs = params.tensors();
    auto m_refs = m.tensors();
    auto v_refs = v.tensors();

    FitResult res;
    res.losses.reserve(steps + 1);
    for (std::size_t step = 0; step <= steps; ++step) {
        double loss = 0.0;
        AdapterParams grad = zeros_like(params.config);
        for (const auto& ex : data) {
            ForwardResult fr = forward(params, ex.units);
            require(fr.output.rows() == ex.target.rows() && fr.output.cols() == ex.target.cols(), ErrorCode::DimMismatch,
                    "target shape does not match adapter output");
            const Matrix diff = fr.output - ex.target;
            const double scale = 1.0 / (static_cast<double>(diff.size()) * static_cast<double>(data.size()));
            loss += diff.squaredNorm() * scale;
            if (step == steps) continue;
            AdapterParams g = backward(params, fr.cache, (2.0 * scale) * diff);
            auto g_refs = g.tensors();
            auto acc_refs = grad.tensors();
            for (std::size_t ti = 0; ti < g_refs.size(); ++ti) {
                for (std::size_t i = 0; i < g_refs[ti].size; ++i) acc_refs[ti].data[i] += g_refs[ti].data[i];
            }
        }
        res.losses.push_back(loss);
        if (step == steps) break;

        const double t = static_cast<double>(step + 1);
        const double bc1 = 1.0 - std::pow(opts.beta1, t);
        const double bc2 = 1.0 - std::pow(opts.beta2, t);
        auto g_refs = grad.tensors();
        for (std::size_t ti = 0; ti < p_refs.size(); ++ti) {
            for (std::size_t i = 0; i < p_refs[ti].size; ++i) {
                const double gi = g_refs[ti].data[i];
                double& mi = m_refs[ti].data[i];
                double& vi = v_refs[ti].data[i];
                mi = opts.beta1 * mi + (1.0 - opts.beta1) * gi;
                vi = opts.beta2 * vi + (1.0 - opts.beta2) * gi * gi;
                const double update = (mi / bc1) / (std::sqrt(vi / bc2) + opts.eps);
                double& theta = p_refs[ti].data[i];
                theta -= opts.lr * (update + opts.weight_decay * theta);
            }
        }
    }
    res.params = std::move(params);
    return res;
}

Bytes write_checkpoint(const AdapterParams& params) {
    Json header{{"adapter", config_json(params.config)}, {"init_seed", params.init_seed}};
    const std::string text = header.dump();
    ByteWriter w;
    w.put_tag("DSUA");
    w.put_u32(kCheckpointVersion);
    w.put_u32(static_cast<std::uint32_t>(text.size()));
    w.put_tag(text);
    visit_tensors(params, [&](const std::string&, TensorKind, const auto& t, double) {
        for (Eigen::Index i = 0; i < t.size(); ++i) w.put_f32(static_cast<float>(t.data()[i]));
    });
    return std::move(w).take();
}

AdapterParams read_checkpoint(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    if (r.remaining() < 4 || r.tag() != "DSUA") raise(ErrorCode::CorruptFile, "bad magic, expected DSUA");
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion) raise(ErrorCode::CorruptFile, "unsupported DSUA version " + std::to_string(version));
    const std::uint32_t len = r.u32();
    const auto text = r.take(len);
    AdapterConfig cfg;
    std::uint64_t seed = 0;
    try {
        const Json header = Json::parse(text.begin(), text.end());
        cfg = config_from(header.at("adapter"));
        seed = header.at("init_seed").get<std::uint64_t>();
    } catch (const Json::exception& e) {
        raise(ErrorCode::CorruptFile, std::string("checkpoint header: ") + e.what());
    }
    AdapterParams p = zeros_like(cfg);
    p.init_seed = seed;
    if (r.remaining() != p.parameter_count() * 4) {
        raise(ErrorCode::CorruptFile, "checkpoint holds " + std::to_string(r.remaining()) + " payload bytes, config needs " +
                                          std::to_string(p.parameter_count() * 4));
    }
    for (auto& t : p.tensors()) {
        for (std::size_t i = 0; i < t.size; ++i) {
            const float v = r.f32();
            if (!std::isfinite(v)) raise(ErrorCode::CorruptFile, "non-finite value in " + t.name);
            t.data[i] = v;
        }
    }
    return p;
}

void write_checkpoint_file(const AdapterParams& params, const std::filesystem::path& path) {
    write_file(path, write_checkpoint(params));
}

AdapterParams read_checkpoint_file(const std::filesystem::path& path) {
    const Bytes bytes = read_file(path);
    try {
        return read_checkpoint(bytes);
    } catch (const Error& e) {
        throw e.with_context(path.string());
    }
}

}  // namespace dsu::adapter

// Copyright 2026 The dsu-toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "dsu/features.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>

#include "dsu/error.hpp"

namespace dsu::features {

namespace {

constexpr std::uint32_t kFormatVersion = 1;

// The FFTW planner is not thread-safe; execution on a shared plan is.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

class RealFft {
public:
    explicit RealFft(std::size_t n) : n_(n) {
        std::lock_guard lock(planner_mutex());
        in_ = fftw_alloc_real(n);
        out_ = fftw_alloc_complex(n / 2 + 1);
        plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_, out_, FFTW_ESTIMATE);
    }
    ~RealFft() {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(plan_);
        fftw_free(in_);
        fftw_free(out_);
    }
    RealFft(const RealFft&) = delete;
    RealFft& operator=(const RealFft&) = delete;

    double* input() { return in_; }

    std::vector<double> power() {
        fftw_execute(plan_);
        std::vector<double> p(n_ / 2 + 1);
        for (std::size_t k = 0; k < p.size(); ++k) p[k] = out_[k][0] * out_[k][0] + out_[k][1] * out_[k][1];
        return p;
    }

private:
    std::size_t n_;
    double* in_ = nullptr;
    fftw_complex* out_ = nullptr;
    fftw_plan plan_ = nullptr;
};

void fill_windowed(std::span<const float> frame, const MfccConfig& cfg, double* dst) {
    const std::size_t n = frame.size();
    const double denom = n > 1 ? static_cast<double>(n - 1) : 1.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double prev = i == 0 ? frame[0] : frame[i - 1];
        const double emphasized = static_cast<double>(frame[i]) - cfg.preemphasis * prev;
        const double hamming = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / denom);
        dst[i] = emphasized * hamming;
    }
    for (std::size_t i = n; i < cfg.fft_size; ++i) dst[i] = 0.0;
}

}  // namespace

FeatureSequence::FeatureSequence(std::vector<float> values, std::size_t dim, float frame_rate_hz, std::string source,
                                 std::string source_id)
    : values_(std::move(values)),
      dim_(dim),
      frame_rate_hz_(frame_rate_hz),
      source_(std::move(source)),
      source_id_(std::move(source_id)) {
    require(dim_ >= 1, ErrorCode::InvalidArgument, "feature dimension must be >= 1");
    require(values_.size() % dim_ == 0, ErrorCode::DimMismatch, "feature payload is not a whole number of frames");
    require(std::isfinite(frame_rate_hz_) && frame_rate_hz_ > 0.0f, ErrorCode::InvalidArgument,
            "frame rate must be positive");
    for (float v : values_) require(std::isfinite(v), ErrorCode::InvalidArgument, "feature value is NaN or Inf");
}

std::size_t MfccConfig::frame_len_samples(int sample_rate_hz) const {
    return static_cast<std::size_t>(std::lround(frame_len_ms * sample_rate_hz / 1000.0));
}

std::size_t MfccConfig::hop_samples(int sample_rate_hz) const {
    return static_cast<std::size_t>(std::lround(hop_ms * sample_rate_hz / 1000.0));
}

void MfccConfig::validate(int sample_rate_hz) const {
    const std::size_t frame_len = frame_len_samples(sample_rate_hz);
    require(frame_len >= 1 && hop_samples(sample_rate_hz) >= 1, ErrorCode::InvalidArgument,
            "frame length and hop must be at least one sample");
    require(fft_size >= frame_len, ErrorCode::InvalidArgument, "fft_size must be >= frame length in samples");
    require(n_mels >= 1 && n_ceps >= 1 && n_ceps <= n_mels, ErrorCode::InvalidArgument, "need 1 <= n_ceps <= n_mels");
    require(mel_low_hz >= 0.0 && mel_low_hz < mel_high_hz, ErrorCode::InvalidArgument, "need 0 <= mel_low < mel_high");
    require(mel_high_hz <= sample_rate_hz / 2.0, ErrorCode::InvalidArgument, "mel_high_hz exceeds Nyquist");
    require(delta_window >= 1, ErrorCode::InvalidArgument, "delta_window must be >= 1");
    require(log_floor > 0.0, ErrorCode::InvalidArgument, "log_floor must be positive");
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<std::vector<double>> mel_filterbank(const MfccConfig& cfg, int sample_rate_hz) {
    const std::size_t bins = cfg.fft_size / 2 + 1;
    const double mel_lo = hz_to_mel(cfg.mel_low_hz);
    const double mel_hi = hz_to_mel(cfg.mel_high_hz);
    const double step = (mel_hi - mel_lo) / static_cast<double>(cfg.n_mels + 1);

    std::vector<std::vector<double>> fb(cfg.n_mels, std::vector<double>(bins, 0.0));
    for (std::size_t m = 0; m < cfg.n_mels; ++m) {
        const double left = mel_lo + step * static_cast<double>(m);
        const double center = left + step;
        const double right = center + step;
        for (std::size_t k = 0; k < bins; ++k) {
            const double hz = static_cast<double>(k) * sample_rate_hz / static_cast<double>(cfg.fft_size);
            const double mel = hz_to_mel(hz);
            if (mel > left && mel <= center) {
                fb[m][k] = (mel - left) / (center - left);
            } else if (mel > center && mel < right) {
                fb[m][k] = (right - mel) / (right - center);
            }
        }
    }
    return fb;
}

std::vector<std::vector<double>> dct_matrix(std::size_t n_out, std::size_t n_in) {
    std::vector<std::vector<double>> m(n_out, std::vector<double>(n_in));
    const double n = static_cast<double>(n_in);
    for (std::size_t k = 0; k < n_out; ++k) {
        const double scale = k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
        for (std::size_t i = 0; i < n_in; ++i) {
            m[k][i] = scale * std::cos(std::numbers::pi * static_cast<double>(k) * (static_cast<double>(i) + 0.5) / n);
        }
    }
    return m;
}

std::vector<double> power_spectrum(std::span<const float> frame, const MfccConfig& cfg) {
    require(!frame.empty() && frame.size() <= cfg.fft_size, ErrorCode::InvalidArgument,
            "frame must be non-empty and no longer than fft_size");
    RealFft fft(cfg.fft_size);
    fill_windowed(frame, cfg, fft.input());
    return fft.power();
}

std::vector<std::vector<double>> log_mel_energies(const audio::Waveform& w, const MfccConfig& cfg) {
    const int sr = w.sample_rate_hz();
    cfg.validate(sr);
    const auto frames = audio::frame_signal(w, cfg.frame_len_samples(sr), cfg.hop_samples(sr));
    if (frames.empty()) {
        raise(ErrorCode::EmptyFeatures, "waveform '" + w.source_id() + "' is shorter than one analysis frame");
    }
    const auto fb = mel_filterbank(cfg, sr);

    RealFft fft(cfg.fft_size);
    std::vector<std::vector<double>> out;
    out.reserve(frames.size());
    for (const auto& frame : frames) {
        fill_windowed(frame, cfg, fft.input());
        const auto power = fft.power();
        std::vector<double> energies(cfg.n_mels);
        for (std::size_t m = 0; m < cfg.n_mels; ++m) {
            double e = 0.0;
            for (std::size_t k = 0; k < power.size(); ++k) e += fb[m][k] * power[k];
            energies[m] = std::log(std::max(e, cfg.log_floor));
        }
        out.push_back(std::move(energies));
    }
    return out;
}

FeatureSequence mfcc(const audio::Waveform& w, const MfccConfig& cfg) {
    const auto log_mel = log_mel_energies(w, cfg);
    const auto dct = dct_matrix(cfg.n_ceps, cfg.n_mels);
    const std::size_t frames = log_mel.size();
    const float rate = static_cast<float>(w.sample_rate_hz()) / static_cast<float>(cfg.hop_samples(w.sample_rate_hz()));

    std::vector<float> ceps(frames * cfg.n_ceps);
    for (std::size_t t = 0; t < frames; ++t) {
        for (std::size_t k = 0; k < cfg.n_ceps; ++k) {
            double c = 0.0;
            for (std::size_t m = 0; m < cfg.n_mels; ++m) c += dct[k][m] * log_mel[t][m];
            ceps[t * cfg.n_ceps + k] = static_cast<float>(c);
        }
    }
    FeatureSequence base(std::move(ceps), cfg.n_ceps, rate, "mfcc", w.source_id());
    const FeatureSequence d1 = deltas(base, cfg.delta_window);
    const FeatureSequence d2 = deltas(d1, cfg.delta_window);

    const std::size_t dim = 3 * cfg.n_ceps;
    std::vector<float> stacked(frames * dim);
    for (std::size_t t = 0; t < frames; ++t) {
        float* row = stacked.data() + t * dim;
        std::ranges::copy(base.frame(t), row);
        std::ranges::copy(d1.frame(t), row + cfg.n_ceps);
        std::ranges::copy(d2.frame(t), row + 2 * cfg.n_ceps);
    }
    return FeatureSequence(std::move(stacked), dim, rate, "mfcc", w.source_id());
}

FeatureSequence deltas(const FeatureSequence& f, int window) {
    require(window >= 1, ErrorCode::InvalidArgument, "delta window must be >= 1");
    const std::size_t frames = f.num_frames();
    const std::size_t dim = f.dim();
    const auto last = static_cast<std::ptrdiff_t>(frames) - 1;
    double norm = 0.0;
    for (int n = 1; n <= window; ++n) norm += static_cast<double>(n) * n;
    norm *= 2.0;

    std::vector<float> out(frames * dim, 0.0f);
    for (std::size_t t = 0; t < frames; ++t) {
        for (std::size_t d = 0; d < dim; ++d) {
            double acc = 0.0;
            for (int n = 1; n <= window; ++n) {
                const auto ahead = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(t) + n, last);
                const auto behind = std::max<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(t) - n, 0);
                acc += n * (static_cast<double>(f.frame(static_cast<std::size_t>(ahead))[d]) -
                            static_cast<double>(f.frame(static_cast<std::size_t>(behind))[d]));
            }
            out[t * dim + d] = static_cast<float>(acc / norm);
        }
    }
    return FeatureSequence(std::move(out), dim, f.frame_rate_hz(), f.source(), f.source_id());
}

Bytes write_features(const FeatureSequence& f) {
    require(f.source().size() <= 255, ErrorCode::InvalidArgument, "source tag longer than 255 bytes");
    ByteWriter w;
    w.put_tag("DSUF");
    w.put_u32(kFormatVersion);
    w.put_u32(static_cast<std::uint32_t>(f.num_frames()));
    w.put_u32(static_cast<std::uint32_t>(f.dim()));
    w.put_f32(f.frame_rate_hz());
    w.put_u8(static_cast<std::uint8_t>(f.source().size()));
    w.put_tag(f.source());
    for (float v : f.values()) w.put_f32(v);
    return std::move(w).take();
}

FeatureSequence read_features(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    if (r.remaining() < 4 || r.tag() != "DSUF") raise(ErrorCode::CorruptFile, "bad magic, expected DSUF");
    const std::uint32_t version = r.u32();
    if (version != kFormatVersion) raise(ErrorCode::CorruptFile, "unsupported DSUF version " + std::to_string(version));
    const std::uint32_t frames = r.u32();
    const std::uint32_t dim = r.u32();
    const float rate = r.f32();
    const std::uint8_t tag_len = r.u8();
    auto tag_bytes = r.take(tag_len);
    std::string tag(tag_bytes.begin(), tag_bytes.end());

    if (frames == 0) raise(ErrorCode::EmptyFeatures, "feature file declares zero frames");
    if (dim == 0) raise(ErrorCode::CorruptFile, "feature file declares zero dimension");
    if (!(std::isfinite(rate) && rate > 0.0f)) raise(ErrorCode::CorruptFile, "frame rate must be positive");
    const std::uint64_t expected = static_cast<std::uint64_t>(frames) * dim * 4;
    if (r.remaining() != expected) {
        raise(ErrorCode::CorruptFile, "header declares " + std::to_string(frames) + "x" + std::to_string(dim) +
                                          " values but payload holds " + std::to_string(r.remaining()) + " bytes");
    }
    std::vector<float> values(static_cast<std::size_t>(frames) * dim);
    for (float& v : values) {
        v = r.f32();
        if (!std::isfinite(v)) raise(ErrorCode::CorruptFile, "payload contains NaN or Inf");
    }
    return FeatureSequence(std::move(values), dim, rate, std::move(tag), {});
}

void write_features_file(const FeatureSequence& f, const std::filesystem::path& path) {
    write_file(path, write_features(f));
}

FeatureSequence read_features_file(const std::filesystem::path& path) {
    const Bytes bytes = read_file(path);
    try {
        FeatureSequence f = read_features(bytes);
        f.set_source_id(path.stem().string());
        return f;
    } catch (const Error& e) {
        throw e.with_context(path.string());
    }
}

FeatureSequence load_external_embeddings(std::span<const std::uint8_t> bytes) {
    FeatureSequence f = read_features(bytes);
    if (!f.source().starts_with("external:")) {
        raise(ErrorCode::UnsupportedFormat, "expected an external:* source tag, found '" + f.source() + "'");
    }
    return f;
}

FeatureSequence load_external_embeddings_file(const std::filesystem::path& path) {
    const Bytes bytes = read_file(path);
    try {
        FeatureSequence f = load_external_embeddings(bytes);
        f.set_source_id(path.stem().string());
        return f;
    } catch (const Error& e) {
        throw e.with_context(path.string());
    }
}

}  // namespace dsu::features

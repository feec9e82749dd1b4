// Copyright 2026 The dsu-toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "dsu/reduce.hpp"

#include <json.hpp>

#include <algorithm>
#include <set>
#include <sstream>
#include <unordered_map>

#include "dsu/error.hpp"

namespace dsu::reduce {

namespace {

using Json = nlohmann::json;
using PairKey = std::uint64_t;

PairKey pair_key(std::uint32_t left, std::uint32_t right) { return (static_cast<PairKey>(left) << 32) | right; }

// Merges every non-overlapping occurrence of (left, right), left to right.
// Returns true if anything changed.
bool apply_merge(std::vector<std::uint32_t>& seq, const Merge& m) {
    if (seq.size() < 2) return false;
    std::size_t out = 0;
    bool changed = false;
    for (std::size_t i = 0; i < seq.size();) {
        if (i + 1 < seq.size() && seq[i] == m.left && seq[i + 1] == m.right) {
            seq[out++] = m.token;
            i += 2;
            changed = true;
        } else {
            seq[out++] = seq[i++];
        }
    }
    seq.resize(out);
    return changed;
}

// Global pair statistics with an ordered index for "most frequent, then
// smallest pair" selection.
class PairStats {
public:
    void adjust(PairKey key, std::int64_t delta) {
        if (delta == 0) return;
        auto& count = counts_[key];
        if (count > 0) ranked_.erase({-count, key});
        count += delta;
        if (count > 0) {
            ranked_.insert({-count, key});
        } else {
            counts_.erase(key);
        }
    }

    bool empty() const { return ranked_.empty(); }
    std::int64_t best_count() const { return -ranked_.begin()->first; }
    PairKey best_key() const { return ranked_.begin()->second; }

private:
    std::unordered_map<PairKey, std::int64_t> counts_;
    std::set<std::pair<std::int64_t, PairKey>> ranked_;
};

std::unordered_map<PairKey, std::int64_t> local_counts(const std::vector<std::uint32_t>& seq) {
    std::unordered_map<PairKey, std::int64_t> counts;
    for (std::size_t i = 0; i + 1 < seq.size(); ++i) ++counts[pair_key(seq[i], seq[i + 1])];
    return counts;
}

std::uint32_t json_u32(const Json& j, const char* what) {
    if (!j.is_number_integer() || j.get<std::int64_t>() < 0 || j.get<std::int64_t>() > UINT32_MAX) {
        raise(ErrorCode::CorruptFile, std::string(what) + " must be a non-negative 32-bit integer");
    }
    return j.get<std::uint32_t>();
}

}  // namespace

std::vector<std::uint32_t> dedup_units(std::span<const std::uint32_t> units) {
    std::vector<std::uint32_t> out;
    out.reserve(units.size());
    for (std::uint32_t u : units) {
        if (out.empty() || out.back() != u) out.push_back(u);
    }
    return out;
}

DsuSequence dedup(const DsuSequence& z) {
    DsuSequence out = z;
    out.units = dedup_units(z.units);
    return out;
}

SubwordModel::SubwordModel(std::uint32_t base_k, std::vector<Merge> merges, std::size_t target_vocab)
    : base_k_(base_k), target_vocab_(target_vocab), merges_(std::move(merges)), base_ids_(base_k) {
    require(base_k_ >= 1, ErrorCode::InvalidArgument, "subword model needs base_k >= 1");
    for (std::uint32_t i = 0; i < base_k_; ++i) base_ids_[i] = i;
    expansions_.reserve(merges_.size());
    for (std::size_t i = 0; i < merges_.size(); ++i) {
        const Merge& m = merges_[i];
        const auto expected = static_cast<std::uint32_t>(base_k_ + i);
        require(m.token == expected, ErrorCode::InvalidArgument,
                "merge " + std::to_string(i) + " creates token " + std::to_string(m.token) + ", expected " +
                    std::to_string(expected));
        require(m.left < expected && m.right < expected, ErrorCode::InvalidArgument,
                "merge " + std::to_string(i) + " references a token that does not exist yet");
        std::vector<std::uint32_t> ex;
        const auto l = expansion(m.left);
        const auto r = expansion(m.right);
        ex.reserve(l.size() + r.size());
        ex.insert(ex.end(), l.begin(), l.end());
        ex.insert(ex.end(), r.begin(), r.end());
        expansions_.push_back(std::move(ex));
    }
}

std::span<const std::uint32_t> SubwordModel::expansion(std::uint32_t token) const {
    if (token < base_k_) return std::span(base_ids_).subspan(token, 1);
    const std::size_t merged = token - base_k_;
    if (merged >= expansions_.size()) {
        raise(ErrorCode::UnknownUnit, "token " + std::to_string(token) + " is outside the subword vocabulary of size " +
                                          std::to_string(vocab_size()));
    }
    return expansions_[merged];
}

SubwordModel bpe_train(std::span<const DsuSequence> corpus, std::size_t target_vocab) {
    require(!corpus.empty(), ErrorCode::EmptyInput, "BPE training corpus is empty");
    const std::uint32_t base_k = corpus.front().k;
    require(base_k >= 1, ErrorCode::InvalidArgument, "corpus declares K = 0");

    std::vector<std::vector<std::uint32_t>> seqs;
    seqs.reserve(corpus.size());
    for (const auto& z : corpus) {
        require(z.k == base_k, ErrorCode::DimMismatch, "utterance '" + z.source_id + "' declares a different K");
        for (std::uint32_t u : z.units) {
            require(u < base_k, ErrorCode::UnknownUnit,
                    "utterance '" + z.source_id + "' has unit " + std::to_string(u) + " >= K");
        }
        seqs.push_back(z.units);
    }

    PairStats stats;
    std::unordered_map<PairKey, std::vector<std::size_t>> occurs_in;  // may hold stale entries
    for (std::size_t u = 0; u < seqs.size(); ++u) {
        for (const auto& [key, count] : local_counts(seqs[u])) {
            stats.adjust(key, count);
            occurs_in[key].push_back(u);
        }
    }

    std::vector<Merge> merges;
    while (base_k + merges.size() < target_vocab && !stats.empty() && stats.best_count() >= 2) {
        const PairKey key = stats.best_key();
        const Merge m{static_cast<std::uint32_t>(key >> 32), static_cast<std::uint32_t>(key & 0xFFFFFFFFu),
                      static_cast<std::uint32_t>(base_k + merges.size())};
        merges.push_back(m);

        std::vector<std::size_t> touched = std::move(occurs_in[key]);
        occurs_in.erase(key);
        std::sort(touched.begin(), touched.end());
        touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
        for (std::size_t u : touched) {
            auto before = local_counts(seqs[u]);
            if (!apply_merge(seqs[u], m)) continue;
            auto after = local_counts(seqs[u]);
            for (const auto& [k, c] : before) {
                auto it = after.find(k);
                stats.adjust(k, (it == after.end() ? 0 : it->second) - c);
            }
            for (const auto& [k, c] : after) {
                auto it = before.find(k);
                if (it == before.end()) {
                    stats.adjust(k, c);
                    occurs_in[k].push_back(u);
                }
            }
        }
    }
    return SubwordModel(base_k, std::move(merges), target_vocab);
}

ReducedSequence bpe_encode(const SubwordModel& model, const DsuSequence& z) {
    for (std::uint32_t u : z.units) {
        if (u >= model.base_k()) {
            raise(ErrorCode::UnknownUnit, "unit " + std::to_string(u) + " in '" + z.source_id +
                                              "' is outside the base vocabulary of size " +
                                              std::to_string(model.base_k()));
        }
    }
    std::unordered_map<PairKey, std::size_t> rank;
    rank.reserve(model.merges().size());
    for (std::size_t i = 0; i < model.merges().size(); ++i) {
        rank.emplace(pair_key(model.merges()[i].left, model.merges()[i].right), i);
    }

    std::vector<std::uint32_t> seq = z.units;
    while (seq.size() >= 2) {
        std::size_t best = model.merges().size();
        for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
            auto it = rank.find(pair_key(seq[i], seq[i + 1]));
            if (it != rank.end() && it->second < best) best = it->second;
        }
        if (best == model.merges().size()) break;
        apply_merge(seq, model.merges()[best]);
    }
    return {std::move(seq), static_cast<std::uint32_t>(model.vocab_size()), z.source_id};
}

DsuSequence bpe_decode(const SubwordModel& model, const ReducedSequence& r) {
    DsuSequence out;
    out.k = model.base_k();
    out.source_id = r.source_id;
    for (std::uint32_t t : r.tokens) {
        const auto ex = model.expansion(t);
        out.units.insert(out.units.end(), ex.begin(), ex.end());
    }
    return out;
}

double reduction_ratio(std::size_t before_len, std::size_t after_len) {
    require(before_len >= 1, ErrorCode::EmptyInput, "reduction ratio needs T >= 1");
    return static_cast<double>(after_len) / static_cast<double>(before_len);
}

double corpus_reduction_ratio(std::span<const DsuSequence> before, std::span<const DsuSequence> after) {
    require(before.size() == after.size(), ErrorCode::DimMismatch, "corpora have different utterance counts");
    std::size_t t = 0;
    std::size_t t_reduced = 0;
    for (std::size_t i = 0; i < before.size(); ++i) {
        t += before[i].units.size();
        t_reduced += after[i].units.size();
    }
    return reduction_ratio(t, t_reduced);
}

features::FeatureSequence ctc_blank_removal(std::span<const std::uint32_t> labels,
                                            const features::FeatureSequence& emb, std::uint32_t blank) {
    if (labels.size() != emb.num_frames()) {
        raise(ErrorCode::DimMismatch, std::to_string(labels.size()) + " labels for " +
                                          std::to_string(emb.num_frames()) + " frames in '" + emb.source_id() + "'");
    }
    std::vector<float> kept;
    for (std::size_t t = 0; t < labels.size(); ++t) {
        if (labels[t] == blank) continue;
        kept.insert(kept.end(), emb.frame(t).begin(), emb.frame(t).end());
    }
    return {std::move(kept), emb.dim(), emb.frame_rate_hz(), emb.source(), emb.source_id()};
}

features::FeatureSequence ctc_frame_average(std::span<const std::uint32_t> labels,
                                            const features::FeatureSequence& emb, std::uint32_t blank) {
    if (labels.size() != emb.num_frames()) {
        raise(ErrorCode::DimMismatch, std::to_string(labels.size()) + " labels for " +
                                          std::to_string(emb.num_frames()) + " frames in '" + emb.source_id() + "'");
    }
    const std::size_t dim = emb.dim();
    std::vector<float> out;
    std::vector<double> acc(dim);
    for (std::size_t t = 0; t < labels.size();) {
        if (labels[t] == blank) {
            ++t;
            continue;
        }
        std::ranges::fill(acc, 0.0);
        std::size_t run = 0;
        const std::uint32_t label = labels[t];
        for (; t < labels.size() && labels[t] == label; ++t, ++run) {
            const auto f = emb.frame(t);
            for (std::size_t d = 0; d < dim; ++d) acc[d] += f[d];
        }
        for (std::size_t d = 0; d < dim; ++d) out.push_back(static_cast<float>(acc[d] / static_cast<double>(run)));
    }
    return {std::move(out), dim, emb.frame_rate_hz(), emb.source(), emb.source_id()};
}

std::size_t count_label_runs(std::span<const std::uint32_t> labels, std::uint32_t blank) {
    std::size_t runs = 0;
    for (std::size_t t = 0; t < labels.size(); ++t) {
        if (labels[t] != blank && (t == 0 || labels[t - 1] != labels[t])) ++runs;
    }
    return runs;
}

std::string write_units_manifest(std::span<const DsuSequence> seqs) {
    std::string out;
    for (const auto& z : seqs) {
        Json j;
        j["id"] = z.source_id;
        j["k"] = z.k;
        j["units"] = z.units;
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::vector<DsuSequence> read_units_manifest(std::string_view text) {
    std::vector<DsuSequence> out;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const std::size_t nl = text.find('\n', pos);
        const std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() : nl + 1;
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
        try {
            const Json j = Json::parse(line);
            if (!j.is_object() || !j.contains("id") || !j.contains("k") || !j.contains("units")) {
                raise(ErrorCode::CorruptFile, "expected an object with id, k and units");
            }
            if (!j["id"].is_string() || !j["units"].is_array()) raise(ErrorCode::CorruptFile, "id must be a string, units an array");
            DsuSequence z;
            z.source_id = j["id"].get<std::string>();
            z.k = json_u32(j["k"], "k");
            z.units.reserve(j["units"].size());
            for (const auto& u : j["units"]) {
                const std::uint32_t v = json_u32(u, "unit");
                if (v >= z.k) raise(ErrorCode::CorruptFile, "unit " + std::to_string(v) + " >= declared k " + std::to_string(z.k));
                z.units.push_back(v);
            }
            out.push_back(std::move(z));
        } catch (const Json::exception& e) {
            raise(ErrorCode::CorruptFile, "line " + std::to_string(line_no) + ": " + e.what());
        } catch (const Error& e) {
            throw e.with_context("line " + std::to_string(line_no));
        }
    }
    return out;
}

ReducedSequence to_reduced(const DsuSequence& record) { return {record.units, record.k, record.source_id}; }

DsuSequence to_record(const ReducedSequence& r) {
    DsuSequence z;
    z.units = r.tokens;
    z.k = r.vocab_size;
    z.source_id = r.source_id;
    return z;
}

std::string write_subword_model(const SubwordModel& model) {
    Json j;
    j["base_k"] = model.base_k();
    j["target_vocab"] = model.target_vocab();
    Json merges = Json::array();
    for (const Merge& m : model.merges()) merges.push_back({m.left, m.right, m.token});
    j["merges"] = std::move(merges);
    return j.dump() + "\n";
}

SubwordModel read_subword_model(std::string_view text) {
    try {
        const Json j = Json::parse(text);
        if (!j.is_object() || !j.contains("base_k") || !j.contains("merges") || !j["merges"].is_array()) {
            raise(ErrorCode::CorruptFile, "subword model needs base_k and a merges array");
        }
        const std::uint32_t base_k = json_u32(j["base_k"], "base_k");
        const std::size_t target = j.contains("target_vocab") ? json_u32(j["target_vocab"], "target_vocab") : 0;
        std::vector<Merge> merges;
        for (const auto& m : j["merges"]) {
            if (!m.is_array() || m.size() != 3) raise(ErrorCode::CorruptFile, "each merge must be [left, right, new]");
            merges.push_back({json_u32(m[0], "merge left"), json_u32(m[1], "merge right"), json_u32(m[2], "merge token")});
        }
        try {
            return SubwordModel(base_k, std::move(merges), target);
        } catch (const Error& e) {
            raise(ErrorCode::CorruptFile, e.message());
        }
    } catch (const Json::exception& e) {
        raise(ErrorCode::CorruptFile, std::string("subword model: ") + e.what());
    }
}

}  // namespace dsu::reduce

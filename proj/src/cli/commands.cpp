// Copyright 2026 The dsu-toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dsu/adapter.hpp"
#include "dsu/audio_io.hpp"
#include "dsu/binary.hpp"
#include "dsu/cli.hpp"
#include "dsu/error.hpp"
#include "dsu/features.hpp"
#include "dsu/metrics.hpp"
#include "dsu/parallel.hpp"
#include "dsu/prompts.hpp"
#include "dsu/reduce.hpp"
#include "dsu/rng.hpp"
#include "dsu/synth.hpp"
#include "dsu/vq.hpp"

namespace dsu::cli {

namespace {

namespace fs = std::filesystem;
using Json = nlohmann::json;

struct Context {
    PipelineConfig cfg;
    unsigned threads = 1;
};

void log(const std::string& msg) { std::cerr << "dsu: " << msg << '\n'; }

std::string num(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

std::uint64_t stage_seed(const Context& ctx, std::string_view stage) {
    const std::uint64_t derived = derive_seed(ctx.cfg.seed, stage);
    log("seed " + std::to_string(ctx.cfg.seed) + " -> " + std::string(stage) + " " + std::to_string(derived));
    return derived;
}

template <typename Fn>
auto with_path(const fs::path& path, Fn&& fn) {
    try {
        return fn();
    } catch (const Error& e) {
        throw e.with_context(path.string());
    }
}

std::vector<vq::DsuSequence> load_units(const fs::path& path) {
    const std::string text = read_text_file(path);
    return with_path(path, [&] { return reduce::read_units_manifest(text); });
}

reduce::SubwordModel load_model(const fs::path& path) {
    const std::string text = read_text_file(path);
    return with_path(path, [&] { return reduce::read_subword_model(text); });
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) raise(ErrorCode::Io, dir.string() + ": cannot create directory: " + ec.message());
}

std::vector<features::FeatureSequence> load_features(const std::vector<std::string>& paths, unsigned threads) {
    std::vector<features::FeatureSequence> out(paths.size());
    parallel_for(paths.size(), threads, [&](std::size_t i) { out[i] = features::read_features_file(paths[i]); });
    return out;
}

struct TextRow {
    std::string id;
    std::string text;
    Json raw;
};

std::vector<TextRow> load_text_rows(const fs::path& path) {
    const std::string text = read_text_file(path);
    std::vector<TextRow> rows;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = path.string() + ":" + std::to_string(line_no);
        Json j;
        try {
            j = Json::parse(line);
        } catch (const Json::parse_error& e) {
            raise(ErrorCode::CorruptFile, where + ": " + e.what());
        }
        if (!j.is_object() || !j.contains("id") || !j["id"].is_string() || !j.contains("text") || !j["text"].is_string()) {
            raise(ErrorCode::CorruptFile, where + ": expected {\"id\": string, \"text\": string}");
        }
        rows.push_back({j["id"].get<std::string>(), j["text"].get<std::string>(), j});
    }
    return rows;
}

// Reference and hypothesis files must list the same ids in the same order.
void check_aligned(const std::vector<TextRow>& refs, const std::vector<TextRow>& hyps) {
    if (refs.size() != hyps.size()) {
        raise(ErrorCode::DimMismatch, "reference has " + std::to_string(refs.size()) + " rows, hypothesis has " +
                                          std::to_string(hyps.size()));
    }
    for (std::size_t i = 0; i < refs.size(); ++i) {
        if (refs[i].id != hyps[i].id) {
            raise(ErrorCode::InvalidArgument, "row " + std::to_string(i + 1) + ": id '" + refs[i].id +
                                                  "' does not match hypothesis id '" + hyps[i].id + "'");
        }
    }
}

std::vector<std::string> texts(const std::vector<TextRow>& rows) {
    std::vector<std::string> out;
    for (const auto& r : rows) out.push_back(r.text);
    return out;
}

void write_json(const fs::path& path, const Json& j) { write_text_file(path, j.dump(2) + "\n"); }

fs::path output_in(const fs::path& dir, const std::string& stem, std::string_view ext, std::set<std::string>& seen) {
    if (!seen.insert(stem).second) raise(ErrorCode::InvalidArgument, "two inputs share the name '" + stem + "'");
    return dir / (stem + std::string(ext));
}

std::size_t total_units(const std::vector<vq::DsuSequence>& seqs) {
    std::size_t n = 0;
    for (const auto& s : seqs) n += s.units.size();
    return n;
}

using Action = std::function<void(Context&)>;

struct Registry {
    CLI::App& app;
    std::vector<std::pair<CLI::App*, Action>> commands;

    CLI::App* add(const std::string& name, const std::string& help, Action action) {
        CLI::App* sub = app.add_subcommand(name, help);
        commands.emplace_back(sub, std::move(action));
        return sub;
    }
};

void add_feature_commands(Registry& r) {
    {
        auto inputs = std::make_shared<std::vector<std::string>>();
        auto out_dir = std::make_shared<std::string>();
        auto* c = r.add("extract-mfcc", "Compute 39-dim MFCC features from 16 kHz PCM16 WAV files", [=](Context& ctx) {
            ctx.cfg.features.validate(audio::kSampleRateHz);
            ensure_dir(*out_dir);
            std::vector<Bytes> blobs(inputs->size());
            parallel_for(inputs->size(), ctx.threads, [&](std::size_t i) {
                const audio::Waveform w = audio::read_wav_file((*inputs)[i]);
                blobs[i] = features::write_features(features::mfcc(w, ctx.cfg.features));
            });
            std::set<std::string> seen;
            for (std::size_t i = 0; i < inputs->size(); ++i) {
                const fs::path in = (*inputs)[i];
                write_file(output_in(*out_dir, in.stem().string(), ".dsuf", seen), blobs[i]);
            }
            log("wrote " + std::to_string(inputs->size()) + " feature files to " + *out_dir);
        });
        c->add_option("inputs", *inputs, "WAV files")->required();
        c->add_option("--out-dir", *out_dir, "Directory for .dsuf outputs")->required();
    }
    {
        auto inputs = std::make_shared<std::vector<std::string>>();
        auto out_dir = std::make_shared<std::string>();
        auto* c = r.add("import-embeddings", "Validate external SSL embeddings and store them as .dsuf", [=](Context& ctx) {
            ensure_dir(*out_dir);
            std::vector<Bytes> blobs(inputs->size());
            parallel_for(inputs->size(), ctx.threads, [&](std::size_t i) {
                blobs[i] = features::write_features(features::load_external_embeddings_file((*inputs)[i]));
            });
            std::set<std::string> seen;
            for (std::size_t i = 0; i < inputs->size(); ++i) {
                const fs::path in = (*inputs)[i];
                write_file(output_in(*out_dir, in.stem().string(), ".dsuf", seen), blobs[i]);
            }
            log("imported " + std::to_string(inputs->size()) + " embedding files");
        });
        c->add_option("inputs", *inputs, "Feature files tagged external:<model>")->required();
        c->add_option("--out-dir", *out_dir, "Directory for .dsuf outputs")->required();
    }
}

void add_vq_commands(Registry& r) {
    {
        auto inputs = std::make_shared<std::vector<std::string>>();
        auto out = std::make_shared<std::string>();
        auto history = std::make_shared<std::string>();
        auto k = std::make_shared<std::optional<std::size_t>>();
        auto max_iters = std::make_shared<std::optional<std::size_t>>();
        auto rel_tol = std::make_shared<std::optional<double>>();
        auto sample_cap = std::make_shared<std::optional<std::size_t>>();
        auto* c = r.add("train-kmeans", "Train a k-means codebook on feature files", [=](Context& ctx) {
            if (*k) ctx.cfg.vq.k = **k;
            if (*max_iters) ctx.cfg.vq.max_iters = **max_iters;
            if (*rel_tol) ctx.cfg.vq.rel_tol = **rel_tol;
            if (*sample_cap) ctx.cfg.vq.sample_cap = **sample_cap;
            const auto corpus = load_features(*inputs, ctx.threads);
            std::size_t dim = 0;
            const std::vector<float> stacked = vq::stack_frames(corpus, dim);
            vq::KMeansOptions opts;
            opts.k = ctx.cfg.vq.k;
            opts.max_iters = ctx.cfg.vq.max_iters;
            opts.rel_tol = ctx.cfg.vq.rel_tol;
            opts.sample_cap = ctx.cfg.vq.sample_cap;
            opts.threads = ctx.threads;
            opts.seed = stage_seed(ctx, "kmeans");
            const vq::KMeansResult res = vq::kmeans_train({stacked, dim}, opts);
            vq::write_codebook_file(res.codebook, *out);
            log("k=" + std::to_string(opts.k) + " dim=" + std::to_string(dim) + " iterations " +
                std::to_string(res.codebook.iterations_run()) + " inertia " + num(res.codebook.train_inertia()));
            if (!history->empty()) write_json(*history, Json{{"inertia", res.inertia_history}});
        });
        c->add_option("inputs", *inputs, "Feature files (.dsuf)")->required();
        c->add_option("--out", *out, "Codebook output (.dsuk)")->required();
        c->add_option("--k", *k, "Number of clusters (default 1000)");
        c->add_option("--max-iters", *max_iters, "Lloyd iteration cap");
        c->add_option("--rel-tol", *rel_tol, "Relative inertia improvement stop threshold");
        c->add_option("--sample-cap", *sample_cap, "Train on a seeded subsample of at most this many frames");
        c->add_option("--history", *history, "Write the per-iteration inertia log as JSON");
    }
    {
        auto inputs = std::make_shared<std::vector<std::string>>();
        auto codebook = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        auto* c = r.add("quantize", "Map feature frames to nearest-centroid unit ids", [=](Context& ctx) {
            const vq::Codebook cb = vq::read_codebook_file(*codebook);
            const auto corpus = load_features(*inputs, ctx.threads);
            std::vector<vq::DsuSequence> seqs(corpus.size());
            parallel_for(corpus.size(), ctx.threads, [&](std::size_t i) {
                try {
                    seqs[i] = vq::quantize(cb, corpus[i]);
                } catch (const Error& e) {
                    throw e.with_context((*inputs)[i]);
                }
            });
            write_text_file(*out, reduce::write_units_manifest(seqs));
            log("quantized " + std::to_string(seqs.size()) + " utterances, " + std::to_string(total_units(seqs)) + " frames");
        });
        c->add_option("inputs", *inputs, "Feature files (.dsuf)")->required();
        c->add_option("--codebook", *codebook, "Codebook (.dsuk)")->required();
        c->add_option("--out", *out, "Units manifest (JSON lines)")->required();
    }
}

void add_reduce_commands(Registry& r) {
    {
        auto in = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        auto* c = r.add("dedup", "Collapse runs of repeated units", [=](Context&) {
            const auto seqs = load_units(*in);
            std::vector<vq::DsuSequence> outs;
            for (const auto& s : seqs) outs.push_back(reduce::dedup(s));
            write_text_file(*out, reduce::write_units_manifest(outs));
            log("dedup ratio " + num(reduce::corpus_reduction_ratio(seqs, outs)));
        });
        c->add_option("--in", *in, "Units manifest")->required();
        c->add_option("--out", *out, "Output units manifest")->required();
    }
    {
        auto in = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        auto vocab = std::make_shared<std::optional<std::size_t>>();
        auto* c = r.add("train-bpe", "Learn subword merges over unit sequences", [=](Context& ctx) {
            if (*vocab) ctx.cfg.reduce.subword_vocab = **vocab;
            const auto seqs = load_units(*in);
            const reduce::SubwordModel model = reduce::bpe_train(seqs, ctx.cfg.reduce.subword_vocab);
            write_text_file(*out, reduce::write_subword_model(model));
            log("learned " + std::to_string(model.merges().size()) + " merges, vocab " + std::to_string(model.vocab_size()));
        });
        c->add_option("--in", *in, "Units manifest (usually deduplicated)")->required();
        c->add_option("--out", *out, "Subword model (JSON)")->required();
        c->add_option("--vocab", *vocab, "Target vocabulary size (default 2000)");
    }
    {
        auto in = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        auto model_path = std::make_shared<std::string>();
        auto* c = r.add("encode", "Apply subword merges to a units manifest", [=](Context& ctx) {
            const auto model = load_model(*model_path);
            const auto seqs = load_units(*in);
            std::vector<vq::DsuSequence> outs(seqs.size());
            parallel_for(seqs.size(), ctx.threads, [&](std::size_t i) {
                if (seqs[i].k != model.base_k()) {
                    raise(ErrorCode::StateMismatch, "utterance '" + seqs[i].source_id + "' has k=" + std::to_string(seqs[i].k) +
                                                        ", model expects " + std::to_string(model.base_k()));
                }
                outs[i] = reduce::to_record(reduce::bpe_encode(model, seqs[i]));
            });
            write_text_file(*out, reduce::write_units_manifest(outs));
            log("subword ratio " + num(reduce::corpus_reduction_ratio(seqs, outs)));
        });
        c->add_option("--model", *model_path, "Subword model")->required();
        c->add_option("--in", *in, "Units manifest")->required();
        c->add_option("--out", *out, "Reduced manifest")->required();
    }
    {
        auto in = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        auto model_path = std::make_shared<std::string>();
        auto* c = r.add("decode", "Expand subword tokens back to base units", [=](Context& ctx) {
            const auto model = load_model(*model_path);
            const auto seqs = load_units(*in);
            std::vector<vq::DsuSequence> outs(seqs.size());
            parallel_for(seqs.size(), ctx.threads, [&](std::size_t i) {
                if (seqs[i].k != model.vocab_size()) {
                    raise(ErrorCode::StateMismatch, "utterance '" + seqs[i].source_id + "' has k=" + std::to_string(seqs[i].k) +
                                                        ", model vocab is " + std::to_string(model.vocab_size()));
                }
                outs[i] = reduce::bpe_decode(model, reduce::to_reduced(seqs[i]));
            });
            write_text_file(*out, reduce::write_units_manifest(outs));
        });
        c->add_option("--model", *model_path, "Subword model")->required();
        c->add_option("--in", *in, "Reduced manifest")->required();
        c->add_option("--out", *out, "Units manifest")->required();
    }
    {
        auto in = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        auto system = std::make_shared<std::string>("J");
        auto model_out = std::make_shared<std::string>();
        auto vocab = std::make_shared<std::optional<std::size_t>>();
        auto* c = r.add("reduce", "Run one reduction system: G raw, H dedup, J dedup+subword", [=](Context& ctx) {
            if (*vocab) ctx.cfg.reduce.subword_vocab = **vocab;
            const auto seqs = load_units(*in);
            std::vector<vq::DsuSequence> outs = seqs;
            if (*system != "G") {
                for (auto& s : outs) s = reduce::dedup(s);
            }
            if (*system == "J") {
                const auto model = reduce::bpe_train(outs, ctx.cfg.reduce.subword_vocab);
                for (auto& s : outs) s = reduce::to_record(reduce::bpe_encode(model, s));
                if (!model_out->empty()) write_text_file(*model_out, reduce::write_subword_model(model));
            }
            write_text_file(*out, reduce::write_units_manifest(outs));
            log("system " + *system + " ratio " + num(reduce::corpus_reduction_ratio(seqs, outs)));
        });
        c->add_option("--in", *in, "Raw units manifest")->required();
        c->add_option("--out", *out, "Output manifest")->required();
        c->add_option("--system", *system, "G, H or J")->check(CLI::IsMember({"G", "H", "J"}));
        c->add_option("--model-out", *model_out, "Where to write the subword model trained for system J");
        c->add_option("--vocab", *vocab, "Subword vocabulary size for system J");
    }
    {
        auto labels = std::make_shared<std::string>();
        auto inputs = std::make_shared<std::vector<std::string>>();
        auto out_dir = std::make_shared<std::string>();
        auto mode = std::make_shared<std::string>("frame-average");
        auto blank = std::make_shared<std::optional<std::uint32_t>>();
        auto* c = r.add("ctc-compress", "Shorten feature sequences using per-frame CTC labels", [=](Context& ctx) {
            if (*blank) ctx.cfg.reduce.blank = **blank;
            const auto label_seqs = load_units(*labels);
            std::map<std::string, const vq::DsuSequence*> by_id;
            for (const auto& s : label_seqs) by_id[s.source_id] = &s;
            const auto corpus = load_features(*inputs, ctx.threads);
            std::vector<Bytes> blobs(corpus.size());
            parallel_for(corpus.size(), ctx.threads, [&](std::size_t i) {
                const auto it = by_id.find(corpus[i].source_id());
                if (it == by_id.end()) {
                    raise(ErrorCode::InvalidArgument, (*inputs)[i] + ": no labels for id '" + corpus[i].source_id() + "'");
                }
                const auto& units = it->second->units;
                const auto reduced = *mode == "blank-removal"
                                         ? reduce::ctc_blank_removal(units, corpus[i], ctx.cfg.reduce.blank)
                                         : reduce::ctc_frame_average(units, corpus[i], ctx.cfg.reduce.blank);
                blobs[i] = features::write_features(reduced);
            });
            ensure_dir(*out_dir);
            std::set<std::string> seen;
            for (std::size_t i = 0; i < inputs->size(); ++i) {
                write_file(output_in(*out_dir, fs::path((*inputs)[i]).stem().string(), ".dsuf", seen), blobs[i]);
            }
        });
        c->add_option("inputs", *inputs, "Feature files (.dsuf)")->required();
        c->add_option("--labels", *labels, "Per-frame label manifest (ids match feature source ids)")
            ->required();
        c->add_option("--out-dir", *out_dir, "Directory for compressed .dsuf outputs")->required();
        c->add_option("--mode", *mode, "blank-removal or frame-average")
            ->check(CLI::IsMember({"blank-removal", "frame-average"}));
        c->add_option("--blank", *blank, "Blank label id (default 0)");
    }
    {
        auto inputs = std::make_shared<std::vector<std::string>>();
        auto out = std::make_shared<std::string>();
        auto* c = r.add("stats", "Print reduction ratios of manifests relative to the first", [=](Context&) {
            Json report = Json::array();
            std::size_t first = 0;
            std::size_t prev = 0;
            for (std::size_t i = 0; i < inputs->size(); ++i) {
                const auto seqs = load_units((*inputs)[i]);
                const std::size_t n = total_units(seqs);
                if (i == 0) first = n;
                const double vs_first = reduce::reduction_ratio(first, n);
                const double vs_prev = reduce::reduction_ratio(i == 0 ? n : prev, n);
                std::printf("%s\tutterances=%zu\tunits=%zu\tratio=%.6f\tstage_ratio=%.6f\n", (*inputs)[i].c_str(),
                            seqs.size(), n, vs_first, vs_prev);
                report.push_back({{"path", (*inputs)[i]},
                                  {"utterances", seqs.size()},
                                  {"units", n},
                                  {"ratio", vs_first},
                                  {"stage_ratio", vs_prev}});
                prev = n;
            }
            if (!out->empty()) write_json(*out, report);
        });
        c->add_option("inputs", *inputs, "Units or reduced manifests, earliest stage first")
            ->required();
        c->add_option("--out", *out, "Also write the table as JSON");
    }
}

void add_prompt_commands(Registry& r) {
    {
        auto units = std::make_shared<std::string>();
        auto targets = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        auto task = std::make_shared<std::optional<std::string>>();
        auto language = std::make_shared<std::optional<std::string>>();
        auto vocab = std::make_shared<std::optional<std::size_t>>();
        auto* c = r.add("build-prompts", "Assemble instruction-tuning examples", [=](Context& ctx) {
            if (*task) ctx.cfg.prompts.task = **task;
            if (*language) ctx.cfg.prompts.language = **language;
            const prompts::Task t = prompts::parse_task(ctx.cfg.prompts.task);
            const auto seqs = load_units(*units);
            const auto rows = load_text_rows(*targets);
            std::map<std::string, const TextRow*> by_id;
            for (const auto& row : rows) by_id[row.id] = &row;

            std::vector<prompts::PromptExample> examples;
            for (const auto& s : seqs) {
                const auto it = by_id.find(s.source_id);
                if (it == by_id.end()) raise(ErrorCode::InvalidArgument, *targets + ": no target for id '" + s.source_id + "'");
                prompts::InstructionParams params;
                if (!ctx.cfg.prompts.language.empty()) params.language = ctx.cfg.prompts.language;
                const Json& raw = it->second->raw;
                if (raw.contains("question") && raw["question"].is_string()) params.question = raw["question"].get<std::string>();
                const std::size_t v = vocab->value_or(s.k);
                try {
                    examples.push_back(prompts::build_example(t, s.units, v, params, it->second->text, s.source_id));
                } catch (const Error& e) {
                    throw e.with_context("utterance '" + s.source_id + "'");
                }
            }
            write_text_file(*out, prompts::write_manifest(examples));
            log("built " + std::to_string(examples.size()) + " " + std::string(prompts::task_name(t)) + " examples");
        });
        c->add_option("--units", *units, "Units or reduced manifest")->required();
        c->add_option("--targets", *targets, "JSON lines {\"id\",\"text\"[,\"question\"]}")->required();
        c->add_option("--out", *out, "Prompt manifest")->required();
        c->add_option("--task", *task, "asr, sa, ner, s2tt or sqa");
        c->add_option("--language", *language, "Target language for s2tt");
        c->add_option("--vocab", *vocab, "Unit vocabulary size (default: each utterance's k)");
    }
    {
        auto inputs = std::make_shared<std::vector<std::string>>();
        auto out = std::make_shared<std::string>();
        auto* c = r.add("mix-prompts", "Shuffle several prompt manifests into one", [=](Context& ctx) {
            std::vector<std::vector<prompts::PromptExample>> sets;
            for (const auto& path : *inputs) {
                const std::string text = read_text_file(path);
                sets.push_back(with_path(path, [&] { return prompts::read_manifest(text); }));
            }
            const auto mixed = prompts::mix_datasets(sets, stage_seed(ctx, "prompts.mix"));
            write_text_file(*out, prompts::write_manifest(mixed));
        });
        c->add_option("inputs", *inputs, "Prompt manifests")->required();
        c->add_option("--out", *out, "Mixed manifest")->required();
    }
}

void add_adapter_commands(Registry& r) {
    {
        auto out = std::make_shared<std::string>();
        auto eps = std::make_shared<double>(1e-5);
        auto frames = std::make_shared<std::size_t>(6);
        auto tolerance = std::make_shared<double>(1e-5);
        auto* c = r.add("adapter-gradcheck", "Compare analytic and finite-difference adapter gradients", [=](Context& ctx) {
            const auto cfg = adapter::AdapterConfig::tiny();
            const auto rep = adapter::grad_check(cfg, stage_seed(ctx, "adapter.gradcheck"), *eps, *frames);
            log("checked " + std::to_string(rep.checked) + " parameters; max relative error " +
                num(rep.max_rel_error) + " at " + rep.worst_tensor + "[" + std::to_string(rep.worst_index) + "]");
            if (!out->empty()) {
                write_json(*out, Json{{"max_rel_error", rep.max_rel_error},
                                      {"worst_tensor", rep.worst_tensor},
                                      {"worst_index", rep.worst_index},
                                      {"checked", rep.checked},
                                      {"eps", *eps}});
            }
            if (!(rep.max_rel_error < *tolerance)) {
                raise(ErrorCode::InvalidArgument, "gradient check failed: error above tolerance " + num(*tolerance));
            }
        });
        c->add_option("--out", *out, "Write the report as JSON");
        c->add_option("--eps", *eps, "Central-difference step")->capture_default_str();
        c->add_option("--frames", *frames, "Input length T")->capture_default_str();
        c->add_option("--tolerance", *tolerance, "Fail above this max relative error")->capture_default_str();
    }
    {
        auto out = std::make_shared<std::string>();
        auto losses = std::make_shared<std::string>();
        auto steps = std::make_shared<std::optional<std::size_t>>();
        auto lr = std::make_shared<std::optional<double>>();
        auto examples = std::make_shared<std::optional<std::size_t>>();
        auto frames = std::make_shared<std::optional<std::size_t>>();
        auto* c = r.add("adapter-fit", "Overfit the adapter on a seeded toy regression set", [=](Context& ctx) {
            auto& a = ctx.cfg.adapter;
            if (*steps) a.steps = **steps;
            if (*lr) a.optimizer.lr = **lr;
            if (*examples) a.examples = **examples;
            if (*frames) a.frames = **frames;
            const auto data = adapter::make_toy_dataset(a.model, a.examples, a.frames, stage_seed(ctx, "adapter.data"));
            auto params = adapter::init_params(a.model, stage_seed(ctx, "adapter.init"));
            const auto res = adapter::toy_fit(std::move(params), data, a.steps, a.optimizer);
            log("loss " + num(res.losses.front()) + " -> " + num(res.losses.back()) + " after " +
                std::to_string(a.steps) + " steps");
            if (!out->empty()) adapter::write_checkpoint_file(res.params, *out);
            if (!losses->empty()) write_json(*losses, Json{{"loss", res.losses}});
        });
        c->add_option("--out", *out, "Checkpoint output (.dsua)");
        c->add_option("--losses", *losses, "Write the loss trajectory as JSON");
        c->add_option("--steps", *steps, "Optimizer steps (default 500)");
        c->add_option("--lr", *lr, "Learning rate (default 0.005)");
        c->add_option("--examples", *examples, "Toy examples (default 4)");
        c->add_option("--frames", *frames, "Units per toy example (default 16)");
    }
}

void add_metric_commands(Registry& r) {
    {
        auto ref = std::make_shared<std::string>();
        auto hyp = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        auto* c = r.add("score-wer", "Corpus word error rate", [=](Context&) {
            const auto refs = load_text_rows(*ref);
            const auto hyps = load_text_rows(*hyp);
            check_aligned(refs, hyps);
            const auto b = metrics::corpus_wer(texts(refs), texts(hyps));
            const Json report{{"metric", "wer"},
                              {"value", b.wer},
                              {"counts",
                               {{"substitutions", b.substitutions},
                                {"deletions", b.deletions},
                                {"insertions", b.insertions},
                                {"ref_words", b.ref_words},
                                {"utterances", refs.size()}}}};
            std::printf("WER %.2f\n", 100.0 * b.wer);
            if (!out->empty()) write_json(*out, report);
        });
        c->add_option("--ref", *ref, "Reference JSON lines")->required();
        c->add_option("--hyp", *hyp, "Hypothesis JSON lines")->required();
        c->add_option("--out", *out, "Report JSON");
    }
    {
        auto ref = std::make_shared<std::string>();
        auto hyp = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        auto order = std::make_shared<std::optional<int>>();
        auto smooth = std::make_shared<bool>(false);
        auto* c = r.add("score-bleu", "Corpus BLEU (reported x100)", [=](Context& ctx) {
            if (*order) ctx.cfg.metrics.max_order = **order;
            if (*smooth) ctx.cfg.metrics.smooth = true;
            const auto refs = load_text_rows(*ref);
            const auto hyps = load_text_rows(*hyp);
            check_aligned(refs, hyps);
            const auto s = metrics::bleu_stats(texts(refs), texts(hyps), ctx.cfg.metrics);
            const Json report{{"metric", "bleu-" + std::to_string(ctx.cfg.metrics.max_order)},
                              {"value", 100.0 * s.score},
                              {"counts",
                               {{"matches", s.matches},
                                {"totals", s.totals},
                                {"hyp_len", s.hyp_len},
                                {"ref_len", s.ref_len},
                                {"brevity_penalty", s.brevity_penalty}}}};
            std::printf("BLEU-%d %.2f\n", ctx.cfg.metrics.max_order, 100.0 * s.score);
            if (!out->empty()) write_json(*out, report);
        });
        c->add_option("--ref", *ref, "Reference JSON lines")->required();
        c->add_option("--hyp", *hyp, "Hypothesis JSON lines")->required();
        c->add_option("--out", *out, "Report JSON");
        c->add_option("--max-order", *order, "Highest n-gram order (1 gives BLEU-1)")->check(CLI::PositiveNumber);
        c->add_flag("--smooth", *smooth, "Add-one smoothing for orders >= 2");
    }
}

void add_synth_commands(Registry& r) {
    auto out = std::make_shared<std::string>();
    auto corpus_seed = std::make_shared<std::uint64_t>(synth::kBundledSeed);
    auto wav_dir = std::make_shared<std::string>();
    auto wav_count = std::make_shared<std::size_t>(3);
    auto feature_dir = std::make_shared<std::string>();
    auto* c = r.add("synth-corpus", "Write the seeded synthetic fixture corpus", [=](Context&) {
        log("corpus seed " + std::to_string(*corpus_seed));
        synth::UnitCorpusConfig cfg;
        write_text_file(*out, reduce::write_units_manifest(synth::unit_corpus(cfg, *corpus_seed)));
        if (!wav_dir->empty()) {
            ensure_dir(*wav_dir);
            for (std::size_t i = 0; i < *wav_count; ++i) {
                const std::string id = "tone-" + std::to_string(i);
                const auto w = synth::tone_waveform(1.0, derive_seed(*corpus_seed, id), id);
                std::vector<std::int16_t> pcm;
                for (float s : w.samples()) pcm.push_back(audio::to_pcm16(s));
                write_file(fs::path(*wav_dir) / (id + ".wav"), audio::write_wav_pcm16(pcm, 1, audio::kSampleRateHz));
            }
        }
        if (!feature_dir->empty()) {
            ensure_dir(*feature_dir);
            for (const auto& f : synth::blob_features(8, 200, 8, 16, derive_seed(*corpus_seed, "blobs"))) {
                features::write_features_file(f, fs::path(*feature_dir) / (f.source_id() + ".dsuf"));
            }
        }
    });
    c->add_option("--out", *out, "Units manifest")->required();
    c->add_option("--corpus-seed", *corpus_seed, "Corpus seed")->capture_default_str();
    c->add_option("--wav-dir", *wav_dir, "Also write synthetic tone WAVs here");
    c->add_option("--wav-count", *wav_count, "Number of WAVs")->capture_default_str();
    c->add_option("--features-dir", *feature_dir, "Also write synthetic external embeddings here");
}

}  // namespace

int run(int argc, char** argv) {
    CLI::App app{"Discrete speech unit toolkit"};
    app.require_subcommand(1);
    std::string config_path;
    std::optional<std::uint64_t> seed;
    unsigned threads = 1;
    app.add_option("--config", config_path, "Pipeline config (JSON)");
    app.add_option("--seed", seed, "Global seed; stage seeds are derived from it");
    app.add_option("--threads", threads, "Worker threads, 0 for all cores; never changes results")->capture_default_str();

    Registry registry{app, {}};
    add_feature_commands(registry);
    add_vq_commands(registry);
    add_reduce_commands(registry);
    add_prompt_commands(registry);
    add_adapter_commands(registry);
    add_metric_commands(registry);
    add_synth_commands(registry);
    for (auto& [sub, action] : registry.commands) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        Context ctx;
        if (!config_path.empty()) ctx.cfg = load_config(config_path);
        if (seed) ctx.cfg.seed = *seed;
        ctx.threads = resolve_threads(threads);
        for (auto& [sub, action] : registry.commands) {
            if (sub->parsed()) action(ctx);
        }
        return 0;
    } catch (const Error& e) {
        std::cerr << "dsu: error: " << e.what() << '\n';
        return e.code() == ErrorCode::Io ? 2 : 1;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "dsu: error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "dsu: error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace dsu::cli

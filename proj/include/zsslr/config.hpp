#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "zsslr/encoders.hpp"
#include "zsslr/errors.hpp"
#include "zsslr/kvfile.hpp"
#include "zsslr/zsl.hpp"

namespace zsslr {

// Run configuration for train/eval/experiment, in the same directive-per-line
// text format as the dataset manifest so one grammar covers both:
//
//   format zsslr-config 1
//   manifest data/manifest
//   model eszsl
//   encoder bilstm
//   streams body hand
//   aggregation final_state
//   lambda 0.001          # or 'auto' to sweep the built-in grid
//   gamma 0.001
//   learning_rate 0.01
//   momentum 0.9
//   batch_size 32
//   max_epochs 500
//   patience 20
//   normalize_theta 0
//   topk 1 2 5
//   runs 5
//   seed 1
//   threads 1
//   out results
//
// A relative manifest/out path resolves against the config file's directory.
// Every key has a CLI flag of the same name that overrides it.

struct RunConfig {
    std::filesystem::path manifest;
    ModelKind model = ModelKind::eszsl;
    EncoderConfig encoder;  // feature_dim is filled in from the dataset
    TrainConfig train;
    std::vector<std::size_t> ks = {1, 2, 5};
    std::size_t runs = 5;
    std::size_t threads = 1;
    bool widen_candidates = false;
    std::filesystem::path out = "out";
};

inline constexpr const char* kRunConfigFormatName = "zsslr-config";
inline constexpr int kRunConfigFormatVersion = 1;

namespace detail {

inline bool parse_config_flag(const std::string& tok, const std::string& what) {
    if (tok == "0" || tok == "false") return false;
    if (tok == "1" || tok == "true") return true;
    throw config_error("bad flag for " + what + ": '" + tok + "' (use 0 or 1)");
}

}  // namespace detail

/// Applies one config directive to cfg; shared between file parsing and the
/// flag overrides, so both spell every setting the same way.
inline void apply_run_config_key(RunConfig& cfg, const std::string& key,
                                 const std::vector<std::string>& args,
                                 const std::filesystem::path& base_dir) {
    const auto one = [&]() -> const std::string& {
        if (args.size() != 1)
            throw config_error("'" + key + "' takes exactly one argument");
        return args.front();
    };
    if (key == "manifest") {
        cfg.manifest = base_dir / one();
    } else if (key == "model") {
        cfg.model = model_kind_from_string(one());
    } else if (key == "encoder") {
        cfg.encoder.kind = encoder_kind_from_string(one());
    } else if (key == "streams") {
        if (args.empty()) throw config_error("'streams' needs at least one name");
        cfg.encoder.streams = args;
    } else if (key == "aggregation") {
        cfg.encoder.aggregation = aggregation_from_string(one());
    } else if (key == "lambda") {
        if (one() == "auto") {
            cfg.train.auto_hyper = true;
        } else {
            cfg.train.auto_hyper = false;
            cfg.train.lambda = kv::parse_double(one(), "lambda");
        }
    } else if (key == "gamma") {
        cfg.train.gamma = kv::parse_double(one(), "gamma");
    } else if (key == "learning_rate") {
        cfg.train.learning_rate = kv::parse_double(one(), "learning_rate");
    } else if (key == "momentum") {
        cfg.train.momentum = kv::parse_double(one(), "momentum");
    } else if (key == "batch_size") {
        cfg.train.batch_size = kv::parse_int<std::size_t>(one(), "batch_size");
    } else if (key == "max_epochs") {
        cfg.train.max_epochs = kv::parse_int<std::size_t>(one(), "max_epochs");
    } else if (key == "patience") {
        cfg.train.patience = kv::parse_int<std::size_t>(one(), "patience");
    } else if (key == "normalize_theta") {
        cfg.train.normalize_theta = detail::parse_config_flag(one(), key);
    } else if (key == "topk") {
        if (args.empty()) throw config_error("'topk' needs at least one k");
        cfg.ks.clear();
        for (const auto& a : args) cfg.ks.push_back(kv::parse_int<std::size_t>(a, "topk"));
    } else if (key == "runs") {
        cfg.runs = kv::parse_int<std::size_t>(one(), "runs");
    } else if (key == "seed") {
        cfg.train.seed = kv::parse_int<std::uint64_t>(one(), "seed");
    } else if (key == "threads") {
        cfg.threads = kv::parse_int<std::size_t>(one(), "threads");
    } else if (key == "widen_candidates") {
        cfg.widen_candidates = detail::parse_config_flag(one(), key);
    } else if (key == "out") {
        cfg.out = base_dir / one();
    } else {
        throw config_error("unknown config key '" + key + "'");
    }
}

/// Directives apply on top of `cfg`, so callers can seed defaults (e.g. a
/// thread count taken from the environment) that the file may override.
inline RunConfig parse_run_config_text(const std::string& text,
                                       const std::filesystem::path& base_dir,
                                       RunConfig cfg = {}) {
    const auto lines = kv::parse_text(text);
    if (lines.empty()) throw config_error("config is empty");
    {
        const auto& first = lines.front();
        if (first.key != "format" || first.args.size() != 2 ||
            first.args[0] != kRunConfigFormatName ||
            kv::parse_int<int>(first.args[1], "format version") != kRunConfigFormatVersion)
            throw config_error("first directive must be 'format zsslr-config 1'");
    }
    for (std::size_t i = 1; i < lines.size(); ++i) {
        try {
            apply_run_config_key(cfg, lines[i].key, lines[i].args, base_dir);
        } catch (const config_error& e) {
            throw config_error(std::string(e.what()) + " (line " +
                               std::to_string(lines[i].line_no) + ")");
        }
    }
    return cfg;
}

inline RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {}) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw config_error("cannot open config: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_run_config_text(buf.str(), path.parent_path(), std::move(base));
}

}  // namespace zsslr

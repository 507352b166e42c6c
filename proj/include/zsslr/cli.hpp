#pragma once

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"

#include "zsslr/config.hpp"
#include "zsslr/dataset.hpp"
#include "zsslr/errors.hpp"
#include "zsslr/eval.hpp"
#include "zsslr/gradcheck.hpp"
#include "zsslr/model_io.hpp"
#include "zsslr/synthetic.hpp"

namespace zsslr::cli {

// Command-line front end. Exit codes: 0 success, 2 unknown subcommand,
// 3 configuration problem (bad flags, unreadable inputs, invalid dataset),
// 4 numeric failure. Every failure prints exactly one line to stderr of the
// form "error: <category>: <message>".

namespace detail {

inline std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

inline std::size_t env_threads() {
    if (const char* v = std::getenv("ZSSLR_THREADS"))
        return kv::parse_int<std::size_t>(v, "ZSSLR_THREADS");
    return 1;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write " + path.string());
    out << text;
    if (!out) throw io_error("short write to " + path.string());
}

/// Run-config keys exposed as flags of the same name. Values are captured raw
/// and funneled through the directive parser, so a flag and its config-file
/// key accept exactly the same spellings.
struct ConfigFlags {
    std::map<std::string, std::string> raw;
    std::vector<std::pair<std::string, CLI::Option*>> opts;

    void attach(CLI::App& cmd, const std::vector<std::string>& keys) {
        for (const auto& key : keys) {
            const bool multi = key == "streams" || key == "topk";
            std::string help = "config key '" + key + "'";
            if (multi) help += ", comma-separated";
            opts.emplace_back(key, cmd.add_option("--" + key, raw[key], help));
        }
    }

    void apply(RunConfig& cfg) const {
        for (const auto& [key, opt] : opts) {
            if (opt->count() == 0) continue;
            const bool multi = key == "streams" || key == "topk";
            const auto args = multi ? split_commas(raw.at(key))
                                    : std::vector<std::string>{raw.at(key)};
            apply_run_config_key(cfg, key, args, {});
        }
    }
};

inline const std::vector<std::string> kTrainKeys = {
    "manifest",   "model",      "encoder",         "streams",    "aggregation",
    "lambda",     "gamma",      "learning_rate",   "momentum",   "batch_size",
    "max_epochs", "patience",   "normalize_theta", "topk",       "runs",
    "seed",       "threads",    "widen_candidates", "out"};

inline const std::vector<std::string> kEvalKeys = {
    "manifest", "topk", "threads", "widen_candidates", "out"};

/// Start from defaults (threads seeded from ZSSLR_THREADS), layer the config
/// file on top if given, then the flags.
inline RunConfig merge_run_config(const std::string& config_path, const ConfigFlags& flags) {
    RunConfig cfg;
    cfg.threads = env_threads();
    if (!config_path.empty()) cfg = load_run_config(config_path, std::move(cfg));
    flags.apply(cfg);
    return cfg;
}

inline Dataset load_for_run(RunConfig& cfg) {
    if (cfg.manifest.empty())
        throw config_error("no dataset manifest (give --manifest or a config file)");
    Dataset ds = load_dataset(cfg.manifest);
    cfg.encoder.feature_dim = ds.feature_dim;
    return ds;
}

inline void check_ks(const std::vector<std::size_t>& ks, std::size_t candidates) {
    if (ks.empty()) throw config_error("no k values");
    for (std::size_t i = 0; i < ks.size(); ++i) {
        if (ks[i] == 0) throw config_error("k must be at least 1");
        if (i > 0 && ks[i] <= ks[i - 1])
            throw config_error("ks must be ascending and unique");
        if (ks[i] > candidates)
            throw config_error("k = " + std::to_string(ks[i]) +
                               " exceeds the candidate count");
    }
}

inline std::string sci(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2e", x);
    return buf;
}

// ---------------------------------------------------------------------------
// Subcommand bodies

inline void run_synth(const SyntheticConfig& cfg, const std::filesystem::path& out_dir,
                      std::ostream& out) {
    const SyntheticDataset sd = generate_synthetic(cfg);
    write_synthetic_dataset(sd, out_dir);
    out << "synthetic dataset: " << sd.dataset.classes.size() << " classes, "
        << sd.dataset.videos.size() << " videos, " << sd.dataset.streams.size()
        << " stream(s) -> " << (out_dir / "manifest").string() << "\n";
}

inline void run_validate(const std::filesystem::path& manifest_path, std::ostream& out) {
    const DatasetManifest mf = load_manifest(manifest_path);
    const std::vector<Violation> violations = validate_dataset(mf);
    for (const auto& v : violations) out << "violation: " << v.message << "\n";
    if (!violations.empty())
        throw config_error("dataset has " + std::to_string(violations.size()) +
                           " violation(s)");
    out << "ok: " << manifest_path.string() << " (" << mf.classes.size() << " classes, "
        << mf.videos.size() << " videos, splits " << mf.split.train.size() << "/"
        << mf.split.val.size() << "/" << mf.split.test.size() << ")\n";
}

inline void run_train(RunConfig cfg, std::ostream& out) {
    const Dataset ds = load_for_run(cfg);
    const TrainedModel fitted = fit_model_auto(ds, cfg.encoder, cfg.model, cfg.train);

    std::filesystem::create_directories(cfg.out);
    const std::filesystem::path model_path = cfg.out / "model.zsm1";
    write_model(model_path, fitted.model);

    const auto val = zsslr::detail::rank_split(fitted.model, ds, ds.split.val,
                                               gather_classes(ds, ds.split.val),
                                               cfg.threads);
    const double val_top1 = topk_normalized_accuracy(val.rankings, val.labels, 1);
    out << "trained " << to_string(cfg.model) << " (encoder "
        << to_string(cfg.encoder.kind) << ", lambda " << fitted.chosen_lambda;
    if (cfg.model == ModelKind::eszsl) out << ", gamma " << fitted.chosen_gamma;
    out << "): val top-1 " << zsslr::detail::percent(val_top1) << " -> "
        << model_path.string() << "\n";
}

inline void run_eval(const std::filesystem::path& model_path, RunConfig cfg,
                     std::ostream& out) {
    if (cfg.manifest.empty())
        throw config_error("no dataset manifest (give --manifest or a config file)");
    const Dataset ds = load_dataset(cfg.manifest);
    const CompatibilityModel model = read_model(model_path);

    if (ds.split.test.empty()) throw config_error("eval: empty test split");
    std::vector<int> candidate_ids =
        cfg.widen_candidates ? std::vector<int>{} : ds.split.test;
    if (cfg.widen_candidates)
        for (const auto& c : ds.classes) candidate_ids.push_back(c.class_id);
    check_ks(cfg.ks, candidate_ids.size());
    const std::vector<ClassRecord> candidates = gather_classes(ds, candidate_ids);

    EvalReport report;
    report.method = to_string(model.kind);
    report.encoder = to_string(model.encoder.kind);
    report.streams = zsslr::detail::join_streams(model.encoder.streams);
    report.ks = cfg.ks;
    report.runs = 1;
    report.candidate_count = candidate_ids.size();

    const auto val = zsslr::detail::rank_split(model, ds, ds.split.val,
                                               gather_classes(ds, ds.split.val),
                                               cfg.threads);
    report.val_top1_mean = topk_normalized_accuracy(val.rankings, val.labels, 1);
    const auto test =
        zsslr::detail::rank_split(model, ds, ds.split.test, candidates, cfg.threads);
    for (std::size_t k : cfg.ks) {
        report.test_mean.push_back(topk_normalized_accuracy(test.rankings, test.labels, k));
        report.test_std.push_back(0.0);
    }

    const FormattedReport fr = format_report({report});
    std::filesystem::create_directories(cfg.out);
    write_text_file(cfg.out / "report.txt", fr.table);
    write_text_file(cfg.out / "report.csv", fr.csv);
    out << fr.table;
}

inline void run_experiment_cmd(RunConfig cfg, std::ostream& out, std::ostream& err) {
    const Dataset ds = load_for_run(cfg);
    ExperimentSpec spec;
    spec.kind = cfg.model;
    spec.encoder = cfg.encoder;
    spec.train = cfg.train;
    spec.ks = cfg.ks;
    spec.runs = cfg.runs;
    spec.threads = cfg.threads;
    spec.widen_candidates = cfg.widen_candidates;

    const EvalReport report = run_experiment(ds, spec);
    for (const auto& w : report.warnings) err << "warning: " << w << "\n";

    const FormattedReport fr = format_report({report});
    std::filesystem::create_directories(cfg.out);
    write_text_file(cfg.out / "report.txt", fr.table);
    write_text_file(cfg.out / "report.csv", fr.csv);
    out << fr.table;
}

inline void run_gradcheck(std::uint64_t seed, std::ostream& out) {
    const std::vector<GradCheckResult> results = run_gradient_suites(seed);
    for (const auto& r : results)
        out << r.name << ": max rel err " << sci(r.max_rel_err) << " over " << r.checks
            << " checks\n";
    const double worst = worst_rel_err(results);
    if (worst > 1e-4)
        throw numeric_error("gradient check failed: worst rel err " + sci(worst) +
                            " exceeds 1e-4");
    out << "gradcheck: all " << results.size() << " suites within 1e-4 (worst "
        << sci(worst) << ", seed " << seed << ")\n";
}

inline void run_baseline(std::size_t classes, const std::vector<std::size_t>& ks,
                         std::size_t runs, std::uint64_t seed, std::ostream& out) {
    const BaselineReport rep = random_baseline(classes, ks, runs, seed);
    out << "random baseline over " << classes << " classes (" << runs << " runs, seed "
        << seed << ")\n";
    for (std::size_t i = 0; i < rep.ks.size(); ++i)
        out << "top-" << rep.ks[i] << " analytic " << zsslr::detail::percent(rep.analytic[i])
            << " monte-carlo " << zsslr::detail::percent(rep.monte_carlo[i]) << "\n";
}

}  // namespace detail

inline int dispatch(const std::vector<std::string>& args, std::ostream& out,
                    std::ostream& err) {
    static const std::set<std::string> kSubcommands = {
        "synth", "validate", "train", "eval", "experiment", "gradcheck", "baseline"};
    if (args.empty()) {
        err << "error: usage: missing subcommand (synth, validate, train, eval, "
               "experiment, gradcheck, baseline)\n";
        return 2;
    }
    if (args[0].empty() || (args[0][0] != '-' && !kSubcommands.count(args[0]))) {
        err << "error: usage: unknown subcommand '" << args[0] << "'\n";
        return 2;
    }

    CLI::App app{"zero-shot video classification toolkit", "zsslr"};
    app.require_subcommand(1);

    SyntheticConfig synth_cfg;
    std::string synth_streams = "body";
    std::string synth_out = "out";
    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    synth->add_option("--out", synth_out, "output directory");
    synth->add_option("--seed", synth_cfg.seed, "root seed");
    synth->add_option("--feature_dim", synth_cfg.feature_dim, "video feature width");
    synth->add_option("--embedding_dim", synth_cfg.embedding_dim, "class embedding width");
    synth->add_option("--train_classes", synth_cfg.train_classes, "classes in train");
    synth->add_option("--val_classes", synth_cfg.val_classes, "classes in val");
    synth->add_option("--test_classes", synth_cfg.test_classes, "classes in test");
    synth->add_option("--videos_per_class", synth_cfg.videos_per_class,
                      "videos per class");
    synth->add_option("--time_steps", synth_cfg.time_steps, "frames per video");
    synth->add_option("--noise_sigma", synth_cfg.noise_sigma,
                      "per-video offset stddev");
    synth->add_option("--temporal_jitter", synth_cfg.temporal_jitter,
                      "zero-sum within-video variation");
    synth->add_option("--shared_mean_weight", synth_cfg.shared_mean_weight,
                      "embedding cone tightness in [0, 1)");
    synth->add_flag("--orthogonal_embeddings", synth_cfg.orthogonal_embeddings,
                    "make class embeddings orthonormal");
    synth->add_option("--streams", synth_streams, "stream names, comma-separated");

    std::string validate_manifest;
    CLI::App* validate = app.add_subcommand("validate", "check a dataset manifest");
    validate->add_option("--manifest", validate_manifest, "manifest path")->required();

    std::string train_config;
    detail::ConfigFlags train_flags;
    CLI::App* train =
        app.add_subcommand("train", "fit one model and serialize it as model.zsm1");
    train->add_option("--config", train_config, "run-config file");
    train_flags.attach(*train, detail::kTrainKeys);

    std::string eval_model_file;
    detail::ConfigFlags eval_flags;
    CLI::App* eval =
        app.add_subcommand("eval", "evaluate a serialized model on a dataset");
    eval->add_option("--model_file", eval_model_file, "model.zsm1 path")->required();
    eval_flags.attach(*eval, detail::kEvalKeys);

    std::string exp_config;
    detail::ConfigFlags exp_flags;
    CLI::App* experiment = app.add_subcommand(
        "experiment", "train and evaluate over repeated runs, emit report table + CSV");
    experiment->add_option("--config", exp_config, "run-config file");
    exp_flags.attach(*experiment, detail::kTrainKeys);

    std::uint64_t gc_seed = 7;
    CLI::App* gradcheck =
        app.add_subcommand("gradcheck", "run every finite-difference gradient suite");
    gradcheck->add_option("--seed", gc_seed, "suite seed");

    std::size_t b_classes = 0, b_runs = 10000;
    std::uint64_t b_seed = 1;
    std::string b_topk = "1,2,5";
    CLI::App* baseline =
        app.add_subcommand("baseline", "chance accuracy for a candidate-set size");
    baseline->add_option("--classes", b_classes, "number of candidate classes")
        ->required();
    baseline->add_option("--topk", b_topk, "k values, comma-separated");
    baseline->add_option("--runs", b_runs, "Monte-Carlo runs");
    baseline->add_option("--seed", b_seed, "Monte-Carlo seed");

    try {
        std::vector<const char*> argv;
        argv.push_back("zsslr");
        for (const auto& a : args) argv.push_back(a.c_str());
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "error: usage: " << e.what() << "\n";
        return 3;
    }

    const auto guarded = [&](auto&& body) -> int {
        try {
            body();
            return 0;
        } catch (const numeric_error& e) {
            err << "error: numeric: " << e.what() << "\n";
            return 4;
        } catch (const io_error& e) {
            err << "error: io: " << e.what() << "\n";
            return 3;
        } catch (const config_error& e) {
            err << "error: config: " << e.what() << "\n";
            return 3;
        } catch (const error& e) {
            err << "error: config: " << e.what() << "\n";
            return 3;
        }
    };

    if (synth->parsed())
        return guarded([&] {
            synth_cfg.streams = detail::split_commas(synth_streams);
            detail::run_synth(synth_cfg, synth_out, out);
        });
    if (validate->parsed())
        return guarded([&] { detail::run_validate(validate_manifest, out); });
    if (train->parsed())
        return guarded([&] {
            detail::run_train(detail::merge_run_config(train_config, train_flags), out);
        });
    if (eval->parsed())
        return guarded([&] {
            detail::run_eval(eval_model_file, detail::merge_run_config("", eval_flags),
                             out);
        });
    if (experiment->parsed())
        return guarded([&] {
            detail::run_experiment_cmd(detail::merge_run_config(exp_config, exp_flags),
                                       out, err);
        });
    if (gradcheck->parsed())
        return guarded([&] { detail::run_gradcheck(gc_seed, out); });
    if (baseline->parsed())
        return guarded([&] {
            std::vector<std::size_t> ks;
            for (const auto& tok : detail::split_commas(b_topk))
                ks.push_back(kv::parse_int<std::size_t>(tok, "topk"));
            detail::run_baseline(b_classes, ks, b_runs, b_seed, out);
        });

    err << "error: usage: missing subcommand\n";
    return 2;
}

inline int dispatch(int argc, const char* const* argv, std::ostream& out,
                    std::ostream& err) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return dispatch(args, out, err);
}

}  // namespace zsslr::cli

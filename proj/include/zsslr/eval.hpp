#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "zsslr/dataset.hpp"
#include "zsslr/errors.hpp"
#include "zsslr/parallel.hpp"
#include "zsslr/rng.hpp"
#include "zsslr/zsl.hpp"

namespace zsslr {

// ---------------------------------------------------------------------------
// Per-class normalized accuracy

/// Fraction of videos whose true class appears in the top k of their ranking,
/// averaged uniformly over classes so frequent classes carry no extra weight.
inline double topk_normalized_accuracy(const std::vector<std::vector<int>>& rankings,
                                       const std::vector<int>& labels, std::size_t k) {
    if (k == 0) throw config_error("topk: k must be at least 1");
    if (rankings.size() != labels.size())
        throw config_error("topk: rankings and labels differ in length");
    if (labels.empty()) throw config_error("topk: no videos to evaluate");

    std::map<int, std::pair<std::size_t, std::size_t>> per_class;  // hits, total
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto& ranked = rankings[i];
        if (ranked.empty()) throw config_error("topk: video " + std::to_string(i) +
                                               " has no ranking");
        const auto pos = std::find(ranked.begin(), ranked.end(), labels[i]);
        if (pos == ranked.end())
            throw config_error("topk: label of video " + std::to_string(i) +
                               " is not among the candidates");
        auto& [hits, total] = per_class[labels[i]];
        ++total;
        if (static_cast<std::size_t>(pos - ranked.begin()) < k) ++hits;
    }
    double acc = 0.0;
    for (const auto& [id, counts] : per_class)
        acc += static_cast<double>(counts.first) / static_cast<double>(counts.second);
    return acc / static_cast<double>(per_class.size());
}

// ---------------------------------------------------------------------------
// Random baseline

struct BaselineReport {
    std::size_t num_classes = 0;
    std::vector<std::size_t> ks;
    std::vector<double> analytic;     // k / num_classes, per k
    std::vector<double> monte_carlo;  // mean normalized top-k over runs
    std::size_t runs = 0;
};

/// Chance level for ranking num_classes candidates. The Monte-Carlo side
/// draws, per run and per class, a uniformly random rank for the true class
/// (the marginal of a uniform ranking) and averages the normalized accuracy.
inline BaselineReport random_baseline(std::size_t num_classes,
                                      const std::vector<std::size_t>& ks, std::size_t runs,
                                      std::uint64_t seed) {
    if (num_classes == 0) throw config_error("baseline: need at least one class");
    if (runs == 0) throw config_error("baseline: need at least one run");
    if (ks.empty()) throw config_error("baseline: no k values");
    for (std::size_t k : ks) {
        if (k == 0) throw config_error("baseline: k must be at least 1");
        if (k > num_classes)
            throw config_error("baseline: k = " + std::to_string(k) +
                               " exceeds the candidate count");
    }
    BaselineReport out;
    out.num_classes = num_classes;
    out.ks = ks;
    out.runs = runs;
    for (std::size_t k : ks)
        out.analytic.push_back(static_cast<double>(k) / static_cast<double>(num_classes));

    out.monte_carlo.assign(ks.size(), 0.0);
    SplitRng root(seed);
    for (std::size_t run = 0; run < runs; ++run) {
        SplitRng rng = root.child(run + 1);
        std::vector<double> acc(ks.size(), 0.0);
        for (std::size_t c = 0; c < num_classes; ++c) {
            const std::uint64_t rank = rng.below(num_classes);
            for (std::size_t i = 0; i < ks.size(); ++i)
                if (rank < ks[i]) acc[i] += 1.0;
        }
        for (std::size_t i = 0; i < ks.size(); ++i)
            out.monte_carlo[i] += acc[i] / static_cast<double>(num_classes);
    }
    for (double& x : out.monte_carlo) x /= static_cast<double>(runs);
    return out;
}

// ---------------------------------------------------------------------------
// Repeated-run experiments

struct ExperimentSpec {
    ModelKind kind = ModelKind::eszsl;
    EncoderConfig encoder;
    TrainConfig train;
    std::vector<std::size_t> ks = {1, 2, 5};
    std::size_t runs = 5;
    std::size_t threads = 1;        // evaluation workers; fitting stays sequential
    bool widen_candidates = false;  // rank against every class, not just the split

    void validate() const {
        train.validate();
        encoder.validate();
        if (runs == 0) throw config_error("experiment: need at least one run");
        if (ks.empty()) throw config_error("experiment: no k values");
        for (std::size_t i = 0; i < ks.size(); ++i) {
            if (ks[i] == 0) throw config_error("experiment: k must be at least 1");
            if (i > 0 && ks[i] <= ks[i - 1])
                throw config_error("experiment: ks must be ascending and unique");
        }
    }
};

struct EvalReport {
    std::string method;
    std::string encoder;
    std::string streams;  // joined with '+'
    std::vector<std::size_t> ks;
    std::size_t runs = 0;
    std::size_t candidate_count = 0;
    double val_top1_mean = 0.0;
    double val_top1_std = 0.0;
    std::vector<double> test_mean;  // aligned with ks
    std::vector<double> test_std;
    std::map<int, std::vector<double>> per_class;  // class id -> per-k mean accuracy
    std::vector<std::string> warnings;
};

namespace detail {

inline double sample_std(const std::vector<double>& xs, double mean) {
    if (xs.size() < 2) return 0.0;
    // identical runs must report exactly zero, not the mean's rounding noise
    if (std::all_of(xs.begin(), xs.end(), [&](double x) { return x == xs.front(); }))
        return 0.0;
    double s = 0.0;
    for (double x : xs) s += (x - mean) * (x - mean);
    return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

inline std::string join_streams(const std::vector<std::string>& streams) {
    std::string out;
    for (const auto& s : streams) {
        if (!out.empty()) out += '+';
        out += s;
    }
    return out;
}

/// Rankings and labels for one split's videos against the given candidates.
struct SplitRankings {
    std::vector<std::vector<int>> rankings;
    std::vector<int> labels;
};

/// Each video ranks independently into its own slot, so the result is the
/// same for every thread count.
inline SplitRankings rank_split(const CompatibilityModel& model, const Dataset& ds,
                                const std::vector<int>& split_ids,
                                const std::vector<ClassRecord>& candidates,
                                std::size_t threads = 1) {
    const std::vector<std::size_t> indices = ds.videos_in(split_ids);
    SplitRankings out;
    out.rankings.resize(indices.size());
    out.labels.resize(indices.size());
    parallel_for(indices.size(), threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t v = begin; v < end; ++v) {
            const std::size_t idx = indices[v];
            const auto ranked = classify(model, ds, ds.videos[idx], candidates);
            std::vector<int> ids;
            ids.reserve(ranked.size());
            for (const auto& r : ranked) ids.push_back(r.class_id);
            out.rankings[v] = std::move(ids);
            out.labels[v] = ds.videos[idx].class_id;
        }
    });
    return out;
}

}  // namespace detail

/// Fit and evaluate `runs` times with seeds seed+0 .. seed+runs-1; test-split
/// accuracy is measured against unseen test classes only (unless widened).
inline EvalReport run_experiment(const Dataset& ds, const ExperimentSpec& spec) {
    spec.validate();
    if (ds.split.test.empty()) throw config_error("experiment: empty test split");

    EvalReport report;
    report.method = to_string(spec.kind);
    report.encoder = to_string(spec.encoder.kind);
    report.streams = detail::join_streams(spec.encoder.streams);
    report.ks = spec.ks;
    report.runs = spec.runs;

    std::vector<int> candidate_ids =
        spec.widen_candidates ? std::vector<int>{} : ds.split.test;
    if (spec.widen_candidates)
        for (const auto& c : ds.classes) candidate_ids.push_back(c.class_id);
    report.candidate_count = candidate_ids.size();
    for (std::size_t k : spec.ks)
        if (k > candidate_ids.size())
            throw config_error("experiment: k = " + std::to_string(k) +
                               " exceeds the candidate count");
    const std::vector<ClassRecord> candidates = gather_classes(ds, candidate_ids);
    const std::vector<ClassRecord> val_candidates = gather_classes(ds, ds.split.val);

    for (int id : ds.split.test)
        if (ds.videos_in({id}).empty())
            report.warnings.push_back("test class " + std::to_string(id) +
                                      " has no videos and is excluded");

    std::vector<double> val_runs;
    std::vector<std::vector<double>> test_runs(spec.ks.size());
    std::map<int, std::vector<double>> per_class_sums;

    for (std::size_t run = 0; run < spec.runs; ++run) {
        TrainConfig cfg = spec.train;
        cfg.seed = spec.train.seed + run;
        try {
            const TrainedModel fitted = fit_model_auto(ds, spec.encoder, spec.kind, cfg);
            const auto val = detail::rank_split(fitted.model, ds, ds.split.val,
                                                val_candidates, spec.threads);
            val_runs.push_back(topk_normalized_accuracy(val.rankings, val.labels, 1));

            const auto test = detail::rank_split(fitted.model, ds, ds.split.test,
                                                 candidates, spec.threads);
            for (std::size_t i = 0; i < spec.ks.size(); ++i)
                test_runs[i].push_back(
                    topk_normalized_accuracy(test.rankings, test.labels, spec.ks[i]));

            // per-class top-k, accumulated across runs
            std::map<int, std::pair<std::vector<std::size_t>, std::size_t>> counts;
            for (std::size_t v = 0; v < test.labels.size(); ++v) {
                auto& [hits, total] = counts[test.labels[v]];
                hits.resize(spec.ks.size());
                ++total;
                const auto& ranked = test.rankings[v];
                const auto pos = std::find(ranked.begin(), ranked.end(), test.labels[v]);
                for (std::size_t i = 0; i < spec.ks.size(); ++i)
                    if (static_cast<std::size_t>(pos - ranked.begin()) < spec.ks[i])
                        ++hits[i];
            }
            for (const auto& [id, hit_total] : counts) {
                auto& acc = per_class_sums[id];
                acc.resize(spec.ks.size());
                for (std::size_t i = 0; i < spec.ks.size(); ++i)
                    acc[i] += static_cast<double>(hit_total.first[i]) /
                              static_cast<double>(hit_total.second);
            }
        } catch (const numeric_error& e) {
            throw numeric_error("run " + std::to_string(run + 1) + " (seed " +
                                std::to_string(cfg.seed) + "): " + e.what());
        } catch (const config_error& e) {
            throw config_error("run " + std::to_string(run + 1) + " (seed " +
                               std::to_string(cfg.seed) + "): " + e.what());
        }
    }

    report.val_top1_mean = 0.0;
    for (double v : val_runs) report.val_top1_mean += v;
    report.val_top1_mean /= static_cast<double>(val_runs.size());
    report.val_top1_std = detail::sample_std(val_runs, report.val_top1_mean);
    for (std::size_t i = 0; i < spec.ks.size(); ++i) {
        double mean = 0.0;
        for (double v : test_runs[i]) mean += v;
        mean /= static_cast<double>(test_runs[i].size());
        report.test_mean.push_back(mean);
        report.test_std.push_back(detail::sample_std(test_runs[i], mean));
    }
    for (auto& [id, sums] : per_class_sums) {
        for (double& x : sums) x /= static_cast<double>(spec.runs);
        report.per_class[id] = sums;
    }
    return report;
}

// ---------------------------------------------------------------------------
// Report formatting

struct FormattedReport {
    std::string table;
    std::string csv;
};

namespace detail {

inline std::string percent(double fraction) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", fraction * 100.0);
    return buf;
}

inline void pad_to(std::string& s, std::size_t width) {
    while (s.size() < width) s += ' ';
}

}  // namespace detail

/// Text table (one row per configuration, percentages with one decimal) plus
/// a CSV carrying the same values, schema
/// method,encoder,streams,split,k,accuracy_mean,accuracy_std,runs.
inline FormattedReport format_report(const std::vector<EvalReport>& reports) {
    if (reports.empty()) throw config_error("format_report: no reports");
    const std::vector<std::size_t>& ks = reports.front().ks;
    for (const auto& r : reports)
        if (r.ks != ks)
            throw config_error("format_report: reports disagree on the k set");

    std::vector<std::string> header = {"method", "encoder", "streams", "val top-1"};
    for (std::size_t k : ks) header.push_back("test top-" + std::to_string(k));
    std::vector<std::vector<std::string>> rows;
    for (const auto& r : reports) {
        std::vector<std::string> row = {r.method, r.encoder, r.streams,
                                        detail::percent(r.val_top1_mean)};
        for (std::size_t i = 0; i < ks.size(); ++i)
            row.push_back(detail::percent(r.test_mean[i]));
        rows.push_back(std::move(row));
    }

    std::vector<std::size_t> width(header.size());
    for (std::size_t c = 0; c < header.size(); ++c) {
        width[c] = header[c].size();
        for (const auto& row : rows) width[c] = std::max(width[c], row[c].size());
    }
    FormattedReport out;
    const auto emit_row = [&](const std::vector<std::string>& row) {
        std::string line;
        for (std::size_t c = 0; c < row.size(); ++c) {
            std::string cell = row[c];
            detail::pad_to(cell, width[c]);
            if (c) line += "  ";
            line += cell;
        }
        while (!line.empty() && line.back() == ' ') line.pop_back();
        out.table += line + "\n";
    };
    emit_row(header);
    for (const auto& row : rows) emit_row(row);

    out.csv = "method,encoder,streams,split,k,accuracy_mean,accuracy_std,runs\n";
    for (const auto& r : reports) {
        out.csv += r.method + "," + r.encoder + "," + r.streams + ",val,1," +
                   detail::percent(r.val_top1_mean) + "," + detail::percent(r.val_top1_std) +
                   "," + std::to_string(r.runs) + "\n";
        for (std::size_t i = 0; i < ks.size(); ++i)
            out.csv += r.method + "," + r.encoder + "," + r.streams + ",test," +
                       std::to_string(ks[i]) + "," + detail::percent(r.test_mean[i]) + "," +
                       detail::percent(r.test_std[i]) + "," + std::to_string(r.runs) + "\n";
    }
    return out;
}

}  // namespace zsslr

#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <system_error>
#include <vector>

#include "zsslr/errors.hpp"
#include "zsslr/feature_io.hpp"
#include "zsslr/manifest.hpp"
#include "zsslr/numerics.hpp"

namespace zsslr {

struct ClassRecord {
    int class_id = 0;
    std::string name;
    std::string description;
    Vector embedding;  // unit length after loading
};

struct VideoRecord {
    std::string video_id;
    int class_id = 0;
    std::vector<Matrix> streams;  // aligned with Dataset::streams
};

/// Fully loaded dataset: every feature sequence and class embedding in memory,
/// embeddings l2-normalized.
struct Dataset {
    std::size_t feature_dim = 0;
    std::size_t embedding_dim = 0;
    std::vector<std::string> streams;
    std::vector<ClassRecord> classes;
    std::vector<VideoRecord> videos;
    SplitSpec split;

    const ClassRecord& class_by_id(int class_id) const {
        for (const auto& c : classes)
            if (c.class_id == class_id) return c;
        throw config_error("unknown class id " + std::to_string(class_id));
    }

    /// Indices into videos whose class is in the given id set.
    std::vector<std::size_t> videos_in(const std::vector<int>& class_ids) const {
        const std::set<int> wanted(class_ids.begin(), class_ids.end());
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < videos.size(); ++i)
            if (wanted.count(videos[i].class_id)) out.push_back(i);
        return out;
    }
};

enum class ViolationKind {
    DuplicateClass,
    DuplicateVideo,
    UnknownClass,
    UnknownStream,
    StreamMismatch,
    SplitOverlap,
    EmptySplit,
    UncoveredClass,
    MissingFile,
    BadFile,
    DimensionMismatch,
};

struct Violation {
    ViolationKind kind;
    std::string message;
};

namespace detail {

inline void check_matrix_file(const DatasetManifest& mf, const std::string& rel,
                              const std::array<char, 4>& magic, std::size_t want_cols,
                              const std::string& what, std::vector<Violation>& out,
                              std::uint32_t* rows_out = nullptr) {
    const auto path = mf.resolve(rel);
    std::error_code ec;
    const auto size = std::filesystem::file_size(path, ec);
    if (ec) {
        out.push_back({ViolationKind::MissingFile, what + ": missing file " + rel});
        return;
    }
    MatrixFileHeader h;
    try {
        h = peek_matrix_header(path);
    } catch (const io_error& e) {
        out.push_back({ViolationKind::BadFile, what + ": " + e.what()});
        return;
    }
    if (h.magic != magic) {
        out.push_back({ViolationKind::BadFile,
                       what + ": bad magic '" + std::string(h.magic.data(), 4) + "' in " + rel});
        return;
    }
    if (h.rows == 0 || h.cols == 0) {
        out.push_back({ViolationKind::BadFile, what + ": zero dimension in " + rel});
        return;
    }
    if (size != h.expected_file_size()) {
        out.push_back({ViolationKind::BadFile,
                       what + ": " + rel + " has " + std::to_string(size) +
                           " bytes, header promises " +
                           std::to_string(h.expected_file_size())});
        return;
    }
    if (h.cols != want_cols) {
        out.push_back({ViolationKind::DimensionMismatch,
                       what + ": " + rel + " is " + std::to_string(h.rows) + "x" +
                           std::to_string(h.cols) + ", expected " +
                           std::to_string(want_cols) + " columns"});
        return;
    }
    if (magic == kEmbeddingMagic && h.rows != 1) {
        out.push_back({ViolationKind::DimensionMismatch,
                       what + ": " + rel + " must have exactly one row"});
        return;
    }
    if (rows_out) *rows_out = h.rows;
}

}  // namespace detail

/// Checks a manifest against the dataset invariants and returns every
/// violation found (empty means the dataset is loadable). Feature payloads are
/// not read; existence, headers and byte counts are.
inline std::vector<Violation> validate_dataset(const DatasetManifest& mf) {
    std::vector<Violation> out;

    std::set<int> class_ids;
    for (const auto& c : mf.classes)
        if (!class_ids.insert(c.class_id).second)
            out.push_back({ViolationKind::DuplicateClass,
                           "duplicate class id " + std::to_string(c.class_id)});

    std::set<std::string> video_ids;
    const std::set<std::string> stream_names(mf.streams.begin(), mf.streams.end());
    for (const auto& v : mf.videos) {
        if (!video_ids.insert(v.video_id).second)
            out.push_back({ViolationKind::DuplicateVideo, "duplicate video id " + v.video_id});
        if (!class_ids.count(v.class_id))
            out.push_back({ViolationKind::UnknownClass,
                           "video " + v.video_id + " references unknown class " +
                               std::to_string(v.class_id)});
        std::set<std::string> present;
        for (const auto& [stream, path] : v.stream_paths) {
            if (!stream_names.count(stream))
                out.push_back({ViolationKind::UnknownStream,
                               "video " + v.video_id + " has undeclared stream '" + stream +
                                   "'"});
            else if (!present.insert(stream).second)
                out.push_back({ViolationKind::StreamMismatch,
                               "video " + v.video_id + " lists stream '" + stream +
                                   "' twice"});
        }
        for (const auto& s : mf.streams)
            if (!present.count(s))
                out.push_back({ViolationKind::StreamMismatch,
                               "video " + v.video_id + " is missing stream '" + s + "'"});
    }

    const auto check_split = [&](const char* name, const std::vector<int>& ids) {
        if (ids.empty())
            out.push_back({ViolationKind::EmptySplit, std::string(name) + " split is empty"});
        for (int id : ids)
            if (!class_ids.count(id))
                out.push_back({ViolationKind::UnknownClass,
                               std::string(name) + " split references unknown class " +
                                   std::to_string(id)});
    };
    check_split("train", mf.split.train);
    check_split("val", mf.split.val);
    check_split("test", mf.split.test);

    const auto overlap = [&](const char* an, const std::vector<int>& a, const char* bn,
                             const std::vector<int>& b) {
        const std::set<int> sa(a.begin(), a.end());
        for (int id : b)
            if (sa.count(id))
                out.push_back({ViolationKind::SplitOverlap,
                               "class " + std::to_string(id) + " is in both " + an + " and " +
                                   bn});
    };
    overlap("train", mf.split.train, "val", mf.split.val);
    overlap("train", mf.split.train, "test", mf.split.test);
    overlap("val", mf.split.val, "test", mf.split.test);

    std::set<int> covered;
    for (int id : mf.split.train) covered.insert(id);
    for (int id : mf.split.val) covered.insert(id);
    for (int id : mf.split.test) covered.insert(id);
    for (const auto& c : mf.classes)
        if (!covered.count(c.class_id))
            out.push_back({ViolationKind::UncoveredClass,
                           "class " + std::to_string(c.class_id) + " is in no split"});

    for (const auto& c : mf.classes)
        detail::check_matrix_file(mf, c.embedding_path, kEmbeddingMagic, mf.embedding_dim,
                                  "class " + std::to_string(c.class_id), out);
    for (const auto& v : mf.videos) {
        std::uint32_t first_rows = 0;
        std::string first_stream;
        for (const auto& [stream, path] : v.stream_paths) {
            std::uint32_t rows = 0;
            detail::check_matrix_file(mf, path, kFeatureMagic, mf.feature_dim,
                                      "video " + v.video_id + " stream " + stream, out, &rows);
            if (rows == 0) continue;  // a violation was already recorded
            if (first_rows == 0) {
                first_rows = rows;
                first_stream = stream;
            } else if (rows != first_rows) {
                out.push_back({ViolationKind::StreamMismatch,
                               "video " + v.video_id + ": stream '" + stream + "' has " +
                                   std::to_string(rows) + " steps but '" + first_stream +
                                   "' has " + std::to_string(first_rows)});
            }
        }
    }
    return out;
}

/// Validates and loads a dataset; throws config_error listing the violations
/// if validation fails.
inline Dataset load_dataset(const DatasetManifest& mf) {
    const auto violations = validate_dataset(mf);
    if (!violations.empty()) {
        std::string msg = "dataset is invalid (" + std::to_string(violations.size()) +
                          " violation(s)):";
        const std::size_t shown = std::min<std::size_t>(violations.size(), 5);
        for (std::size_t i = 0; i < shown; ++i) msg += "\n  - " + violations[i].message;
        if (violations.size() > shown) msg += "\n  - ...";
        throw config_error(msg);
    }

    Dataset ds;
    ds.feature_dim = mf.feature_dim;
    ds.embedding_dim = mf.embedding_dim;
    ds.streams = mf.streams;
    ds.split = mf.split;

    ds.classes.reserve(mf.classes.size());
    for (const auto& c : mf.classes) {
        ClassRecord rec;
        rec.class_id = c.class_id;
        rec.name = c.name;
        rec.description = c.description;
        rec.embedding = l2_normalize(read_class_embedding(mf.resolve(c.embedding_path)));
        ds.classes.push_back(std::move(rec));
    }

    std::map<std::string, std::size_t> stream_index;
    for (std::size_t i = 0; i < mf.streams.size(); ++i) stream_index[mf.streams[i]] = i;

    ds.videos.reserve(mf.videos.size());
    for (const auto& v : mf.videos) {
        VideoRecord rec;
        rec.video_id = v.video_id;
        rec.class_id = v.class_id;
        rec.streams.resize(mf.streams.size());
        for (const auto& [stream, path] : v.stream_paths)
            rec.streams[stream_index.at(stream)] = read_feature_sequence(mf.resolve(path));
        ds.videos.push_back(std::move(rec));
    }
    return ds;
}

inline Dataset load_dataset(const std::filesystem::path& manifest_path) {
    return load_dataset(load_manifest(manifest_path));
}

/// Linearly resamples a feature sequence to a new number of time steps.
/// Endpoints map to endpoints; a single-step target takes the temporal
/// midpoint.
inline Matrix resample_sequence(const Matrix& seq, std::size_t target_steps) {
    if (seq.rows() == 0 || seq.cols() == 0)
        throw config_error("resample_sequence: sequence is empty");
    if (target_steps == 0) throw config_error("resample_sequence: target must be positive");
    const std::size_t t_in = seq.rows();
    Matrix out(target_steps, seq.cols());
    for (std::size_t i = 0; i < target_steps; ++i) {
        const double pos = target_steps == 1
                               ? 0.5 * static_cast<double>(t_in - 1)
                               : static_cast<double>(i) * static_cast<double>(t_in - 1) /
                                     static_cast<double>(target_steps - 1);
        const std::size_t lo = static_cast<std::size_t>(pos);
        const std::size_t hi = std::min(lo + 1, t_in - 1);
        const double frac = pos - static_cast<double>(lo);
        for (std::size_t j = 0; j < seq.cols(); ++j)
            out(i, j) = (1.0 - frac) * seq(lo, j) + frac * seq(hi, j);
    }
    return out;
}

}  // namespace zsslr

#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "zsslr/errors.hpp"
#include "zsslr/kvfile.hpp"

namespace zsslr {

// A dataset manifest is a plain text file listing streams, classes (with their
// embedding files) and videos (with one feature file per stream), plus the
// train/val/test class split.  All paths are relative to the manifest's
// directory.  Grammar, one directive per line, '#' comments:
//
//   format zsslr-manifest 1
//   feature_dim 1024
//   embedding_dim 768
//   streams body hand
//   class 0 again classes/c0000.zsc1
//   description 0 to repeat or do again
//   video v000000 0 body=features/v000000_body.zsf1 hand=features/v000000_hand.zsf1
//   split train 0 1 2
//   split val 3
//   split test 4
//
// split lines accumulate, so long id lists may be broken across lines.

struct ManifestClass {
    int class_id = 0;
    std::string name;
    std::string embedding_path;
    std::string description;
};

struct ManifestVideo {
    std::string video_id;
    int class_id = 0;
    std::vector<std::pair<std::string, std::string>> stream_paths;  // stream -> path
};

struct SplitSpec {
    std::vector<int> train, val, test;
};

struct DatasetManifest {
    std::filesystem::path base_dir;  // directory paths are resolved against
    std::size_t feature_dim = 0;
    std::size_t embedding_dim = 0;
    std::vector<std::string> streams;
    std::vector<ManifestClass> classes;
    std::vector<ManifestVideo> videos;
    SplitSpec split;

    std::filesystem::path resolve(const std::string& rel) const { return base_dir / rel; }
};

inline constexpr const char* kManifestFormatName = "zsslr-manifest";
inline constexpr int kManifestFormatVersion = 1;

namespace detail {

inline std::string at_line(const kv::Line& line) {
    return " (line " + std::to_string(line.line_no) + ")";
}

inline void expect_args(const kv::Line& line, std::size_t at_least) {
    if (line.args.size() < at_least)
        throw config_error("'" + line.key + "' needs at least " + std::to_string(at_least) +
                           " arguments" + at_line(line));
}

}  // namespace detail

inline DatasetManifest parse_manifest_text(const std::string& text,
                                           const std::filesystem::path& base_dir) {
    const auto lines = kv::parse_text(text);
    if (lines.empty()) throw config_error("manifest is empty");
    {
        const auto& first = lines.front();
        if (first.key != "format" || first.args.size() != 2 ||
            first.args[0] != kManifestFormatName ||
            kv::parse_int<int>(first.args[1], "format version") != kManifestFormatVersion)
            throw config_error("first directive must be 'format zsslr-manifest 1'");
    }

    DatasetManifest mf;
    mf.base_dir = base_dir;
    std::map<int, std::string> descriptions;
    bool saw_feature_dim = false, saw_embedding_dim = false;

    for (std::size_t idx = 1; idx < lines.size(); ++idx) {
        const auto& line = lines[idx];
        if (line.key == "format") {
            throw config_error("duplicate 'format' directive" + detail::at_line(line));
        } else if (line.key == "feature_dim" || line.key == "embedding_dim") {
            detail::expect_args(line, 1);
            const auto v = kv::parse_int<long long>(line.args[0], line.key);
            if (v < 1) throw config_error(line.key + " must be positive" + detail::at_line(line));
            auto& seen = line.key == "feature_dim" ? saw_feature_dim : saw_embedding_dim;
            if (seen) throw config_error("duplicate '" + line.key + "'" + detail::at_line(line));
            seen = true;
            (line.key == "feature_dim" ? mf.feature_dim : mf.embedding_dim) =
                static_cast<std::size_t>(v);
        } else if (line.key == "streams") {
            detail::expect_args(line, 1);
            if (!mf.streams.empty())
                throw config_error("duplicate 'streams' directive" + detail::at_line(line));
            mf.streams = line.args;
            std::set<std::string> uniq(mf.streams.begin(), mf.streams.end());
            if (uniq.size() != mf.streams.size())
                throw config_error("stream names must be unique" + detail::at_line(line));
        } else if (line.key == "class") {
            detail::expect_args(line, 3);
            ManifestClass c;
            c.class_id = kv::parse_int<int>(line.args[0], "class id");
            c.name = line.args[1];
            c.embedding_path = line.args[2];
            mf.classes.push_back(std::move(c));
        } else if (line.key == "description") {
            detail::expect_args(line, 2);
            const int id = kv::parse_int<int>(line.args[0], "description class id");
            std::string text_rest = line.tail.substr(line.args[0].size());
            if (!text_rest.empty() && text_rest.front() == ' ') text_rest.erase(0, 1);
            descriptions[id] = text_rest;
        } else if (line.key == "video") {
            detail::expect_args(line, 3);
            ManifestVideo v;
            v.video_id = line.args[0];
            v.class_id = kv::parse_int<int>(line.args[1], "video class id");
            for (std::size_t i = 2; i < line.args.size(); ++i) {
                const auto& tok = line.args[i];
                const auto eq = tok.find('=');
                if (eq == std::string::npos || eq == 0 || eq + 1 == tok.size())
                    throw config_error("video stream must be <stream>=<path>, got '" + tok +
                                       "'" + detail::at_line(line));
                v.stream_paths.emplace_back(tok.substr(0, eq), tok.substr(eq + 1));
            }
            mf.videos.push_back(std::move(v));
        } else if (line.key == "split") {
            detail::expect_args(line, 2);
            const auto& which = line.args[0];
            std::vector<int>* dst = which == "train" ? &mf.split.train
                                    : which == "val" ? &mf.split.val
                                    : which == "test" ? &mf.split.test
                                                      : nullptr;
            if (!dst)
                throw config_error("split must be train, val or test, got '" + which + "'" +
                                   detail::at_line(line));
            for (std::size_t i = 1; i < line.args.size(); ++i)
                dst->push_back(kv::parse_int<int>(line.args[i], "split class id"));
        } else {
            throw config_error("unknown manifest directive '" + line.key + "'" +
                               detail::at_line(line));
        }
    }

    if (!saw_feature_dim) throw config_error("manifest is missing 'feature_dim'");
    if (!saw_embedding_dim) throw config_error("manifest is missing 'embedding_dim'");
    if (mf.streams.empty()) throw config_error("manifest is missing 'streams'");

    for (auto& c : mf.classes) {
        if (const auto it = descriptions.find(c.class_id); it != descriptions.end()) {
            c.description = it->second;
            descriptions.erase(it);
        }
    }
    if (!descriptions.empty())
        throw config_error("description for undeclared class id " +
                           std::to_string(descriptions.begin()->first));
    return mf;
}

inline DatasetManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open manifest: " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_manifest_text(text, path.parent_path());
}

inline std::string format_manifest(const DatasetManifest& mf) {
    std::string out;
    out += std::string("format ") + kManifestFormatName + " " +
           std::to_string(kManifestFormatVersion) + "\n";
    out += "feature_dim " + std::to_string(mf.feature_dim) + "\n";
    out += "embedding_dim " + std::to_string(mf.embedding_dim) + "\n";
    out += "streams";
    for (const auto& s : mf.streams) out += " " + s;
    out += "\n";
    for (const auto& c : mf.classes)
        out += "class " + std::to_string(c.class_id) + " " + c.name + " " + c.embedding_path +
               "\n";
    for (const auto& c : mf.classes)
        if (!c.description.empty())
            out += "description " + std::to_string(c.class_id) + " " + c.description + "\n";
    for (const auto& v : mf.videos) {
        out += "video " + v.video_id + " " + std::to_string(v.class_id);
        for (const auto& [stream, path] : v.stream_paths) out += " " + stream + "=" + path;
        out += "\n";
    }
    const auto emit_split = [&out](const char* name, const std::vector<int>& ids) {
        // keep lines readable for large splits
        constexpr std::size_t kPerLine = 16;
        for (std::size_t i = 0; i < ids.size(); i += kPerLine) {
            out += std::string("split ") + name;
            for (std::size_t j = i; j < std::min(ids.size(), i + kPerLine); ++j)
                out += " " + std::to_string(ids[j]);
            out += "\n";
        }
    };
    emit_split("train", mf.split.train);
    emit_split("val", mf.split.val);
    emit_split("test", mf.split.test);
    return out;
}

inline void write_manifest(const DatasetManifest& mf, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot open manifest for writing: " + path.string());
    out << format_manifest(mf);
    if (!out) throw io_error("write failed: " + path.string());
}

}  // namespace zsslr

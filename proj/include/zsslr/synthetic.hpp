#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "zsslr/dataset.hpp"
#include "zsslr/errors.hpp"
#include "zsslr/feature_io.hpp"
#include "zsslr/manifest.hpp"
#include "zsslr/matrix.hpp"
#include "zsslr/numerics.hpp"
#include "zsslr/rng.hpp"

namespace zsslr {

// Synthetic benchmark generator. A hidden linear map M (the "planting") sends
// class embeddings to feature space; every video of class c is a short
// sequence whose rows scatter around M*phi_c with zero time-sum jitter, so the
// temporal average recovers M*phi_c up to the per-video noise. With
// noise_sigma 0 the classes are exactly linearly separable and a trained
// bilinear model must recover the planting.
//
// Class embeddings are unit vectors sharing a common mean direction with
// weight shared_mean_weight, mimicking the tight cone that sentence encoders
// produce; the rest of each embedding is an independent uniform direction.
// All feature and embedding values are rounded to float32 so the in-memory
// dataset matches its on-disk round trip bit for bit.

struct SyntheticConfig {
    std::size_t feature_dim = 32;
    std::size_t embedding_dim = 16;
    std::size_t train_classes = 40;
    std::size_t val_classes = 10;
    std::size_t test_classes = 10;
    std::size_t videos_per_class = 20;
    // When set, the split's videos are spread over its classes as evenly as
    // possible so the total comes out exact (overrides videos_per_class).
    std::optional<std::size_t> train_videos, val_videos, test_videos;
    std::size_t time_steps = 5;
    double noise_sigma = 0.0;      // stddev of the per-video offset from M*phi
    double temporal_jitter = 0.1;  // scale of the zero-sum within-video variation
    double shared_mean_weight = 0.5;
    bool orthogonal_embeddings = false;
    std::vector<std::string> streams = {"body"};
    std::uint64_t seed = 1;
    std::optional<Matrix> class_embeddings;  // rows = classes, cols = embedding_dim
};

struct SyntheticDataset {
    Dataset dataset;
    Matrix planting;        // feature_dim x embedding_dim, the hidden map
    Matrix raw_embeddings;  // classes x embedding_dim, exactly as written to disk
};

namespace detail {

inline double to_f32(double x) { return static_cast<double>(static_cast<float>(x)); }

inline void validate_synthetic_config(const SyntheticConfig& cfg) {
    if (cfg.feature_dim == 0 || cfg.embedding_dim == 0)
        throw config_error("synthetic: dimensions must be positive");
    if (cfg.train_classes == 0 || cfg.val_classes == 0 || cfg.test_classes == 0)
        throw config_error("synthetic: every split needs at least one class");
    if (cfg.time_steps == 0) throw config_error("synthetic: time_steps must be positive");
    if (!(cfg.noise_sigma >= 0.0)) throw config_error("synthetic: noise_sigma must be >= 0");
    if (!(cfg.temporal_jitter >= 0.0))
        throw config_error("synthetic: temporal_jitter must be >= 0");
    if (!(cfg.shared_mean_weight >= 0.0) || cfg.shared_mean_weight >= 1.0)
        throw config_error("synthetic: shared_mean_weight must be in [0, 1)");
    if (cfg.streams.empty()) throw config_error("synthetic: at least one stream");
    std::set<std::string> uniq(cfg.streams.begin(), cfg.streams.end());
    if (uniq.size() != cfg.streams.size())
        throw config_error("synthetic: stream names must be unique");
    const std::size_t total = cfg.train_classes + cfg.val_classes + cfg.test_classes;
    if (cfg.orthogonal_embeddings && total > cfg.embedding_dim)
        throw config_error("synthetic: orthogonal embeddings need classes <= embedding_dim (" +
                           std::to_string(total) + " > " +
                           std::to_string(cfg.embedding_dim) + ")");
    if (cfg.class_embeddings) {
        if (cfg.class_embeddings->rows() != total ||
            cfg.class_embeddings->cols() != cfg.embedding_dim)
            throw config_error("synthetic: provided embeddings must be classes x embedding_dim");
    }
    if (!cfg.train_videos && cfg.videos_per_class == 0)
        throw config_error("synthetic: videos_per_class must be positive");
}

/// Unit embeddings, one row per class.
inline Matrix make_embeddings(const SyntheticConfig& cfg, SplitRng rng) {
    const std::size_t total = cfg.train_classes + cfg.val_classes + cfg.test_classes;
    const std::size_t m = cfg.embedding_dim;
    Matrix e(total, m);

    if (cfg.class_embeddings) {
        for (std::size_t c = 0; c < total; ++c) {
            Vector row(cfg.class_embeddings->row(c).begin(), cfg.class_embeddings->row(c).end());
            row = l2_normalize(row);
            for (std::size_t j = 0; j < m; ++j) e(c, j) = row[j];
        }
        return e;
    }

    if (cfg.orthogonal_embeddings) {
        // Gram-Schmidt on gaussian rows; total <= m was checked above.
        std::vector<Vector> basis;
        while (basis.size() < total) {
            Vector v(m);
            for (double& x : v) x = rng.normal();
            for (const auto& b : basis) add_scaled(v, b, -dot(v, b));
            if (norm2(v) < 1e-8) continue;  // essentially impossible; redraw
            basis.push_back(l2_normalize(v));
        }
        for (std::size_t c = 0; c < total; ++c)
            for (std::size_t j = 0; j < m; ++j) e(c, j) = basis[c][j];
        return e;
    }

    const double alpha = cfg.shared_mean_weight;
    if (alpha > 0.0 && m < 2)
        throw config_error("synthetic: shared_mean_weight needs embedding_dim >= 2");
    const double beta = std::sqrt(1.0 - alpha * alpha);

    // Random rotation so the shared direction is not a coordinate axis.
    std::vector<Vector> q;
    while (q.size() < m) {
        Vector v(m);
        for (double& x : v) x = rng.normal();
        for (const auto& b : q) add_scaled(v, b, -dot(v, b));
        if (norm2(v) < 1e-8) continue;
        q.push_back(l2_normalize(v));
    }

    for (std::size_t c = 0; c < total; ++c) {
        Vector local(alpha > 0.0 ? m - 1 : m);
        double n = 0.0;
        while (n == 0.0) {
            for (double& x : local) x = rng.normal();
            n = norm2(local);
        }
        for (double& x : local) x /= n;
        Vector raw(m, 0.0);
        if (alpha > 0.0) {
            for (std::size_t j = 0; j + 1 < m; ++j) raw[j] = beta * local[j];
            raw[m - 1] = alpha;
        } else {
            raw = local;
        }
        for (std::size_t j = 0; j < m; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < m; ++k) s += q[k][j] * raw[k];
            e(c, j) = s;
        }
    }
    return e;
}

inline std::optional<std::pair<std::size_t, std::size_t>> find_duplicate_embeddings(
    const Matrix& e) {
    for (std::size_t a = 0; a < e.rows(); ++a)
        for (std::size_t b = a + 1; b < e.rows(); ++b) {
            double d2 = 0.0;
            for (std::size_t j = 0; j < e.cols(); ++j) {
                const double d = e(a, j) - e(b, j);
                d2 += d * d;
            }
            if (d2 < 1e-18) return std::make_pair(a, b);
        }
    return std::nullopt;
}

/// At noise 0 a video's temporal average sits exactly on M*phi_c, so the
/// benchmark is only honest if the planting ranks every class first among its
/// own split, with a margin comfortably above float32 rounding error.
inline bool planting_separates(const Matrix& m, const Matrix& raw,
                               const std::vector<std::pair<std::size_t, std::size_t>>& splits) {
    constexpr double kRelMargin = 1e-5;
    std::vector<Vector> protos(raw.rows());
    for (std::size_t c = 0; c < raw.rows(); ++c)
        protos[c] = matvec(m, Vector(raw.row(c).begin(), raw.row(c).end()));
    for (const auto& [first, last] : splits) {
        if (last - first < 2) continue;
        for (std::size_t y = first; y < last; ++y) {
            const double own = dot(protos[y], protos[y]);
            double best_other = -std::numeric_limits<double>::infinity();
            double scale = std::max(1.0, own);
            for (std::size_t c = first; c < last; ++c) {
                if (c == y) continue;
                const double s = dot(protos[y], protos[c]);
                best_other = std::max(best_other, s);
                scale = std::max(scale, std::abs(s));
            }
            if (own - best_other < kRelMargin * scale) return false;
        }
    }
    return true;
}

/// Spread `total` videos over `classes` so counts differ by at most one.
inline std::vector<std::size_t> spread_counts(std::size_t total, std::size_t classes) {
    std::vector<std::size_t> counts(classes, total / classes);
    for (std::size_t i = 0; i < total % classes; ++i) ++counts[i];
    return counts;
}

}  // namespace detail

inline SyntheticDataset generate_synthetic(const SyntheticConfig& cfg) {
    detail::validate_synthetic_config(cfg);
    const std::size_t total_classes = cfg.train_classes + cfg.val_classes + cfg.test_classes;
    const SplitRng root(cfg.seed);

    SyntheticDataset out;
    out.planting = Matrix(cfg.feature_dim, cfg.embedding_dim);

    const bool fixed_embeddings = cfg.class_embeddings.has_value();
    Matrix fixed_raw;
    if (fixed_embeddings) {
        fixed_raw = detail::make_embeddings(cfg, root.child(2));
        for (double& x : fixed_raw.values()) x = detail::to_f32(x);
        if (const auto dup = detail::find_duplicate_embeddings(fixed_raw))
            throw config_error("synthetic: classes " + std::to_string(dup->first) + " and " +
                               std::to_string(dup->second) +
                               " have identical embeddings and cannot be separated");
    }

    const std::vector<std::pair<std::size_t, std::size_t>> split_ranges = {
        {0, cfg.train_classes},
        {cfg.train_classes, cfg.train_classes + cfg.val_classes},
        {cfg.train_classes + cfg.val_classes, total_classes}};

    // Draw plantings (and embeddings, unless given) until the noiseless
    // prototypes are separable; the attempt index keys the child streams, so a
    // given seed always lands on the same accepted draw. Noise-free datasets
    // promise exact recoverability, so for them an unseparable configuration
    // is an error; noisy ones settle for the first draw.
    const auto draw_attempt = [&](std::uint64_t attempt) {
        SplitRng plant_rng = root.child(1).child(attempt);
        for (double& x : out.planting.values()) x = plant_rng.normal();
        if (fixed_embeddings) {
            out.raw_embeddings = fixed_raw;
            return true;
        }
        out.raw_embeddings = detail::make_embeddings(cfg, root.child(2).child(attempt));
        for (double& x : out.raw_embeddings.values()) x = detail::to_f32(x);
        return !detail::find_duplicate_embeddings(out.raw_embeddings).has_value();
    };
    bool accepted = false;
    for (std::uint64_t attempt = 0; attempt < 64 && !accepted; ++attempt)
        accepted = draw_attempt(attempt) &&
                   detail::planting_separates(out.planting, out.raw_embeddings, split_ranges);
    if (!accepted) {
        if (cfg.noise_sigma == 0.0)
            throw config_error(
                "synthetic: could not find a separable planting for this configuration; "
                "use fewer classes per split, a larger feature_dim, or nonzero noise_sigma");
        draw_attempt(0);
    }
    const Matrix& raw = out.raw_embeddings;

    Dataset& ds = out.dataset;
    ds.feature_dim = cfg.feature_dim;
    ds.embedding_dim = cfg.embedding_dim;
    ds.streams = cfg.streams;

    for (std::size_t c = 0; c < total_classes; ++c) {
        ClassRecord rec;
        rec.class_id = static_cast<int>(c);
        char buf[32];
        std::snprintf(buf, sizeof buf, "sign_%04u", static_cast<unsigned>(c));
        rec.name = buf;
        rec.description = "synthetic sign number " + std::to_string(c);
        Vector e(raw.row(c).begin(), raw.row(c).end());
        rec.embedding = l2_normalize(e);  // matches what loading the file produces
        ds.classes.push_back(std::move(rec));
    }

    for (std::size_t c = 0; c < cfg.train_classes; ++c)
        ds.split.train.push_back(static_cast<int>(c));
    for (std::size_t c = 0; c < cfg.val_classes; ++c)
        ds.split.val.push_back(static_cast<int>(cfg.train_classes + c));
    for (std::size_t c = 0; c < cfg.test_classes; ++c)
        ds.split.test.push_back(static_cast<int>(cfg.train_classes + cfg.val_classes + c));

    std::vector<std::size_t> counts(total_classes, cfg.videos_per_class);
    if (cfg.train_videos || cfg.val_videos || cfg.test_videos) {
        const auto fill = [&](std::optional<std::size_t> total, std::size_t first,
                              std::size_t n) {
            const auto share =
                detail::spread_counts(total.value_or(cfg.videos_per_class * n), n);
            for (std::size_t i = 0; i < n; ++i) counts[first + i] = share[i];
        };
        fill(cfg.train_videos, 0, cfg.train_classes);
        fill(cfg.val_videos, cfg.train_classes, cfg.val_classes);
        fill(cfg.test_videos, cfg.train_classes + cfg.val_classes, cfg.test_classes);
    }

    const SplitRng videos_rng = root.child(3);
    std::size_t video_index = 0;
    for (std::size_t c = 0; c < total_classes; ++c) {
        const Vector phi(raw.row(c).begin(), raw.row(c).end());
        const Vector proto = matvec(out.planting, phi);
        for (std::size_t k = 0; k < counts[c]; ++k, ++video_index) {
            VideoRecord vr;
            char buf[32];
            std::snprintf(buf, sizeof buf, "v%06u", static_cast<unsigned>(video_index));
            vr.video_id = buf;
            vr.class_id = static_cast<int>(c);
            const SplitRng vid_rng = videos_rng.child(video_index);
            for (std::size_t s = 0; s < cfg.streams.size(); ++s) {
                SplitRng r = vid_rng.child(s);
                Vector offset(cfg.feature_dim, 0.0);
                for (double& x : offset) x = cfg.noise_sigma * r.normal();
                Matrix jitter(cfg.time_steps, cfg.feature_dim);
                for (double& x : jitter.values()) x = r.normal();
                for (std::size_t j = 0; j < cfg.feature_dim; ++j) {
                    double mean = 0.0;
                    for (std::size_t t = 0; t < cfg.time_steps; ++t) mean += jitter(t, j);
                    mean /= static_cast<double>(cfg.time_steps);
                    for (std::size_t t = 0; t < cfg.time_steps; ++t)
                        jitter(t, j) = cfg.temporal_jitter * (jitter(t, j) - mean);
                }
                Matrix seq(cfg.time_steps, cfg.feature_dim);
                for (std::size_t t = 0; t < cfg.time_steps; ++t)
                    for (std::size_t j = 0; j < cfg.feature_dim; ++j)
                        seq(t, j) = detail::to_f32(proto[j] + offset[j] + jitter(t, j));
                vr.streams.push_back(std::move(seq));
            }
            ds.videos.push_back(std::move(vr));
        }
    }
    return out;
}

/// Writes the dataset under `dir` (created if needed) and returns the manifest
/// that now describes it on disk.
inline DatasetManifest write_synthetic_dataset(const SyntheticDataset& sd,
                                               const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir / "classes");
    fs::create_directories(dir / "features");

    DatasetManifest mf;
    mf.base_dir = dir;
    mf.feature_dim = sd.dataset.feature_dim;
    mf.embedding_dim = sd.dataset.embedding_dim;
    mf.streams = sd.dataset.streams;
    mf.split = sd.dataset.split;

    for (std::size_t c = 0; c < sd.dataset.classes.size(); ++c) {
        const auto& rec = sd.dataset.classes[c];
        char buf[32];
        std::snprintf(buf, sizeof buf, "classes/c%04d.zsc1", rec.class_id);
        ManifestClass mc{rec.class_id, rec.name, buf, rec.description};
        Vector e(sd.raw_embeddings.row(c).begin(), sd.raw_embeddings.row(c).end());
        write_class_embedding(dir / buf, e);
        mf.classes.push_back(std::move(mc));
    }
    for (const auto& vr : sd.dataset.videos) {
        ManifestVideo mv;
        mv.video_id = vr.video_id;
        mv.class_id = vr.class_id;
        for (std::size_t s = 0; s < sd.dataset.streams.size(); ++s) {
            const std::string rel =
                "features/" + vr.video_id + "_" + sd.dataset.streams[s] + ".zsf1";
            write_feature_sequence(dir / rel, vr.streams[s]);
            mv.stream_paths.emplace_back(sd.dataset.streams[s], rel);
        }
        mf.videos.push_back(std::move(mv));
    }
    write_manifest(mf, dir / "manifest");
    return mf;
}

}  // namespace zsslr

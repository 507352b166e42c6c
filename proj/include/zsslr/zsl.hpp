#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "zsslr/dataset.hpp"
#include "zsslr/encoders.hpp"
#include "zsslr/errors.hpp"
#include "zsslr/matrix.hpp"
#include "zsslr/numerics.hpp"
#include "zsslr/rng.hpp"

namespace zsslr {

// ---------------------------------------------------------------------------
// Model types

enum class ModelKind { lle, eszsl, sae };

inline const char* to_string(ModelKind k) {
    switch (k) {
        case ModelKind::lle: return "lle";
        case ModelKind::eszsl: return "eszsl";
        case ModelKind::sae: return "sae";
    }
    throw config_error("unknown model kind");
}

inline ModelKind model_kind_from_string(const std::string& s) {
    if (s == "lle") return ModelKind::lle;
    if (s == "eszsl") return ModelKind::eszsl;
    if (s == "sae") return ModelKind::sae;
    throw config_error("unknown model kind '" + s + "' (expected lle, eszsl or sae)");
}

/// A fitted zero-shot model. The bilinear map w scores a video embedding
/// theta against a class embedding phi as theta' * w * phi; for sae the same
/// matrix doubles as the semantic projection (s_hat = w' * theta) and
/// classification ranks by cosine similarity instead.
struct CompatibilityModel {
    ModelKind kind = ModelKind::lle;
    EncoderConfig encoder;
    EncoderParams params;
    Matrix w;  // theta_dim x embedding_dim
    bool normalize_theta = false;

    void validate() const {
        encoder.validate();
        check_encoder_params(encoder, params);
        if (w.rows() != encoder.theta_dim())
            throw config_error("model: w rows do not match the encoder output dim");
        if (w.cols() == 0) throw config_error("model: empty compatibility matrix");
        if (!w.all_finite()) throw config_error("model: non-finite compatibility matrix");
    }
};

struct TrainConfig {
    double lambda = 1e-3;  // regularization weight
    double gamma = 1e-3;   // eszsl feature-side ridge
    bool auto_hyper = false;  // sweep the default grid, pick on validation top-1
    double learning_rate = 0.01;
    double momentum = 0.9;
    std::size_t batch_size = 32;
    std::size_t max_epochs = 500;
    std::size_t patience = 20;  // epochs without validation improvement
    std::uint64_t seed = 1;
    bool normalize_theta = false;

    void validate() const {
        if (!(learning_rate > 0.0)) throw config_error("train: learning rate must be positive");
        if (lambda < 0.0) throw config_error("train: lambda must be nonnegative");
        if (gamma < 0.0) throw config_error("train: gamma must be nonnegative");
        if (momentum < 0.0 || momentum >= 1.0)
            throw config_error("train: momentum must lie in [0, 1)");
        if (batch_size == 0) throw config_error("train: batch size must be positive");
        if (max_epochs == 0) throw config_error("train: need at least one epoch");
    }
};

/// Per-kind hyperparameter sweep. Lambda zero is only meaningful where the
/// closed form tolerates it; sae needs a strictly positive weight, so its
/// grid shifts up one decade.
inline std::vector<double> default_lambda_grid(ModelKind kind) {
    if (kind == ModelKind::sae) return {1e-4, 1e-3, 1e-2, 1e-1, 1.0};
    return {0.0, 1e-4, 1e-3, 1e-2, 1e-1};
}

// ---------------------------------------------------------------------------
// Scoring and classification

inline double score(const CompatibilityModel& model, const Vector& theta, const Vector& phi) {
    if (theta.size() != model.w.rows())
        throw config_error("score: video embedding does not match w rows");
    if (phi.size() != model.w.cols())
        throw config_error("score: class embedding does not match w cols");
    return dot(theta, matvec(model.w, phi));
}

struct ScoredClass {
    int class_id = 0;
    double score = 0.0;
};

namespace detail {

inline double cosine(const Vector& a, const Vector& b) {
    const double na = norm2(a), nb = norm2(b);
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot(a, b) / (na * nb);
}

/// Pick the encoder's streams out of a dataset video, in encoder order.
inline std::vector<Matrix> select_streams(const Dataset& ds, const VideoRecord& video,
                                          const EncoderConfig& cfg) {
    std::vector<Matrix> out;
    out.reserve(cfg.streams.size());
    for (const std::string& name : cfg.streams) {
        const auto it = std::find(ds.streams.begin(), ds.streams.end(), name);
        if (it == ds.streams.end())
            throw config_error("encoder stream '" + name + "' is not in the dataset");
        out.push_back(video.streams[static_cast<std::size_t>(it - ds.streams.begin())]);
    }
    return out;
}

inline Vector model_theta(const CompatibilityModel& model, const std::vector<Matrix>& streams) {
    Vector theta = encode_video(model.encoder, model.params, streams);
    if (model.normalize_theta) theta = l2_normalize(theta);
    return theta;
}

}  // namespace detail

/// Rank candidate classes for an encoded video, best first. Ties break
/// deterministically towards the smaller class id.
inline std::vector<ScoredClass> rank_candidates(const CompatibilityModel& model,
                                                const Vector& theta,
                                                const std::vector<ClassRecord>& candidates) {
    if (candidates.empty()) throw config_error("classify: empty candidate set");
    std::vector<ScoredClass> out;
    out.reserve(candidates.size());
    if (model.kind == ModelKind::sae) {
        const Vector s_hat = matvec_t(model.w, theta);  // project into semantic space
        for (const ClassRecord& c : candidates)
            out.push_back({c.class_id, detail::cosine(s_hat, c.embedding)});
    } else {
        for (const ClassRecord& c : candidates)
            out.push_back({c.class_id, score(model, theta, c.embedding)});
    }
    std::sort(out.begin(), out.end(), [](const ScoredClass& a, const ScoredClass& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.class_id < b.class_id;
    });
    return out;
}

inline std::vector<ScoredClass> classify(const CompatibilityModel& model,
                                         const std::vector<Matrix>& streams,
                                         const std::vector<ClassRecord>& candidates) {
    return rank_candidates(model, detail::model_theta(model, streams), candidates);
}

inline std::vector<ScoredClass> classify(const CompatibilityModel& model, const Dataset& ds,
                                         const VideoRecord& video,
                                         const std::vector<ClassRecord>& candidates) {
    return classify(model, detail::select_streams(ds, video, model.encoder), candidates);
}

/// Candidate records for a list of class ids (the usual split-as-candidates).
inline std::vector<ClassRecord> gather_classes(const Dataset& ds,
                                               const std::vector<int>& ids) {
    std::vector<ClassRecord> out;
    out.reserve(ids.size());
    for (int id : ids) out.push_back(ds.class_by_id(id));
    return out;
}

// ---------------------------------------------------------------------------
// LLE: cross-entropy over seen classes with a Frobenius penalty

struct LleSample {
    Vector theta;
    std::size_t label = 0;  // row index into the seen-class embedding matrix
};

struct LleGradients {
    double loss = 0.0;
    Matrix grad_w;
    std::vector<Vector> grad_theta;  // per sample, enables encoder training
};

/// Loss and analytic gradients of
///   -(1/N) sum_i log softmax(theta_i' W phi_.)[label_i] + lambda ||W||_F^2
/// over a batch. `seen` holds one embedding per row.
inline LleGradients lle_objective_and_gradient(const Matrix& w,
                                               std::span<const LleSample> batch,
                                               const Matrix& seen, double lambda) {
    if (batch.empty()) throw config_error("lle: empty batch");
    if (seen.rows() == 0) throw config_error("lle: no seen classes");
    if (seen.cols() != w.cols()) throw config_error("lle: embedding dim does not match w");
    if (lambda < 0.0) throw config_error("lle: lambda must be nonnegative");

    const std::size_t classes = seen.rows();
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    LleGradients out;
    out.grad_w = Matrix(w.rows(), w.cols());
    out.grad_theta.reserve(batch.size());

    for (const LleSample& sample : batch) {
        if (sample.label >= classes)
            throw config_error("lle: sample class is missing from the seen set");
        if (sample.theta.size() != w.rows())
            throw config_error("lle: video embedding does not match w rows");
        const Vector u = matvec_t(w, sample.theta);  // W' theta, in embedding space
        const Vector z = matvec(seen, u);            // score against every seen class
        double hi = z[0];
        for (double x : z) {
            if (!std::isfinite(x)) throw numeric_error("lle: non-finite score");
            hi = std::max(hi, x);
        }
        double sum = 0.0;
        for (double x : z) sum += std::exp(x - hi);
        out.loss += (hi + std::log(sum) - z[sample.label]) * inv_n;

        Vector g(classes);  // d loss / d z, already scaled by 1/N
        for (std::size_t c = 0; c < classes; ++c) g[c] = std::exp(z[c] - hi) / sum * inv_n;
        g[sample.label] -= inv_n;

        const Vector v = matvec_t(seen, g);  // sum_c g_c phi_c
        add_outer(out.grad_w, sample.theta, v);
        out.grad_theta.push_back(matvec(w, v));
    }
    out.loss += lambda * frobenius_norm(w) * frobenius_norm(w);
    add_scaled(out.grad_w, w, 2.0 * lambda);
    return out;
}

// ---------------------------------------------------------------------------
// Training

struct EpochRecord {
    std::size_t epoch = 0;       // 1-based
    double train_loss = 0.0;     // sample-weighted mean over the epoch's batches
    double val_top1 = 0.0;       // per-class mean on the validation split
};

struct TrainLog {
    std::vector<EpochRecord> epochs;
    std::size_t best_epoch = 0;
    double best_val_top1 = 0.0;
    bool early_stopped = false;
};

struct TrainedModel {
    CompatibilityModel model;
    TrainLog log;
    double chosen_lambda = 0.0;
    double chosen_gamma = 0.0;
};

namespace detail {

struct LabeledVideo {
    std::size_t video = 0;  // index into Dataset::videos
    std::size_t label = 0;  // index into the split's class-id list
};

inline std::vector<LabeledVideo> labeled_videos(const Dataset& ds,
                                                const std::vector<int>& class_ids) {
    std::vector<LabeledVideo> out;
    for (std::size_t c = 0; c < class_ids.size(); ++c)
        for (std::size_t idx : ds.videos_in({class_ids[c]})) out.push_back({idx, c});
    return out;
}

/// Seen-class embeddings as rows, in split order.
inline Matrix embedding_rows(const Dataset& ds, const std::vector<int>& class_ids) {
    Matrix s(class_ids.size(), ds.embedding_dim);
    for (std::size_t c = 0; c < class_ids.size(); ++c) {
        const Vector& e = ds.class_by_id(class_ids[c]).embedding;
        std::copy(e.begin(), e.end(), s.row(c).begin());
    }
    return s;
}

/// Per-class mean top-1 over one split, candidates = the split's own classes.
/// Classes without videos are skipped (their accuracy is undefined).
inline double split_top1(const CompatibilityModel& model, const Dataset& ds,
                         const std::vector<int>& class_ids) {
    const std::vector<ClassRecord> candidates = gather_classes(ds, class_ids);
    double acc = 0.0;
    std::size_t counted = 0;
    for (int id : class_ids) {
        const auto vids = ds.videos_in({id});
        if (vids.empty()) continue;
        std::size_t hits = 0;
        for (std::size_t idx : vids)
            if (classify(model, ds, ds.videos[idx], candidates)[0].class_id == id) ++hits;
        acc += static_cast<double>(hits) / static_cast<double>(vids.size());
        ++counted;
    }
    if (counted == 0) throw config_error("no videos in the evaluation split");
    return acc / static_cast<double>(counted);
}

/// Gradient of the normalization y = x/|x| given dL/dy.
inline Vector l2_normalize_backward(const Vector& raw, const Vector& grad_out) {
    const double n = norm2(raw);
    if (n == 0.0) throw numeric_error("l2_normalize: zero vector");
    Vector unit(raw);
    for (double& x : unit) x /= n;
    const double along = dot(unit, grad_out);
    Vector g(grad_out);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = (g[i] - along * unit[i]) / n;
    return g;
}

}  // namespace detail

/// Mini-batch SGD with momentum over w and the encoder parameters, snapshotting
/// the parameters with the best validation top-1 (ties refresh the snapshot so
/// equally good later epochs win; patience counts strict improvements only).
inline TrainedModel train_lle(const Dataset& ds, const EncoderConfig& encoder_cfg,
                              const TrainConfig& cfg) {
    cfg.validate();
    encoder_cfg.validate();
    if (encoder_cfg.feature_dim != ds.feature_dim)
        throw config_error("train: encoder feature dim does not match the dataset");
    if (ds.split.train.empty()) throw config_error("train: empty train split");
    if (ds.split.val.empty()) throw config_error("train: empty validation split");

    const SplitRng root(cfg.seed);
    CompatibilityModel model;
    model.kind = ModelKind::lle;
    model.encoder = encoder_cfg;
    model.params = init_encoder_params(encoder_cfg, root.child(2));
    model.normalize_theta = cfg.normalize_theta;

    const std::size_t d_theta = encoder_cfg.theta_dim();
    model.w = Matrix(d_theta, ds.embedding_dim);
    {
        SplitRng wrng = root.child(1);
        const double bound = 1.0 / std::sqrt(static_cast<double>(d_theta));
        for (double& x : model.w.values()) x = wrng.uniform(-bound, bound);
    }

    const auto samples = detail::labeled_videos(ds, ds.split.train);
    const Matrix seen = detail::embedding_rows(ds, ds.split.train);
    const std::size_t n = samples.size();
    const bool trainable_encoder = parameter_count(model.params) > 0;

    Matrix w_velocity(d_theta, ds.embedding_dim);
    EncoderParams p_velocity = zero_like(model.params);

    TrainedModel out;
    out.chosen_lambda = cfg.lambda;
    CompatibilityModel best = model;
    double best_val = -1.0;
    std::size_t stale = 0;

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        SplitRng shuffle_rng = root.child(3).child(epoch);
        shuffle_rng.shuffle(order);

        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t count = std::min(cfg.batch_size, n - start);
            std::vector<LleSample> batch(count);
            std::vector<VideoTrace> traces(count);
            std::vector<Vector> raw_thetas(count);
            std::vector<std::vector<Matrix>> batch_streams(count);
            for (std::size_t i = 0; i < count; ++i) {
                const auto& s = samples[order[start + i]];
                batch_streams[i] =
                    detail::select_streams(ds, ds.videos[s.video], encoder_cfg);
                raw_thetas[i] = encode_video(encoder_cfg, model.params, batch_streams[i],
                                             trainable_encoder ? &traces[i] : nullptr);
                batch[i].theta = cfg.normalize_theta ? l2_normalize(raw_thetas[i])
                                                     : raw_thetas[i];
                batch[i].label = s.label;
            }
            LleGradients grads =
                lle_objective_and_gradient(model.w, batch, seen, cfg.lambda);
            if (!std::isfinite(grads.loss))
                throw numeric_error("lle training diverged (non-finite loss) at epoch " +
                                    std::to_string(epoch));
            epoch_loss += grads.loss * static_cast<double>(count);

            scale(w_velocity, cfg.momentum);
            add_scaled(w_velocity, grads.grad_w, -cfg.learning_rate);
            add_scaled(model.w, w_velocity, 1.0);

            if (trainable_encoder) {
                EncoderParams p_grads = zero_like(model.params);
                for (std::size_t i = 0; i < count; ++i) {
                    Vector d_theta_i = cfg.normalize_theta
                                           ? detail::l2_normalize_backward(
                                                 raw_thetas[i], grads.grad_theta[i])
                                           : grads.grad_theta[i];
                    encoder_backward(encoder_cfg, model.params, traces[i], d_theta_i,
                                     p_grads);
                }
                const auto pv = parameter_spans(p_velocity);
                const auto pg = parameter_spans(p_grads);
                const auto pp = parameter_spans(model.params);
                for (std::size_t b = 0; b < pv.size(); ++b)
                    for (std::size_t k = 0; k < pv[b].size(); ++k) {
                        pv[b][k] = cfg.momentum * pv[b][k] - cfg.learning_rate * pg[b][k];
                        pp[b][k] += pv[b][k];
                    }
            }
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = epoch_loss / static_cast<double>(n);
        rec.val_top1 = detail::split_top1(model, ds, ds.split.val);
        out.log.epochs.push_back(rec);

        if (rec.val_top1 >= best_val) {
            if (rec.val_top1 > best_val)
                stale = 0;
            else
                ++stale;
            best_val = rec.val_top1;
            best = model;
            out.log.best_epoch = epoch;
        } else {
            ++stale;
        }
        if (stale >= cfg.patience) {
            out.log.early_stopped = true;
            break;
        }
    }

    out.log.best_val_top1 = best_val;
    out.model = std::move(best);
    out.model.validate();
    return out;
}

// ---------------------------------------------------------------------------
// ESZSL: closed-form bilinear regression

/// W = (X X' + gamma I)^-1  X Y S'  (S S' + lambda I)^-1 with X carrying one
/// video embedding per column, Y one -1/+1 row per video and S one class
/// embedding per column.
inline Matrix fit_eszsl(const Matrix& x, const Matrix& y, const Matrix& s, double gamma,
                        double lambda) {
    if (x.cols() != y.rows()) throw config_error("eszsl: X columns must match Y rows");
    if (y.cols() != s.cols()) throw config_error("eszsl: Y columns must match S columns");
    if (gamma < 0.0 || lambda < 0.0)
        throw config_error("eszsl: regularizers must be nonnegative");

    Matrix a = matmul_bt(x, x);
    for (std::size_t i = 0; i < a.rows(); ++i) a(i, i) += gamma;
    Matrix b = matmul_bt(s, s);
    for (std::size_t i = 0; i < b.rows(); ++i) b(i, i) += lambda;

    const Matrix r = matmul_bt(matmul(x, y), s);  // X Y S', d x m
    const Matrix z = solve_spd(a, r);
    return transpose(solve_spd(b, transpose(z)));
}

/// The objective fit_eszsl minimizes; exposed for stationarity checks.
inline double eszsl_objective(const Matrix& x, const Matrix& y, const Matrix& s,
                              const Matrix& w, double gamma, double lambda) {
    const Matrix xtws = matmul(matmul(transpose(x), w), s);
    double obj = 0.0;
    for (std::size_t i = 0; i < y.rows(); ++i)
        for (std::size_t j = 0; j < y.cols(); ++j) {
            const double r = xtws(i, j) - y(i, j);
            obj += r * r;
        }
    const double ws = frobenius_norm(matmul(w, s));
    const double xtw = frobenius_norm(matmul(transpose(x), w));
    const double wf = frobenius_norm(w);
    return obj + gamma * ws * ws + lambda * xtw * xtw + gamma * lambda * wf * wf;
}

/// One -1/+1 row per sample over the seen classes.
inline Matrix eszsl_labels(const std::vector<std::size_t>& labels, std::size_t classes) {
    Matrix y(labels.size(), classes, Vector(labels.size() * classes, -1.0));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= classes) throw config_error("eszsl: label out of range");
        y(i, labels[i]) = 1.0;
    }
    return y;
}

// ---------------------------------------------------------------------------
// SAE: semantic autoencoder via a Sylvester solve

/// Solve S S' W + W (lambda X X') = (1 + lambda) S X' for the m x d projection
/// W; the stationarity condition of min_W |X - W'S|^2 + lambda |WX - S|^2.
/// X holds one video embedding per column, S the matching class embedding.
inline Matrix fit_sae(const Matrix& x, const Matrix& s, double lambda) {
    if (x.cols() != s.cols()) throw config_error("sae: X and S must pair up per sample");
    if (!(lambda > 0.0)) throw config_error("sae: lambda must be positive");
    const Matrix a = matmul_bt(s, s);
    Matrix b = matmul_bt(x, x);
    scale(b, lambda);
    Matrix c = matmul_bt(s, x);
    scale(c, 1.0 + lambda);
    return solve_sylvester(a, b, c);
}

// ---------------------------------------------------------------------------
// Dataset-level fitting

namespace detail {

/// Train-split video embeddings as columns, plus per-sample labels.
struct EncodedSplit {
    Matrix x;  // theta_dim x N
    std::vector<std::size_t> labels;
};

inline EncodedSplit encode_split(const Dataset& ds, const EncoderConfig& cfg,
                                 const EncoderParams& params, bool normalize,
                                 const std::vector<int>& class_ids) {
    const auto samples = labeled_videos(ds, class_ids);
    if (samples.empty()) throw config_error("fit: split has no videos");
    EncodedSplit out;
    out.x = Matrix(cfg.theta_dim(), samples.size());
    out.labels.reserve(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        Vector theta = encode_video(
            cfg, params, select_streams(ds, ds.videos[samples[i].video], cfg));
        if (normalize) theta = l2_normalize(theta);
        for (std::size_t j = 0; j < theta.size(); ++j) out.x(j, i) = theta[j];
        out.labels.push_back(samples[i].label);
    }
    return out;
}

}  // namespace detail

/// Fit one model with the given hyperparameters (no selection sweep).
inline TrainedModel fit_model(const Dataset& ds, const EncoderConfig& encoder_cfg,
                              ModelKind kind, const TrainConfig& cfg) {
    cfg.validate();
    encoder_cfg.validate();
    if (kind == ModelKind::lle) return train_lle(ds, encoder_cfg, cfg);
    if (encoder_cfg.feature_dim != ds.feature_dim)
        throw config_error("fit: encoder feature dim does not match the dataset");
    if (ds.split.train.empty()) throw config_error("fit: empty train split");

    CompatibilityModel model;
    model.kind = kind;
    model.encoder = encoder_cfg;
    model.params = init_encoder_params(encoder_cfg, SplitRng(cfg.seed).child(2));
    model.normalize_theta = cfg.normalize_theta;

    const auto enc = detail::encode_split(ds, encoder_cfg, model.params,
                                          cfg.normalize_theta, ds.split.train);
    if (kind == ModelKind::eszsl) {
        const Matrix s = transpose(detail::embedding_rows(ds, ds.split.train));
        const Matrix y = eszsl_labels(enc.labels, ds.split.train.size());
        model.w = fit_eszsl(enc.x, y, s, cfg.gamma, cfg.lambda);
    } else {
        Matrix s(ds.embedding_dim, enc.labels.size());  // per-sample class embedding
        const Matrix rows = detail::embedding_rows(ds, ds.split.train);
        for (std::size_t i = 0; i < enc.labels.size(); ++i)
            for (std::size_t j = 0; j < ds.embedding_dim; ++j)
                s(j, i) = rows(enc.labels[i], j);
        model.w = transpose(fit_sae(enc.x, s, cfg.lambda));  // store as theta_dim x m
    }
    model.validate();

    TrainedModel out;
    out.model = std::move(model);
    out.chosen_lambda = cfg.lambda;
    out.chosen_gamma = kind == ModelKind::eszsl ? cfg.gamma : 0.0;
    return out;
}

/// Fit with hyperparameter selection on validation top-1 when requested.
/// Candidates that fail numerically (singular unregularized systems) are
/// skipped; ties keep the first (smallest) grid entry.
inline TrainedModel fit_model_auto(const Dataset& ds, const EncoderConfig& encoder_cfg,
                                   ModelKind kind, const TrainConfig& cfg) {
    if (!cfg.auto_hyper) return fit_model(ds, encoder_cfg, kind, cfg);
    if (ds.split.val.empty()) throw config_error("fit: hyperparameter selection needs a validation split");

    const std::vector<double> grid = default_lambda_grid(kind);
    std::vector<double> gammas = kind == ModelKind::eszsl ? grid : std::vector<double>{cfg.gamma};

    std::optional<TrainedModel> best;
    double best_val = -1.0;
    std::string last_error;
    for (double lambda : grid) {
        for (double gamma : gammas) {
            TrainConfig candidate = cfg;
            candidate.auto_hyper = false;
            candidate.lambda = lambda;
            candidate.gamma = gamma;
            try {
                TrainedModel fitted = fit_model(ds, encoder_cfg, kind, candidate);
                const double val = detail::split_top1(fitted.model, ds, ds.split.val);
                if (val > best_val) {
                    best_val = val;
                    best = std::move(fitted);
                }
            } catch (const numeric_error& e) {
                last_error = e.what();
            }
        }
    }
    if (!best)
        throw numeric_error("fit: every hyperparameter candidate failed (last: " +
                            last_error + ")");
    return std::move(*best);
}

}  // namespace zsslr

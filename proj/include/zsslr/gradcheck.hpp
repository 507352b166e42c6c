#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "zsslr/encoders.hpp"
#include "zsslr/matrix.hpp"
#include "zsslr/rng.hpp"
#include "zsslr/zsl.hpp"

namespace zsslr {

// Finite-difference verification of every analytic gradient in the library.
// Each suite perturbs one coordinate at a time (central differences) and
// reports the worst relative error it saw; the expected ceiling at these
// sizes is 1e-4. Problem sizes are kept tiny (d, h <= 8, T <= 6, <= 6
// classes) so the whole battery runs in seconds.

struct GradCheckResult {
    std::string name;
    std::size_t checks = 0;
    double max_rel_err = 0.0;
};

namespace detail {

inline double gc_rel_err(double analytic, double numeric) {
    const double scale = std::max(1e-3, std::abs(analytic) + std::abs(numeric));
    return std::abs(analytic - numeric) / scale;
}

/// Central difference of f with respect to one in-place slot.
inline double gc_fd_slot(double& slot, const std::function<double()>& f,
                         double eps = 1e-5) {
    const double saved = slot;
    slot = saved + eps;
    const double hi = f();
    slot = saved - eps;
    const double lo = f();
    slot = saved;
    return (hi - lo) / (2.0 * eps);
}

inline Matrix gc_random_matrix(std::size_t r, std::size_t c, SplitRng& rng) {
    Matrix m(r, c);
    for (double& x : m.values()) x = rng.uniform(-1.0, 1.0);
    return m;
}

inline Vector gc_random_vector(std::size_t n, SplitRng& rng) {
    Vector v(n);
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
    return v;
}

inline void gc_record(GradCheckResult& res, double analytic, double numeric) {
    res.max_rel_err = std::max(res.max_rel_err, gc_rel_err(analytic, numeric));
    ++res.checks;
}

}  // namespace detail

/// LSTM kernel gradients with a hidden width different from the input width,
/// so the free h0/c0 paths are exercised. Loss: sum_t u_t . h_t.
inline GradCheckResult check_lstm_kernel(const SplitRng& rng) {
    const std::size_t d = 3, h = 4, t_len = 5;
    SplitRng r = rng;
    SplitRng pr = r.child(0);
    LstmParams params = detail::init_lstm(d, h, pr);
    SplitRng dr = r.child(1);
    Matrix seq = detail::gc_random_matrix(t_len, d, dr);
    Vector h0 = detail::gc_random_vector(h, dr);
    Vector c0 = detail::gc_random_vector(h, dr);
    const Matrix upstream = detail::gc_random_matrix(t_len, h, dr);

    const auto loss = [&] {
        const LstmResult res = lstm_forward(params, seq, h0, c0);
        double acc = 0.0;
        for (std::size_t t = 0; t < t_len; ++t)
            for (std::size_t u = 0; u < h; ++u) acc += upstream(t, u) * res.hidden(t, u);
        return acc;
    };

    LstmTrace trace;
    lstm_forward(params, seq, h0, c0, &trace);
    LstmParams grads;
    grads.wi = Matrix(h, d); grads.ui = Matrix(h, h);
    grads.wf = Matrix(h, d); grads.uf = Matrix(h, h);
    grads.wo = Matrix(h, d); grads.uo = Matrix(h, h);
    grads.wg = Matrix(h, d); grads.ug = Matrix(h, h);
    grads.bi = Vector(h, 0.0); grads.bf = Vector(h, 0.0);
    grads.bo = Vector(h, 0.0); grads.bg = Vector(h, 0.0);
    Vector dh0, dc0;
    const Matrix dx = lstm_backward(params, trace, upstream, grads, dh0, dc0);

    GradCheckResult res{"lstm kernel (h != d)"};
    std::vector<std::span<double>> pspans, gspans;
    for_each_buffer(params, [&](auto& b) { pspans.push_back(detail::buffer_span(b)); });
    for_each_buffer(grads, [&](auto& b) { gspans.push_back(detail::buffer_span(b)); });
    for (std::size_t k = 0; k < pspans.size(); ++k)
        for (std::size_t i = 0; i < pspans[k].size(); ++i)
            detail::gc_record(res, gspans[k][i], detail::gc_fd_slot(pspans[k][i], loss));
    for (std::size_t i = 0; i < seq.values().size(); ++i)
        detail::gc_record(res, dx.values()[i], detail::gc_fd_slot(seq.values()[i], loss));
    for (std::size_t u = 0; u < h; ++u) {
        detail::gc_record(res, dh0[u], detail::gc_fd_slot(h0[u], loss));
        detail::gc_record(res, dc0[u], detail::gc_fd_slot(c0[u], loss));
    }
    return res;
}

/// GRU kernel gradients at h != d, same loss shape as the LSTM check.
inline GradCheckResult check_gru_kernel(const SplitRng& rng) {
    const std::size_t d = 3, h = 4, t_len = 5;
    SplitRng r = rng;
    SplitRng pr = r.child(0);
    GruParams params = detail::init_gru(d, h, pr);
    SplitRng dr = r.child(1);
    Matrix seq = detail::gc_random_matrix(t_len, d, dr);
    Vector h0 = detail::gc_random_vector(h, dr);
    const Matrix upstream = detail::gc_random_matrix(t_len, h, dr);

    const auto loss = [&] {
        const GruResult res = gru_forward(params, seq, h0);
        double acc = 0.0;
        for (std::size_t t = 0; t < t_len; ++t)
            for (std::size_t u = 0; u < h; ++u) acc += upstream(t, u) * res.hidden(t, u);
        return acc;
    };

    GruTrace trace;
    gru_forward(params, seq, h0, &trace);
    GruParams grads;
    grads.wz = Matrix(h, d); grads.uz = Matrix(h, h);
    grads.wr = Matrix(h, d); grads.ur = Matrix(h, h);
    grads.wn = Matrix(h, d); grads.un = Matrix(h, h);
    grads.bz = Vector(h, 0.0); grads.br = Vector(h, 0.0); grads.bn = Vector(h, 0.0);
    Vector dh0;
    const Matrix dx = gru_backward(params, trace, upstream, grads, dh0);

    GradCheckResult res{"gru kernel (h != d)"};
    std::vector<std::span<double>> pspans, gspans;
    for_each_buffer(params, [&](auto& b) { pspans.push_back(detail::buffer_span(b)); });
    for_each_buffer(grads, [&](auto& b) { gspans.push_back(detail::buffer_span(b)); });
    for (std::size_t k = 0; k < pspans.size(); ++k)
        for (std::size_t i = 0; i < pspans[k].size(); ++i)
            detail::gc_record(res, gspans[k][i], detail::gc_fd_slot(pspans[k][i], loss));
    for (std::size_t i = 0; i < seq.values().size(); ++i)
        detail::gc_record(res, dx.values()[i], detail::gc_fd_slot(seq.values()[i], loss));
    for (std::size_t u = 0; u < h; ++u)
        detail::gc_record(res, dh0[u], detail::gc_fd_slot(h0[u], loss));
    return res;
}

/// Full video-encoder gradients for one kind/aggregation pair: two streams of
/// different lengths, loss u . theta(v), parameters and inputs both probed.
/// The pooled initial state makes the input gradient include the h0/c0 path.
inline GradCheckResult check_video_encoder(EncoderKind kind, Aggregation agg,
                                           const SplitRng& rng) {
    EncoderConfig cfg;
    cfg.kind = kind;
    cfg.feature_dim = 4;
    cfg.streams = {"body", "hand"};
    cfg.aggregation = agg;

    SplitRng r = rng;
    EncoderParams params = init_encoder_params(cfg, r.child(0));
    SplitRng dr = r.child(1);
    std::vector<Matrix> streams;
    streams.push_back(detail::gc_random_matrix(5, cfg.feature_dim, dr));
    streams.push_back(detail::gc_random_matrix(3, cfg.feature_dim, dr));
    const Vector u = detail::gc_random_vector(cfg.theta_dim(), dr);

    const auto loss = [&] {
        const Vector theta = encode_video(cfg, params, streams);
        double acc = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) acc += u[i] * theta[i];
        return acc;
    };

    VideoTrace trace;
    encode_video(cfg, params, streams, &trace);
    EncoderParams grads = zero_like(params);
    const std::vector<Matrix> dx = encoder_backward(cfg, params, trace, u, grads);

    GradCheckResult res{std::string("encoder ") + to_string(kind) + " (" +
                        to_string(agg) + ")"};
    const auto pspans = parameter_spans(params);
    const auto gspans = parameter_spans(grads);
    for (std::size_t k = 0; k < pspans.size(); ++k)
        for (std::size_t i = 0; i < pspans[k].size(); ++i)
            detail::gc_record(res, gspans[k][i], detail::gc_fd_slot(pspans[k][i], loss));
    for (std::size_t s = 0; s < streams.size(); ++s)
        for (std::size_t i = 0; i < streams[s].values().size(); ++i)
            detail::gc_record(res, dx[s].values()[i],
                              detail::gc_fd_slot(streams[s].values()[i], loss));
    return res;
}

/// Cross-entropy objective gradients: d loss / d W over every entry and
/// d loss / d theta for every sample, against central differences.
inline GradCheckResult check_lle_gradients(const SplitRng& rng) {
    const std::size_t d = 5, m = 4, classes = 6, samples = 12;
    const double lambda = 0.01;
    SplitRng r = rng;
    SplitRng wr = r.child(0);
    Matrix w = detail::gc_random_matrix(d, m, wr);
    SplitRng sr = r.child(1);
    const Matrix seen = detail::gc_random_matrix(classes, m, sr);
    std::vector<LleSample> batch(samples);
    for (std::size_t i = 0; i < samples; ++i) {
        batch[i].theta = detail::gc_random_vector(d, sr);
        batch[i].label = sr.below(classes);
    }

    const auto loss = [&] {
        return lle_objective_and_gradient(w, batch, seen, lambda).loss;
    };
    const LleGradients grads = lle_objective_and_gradient(w, batch, seen, lambda);

    GradCheckResult res{"lle objective (w, theta)"};
    for (std::size_t i = 0; i < w.values().size(); ++i)
        detail::gc_record(res, grads.grad_w.values()[i],
                          detail::gc_fd_slot(w.values()[i], loss));
    for (std::size_t i = 0; i < samples; ++i)
        for (std::size_t j = 0; j < d; ++j)
            detail::gc_record(res, grads.grad_theta[i][j],
                              detail::gc_fd_slot(batch[i].theta[j], loss));
    return res;
}

/// The whole battery: recurrent kernels, every encoder kind and aggregation
/// mode, and the classification objective.
inline std::vector<GradCheckResult> run_gradient_suites(std::uint64_t seed) {
    const SplitRng root(seed);
    std::vector<GradCheckResult> out;
    out.push_back(check_lstm_kernel(root.child(1)));
    out.push_back(check_gru_kernel(root.child(2)));
    std::uint64_t label = 10;
    for (const EncoderKind kind : {EncoderKind::avgpool, EncoderKind::lstm,
                                   EncoderKind::gru, EncoderKind::bilstm})
        for (const Aggregation agg : {Aggregation::final_state, Aggregation::mean_over_time})
            out.push_back(check_video_encoder(kind, agg, root.child(label++)));
    out.push_back(check_lle_gradients(root.child(3)));
    return out;
}

inline double worst_rel_err(const std::vector<GradCheckResult>& results) {
    double worst = 0.0;
    for (const auto& r : results) worst = std::max(worst, r.max_rel_err);
    return worst;
}

}  // namespace zsslr

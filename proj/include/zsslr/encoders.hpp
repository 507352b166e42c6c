#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "zsslr/errors.hpp"
#include "zsslr/matrix.hpp"
#include "zsslr/rng.hpp"

namespace zsslr {

// Temporal encoders: turn one feature sequence per stream into a fixed video
// embedding theta(v). Recurrent kinds start from the average-pooled input
// (h0 = c0 = average_pool(seq)), which ties the hidden width to the feature
// width; the final hidden state is the default summary, the mean over time an
// alternative. Multi-stream videos are encoded per stream with independent
// parameters and concatenated in declared stream order.

enum class EncoderKind { avgpool, lstm, gru, bilstm };
enum class Aggregation { final_state, mean_over_time };

inline const char* to_string(EncoderKind k) {
    switch (k) {
        case EncoderKind::avgpool: return "avgpool";
        case EncoderKind::lstm: return "lstm";
        case EncoderKind::gru: return "gru";
        case EncoderKind::bilstm: return "bilstm";
    }
    return "?";
}

inline EncoderKind encoder_kind_from_string(const std::string& s) {
    if (s == "avgpool") return EncoderKind::avgpool;
    if (s == "lstm") return EncoderKind::lstm;
    if (s == "gru") return EncoderKind::gru;
    if (s == "bilstm") return EncoderKind::bilstm;
    throw config_error("unknown encoder '" + s + "' (avgpool, lstm, gru, bilstm)");
}

inline const char* to_string(Aggregation a) {
    return a == Aggregation::final_state ? "final_state" : "mean_over_time";
}

inline Aggregation aggregation_from_string(const std::string& s) {
    if (s == "final_state") return Aggregation::final_state;
    if (s == "mean_over_time") return Aggregation::mean_over_time;
    throw config_error("unknown aggregation '" + s + "' (final_state, mean_over_time)");
}

struct EncoderConfig {
    EncoderKind kind = EncoderKind::avgpool;
    std::size_t feature_dim = 0;
    std::size_t hidden = 0;  // 0 means feature_dim, the default wiring
    std::vector<std::string> streams = {"body"};
    Aggregation aggregation = Aggregation::final_state;

    std::size_t hidden_dim() const { return hidden == 0 ? feature_dim : hidden; }

    std::size_t stream_dim() const {
        switch (kind) {
            case EncoderKind::avgpool: return feature_dim;
            case EncoderKind::lstm:
            case EncoderKind::gru: return hidden_dim();
            case EncoderKind::bilstm: return 2 * hidden_dim();
        }
        return 0;
    }

    std::size_t theta_dim() const { return streams.size() * stream_dim(); }

    void validate() const {
        if (feature_dim == 0) throw config_error("encoder: feature_dim must be positive");
        if (streams.empty()) throw config_error("encoder: at least one stream");
        if (kind != EncoderKind::avgpool && hidden_dim() != feature_dim)
            throw config_error(
                "encoder: the recurrent state starts from the average-pooled input, so "
                "hidden must equal feature_dim (got hidden " + std::to_string(hidden_dim()) +
                ", feature_dim " + std::to_string(feature_dim) + ")");
    }
};

inline Vector average_pool(const Matrix& seq) {
    if (seq.rows() == 0 || seq.cols() == 0)
        throw config_error("average_pool: empty sequence");
    Vector out(seq.cols(), 0.0);
    for (std::size_t t = 0; t < seq.rows(); ++t) {
        const auto row = seq.row(t);
        for (std::size_t j = 0; j < seq.cols(); ++j) out[j] += row[j];
    }
    for (double& x : out) x /= static_cast<double>(seq.rows());
    return out;
}

// ---------------------------------------------------------------------------
// Parameters

struct AvgPoolParams {};

struct LstmParams {
    Matrix wi, ui, wf, uf, wo, uo, wg, ug;  // input/recurrent weights per gate
    Vector bi, bf, bo, bg;
};

struct GruParams {
    Matrix wz, uz, wr, ur, wn, un;  // update, reset, candidate
    Vector bz, br, bn;
};

struct BiLstmParams {
    LstmParams fwd, bwd;
};

using StreamParams = std::variant<AvgPoolParams, LstmParams, GruParams, BiLstmParams>;

struct EncoderParams {
    std::vector<StreamParams> streams;
};

// Visit every learnable buffer in a fixed order (the serialization and
// update order).
template <class F>
void for_each_buffer(AvgPoolParams&, F&&) {}
template <class F>
void for_each_buffer(const AvgPoolParams&, F&&) {}

template <class P, class F>
void visit_lstm_buffers(P& p, F&& f) {
    f(p.wi);
    f(p.ui);
    f(p.bi);
    f(p.wf);
    f(p.uf);
    f(p.bf);
    f(p.wo);
    f(p.uo);
    f(p.bo);
    f(p.wg);
    f(p.ug);
    f(p.bg);
}
template <class F>
void for_each_buffer(LstmParams& p, F&& f) {
    visit_lstm_buffers(p, f);
}
template <class F>
void for_each_buffer(const LstmParams& p, F&& f) {
    visit_lstm_buffers(p, f);
}

template <class P, class F>
void visit_gru_buffers(P& p, F&& f) {
    f(p.wz);
    f(p.uz);
    f(p.bz);
    f(p.wr);
    f(p.ur);
    f(p.br);
    f(p.wn);
    f(p.un);
    f(p.bn);
}
template <class F>
void for_each_buffer(GruParams& p, F&& f) {
    visit_gru_buffers(p, f);
}
template <class F>
void for_each_buffer(const GruParams& p, F&& f) {
    visit_gru_buffers(p, f);
}

template <class F>
void for_each_buffer(BiLstmParams& p, F&& f) {
    for_each_buffer(p.fwd, f);
    for_each_buffer(p.bwd, f);
}
template <class F>
void for_each_buffer(const BiLstmParams& p, F&& f) {
    for_each_buffer(p.fwd, f);
    for_each_buffer(p.bwd, f);
}

template <class F>
void for_each_buffer(EncoderParams& p, F&& f) {
    for (auto& sp : p.streams)
        std::visit([&](auto& inner) { for_each_buffer(inner, f); }, sp);
}
template <class F>
void for_each_buffer(const EncoderParams& p, F&& f) {
    for (const auto& sp : p.streams)
        std::visit([&](const auto& inner) { for_each_buffer(inner, f); }, sp);
}

namespace detail {

template <class Buf>
auto buffer_span(Buf& b) {
    if constexpr (std::is_same_v<std::remove_const_t<Buf>, Matrix>)
        return std::span(b.values().data(), b.values().size());
    else
        return std::span(b.data(), b.size());
}

}  // namespace detail

inline std::vector<std::span<double>> parameter_spans(EncoderParams& p) {
    std::vector<std::span<double>> out;
    for_each_buffer(p, [&](auto& buf) { out.push_back(detail::buffer_span(buf)); });
    return out;
}

inline std::vector<std::span<const double>> parameter_spans(const EncoderParams& p) {
    std::vector<std::span<const double>> out;
    for_each_buffer(p, [&](const auto& buf) { out.push_back(detail::buffer_span(buf)); });
    return out;
}

inline std::size_t parameter_count(const EncoderParams& p) {
    std::size_t n = 0;
    for_each_buffer(p, [&](const auto& buf) { n += detail::buffer_span(buf).size(); });
    return n;
}

/// Same shapes, all entries zero; used for gradient and momentum buffers.
inline EncoderParams zero_like(const EncoderParams& p) {
    EncoderParams z = p;
    for_each_buffer(z, [](auto& buf) {
        for (double& x : detail::buffer_span(buf)) x = 0.0;
    });
    return z;
}

/// a += s * b over every buffer.
inline void add_scaled(EncoderParams& a, const EncoderParams& b, double s) {
    auto dst = parameter_spans(a);
    auto src = parameter_spans(const_cast<EncoderParams&>(b));
    if (dst.size() != src.size()) throw config_error("encoder params have different layouts");
    for (std::size_t k = 0; k < dst.size(); ++k) {
        if (dst[k].size() != src[k].size())
            throw config_error("encoder params have different layouts");
        for (std::size_t i = 0; i < dst[k].size(); ++i) dst[k][i] += s * src[k][i];
    }
}

// ---------------------------------------------------------------------------
// Initialization

namespace detail {

inline Matrix uniform_matrix(std::size_t r, std::size_t c, double bound, SplitRng& rng) {
    Matrix m(r, c);
    for (double& x : m.values()) x = rng.uniform(-bound, bound);
    return m;
}

inline LstmParams init_lstm(std::size_t d, std::size_t h, SplitRng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(h));
    LstmParams p;
    p.wi = uniform_matrix(h, d, bound, rng);
    p.ui = uniform_matrix(h, h, bound, rng);
    p.wf = uniform_matrix(h, d, bound, rng);
    p.uf = uniform_matrix(h, h, bound, rng);
    p.wo = uniform_matrix(h, d, bound, rng);
    p.uo = uniform_matrix(h, h, bound, rng);
    p.wg = uniform_matrix(h, d, bound, rng);
    p.ug = uniform_matrix(h, h, bound, rng);
    p.bi = Vector(h, 0.0);
    p.bf = Vector(h, 1.0);  // open forget gates at the start
    p.bo = Vector(h, 0.0);
    p.bg = Vector(h, 0.0);
    return p;
}

inline GruParams init_gru(std::size_t d, std::size_t h, SplitRng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(h));
    GruParams p;
    p.wz = uniform_matrix(h, d, bound, rng);
    p.uz = uniform_matrix(h, h, bound, rng);
    p.wr = uniform_matrix(h, d, bound, rng);
    p.ur = uniform_matrix(h, h, bound, rng);
    p.wn = uniform_matrix(h, d, bound, rng);
    p.un = uniform_matrix(h, h, bound, rng);
    p.bz = Vector(h, 0.0);
    p.br = Vector(h, 0.0);
    p.bn = Vector(h, 0.0);
    return p;
}

}  // namespace detail

inline EncoderParams init_encoder_params(const EncoderConfig& cfg, const SplitRng& rng) {
    cfg.validate();
    const std::size_t d = cfg.feature_dim, h = cfg.hidden_dim();
    EncoderParams out;
    for (std::size_t s = 0; s < cfg.streams.size(); ++s) {
        SplitRng r = rng.child(s);
        switch (cfg.kind) {
            case EncoderKind::avgpool:
                out.streams.emplace_back(AvgPoolParams{});
                break;
            case EncoderKind::lstm:
                out.streams.emplace_back(detail::init_lstm(d, h, r));
                break;
            case EncoderKind::gru:
                out.streams.emplace_back(detail::init_gru(d, h, r));
                break;
            case EncoderKind::bilstm:
                out.streams.emplace_back(
                    BiLstmParams{detail::init_lstm(d, h, r), detail::init_lstm(d, h, r)});
                break;
        }
    }
    return out;
}

/// Params must carry the kind and shapes the config declares.
inline void check_encoder_params(const EncoderConfig& cfg, const EncoderParams& p) {
    cfg.validate();
    if (p.streams.size() != cfg.streams.size())
        throw config_error("encoder params cover " + std::to_string(p.streams.size()) +
                           " stream(s), config declares " +
                           std::to_string(cfg.streams.size()));
    const std::size_t d = cfg.feature_dim, h = cfg.hidden_dim();
    const auto check_lstm = [&](const LstmParams& lp) {
        for (const Matrix* w : {&lp.wi, &lp.wf, &lp.wo, &lp.wg})
            if (w->rows() != h || w->cols() != d)
                throw config_error("lstm input weight shape mismatch");
        for (const Matrix* u : {&lp.ui, &lp.uf, &lp.uo, &lp.ug})
            if (u->rows() != h || u->cols() != h)
                throw config_error("lstm recurrent weight shape mismatch");
        for (const Vector* b : {&lp.bi, &lp.bf, &lp.bo, &lp.bg})
            if (b->size() != h) throw config_error("lstm bias shape mismatch");
    };
    for (const auto& sp : p.streams) {
        switch (cfg.kind) {
            case EncoderKind::avgpool:
                if (!std::holds_alternative<AvgPoolParams>(sp))
                    throw config_error("encoder params are not avgpool");
                break;
            case EncoderKind::lstm:
                if (!std::holds_alternative<LstmParams>(sp))
                    throw config_error("encoder params are not lstm");
                check_lstm(std::get<LstmParams>(sp));
                break;
            case EncoderKind::gru: {
                if (!std::holds_alternative<GruParams>(sp))
                    throw config_error("encoder params are not gru");
                const auto& gp = std::get<GruParams>(sp);
                for (const Matrix* w : {&gp.wz, &gp.wr, &gp.wn})
                    if (w->rows() != h || w->cols() != d)
                        throw config_error("gru input weight shape mismatch");
                for (const Matrix* u : {&gp.uz, &gp.ur, &gp.un})
                    if (u->rows() != h || u->cols() != h)
                        throw config_error("gru recurrent weight shape mismatch");
                for (const Vector* b : {&gp.bz, &gp.br, &gp.bn})
                    if (b->size() != h) throw config_error("gru bias shape mismatch");
                break;
            }
            case EncoderKind::bilstm:
                if (!std::holds_alternative<BiLstmParams>(sp))
                    throw config_error("encoder params are not bilstm");
                check_lstm(std::get<BiLstmParams>(sp).fwd);
                check_lstm(std::get<BiLstmParams>(sp).bwd);
                break;
        }
    }
}

// ---------------------------------------------------------------------------
// Forward kernels

namespace detail {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// b + W x + U h
inline Vector gate_preactivation(const Matrix& w, std::span<const double> x, const Matrix& u,
                                 const Vector& h, const Vector& b) {
    Vector a = b;
    for (std::size_t r = 0; r < w.rows(); ++r) {
        double s = 0.0;
        const auto wr = w.row(r);
        for (std::size_t j = 0; j < x.size(); ++j) s += wr[j] * x[j];
        const auto ur = u.row(r);
        for (std::size_t j = 0; j < h.size(); ++j) s += ur[j] * h[j];
        a[r] += s;
    }
    return a;
}

}  // namespace detail

struct LstmTrace {
    Matrix x;  // the input the forward pass saw (T rows)
    Vector h0, c0;
    Matrix i, f, o, g, c, tanh_c, h;  // per-step activations, T rows each
};

struct LstmResult {
    Matrix hidden;  // T×h, row t = h_{t+1}
    Vector h_final, c_final;
};

inline LstmResult lstm_forward(const LstmParams& p, const Matrix& seq, const Vector& h0,
                               const Vector& c0, LstmTrace* trace = nullptr) {
    const std::size_t t_len = seq.rows(), d = seq.cols(), h = h0.size();
    if (t_len == 0 || d == 0) throw config_error("lstm: empty sequence");
    if (c0.size() != h) throw config_error("lstm: h0 and c0 sizes differ");
    if (p.wi.rows() != h || p.wi.cols() != d || p.ui.rows() != h || p.ui.cols() != h)
        throw config_error("lstm: parameter shapes do not match the input");

    if (trace) {
        trace->x = seq;
        trace->h0 = h0;
        trace->c0 = c0;
        for (Matrix* m : {&trace->i, &trace->f, &trace->o, &trace->g, &trace->c,
                          &trace->tanh_c, &trace->h})
            *m = Matrix(t_len, h);
    }

    LstmResult res;
    res.hidden = Matrix(t_len, h);
    Vector hprev = h0, cprev = c0;
    for (std::size_t t = 0; t < t_len; ++t) {
        const auto x = seq.row(t);
        const Vector ai = detail::gate_preactivation(p.wi, x, p.ui, hprev, p.bi);
        const Vector af = detail::gate_preactivation(p.wf, x, p.uf, hprev, p.bf);
        const Vector ao = detail::gate_preactivation(p.wo, x, p.uo, hprev, p.bo);
        const Vector ag = detail::gate_preactivation(p.wg, x, p.ug, hprev, p.bg);
        Vector cnew(h), hnew(h);
        for (std::size_t u = 0; u < h; ++u) {
            const double gi = detail::sigmoid(ai[u]);
            const double gf = detail::sigmoid(af[u]);
            const double go = detail::sigmoid(ao[u]);
            const double gg = std::tanh(ag[u]);
            cnew[u] = gf * cprev[u] + gi * gg;
            const double tc = std::tanh(cnew[u]);
            hnew[u] = go * tc;
            if (trace) {
                trace->i(t, u) = gi;
                trace->f(t, u) = gf;
                trace->o(t, u) = go;
                trace->g(t, u) = gg;
                trace->c(t, u) = cnew[u];
                trace->tanh_c(t, u) = tc;
                trace->h(t, u) = hnew[u];
            }
            res.hidden(t, u) = hnew[u];
        }
        hprev = std::move(hnew);
        cprev = std::move(cnew);
    }
    res.h_final = std::move(hprev);
    res.c_final = std::move(cprev);
    return res;
}

struct GruTrace {
    Matrix x;
    Vector h0;
    Matrix z, r, n, h;
};

struct GruResult {
    Matrix hidden;
    Vector h_final;
};

inline GruResult gru_forward(const GruParams& p, const Matrix& seq, const Vector& h0,
                             GruTrace* trace = nullptr) {
    const std::size_t t_len = seq.rows(), d = seq.cols(), h = h0.size();
    if (t_len == 0 || d == 0) throw config_error("gru: empty sequence");
    if (p.wz.rows() != h || p.wz.cols() != d || p.uz.rows() != h || p.uz.cols() != h)
        throw config_error("gru: parameter shapes do not match the input");

    if (trace) {
        trace->x = seq;
        trace->h0 = h0;
        for (Matrix* m : {&trace->z, &trace->r, &trace->n, &trace->h}) *m = Matrix(t_len, h);
    }

    GruResult res;
    res.hidden = Matrix(t_len, h);
    Vector hprev = h0;
    for (std::size_t t = 0; t < t_len; ++t) {
        const auto x = seq.row(t);
        const Vector az = detail::gate_preactivation(p.wz, x, p.uz, hprev, p.bz);
        const Vector ar = detail::gate_preactivation(p.wr, x, p.ur, hprev, p.br);
        Vector z(h), r(h);
        for (std::size_t u = 0; u < h; ++u) {
            z[u] = detail::sigmoid(az[u]);
            r[u] = detail::sigmoid(ar[u]);
        }
        Vector rh(h);
        for (std::size_t u = 0; u < h; ++u) rh[u] = r[u] * hprev[u];
        const Vector an = detail::gate_preactivation(p.wn, x, p.un, rh, p.bn);
        Vector hnew(h);
        for (std::size_t u = 0; u < h; ++u) {
            const double n = std::tanh(an[u]);
            hnew[u] = (1.0 - z[u]) * n + z[u] * hprev[u];
            if (trace) {
                trace->z(t, u) = z[u];
                trace->r(t, u) = r[u];
                trace->n(t, u) = n;
                trace->h(t, u) = hnew[u];
            }
            res.hidden(t, u) = hnew[u];
        }
        hprev = std::move(hnew);
    }
    res.h_final = std::move(hprev);
    return res;
}

inline Matrix reverse_rows(const Matrix& m) {
    Matrix out(m.rows(), m.cols());
    for (std::size_t t = 0; t < m.rows(); ++t)
        for (std::size_t j = 0; j < m.cols(); ++j) out(t, j) = m(m.rows() - 1 - t, j);
    return out;
}

/// Final-state bi-LSTM summary: both directions start from the average-pooled
/// sequence; the result is [h_T of the forward pass ; h_T of the backward pass].
inline Vector bilstm_encode(const LstmParams& fwd, const LstmParams& bwd, const Matrix& seq) {
    const Vector init = average_pool(seq);
    const LstmResult f = lstm_forward(fwd, seq, init, init);
    const LstmResult b = lstm_forward(bwd, reverse_rows(seq), init, init);
    return concat(f.h_final, b.h_final);
}

// ---------------------------------------------------------------------------
// Backward kernels (reverse accumulation through the gate recurrences)

/// d_hidden holds the upstream gradient on every h_t (T×h). Parameter
/// gradients are accumulated into grad; the return value is the gradient on
/// the inputs the kernel saw, NOT including the path through h0/c0 — those
/// come back in dh0/dc0 for the caller to fold in.
inline Matrix lstm_backward(const LstmParams& p, const LstmTrace& tr, const Matrix& d_hidden,
                            LstmParams& grad, Vector& dh0, Vector& dc0) {
    const std::size_t t_len = tr.x.rows(), d = tr.x.cols(), h = tr.h0.size();
    if (t_len == 0 || tr.i.rows() != t_len || tr.i.cols() != h)
        throw config_error("lstm backward: forward trace is missing or stale");
    if (d_hidden.rows() != t_len || d_hidden.cols() != h)
        throw config_error("lstm backward: upstream gradient has the wrong shape");

    Matrix dx(t_len, d);
    Vector dh_next(h, 0.0), dc_next(h, 0.0);
    Vector dai(h), daf(h), dao(h), dag(h);
    for (std::size_t t = t_len; t-- > 0;) {
        const auto x = tr.x.row(t);
        const auto hprev = [&](std::size_t u) { return t > 0 ? tr.h(t - 1, u) : tr.h0[u]; };
        const auto cprev = [&](std::size_t u) { return t > 0 ? tr.c(t - 1, u) : tr.c0[u]; };

        for (std::size_t u = 0; u < h; ++u) {
            const double dht = d_hidden(t, u) + dh_next[u];
            const double i = tr.i(t, u), f = tr.f(t, u), o = tr.o(t, u), g = tr.g(t, u);
            const double tc = tr.tanh_c(t, u);
            const double d_o = dht * tc;
            const double dct = dc_next[u] + dht * o * (1.0 - tc * tc);
            const double d_i = dct * g;
            const double d_g = dct * i;
            const double d_f = dct * cprev(u);
            dc_next[u] = dct * f;  // becomes dc_{t-1}
            dai[u] = d_i * i * (1.0 - i);
            daf[u] = d_f * f * (1.0 - f);
            dao[u] = d_o * o * (1.0 - o);
            dag[u] = d_g * (1.0 - g * g);
        }

        Vector dh_prev(h, 0.0);
        auto dxrow = dx.row(t);
        for (std::size_t u = 0; u < h; ++u) {
            grad.bi[u] += dai[u];
            grad.bf[u] += daf[u];
            grad.bo[u] += dao[u];
            grad.bg[u] += dag[u];
            for (std::size_t j = 0; j < d; ++j) {
                grad.wi(u, j) += dai[u] * x[j];
                grad.wf(u, j) += daf[u] * x[j];
                grad.wo(u, j) += dao[u] * x[j];
                grad.wg(u, j) += dag[u] * x[j];
                dxrow[j] += p.wi(u, j) * dai[u] + p.wf(u, j) * daf[u] +
                            p.wo(u, j) * dao[u] + p.wg(u, j) * dag[u];
            }
            for (std::size_t j = 0; j < h; ++j) {
                const double hp = hprev(j);
                grad.ui(u, j) += dai[u] * hp;
                grad.uf(u, j) += daf[u] * hp;
                grad.uo(u, j) += dao[u] * hp;
                grad.ug(u, j) += dag[u] * hp;
                dh_prev[j] += p.ui(u, j) * dai[u] + p.uf(u, j) * daf[u] +
                              p.uo(u, j) * dao[u] + p.ug(u, j) * dag[u];
            }
        }
        dh_next = std::move(dh_prev);
    }
    dh0 = std::move(dh_next);
    dc0 = std::move(dc_next);
    return dx;
}

inline Matrix gru_backward(const GruParams& p, const GruTrace& tr, const Matrix& d_hidden,
                           GruParams& grad, Vector& dh0) {
    const std::size_t t_len = tr.x.rows(), d = tr.x.cols(), h = tr.h0.size();
    if (t_len == 0 || tr.z.rows() != t_len || tr.z.cols() != h)
        throw config_error("gru backward: forward trace is missing or stale");
    if (d_hidden.rows() != t_len || d_hidden.cols() != h)
        throw config_error("gru backward: upstream gradient has the wrong shape");

    Matrix dx(t_len, d);
    Vector dh_next(h, 0.0);
    Vector daz(h), dar(h), dan(h);
    for (std::size_t t = t_len; t-- > 0;) {
        const auto x = tr.x.row(t);
        const auto hprev = [&](std::size_t u) { return t > 0 ? tr.h(t - 1, u) : tr.h0[u]; };

        Vector dh_prev(h, 0.0);
        for (std::size_t u = 0; u < h; ++u) {
            const double dht = d_hidden(t, u) + dh_next[u];
            const double z = tr.z(t, u), n = tr.n(t, u);
            const double dz = dht * (hprev(u) - n);
            const double dn = dht * (1.0 - z);
            dh_prev[u] += dht * z;
            daz[u] = dz * z * (1.0 - z);
            dan[u] = dn * (1.0 - n * n);
        }
        // the candidate sees r∘h_prev; route its gradient through r and h_prev
        Vector d_rh(h, 0.0);
        for (std::size_t u = 0; u < h; ++u)
            for (std::size_t j = 0; j < h; ++j) d_rh[j] += p.un(u, j) * dan[u];
        for (std::size_t u = 0; u < h; ++u) {
            const double r = tr.r(t, u);
            const double dr = d_rh[u] * hprev(u);
            dh_prev[u] += d_rh[u] * r;
            dar[u] = dr * r * (1.0 - r);
        }

        auto dxrow = dx.row(t);
        for (std::size_t u = 0; u < h; ++u) {
            grad.bz[u] += daz[u];
            grad.br[u] += dar[u];
            grad.bn[u] += dan[u];
            for (std::size_t j = 0; j < d; ++j) {
                grad.wz(u, j) += daz[u] * x[j];
                grad.wr(u, j) += dar[u] * x[j];
                grad.wn(u, j) += dan[u] * x[j];
                dxrow[j] += p.wz(u, j) * daz[u] + p.wr(u, j) * dar[u] + p.wn(u, j) * dan[u];
            }
            for (std::size_t j = 0; j < h; ++j) {
                const double hp = hprev(j);
                grad.uz(u, j) += daz[u] * hp;
                grad.ur(u, j) += dar[u] * hp;
                grad.un(u, j) += dan[u] * (tr.r(t, j) * hp);
                dh_prev[j] += p.uz(u, j) * daz[u] + p.ur(u, j) * dar[u];
            }
        }
        dh_next = std::move(dh_prev);
    }
    dh0 = std::move(dh_next);
    return dx;
}

// ---------------------------------------------------------------------------
// Video-level encoding

struct AvgPoolTrace {
    std::size_t time_steps = 0;
    std::size_t dim = 0;
};

struct BiLstmTrace {
    LstmTrace fwd, bwd;  // bwd saw the time-reversed input
};

using StreamTrace = std::variant<AvgPoolTrace, LstmTrace, GruTrace, BiLstmTrace>;

struct VideoTrace {
    std::vector<StreamTrace> streams;
};

namespace detail {

inline Vector aggregate(const Matrix& hidden, const Vector& final_state, Aggregation agg) {
    return agg == Aggregation::final_state ? final_state : average_pool(hidden);
}

template <class T, class V>
auto& stream_as(V& params) {
    if (auto* p = std::get_if<T>(&params)) return *p;
    throw config_error("encoder params do not match the configured kind");
}

template <class T, class V>
auto& trace_as(V& trace) {
    if (auto* p = std::get_if<T>(&trace)) return *p;
    throw config_error("encoder backward: forward trace is missing or stale");
}

}  // namespace detail

/// Encodes one stream's sequence; recurrent kinds start from the pooled input.
inline Vector encode_stream(const EncoderConfig& cfg, const StreamParams& params,
                            const Matrix& seq, StreamTrace* trace = nullptr) {
    if (seq.cols() != cfg.feature_dim)
        throw config_error("encode: sequence width " + std::to_string(seq.cols()) +
                           " does not match feature_dim " + std::to_string(cfg.feature_dim));
    switch (cfg.kind) {
        case EncoderKind::avgpool: {
            if (trace) *trace = AvgPoolTrace{seq.rows(), seq.cols()};
            return average_pool(seq);
        }
        case EncoderKind::lstm: {
            const Vector init = average_pool(seq);
            LstmTrace local;
            const LstmResult res =
                lstm_forward(detail::stream_as<LstmParams>(params), seq, init, init,
                             trace ? &local : nullptr);
            if (trace) *trace = std::move(local);
            return detail::aggregate(res.hidden, res.h_final, cfg.aggregation);
        }
        case EncoderKind::gru: {
            const Vector init = average_pool(seq);
            GruTrace local;
            const GruResult res = gru_forward(detail::stream_as<GruParams>(params), seq, init,
                                              trace ? &local : nullptr);
            if (trace) *trace = std::move(local);
            return detail::aggregate(res.hidden, res.h_final, cfg.aggregation);
        }
        case EncoderKind::bilstm: {
            const auto& bp = detail::stream_as<BiLstmParams>(params);
            const Vector init = average_pool(seq);
            BiLstmTrace local;
            const LstmResult f =
                lstm_forward(bp.fwd, seq, init, init, trace ? &local.fwd : nullptr);
            const LstmResult b = lstm_forward(bp.bwd, reverse_rows(seq), init, init,
                                              trace ? &local.bwd : nullptr);
            if (trace) *trace = std::move(local);
            return concat(detail::aggregate(f.hidden, f.h_final, cfg.aggregation),
                          detail::aggregate(b.hidden, b.h_final, cfg.aggregation));
        }
    }
    throw config_error("encode: unknown encoder kind");
}

/// theta(v): per-stream encodings concatenated in declared stream order.
inline Vector encode_video(const EncoderConfig& cfg, const EncoderParams& params,
                           const std::vector<Matrix>& streams, VideoTrace* trace = nullptr) {
    cfg.validate();
    if (params.streams.size() != cfg.streams.size())
        throw config_error("encode: params cover the wrong number of streams");
    if (streams.size() != cfg.streams.size())
        throw config_error("encode: video has " + std::to_string(streams.size()) +
                           " stream(s), config needs " + std::to_string(cfg.streams.size()));
    if (trace) trace->streams.resize(streams.size());
    Vector theta;
    theta.reserve(cfg.theta_dim());
    for (std::size_t s = 0; s < streams.size(); ++s) {
        const Vector part = encode_stream(cfg, params.streams[s], streams[s],
                                          trace ? &trace->streams[s] : nullptr);
        theta.insert(theta.end(), part.begin(), part.end());
    }
    return theta;
}

namespace detail {

/// Spread the upstream gradient of one stream over the hidden sequence
/// according to the aggregation, then run the recurrent backward pass.
inline Matrix upstream_to_hidden(std::span<const double> d_part, std::size_t t_len,
                                 Aggregation agg) {
    const std::size_t h = d_part.size();
    Matrix d_hidden(t_len, h);
    if (agg == Aggregation::final_state) {
        for (std::size_t u = 0; u < h; ++u) d_hidden(t_len - 1, u) = d_part[u];
    } else {
        const double inv = 1.0 / static_cast<double>(t_len);
        for (std::size_t t = 0; t < t_len; ++t)
            for (std::size_t u = 0; u < h; ++u) d_hidden(t, u) = d_part[u] * inv;
    }
    return d_hidden;
}

inline void add_pooled_path(Matrix& dx, const Vector& d_init) {
    const double inv = 1.0 / static_cast<double>(dx.rows());
    for (std::size_t t = 0; t < dx.rows(); ++t) {
        auto row = dx.row(t);
        for (std::size_t j = 0; j < d_init.size(); ++j) row[j] += d_init[j] * inv;
    }
}

}  // namespace detail

/// Reverse pass for encode_video. d_theta is the upstream gradient on the
/// concatenated embedding; parameter gradients are accumulated into grads
/// (same layout as params, e.g. from zero_like). Returns the gradient on each
/// stream's input sequence, including the path through the pooled initial
/// state.
inline std::vector<Matrix> encoder_backward(const EncoderConfig& cfg,
                                            const EncoderParams& params,
                                            const VideoTrace& trace, const Vector& d_theta,
                                            EncoderParams& grads) {
    cfg.validate();
    if (d_theta.size() != cfg.theta_dim())
        throw config_error("encoder backward: upstream gradient has dim " +
                           std::to_string(d_theta.size()) + ", expected " +
                           std::to_string(cfg.theta_dim()));
    if (trace.streams.size() != cfg.streams.size())
        throw config_error("encoder backward: forward trace is missing or stale");
    if (params.streams.size() != cfg.streams.size() ||
        grads.streams.size() != cfg.streams.size())
        throw config_error("encoder backward: params/grads cover the wrong stream count");

    const std::size_t per = cfg.stream_dim();
    std::vector<Matrix> dx(cfg.streams.size());
    for (std::size_t s = 0; s < cfg.streams.size(); ++s) {
        const std::span<const double> d_part(d_theta.data() + s * per, per);
        switch (cfg.kind) {
            case EncoderKind::avgpool: {
                const auto& at = detail::trace_as<AvgPoolTrace>(trace.streams[s]);
                if (at.time_steps == 0)
                    throw config_error("encoder backward: forward trace is missing or stale");
                dx[s] = Matrix(at.time_steps, at.dim);
                detail::add_pooled_path(dx[s], Vector(d_part.begin(), d_part.end()));
                break;
            }
            case EncoderKind::lstm: {
                const auto& tr = detail::trace_as<LstmTrace>(trace.streams[s]);
                auto& grad = detail::stream_as<LstmParams>(grads.streams[s]);
                const Matrix d_hidden =
                    detail::upstream_to_hidden(d_part, tr.x.rows(), cfg.aggregation);
                Vector dh0, dc0;
                dx[s] = lstm_backward(detail::stream_as<LstmParams>(params.streams[s]), tr, d_hidden,
                                      grad, dh0, dc0);
                add_scaled(dh0, dc0, 1.0);  // both initial states are the pooled input
                detail::add_pooled_path(dx[s], dh0);
                break;
            }
            case EncoderKind::gru: {
                const auto& tr = detail::trace_as<GruTrace>(trace.streams[s]);
                auto& grad = detail::stream_as<GruParams>(grads.streams[s]);
                const Matrix d_hidden =
                    detail::upstream_to_hidden(d_part, tr.x.rows(), cfg.aggregation);
                Vector dh0;
                dx[s] = gru_backward(detail::stream_as<GruParams>(params.streams[s]), tr, d_hidden,
                                     grad, dh0);
                detail::add_pooled_path(dx[s], dh0);
                break;
            }
            case EncoderKind::bilstm: {
                const auto& tr = detail::trace_as<BiLstmTrace>(trace.streams[s]);
                const auto& bp = detail::stream_as<BiLstmParams>(params.streams[s]);
                auto& grad = detail::stream_as<BiLstmParams>(grads.streams[s]);
                const std::size_t h = cfg.hidden_dim();
                const std::size_t t_len = tr.fwd.x.rows();
                const Matrix dh_f = detail::upstream_to_hidden(d_part.subspan(0, h), t_len,
                                                               cfg.aggregation);
                const Matrix dh_b = detail::upstream_to_hidden(d_part.subspan(h, h), t_len,
                                                               cfg.aggregation);
                Vector dh0f, dc0f, dh0b, dc0b;
                Matrix dxf = lstm_backward(bp.fwd, tr.fwd, dh_f, grad.fwd, dh0f, dc0f);
                const Matrix dxb_rev =
                    lstm_backward(bp.bwd, tr.bwd, dh_b, grad.bwd, dh0b, dc0b);
                const Matrix dxb = reverse_rows(dxb_rev);
                add_scaled(dxf, dxb, 1.0);
                Vector d_init = dh0f;
                add_scaled(d_init, dc0f, 1.0);
                add_scaled(d_init, dh0b, 1.0);
                add_scaled(d_init, dc0b, 1.0);
                detail::add_pooled_path(dxf, d_init);
                dx[s] = std::move(dxf);
                break;
            }
        }
    }
    return dx;
}

}  // namespace zsslr

#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include "zsslr/errors.hpp"
#include "zsslr/feature_io.hpp"
#include "zsslr/zsl.hpp"

namespace zsslr {

// Fitted-model container (magic "ZSM1").  Layout, all little endian: 4 magic
// bytes; u32 model kind, theta-normalization flag, encoder kind, aggregation,
// feature_dim, hidden; u32 stream count then per stream u32 name length +
// name bytes; u32 w rows, u32 w cols, rows*cols float64 values row-major;
// u32 encoder parameter count then that many float64 values in the fixed
// buffer order.  Doubles travel as raw bits, so write-then-read is exact.

inline constexpr std::array<char, 4> kModelMagic = {'Z', 'S', 'M', '1'};

namespace detail {

inline void put_u64_le(std::ofstream& out, std::uint64_t v) {
    put_u32_le(out, static_cast<std::uint32_t>(v & 0xffffffffu));
    put_u32_le(out, static_cast<std::uint32_t>(v >> 32));
}

inline bool get_u64_le(std::ifstream& in, std::uint64_t& v) {
    std::uint32_t lo = 0, hi = 0;
    if (!get_u32_le(in, lo) || !get_u32_le(in, hi)) return false;
    v = static_cast<std::uint64_t>(lo) | (static_cast<std::uint64_t>(hi) << 32);
    return true;
}

inline void put_f64_le(std::ofstream& out, double d) {
    put_u64_le(out, std::bit_cast<std::uint64_t>(d));
}

inline bool get_f64_le(std::ifstream& in, double& d) {
    std::uint64_t bits = 0;
    if (!get_u64_le(in, bits)) return false;
    d = std::bit_cast<double>(bits);
    return true;
}

inline std::uint32_t model_kind_tag(ModelKind k) {
    switch (k) {
        case ModelKind::lle: return 0;
        case ModelKind::eszsl: return 1;
        case ModelKind::sae: return 2;
    }
    throw config_error("unknown model kind");
}

inline std::uint32_t encoder_kind_tag(EncoderKind k) {
    switch (k) {
        case EncoderKind::avgpool: return 0;
        case EncoderKind::lstm: return 1;
        case EncoderKind::gru: return 2;
        case EncoderKind::bilstm: return 3;
    }
    throw config_error("unknown encoder kind");
}

}  // namespace detail

inline void write_model(const std::filesystem::path& path, const CompatibilityModel& model) {
    model.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot open " + path.string() + " for writing");
    out.write(kModelMagic.data(), 4);
    detail::put_u32_le(out, detail::model_kind_tag(model.kind));
    detail::put_u32_le(out, model.normalize_theta ? 1 : 0);
    detail::put_u32_le(out, detail::encoder_kind_tag(model.encoder.kind));
    detail::put_u32_le(out, model.encoder.aggregation == Aggregation::final_state ? 0 : 1);
    detail::put_u32_le(out, static_cast<std::uint32_t>(model.encoder.feature_dim));
    detail::put_u32_le(out, static_cast<std::uint32_t>(model.encoder.hidden));
    detail::put_u32_le(out, static_cast<std::uint32_t>(model.encoder.streams.size()));
    for (const std::string& name : model.encoder.streams) {
        detail::put_u32_le(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
    }
    detail::put_u32_le(out, static_cast<std::uint32_t>(model.w.rows()));
    detail::put_u32_le(out, static_cast<std::uint32_t>(model.w.cols()));
    for (double x : model.w.values()) detail::put_f64_le(out, x);
    detail::put_u32_le(out, static_cast<std::uint32_t>(parameter_count(model.params)));
    for (const auto span : parameter_spans(model.params))
        for (double x : span) detail::put_f64_le(out, x);
    out.flush();
    if (!out) throw io_error("failed while writing " + path.string());
}

inline CompatibilityModel read_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path.string());
    const auto fail = [&](const std::string& what) -> io_error {
        return io_error(what + " in " + path.string());
    };

    std::array<char, 4> magic{};
    if (!in.read(magic.data(), 4)) throw fail("truncated header");
    if (magic != kModelMagic)
        throw fail("bad magic (expected " + std::string(kModelMagic.data(), 4) + ", found " +
                   std::string(magic.data(), 4) + ")");

    std::uint32_t kind_tag = 0, normalize = 0, enc_tag = 0, agg_tag = 0;
    std::uint32_t feature_dim = 0, hidden = 0, stream_count = 0;
    if (!detail::get_u32_le(in, kind_tag) || !detail::get_u32_le(in, normalize) ||
        !detail::get_u32_le(in, enc_tag) || !detail::get_u32_le(in, agg_tag) ||
        !detail::get_u32_le(in, feature_dim) || !detail::get_u32_le(in, hidden) ||
        !detail::get_u32_le(in, stream_count))
        throw fail("truncated header");
    if (kind_tag > 2) throw fail("unknown model kind tag");
    if (enc_tag > 3) throw fail("unknown encoder kind tag");
    if (agg_tag > 1) throw fail("unknown aggregation tag");

    CompatibilityModel model;
    model.kind = kind_tag == 0 ? ModelKind::lle
               : kind_tag == 1 ? ModelKind::eszsl
                               : ModelKind::sae;
    model.normalize_theta = normalize != 0;
    model.encoder.kind = enc_tag == 0 ? EncoderKind::avgpool
                       : enc_tag == 1 ? EncoderKind::lstm
                       : enc_tag == 2 ? EncoderKind::gru
                                      : EncoderKind::bilstm;
    model.encoder.aggregation =
        agg_tag == 0 ? Aggregation::final_state : Aggregation::mean_over_time;
    model.encoder.feature_dim = feature_dim;
    model.encoder.hidden = hidden;
    model.encoder.streams.clear();
    for (std::uint32_t s = 0; s < stream_count; ++s) {
        std::uint32_t len = 0;
        if (!detail::get_u32_le(in, len)) throw fail("truncated stream name");
        if (len == 0 || len > 256) throw fail("implausible stream name length");
        std::string name(len, '\0');
        if (!in.read(name.data(), len)) throw fail("truncated stream name");
        model.encoder.streams.push_back(std::move(name));
    }
    model.encoder.validate();

    std::uint32_t rows = 0, cols = 0;
    if (!detail::get_u32_le(in, rows) || !detail::get_u32_le(in, cols))
        throw fail("truncated header");
    if (rows == 0 || cols == 0) throw fail("zero dimension");
    if (static_cast<std::uint64_t>(rows) * cols > kMaxMatrixEntries)
        throw fail("dimension overflow");
    model.w = Matrix(rows, cols);
    for (double& x : model.w.values())
        if (!detail::get_f64_le(in, x)) throw fail("truncated payload");

    model.params = init_encoder_params(model.encoder, SplitRng(0));
    std::uint32_t count = 0;
    if (!detail::get_u32_le(in, count)) throw fail("truncated payload");
    if (count != parameter_count(model.params)) throw fail("parameter count mismatch");
    for (const auto span : parameter_spans(model.params))
        for (double& x : span)
            if (!detail::get_f64_le(in, x)) throw fail("truncated payload");

    char extra = 0;
    if (in.read(&extra, 1)) throw fail("trailing bytes");
    model.validate();
    return model;
}

}  // namespace zsslr

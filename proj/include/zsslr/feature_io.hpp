#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "zsslr/errors.hpp"
#include "zsslr/matrix.hpp"

namespace zsslr {

// Binary matrix container used for per-video feature sequences (magic "ZSF1",
// rows = time steps) and per-class text embeddings (magic "ZSC1", exactly one
// row).  Layout: 4 magic bytes, u32 rows, u32 cols (little endian), then
// rows*cols float32 values in row-major order, little endian.

inline constexpr std::array<char, 4> kFeatureMagic = {'Z', 'S', 'F', '1'};
inline constexpr std::array<char, 4> kEmbeddingMagic = {'Z', 'S', 'C', '1'};

/// Refuse to allocate payloads above this entry count; a header asking for
/// more is treated as corrupt rather than an allocation request.
inline constexpr std::uint64_t kMaxMatrixEntries = 1ull << 28;  // 1 GiB of f32

namespace detail {

inline void put_u32_le(std::ofstream& out, std::uint32_t v) {
    const std::array<unsigned char, 4> b = {
        static_cast<unsigned char>(v & 0xff),
        static_cast<unsigned char>((v >> 8) & 0xff),
        static_cast<unsigned char>((v >> 16) & 0xff),
        static_cast<unsigned char>((v >> 24) & 0xff),
    };
    out.write(reinterpret_cast<const char*>(b.data()), 4);
}

inline bool get_u32_le(std::ifstream& in, std::uint32_t& v) {
    std::array<unsigned char, 4> b{};
    if (!in.read(reinterpret_cast<char*>(b.data()), 4)) return false;
    v = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
        (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    return true;
}

inline void put_f32_le(std::ofstream& out, float f) {
    const auto bits = std::bit_cast<std::uint32_t>(f);
    put_u32_le(out, bits);
}

inline bool get_f32_le(std::ifstream& in, float& f) {
    std::uint32_t bits = 0;
    if (!get_u32_le(in, bits)) return false;
    f = std::bit_cast<float>(bits);
    return true;
}

}  // namespace detail

inline void write_matrix_file(const std::filesystem::path& path, const Matrix& m,
                              const std::array<char, 4>& magic) {
    if (m.rows() == 0 || m.cols() == 0)
        throw io_error("refusing to write empty matrix to " + path.string());
    if (m.rows() > 0xffffffffull || m.cols() > 0xffffffffull)
        throw io_error("matrix dimensions overflow the file header in " + path.string());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot open for writing: " + path.string());
    out.write(magic.data(), 4);
    detail::put_u32_le(out, static_cast<std::uint32_t>(m.rows()));
    detail::put_u32_le(out, static_cast<std::uint32_t>(m.cols()));
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) {
            const float f = static_cast<float>(m(i, j));
            if (!std::isfinite(f))
                throw io_error("value does not fit float32 when writing " + path.string());
            detail::put_f32_le(out, f);
        }
    if (!out) throw io_error("write failed: " + path.string());
}

inline Matrix read_matrix_file(const std::filesystem::path& path,
                               const std::array<char, 4>& magic) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open: " + path.string());
    std::array<char, 4> got{};
    if (!in.read(got.data(), 4)) throw io_error("truncated header in " + path.string());
    if (got != magic)
        throw io_error("bad magic in " + path.string() + " (expected " +
                       std::string(magic.data(), 4) + ", found " +
                       std::string(got.data(), 4) + ")");
    std::uint32_t rows = 0, cols = 0;
    if (!detail::get_u32_le(in, rows) || !detail::get_u32_le(in, cols))
        throw io_error("truncated header in " + path.string());
    if (rows == 0 || cols == 0)
        throw io_error("zero dimension in header of " + path.string());
    const std::uint64_t entries = static_cast<std::uint64_t>(rows) * cols;
    if (entries > kMaxMatrixEntries)
        throw io_error("dimension overflow in header of " + path.string() + " (" +
                       std::to_string(rows) + "x" + std::to_string(cols) + ")");
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) {
            float f = 0;
            if (!detail::get_f32_le(in, f))
                throw io_error("truncated payload in " + path.string() + " (expected " +
                               std::to_string(entries) + " values)");
            if (!std::isfinite(f))
                throw io_error("non-finite value in " + path.string());
            m(i, j) = static_cast<double>(f);
        }
    return m;
}

/// Header of a matrix file, readable without touching the payload.
struct MatrixFileHeader {
    std::array<char, 4> magic{};
    std::uint32_t rows = 0;
    std::uint32_t cols = 0;

    std::uint64_t expected_file_size() const {
        return 12ull + 4ull * rows * cols;
    }
};

inline MatrixFileHeader peek_matrix_header(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open: " + path.string());
    MatrixFileHeader h;
    if (!in.read(h.magic.data(), 4) || !detail::get_u32_le(in, h.rows) ||
        !detail::get_u32_le(in, h.cols))
        throw io_error("truncated header in " + path.string());
    return h;
}

/// A feature sequence: rows = time steps, cols = per-snippet feature width.
inline void write_feature_sequence(const std::filesystem::path& path, const Matrix& seq) {
    write_matrix_file(path, seq, kFeatureMagic);
}

inline Matrix read_feature_sequence(const std::filesystem::path& path) {
    return read_matrix_file(path, kFeatureMagic);
}

/// A class text embedding: a single row vector.
inline void write_class_embedding(const std::filesystem::path& path, const Vector& e) {
    Matrix row(1, e.size());
    for (std::size_t j = 0; j < e.size(); ++j) row(0, j) = e[j];
    write_matrix_file(path, row, kEmbeddingMagic);
}

inline Vector read_class_embedding(const std::filesystem::path& path) {
    const Matrix row = read_matrix_file(path, kEmbeddingMagic);
    if (row.rows() != 1)
        throw io_error("class embedding must have exactly one row: " + path.string());
    Vector e(row.cols());
    for (std::size_t j = 0; j < row.cols(); ++j) e[j] = row(0, j);
    return e;
}

}  // namespace zsslr

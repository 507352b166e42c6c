#include <catch2/catch_amalgamated.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "testdir.hpp"
#include "zsslr/feature_io.hpp"
#include "zsslr/manifest.hpp"
#include "zsslr/rng.hpp"

using namespace zsslr;
namespace fs = std::filesystem;

namespace {

double f32(double x) { return static_cast<double>(static_cast<float>(x)); }

Matrix quantized(const Matrix& m) {
    Matrix q = m;
    for (double& x : q.values()) x = f32(x);
    return q;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_raw(const fs::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

// Hand-assembled header so corrupt files do not depend on the writer under test.
std::string raw_header(const char* magic, std::uint32_t rows, std::uint32_t cols) {
    std::string b(magic, 4);
    for (std::uint32_t v : {rows, cols})
        for (int i = 0; i < 4; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    return b;
}

}  // namespace

TEST_CASE("feature files round-trip values and bytes") {
    TempDir dir;
    // every value here is float32-exact, so the round trip is an identity
    const Matrix m = {{0.0, -1.5, 3.25, 0.0009765625},
                      {7.0, 42.0, -0.125, 2.5},
                      {-9.75, 0.5, 1.0, 8.0}};
    const auto path = dir / "seq.zsf1";
    write_feature_sequence(path, m);

    CHECK(fs::file_size(path) == 12 + 4 * 12);
    const Matrix back = read_feature_sequence(path);
    CHECK(back == m);

    // rewriting produces the identical byte stream
    const std::string first = slurp(path);
    write_feature_sequence(path, m);
    CHECK(slurp(path) == first);
    CHECK(first.substr(0, 4) == "ZSF1");
}

TEST_CASE("values are stored as float32") {
    TempDir dir;
    const Matrix m = {{1.0 / 3.0, 1e-40, 123456789.123456789}};
    const auto path = dir / "seq.zsf1";
    write_feature_sequence(path, m);
    CHECK(read_feature_sequence(path) == quantized(m));
}

TEST_CASE("random matrices survive the round trip exactly") {
    TempDir dir;
    SplitRng rng(99);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t rows = 1 + rng.below(12);
        const std::size_t cols = 1 + rng.below(40);
        Matrix m(rows, cols);
        for (double& x : m.values()) x = rng.normal() * std::pow(10.0, rng.uniform(-6, 6));
        const auto path = dir / "trial.zsf1";
        write_feature_sequence(path, m);
        REQUIRE(read_feature_sequence(path) == quantized(m));
    }
}

TEST_CASE("class embedding files hold exactly one row") {
    TempDir dir;
    const Vector e = {0.25, -0.5, 0.75};
    const auto path = dir / "c.zsc1";
    write_class_embedding(path, e);
    CHECK(slurp(path).substr(0, 4) == "ZSC1");
    CHECK(read_class_embedding(path) == e);

    // a two-row embedding file is rejected even with the right magic
    const auto bad = dir / "bad.zsc1";
    write_matrix_file(bad, Matrix{{1.0, 0.0}, {0.0, 1.0}}, kEmbeddingMagic);
    CHECK_THROWS_MATCHES(read_class_embedding(bad), io_error,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("one row")));
}

TEST_CASE("reader distinguishes the ways a file can be broken") {
    TempDir dir;

    SECTION("wrong magic") {
        const auto p = dir / "x.bin";
        write_raw(p, raw_header("XXXX", 1, 1) + std::string(4, '\0'));
        CHECK_THROWS_MATCHES(read_feature_sequence(p), io_error,
                             Catch::Matchers::MessageMatches(
                                 Catch::Matchers::ContainsSubstring("bad magic")));
    }
    SECTION("embedding magic where features expected") {
        const auto p = dir / "x.zsc1";
        write_class_embedding(p, {1.0, 2.0});
        CHECK_THROWS_AS(read_feature_sequence(p), io_error);
    }
    SECTION("truncated header") {
        const auto p = dir / "x.bin";
        write_raw(p, "ZSF1\x01\x00");
        CHECK_THROWS_MATCHES(read_feature_sequence(p), io_error,
                             Catch::Matchers::MessageMatches(
                                 Catch::Matchers::ContainsSubstring("truncated header")));
    }
    SECTION("payload shorter than the header promises") {
        const auto p = dir / "x.bin";
        // header says 10x1 = 40 payload bytes; provide 36
        write_raw(p, raw_header("ZSF1", 10, 1) + std::string(36, '\0'));
        CHECK_THROWS_MATCHES(read_feature_sequence(p), io_error,
                             Catch::Matchers::MessageMatches(
                                 Catch::Matchers::ContainsSubstring("truncated payload")));
    }
    SECTION("dimension overflow is refused before allocating") {
        const auto p = dir / "x.bin";
        write_raw(p, raw_header("ZSF1", 0x01000000u, 0x01000000u));
        CHECK_THROWS_MATCHES(read_feature_sequence(p), io_error,
                             Catch::Matchers::MessageMatches(
                                 Catch::Matchers::ContainsSubstring("dimension overflow")));
    }
    SECTION("zero dimension") {
        const auto p = dir / "x.bin";
        write_raw(p, raw_header("ZSF1", 0, 5));
        CHECK_THROWS_MATCHES(read_feature_sequence(p), io_error,
                             Catch::Matchers::MessageMatches(
                                 Catch::Matchers::ContainsSubstring("zero dimension")));
    }
    SECTION("non-finite payload value") {
        const auto p = dir / "x.bin";
        std::string bytes = raw_header("ZSF1", 1, 1);
        bytes += '\x00';  // 0x7f800000 little endian = +inf
        bytes += '\x00';
        bytes += '\x80';
        bytes += '\x7f';
        write_raw(p, bytes);
        CHECK_THROWS_MATCHES(read_feature_sequence(p), io_error,
                             Catch::Matchers::MessageMatches(
                                 Catch::Matchers::ContainsSubstring("non-finite")));
    }
    SECTION("missing file") {
        CHECK_THROWS_MATCHES(read_feature_sequence(dir / "nope.zsf1"), io_error,
                             Catch::Matchers::MessageMatches(
                                 Catch::Matchers::ContainsSubstring("cannot open")));
    }
    SECTION("empty matrix cannot be written") {
        CHECK_THROWS_AS(write_feature_sequence(dir / "e.zsf1", Matrix()), io_error);
    }
}

TEST_CASE("header peek reads dimensions without the payload") {
    TempDir dir;
    const auto p = dir / "s.zsf1";
    write_feature_sequence(p, Matrix(7, 3));
    const auto h = peek_matrix_header(p);
    CHECK(h.magic == kFeatureMagic);
    CHECK(h.rows == 7);
    CHECK(h.cols == 3);
    CHECK(h.expected_file_size() == fs::file_size(p));
}

namespace {

DatasetManifest example_manifest() {
    DatasetManifest mf;
    mf.base_dir = "/data";
    mf.feature_dim = 1024;
    mf.embedding_dim = 768;
    mf.streams = {"body", "hand"};
    mf.classes = {
        {0, "again", "classes/c0000.zsc1", "to repeat or do again"},
        {1, "bird", "classes/c0001.zsc1", ""},
        {2, "deaf", "classes/c0002.zsc1", "unable to hear"},
    };
    mf.videos = {
        {"v000000", 0, {{"body", "features/v000000_body.zsf1"},
                        {"hand", "features/v000000_hand.zsf1"}}},
        {"v000001", 2, {{"body", "features/v000001_body.zsf1"},
                        {"hand", "features/v000001_hand.zsf1"}}},
    };
    mf.split.train = {0};
    mf.split.val = {1};
    mf.split.test = {2};
    return mf;
}

}  // namespace

TEST_CASE("manifest text round-trips") {
    const DatasetManifest mf = example_manifest();
    const std::string text = format_manifest(mf);
    const DatasetManifest back = parse_manifest_text(text, mf.base_dir);

    CHECK(back.feature_dim == 1024);
    CHECK(back.embedding_dim == 768);
    CHECK(back.streams == mf.streams);
    REQUIRE(back.classes.size() == 3);
    CHECK(back.classes[0].name == "again");
    CHECK(back.classes[0].description == "to repeat or do again");
    CHECK(back.classes[1].description.empty());
    CHECK(back.classes[2].embedding_path == "classes/c0002.zsc1");
    REQUIRE(back.videos.size() == 2);
    CHECK(back.videos[1].class_id == 2);
    REQUIRE(back.videos[1].stream_paths.size() == 2);
    CHECK(back.videos[1].stream_paths[1] ==
          std::make_pair(std::string("hand"), std::string("features/v000001_hand.zsf1")));
    CHECK(back.split.train == std::vector<int>{0});
    CHECK(back.split.test == std::vector<int>{2});

    // formatting is a fixed point
    CHECK(format_manifest(back) == text);
}

TEST_CASE("manifest survives comments, blank lines and split continuation") {
    const std::string text =
        "format zsslr-manifest 1\n"
        "# a comment\n"
        "feature_dim 4\n"
        "\n"
        "embedding_dim 3\n"
        "streams body\n"
        "class 7 seven classes/c7.zsc1  # trailing comment\n"
        "video v1 7 body=f/v1.zsf1\n"
        "split train 7\n"
        "split val 8\n"
        "split test 9\n"
        "split test 10 11\n";
    const auto mf = parse_manifest_text(text, ".");
    CHECK(mf.classes.at(0).name == "seven");
    CHECK(mf.split.test == std::vector<int>{9, 10, 11});
}

TEST_CASE("manifest parse errors carry line context") {
    const std::string head =
        "format zsslr-manifest 1\nfeature_dim 4\nembedding_dim 3\nstreams body\n";

    CHECK_THROWS_MATCHES(parse_manifest_text("feature_dim 4\n", "."), config_error,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("format zsslr-manifest 1")));
    CHECK_THROWS_MATCHES(parse_manifest_text(head + "frobnicate 1\n", "."), config_error,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("unknown manifest directive")));
    CHECK_THROWS_MATCHES(parse_manifest_text(head + "split weekend 1\n", "."), config_error,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("train, val or test")));
    CHECK_THROWS_MATCHES(parse_manifest_text(head + "split train x\n", "."), config_error,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("bad integer")));
    CHECK_THROWS_MATCHES(parse_manifest_text(head + "description 5 lonely\n", "."),
                         config_error,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("undeclared class")));
    CHECK_THROWS_MATCHES(parse_manifest_text(head + "feature_dim 8\n", "."), config_error,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("duplicate")));
    CHECK_THROWS_MATCHES(parse_manifest_text(head + "video v1 0 body\n", "."), config_error,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("<stream>=<path>")));
    CHECK_THROWS(parse_manifest_text("", "."));
    CHECK_THROWS_MATCHES(
        parse_manifest_text("format zsslr-manifest 1\nembedding_dim 3\nstreams body\n", "."),
        config_error,
        Catch::Matchers::MessageMatches(
            Catch::Matchers::ContainsSubstring("missing 'feature_dim'")));
}

TEST_CASE("manifest file io") {
    TempDir dir;
    const DatasetManifest mf = example_manifest();
    write_manifest(mf, dir / "manifest");
    const DatasetManifest back = load_manifest(dir / "manifest");
    CHECK(back.base_dir == dir.path);
    CHECK(back.classes.size() == 3);
    CHECK(back.resolve("classes/c0000.zsc1") == dir.path / "classes/c0000.zsc1");
    CHECK_THROWS_AS(load_manifest(dir / "missing"), io_error);
}

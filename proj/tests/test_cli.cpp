#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <sstream>
#include <string>
#include <vector>

#include "testdir.hpp"
#include "zsslr/cli.hpp"

using namespace zsslr;
using Catch::Matchers::ContainsSubstring;

namespace {

struct CliResult {
    int code = 0;
    std::string out;
    std::string err;
};

CliResult run_cli(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = cli::dispatch(args, out, err);
    return {code, out.str(), err.str()};
}

std::string str(const std::filesystem::path& p) { return p.string(); }

/// A small but full-rank dataset: enough train videos that the Gram matrix is
/// invertible even without a ridge.
CliResult make_dataset(const std::filesystem::path& dir) {
    return run_cli({"synth", "--out", str(dir), "--train_classes", "12",
                    "--val_classes", "4", "--test_classes", "5", "--feature_dim", "16",
                    "--embedding_dim", "8", "--videos_per_class", "4", "--time_steps",
                    "3", "--noise_sigma", "0.05", "--seed", "11"});
}

std::string first_line(const std::string& text) {
    return text.substr(0, text.find('\n'));
}

}  // namespace

TEST_CASE("baseline subcommand prints chance accuracies") {
    const CliResult res = run_cli({"baseline", "--classes", "50", "--topk", "1,2,5"});
    CHECK(res.code == 0);
    CHECK_THAT(res.out, ContainsSubstring("analytic 2.0"));
    CHECK_THAT(res.out, ContainsSubstring("analytic 4.0"));
    CHECK_THAT(res.out, ContainsSubstring("analytic 10.0"));

    const CliResult thirty = run_cli({"baseline", "--classes", "30", "--topk", "1"});
    CHECK(thirty.code == 0);
    CHECK_THAT(thirty.out, ContainsSubstring("analytic 3.3"));
}

TEST_CASE("unknown subcommand exits 2 with a usage line") {
    const CliResult res = run_cli({"frobnicate"});
    CHECK(res.code == 2);
    CHECK_THAT(res.err, ContainsSubstring("error: usage: unknown subcommand 'frobnicate'"));
    CHECK(res.out.empty());

    const CliResult empty = run_cli({});
    CHECK(empty.code == 2);
    CHECK_THAT(empty.err, ContainsSubstring("error: usage:"));
}

TEST_CASE("gradcheck subcommand passes at the published tolerance") {
    const CliResult res = run_cli({"gradcheck", "--seed", "7"});
    CHECK(res.code == 0);
    CHECK_THAT(res.out, ContainsSubstring("within 1e-4"));
    // one line per suite plus the summary
    CHECK(std::count(res.out.begin(), res.out.end(), '\n') >= 12);
}

TEST_CASE("synth, validate and experiment compose") {
    const TempDir td;
    const auto data = td.path / "data";
    const CliResult synth = make_dataset(data);
    REQUIRE(synth.code == 0);
    CHECK_THAT(synth.out, ContainsSubstring("21 classes"));

    const CliResult val = run_cli({"validate", "--manifest", str(data / "manifest")});
    CHECK(val.code == 0);
    CHECK_THAT(val.out, ContainsSubstring("ok:"));
    CHECK_THAT(val.out, ContainsSubstring("splits 12/4/5"));

    const auto results = td.path / "results";
    const CliResult exp =
        run_cli({"experiment", "--manifest", str(data / "manifest"), "--model", "eszsl",
                 "--runs", "2", "--topk", "1,2,5", "--out", str(results)});
    REQUIRE(exp.code == 0);
    CHECK_THAT(exp.out, ContainsSubstring("eszsl"));

    const std::string csv = read_bytes(results / "report.csv");
    CHECK(first_line(csv) == "method,encoder,streams,split,k,accuracy_mean,accuracy_std,runs");
    CHECK_THAT(csv, ContainsSubstring("eszsl,avgpool,body,val,1,"));
    CHECK_THAT(csv, ContainsSubstring("eszsl,avgpool,body,test,5,"));
    CHECK(read_bytes(results / "report.txt") == exp.out);
}

TEST_CASE("rerunning with the same config writes byte-identical artifacts") {
    const TempDir td;
    const auto data = td.path / "data";
    REQUIRE(make_dataset(data).code == 0);

    const std::vector<std::string> base = {"experiment", "--manifest",
                                           str(data / "manifest"), "--model", "sae",
                                           "--lambda", "0.1", "--runs", "2"};
    auto with_out = [&](const std::string& out_dir) {
        std::vector<std::string> args = base;
        args.insert(args.end(), {"--out", out_dir});
        return args;
    };
    REQUIRE(run_cli(with_out(str(td.path / "a"))).code == 0);
    REQUIRE(run_cli(with_out(str(td.path / "b"))).code == 0);
    CHECK(read_bytes(td.path / "a" / "report.csv") ==
          read_bytes(td.path / "b" / "report.csv"));
    CHECK(read_bytes(td.path / "a" / "report.txt") ==
          read_bytes(td.path / "b" / "report.txt"));

    // the model artifact is bit-stable too
    auto train_to = [&](const std::string& out_dir) {
        return run_cli({"train", "--manifest", str(data / "manifest"), "--model", "eszsl",
                        "--lambda", "0.001", "--gamma", "0.001", "--out", out_dir});
    };
    REQUIRE(train_to(str(td.path / "m1")).code == 0);
    REQUIRE(train_to(str(td.path / "m2")).code == 0);
    CHECK(read_bytes(td.path / "m1" / "model.zsm1") ==
          read_bytes(td.path / "m2" / "model.zsm1"));

    // regenerating the dataset reproduces every byte as well
    const auto data2 = td.path / "data2";
    REQUIRE(make_dataset(data2).code == 0);
    CHECK(read_bytes(data / "manifest") == read_bytes(data2 / "manifest"));
    CHECK(read_bytes(data / "classes" / "c0000.zsc1") ==
          read_bytes(data2 / "classes" / "c0000.zsc1"));
}

TEST_CASE("thread count does not change experiment results") {
    const TempDir td;
    const auto data = td.path / "data";
    REQUIRE(make_dataset(data).code == 0);

    auto run_with = [&](std::vector<std::string> extra, const std::string& out_dir) {
        std::vector<std::string> args = {"experiment", "--manifest",
                                         str(data / "manifest"), "--model", "eszsl",
                                         "--runs", "1", "--out", out_dir};
        args.insert(args.end(), extra.begin(), extra.end());
        return run_cli(args);
    };
    REQUIRE(run_with({"--threads", "1"}, str(td.path / "t1")).code == 0);
    REQUIRE(run_with({"--threads", "4"}, str(td.path / "t4")).code == 0);
    CHECK(read_bytes(td.path / "t1" / "report.csv") ==
          read_bytes(td.path / "t4" / "report.csv"));

    // ZSSLR_THREADS is the default when the flag is absent
    setenv("ZSSLR_THREADS", "3", 1);
    const CliResult env_run = run_with({}, str(td.path / "tenv"));
    unsetenv("ZSSLR_THREADS");
    REQUIRE(env_run.code == 0);
    CHECK(read_bytes(td.path / "t1" / "report.csv") ==
          read_bytes(td.path / "tenv" / "report.csv"));
}

TEST_CASE("train writes a model that eval can score") {
    const TempDir td;
    const auto data = td.path / "data";
    REQUIRE(make_dataset(data).code == 0);

    const CliResult train =
        run_cli({"train", "--manifest", str(data / "manifest"), "--model", "sae",
                 "--lambda", "0.1", "--out", str(td.path / "model")});
    REQUIRE(train.code == 0);
    CHECK_THAT(train.out, ContainsSubstring("val top-1"));

    const CliResult eval = run_cli(
        {"eval", "--model_file", str(td.path / "model" / "model.zsm1"), "--manifest",
         str(data / "manifest"), "--topk", "1,2,5", "--out", str(td.path / "scored")});
    REQUIRE(eval.code == 0);
    CHECK_THAT(eval.out, ContainsSubstring("sae"));
    const std::string csv = read_bytes(td.path / "scored" / "report.csv");
    CHECK_THAT(csv, ContainsSubstring("sae,avgpool,body,test,1,"));
    CHECK_THAT(csv, ContainsSubstring(",1\n"));  // single run
}

TEST_CASE("config file drives a run and flags override its keys") {
    const TempDir td;
    const auto data = td.path / "data";
    REQUIRE(make_dataset(data).code == 0);

    write_bytes(td.path / "run.cfg",
                "format zsslr-config 1\n"
                "manifest data/manifest\n"
                "model sae\n"
                "lambda 0.1\n"
                "topk 1 2\n"
                "runs 2\n"
                "seed 3\n"
                "out from_config\n");

    const CliResult from_file =
        run_cli({"experiment", "--config", str(td.path / "run.cfg")});
    REQUIRE(from_file.code == 0);
    // relative paths in the file resolve against the file's directory
    const std::string csv = read_bytes(td.path / "from_config" / "report.csv");
    CHECK_THAT(csv, ContainsSubstring("sae,avgpool,body,val,1,"));
    CHECK_THAT(csv, ContainsSubstring(",2\n"));

    const CliResult overridden =
        run_cli({"experiment", "--config", str(td.path / "run.cfg"), "--model", "eszsl",
                 "--out", str(td.path / "overridden")});
    REQUIRE(overridden.code == 0);
    const std::string csv2 = read_bytes(td.path / "overridden" / "report.csv");
    CHECK_THAT(csv2, ContainsSubstring("eszsl,avgpool,body,val,1,"));
    CHECK_THAT(first_line(csv2),
               ContainsSubstring("method,encoder,streams,split,k"));

    const CliResult bad_key =
        run_cli({"experiment", "--config", str(td.path / "run.cfg"), "--lambda", "x"});
    CHECK(bad_key.code == 3);
    CHECK_THAT(bad_key.err, ContainsSubstring("error: config:"));
}

TEST_CASE("validate lists violations and exits 3") {
    const TempDir td;
    write_bytes(td.path / "manifest",
                "format zsslr-manifest 1\n"
                "feature_dim 4\n"
                "embedding_dim 4\n"
                "streams body\n"
                "class 0 a classes/c0000.zsc1\n"
                "class 1 b classes/c0001.zsc1\n"
                "video v0 0 body=features/v0.zsf1\n"
                "split train 0 1\n"
                "split val 1\n"
                "split test 1\n");
    const CliResult res = run_cli({"validate", "--manifest", str(td.path / "manifest")});
    CHECK(res.code == 3);
    CHECK_THAT(res.out, ContainsSubstring("violation: class 1 is in both train and val"));
    CHECK_THAT(res.out, ContainsSubstring("missing file"));
    CHECK_THAT(res.err, ContainsSubstring("error: config: dataset has"));
}

TEST_CASE("config problems exit 3 and numeric failures exit 4") {
    const TempDir td;

    const CliResult missing = run_cli({"train", "--manifest", "does/not/exist"});
    CHECK(missing.code == 3);
    CHECK(first_line(missing.err).starts_with("error: "));

    const CliResult no_manifest = run_cli({"experiment", "--model", "eszsl"});
    CHECK(no_manifest.code == 3);
    CHECK_THAT(no_manifest.err, ContainsSubstring("error: config:"));

    // too few training videos to span the feature space and no ridge: the
    // Gram matrix is singular and the closed-form solve must refuse
    const auto tiny = td.path / "tiny";
    REQUIRE(run_cli({"synth", "--out", str(tiny), "--train_classes", "2",
                     "--val_classes", "2", "--test_classes", "2", "--feature_dim", "16",
                     "--embedding_dim", "8", "--videos_per_class", "2", "--time_steps",
                     "3", "--noise_sigma", "0.05", "--seed", "5"})
                .code == 0);
    const CliResult singular =
        run_cli({"experiment", "--manifest", str(tiny / "manifest"), "--model", "eszsl",
                 "--lambda", "0", "--gamma", "0", "--runs", "1", "--topk", "1", "--out",
                 str(td.path / "x")});
    CHECK(singular.code == 4);
    CHECK_THAT(singular.err, ContainsSubstring("error: numeric: run 1 (seed 1):"));
}

#include <doctest.h>

#include <cstdlib>
#include <regex>
#include <sstream>

#include "helpers.hpp"
#include "pdl/cli.hpp"
#include "pdl/config.hpp"
#include "pdl/report.hpp"
#include "pdl/weights.hpp"

using namespace pdl;
using testing::read_text;
using testing::TempDir;

namespace {

struct Outcome {
    int code = 0;
    std::string out;
    std::string err;
};

Outcome run(std::vector<std::string> args) {
    args.insert(args.begin(), "pdl");
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

// Small but complete settings so each command finishes in well under a second.
std::vector<std::string> small(const std::filesystem::path& dir) {
    return {"-o", dir.string(), "--set", "synth.vocab_size=80", "--set", "synth.num_tokens=6000",
            "--set", "synth.num_rules=4", "--set", "model.embed_dim=4", "--epochs", "1",
            "--set", "eval.num_prompts=2", "--set", "eval.gen_len=8"};
}

Outcome run_in(const std::string& command, const std::filesystem::path& dir, std::vector<std::string> extra = {}) {
    std::vector<std::string> args{command};
    auto common = small(dir);
    args.insert(args.end(), common.begin(), common.end());
    args.insert(args.end(), extra.begin(), extra.end());
    return run(args);
}

bool error_line_ok(const std::string& err, int code) {
    static const std::regex line(R"(error: code=(\d+) kind=[a-z_]+ message="(?:[^"\\]|\\.)*"\n)");
    std::smatch m;
    return std::regex_match(err, m, line) && std::stoi(m[1]) == code;
}

}  // namespace

TEST_CASE("help documents exit codes") {
    Outcome r = run({"--help"});
    CHECK(r.code == 0);
    for (const char* word : {"synth", "freq", "weights", "gradcheck", "train", "eval", "compare", "PDL_OUT_DIR"})
        CHECK(r.out.find(word) != std::string::npos);
    for (int code = 0; code <= 8; ++code) CHECK(r.out.find(std::to_string(code) + " ") != std::string::npos);
}

TEST_CASE("usage errors") {
    Outcome none = run({});
    CHECK(none.code == cli::kExitUsage);
    CHECK(error_line_ok(none.err, cli::kExitUsage));
    Outcome bogus = run({"synth", "--bogus"});
    CHECK(bogus.code == cli::kExitUsage);
    CHECK(error_line_ok(bogus.err, cli::kExitUsage));
}

TEST_CASE("full pipeline") {
    TempDir dir("cli");
    for (const char* cmd : {"synth", "freq", "weights", "train", "eval"}) {
        Outcome r = run_in(cmd, dir.path());
        INFO(cmd << ": " << r.err);
        CHECK(r.code == 0);
        CHECK(r.err.empty());
        CHECK(std::filesystem::exists(dir / (std::string(cmd) + ".config.ini")));
    }
    for (const char* file : {"vocab.tsv", "train.ids", "valid.ids", "rules.tsv", "freq.tsv", "weights.tsv",
                             "model.ckpt", "history.json", "metrics.json"})
        CHECK(std::filesystem::exists(dir / file));

    // Headers carry the tool version and the config hash echoed next to them.
    const std::string echo = read_text(dir / "weights.config.ini");
    RunConfig replay = parse_config(echo, "echo");
    const std::string hash = config_hash(replay);
    CHECK(echo.find("config_hash=" + hash) != std::string::npos);
    const std::string header = read_text(dir / "weights.tsv").substr(0, 300);
    CHECK(header.find("tool=" + std::string(kToolVersion)) != std::string::npos);
    CHECK(header.find("config_hash=" + hash) != std::string::npos);

    auto metrics = read_json(dir / "metrics.json");
    CHECK(metrics["config_hash"] == hash);
    CHECK(metrics["tool"] == std::string(kToolVersion));
}

TEST_CASE("alpha zero weight file") {
    TempDir dir("cli_alpha0");
    REQUIRE(run_in("synth", dir.path()).code == 0);
    REQUIRE(run_in("freq", dir.path()).code == 0);
    for (const char* norm : {"true", "false"}) {
        REQUIRE(run_in("weights", dir.path(), {"--alpha", "0", "--set", std::string("pdl.mean_normalized=") + norm})
                    .code == 0);
        WeightTable w = load_weights(dir / "weights.tsv");
        CHECK(w[kPad] == 0.0);
        for (std::size_t i = 1; i < w.size(); ++i) CHECK(w.weights[i] == w.weights[1]);
        CHECK(w.weights[1] == 1.0);
    }
}

TEST_CASE("gradcheck at default sizes") {
    TempDir dir("cli_grad");
    Outcome r = run({"gradcheck", "-o", dir.path().string()});
    CHECK(r.code == 0);
    CHECK(r.out.find("PASS") != std::string::npos);
    auto j = read_json(dir / "gradcheck.json");
    CHECK(j["passed"] == true);
    CHECK(j["loss_max_rel_error"].get<double>() < 1e-5);
    CHECK(j["model_max_rel_error"].get<double>() < 1e-5);

    Outcome strict = run({"gradcheck", "-o", dir.path().string(), "--set", "gradcheck.threshold=1e-30"});
    CHECK(strict.code == cli::kExitCheckFailed);
}

TEST_CASE("outputs are byte identical across runs") {
    TempDir a("cli_det_a"), b("cli_det_b");
    for (const char* cmd : {"synth", "freq", "weights", "train", "eval"}) {
        REQUIRE(run_in(cmd, a.path()).code == 0);
        REQUIRE(run_in(cmd, b.path()).code == 0);
    }
    for (const auto& entry : std::filesystem::directory_iterator(a.path())) {
        const auto name = entry.path().filename();
        INFO(name.string());
        CHECK(read_text(entry.path()) == read_text(b.path() / name));
    }
}

TEST_CASE("error exit codes") {
    TempDir dir("cli_err");
    SUBCASE("missing input is an io error") {
        Outcome r = run_in("freq", dir.path());
        CHECK(r.code == cli::kExitIo);
        CHECK(error_line_ok(r.err, cli::kExitIo));
    }
    SUBCASE("corrupt input is a parse error") {
        REQUIRE(run_in("synth", dir.path()).code == 0);
        REQUIRE(run_in("freq", dir.path()).code == 0);
        testing::write_text(dir / "freq.tsv", "#freqtable v1 vocab_size=2 total=9\n0\t1\n1\t1\n");
        Outcome r = run_in("weights", dir.path());
        CHECK(r.code == cli::kExitParse);
        CHECK(error_line_ok(r.err, cli::kExitParse));
    }
    SUBCASE("constraint violations are config errors") {
        CHECK(run_in("synth", dir.path(), {"--alpha", "-1"}).code == cli::kExitConfig);
        CHECK(run_in("synth", dir.path(), {"--set", "pdl.gamma=1"}).code == cli::kExitConfig);
        testing::write_text(dir / "x.ini", "[train]\nwarmup = 3\n");
        Outcome r = run({"synth", "-c", (dir / "x.ini").string()});
        CHECK(r.code == cli::kExitConfig);
        CHECK(error_line_ok(r.err, cli::kExitConfig));
        CHECK(r.err.find("x.ini:2") != std::string::npos);
    }
    SUBCASE("malformed config is a parse error") {
        testing::write_text(dir / "y.ini", "[train\n");
        CHECK(run({"synth", "-c", (dir / "y.ini").string()}).code == cli::kExitParse);
    }
    SUBCASE("inconsistent data") {
        REQUIRE(run_in("synth", dir.path()).code == 0);
        testing::write_text(dir / "freq.tsv", "#freqtable v1 vocab_size=2 total=2\n0\t1\n1\t1\n");
        Outcome r = run_in("train", dir.path());
        CHECK(r.code == cli::kExitData);
        CHECK(error_line_ok(r.err, cli::kExitData));
    }
}

TEST_CASE("output directory from the environment") {
    TempDir dir("cli_env");
    ::setenv(std::string(kOutDirEnv).c_str(), dir.path().string().c_str(), 1);
    Outcome r = run({"synth", "--set", "synth.vocab_size=50", "--set", "synth.num_tokens=500"});
    ::unsetenv(std::string(kOutDirEnv).c_str());
    CHECK(r.code == 0);
    CHECK(std::filesystem::exists(dir / "train.ids"));
}

TEST_CASE("dump-config reproduces the effective config") {
    Outcome r = run({"train", "--dump-config", "--alpha", "0.25", "--seed", "9"});
    REQUIRE(r.code == 0);
    RunConfig c = parse_config(r.out, "dump");
    CHECK(c.train.alpha == 0.25);
    CHECK(c.train.seed == 9);
    CHECK(c.synth.seed == 9);
    CHECK(serialize_config(c) == r.out);
}

TEST_CASE("compare on a small task") {
    TempDir dir("cli_compare");
    Outcome r = run({"compare", "-o", dir.path().string(), "--set", "synth.vocab_size=80", "--set",
                     "synth.num_tokens=6000", "--set", "synth.num_rules=4", "--set", "compare.seeds=1,2",
                     "--epochs", "1", "--set", "eval.num_prompts=2"});
    INFO(r.err);
    REQUIRE(r.code == 0);
    CompareReport rep = report_from_json(read_json(dir / "report.json"));
    CHECK(rep.runs.size() == 2);
    CHECK(rep.summary.runs == 2);
    CHECK(rep.runs[0].seed == 1);
    CHECK(rep.runs[0].ce_generalization_gap.has_value());
    CHECK(parse_config(rep.config, "report").compare_seeds == std::vector<std::uint64_t>{1, 2});
    CHECK(std::filesystem::exists(dir / "report.csv"));
}

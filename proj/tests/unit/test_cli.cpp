#include "tmcc/cli.hpp"
#include "tmcc/config.hpp"
#include "tmcc/io.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <iostream>
#include <sstream>

using namespace tmcc;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("tmcc_cli_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

struct Outcome {
    int code;
    std::string err;
};

Outcome run(const std::vector<std::string>& args) {
    std::ostringstream err;
    auto* old = std::cerr.rdbuf(err.rdbuf());
    const int code = cli::run(args);
    std::cerr.rdbuf(old);
    return {code, err.str()};
}

fs::path minimal_config(const fs::path& dir, double missing = 0.3, const std::string& extra = "") {
    const fs::path p = dir / "config.ini";
    std::ofstream(p) << "[scenario]\nn = 10\nd = 4\nm = 4\nrank = 2\nmissing_rate = " << missing << "\n"
                     << "[solver]\nmax_iters = 200\n" << extra;
    return p;
}

std::size_t count_files(const fs::path& dir) {
    std::size_t n = 0;
    for (const auto& e : fs::directory_iterator(dir)) n += e.is_regular_file();
    return n;
}

}  // namespace

TEST(CliGenerate, WritesFiveFiles) {
    const fs::path dir = scratch("gen");
    const auto cfg = minimal_config(dir);
    const Outcome r = run({"generate", "--config", cfg.string(), "--out", (dir / "out").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(count_files(dir / "out"), 5u);
    for (const char* f : {"X_star.csv", "Z_star_1.csv", "Z_star_2.csv", "Z_star_3.csv", "dataset.csv"}) {
        EXPECT_TRUE(fs::exists(dir / "out" / f)) << f;
    }
    const Dataset ds = io::read_dataset(dir / "out" / "dataset.csv");
    EXPECT_TRUE(validate(ds).empty());
}

TEST(CliGenerate, SameSeedByteIdentical) {
    const fs::path dir = scratch("gen_repeat");
    const auto cfg = minimal_config(dir);
    ASSERT_EQ(run({"generate", "--config", cfg.string(), "--out", (dir / "a").string()}).code, 0);
    ASSERT_EQ(run({"generate", "--config", cfg.string(), "--out", (dir / "b").string()}).code, 0);
    for (const auto& e : fs::directory_iterator(dir / "a")) {
        EXPECT_EQ(slurp(e.path()), slurp(dir / "b" / e.path().filename())) << e.path();
    }
    ASSERT_EQ(run({"generate", "--config", cfg.string(), "--seed", "9", "--out", (dir / "c").string()}).code, 0);
    EXPECT_NE(slurp(dir / "a" / "dataset.csv"), slurp(dir / "c" / "dataset.csv"));
}

TEST(CliGenerate, NoMissingMeansNoNaN) {
    const fs::path dir = scratch("gen_full");
    const auto cfg = minimal_config(dir, 0.0);
    ASSERT_EQ(run({"generate", "--config", cfg.string(), "--out", (dir / "out").string()}).code, 0);
    EXPECT_EQ(slurp(dir / "out" / "dataset.csv").find("NaN"), std::string::npos);
}

TEST(CliFit, ToyDatasetTraceLength) {
    const fs::path dir = scratch("fit");
    const auto cfg = minimal_config(dir);
    ASSERT_EQ(run({"generate", "--config", cfg.string(), "--out", (dir / "gen").string()}).code, 0);
    const Outcome r = run({"fit", "--config", cfg.string(), "--data", (dir / "gen" / "dataset.csv").string(), "--out",
                       (dir / "fit").string(), "--methods", "TMCC"});
    ASSERT_EQ(r.code, 0) << r.err;
    std::ifstream in(dir / "fit" / "trace_TMCC_0.csv");
    std::string line;
    int rows = -1;
    while (std::getline(in, line)) ++rows;
    EXPECT_GE(rows, 2);
    EXPECT_LE(rows, 201);
    const auto recs = io::read_records(dir / "fit" / "records.csv");
    ASSERT_EQ(recs.size(), 1u);
    EXPECT_EQ(recs[0].method, Method::TMCC);
    const auto M = io::read_matrix(dir / "fit" / "M_hat_TMCC.csv");
    EXPECT_EQ(M.values.rows(), 10);
    EXPECT_EQ(M.values.cols(), 16);
    EXPECT_EQ(M.blocks, (std::vector<Index>{4, 4, 4, 4}));
}

TEST(CliFit, RerunIdentical) {
    const fs::path dir = scratch("fit_repeat");
    const auto cfg = minimal_config(dir);
    ASSERT_EQ(run({"generate", "--config", cfg.string(), "--out", (dir / "gen").string()}).code, 0);
    const std::string data = (dir / "gen" / "dataset.csv").string();
    ASSERT_EQ(run({"fit", "--config", cfg.string(), "--data", data, "--out", (dir / "a").string()}).code, 0);
    ASSERT_EQ(run({"fit", "--config", cfg.string(), "--data", data, "--out", (dir / "b").string()}).code, 0);
    for (const auto& e : fs::directory_iterator(dir / "a")) {
        if (e.path().filename() == "timings.csv") continue;
        EXPECT_EQ(slurp(e.path()), slurp(dir / "b" / e.path().filename())) << e.path();
    }
}

TEST(CliFit, RaggedCsvIsParseError) {
    const fs::path dir = scratch("fit_ragged");
    const auto cfg = minimal_config(dir);
    std::ofstream(dir / "bad.csv") << "# dataset rows=2 cols=3 blocks=1,2 families=bernoulli\n1,0,1\n1,0\n";
    const Outcome r = run({"fit", "--config", cfg.string(), "--data", (dir / "bad.csv").string(), "--out",
                       (dir / "out").string()});
    EXPECT_EQ(r.code, cli::kConfigError);
    EXPECT_NE(r.err.find("bad.csv:3"), std::string::npos) << r.err;
}

TEST(CliFit, InvalidDatasetExitsWithValidationCode) {
    const fs::path dir = scratch("fit_invalid");
    const auto cfg = minimal_config(dir);
    std::ofstream(dir / "bad.csv") << "# dataset rows=2 cols=3 blocks=1,2 families=bernoulli\n1,0,2\n1,0,NaN\n";
    const Outcome r = run({"fit", "--config", cfg.string(), "--data", (dir / "bad.csv").string(), "--out",
                       (dir / "out").string()});
    EXPECT_EQ(r.code, cli::kValidationError);
    EXPECT_NE(r.err.find("outside bernoulli support"), std::string::npos) << r.err;
}

TEST(CliFit, SolverAbortExitCode) {
    const fs::path dir = scratch("fit_abort");
    const auto cfg = minimal_config(dir, 0.3,
                                    "eta = 1e6\nauto_step = false\nmax_step_halvings = 0\n");
    ASSERT_EQ(run({"generate", "--config", cfg.string(), "--out", (dir / "gen").string()}).code, 0);
    const Outcome r = run({"fit", "--config", cfg.string(), "--data", (dir / "gen" / "dataset.csv").string(), "--out",
                       (dir / "out").string(), "--methods", "MC0"});
    EXPECT_EQ(r.code, cli::kSolverAbort) << r.err;
}

TEST(CliBench, SummaryRowsAndStageTimes) {
    const fs::path dir = scratch("bench");
    const auto cfg = minimal_config(dir, 0.3, "[run]\ntrials = 2\n[tuning]\ntau2_mult = 0.5,1\ntau1_mult = 0,1\n");
    const Outcome r = run({"bench", "--config", cfg.string(), "--out", (dir / "out").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto rows = io::read_summary(dir / "out" / "summary.csv");
    EXPECT_EQ(rows.size(), 4u);
    for (const auto& row : rows) {
        EXPECT_EQ(row.trials, 2);
        EXPECT_EQ(row.stage_time.has_value(), row.method == Method::TS || row.method == Method::CMC_SI);
    }
    EXPECT_EQ(io::read_records(dir / "out" / "records.csv").size(), 8u);
    EXPECT_TRUE(fs::exists(dir / "out" / "trace_TS_1.csv"));
    EXPECT_TRUE(fs::exists(dir / "out" / "tuning.csv"));
    EXPECT_EQ(load_config(dir / "out" / "config.ini").trials, 2);
}

TEST(CliBench, RerunReproducesRecords) {
    const fs::path dir = scratch("bench_repeat");
    const auto cfg = minimal_config(dir, 0.3, "[tuning]\ntau1 = 0.01\ntau2 = 0.002\n");
    for (const char* out : {"a", "b"}) {
        ASSERT_EQ(run({"bench", "--config", cfg.string(), "--out", (dir / out).string(), "--trials", "2",
                       "--methods", "TMCC,MC0", "--workers", "2"})
                      .code,
                  0);
    }
    EXPECT_EQ(slurp(dir / "a" / "records.csv"), slurp(dir / "b" / "records.csv"));
    const auto a = io::read_summary(dir / "a" / "summary.csv");
    const auto b = io::read_summary(dir / "b" / "summary.csv");
    ASSERT_EQ(a.size(), 2u);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].re_x.mean, b[i].re_x.mean);
        EXPECT_EQ(a[i].re_z.se, b[i].re_z.se);
    }
}

TEST(CliBench, NoiseFlagChangesData) {
    const fs::path dir = scratch("bench_noise");
    const auto cfg = minimal_config(dir, 0.3, "[tuning]\ntau1 = 0.01\ntau2 = 0.002\n");
    ASSERT_EQ(run({"bench", "--config", cfg.string(), "--out", (dir / "a").string(), "--trials", "1", "--methods",
                   "MC0"})
                  .code,
              0);
    ASSERT_EQ(run({"bench", "--config", cfg.string(), "--out", (dir / "b").string(), "--trials", "1", "--methods",
                   "MC0", "--noise-sd", "0.5"})
                  .code,
              0);
    EXPECT_NE(io::read_records(dir / "a" / "records.csv")[0].data_hash,
              io::read_records(dir / "b" / "records.csv")[0].data_hash);
}

TEST(CliArgs, ErrorsAreConfigErrors) {
    const fs::path dir = scratch("args");
    EXPECT_EQ(run({}).code, cli::kConfigError);
    EXPECT_EQ(run({"generate", "--bogus"}).code, cli::kConfigError);
    EXPECT_EQ(run({"bench", "--trials", "0"}).code, cli::kConfigError);
    EXPECT_EQ(run({"bench", "--methods", "TMCC,NOPE"}).code, cli::kConfigError);
    std::ofstream(dir / "bad.ini") << "[scenario]\nunknown_key = 3\n";
    EXPECT_EQ(run({"generate", "--config", (dir / "bad.ini").string()}).code, cli::kConfigError);
    EXPECT_EQ(run({"generate", "--config", (dir / "absent.ini").string()}).code, cli::kConfigError);
}

#include "cli.hpp"

#include "bondflow/lti.hpp"
#include "bondflow/dsl.hpp"

#include "support/support.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace bondflow;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code = -1;
    std::string out;
    std::string err;
};

Result run(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    Result r;
    r.code = cli::run(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() / ("bondflow_cli_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                            "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    std::string write(const std::string& name, const std::string& text) const {
        std::ofstream(path(name)) << text;
        return path(name);
    }

    fs::path dir_;
};

}  // namespace

TEST_F(Cli, CheckLift) {
    const Result r = run({"check", fixtures::corpus_path("lift_a_load")});
    EXPECT_EQ(r.code, cli::kExitOk) << r.err;
    EXPECT_NE(r.out.find("states: 5, differential: 0"), std::string::npos) << r.out;
}

TEST_F(Cli, CheckOtherCorpusModels) {
    EXPECT_NE(run({"check", fixtures::corpus_path("solenoid")}).out.find("states: 3, differential: 0"), std::string::npos);
    EXPECT_NE(run({"check", fixtures::corpus_path("filter_chopper")}).out.find("states: 2, differential: 0"), std::string::npos);
}

TEST_F(Cli, CheckJunctionRuleViolation) {
    const std::string file = write("bad.bg", "model bad\nelement SE s { value = 1 }\nelement R r { k = 1 }\nbond b1 s -> r\n");
    const Result r = run({"check", file});
    EXPECT_EQ(r.code, cli::kExitDiagnostics);
    EXPECT_NE(r.err.find(std::string(rules::kJunctionRule)), std::string::npos) << r.err;
    // check writes no files
    EXPECT_EQ(std::distance(fs::directory_iterator(dir_), fs::directory_iterator{}), 1);
}

TEST_F(Cli, CheckDerivativeCausality) {
    const std::string file = write("two.bg", emit(fixtures::two_inertias()));
    const Result r = run({"check", file});
    EXPECT_EQ(r.code, cli::kExitDiagnostics);
    EXPECT_NE(r.out.find("derivative-causality J2"), std::string::npos) << r.out;
}

TEST_F(Cli, CheckAlgebraicLoop) {
    const Result r = run({"check", write("loop.bg", emit(fixtures::resistive_loop()))});
    EXPECT_EQ(r.code, cli::kExitDiagnostics);
    EXPECT_NE(r.err.find("loop"), std::string::npos) << r.err;
}

TEST_F(Cli, SimulateWritesCsvAndSummary) {
    const std::string input = fixtures::corpus_path("filter_chopper");
    const std::string before = fixtures::read_text(input);
    const std::string csv = path("out.csv");
    const Result r = run({"simulate", input, "--dt", "1e-4", "--t-end", "0.1", "-o", csv});
    ASSERT_EQ(r.code, cli::kExitOk) << r.err;
    const std::string text = fixtures::read_text(csv);
    EXPECT_EQ(text.rfind("t,e.b1,f.b1,", 0), 0u);
    EXPECT_NE(r.out.find("E_supplied:"), std::string::npos);
    EXPECT_NE(r.out.find("residual:"), std::string::npos);
    EXPECT_EQ(fixtures::read_text(input), before);
    // 1001 samples plus the header
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1002);
}

TEST_F(Cli, SimulateDeterministic) {
    const std::string input = fixtures::corpus_path("solenoid");
    const Result a = run({"simulate", input, "--t-end", "0.02", "--record-every", "5"});
    const Result b = run({"simulate", input, "--t-end", "0.02", "--record-every", "5"});
    ASSERT_EQ(a.code, cli::kExitOk);
    EXPECT_EQ(a.out, b.out);
    EXPECT_EQ(a.err, b.err);
}

TEST_F(Cli, SimulateSetOverride) {
    const std::string input = fixtures::corpus_path("filter_chopper");
    const Result r = run({"simulate", input, "--t-end", "0.01", "--set", "u_in=0", "--set", "load=0"});
    ASSERT_EQ(r.code, cli::kExitOk) << r.err;
    std::istringstream in(r.out);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        std::istringstream cells(line);
        std::string cell;
        std::getline(cells, cell, ',');  // time
        while (std::getline(cells, cell, ',')) EXPECT_EQ(std::stod(cell), 0.0) << line;
    }
}

TEST_F(Cli, SimulateUnknownSetIsUsageError) {
    const Result r = run({"simulate", fixtures::corpus_path("filter_chopper"), "--set", "nope=1"});
    EXPECT_EQ(r.code, cli::kExitUsage);
    EXPECT_NE(r.err.find("nope"), std::string::npos);
    EXPECT_EQ(run({"simulate", fixtures::corpus_path("filter_chopper"), "--set", "u_in"}).code, cli::kExitUsage);
}

TEST_F(Cli, FlagErrors) {
    const std::string input = fixtures::corpus_path("lift_a_load");
    EXPECT_EQ(run({"simulate", input, "--dt", "-1"}).code, cli::kExitUsage);
    EXPECT_EQ(run({"simulate", input, "--dt", "abc"}).code, cli::kExitUsage);
    EXPECT_EQ(run({"simulate", input, "--record-every", "0"}).code, cli::kExitUsage);
    EXPECT_EQ(run({"simulate", input, "--bogus"}).code, cli::kExitUsage);
    EXPECT_EQ(run({"frobnicate"}).code, cli::kExitUsage);
    EXPECT_EQ(run({}).code, cli::kExitUsage);
    EXPECT_EQ(run({"check", path("missing.bg")}).code, cli::kExitUsage);
    EXPECT_EQ(run({"simulate", input, "-o", path("no/such/dir/out.csv")}).code, cli::kExitUsage);
}

TEST_F(Cli, LinearizeFilter) {
    const std::string file = write("f.bg", emit(fixtures::filter_constant(1, 1, 1)));
    const std::string out = path("ss.txt");
    const Result r = run({"linearize", file, "--input", "0", "--output", "0", "-o", out});
    ASSERT_EQ(r.code, cli::kExitOk) << r.err;
    const std::string text = fixtures::read_text(out);
    std::istringstream in(text);
    const StateSpace ss = read_state_space(in);
    EXPECT_EQ(ss.A.rows(), 2);
    EXPECT_NE(text.find("\nden 1 1 1\n"), std::string::npos) << text;
}

TEST_F(Cli, LinearizeBadIndex) {
    const std::string file = write("f.bg", emit(fixtures::filter_constant(1, 1, 1)));
    EXPECT_EQ(run({"linearize", file, "--input", "7"}).code, cli::kExitUsage);
}

TEST_F(Cli, RenderDot) {
    const Result r = run({"render", fixtures::corpus_path("lift_a_load")});
    ASSERT_EQ(r.code, cli::kExitOk);
    EXPECT_EQ(r.out.rfind("digraph", 0), 0u);
    EXPECT_NE(r.out.find("|H"), std::string::npos);
    const Result plain = run({"render", fixtures::corpus_path("lift_a_load"), "--no-causality"});
    EXPECT_EQ(plain.out.find("|H"), std::string::npos);
}

TEST_F(Cli, ModelsListAndWrite) {
    const Result list = run({"models"});
    ASSERT_EQ(list.code, cli::kExitOk);
    for (const char* name : {"lift_a_load", "solenoid", "filter_chopper"}) EXPECT_NE(list.out.find(name), std::string::npos);
    const std::string out = path("s.bg");
    ASSERT_EQ(run({"models", "solenoid", "-o", out}).code, cli::kExitOk);
    EXPECT_EQ(fixtures::read_text(out), fixtures::read_text(fixtures::corpus_path("solenoid")));
    EXPECT_NE(run({"models", "nope"}).code, cli::kExitOk);
}

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>

#include "fixture_docs.hpp"

namespace fs = std::filesystem;
using csg::io::json;

namespace {

struct Invocation {
    int code;
    std::string out;
};

Invocation csgkit(const std::string& args) {
    const std::string cmd = std::string(CSG_CLI_PATH) + " " + args + " 2>/dev/null";
    FILE* pipe = popen(cmd.c_str(), "r");
    std::string out;
    char buf[4096];
    std::size_t n;
    while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) out.append(buf, n);
    const int status = pclose(pipe);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string fixture(const std::string& f) { return std::string(CSG_FIXTURE_DIR) + "/" + f; }

json results(const Invocation& r) { return json::parse(r.out)["results"]; }

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir = fs::temp_directory_path() / ("csgkit_cli_" + std::to_string(::getpid()));
        fs::create_directories(dir);
    }
    void TearDown() override { fs::remove_all(dir); }
    fs::path dir;
};

}  // namespace

TEST_F(Cli, EvaluateG2) {
    const Invocation r = csgkit("evaluate " + fixture("g2.json") + " " + fixture("g2_q075.json"));
    ASSERT_EQ(r.code, 0);
    const json J = results(r)["J"];
    EXPECT_NEAR(J[0][0].get<double>(), 0.4, 1e-12);
    EXPECT_NEAR(J[0][1].get<double>(), 0.6, 1e-12);
}

TEST_F(Cli, VerifyPassAndFail) {
    EXPECT_EQ(csgkit("verify " + fixture("g3.json") + " " + fixture("g3_q075.json") + " --epsilon 0").code, 0);
    const Invocation bad = csgkit("verify " + fixture("g3.json") + " " + fixture("g3_q090.json") + " --epsilon 0");
    EXPECT_EQ(bad.code, 1);
    EXPECT_NEAR(results(bad)["certified_eps"].get<double>(), 12.0 / 55.0, 1e-9);
}

TEST_F(Cli, VerifyPerStateConcept) {
    const Invocation r = csgkit("verify " + fixture("g1.json") + " " + fixture("g2_q1.json") + " --concept eps --epsilon 0");
    EXPECT_EQ(r.code, 0);
}

TEST_F(Cli, BestRespond) {
    const Invocation r = csgkit("best-respond " + fixture("g2.json") + " " + fixture("g2_q1.json") + " --player 0");
    ASSERT_EQ(r.code, 0);
    EXPECT_NEAR(results(r)["value"].get<double>(), 0.4, 1e-9);
}

TEST_F(Cli, SolveWritesArtifacts) {
    const Invocation r = csgkit("--out-dir " + dir.string() + " solve " + fixture("g3.json"));
    ASSERT_EQ(r.code, 0);
    for (const char* f : {"profile.json", "certificate.json", "report.json"}) EXPECT_TRUE(fs::exists(dir / f)) << f;
    EXPECT_EQ(csgkit("verify " + fixture("g3.json") + " " + (dir / "profile.json").string() + " --epsilon 1e-8").code, 0);
}

TEST_F(Cli, DiscretizeByEpsilon) {
    const Invocation r = csgkit("--out-dir " + dir.string() + " discretize " + fixture("linear_spec.json") + " --epsilon 0.6");
    ASSERT_EQ(r.code, 0);
    EXPECT_NEAR(results(r)["gamma"].get<double>(), 0.3, 1e-15);
    EXPECT_EQ(results(r)["cells"].get<int>(), 4);
    EXPECT_NO_THROW(csg::io::load_game((dir / "surrogate.json").string()));
    EXPECT_EQ(csgkit("discretize " + fixture("linear_spec.json")).code, 2);
}

TEST_F(Cli, Transform) {
    const Invocation r = csgkit("--out-dir " + dir.string() + " transform " + fixture("wessels.json"));
    ASSERT_EQ(r.code, 0);
    EXPECT_TRUE(results(r)["relation_pass"].get<bool>());
    EXPECT_EQ(csgkit("transform " + fixture("g2.json")).code, 3);
}

TEST_F(Cli, Sequence) {
    const Invocation r = csgkit("sequence " + fixture("g3.json") + " --eps0 0.2 --n 2");
    ASSERT_EQ(r.code, 0);
    EXPECT_EQ(results(r)["levels"].size(), 3u);
}

TEST_F(Cli, SimulateIsSeeded) {
    const std::string args = " simulate " + fixture("g2.json") + " " + fixture("g2_q075.json") + " --trajectories 500";
    const json a = results(csgkit("--seed 3" + args)), b = results(csgkit("--seed 3" + args));
    EXPECT_EQ(a, b);
    EXPECT_NE(a, results(csgkit("--seed 4" + args)));
}

TEST_F(Cli, ReportsAreDeterministicApartFromTiming) {
    const std::string args = "solve " + fixture("g3.json") + " --restarts 2";
    json a = json::parse(csgkit(args).out), b = json::parse(csgkit(args).out);
    a.erase("timing_ms");
    b.erase("timing_ms");
    EXPECT_EQ(a, b);
    EXPECT_EQ(a["command"], "solve");
}

TEST_F(Cli, ExitCodes) {
    EXPECT_EQ(csgkit("frobnicate").code, 2);
    EXPECT_EQ(csgkit("evaluate " + fixture("missing.json") + " " + fixture("g2_q075.json")).code, 2);
    const fs::path bad = dir / "bad.json";
    csg::io::write_file(bad.string(), "{ not json");
    EXPECT_EQ(csgkit("evaluate " + bad.string() + " " + fixture("g2_q075.json")).code, 2);
    json g = json::parse(csg::io::read_file(fixture("g2.json")));
    g["alpha"] = 1.5;
    csg::io::write_file(bad.string(), g.dump());
    EXPECT_EQ(csgkit("evaluate " + bad.string() + " " + fixture("g2_q075.json")).code, 3);
    EXPECT_EQ(csgkit("evaluate " + fixture("g2.json") + " " + fixture("g3_q075.json")).code, 3);
}

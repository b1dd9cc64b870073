// Copyright 2026 The qreservoir Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <string>

#include "qreservoir/serialize.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using qrc::read_file;
using qrc::write_file;

namespace {

struct Outcome {
    int code = -1;
    std::string out;  // stdout and stderr
};

Outcome qrc_cmd(const std::string &args) {
    const std::string cmd = std::string(QRC_BINARY) + " " + args + " 2>&1";
    Outcome o;
    FILE *pipe = popen(cmd.c_str(), "r");
    if (!pipe) return o;
    char buf[4096];
    size_t n;
    while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) o.out.append(buf, n);
    const int status = pclose(pipe);
    o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return o;
}

size_t line_count(const std::string &s) { return static_cast<size_t>(std::count(s.begin(), s.end(), '\n')); }

std::string small_config(const fs::path &dir, const std::string &train = R"({"max_epochs": 10, "learning_rate": 0.001})") {
    const auto path = dir / "config.json";
    write_file(path, R"({"data": {"synthetic": {"n_steps": 300, "seed": 2}}, "feature_sets": ["FS4"], "horizons": [1],
                         "repetitions": 1, "train": )" + train + R"(, "output_dir": ")" + (dir / "out").string() + R"("})");
    return path.string();
}

}  // namespace

TEST(CliGen, RowCountAndDeterminism) {
    const auto dir = qrc::fixtures::scratch_dir("cli_gen");
    const auto a = qrc_cmd("gen --seed 5 --steps 2000 --out " + (dir / "a.csv").string());
    ASSERT_EQ(a.code, 0) << a.out;
    EXPECT_NE(a.out.find("2000"), std::string::npos);
    EXPECT_EQ(line_count(read_file(dir / "a.csv")), 2001u);
    ASSERT_EQ(qrc_cmd("gen --seed 5 --steps 2000 --out " + (dir / "b.csv").string()).code, 0);
    EXPECT_EQ(read_file(dir / "a.csv"), read_file(dir / "b.csv"));
    ASSERT_EQ(qrc_cmd("gen --seed 6 --steps 2000 --out " + (dir / "c.csv").string()).code, 0);
    EXPECT_NE(read_file(dir / "a.csv"), read_file(dir / "c.csv"));
}

TEST(CliGen, Errors) {
    const auto dir = qrc::fixtures::scratch_dir("cli_gen_err");
    EXPECT_EQ(qrc_cmd("gen --steps 50 --out " + (dir / "x.csv").string()).code, 1);
    EXPECT_FALSE(fs::exists(dir / "x.csv"));
    EXPECT_EQ(qrc_cmd("gen --steps 200").code, 1);  // --out is required
    write_file(dir / "blocker", "file");
    EXPECT_EQ(qrc_cmd("gen --steps 200 --out " + (dir / "blocker" / "x.csv").string()).code, 1);
}

TEST(CliRun, SucceedsAndHonoursOverrides) {
    const auto dir = qrc::fixtures::scratch_dir("cli_run");
    const auto cfg = small_config(dir);
    const auto r = qrc_cmd("run --quiet --config " + cfg + " --jobs 2 --out " + (dir / "alt").string());
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_TRUE(fs::exists(dir / "alt" / "metrics.csv"));
    EXPECT_FALSE(fs::exists(dir / "out" / "metrics.csv"));
    EXPECT_NE(r.out.find("FS4"), std::string::npos);
    EXPECT_NE(r.out.find('%'), std::string::npos);  // the hybrid vs skip-only delta

    ASSERT_EQ(qrc_cmd("run --quiet --config " + cfg + " --seed 7").code, 0);
    const auto seeded = qrc::json::parse(read_file(dir / "out" / "report.json"));
    EXPECT_EQ(seeded["provenance"]["base_seed"], 7);
    EXPECT_NE(read_file(dir / "out" / "metrics.csv"), read_file(dir / "alt" / "metrics.csv"));
}

TEST(CliRun, FeaturesThenRunHitsCache) {
    const auto dir = qrc::fixtures::scratch_dir("cli_features");
    const auto cfg = small_config(dir);
    const auto f = qrc_cmd("features --config " + cfg);
    ASSERT_EQ(f.code, 0) << f.out;
    EXPECT_NE(f.out.find("computed features"), std::string::npos);
    const auto r = qrc_cmd("run --config " + cfg);
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_NE(r.out.find("cache hit"), std::string::npos);
    EXPECT_EQ(r.out.find("computed features"), std::string::npos);
}

TEST(CliRun, ConfigErrorsExitOne) {
    const auto dir = qrc::fixtures::scratch_dir("cli_bad_config");
    EXPECT_EQ(qrc_cmd("run --config " + (dir / "missing.json").string()).code, 1);
    write_file(dir / "bad.json", R"({"repetitions": 0})");
    const auto r = qrc_cmd("run --config " + (dir / "bad.json").string());
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.out.find("repetitions"), std::string::npos);
    write_file(dir / "unknown.json", R"({"repetition": 3})");
    EXPECT_EQ(qrc_cmd("run --config " + (dir / "unknown.json").string()).code, 1);
    EXPECT_EQ(qrc_cmd("run --config " + small_config(dir) + " --jobs 0").code, 1);
    EXPECT_EQ(qrc_cmd("bogus").code, 1);
}

TEST(CliRun, DivergingCellsExitTwo) {
    // SGD with an absurd step overflows the parameters; the cells fail but
    // the run finishes and writes its report.
    const auto dir = qrc::fixtures::scratch_dir("cli_partial");
    const auto cfg = small_config(dir, R"({"max_epochs": 10, "learning_rate": 1e300, "optimizer": "sgd"})");
    const auto r = qrc_cmd("run --quiet --config " + cfg);
    EXPECT_EQ(r.code, 2) << r.out;
    const auto j = qrc::json::parse(read_file(dir / "out" / "report.json"));
    EXPECT_FALSE(j["failures"].empty());
}

TEST(CliCompare, JoinsReports) {
    const auto dir = qrc::fixtures::scratch_dir("cli_compare");
    const auto cfg = small_config(dir);
    ASSERT_EQ(qrc_cmd("run --quiet --config " + cfg).code, 0);
    const auto rep = (dir / "out" / "report.json").string();
    const auto c = qrc_cmd("compare " + rep + " " + rep + " --out " + (dir / "cmp.csv").string());
    ASSERT_EQ(c.code, 0) << c.out;
    const auto table = read_file(dir / "cmp.csv");
    EXPECT_EQ(line_count(table), 9u);  // header + 2 kinds x 4 folds
    EXPECT_EQ(qrc_cmd("compare " + rep).code, 1);
    write_file(dir / "junk.json", "[]");
    EXPECT_EQ(qrc_cmd("compare " + rep + " " + (dir / "junk.json").string()).code, 1);
}

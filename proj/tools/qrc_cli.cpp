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

// qrc: generate trajectories, cache reservoir features, run the experiment
// grid and compare run reports.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>

#include "qreservoir/errors.hpp"
#include "qreservoir/experiment.hpp"

namespace {

namespace ex = qrc::experiment;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitPartial = 2;

struct Overrides {
    std::string config;
    std::optional<uint64_t> seed;
    std::string out;
    int jobs = 1;
    bool quiet = false;
};

ex::ExperimentConfig resolve(const Overrides &o) {
    ex::ExperimentConfig c = ex::load_config(o.config);
    if (o.seed) c.base_seed = *o.seed;
    if (!o.out.empty()) c.output_dir = o.out;
    c.validate();
    return c;
}

ex::RunOptions options(const Overrides &o) {
    ex::RunOptions opt;
    opt.jobs = o.jobs;
    if (!o.quiet) opt.log = [](std::string_view m) { std::cerr << m << '\n'; };
    return opt;
}

void print_summary(const ex::RunReport &r, const ex::ExperimentConfig &c) {
    std::printf("records: %zu, family sweep records: %zu, failed cells: %zu\n", r.records.size(),
                r.sweep_records.size(), r.failures.size());
    for (const auto &row : r.comparisons) {
        std::printf("%s K=%zu  qurebot %.6g  skip_only %.6g  delta %+.2f%%  p=%.4g  a12=%s  %s\n",
                    std::string(qrc::data::feature_set_name(row.feature_set)).c_str(), row.horizon, row.qurebot_mean,
                    row.skip_mean, row.delta_pct, row.p_value,
                    row.p_value >= qrc::eval::kSignificance ? "---" : std::to_string(row.a12).c_str(),
                    row.verdict.c_str());
    }
    for (const auto &n : r.notes) std::printf("note: %s\n", n.c_str());
    for (const auto &f : r.failures) std::fprintf(stderr, "failed: %s: %s\n", f.cell.c_str(), f.message.c_str());
    std::printf("outputs in %s\n", c.output_dir.string().c_str());
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Quantum reservoir trajectory prediction experiments"};
    app.require_subcommand(1);

    Overrides gen_o, feat_o, run_o;
    size_t steps = 2000;
    auto *gen = app.add_subcommand("gen", "Write a synthetic trajectory CSV");
    gen->add_option("--config", gen_o.config, "Experiment config; its synthetic data block gives the defaults");
    gen->add_option("--seed", gen_o.seed, "Trajectory seed");
    gen->add_option("--steps", steps, "Number of rows (>= 100)");
    gen->add_option("--out", gen_o.out, "Output CSV path")->required();

    auto add_common = [](CLI::App *sub, Overrides &o) {
        sub->add_option("--config", o.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--seed", o.seed, "Override base_seed");
        sub->add_option("--out", o.out, "Override output_dir");
        sub->add_option("--jobs", o.jobs, "Parallel cells")->check(CLI::PositiveNumber);
        sub->add_flag("--quiet", o.quiet, "No progress log");
    };
    auto *feat = app.add_subcommand("features", "Compute and cache reservoir features");
    add_common(feat, feat_o);
    auto *run = app.add_subcommand("run", "Run the experiment grid and the statistics");
    add_common(run, run_o);

    std::vector<std::string> reports;
    std::string compare_out;
    auto *cmp = app.add_subcommand("compare", "Join run reports cell by cell");
    cmp->add_option("reports", reports, "report.json files")->required()->expected(2, -1);
    cmp->add_option("--out", compare_out, "Write the table here instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        return app.exit(e) == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*gen) {
            uint64_t seed = 1;
            qrc::data::Arena arena;
            if (!gen_o.config.empty()) {
                const auto c = ex::load_config(gen_o.config);
                seed = c.data.synthetic.seed;
                steps = gen->count("--steps") ? steps : c.data.synthetic.n_steps;
                arena = c.data.synthetic.arena;
            }
            if (gen_o.seed) seed = *gen_o.seed;
            const size_t rows = ex::cmd_gen(seed, steps, gen_o.out, arena);
            std::printf("wrote %zu rows to %s\n", rows, gen_o.out.c_str());
            return kExitOk;
        }
        if (*feat) {
            const auto c = resolve(feat_o);
            const size_t hits = ex::cmd_features(c, options(feat_o));
            std::printf("features ready in %s (%zu cache hits)\n", c.effective_cache_dir().string().c_str(), hits);
            return kExitOk;
        }
        if (*run) {
            const auto c = resolve(run_o);
            const auto report = ex::cmd_run(c, options(run_o));
            print_summary(report, c);
            return report.failures.empty() ? kExitOk : kExitPartial;
        }
        if (*cmp) {
            std::vector<std::filesystem::path> paths(reports.begin(), reports.end());
            const auto table = ex::cmd_compare(paths);
            for (size_t i = 0; i < paths.size(); ++i) {
                std::fprintf(stderr, "%s = %s\n", table.labels[i].c_str(), reports[i].c_str());
            }
            if (compare_out.empty()) std::cout << table.to_csv();
            else qrc::write_file(compare_out, table.to_csv());
            return kExitOk;
        }
    } catch (const qrc::Error &e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::exception &e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfig;
    }
    return kExitOk;
}

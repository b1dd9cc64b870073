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

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qreservoir/data.hpp"
#include "qreservoir/eval.hpp"
#include "qreservoir/model.hpp"
#include "qreservoir/reservoir.hpp"
#include "qreservoir/serialize.hpp"

namespace qrc::experiment {

inline constexpr std::string_view kToolVersion = "0.1.0";

struct SyntheticSource {
    size_t n_steps = 2000;
    uint64_t seed = 1;
    data::Arena arena;
};

/// Exactly one of csv / synthetic is used; csv wins when set.
struct DataSource {
    std::optional<std::filesystem::path> csv;
    SyntheticSource synthetic;
};

struct ReservoirConfig {
    reservoir::Family family = reservoir::Family::IsingHamiltonian;
    int n_ancilla = 1;
    int depth = 10;
    uint64_t seed = 42;
};

/// Optional reservoir-family sweep: qrc_only on one (feature set, horizon).
struct FamilySweep {
    std::vector<reservoir::Family> families;
    data::FeatureSetName feature_set = data::FeatureSetName::FS7;
    size_t horizon = 1;
};

struct ExperimentConfig {
    DataSource data;
    std::vector<data::FeatureSetName> feature_sets = {data::FeatureSetName::FS7, data::FeatureSetName::FS5,
                                                      data::FeatureSetName::FS4};
    std::vector<size_t> horizons = {1, 2, 3, 4, 5};
    size_t washout = 5;
    ReservoirConfig reservoir;
    std::vector<model::ModelKind> kinds = {model::ModelKind::QuReBot, model::ModelKind::SkipOnly};
    int folds = 4;
    double val_fraction = 0.2;
    int repetitions = 10;
    model::TrainConfig train;  // train.seed is replaced per cell
    data::TargetSpace target_space = data::TargetSpace::Raw;
    reservoir::FeatureEngine engine = reservoir::FeatureEngine::AncillaBlock;
    uint64_t base_seed = 0;
    std::optional<FamilySweep> family_sweep;
    eval::Alternative alternative = eval::Alternative::TwoSided;
    std::filesystem::path output_dir = "results";
    std::filesystem::path cache_dir;  // empty: <output_dir>/cache
    bool save_models = false;

    /// ArgumentError naming the first offending field.
    void validate() const;
    std::filesystem::path effective_cache_dir() const;
};

/// Unknown keys and bad values are SchemaError; missing keys take defaults.
ExperimentConfig config_from_json(const json &j);
json to_json(const ExperimentConfig &config);
ExperimentConfig load_config(const std::filesystem::path &path);
/// Hex FNV-1a of the canonical JSON form.
std::string config_hash(const ExperimentConfig &config);

data::Trajectory load_data(const ExperimentConfig &config);

using Logger = std::function<void(std::string_view)>;

/// Rewinding features for every window end t = T-1 .. n-1 of one
/// normalized sequence (row i belongs to t = T-1+i), cached on disk.
struct FeatureRequest {
    uint64_t data_hash = 0;
    size_t n_rows = 0;
    reservoir::ReservoirSpec spec;
    data::Normalizer normalizer;
    size_t washout = 5;
    reservoir::FeatureEngine engine = reservoir::FeatureEngine::AncillaBlock;

    std::string key() const;
    std::string file_name() const;
};

Matrix compute_features(const data::Trajectory &traj, const FeatureRequest &req);
/// Loads from cache_dir when the file exists (logging a cache hit),
/// otherwise computes and writes it. A file whose embedded key differs
/// from the request, or whose payload is damaged, is an IntegrityError.
Matrix cached_features(const data::Trajectory &traj, const FeatureRequest &req,
                       const std::filesystem::path &cache_dir, const Logger &log, bool *hit = nullptr);

struct CellKey {
    model::ModelKind kind = model::ModelKind::QuReBot;
    data::FeatureSetName feature_set = data::FeatureSetName::FS7;
    size_t horizon = 1;
    int fold = 0;
    int rep = 0;
    std::string label() const;
    auto operator<=>(const CellKey &) const = default;
};

uint64_t cell_seed(uint64_t base_seed, const CellKey &key);

struct MetricRecord {
    CellKey key;
    uint64_t seed = 0;
    double l_mse = 0.0;
    size_t epochs = 0;
    size_t best_epoch = 0;
    bool early_stopped = false;
};

struct SweepRecord {
    reservoir::Family family = reservoir::Family::IsingHamiltonian;
    int fold = 0;
    int rep = 0;
    uint64_t seed = 0;
    double l_mse = 0.0;
    size_t epochs = 0;
    bool early_stopped = false;
};

struct CellFailure {
    std::string cell;
    std::string message;
};

/// One line of stats.csv. `pairwise` tests print "---" for the effect
/// size when p >= 0.05.
struct StatRow {
    std::string test;
    std::string groups;
    double statistic = 0.0;
    double p_value = 1.0;
    std::optional<double> a12;
    bool pairwise = false;
};

struct KindComparison {
    data::FeatureSetName feature_set = data::FeatureSetName::FS7;
    size_t horizon = 1;
    double qurebot_mean = 0.0;
    double skip_mean = 0.0;
    double delta_pct = 0.0;  // (skip - qurebot) / skip * 100
    double p_value = 1.0;
    double a12 = 0.5;
    std::string verdict;
};

struct RunReport {
    json provenance;
    std::vector<MetricRecord> records;  // grid order: kind, fs, K, fold, rep
    std::vector<SweepRecord> sweep_records;
    std::vector<CellFailure> failures;
    std::vector<StatRow> stats;
    std::vector<KindComparison> comparisons;
    std::vector<std::string> notes;  // comparisons that could not be run
};

struct RunOptions {
    int jobs = 1;
    Logger log;
};

/// Features for every (feature set, fold) the config needs. Returns the
/// number of cache hits.
size_t cmd_features(const ExperimentConfig &config, const RunOptions &options);
/// Runs the grid and the statistics and writes every output file.
RunReport cmd_run(const ExperimentConfig &config, const RunOptions &options);
/// Writes a synthetic trajectory CSV, returns the row count.
size_t cmd_gen(uint64_t seed, size_t n_steps, const std::filesystem::path &out, data::Arena arena = {});

json to_json(const RunReport &report);
std::string metrics_csv(const RunReport &report);
std::string stats_csv(const RunReport &report);
std::string box_csv(const RunReport &report);
std::string comparison_csv(const RunReport &report);
std::string sweep_csv(const RunReport &report);
void write_outputs(const RunReport &report, const std::filesystem::path &dir);

struct CompareRow {
    std::string cell;
    std::vector<double> l_mse;  // one per report
    std::vector<double> delta;  // l_mse[i] - l_mse[0]
    std::string better;         // label of the lowest, or "tie"
};

struct Comparison {
    std::vector<std::string> labels;
    std::vector<CompareRow> rows;
    std::string to_csv() const;
};

/// Joins reports on their cell keys. SchemaError unless every report has
/// the same key set.
Comparison cmd_compare(const std::vector<std::filesystem::path> &report_paths);

}  // namespace qrc::experiment

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

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qreservoir/matrix.hpp"

namespace qrc::data {

/// Trajectory columns, in CSV header order.
enum class Column { PosX, PosY, OriZ, OriW, VelX, VelY, VelAng };
inline constexpr size_t kNumColumns = 7;
inline constexpr std::array<std::string_view, kNumColumns> kColumnNames = {"pos_x", "pos_y", "ori_z", "ori_w",
                                                                            "vel_x", "vel_y", "vel_ang"};

using Row = std::array<double, kNumColumns>;

struct Trajectory {
    double rate_hz = 10.0;
    std::vector<Row> rows;

    size_t size() const { return rows.size(); }
    double at(size_t r, Column c) const { return rows[r][static_cast<size_t>(c)]; }
};

/// Reads a trajectory CSV. The header must contain every column name (any
/// order, extra columns ignored).
Trajectory load_csv(const std::filesystem::path &path);
Trajectory parse_csv(std::string_view text);
void write_csv(const Trajectory &traj, const std::filesystem::path &path);
std::string to_csv(const Trajectory &traj);

/// FNV-1a over the bit patterns of every value; identifies a dataset in
/// cache keys.
uint64_t content_hash(const Trajectory &traj);

struct Arena {
    double width = 20.0;
    double height = 15.0;
};

/// Waypoint-seeking point robot at 10 Hz. Speed <= 0.8 m/s, acceleration
/// <= 0.5 m/s^2, heading rate <= 1 rad/s. Linear velocities are in the robot frame,
/// as odometry reports them.
Trajectory generate_synthetic(size_t n_steps, uint64_t seed, Arena arena = {});

inline constexpr double kMaxSpeed = 0.8;
inline constexpr double kMaxAccel = 0.5;
inline constexpr double kMaxTurnRate = 1.0;
inline constexpr double kArrivalRadius = 0.2;
inline constexpr double kWaypointMargin = 1.0;

enum class FeatureSetName { FS7, FS5, FS4 };

struct FeatureSet {
    FeatureSetName name = FeatureSetName::FS7;
    std::vector<Column> columns;

    static FeatureSet of(FeatureSetName name);
    size_t size() const { return columns.size(); }
    /// Positions of pos_x / pos_y inside `columns`.
    size_t pos_x_index() const;
    size_t pos_y_index() const;
};

std::string_view feature_set_name(FeatureSetName n);
FeatureSetName parse_feature_set(std::string_view name);

struct FeatureRange {
    double min = 0.0;
    double max = 0.0;
    bool degenerate() const { return max == min; }
};

struct Normalizer {
    FeatureSetName feature_set = FeatureSetName::FS7;
    std::vector<FeatureRange> ranges;  // one per feature-set column
};

/// Min/max of each feature-set column over `rows` (at least two).
Normalizer fit_normalizer(std::span<const Row> rows, const FeatureSet &fs);

/// (v - min) / (max - min) clamped to [0, 1]; 0.5 for a degenerate range.
double normalize(double value, FeatureRange range);
double denormalize(double value, FeatureRange range);

enum class TargetSpace { Raw, Normalized };

std::string_view target_space_name(TargetSpace t);
TargetSpace parse_target_space(std::string_view name);

/// Input window ending at t_index and its K future positions.
struct StateWindow {
    Matrix features;  // T x d, in [0, 1]
    Matrix target;    // K x 2 (pos_x, pos_y) at t+1..t+K
    size_t t_index = 0;
};

/// Normalized copy of every row of the trajectory (len x d).
Matrix normalize_rows(const Trajectory &traj, const FeatureSet &fs, const Normalizer &norm);

/// Windows for t = T-1 .. len-K-1, count len - T - K + 1.
std::vector<StateWindow> make_windows(const Trajectory &traj, const FeatureSet &fs, size_t washout, size_t horizon,
                                      const Normalizer &norm, TargetSpace target_space);

/// Window ending at t covers rows t-T+1 .. t+K.
struct WindowSpan {
    size_t t_index = 0;
    size_t first_row = 0;
    size_t last_row = 0;
};

std::vector<WindowSpan> window_spans(size_t n_rows, size_t washout, size_t horizon);

/// Window positions (t_index values) for one fold.
struct FoldSplit {
    int fold_id = 0;
    std::vector<size_t> train;
    std::vector<size_t> val;
    std::vector<size_t> test;
    size_t test_first_row = 0;  // test segment rows [first, end)
    size_t test_end_row = 0;
};

struct FoldPlan {
    std::vector<FoldSplit> folds;
    size_t dropped = 0;  // windows straddling a segment boundary
};

/// Cuts rows [0, n_rows) into n_folds equal contiguous segments. For fold i
/// the test set is segment i; the remaining windows, in time order, give
/// validation (final val_fraction) and training (the rest).
FoldPlan make_folds(std::span<const WindowSpan> spans, size_t n_rows, int n_folds = 4, double val_fraction = 0.2);
FoldPlan make_folds(std::span<const StateWindow> windows, size_t n_rows, size_t washout, size_t horizon,
                    int n_folds = 4, double val_fraction = 0.2);

/// Rows outside fold's test segment, i.e. what its normalizer may read.
std::vector<size_t> non_test_rows(const FoldSplit &fold, size_t n_rows);

}  // namespace qrc::data

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

#include "qreservoir/data.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "qreservoir/errors.hpp"
#include "qreservoir/rng.hpp"

namespace qrc::data {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    size_t start = 0;
    while (true) {
        const size_t comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

void append_number(std::string &out, double v) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, end);
}

}  // namespace

Trajectory parse_csv(std::string_view text) {
    std::vector<std::string_view> lines;
    size_t start = 0;
    while (start < text.size()) {
        size_t nl = text.find('\n', start);
        if (nl == std::string_view::npos) nl = text.size();
        lines.push_back(text.substr(start, nl - start));
        start = nl + 1;
    }
    if (lines.empty()) throw SchemaError("empty CSV: missing header");
    const auto header = split(lines[0]);
    std::array<size_t, kNumColumns> index{};
    for (size_t c = 0; c < kNumColumns; ++c) {
        auto it = std::find(header.begin(), header.end(), kColumnNames[c]);
        if (it == header.end()) throw SchemaError("missing column: " + std::string(kColumnNames[c]));
        index[c] = static_cast<size_t>(it - header.begin());
    }
    Trajectory traj;
    for (size_t li = 1; li < lines.size(); ++li) {
        if (trim(lines[li]).empty()) continue;
        const size_t row_no = traj.rows.size() + 1;
        const auto cells = split(lines[li]);
        if (cells.size() < header.size()) {
            throw ParseError("row " + std::to_string(row_no) + ": expected " + std::to_string(header.size()) +
                                 " cells, got " + std::to_string(cells.size()),
                             row_no);
        }
        Row row{};
        for (size_t c = 0; c < kNumColumns; ++c) {
            const std::string_view cell = cells[index[c]];
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (ec != std::errc{} || ptr != cell.data() + cell.size() || !std::isfinite(v)) {
                throw ParseError("row " + std::to_string(row_no) + ", column " + std::string(kColumnNames[c]) +
                                     ": not a finite number: '" + std::string(cell) + "'",
                                 row_no);
            }
            row[c] = v;
        }
        const double qn = row[2] * row[2] + row[3] * row[3];
        if (std::abs(qn - 1.0) > 0.05) {
            throw ParseError("row " + std::to_string(row_no) + ": ori_z^2 + ori_w^2 = " + std::to_string(qn) +
                                 ", not a planar unit quaternion",
                             row_no);
        }
        traj.rows.push_back(row);
    }
    return traj;
}

Trajectory load_csv(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_csv(ss.str());
}

std::string to_csv(const Trajectory &traj) {
    std::string out;
    for (size_t c = 0; c < kNumColumns; ++c) {
        if (c) out += ',';
        out += kColumnNames[c];
    }
    out += '\n';
    for (const Row &row : traj.rows) {
        for (size_t c = 0; c < kNumColumns; ++c) {
            if (c) out += ',';
            append_number(out, row[c]);
        }
        out += '\n';
    }
    return out;
}

void write_csv(const Trajectory &traj, const std::filesystem::path &path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    const std::string text = to_csv(traj);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

uint64_t content_hash(const Trajectory &traj) {
    uint64_t h = 0xCBF29CE484222325ULL;
    auto feed = [&h](uint64_t word) {
        for (int b = 0; b < 8; ++b) {
            h ^= (word >> (8 * b)) & 0xFFu;
            h *= 0x100000001B3ULL;
        }
    };
    feed(std::bit_cast<uint64_t>(traj.rate_hz));
    feed(traj.rows.size());
    for (const Row &row : traj.rows)
        for (double v : row) feed(std::bit_cast<uint64_t>(v));
    return h;
}

Trajectory generate_synthetic(size_t n_steps, uint64_t seed, Arena arena) {
    if (n_steps < 100) throw ArgumentError("synthetic trajectory needs at least 100 steps, got " + std::to_string(n_steps));
    if (!(arena.width > 2 * kWaypointMargin) || !(arena.height > 2 * kWaypointMargin)) {
        throw ArgumentError("arena must be larger than " + std::to_string(2 * kWaypointMargin) + " m per side");
    }
    constexpr double dt = 0.1;
    Rng rng(seed);
    auto waypoint = [&]() {
        const double x = rng.uniform(kWaypointMargin, arena.width - kWaypointMargin);
        const double y = rng.uniform(kWaypointMargin, arena.height - kWaypointMargin);
        return std::array<double, 2>{x, y};
    };
    std::array<double, 2> pos = waypoint();
    std::array<double, 2> goal = waypoint();
    std::array<double, 2> vel{0.0, 0.0};
    double heading = rng.uniform(-std::numbers::pi, std::numbers::pi);
    double turn_rate = 0.0;

    Trajectory traj;
    traj.rate_hz = 10.0;
    traj.rows.reserve(n_steps);
    for (size_t step = 0; step < n_steps; ++step) {
        // odometry convention: linear velocity in the robot frame
        const double ch = std::cos(heading), sh = std::sin(heading);
        const double body_x = ch * vel[0] + sh * vel[1];
        const double body_y = -sh * vel[0] + ch * vel[1];
        traj.rows.push_back({pos[0], pos[1], std::sin(heading / 2), std::cos(heading / 2), body_x, body_y, turn_rate});

        double dx = goal[0] - pos[0], dy = goal[1] - pos[1];
        double dist = std::hypot(dx, dy);
        while (dist < kArrivalRadius) {
            goal = waypoint();
            dx = goal[0] - pos[0];
            dy = goal[1] - pos[1];
            dist = std::hypot(dx, dy);
        }
        // brake so the robot can stop on the waypoint
        const double speed_cmd = std::min(kMaxSpeed, std::sqrt(2.0 * kMaxAccel * dist));
        double dvx = dx / dist * speed_cmd - vel[0];
        double dvy = dy / dist * speed_cmd - vel[1];
        const double dv = std::hypot(dvx, dvy);
        if (dv > kMaxAccel * dt) {
            dvx *= kMaxAccel * dt / dv;
            dvy *= kMaxAccel * dt / dv;
        }
        vel[0] += dvx;
        vel[1] += dvy;
        const double speed = std::hypot(vel[0], vel[1]);
        if (speed > kMaxSpeed) {
            vel[0] *= kMaxSpeed / speed;
            vel[1] *= kMaxSpeed / speed;
        }
        pos[0] += vel[0] * dt;
        pos[1] += vel[1] * dt;

        turn_rate = 0.0;
        if (speed > 0.05) {
            double err = std::atan2(vel[1], vel[0]) - heading;
            err = std::remainder(err, 2.0 * std::numbers::pi);
            turn_rate = std::clamp(err / dt, -kMaxTurnRate, kMaxTurnRate);
            heading = std::remainder(heading + turn_rate * dt, 2.0 * std::numbers::pi);
        }
    }
    return traj;
}

FeatureSet FeatureSet::of(FeatureSetName name) {
    using C = Column;
    switch (name) {
        case FeatureSetName::FS7: return {name, {C::PosX, C::PosY, C::OriZ, C::OriW, C::VelX, C::VelY, C::VelAng}};
        case FeatureSetName::FS5: return {name, {C::PosX, C::PosY, C::VelX, C::VelY, C::VelAng}};
        case FeatureSetName::FS4: return {name, {C::PosX, C::PosY, C::OriZ, C::OriW}};
    }
    throw ArgumentError("unknown feature set");
}

size_t FeatureSet::pos_x_index() const {
    return static_cast<size_t>(std::find(columns.begin(), columns.end(), Column::PosX) - columns.begin());
}

size_t FeatureSet::pos_y_index() const {
    return static_cast<size_t>(std::find(columns.begin(), columns.end(), Column::PosY) - columns.begin());
}

std::string_view feature_set_name(FeatureSetName n) {
    switch (n) {
        case FeatureSetName::FS7: return "FS7";
        case FeatureSetName::FS5: return "FS5";
        case FeatureSetName::FS4: return "FS4";
    }
    throw ArgumentError("unknown feature set");
}

FeatureSetName parse_feature_set(std::string_view name) {
    for (auto n : {FeatureSetName::FS7, FeatureSetName::FS5, FeatureSetName::FS4}) {
        if (feature_set_name(n) == name) return n;
    }
    throw ArgumentError("unknown feature set '" + std::string(name) + "'");
}

Normalizer fit_normalizer(std::span<const Row> rows, const FeatureSet &fs) {
    if (rows.size() < 2) throw ArgumentError("normalizer needs at least two rows");
    Normalizer norm{fs.name, {}};
    for (Column c : fs.columns) {
        const auto col = static_cast<size_t>(c);
        FeatureRange r{rows[0][col], rows[0][col]};
        for (const Row &row : rows) {
            r.min = std::min(r.min, row[col]);
            r.max = std::max(r.max, row[col]);
        }
        norm.ranges.push_back(r);
    }
    return norm;
}

double normalize(double value, FeatureRange range) {
    if (range.degenerate()) return 0.5;
    return std::clamp((value - range.min) / (range.max - range.min), 0.0, 1.0);
}

double denormalize(double value, FeatureRange range) {
    if (range.degenerate()) return range.min;
    return range.min + value * (range.max - range.min);
}

std::string_view target_space_name(TargetSpace t) { return t == TargetSpace::Raw ? "raw" : "normalized"; }

TargetSpace parse_target_space(std::string_view name) {
    if (name == "raw") return TargetSpace::Raw;
    if (name == "normalized") return TargetSpace::Normalized;
    throw ArgumentError("unknown target space '" + std::string(name) + "'");
}

Matrix normalize_rows(const Trajectory &traj, const FeatureSet &fs, const Normalizer &norm) {
    if (norm.ranges.size() != fs.size() || norm.feature_set != fs.name) {
        throw ShapeError("normalizer does not match feature set " + std::string(feature_set_name(fs.name)));
    }
    Matrix out(traj.size(), fs.size());
    for (size_t r = 0; r < traj.size(); ++r)
        for (size_t j = 0; j < fs.size(); ++j) out(r, j) = normalize(traj.at(r, fs.columns[j]), norm.ranges[j]);
    return out;
}

std::vector<StateWindow> make_windows(const Trajectory &traj, const FeatureSet &fs, size_t washout, size_t horizon,
                                      const Normalizer &norm, TargetSpace target_space) {
    if (washout == 0 || horizon == 0) throw ShapeError("washout and horizon must be >= 1");
    if (traj.size() < washout + horizon) {
        throw ShapeError("trajectory of length " + std::to_string(traj.size()) + " is shorter than T + K = " +
                         std::to_string(washout + horizon));
    }
    const Matrix normed = normalize_rows(traj, fs, norm);
    const FeatureRange rx = norm.ranges[fs.pos_x_index()], ry = norm.ranges[fs.pos_y_index()];
    std::vector<StateWindow> out;
    out.reserve(traj.size() - washout - horizon + 1);
    for (size_t t = washout - 1; t + horizon < traj.size(); ++t) {
        StateWindow w;
        w.t_index = t;
        w.features = Matrix(washout, fs.size());
        for (size_t k = 0; k < washout; ++k) {
            auto src = normed.row(t + 1 - washout + k);
            std::copy(src.begin(), src.end(), w.features.row(k).begin());
        }
        w.target = Matrix(horizon, 2);
        for (size_t k = 0; k < horizon; ++k) {
            const double x = traj.at(t + 1 + k, Column::PosX), y = traj.at(t + 1 + k, Column::PosY);
            w.target(k, 0) = target_space == TargetSpace::Raw ? x : normalize(x, rx);
            w.target(k, 1) = target_space == TargetSpace::Raw ? y : normalize(y, ry);
        }
        out.push_back(std::move(w));
    }
    return out;
}

std::vector<WindowSpan> window_spans(size_t n_rows, size_t washout, size_t horizon) {
    if (washout == 0 || horizon == 0) throw ShapeError("washout and horizon must be >= 1");
    if (n_rows < washout + horizon) throw ShapeError("too few rows for one window");
    std::vector<WindowSpan> out;
    for (size_t t = washout - 1; t + horizon < n_rows; ++t) out.push_back({t, t + 1 - washout, t + horizon});
    return out;
}

FoldPlan make_folds(std::span<const WindowSpan> spans, size_t n_rows, int n_folds, double val_fraction) {
    if (n_folds < 2) throw ArgumentError("need at least two folds");
    if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw ArgumentError("validation fraction must be in [0, 1)");
    const auto folds = static_cast<size_t>(n_folds);
    auto seg_start = [&](size_t i) { return i * n_rows / folds; };
    auto segment_of = [&](size_t row) {
        size_t s = row * folds / n_rows;
        while (s + 1 < folds && row >= seg_start(s + 1)) ++s;
        while (s > 0 && row < seg_start(s)) --s;
        return s;
    };

    FoldPlan plan;
    std::vector<std::vector<size_t>> by_segment(folds);
    for (size_t i = 0; i < spans.size(); ++i) {
        if (i > 0 && spans[i].t_index <= spans[i - 1].t_index) throw ArgumentError("windows must be in time order");
        if (spans[i].last_row >= n_rows) throw ShapeError("window extends past the last row");
        const size_t s = segment_of(spans[i].first_row);
        if (segment_of(spans[i].last_row) != s) {
            ++plan.dropped;
            continue;
        }
        by_segment[s].push_back(spans[i].t_index);
    }
    for (size_t f = 0; f < folds; ++f) {
        FoldSplit split;
        split.fold_id = static_cast<int>(f);
        split.test = by_segment[f];
        split.test_first_row = seg_start(f);
        split.test_end_row = seg_start(f + 1);
        std::vector<size_t> rest;
        for (size_t s = 0; s < folds; ++s)
            if (s != f) rest.insert(rest.end(), by_segment[s].begin(), by_segment[s].end());
        const auto n_val = static_cast<size_t>(std::llround(val_fraction * static_cast<double>(rest.size())));
        const size_t n_train = rest.size() - n_val;
        split.train.assign(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(n_train));
        split.val.assign(rest.begin() + static_cast<std::ptrdiff_t>(n_train), rest.end());
        if (split.test.empty() || split.train.empty() || (val_fraction > 0.0 && split.val.empty())) {
            throw ArgumentError("too few windows for fold " + std::to_string(f));
        }
        plan.folds.push_back(std::move(split));
    }
    return plan;
}

FoldPlan make_folds(std::span<const StateWindow> windows, size_t n_rows, size_t washout, size_t horizon, int n_folds,
                    double val_fraction) {
    std::vector<WindowSpan> spans;
    spans.reserve(windows.size());
    for (const auto &w : windows) {
        if (w.t_index + 1 < washout) throw ShapeError("window index smaller than washout");
        spans.push_back({w.t_index, w.t_index + 1 - washout, w.t_index + horizon});
    }
    return make_folds(spans, n_rows, n_folds, val_fraction);
}

std::vector<size_t> non_test_rows(const FoldSplit &fold, size_t n_rows) {
    std::vector<size_t> out;
    for (size_t r = 0; r < n_rows; ++r)
        if (r < fold.test_first_row || r >= fold.test_end_row) out.push_back(r);
    return out;
}

}  // namespace qrc::data

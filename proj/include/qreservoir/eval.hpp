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

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qreservoir/matrix.hpp"

namespace qrc::eval {

/// Mean squared error over every test item, horizon step and coordinate.
/// Each Matrix is one item of K rows x 2 columns.
double l_mse(std::span<const Matrix> predictions, std::span<const Matrix> targets);

struct TestResult {
    std::string test_name;
    double statistic = 0.0;
    double p_value = 1.0;
    std::optional<double> a12;
    bool exact = false;
};

inline constexpr double kSignificance = 0.05;

enum class Alternative { TwoSided, Less, Greater };

/// Vargha-Delaney: P(x > y) + 0.5 P(x = y).
double a12(std::span<const double> x, std::span<const double> y);

/// Mid-ranks (1-based) of the pooled values.
std::vector<double> midranks(std::span<const double> values);

/// U statistic of x. Exact enumeration when |x| + |y| <= 12 without ties,
/// otherwise normal approximation with tie and continuity correction.
/// `Less` tests whether x tends to be smaller than y.
TestResult mann_whitney_u(std::span<const double> x, std::span<const double> y,
                          Alternative alt = Alternative::TwoSided);

/// H with tie correction, chi-square(g - 1) tail.
TestResult kruskal_wallis(const std::vector<std::vector<double>> &groups);

/// Rows are blocks, columns treatments. Mid-ranks within each block.
TestResult friedman(const Matrix &blocks);

/// Statistic is W+ (sum of ranks of positive x - y). Zero differences are
/// dropped; exact enumeration over sign patterns when at most 15 remain.
TestResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y,
                                Alternative alt = Alternative::TwoSided);

double chi_square_sf(double x, double dof);
double normal_sf(double z);

struct BoxStats {
    double min = 0, q1 = 0, median = 0, q3 = 0, max = 0, mean = 0;
    size_t n = 0;
};

/// Quartiles by linear interpolation between order statistics.
BoxStats box_stats(std::span<const double> values);

}  // namespace qrc::eval

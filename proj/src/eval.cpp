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

#include "qreservoir/eval.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>

#include "qreservoir/errors.hpp"

namespace qrc::eval {

namespace {

void require_nonempty(std::span<const double> v, const char *what) {
    if (v.empty()) throw ArgumentError(std::string(what) + ": empty sample");
}

// Tail probability for a statistic symmetric about `mean` under H0.
double tail_p(Alternative alt, double p_less, double p_greater) {
    switch (alt) {
        case Alternative::Less: return p_less;
        case Alternative::Greater: return p_greater;
        case Alternative::TwoSided: return std::min(1.0, 2.0 * std::min(p_less, p_greater));
    }
    return 1.0;
}

bool has_ties(std::span<const double> v) {
    std::vector<double> s(v.begin(), v.end());
    std::sort(s.begin(), s.end());
    return std::adjacent_find(s.begin(), s.end()) != s.end();
}

double tie_term(std::span<const double> values) {  // sum (t^3 - t)
    std::vector<double> s(values.begin(), values.end());
    std::sort(s.begin(), s.end());
    double acc = 0.0;
    for (size_t i = 0; i < s.size();) {
        size_t j = i;
        while (j < s.size() && s[j] == s[i]) ++j;
        const double t = static_cast<double>(j - i);
        acc += t * t * t - t;
        i = j;
    }
    return acc;
}

}  // namespace

double l_mse(std::span<const Matrix> predictions, std::span<const Matrix> targets) {
    if (predictions.empty()) throw ArgumentError("l_mse: empty test set");
    if (predictions.size() != targets.size()) throw ShapeError("l_mse: prediction and target counts differ");
    double acc = 0.0;
    size_t count = 0;
    for (size_t i = 0; i < predictions.size(); ++i) {
        const Matrix &p = predictions[i], &t = targets[i];
        if (p.rows != t.rows || p.cols != t.cols) throw ShapeError("l_mse: item shape mismatch");
        for (size_t k = 0; k < p.size(); ++k) {
            const double e = p.data[k] - t.data[k];
            acc += e * e;
        }
        count += p.size();
    }
    return acc / static_cast<double>(count);
}

double a12(std::span<const double> x, std::span<const double> y) {
    require_nonempty(x, "a12");
    require_nonempty(y, "a12");
    double wins = 0.0;
    for (double xi : x) {
        for (double yj : y) {
            if (xi > yj) wins += 1.0;
            else if (xi == yj) wins += 0.5;
        }
    }
    return wins / (static_cast<double>(x.size()) * static_cast<double>(y.size()));
}

std::vector<double> midranks(std::span<const double> values) {
    std::vector<size_t> idx(values.size());
    std::iota(idx.begin(), idx.end(), size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(values.size());
    for (size_t i = 0; i < idx.size();) {
        size_t j = i;
        while (j < idx.size() && values[idx[j]] == values[idx[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
        for (size_t k = i; k < j; ++k) ranks[idx[k]] = r;
        i = j;
    }
    return ranks;
}

TestResult mann_whitney_u(std::span<const double> x, std::span<const double> y, Alternative alt) {
    require_nonempty(x, "mann_whitney_u");
    require_nonempty(y, "mann_whitney_u");
    const size_t n1 = x.size(), n2 = y.size(), n = n1 + n2;
    std::vector<double> pooled(x.begin(), x.end());
    pooled.insert(pooled.end(), y.begin(), y.end());
    const std::vector<double> ranks = midranks(pooled);
    const double r1 = std::accumulate(ranks.begin(), ranks.begin() + static_cast<std::ptrdiff_t>(n1), 0.0);
    const double u = r1 - static_cast<double>(n1 * (n1 + 1)) / 2.0;
    const double mean = static_cast<double>(n1 * n2) / 2.0;

    TestResult res{"mann_whitney_u", u, 1.0, std::nullopt, false};
    if (n <= 12 && !has_ties(pooled)) {
        // Enumerate every assignment of ranks 1..n to the x group.
        size_t total = 0, le = 0, ge = 0, extreme = 0;
        for (uint32_t mask = 0; mask < (1u << n); ++mask) {
            if (static_cast<size_t>(std::popcount(mask)) != n1) continue;
            double rs = 0.0;
            for (size_t k = 0; k < n; ++k)
                if (mask >> k & 1u) rs += static_cast<double>(k + 1);
            const double uk = rs - static_cast<double>(n1 * (n1 + 1)) / 2.0;
            ++total;
            if (uk <= u) ++le;
            if (uk >= u) ++ge;
            if (std::abs(uk - mean) >= std::abs(u - mean)) ++extreme;
        }
        const double t = static_cast<double>(total);
        res.p_value = alt == Alternative::TwoSided ? static_cast<double>(extreme) / t
                                                   : tail_p(alt, static_cast<double>(le) / t, static_cast<double>(ge) / t);
        res.exact = true;
        return res;
    }
    const double nn = static_cast<double>(n);
    const double var = static_cast<double>(n1 * n2) / 12.0 * ((nn + 1.0) - tie_term(pooled) / (nn * (nn - 1.0)));
    if (var <= 0.0) return res;  // every value tied: no evidence
    const double sd = std::sqrt(var);
    const double p_less = 1.0 - normal_sf((u - mean + 0.5) / sd);
    const double p_greater = normal_sf((u - mean - 0.5) / sd);
    res.p_value = std::clamp(tail_p(alt, p_less, p_greater), 0.0, 1.0);
    return res;
}

TestResult kruskal_wallis(const std::vector<std::vector<double>> &groups) {
    if (groups.size() < 2) throw ArgumentError("kruskal_wallis needs at least two groups");
    std::vector<double> pooled;
    for (const auto &g : groups) {
        require_nonempty(g, "kruskal_wallis");
        pooled.insert(pooled.end(), g.begin(), g.end());
    }
    const std::vector<double> ranks = midranks(pooled);
    const double n = static_cast<double>(pooled.size());
    double sum = 0.0;
    size_t offset = 0;
    for (const auto &g : groups) {
        double rs = 0.0;
        for (size_t i = 0; i < g.size(); ++i) rs += ranks[offset + i];
        offset += g.size();
        sum += rs * rs / static_cast<double>(g.size());
    }
    TestResult res{"kruskal_wallis", 0.0, 1.0, std::nullopt, false};
    const double correction = 1.0 - tie_term(pooled) / (n * n * n - n);
    if (correction <= 0.0) return res;
    res.statistic = (12.0 / (n * (n + 1.0)) * sum - 3.0 * (n + 1.0)) / correction;
    res.statistic = std::max(res.statistic, 0.0);
    res.p_value = chi_square_sf(res.statistic, static_cast<double>(groups.size() - 1));
    return res;
}

TestResult friedman(const Matrix &blocks) {
    if (blocks.rows < 2 || blocks.cols < 2) throw ArgumentError("friedman needs at least 2 blocks and 2 treatments");
    const double n = static_cast<double>(blocks.rows), k = static_cast<double>(blocks.cols);
    std::vector<double> rank_sums(blocks.cols, 0.0);
    double sum_sq = 0.0;
    for (size_t b = 0; b < blocks.rows; ++b) {
        const std::vector<double> r = midranks(blocks.row(b));
        for (size_t j = 0; j < blocks.cols; ++j) {
            rank_sums[j] += r[j];
            sum_sq += r[j] * r[j];
        }
    }
    TestResult res{"friedman", 0.0, 1.0, std::nullopt, false};
    const double denom = sum_sq - n * k * (k + 1.0) * (k + 1.0) / 4.0;
    if (denom <= 1e-12) return res;  // every block fully tied
    double num = 0.0;
    for (double rsum : rank_sums) {
        const double dev = rsum - n * (k + 1.0) / 2.0;
        num += dev * dev;
    }
    res.statistic = (k - 1.0) * num / denom;
    res.p_value = chi_square_sf(res.statistic, k - 1.0);
    return res;
}

TestResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y, Alternative alt) {
    if (x.size() != y.size()) throw ShapeError("wilcoxon_signed_rank: samples must be paired");
    std::vector<double> diffs;
    for (size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - y[i];
        if (d != 0.0) diffs.push_back(d);
    }
    if (diffs.empty()) throw DegenerateInputError("wilcoxon_signed_rank: every paired difference is zero");
    const size_t m = diffs.size();
    std::vector<double> mags(m);
    for (size_t i = 0; i < m; ++i) mags[i] = std::abs(diffs[i]);
    const std::vector<double> ranks = midranks(mags);
    double w_plus = 0.0;
    for (size_t i = 0; i < m; ++i)
        if (diffs[i] > 0) w_plus += ranks[i];
    const double total = std::accumulate(ranks.begin(), ranks.end(), 0.0);
    const double mean = total / 2.0;

    TestResult res{"wilcoxon_signed_rank", w_plus, 1.0, std::nullopt, false};
    if (m <= 15) {
        size_t le = 0, ge = 0, extreme = 0;
        const uint32_t patterns = 1u << m;
        for (uint32_t mask = 0; mask < patterns; ++mask) {
            double w = 0.0;
            for (size_t i = 0; i < m; ++i)
                if (mask >> i & 1u) w += ranks[i];
            // exact comparisons; mid-ranks are multiples of 0.5
            if (w <= w_plus) ++le;
            if (w >= w_plus) ++ge;
            if (std::abs(w - mean) >= std::abs(w_plus - mean)) ++extreme;
        }
        const double t = static_cast<double>(patterns);
        res.p_value = alt == Alternative::TwoSided ? static_cast<double>(extreme) / t
                                                   : tail_p(alt, static_cast<double>(le) / t, static_cast<double>(ge) / t);
        res.exact = true;
        return res;
    }
    const double mm = static_cast<double>(m);
    const double var = mm * (mm + 1.0) * (2.0 * mm + 1.0) / 24.0 - tie_term(mags) / 48.0;
    if (var <= 0.0) return res;
    const double sd = std::sqrt(var);
    const double p_less = 1.0 - normal_sf((w_plus - mean + 0.5) / sd);
    const double p_greater = normal_sf((w_plus - mean - 0.5) / sd);
    res.p_value = std::clamp(tail_p(alt, p_less, p_greater), 0.0, 1.0);
    return res;
}

double chi_square_sf(double x, double dof) {
    if (!(dof > 0.0) || !std::isfinite(dof)) throw DomainError("chi_square_sf: dof must be positive");
    if (!(x >= 0.0)) throw DomainError("chi_square_sf: x must be >= 0");
    if (x == 0.0) return 1.0;
    if (std::isinf(x)) return 0.0;
    return boost::math::gamma_q(dof / 2.0, x / 2.0);
}

double normal_sf(double z) {
    if (std::isnan(z)) throw DomainError("normal_sf: NaN argument");
    return 0.5 * std::erfc(z / std::sqrt(2.0));
}

BoxStats box_stats(std::span<const double> values) {
    require_nonempty(values, "box_stats");
    std::vector<double> s(values.begin(), values.end());
    std::sort(s.begin(), s.end());
    auto quantile = [&s](double q) {
        const double pos = q * static_cast<double>(s.size() - 1);
        const auto lo = static_cast<size_t>(std::floor(pos));
        const size_t hi = std::min(lo + 1, s.size() - 1);
        return s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]);
    };
    BoxStats b;
    b.n = s.size();
    b.min = s.front();
    b.max = s.back();
    b.q1 = quantile(0.25);
    b.median = quantile(0.5);
    b.q3 = quantile(0.75);
    b.mean = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
    return b;
}

}  // namespace qrc::eval

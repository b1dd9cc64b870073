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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "qreservoir/errors.hpp"
#include "qreservoir/eval.hpp"
#include "qreservoir/rng.hpp"

using namespace qrc;
using namespace qrc::eval;

namespace {

using Vec = std::vector<double>;

// Pairwise-count U, independent of rank sums.
double u_by_pairs(const Vec &x, const Vec &y) {
    double u = 0;
    for (double a : x)
        for (double b : y) u += a > b ? 1.0 : (a == b ? 0.5 : 0.0);
    return u;
}

// Two-sided exact MWU p by permuting group labels over the pooled sample.
double mwu_exact_oracle(const Vec &x, const Vec &y) {
    Vec pooled = x;
    pooled.insert(pooled.end(), y.begin(), y.end());
    std::vector<int> label(pooled.size(), 1);
    std::fill(label.begin(), label.begin() + static_cast<long>(x.size()), 0);
    std::sort(label.begin(), label.end());
    const double mean = x.size() * y.size() / 2.0;
    const double obs = std::abs(u_by_pairs(x, y) - mean);
    size_t total = 0, extreme = 0;
    do {
        Vec a, b;
        for (size_t i = 0; i < pooled.size(); ++i) (label[i] == 0 ? a : b).push_back(pooled[i]);
        ++total;
        if (std::abs(u_by_pairs(a, b) - mean) >= obs - 1e-12) ++extreme;
    } while (std::next_permutation(label.begin(), label.end()));
    return static_cast<double>(extreme) / total;
}

// Two-sided exact signed-rank p by flipping signs of the differences.
double wilcoxon_exact_oracle(const Vec &d) {
    const size_t m = d.size();
    Vec mags(m);
    for (size_t i = 0; i < m; ++i) mags[i] = std::abs(d[i]);
    // mid-ranks by counting
    Vec rank(m);
    for (size_t i = 0; i < m; ++i) {
        double less = 0, equal = 0;
        for (size_t j = 0; j < m; ++j) {
            if (mags[j] < mags[i]) ++less;
            if (mags[j] == mags[i]) ++equal;
        }
        rank[i] = less + (equal + 1) / 2;
    }
    const double total = std::accumulate(rank.begin(), rank.end(), 0.0);
    double obs = 0;
    for (size_t i = 0; i < m; ++i)
        if (d[i] > 0) obs += rank[i];
    size_t extreme = 0;
    for (size_t mask = 0; mask < (size_t{1} << m); ++mask) {
        double w = 0;
        for (size_t i = 0; i < m; ++i)
            if (mask >> i & 1) w += rank[i];
        if (std::abs(w - total / 2) >= std::abs(obs - total / 2) - 1e-12) ++extreme;
    }
    return static_cast<double>(extreme) / static_cast<double>(size_t{1} << m);
}

// Composite Simpson rule.
template <class F>
double simpson(F f, double a, double b, int n = 200000) {
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4 : 2);
    return s * h / 3;
}

double chi_square_sf_oracle(double x, double dof) {
    if (dof == 1) {
        // P(Z^2 > x) = 2 P(Z > sqrt x)
        const auto phi = [](double z) { return std::exp(-z * z / 2) / std::sqrt(2 * M_PI); };
        return 2 * simpson(phi, std::sqrt(x), 40);
    }
    const double k = dof / 2;
    const auto pdf = [&](double t) {
        return std::exp((k - 1) * std::log(t) - t / 2 - k * std::log(2.0) - std::lgamma(k));
    };
    return simpson(pdf, x, x + 400);
}

Vec draw(size_t n, Rng &rng) {
    Vec v(n);
    for (auto &x : v) x = rng.uniform();
    return v;
}

}  // namespace

TEST(LMse, Examples) {
    std::vector<Matrix> p{Matrix(1, 2)}, t{Matrix(1, 2)};
    EXPECT_EQ(l_mse(p, t), 0.0);
    p[0].data = {1, 2};
    EXPECT_EQ(l_mse(p, t), 2.5);
    std::vector<Matrix> wrong{Matrix(2, 2)};
    EXPECT_THROW(l_mse(p, wrong), ShapeError);
    EXPECT_THROW(l_mse(std::vector<Matrix>{}, std::vector<Matrix>{}), ArgumentError);
}

TEST(LMse, TranslationConsistent) {
    Rng rng(1);
    std::vector<Matrix> p(7, Matrix(3, 2)), t(7, Matrix(3, 2));
    for (auto &m : p)
        for (auto &v : m.data) v = rng.uniform(-1, 1);
    for (auto &m : t)
        for (auto &v : m.data) v = rng.uniform(-1, 1);
    const double base = l_mse(p, t);
    for (size_t i = 0; i < 7; ++i)
        for (size_t r = 0; r < 3; ++r) {
            p[i](r, 0) += 3.5, t[i](r, 0) += 3.5;
            p[i](r, 1) -= 1.25, t[i](r, 1) -= 1.25;
        }
    EXPECT_NEAR(l_mse(p, t), base, 1e-12);
}

TEST(A12, Examples) {
    EXPECT_EQ(a12(Vec{2, 2, 2}, Vec{2, 2}), 0.5);
    EXPECT_EQ(a12(Vec{1, 2}, Vec{3, 4}), 0.0);
    EXPECT_EQ(a12(Vec{1, 3}, Vec{2}), 0.5);
    EXPECT_THROW(a12(Vec{}, Vec{1}), ArgumentError);
}

TEST(A12, ComplementAndMonotoneInvariance) {
    Rng rng(2);
    for (int trial = 0; trial < 100; ++trial) {
        Vec x = draw(1 + trial % 9, rng), y = draw(1 + trial % 7, rng);
        if (trial % 3 == 0) y[0] = x[0];  // include a tie
        EXPECT_EQ(a12(x, y) + a12(y, x), 1.0);
        Vec ex = x, ey = y;
        for (auto &v : ex) v = std::exp(3 * v) - 7;
        for (auto &v : ey) v = std::exp(3 * v) - 7;
        EXPECT_EQ(a12(ex, ey), a12(x, y));
        EXPECT_EQ(a12(x, y), u_by_pairs(x, y) / (x.size() * y.size()));
    }
}

TEST(MannWhitney, SeparatedSamples) {
    const auto r = mann_whitney_u(Vec{1, 2, 3}, Vec{4, 5, 6});
    EXPECT_EQ(r.statistic, 0.0);
    EXPECT_TRUE(r.exact);
    EXPECT_DOUBLE_EQ(r.p_value, 0.1);
    EXPECT_DOUBLE_EQ(mwu_exact_oracle({1, 2, 3}, {4, 5, 6}), 0.1);
}

TEST(MannWhitney, IdenticalSingletons) {
    EXPECT_EQ(mann_whitney_u(Vec{4}, Vec{4}).p_value, 1.0);
    EXPECT_EQ(mann_whitney_u(Vec{4, 4, 4}, Vec{4, 4}).p_value, 1.0);
    EXPECT_THROW(mann_whitney_u(Vec{}, Vec{1}), ArgumentError);
}

TEST(MannWhitney, ExactMatchesPermutationOracle) {
    Rng rng(3);
    for (int trial = 0; trial < 40; ++trial) {
        const size_t n1 = 1 + trial % 6, n2 = 1 + (trial / 6) % 6;
        const Vec x = draw(n1, rng), y = draw(n2, rng);
        const auto r = mann_whitney_u(x, y);
        ASSERT_TRUE(r.exact);
        EXPECT_NEAR(r.p_value, mwu_exact_oracle(x, y), 1e-12);
        EXPECT_EQ(r.statistic, u_by_pairs(x, y));
        EXPECT_NEAR(mann_whitney_u(y, x).p_value, r.p_value, 1e-12);
    }
}

TEST(MannWhitney, ExactAndNormalAgreeAtBoundary) {
    // 6 + 6 without ties: exact branch, compared with the normal
    // approximation written out here with continuity correction.
    Rng rng(4);
    for (int trial = 0; trial < 30; ++trial) {
        const Vec x = draw(6, rng), y = draw(6, rng);
        const auto r = mann_whitney_u(x, y);
        ASSERT_TRUE(r.exact);
        const double u = u_by_pairs(x, y), mean = 18, sd = std::sqrt(6.0 * 6 * 13 / 12);
        const double z = (std::abs(u - mean) - 0.5) / sd;
        const double approx = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
        EXPECT_NEAR(r.p_value, approx, 0.02) << "U=" << u;
    }
}

TEST(MannWhitney, LargeSamplesUseApproximation) {
    Rng rng(5);
    Vec x = draw(40, rng), y = draw(40, rng);
    for (auto &v : y) v += 0.3;
    const auto r = mann_whitney_u(x, y);
    EXPECT_FALSE(r.exact);
    EXPECT_LT(r.p_value, 0.05);
    const auto less = mann_whitney_u(x, y, Alternative::Less);
    const auto greater = mann_whitney_u(x, y, Alternative::Greater);
    EXPECT_LT(less.p_value, r.p_value);
    EXPECT_GT(greater.p_value, 0.9);
    EXPECT_NEAR(r.p_value, 2 * less.p_value, 1e-12);
}

TEST(KruskalWallis, Examples) {
    const auto r = kruskal_wallis({{1, 2, 3}, {4, 5, 6}, {7, 8, 9}});
    EXPECT_NEAR(r.statistic, 7.2, 1e-12);
    EXPECT_NEAR(r.p_value, std::exp(-3.6), 1e-12);  // chi-square(2) tail is exp(-x/2)
    const auto flat = kruskal_wallis({{2, 2}, {2, 2, 2}});
    EXPECT_EQ(flat.statistic, 0.0);
    EXPECT_EQ(flat.p_value, 1.0);
    EXPECT_THROW(kruskal_wallis({{1, 2}}), ArgumentError);
    EXPECT_THROW(kruskal_wallis({{1, 2}, {}}), ArgumentError);
}

TEST(KruskalWallis, GroupOrderIrrelevantAndTextbookFormula) {
    Rng rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<Vec> g{draw(4, rng), draw(5, rng), draw(3, rng)};
        const double h = kruskal_wallis(g).statistic;
        std::swap(g[0], g[2]);
        EXPECT_NEAR(kruskal_wallis(g).statistic, h, 1e-12);
        // tie-free: H = 12/(N(N+1)) sum R_i^2/n_i - 3(N+1), ranks by counting
        Vec pooled;
        for (auto &grp : g) pooled.insert(pooled.end(), grp.begin(), grp.end());
        const double n = pooled.size();
        double sum = 0;
        for (auto &grp : g) {
            double rs = 0;
            for (double v : grp) rs += 1 + std::count_if(pooled.begin(), pooled.end(), [&](double o) { return o < v; });
            sum += rs * rs / grp.size();
        }
        EXPECT_NEAR(h, 12 / (n * (n + 1)) * sum - 3 * (n + 1), 1e-10);
    }
}

TEST(Friedman, Examples) {
    Matrix perfect(10, 3);
    for (size_t b = 0; b < 10; ++b) perfect.data[b * 3] = 1, perfect.data[b * 3 + 1] = 5, perfect.data[b * 3 + 2] = 9 + b;
    const auto r = friedman(perfect);
    EXPECT_NEAR(r.statistic, 20.0, 1e-12);
    EXPECT_LT(r.p_value, 1e-4);
    Matrix flat(5, 4, 3.0);
    EXPECT_EQ(friedman(flat).statistic, 0.0);
    EXPECT_EQ(friedman(flat).p_value, 1.0);
    EXPECT_THROW(friedman(Matrix(1, 3)), ArgumentError);
    EXPECT_THROW(friedman(Matrix(3, 1)), ArgumentError);
}

TEST(Friedman, BlockShiftInvarianceAndTextbookFormula) {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const size_t n = 6, k = 4;
        Matrix m(n, k);
        for (auto &v : m.data) v = rng.uniform();
        const double s = friedman(m).statistic;
        Matrix shifted = m;
        for (size_t j = 0; j < k; ++j) shifted(2, j) += 100;
        EXPECT_NEAR(friedman(shifted).statistic, s, 1e-12);
        Vec rsum(k, 0.0);
        for (size_t b = 0; b < n; ++b)
            for (size_t j = 0; j < k; ++j)
                for (size_t o = 0; o < k; ++o) rsum[j] += (m(b, o) <= m(b, j)) ? 1 : 0;
        double sq = 0;
        for (double r : rsum) sq += r * r;
        EXPECT_NEAR(s, 12.0 / (n * k * (k + 1)) * sq - 3.0 * n * (k + 1), 1e-10);
    }
}

TEST(Wilcoxon, Examples) {
    const Vec x{2, 4, 6, 8, 10}, y{1, 2, 3, 4, 5};
    const auto r = wilcoxon_signed_rank(x, y);
    EXPECT_TRUE(r.exact);
    EXPECT_EQ(r.statistic, 15.0);  // W+ = 15 so W- = 0
    EXPECT_DOUBLE_EQ(r.p_value, 0.0625);
    EXPECT_DOUBLE_EQ(wilcoxon_exact_oracle({1, 2, 3, 4, 5}), 0.0625);
    EXPECT_DOUBLE_EQ(wilcoxon_signed_rank(y, x).p_value, 0.0625);
    EXPECT_THROW(wilcoxon_signed_rank(x, x), DegenerateInputError);
    EXPECT_THROW(wilcoxon_signed_rank(x, Vec{1, 2}), ShapeError);
}

TEST(Wilcoxon, ExactMatchesSignFlipOracle) {
    Rng rng(8);
    for (int trial = 0; trial < 40; ++trial) {
        const size_t m = 1 + trial % 12;
        Vec x = draw(m, rng), y = draw(m, rng);
        if (m > 3) y[1] = x[1];                    // a dropped zero difference
        if (m > 4) y[3] = x[3] - (x[2] - y[2]);   // a tied magnitude
        Vec d;
        for (size_t i = 0; i < m; ++i)
            if (x[i] != y[i]) d.push_back(x[i] - y[i]);
        if (d.empty()) continue;
        const auto r = wilcoxon_signed_rank(x, y);
        EXPECT_NEAR(r.p_value, wilcoxon_exact_oracle(d), 1e-12);
        EXPECT_NEAR(wilcoxon_signed_rank(y, x).p_value, r.p_value, 1e-12);
        // exact p is a multiple of 2^-m
        const double scaled = r.p_value * std::ldexp(1.0, static_cast<int>(d.size()));
        EXPECT_NEAR(scaled, std::round(scaled), 1e-9);
    }
}

TEST(Wilcoxon, LargeSampleApproximation) {
    Rng rng(9);
    Vec x = draw(40, rng), y = x;
    for (auto &v : y) v += rng.uniform(-0.1, 0.3);
    const auto r = wilcoxon_signed_rank(x, y);
    EXPECT_FALSE(r.exact);
    EXPECT_LT(r.p_value, 0.05);
    EXPECT_GE(r.p_value, 0.0);
}

TEST(Distributions, TailValues) {
    for (double k : {1.0, 2.0, 5.0, 20.0}) EXPECT_EQ(chi_square_sf(0, k), 1.0);
    EXPECT_EQ(normal_sf(0), 0.5);
    EXPECT_NEAR(chi_square_sf(3.841, 1), 0.05, 5e-4);
    EXPECT_NEAR(chi_square_sf(3.841, 1), chi_square_sf_oracle(3.841, 1), 1e-8);
    EXPECT_THROW(chi_square_sf(-1, 2), DomainError);
    EXPECT_THROW(chi_square_sf(1, 0), DomainError);
    EXPECT_THROW(normal_sf(NAN), DomainError);
}

TEST(Distributions, ChiSquareAgainstQuadrature) {
    for (double dof : {1.0, 2.0, 3.0, 7.0, 12.0, 20.0})
        for (double x : {0.5, 2.0, 6.0, 15.0, 30.0}) EXPECT_NEAR(chi_square_sf(x, dof), chi_square_sf_oracle(x, dof), 1e-8) << dof << " " << x;
}

TEST(Distributions, NormalAgainstQuadrature) {
    const auto phi = [](double z) { return std::exp(-z * z / 2) / std::sqrt(2 * M_PI); };
    for (double z : {-2.5, -1.0, 0.3, 1.96, 4.0}) EXPECT_NEAR(normal_sf(z), simpson(phi, z, 40), 1e-8);
}

TEST(BoxStats, LinearInterpolation) {
    const auto b = box_stats(Vec{4, 1, 3, 2});
    EXPECT_EQ(b.n, 4u);
    EXPECT_EQ(b.min, 1);
    EXPECT_EQ(b.q1, 1.75);
    EXPECT_EQ(b.median, 2.5);
    EXPECT_EQ(b.q3, 3.25);
    EXPECT_EQ(b.max, 4);
    EXPECT_EQ(b.mean, 2.5);
    const auto one = box_stats(Vec{7});
    EXPECT_EQ(one.q1, 7);
    EXPECT_EQ(one.q3, 7);
    EXPECT_THROW(box_stats(Vec{}), ArgumentError);
}

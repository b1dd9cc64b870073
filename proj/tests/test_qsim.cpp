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

#include <array>
#include <cmath>

#include "qreservoir/errors.hpp"
#include "qreservoir/qsim.hpp"
#include "test_support.hpp"

using namespace qrc;
using namespace qrc::qsim;

namespace {

constexpr double kPi = 3.14159265358979323846;

void expect_valid(const DensityMatrix &s) {
    EXPECT_NEAR(s.trace().real(), 1.0, 1e-10);
    EXPECT_NEAR(s.trace().imag(), 0.0, 1e-10);
    EXPECT_LT(s.hermiticity_error(), 1e-10);
    EXPECT_GE(s.min_eigenvalue(), -1e-9);
}

// Straight-line 4x4 real oracle, independent of the library: basis index
// b0 + 2 b1, so qubit 0 is the low bit.
using M4 = std::array<std::array<double, 4>, 4>;

M4 mul(const M4 &a, const M4 &b) {
    M4 c{};
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            for (int k = 0; k < 4; ++k) c[i][j] += a[i][k] * b[k][j];
    return c;
}

M4 transpose(const M4 &a) {
    M4 t{};
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) t[i][j] = a[j][i];
    return t;
}

}  // namespace

TEST(InitDensity, OneQubit) {
    const auto s = init_density(1);
    ASSERT_EQ(s.dim(), 2u);
    EXPECT_EQ(s.rho(0, 0), cplx(1, 0));
    EXPECT_EQ(s.rho(0, 1), cplx(0, 0));
    EXPECT_EQ(s.rho(1, 0), cplx(0, 0));
    EXPECT_EQ(s.rho(1, 1), cplx(0, 0));
}

TEST(InitDensity, TwoQubitsSingleNonzero) {
    const auto s = init_density(2);
    ASSERT_EQ(s.dim(), 4u);
    for (size_t i = 0; i < 4; ++i)
        for (size_t j = 0; j < 4; ++j) EXPECT_EQ(s.rho(i, j), cplx(i == 0 && j == 0 ? 1.0 : 0.0, 0.0));
}

TEST(InitDensity, RangeChecked) {
    EXPECT_THROW(init_density(13), SizeError);
    EXPECT_THROW(init_density(0), SizeError);
    EXPECT_NO_THROW(init_density(12 - 4));
}

TEST(GateMatrix, RyPi) {
    const auto m = gate_matrix(GateOp::single(GateKind::RY, 0, kPi));
    EXPECT_NEAR(std::abs(m(0, 0)), 0.0, 1e-15);
    EXPECT_NEAR(m(0, 1).real(), -1.0, 1e-15);
    EXPECT_NEAR(m(1, 0).real(), 1.0, 1e-15);
    EXPECT_NEAR(std::abs(m(1, 1)), 0.0, 1e-15);
}

TEST(GateMatrix, RzzZeroIsIdentity) {
    const auto m = gate_matrix(GateOp::pair(GateKind::RZZ, 0, 1, 0.0));
    EXPECT_LT(max_abs_diff(m, ComplexMatrix::identity(4)), 1e-15);
}

TEST(GateMatrix, RzzDiagonal) {
    const double t = 0.7;
    const auto m = gate_matrix(GateOp::pair(GateKind::RZZ, 0, 1, t));
    const cplx minus = std::exp(cplx(0, -t / 2)), plus = std::exp(cplx(0, t / 2));
    EXPECT_NEAR(std::abs(m(0, 0) - minus), 0, 1e-15);
    EXPECT_NEAR(std::abs(m(1, 1) - plus), 0, 1e-15);
    EXPECT_NEAR(std::abs(m(2, 2) - plus), 0, 1e-15);
    EXPECT_NEAR(std::abs(m(3, 3) - minus), 0, 1e-15);
}

TEST(GateMatrix, Hadamard) {
    const auto m = gate_matrix(GateOp::single(GateKind::H, 0));
    const double r = 1 / std::sqrt(2.0);
    EXPECT_NEAR(m(0, 0).real(), r, 1e-15);
    EXPECT_NEAR(m(0, 1).real(), r, 1e-15);
    EXPECT_NEAR(m(1, 0).real(), r, 1e-15);
    EXPECT_NEAR(m(1, 1).real(), -r, 1e-15);
}

TEST(GateMatrix, UnknownKindRejected) {
    EXPECT_THROW(parse_gate_kind("SWAP"), UnsupportedGateError);
    EXPECT_EQ(parse_gate_kind("RZZ"), GateKind::RZZ);
}

TEST(GateOp, Validation) {
    EXPECT_THROW(GateOp::pair(GateKind::CX, 0, 0).validate(2), IndexError);
    EXPECT_THROW((GateOp{GateKind::CX, {0}, 0.0}).validate(2), ArgumentError);
    EXPECT_THROW(GateOp::single(GateKind::X, 2).validate(2), IndexError);
    EXPECT_THROW(GateOp::single(GateKind::X, -1).validate(2), IndexError);
    EXPECT_THROW(GateOp::single(GateKind::RX, 0, NAN).validate(1), DomainError);
    EXPECT_THROW(apply_gate(init_density(2), GateOp::single(GateKind::X, 5)), IndexError);
}

TEST(ApplyGate, HadamardOnZero) {
    const auto s = apply_gate(init_density(1), GateOp::single(GateKind::H, 0));
    for (size_t i = 0; i < 2; ++i)
        for (size_t j = 0; j < 2; ++j) EXPECT_NEAR(std::abs(s.rho(i, j) - cplx(0.5, 0)), 0, 1e-15);
}

TEST(ApplyGate, XFlip) {
    const auto s = apply_gate(init_density(1), GateOp::single(GateKind::X, 0));
    EXPECT_EQ(s.rho(0, 0), cplx(0, 0));
    EXPECT_EQ(s.rho(1, 1), cplx(1, 0));
}

TEST(ApplyGate, BellFromSuperposedControl) {
    // (|00> + |10>)/sqrt2 in little-endian indices is (|0> + |1>)/sqrt2 on
    // qubit 0, so CX(0 -> 1) makes a Bell pair. Oracle: straight-line
    // 4x4 products, rho' = CX rho CX^T.
    M4 rho{};
    rho[0][0] = rho[0][1] = rho[1][0] = rho[1][1] = 0.5;
    M4 cx{};  // |b0 b1> -> |b0, b1 ^ b0>
    for (int b0 = 0; b0 < 2; ++b0)
        for (int b1 = 0; b1 < 2; ++b1) cx[b0 + 2 * (b1 ^ b0)][b0 + 2 * b1] = 1.0;
    const M4 want = mul(mul(cx, rho), transpose(cx));

    DensityMatrix s = apply_gate(init_density(2), GateOp::single(GateKind::H, 0));
    s = apply_gate(s, GateOp::pair(GateKind::CX, 0, 1));
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) EXPECT_NEAR(std::abs(s.rho(i, j) - cplx(want[i][j], 0)), 0, 1e-12);
    for (auto [i, j] : {std::pair{0, 0}, {0, 3}, {3, 0}, {3, 3}}) EXPECT_NEAR(s.rho(i, j).real(), 0.5, 1e-12);
    expect_valid(s);
}

TEST(ApplyCircuit, EmptyIsIdentity) {
    Rng rng(3);
    const auto s = fixtures::random_density(2, rng);
    const auto out = apply_circuit(s, Circuit{2, {}});
    EXPECT_EQ(out.rho.data, s.rho.data);
}

TEST(ApplyCircuit, DoubleXIsIdentity) {
    Rng rng(4);
    const auto s = fixtures::random_density(1, rng);
    const auto out =
        apply_circuit(s, Circuit{1, {GateOp::single(GateKind::X, 0), GateOp::single(GateKind::X, 0)}});
    EXPECT_LT(max_abs_diff(out.rho, s.rho), 1e-12);
}

TEST(ApplyCircuit, BellCircuit) {
    const auto s = apply_circuit(init_density(2), Circuit{2, {GateOp::single(GateKind::H, 0), GateOp::pair(GateKind::CX, 0, 1)}});
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            const bool corner = (i == 0 || i == 3) && (j == 0 || j == 3);
            EXPECT_NEAR(std::abs(s.rho(i, j) - cplx(corner ? 0.5 : 0.0, 0)), 0, 1e-12);
        }
}

TEST(ApplyCircuit, QubitCountMismatch) {
    EXPECT_THROW(apply_circuit(init_density(2), Circuit{3, {}}), SizeError);
}

TEST(ExpectZ, BasisAndSuperposition) {
    EXPECT_DOUBLE_EQ(expect_z(init_density(1), 0), 1.0);
    EXPECT_DOUBLE_EQ(expect_z(apply_gate(init_density(1), GateOp::single(GateKind::X, 0)), 0), -1.0);
    EXPECT_NEAR(expect_z(apply_gate(init_density(1), GateOp::single(GateKind::H, 0)), 0), 0.0, 1e-12);
    EXPECT_THROW(expect_z(init_density(2), 2), IndexError);
}

TEST(ExpectZ, AlwaysInRange) {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const auto s = fixtures::random_density(3, rng);
        for (int q = 0; q < 3; ++q) {
            const double z = expect_z(s, q);
            EXPECT_LE(std::abs(z), 1 + 1e-10);
        }
    }
}

TEST(LittleEndian, XOnQubitKPermutesBasis) {
    for (int n = 1; n <= 4; ++n) {
        for (int k = 0; k < n; ++k) {
            const auto s = apply_gate(init_density(n), GateOp::single(GateKind::X, k));
            const size_t idx = size_t{1} << k;
            EXPECT_EQ(s.rho(idx, idx), cplx(1, 0)) << "n=" << n << " k=" << k;
            EXPECT_DOUBLE_EQ(expect_z(s, k), -1.0);
            for (int other = 0; other < n; ++other) {
                if (other != k) {
                    EXPECT_DOUBLE_EQ(expect_z(s, other), 1.0);
                }
            }
        }
    }
}

TEST(ResetQubits, OneToZero) {
    const auto s = reset_qubits(apply_gate(init_density(1), GateOp::single(GateKind::X, 0)), std::vector<int>{0});
    EXPECT_LT(max_abs_diff(s.rho, init_density(1).rho), 1e-15);
}

TEST(ResetQubits, BellQubitZero) {
    // Oracle by index summation: trace out bit 0, then put |0> back at bit 0:
    // rho'[(0,b1),(0,c1)] = sum_b0 rho[(b0,b1),(b0,c1)].
    const auto bell = apply_circuit(init_density(2), Circuit{2, {GateOp::single(GateKind::H, 0), GateOp::pair(GateKind::CX, 0, 1)}});
    M4 want{};
    for (int b1 = 0; b1 < 2; ++b1)
        for (int c1 = 0; c1 < 2; ++c1)
            for (int b0 = 0; b0 < 2; ++b0) want[2 * b1][2 * c1] += bell.rho(b0 + 2 * b1, b0 + 2 * c1).real();
    const auto s = reset_qubits(bell, std::vector<int>{0});
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) EXPECT_NEAR(std::abs(s.rho(i, j) - cplx(want[i][j], 0)), 0, 1e-12);
    // populations 0.5 on |00> and on index 2 (qubit 1 set)
    EXPECT_NEAR(s.rho(0, 0).real(), 0.5, 1e-12);
    EXPECT_NEAR(s.rho(2, 2).real(), 0.5, 1e-12);
    EXPECT_NEAR(std::abs(s.rho(0, 2)), 0.0, 1e-12);
    expect_valid(s);
}

TEST(ResetQubits, AllGivesGroundState) {
    Rng rng(5);
    const auto s = reset_qubits(fixtures::random_density(3, rng), std::vector<int>{0, 1, 2});
    EXPECT_LT(max_abs_diff(s.rho, init_density(3).rho), 1e-12);
}

TEST(ResetQubits, DuplicatesRejected) {
    EXPECT_THROW(reset_qubits(init_density(2), std::vector<int>{1, 1}), ArgumentError);
    EXPECT_THROW(reset_qubits(init_density(2), std::vector<int>{2}), IndexError);
}

TEST(ResetQubits, IdempotentAndKeepsOtherMarginals) {
    Rng rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        const auto s = fixtures::random_density(3, rng);
        const std::vector<int> q{0, 2};
        const auto once = reset_qubits(s, q);
        const auto twice = reset_qubits(once, q);
        EXPECT_LT(max_abs_diff(once.rho, twice.rho), 1e-12);
        EXPECT_NEAR(expect_z(once, 1), expect_z(s, 1), 1e-12);
        EXPECT_NEAR(once.trace().real(), 1.0, 1e-10);
        expect_valid(once);
    }
}

TEST(UnitaryOf, Basics) {
    EXPECT_LT(max_abs_diff(unitary_of(Circuit{1, {}}), ComplexMatrix::identity(2)), 1e-15);
    const auto x = unitary_of(Circuit{1, {GateOp::single(GateKind::X, 0)}});
    EXPECT_EQ(x(0, 1), cplx(1, 0));
    EXPECT_EQ(x(1, 0), cplx(1, 0));
    EXPECT_EQ(x(0, 0), cplx(0, 0));
    EXPECT_THROW(unitary_of(Circuit{11, {}}), SizeError);
}

TEST(UnitaryOf, RandomCircuitsAreUnitary) {
    Rng rng(7);
    for (int trial = 0; trial < 30; ++trial) {
        const int n = 1 + static_cast<int>(rng.below(4));
        const auto u = unitary_of(fixtures::random_circuit(n, 12, rng));
        EXPECT_LT(max_abs_diff(u.adjoint() * u, ComplexMatrix::identity(u.dim)), 1e-10);
    }
}

TEST(ApplyCircuit, MatchesConjugationByUnitary) {
    Rng rng(8);
    for (int trial = 0; trial < 40; ++trial) {
        const auto c = fixtures::random_circuit(3, 10, rng);
        const auto s = fixtures::random_density(3, rng);
        const auto fast = apply_circuit(s, c);
        const auto slow = conjugate(s, unitary_of(c));
        EXPECT_LT(max_abs_diff(fast.rho, slow.rho), 1e-9);
        expect_valid(fast);
    }
}

TEST(VectorKernel, AgreesWithDensityPath) {
    Rng rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        const auto c = fixtures::random_circuit(3, 10, rng);
        std::vector<cplx> v(8);
        double norm = 0;
        for (auto &a : v) {
            a = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
            norm += std::norm(a);
        }
        for (auto &a : v) a /= std::sqrt(norm);
        DensityMatrix s{3, ComplexMatrix(8)};
        for (size_t i = 0; i < 8; ++i)
            for (size_t j = 0; j < 8; ++j) s.rho(i, j) = v[i] * std::conj(v[j]);
        apply_circuit_to_vector(v, c);
        const auto evolved = apply_circuit(s, c);
        for (size_t i = 0; i < 8; ++i)
            for (size_t j = 0; j < 8; ++j) EXPECT_NEAR(std::abs(evolved.rho(i, j) - v[i] * std::conj(v[j])), 0, 1e-12);
    }
}

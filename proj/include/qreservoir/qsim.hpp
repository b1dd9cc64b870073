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

#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

// Exact density-matrix simulation for small registers.
//
// Basis ordering is little-endian: qubit k is bit k of the basis index,
// so X on qubit 0 maps |...0> to |...1> (index 0 -> 1).

namespace qrc::qsim {

using cplx = std::complex<double>;

inline constexpr int kMaxQubits = 12;

/// Square complex matrix, row-major. `dim` is always a power of two.
struct ComplexMatrix {
    size_t dim = 0;
    std::vector<cplx> data;

    ComplexMatrix() = default;
    explicit ComplexMatrix(size_t d);
    static ComplexMatrix identity(size_t d);

    cplx &operator()(size_t r, size_t c) { return data[r * dim + c]; }
    const cplx &operator()(size_t r, size_t c) const { return data[r * dim + c]; }

    ComplexMatrix adjoint() const;
    ComplexMatrix operator*(const ComplexMatrix &rhs) const;
};

/// Largest entrywise modulus of a - b. Dimensions must agree.
double max_abs_diff(const ComplexMatrix &a, const ComplexMatrix &b);

struct DensityMatrix {
    int n_qubits = 0;
    ComplexMatrix rho;

    size_t dim() const { return rho.dim; }
    cplx trace() const;
    /// max |rho[i][j] - conj(rho[j][i])|
    double hermiticity_error() const;
    /// Smallest eigenvalue of the Hermitian part.
    double min_eigenvalue() const;
};

enum class GateKind { H, X, Y, Z, RX, RY, RZ, CX, CZ, RZZ };

std::string_view gate_name(GateKind kind);
GateKind parse_gate_kind(std::string_view name);
int gate_arity(GateKind kind);
bool gate_has_angle(GateKind kind);

/// One gate application. For CX the first target is the control.
struct GateOp {
    GateKind kind = GateKind::H;
    std::vector<int> targets;
    double angle = 0.0;

    static GateOp single(GateKind kind, int q, double angle = 0.0) { return {kind, {q}, angle}; }
    static GateOp pair(GateKind kind, int a, int b, double angle = 0.0) { return {kind, {a, b}, angle}; }

    /// Throws IndexError / ArgumentError / DomainError if the op cannot act
    /// on an n_qubits register.
    void validate(int n_qubits) const;
    bool operator==(const GateOp &) const = default;
};

struct Circuit {
    int n_qubits = 0;
    std::vector<GateOp> ops;

    void validate() const;
};

DensityMatrix init_density(int n_qubits);

/// Unitary of the gate on its own qubits (2x2 or 4x4). For two-qubit gates
/// the first target is the least-significant bit of the 4x4 index.
ComplexMatrix gate_matrix(const GateOp &op);

/// rho -> U rho U^dagger, in place, by index arithmetic on the target bits.
void apply_gate_inplace(DensityMatrix &state, const GateOp &op);
DensityMatrix apply_gate(DensityMatrix state, const GateOp &op);

void apply_circuit_inplace(DensityMatrix &state, const Circuit &circuit);
DensityMatrix apply_circuit(DensityMatrix state, const Circuit &circuit);

/// Tr(rho Z_q).
double expect_z(const DensityMatrix &state, int qubit);

/// Measure-and-discard channel: trace the listed qubits out and put them
/// back in |0><0|.
void reset_qubits_inplace(DensityMatrix &state, std::span<const int> qubits);
DensityMatrix reset_qubits(DensityMatrix state, std::span<const int> qubits);

/// Full 2^N unitary of a circuit (N <= 10).
ComplexMatrix unitary_of(const Circuit &circuit);

/// U rho U^dagger with an explicit dense U; the slow reference route.
DensityMatrix conjugate(const DensityMatrix &state, const ComplexMatrix &u);

/// Pure-state kernel: amplitudes -> U amplitudes, same index convention.
/// `amplitudes.size()` must be 2^n_qubits.
void apply_gate_to_vector(std::span<cplx> amplitudes, int n_qubits, const GateOp &op);
void apply_circuit_to_vector(std::span<cplx> amplitudes, const Circuit &circuit);

}  // namespace qrc::qsim

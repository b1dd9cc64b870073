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

#include "qreservoir/qsim.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "qreservoir/errors.hpp"

namespace qrc::qsim {

namespace {

// Plain product; avoids the NaN-recovery path of std::complex operator*.
inline cplx cmul(cplx a, cplx b) {
    return {a.real() * b.real() - a.imag() * b.imag(), a.real() * b.imag() + a.imag() * b.real()};
}

inline cplx cmul_conj(cplx a, cplx b) {  // a * conj(b)
    return {a.real() * b.real() + a.imag() * b.imag(), a.imag() * b.real() - a.real() * b.imag()};
}

bool is_diagonal(GateKind k) {
    return k == GateKind::Z || k == GateKind::RZ || k == GateKind::CZ || k == GateKind::RZZ;
}

// M -> G M for a single-qubit G acting on bit q of the row index.
void left_apply_1q(ComplexMatrix &m, int q, const ComplexMatrix &g) {
    const size_t n = m.dim;
    const size_t bit = size_t{1} << q;
    const cplx g00 = g(0, 0), g01 = g(0, 1), g10 = g(1, 0), g11 = g(1, 1);
    for (size_t i0 = 0; i0 < n; ++i0) {
        if (i0 & bit) continue;
        cplx *r0 = &m.data[i0 * n];
        cplx *r1 = &m.data[(i0 | bit) * n];
        for (size_t c = 0; c < n; ++c) {
            const cplx a = r0[c], b = r1[c];
            r0[c] = cmul(g00, a) + cmul(g01, b);
            r1[c] = cmul(g10, a) + cmul(g11, b);
        }
    }
}

// M -> M G^dagger for a single-qubit G acting on bit q of the column index.
void right_apply_adj_1q(ComplexMatrix &m, int q, const ComplexMatrix &g) {
    const size_t n = m.dim;
    const size_t bit = size_t{1} << q;
    const cplx g00 = g(0, 0), g01 = g(0, 1), g10 = g(1, 0), g11 = g(1, 1);
    for (size_t r = 0; r < n; ++r) {
        cplx *row = &m.data[r * n];
        for (size_t j0 = 0; j0 < n; ++j0) {
            if (j0 & bit) continue;
            const cplx a = row[j0], b = row[j0 | bit];
            row[j0] = cmul_conj(a, g00) + cmul_conj(b, g01);
            row[j0 | bit] = cmul_conj(a, g10) + cmul_conj(b, g11);
        }
    }
}

// Local 4x4 index of basis index i for targets (a, b): bit a is the low bit.
inline size_t sub_index(size_t i, size_t bit_a, size_t bit_b) {
    return ((i & bit_a) ? 1u : 0u) | ((i & bit_b) ? 2u : 0u);
}

void left_apply_2q(ComplexMatrix &m, int qa, int qb, const ComplexMatrix &g) {
    const size_t n = m.dim;
    const size_t ba = size_t{1} << qa, bb = size_t{1} << qb;
    cplx in[4];
    for (size_t base = 0; base < n; ++base) {
        if (base & (ba | bb)) continue;
        const size_t idx[4] = {base, base | ba, base | bb, base | ba | bb};
        for (size_t c = 0; c < n; ++c) {
            for (int k = 0; k < 4; ++k) in[k] = m.data[idx[k] * n + c];
            for (int r = 0; r < 4; ++r) {
                cplx acc = 0.0;
                for (int k = 0; k < 4; ++k) acc += cmul(g(r, k), in[k]);
                m.data[idx[r] * n + c] = acc;
            }
        }
    }
}

void right_apply_adj_2q(ComplexMatrix &m, int qa, int qb, const ComplexMatrix &g) {
    const size_t n = m.dim;
    const size_t ba = size_t{1} << qa, bb = size_t{1} << qb;
    cplx in[4];
    for (size_t r = 0; r < n; ++r) {
        cplx *row = &m.data[r * n];
        for (size_t base = 0; base < n; ++base) {
            if (base & (ba | bb)) continue;
            const size_t idx[4] = {base, base | ba, base | bb, base | ba | bb};
            for (int k = 0; k < 4; ++k) in[k] = row[idx[k]];
            for (int c = 0; c < 4; ++c) {
                cplx acc = 0.0;
                for (int k = 0; k < 4; ++k) acc += cmul_conj(in[k], g(c, k));
                row[idx[c]] = acc;
            }
        }
    }
}

// Phase of basis index i under a diagonal gate.
cplx diagonal_phase(const GateOp &op, size_t i, const ComplexMatrix &g) {
    const size_t ba = size_t{1} << op.targets[0];
    if (gate_arity(op.kind) == 1) return g((i & ba) ? 1 : 0, (i & ba) ? 1 : 0);
    const size_t bb = size_t{1} << op.targets[1];
    const size_t s = sub_index(i, ba, bb);
    return g(s, s);
}

void apply_diagonal(ComplexMatrix &m, const GateOp &op, const ComplexMatrix &g) {
    const size_t n = m.dim;
    std::vector<cplx> phase(n);
    for (size_t i = 0; i < n; ++i) phase[i] = diagonal_phase(op, i, g);
    for (size_t r = 0; r < n; ++r) {
        cplx *row = &m.data[r * n];
        for (size_t c = 0; c < n; ++c) row[c] = cmul(phase[r], cmul_conj(row[c], phase[c]));
    }
}

// CX is a basis permutation: swap rows, then columns.
void apply_cx(ComplexMatrix &m, int control, int target) {
    const size_t n = m.dim;
    const size_t bc = size_t{1} << control, bt = size_t{1} << target;
    for (size_t i = 0; i < n; ++i) {
        if (!(i & bc) || (i & bt)) continue;
        std::swap_ranges(m.data.begin() + i * n, m.data.begin() + (i + 1) * n, m.data.begin() + (i | bt) * n);
    }
    for (size_t r = 0; r < n; ++r) {
        cplx *row = &m.data[r * n];
        for (size_t j = 0; j < n; ++j) {
            if (!(j & bc) || (j & bt)) continue;
            std::swap(row[j], row[j | bt]);
        }
    }
}

void check_state_qubit(const DensityMatrix &state, int qubit) {
    if (qubit < 0 || qubit >= state.n_qubits) {
        throw IndexError("qubit " + std::to_string(qubit) + " out of range for " + std::to_string(state.n_qubits) +
                         "-qubit register");
    }
}

}  // namespace

ComplexMatrix::ComplexMatrix(size_t d) : dim(d), data(d * d, cplx{0.0, 0.0}) {
    if (d == 0 || (d & (d - 1)) != 0) throw SizeError("matrix dimension must be a power of two");
}

ComplexMatrix ComplexMatrix::identity(size_t d) {
    ComplexMatrix m(d);
    for (size_t i = 0; i < d; ++i) m(i, i) = 1.0;
    return m;
}

ComplexMatrix ComplexMatrix::adjoint() const {
    ComplexMatrix out(dim);
    for (size_t r = 0; r < dim; ++r)
        for (size_t c = 0; c < dim; ++c) out(c, r) = std::conj((*this)(r, c));
    return out;
}

ComplexMatrix ComplexMatrix::operator*(const ComplexMatrix &rhs) const {
    if (rhs.dim != dim) throw SizeError("matrix dimension mismatch");
    ComplexMatrix out(dim);
    for (size_t r = 0; r < dim; ++r) {
        for (size_t k = 0; k < dim; ++k) {
            const cplx a = (*this)(r, k);
            if (a == cplx{}) continue;
            const cplx *src = &rhs.data[k * dim];
            cplx *dst = &out.data[r * dim];
            for (size_t c = 0; c < dim; ++c) dst[c] += cmul(a, src[c]);
        }
    }
    return out;
}

double max_abs_diff(const ComplexMatrix &a, const ComplexMatrix &b) {
    if (a.dim != b.dim) throw SizeError("matrix dimension mismatch");
    double worst = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) worst = std::max(worst, std::abs(a.data[i] - b.data[i]));
    return worst;
}

cplx DensityMatrix::trace() const {
    cplx t = 0.0;
    for (size_t i = 0; i < rho.dim; ++i) t += rho(i, i);
    return t;
}

double DensityMatrix::hermiticity_error() const {
    double worst = 0.0;
    for (size_t r = 0; r < rho.dim; ++r)
        for (size_t c = r; c < rho.dim; ++c) worst = std::max(worst, std::abs(rho(r, c) - std::conj(rho(c, r))));
    return worst;
}

double DensityMatrix::min_eigenvalue() const {
    const auto n = static_cast<Eigen::Index>(rho.dim);
    Eigen::MatrixXcd m(n, n);
    for (Eigen::Index r = 0; r < n; ++r)
        for (Eigen::Index c = 0; c < n; ++c) m(r, c) = rho(static_cast<size_t>(r), static_cast<size_t>(c));
    const Eigen::MatrixXcd herm = 0.5 * (m + m.adjoint());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(herm, Eigen::EigenvaluesOnly);
    return solver.eigenvalues().minCoeff();
}

std::string_view gate_name(GateKind kind) {
    switch (kind) {
        case GateKind::H: return "H";
        case GateKind::X: return "X";
        case GateKind::Y: return "Y";
        case GateKind::Z: return "Z";
        case GateKind::RX: return "RX";
        case GateKind::RY: return "RY";
        case GateKind::RZ: return "RZ";
        case GateKind::CX: return "CX";
        case GateKind::CZ: return "CZ";
        case GateKind::RZZ: return "RZZ";
    }
    throw UnsupportedGateError("unknown gate kind");
}

GateKind parse_gate_kind(std::string_view name) {
    for (GateKind k : {GateKind::H, GateKind::X, GateKind::Y, GateKind::Z, GateKind::RX, GateKind::RY, GateKind::RZ,
                       GateKind::CX, GateKind::CZ, GateKind::RZZ}) {
        if (gate_name(k) == name) return k;
    }
    throw UnsupportedGateError("unsupported gate '" + std::string(name) + "'");
}

int gate_arity(GateKind kind) {
    switch (kind) {
        case GateKind::CX:
        case GateKind::CZ:
        case GateKind::RZZ: return 2;
        case GateKind::H:
        case GateKind::X:
        case GateKind::Y:
        case GateKind::Z:
        case GateKind::RX:
        case GateKind::RY:
        case GateKind::RZ: return 1;
    }
    throw UnsupportedGateError("unknown gate kind");
}

bool gate_has_angle(GateKind kind) {
    return kind == GateKind::RX || kind == GateKind::RY || kind == GateKind::RZ || kind == GateKind::RZZ;
}

void GateOp::validate(int n_qubits) const {
    if (static_cast<int>(targets.size()) != gate_arity(kind)) {
        throw ArgumentError(std::string(gate_name(kind)) + " expects " + std::to_string(gate_arity(kind)) + " target(s)");
    }
    for (size_t i = 0; i < targets.size(); ++i) {
        if (targets[i] < 0 || targets[i] >= n_qubits) {
            throw IndexError(std::string(gate_name(kind)) + " target " + std::to_string(targets[i]) +
                             " out of range for " + std::to_string(n_qubits) + " qubits");
        }
        for (size_t j = 0; j < i; ++j) {
            if (targets[i] == targets[j]) throw IndexError(std::string(gate_name(kind)) + " targets must be distinct");
        }
    }
    if (!std::isfinite(angle)) throw DomainError("gate angle must be finite");
}

void Circuit::validate() const {
    if (n_qubits < 1 || n_qubits > kMaxQubits) throw SizeError("circuit qubit count out of range");
    for (const auto &op : ops) op.validate(n_qubits);
}

DensityMatrix init_density(int n_qubits) {
    if (n_qubits < 1 || n_qubits > kMaxQubits) {
        throw SizeError("n_qubits must be in [1, " + std::to_string(kMaxQubits) + "], got " + std::to_string(n_qubits));
    }
    DensityMatrix s{n_qubits, ComplexMatrix(size_t{1} << n_qubits)};
    s.rho(0, 0) = 1.0;
    return s;
}

ComplexMatrix gate_matrix(const GateOp &op) {
    const double h = op.angle / 2.0;
    const double c = std::cos(h), s = std::sin(h);
    const cplx i{0.0, 1.0};
    switch (op.kind) {
        case GateKind::H: {
            ComplexMatrix m(2);
            const double r = 1.0 / std::sqrt(2.0);
            m(0, 0) = r; m(0, 1) = r; m(1, 0) = r; m(1, 1) = -r;
            return m;
        }
        case GateKind::X: {
            ComplexMatrix m(2);
            m(0, 1) = 1.0; m(1, 0) = 1.0;
            return m;
        }
        case GateKind::Y: {
            ComplexMatrix m(2);
            m(0, 1) = -i; m(1, 0) = i;
            return m;
        }
        case GateKind::Z: {
            ComplexMatrix m(2);
            m(0, 0) = 1.0; m(1, 1) = -1.0;
            return m;
        }
        case GateKind::RX: {
            ComplexMatrix m(2);
            m(0, 0) = c; m(0, 1) = -i * s; m(1, 0) = -i * s; m(1, 1) = c;
            return m;
        }
        case GateKind::RY: {
            ComplexMatrix m(2);
            m(0, 0) = c; m(0, 1) = -s; m(1, 0) = s; m(1, 1) = c;
            return m;
        }
        case GateKind::RZ: {
            ComplexMatrix m(2);
            m(0, 0) = std::polar(1.0, -h); m(1, 1) = std::polar(1.0, h);
            return m;
        }
        case GateKind::CX: {
            // local index = control | target << 1
            ComplexMatrix m(4);
            m(0, 0) = 1.0; m(2, 2) = 1.0; m(1, 3) = 1.0; m(3, 1) = 1.0;
            return m;
        }
        case GateKind::CZ: {
            ComplexMatrix m = ComplexMatrix::identity(4);
            m(3, 3) = -1.0;
            return m;
        }
        case GateKind::RZZ: {
            ComplexMatrix m(4);
            m(0, 0) = std::polar(1.0, -h); m(1, 1) = std::polar(1.0, h);
            m(2, 2) = std::polar(1.0, h); m(3, 3) = std::polar(1.0, -h);
            return m;
        }
    }
    throw UnsupportedGateError("unknown gate kind");
}

void apply_gate_inplace(DensityMatrix &state, const GateOp &op) {
    op.validate(state.n_qubits);
    if (op.kind == GateKind::CX) {
        apply_cx(state.rho, op.targets[0], op.targets[1]);
        return;
    }
    const ComplexMatrix g = gate_matrix(op);
    if (is_diagonal(op.kind)) {
        apply_diagonal(state.rho, op, g);
    } else if (gate_arity(op.kind) == 1) {
        left_apply_1q(state.rho, op.targets[0], g);
        right_apply_adj_1q(state.rho, op.targets[0], g);
    } else {
        left_apply_2q(state.rho, op.targets[0], op.targets[1], g);
        right_apply_adj_2q(state.rho, op.targets[0], op.targets[1], g);
    }
}

DensityMatrix apply_gate(DensityMatrix state, const GateOp &op) {
    apply_gate_inplace(state, op);
    return state;
}

void apply_circuit_inplace(DensityMatrix &state, const Circuit &circuit) {
    if (circuit.n_qubits != state.n_qubits) {
        throw SizeError("circuit has " + std::to_string(circuit.n_qubits) + " qubits, state has " +
                        std::to_string(state.n_qubits));
    }
    for (const auto &op : circuit.ops) apply_gate_inplace(state, op);
}

DensityMatrix apply_circuit(DensityMatrix state, const Circuit &circuit) {
    apply_circuit_inplace(state, circuit);
    return state;
}

double expect_z(const DensityMatrix &state, int qubit) {
    check_state_qubit(state, qubit);
    const size_t bit = size_t{1} << qubit;
    double acc = 0.0;
    for (size_t i = 0; i < state.rho.dim; ++i) {
        const double p = state.rho(i, i).real();
        acc += (i & bit) ? -p : p;
    }
    return acc;
}

void reset_qubits_inplace(DensityMatrix &state, std::span<const int> qubits) {
    size_t mask = 0;
    for (int q : qubits) {
        check_state_qubit(state, q);
        const size_t bit = size_t{1} << q;
        if (mask & bit) throw ArgumentError("duplicate qubit " + std::to_string(q) + " in reset list");
        mask |= bit;
    }
    if (mask == 0) return;
    const size_t n = state.rho.dim;
    ComplexMatrix &m = state.rho;
    // Fold every (i|s, j|s) entry onto (i, j) for the reset bits, then zero
    // the rows/columns with any reset bit set.
    for (size_t i = 0; i < n; ++i) {
        if (i & mask) continue;
        for (size_t j = 0; j < n; ++j) {
            if (j & mask) continue;
            cplx acc = 0.0;
            for (size_t s = mask;; s = (s - 1) & mask) {
                acc += m(i | s, j | s);
                if (s == 0) break;
            }
            m(i, j) = acc;
        }
    }
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j < n; ++j) {
            if ((i & mask) || (j & mask)) m(i, j) = 0.0;
        }
    }
}

DensityMatrix reset_qubits(DensityMatrix state, std::span<const int> qubits) {
    reset_qubits_inplace(state, qubits);
    return state;
}

namespace {

// Explicit 2^N embedding of a gate: entry (i, j) is the local gate entry when
// all non-target bits of i and j agree, zero otherwise.
ComplexMatrix embed(const GateOp &op, int n_qubits) {
    const size_t n = size_t{1} << n_qubits;
    const ComplexMatrix g = gate_matrix(op);
    size_t tmask = 0;
    for (int t : op.targets) tmask |= size_t{1} << t;
    auto local = [&](size_t i) {
        size_t s = 0;
        for (size_t k = 0; k < op.targets.size(); ++k) s |= ((i >> op.targets[k]) & 1u) << k;
        return s;
    };
    ComplexMatrix e(n);
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < n; ++j)
            if ((i & ~tmask) == (j & ~tmask)) e(i, j) = g(local(i), local(j));
    return e;
}

}  // namespace

ComplexMatrix unitary_of(const Circuit &circuit) {
    if (circuit.n_qubits < 1 || circuit.n_qubits > 10) throw SizeError("unitary_of supports 1..10 qubits");
    circuit.validate();
    ComplexMatrix u = ComplexMatrix::identity(size_t{1} << circuit.n_qubits);
    for (const auto &op : circuit.ops) u = embed(op, circuit.n_qubits) * u;
    return u;
}

DensityMatrix conjugate(const DensityMatrix &state, const ComplexMatrix &u) {
    if (u.dim != state.rho.dim) throw SizeError("unitary dimension mismatch");
    return {state.n_qubits, u * state.rho * u.adjoint()};
}

void apply_gate_to_vector(std::span<cplx> amplitudes, int n_qubits, const GateOp &op) {
    if (amplitudes.size() != (size_t{1} << n_qubits)) throw SizeError("amplitude count must be 2^n_qubits");
    op.validate(n_qubits);
    const ComplexMatrix g = gate_matrix(op);
    const size_t n = amplitudes.size();
    const size_t ba = size_t{1} << op.targets[0];
    if (gate_arity(op.kind) == 1) {
        for (size_t i0 = 0; i0 < n; ++i0) {
            if (i0 & ba) continue;
            const cplx a = amplitudes[i0], b = amplitudes[i0 | ba];
            amplitudes[i0] = cmul(g(0, 0), a) + cmul(g(0, 1), b);
            amplitudes[i0 | ba] = cmul(g(1, 0), a) + cmul(g(1, 1), b);
        }
        return;
    }
    const size_t bb = size_t{1} << op.targets[1];
    for (size_t base = 0; base < n; ++base) {
        if (base & (ba | bb)) continue;
        const size_t idx[4] = {base, base | ba, base | bb, base | ba | bb};
        cplx in[4];
        for (int k = 0; k < 4; ++k) in[k] = amplitudes[idx[k]];
        for (int r = 0; r < 4; ++r) {
            cplx acc = 0.0;
            for (int k = 0; k < 4; ++k) acc += cmul(g(r, k), in[k]);
            amplitudes[idx[r]] = acc;
        }
    }
}

void apply_circuit_to_vector(std::span<cplx> amplitudes, const Circuit &circuit) {
    for (const auto &op : circuit.ops) apply_gate_to_vector(amplitudes, circuit.n_qubits, op);
}

}  // namespace qrc::qsim

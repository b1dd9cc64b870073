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

#include "qreservoir/reservoir.hpp"

#include <cassert>
#include <cmath>
#include <numbers>
#include <string>

#include "qreservoir/errors.hpp"
#include "qreservoir/rng.hpp"

namespace qrc::reservoir {

using qsim::Circuit;
using qsim::cplx;
using qsim::DensityMatrix;
using qsim::GateKind;
using qsim::GateOp;

std::string_view family_name(Family f) {
    switch (f) {
        case Family::CNOT: return "CNOT";
        case Family::Rotation: return "Rotation";
        case Family::EfficientSU2: return "EfficientSU2";
        case Family::IsingHamiltonian: return "IsingHamiltonian";
    }
    throw ArgumentError("unknown reservoir family");
}

Family parse_family(std::string_view name) {
    for (Family f : {Family::CNOT, Family::Rotation, Family::EfficientSU2, Family::IsingHamiltonian}) {
        if (family_name(f) == name) return f;
    }
    throw ArgumentError("unknown reservoir family '" + std::string(name) + "'");
}

std::string_view engine_name(FeatureEngine e) {
    return e == FeatureEngine::Density ? "density" : "ancilla_block";
}

FeatureEngine parse_engine(std::string_view name) {
    if (name == "density") return FeatureEngine::Density;
    if (name == "ancilla_block") return FeatureEngine::AncillaBlock;
    throw ArgumentError("unknown feature engine '" + std::string(name) + "'");
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void check_shape(int d, int n_ancilla, int depth) {
    if (d < 1) throw ArgumentError("reservoir needs at least one input qubit");
    if (n_ancilla < 0) throw ArgumentError("ancilla count must be non-negative");
    if (depth < 1) throw ArgumentError("reservoir depth must be >= 1");
    if (d + n_ancilla > qsim::kMaxQubits) {
        throw SizeError("reservoir needs " + std::to_string(d + n_ancilla) + " qubits, limit is " +
                        std::to_string(qsim::kMaxQubits));
    }
}

// Circular nearest-neighbour pairs (0,1), (1,2), ..., (N-1,0). A single qubit
// has no pairs.
std::vector<std::pair<int, int>> ring(int n) {
    std::vector<std::pair<int, int>> out;
    if (n < 2) return out;
    for (int q = 0; q < n; ++q) out.emplace_back(q, (q + 1) % n);
    return out;
}

}  // namespace

ReservoirSpec ReservoirSpec::make(Family family, int n_input_qubits, int n_ancilla, int depth, uint64_t seed) {
    check_shape(n_input_qubits, n_ancilla, depth);
    ReservoirSpec spec;
    spec.family = family;
    spec.n_input_qubits = n_input_qubits;
    spec.n_ancilla = n_ancilla;
    spec.depth = depth;
    spec.seed = seed;
    const int n = spec.n_qubits();
    static constexpr GateKind kAxes[3] = {GateKind::RX, GateKind::RY, GateKind::RZ};
    for (int layer = 0; layer < depth; ++layer) {
        Rng rng = Rng::substream(seed, static_cast<uint64_t>(layer));
        switch (family) {
            case Family::CNOT: break;
            case Family::Rotation:
                for (int q = 0; q < n; ++q) {
                    spec.rotation_axes.push_back(kAxes[rng.below(3)]);
                    spec.params.push_back(rng.uniform(0.0, kTwoPi));
                }
                break;
            case Family::EfficientSU2:
                for (int q = 0; q < 2 * n; ++q) spec.params.push_back(rng.uniform(0.0, kTwoPi));
                break;
            case Family::IsingHamiltonian:
                for (int q = 0; q < 2 * n; ++q) spec.params.push_back(rng.uniform(-1.0, 1.0));
                break;
        }
    }
    return spec;
}

void ReservoirSpec::validate() const {
    check_shape(n_input_qubits, n_ancilla, depth);
    const ReservoirSpec fresh = make(family, n_input_qubits, n_ancilla, depth, seed);
    if (fresh.params != params || fresh.rotation_axes != rotation_axes) {
        throw IntegrityError("reservoir parameters do not match those generated by seed " + std::to_string(seed));
    }
}

Circuit build_reservoir_circuit(const ReservoirSpec &spec) {
    check_shape(spec.n_input_qubits, spec.n_ancilla, spec.depth);
    const int n = spec.n_qubits();
    Circuit c{n, {}};
    size_t p = 0;
    auto param = [&]() {
        if (p >= spec.params.size()) throw IntegrityError("reservoir spec has too few parameters");
        return spec.params[p++];
    };
    for (int layer = 0; layer < spec.depth; ++layer) {
        switch (spec.family) {
            case Family::CNOT:
                for (auto [a, b] : ring(n)) c.ops.push_back(GateOp::pair(GateKind::CX, a, b));
                break;
            case Family::Rotation:
                for (int q = 0; q < n; ++q) {
                    const size_t k = static_cast<size_t>(layer * n + q);
                    if (k >= spec.rotation_axes.size()) throw IntegrityError("reservoir spec has too few rotation axes");
                    c.ops.push_back(GateOp::single(spec.rotation_axes[k], q, param()));
                }
                for (auto [a, b] : ring(n)) c.ops.push_back(GateOp::pair(GateKind::CZ, a, b));
                break;
            case Family::EfficientSU2:
                for (int q = 0; q < n; ++q) c.ops.push_back(GateOp::single(GateKind::RY, q, param()));
                for (int q = 0; q < n; ++q) c.ops.push_back(GateOp::single(GateKind::RZ, q, param()));
                // reverse linear: highest control first
                for (int q = n - 2; q >= 0; --q) c.ops.push_back(GateOp::pair(GateKind::CX, q, q + 1));
                break;
            case Family::IsingHamiltonian: {
                for (int q = 0; q < n; ++q) c.ops.push_back(GateOp::single(GateKind::RX, q, param()));
                // one coupling per qubit is drawn even when N < 2 so the
                // parameter layout does not depend on N
                std::vector<double> couplings;
                for (int q = 0; q < n; ++q) couplings.push_back(param());
                int k = 0;
                for (auto [a, b] : ring(n)) c.ops.push_back(GateOp::pair(GateKind::RZZ, a, b, couplings[k++]));
                break;
            }
        }
    }
    if (p != spec.params.size()) throw IntegrityError("reservoir spec has unused parameters");
    return c;
}

void encode_value_inplace(DensityMatrix &state, int qubit, double s) {
    if (!(s >= 0.0 && s <= 1.0)) throw DomainError("encoded value must lie in [0, 1], got " + std::to_string(s));
#ifndef NDEBUG
    if (qubit >= 0 && qubit < state.n_qubits) {
        double p1 = 0.0;
        for (size_t i = 0; i < state.dim(); ++i)
            if (i & (size_t{1} << qubit)) p1 += state.rho(i, i).real();
        assert(p1 < 1e-9 && "encoding target must be in |0>");
    }
#endif
    qsim::apply_gate_inplace(state, GateOp::single(GateKind::RY, qubit, 2.0 * std::asin(std::sqrt(s))));
}

DensityMatrix encode_value(DensityMatrix state, int qubit, double s) {
    encode_value_inplace(state, qubit, s);
    return state;
}

size_t feature_dimension(size_t window_length, int n_input_qubits, int n_qubits) {
    if (window_length == 0) throw ShapeError("window length must be >= 1");
    return (window_length - 1) * static_cast<size_t>(n_input_qubits) + static_cast<size_t>(n_qubits);
}

namespace {

void check_row(std::span<const double> row, int d) {
    if (static_cast<int>(row.size()) != d) {
        throw ShapeError("state has " + std::to_string(row.size()) + " features, reservoir expects " + std::to_string(d));
    }
    for (double v : row) {
        if (!(v >= 0.0 && v <= 1.0)) throw DomainError("feature value outside [0, 1]: " + std::to_string(v));
    }
}

class DensityEvolver {
   public:
    DensityEvolver(const ReservoirSpec &spec, const Circuit &circuit)
        : d_(spec.n_input_qubits), circuit_(circuit), state_(qsim::init_density(spec.n_qubits())) {
        for (int q = 0; q < d_; ++q) inputs_.push_back(q);
    }

    void step(std::span<const double> row) {
        for (int q = 0; q < d_; ++q) encode_value_inplace(state_, q, row[q]);
        qsim::apply_circuit_inplace(state_, circuit_);
    }
    void measure(int n, std::vector<double> &out) const {
        for (int q = 0; q < n; ++q) out.push_back(qsim::expect_z(state_, q));
    }
    void reset_inputs() { qsim::reset_qubits_inplace(state_, inputs_); }

   private:
    int d_;
    const Circuit &circuit_;
    DensityMatrix state_;
    std::vector<int> inputs_;
};

// Register after a reset is |0..0><0..0| (inputs) (x) sigma (ancillas). One
// step evolves psi_a = U (|x> (x) |a>) for every ancilla basis state a, which
// fully determines U (|x><x| (x) sigma) U^dagger = sum_ab sigma_ab |psi_a><psi_b|.
class AncillaBlockEvolver {
   public:
    AncillaBlockEvolver(const ReservoirSpec &spec, const Circuit &circuit)
        : d_(spec.n_input_qubits),
          n_(spec.n_qubits()),
          anc_dim_(size_t{1} << spec.n_ancilla),
          circuit_(circuit),
          sigma_(anc_dim_ * anc_dim_, cplx{}),
          psi_(anc_dim_, std::vector<cplx>(size_t{1} << n_)) {
        sigma_[0] = 1.0;
    }

    void step(std::span<const double> row) {
        // product input state, same amplitudes as RY(2 asin sqrt(s))|0>
        const size_t in_dim = size_t{1} << d_;
        std::vector<double> amp(in_dim, 1.0);
        for (int q = 0; q < d_; ++q) {
            const double half = std::asin(std::sqrt(row[q]));
            const double c = std::cos(half), s = std::sin(half);
            for (size_t i = 0; i < in_dim; ++i) amp[i] *= (i >> q & 1u) ? s : c;
        }
        for (size_t a = 0; a < anc_dim_; ++a) {
            auto &v = psi_[a];
            std::fill(v.begin(), v.end(), cplx{});
            for (size_t i = 0; i < in_dim; ++i) v[i | (a << d_)] = amp[i];
            qsim::apply_circuit_to_vector(v, circuit_);
        }
    }

    void measure(int n, std::vector<double> &out) const {
        const size_t dim = size_t{1} << n_;
        std::vector<double> acc(static_cast<size_t>(n), 0.0);
        for (size_t a = 0; a < anc_dim_; ++a) {
            for (size_t b = 0; b < anc_dim_; ++b) {
                const cplx w = sigma_[a * anc_dim_ + b];
                if (w == cplx{}) continue;
                const auto &pa = psi_[a];
                const auto &pb = psi_[b];
                for (size_t i = 0; i < dim; ++i) {
                    const double re = (w * pa[i] * std::conj(pb[i])).real();
                    for (int q = 0; q < n; ++q) acc[q] += (i >> q & 1u) ? -re : re;
                }
            }
        }
        out.insert(out.end(), acc.begin(), acc.end());
    }

    void reset_inputs() {
        const size_t in_dim = size_t{1} << d_;
        std::vector<cplx> next(anc_dim_ * anc_dim_, cplx{});
        for (size_t a = 0; a < anc_dim_; ++a) {
            for (size_t b = 0; b < anc_dim_; ++b) {
                const cplx w = sigma_[a * anc_dim_ + b];
                if (w == cplx{}) continue;
                for (size_t c = 0; c < anc_dim_; ++c) {
                    for (size_t e = 0; e < anc_dim_; ++e) {
                        cplx s = 0.0;
                        for (size_t i = 0; i < in_dim; ++i) s += psi_[a][i | (c << d_)] * std::conj(psi_[b][i | (e << d_)]);
                        next[c * anc_dim_ + e] += w * s;
                    }
                }
            }
        }
        sigma_ = std::move(next);
    }

   private:
    int d_;
    int n_;
    size_t anc_dim_;
    const Circuit &circuit_;
    std::vector<cplx> sigma_;
    std::vector<std::vector<cplx>> psi_;
};

// Feeds rows first..last of `states` and records the schedule for the last
// `recorded` rows: input-qubit expectations before each reset, all qubits
// after the final step.
template <class Evolver>
std::vector<double> run_schedule(Evolver &ev, const Matrix &states, size_t first, size_t last, size_t recorded,
                                 int d, int n) {
    std::vector<double> out;
    for (size_t k = first; k <= last; ++k) {
        ev.step(states.row(k));
        if (k < last) {
            if (k + recorded > last) ev.measure(d, out);
            ev.reset_inputs();
        } else {
            ev.measure(n, out);
        }
    }
    return out;
}

std::vector<double> run(const Matrix &states, size_t first, size_t last, size_t recorded, const ReservoirSpec &spec,
                        const Circuit &circuit, FeatureEngine engine) {
    const int d = spec.n_input_qubits, n = spec.n_qubits();
    if (engine == FeatureEngine::Density) {
        DensityEvolver ev(spec, circuit);
        return run_schedule(ev, states, first, last, recorded, d, n);
    }
    AncillaBlockEvolver ev(spec, circuit);
    return run_schedule(ev, states, first, last, recorded, d, n);
}

void check_states(const Matrix &states, const ReservoirSpec &spec) {
    if (states.rows == 0) throw ShapeError("window must contain at least one state");
    if (static_cast<int>(states.cols) != spec.n_input_qubits) {
        throw ShapeError("window has " + std::to_string(states.cols) + " features, reservoir has " +
                         std::to_string(spec.n_input_qubits) + " input qubits");
    }
    for (size_t r = 0; r < states.rows; ++r) check_row(states.row(r), spec.n_input_qubits);
}

}  // namespace

QrcFeatures qrc_features_window(const Matrix &window, const ReservoirSpec &spec, FeatureEngine engine,
                                size_t window_index) {
    check_states(window, spec);
    const Circuit circuit = build_reservoir_circuit(spec);
    return {run(window, 0, window.rows - 1, window.rows, spec, circuit, engine), window_index};
}

std::vector<QrcFeatures> qrc_features_sequence(const Matrix &sequence, const ReservoirSpec &spec, size_t washout,
                                               Protocol protocol, FeatureEngine engine) {
    if (washout == 0) throw ShapeError("washout must be >= 1");
    if (washout > sequence.rows) {
        throw ShapeError("washout " + std::to_string(washout) + " exceeds sequence length " +
                         std::to_string(sequence.rows));
    }
    check_states(sequence, spec);
    const Circuit circuit = build_reservoir_circuit(spec);
    std::vector<QrcFeatures> out;
    out.reserve(sequence.rows - washout + 1);
    for (size_t t = washout - 1; t < sequence.rows; ++t) {
        const size_t first = protocol == Protocol::Rewinding ? t + 1 - washout : 0;
        out.push_back({run(sequence, first, t, washout, spec, circuit, engine), t});
    }
    return out;
}

}  // namespace qrc::reservoir

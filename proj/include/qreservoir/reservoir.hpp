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
#include <string_view>
#include <vector>

#include "qreservoir/matrix.hpp"
#include "qreservoir/qsim.hpp"

namespace qrc::reservoir {

enum class Family { CNOT, Rotation, EfficientSU2, IsingHamiltonian };

std::string_view family_name(Family f);
Family parse_family(std::string_view name);

/// Fixed reservoir definition. Input qubits are 0..d-1, ancillas d..N-1.
///
/// `params` holds, layer after layer:
///   Rotation          N angles in [0, 2pi)   (axes in `rotation_axes`)
///   EfficientSU2      N RY angles, then N RZ angles, all in [0, 2pi)
///   IsingHamiltonian  N local fields a_j, then N couplings J_{j,j+1 mod N},
///                     all in [-1, 1]
///   CNOT              nothing
/// Layer l draws from substream l of `seed` (see Rng::substream).
struct ReservoirSpec {
    Family family = Family::IsingHamiltonian;
    int n_input_qubits = 1;
    int n_ancilla = 1;
    int depth = 10;
    uint64_t seed = 0;
    std::vector<double> params;
    std::vector<qsim::GateKind> rotation_axes;

    int n_qubits() const { return n_input_qubits + n_ancilla; }

    /// Builds a spec and draws its frozen parameters.
    static ReservoirSpec make(Family family, int n_input_qubits, int n_ancilla, int depth, uint64_t seed);

    /// Shape checks plus a regeneration check: stored parameters must equal
    /// the ones the seed produces (IntegrityError otherwise).
    void validate() const;

    bool operator==(const ReservoirSpec &) const = default;
};

qsim::Circuit build_reservoir_circuit(const ReservoirSpec &spec);

/// RY(2 asin sqrt(s)) on a qubit that must currently be |0>.
void encode_value_inplace(qsim::DensityMatrix &state, int qubit, double s);
qsim::DensityMatrix encode_value(qsim::DensityMatrix state, int qubit, double s);

struct QrcFeatures {
    std::vector<double> values;
    size_t window_index = 0;
};

/// D = (T - 1) * d + N.
size_t feature_dimension(size_t window_length, int n_input_qubits, int n_qubits);

/// How the measure/reset schedule is simulated.
///
/// Density evolves the full 2^N x 2^N matrix gate by gate. AncillaBlock uses
/// that after every reset the register is |0..0><0..0| on the inputs times
/// a 2^a x 2^a ancilla block, so one step only needs 2^a statevector runs
/// of the reservoir circuit. Both give the same expectations up to rounding.
enum class FeatureEngine { Density, AncillaBlock };

std::string_view engine_name(FeatureEngine e);
FeatureEngine parse_engine(std::string_view name);

/// Rewinding-protocol features for one window (rows = time steps, columns
/// = features in [0, 1]). Output: partial input-qubit expectations for the
/// first T-1 steps in (time, qubit) order, then all N final expectations.
QrcFeatures qrc_features_window(const Matrix &window, const ReservoirSpec &spec,
                                FeatureEngine engine = FeatureEngine::Density, size_t window_index = 0);

enum class Protocol { Rewinding, Restarting };

/// One feature vector per t >= T-1 of a normalized sequence. Rewinding
/// re-runs only the trailing T states; Restarting runs the whole prefix
/// 0..t (resetting inputs between steps) and records the last T steps.
std::vector<QrcFeatures> qrc_features_sequence(const Matrix &sequence, const ReservoirSpec &spec, size_t washout,
                                               Protocol protocol = Protocol::Rewinding,
                                               FeatureEngine engine = FeatureEngine::Density);

}  // namespace qrc::reservoir

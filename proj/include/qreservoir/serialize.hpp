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

#include <filesystem>

#include <json.hpp>

#include "qreservoir/data.hpp"
#include "qreservoir/model.hpp"
#include "qreservoir/reservoir.hpp"

// JSON forms of the library types. Doubles are written in shortest
// round-trip form, so a save/load cycle is bit-exact.

namespace qrc {

using json = nlohmann::json;

json to_json(const reservoir::ReservoirSpec &spec);
reservoir::ReservoirSpec reservoir_spec_from_json(const json &j);

json to_json(const data::Normalizer &norm);
data::Normalizer normalizer_from_json(const json &j);

json to_json(const model::TrainConfig &config);
/// Missing keys keep their defaults; unknown keys are a SchemaError.
model::TrainConfig train_config_from_json(const json &j);

json to_json(const model::HybridParams &params);
model::HybridParams params_from_json(const json &j);

/// Everything needed to rebuild a predictor from raw trajectory rows.
struct ModelArtifact {
    model::ModelKind kind = model::ModelKind::QuReBot;
    model::HybridParams params;
    reservoir::ReservoirSpec reservoir;
    reservoir::FeatureEngine engine = reservoir::FeatureEngine::AncillaBlock;
    data::Normalizer normalizer;
    model::TrainConfig train;
    data::TargetSpace target_space = data::TargetSpace::Raw;
    size_t washout = 5;
    size_t horizon = 1;

    /// Predicts K x 2 positions from a T x d normalized window, in the
    /// artifact's target space.
    Matrix predict(const Matrix &window) const;
};

json to_json(const ModelArtifact &artifact);
ModelArtifact artifact_from_json(const json &j);
void save_model(const ModelArtifact &artifact, const std::filesystem::path &path);
ModelArtifact load_model(const std::filesystem::path &path);

/// Reads a whole file; IoError if it cannot be opened.
std::string read_file(const std::filesystem::path &path);
void write_file(const std::filesystem::path &path, std::string_view contents);

}  // namespace qrc

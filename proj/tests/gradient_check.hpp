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

#include <algorithm>
#include <cmath>

#include "qreservoir/model.hpp"
#include "qreservoir/rng.hpp"

namespace qrc::fixtures {

struct GradientInstance {
    model::HybridParams params;
    model::Batch batch;
};

/// Random parameters and batch. Redraws until no ReLU pre-activation is
/// within `kink` of zero, so central differences never straddle the kink.
inline GradientInstance random_instance(size_t d_feat, size_t td, size_t k, size_t batch, Rng &rng,
                                        double kink = 1e-3) {
    const model::Shapes s{td, d_feat, 2 * k};
    while (true) {
        GradientInstance g{model::HybridParams::zeros(s), {}};
        auto flat = g.params.flatten();
        for (auto &v : flat) v = rng.uniform(-1, 1);
        g.params.assign(flat);
        g.batch.inputs = Matrix(batch, td);
        g.batch.features = Matrix(batch, d_feat);
        g.batch.targets = Matrix(batch, 2 * k);
        for (auto &v : g.batch.inputs.data) v = rng.uniform();
        for (auto &v : g.batch.features.data) v = rng.uniform(-1, 1);
        for (auto &v : g.batch.targets.data) v = rng.uniform(-2, 2);
        bool near_kink = false;
        for (size_t b = 0; b < batch && !near_kink; ++b) {
            for (size_t j = 0; j < d_feat; ++j) {
                double pre = g.params.b_proj[j];
                for (size_t i = 0; i < td; ++i) pre += g.params.w_proj(j, i) * g.batch.inputs(b, i);
                if (std::abs(pre) < kink) near_kink = true;
            }
        }
        if (!near_kink) return g;
    }
}

/// Largest |analytic - numeric| / max(|analytic|, |numeric|, 1e-6) over
/// every parameter, numeric = central difference with step h.
inline double gradient_rel_error(const GradientInstance &g, model::ModelKind kind, double h = 1e-5) {
    const auto analytic = model::backward(g.params, g.batch, kind).flatten();
    auto theta = g.params.flatten();
    model::HybridParams probe = g.params;
    auto loss_at = [&](const std::vector<double> &t) {
        probe.assign(t);
        return model::loss_mse(model::predict_batch(probe, kind, g.batch), g.batch.targets);
    };
    double worst = 0.0;
    for (size_t i = 0; i < theta.size(); ++i) {
        const double keep = theta[i];
        theta[i] = keep + h;
        const double up = loss_at(theta);
        theta[i] = keep - h;
        const double down = loss_at(theta);
        theta[i] = keep;
        const double numeric = (up - down) / (2 * h);
        const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-6});
        worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
    }
    return worst;
}

}  // namespace qrc::fixtures
